"""Run configurations: ``key=value`` files, overrides and fingerprints.

File format: one ``key = value`` per line, ``#`` starts a comment, list
values are comma separated.  Later sources override earlier ones (file, then
command-line flags).  Every key is a field of :class:`RunConfig`.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from stfr.errors import ConfigurationError
from stfr.operators import resolve_c

MODELS = ("advection", "burgers", "euler")
SCHEMES = ("auto", "esfr", "nsfr", "mol")
NODE_KINDS = ("GL", "GLL")
TEMPORAL_FLUXES = ("upwind", "two_point")
DISSIPATIONS = ("auto", "none", "llf", "matrix", "upwind")
ALL_NODE_COMBOS = ("GLL/GL", "GL/GL", "GLL/GLL", "GL/GLL")


def _split(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {value!r}")


def _as_int_list(value) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in _split(value))
    except ValueError:
        raise ConfigurationError(f"expected comma-separated integers, got {value!r}") from None


def parse_c_values(value) -> tuple[str, ...]:
    """Comma list of ``c_DG``, ``c_Hu``, numbers or ``log:a:b:n`` ranges.

    ``log:-7:4:12`` expands to 12 log-spaced values from 1e-7 to 1e4.
    """
    out = []
    for item in _split(value):
        if item.startswith("log:"):
            try:
                _, a, b, n = item.split(":")
                a, b, n = float(a), float(b), int(n)
            except ValueError:
                raise ConfigurationError(f"bad log range {item!r}; expected log:a:b:n") from None
            if n < 1:
                raise ConfigurationError("log range needs at least one point")
            step = (b - a) / (n - 1) if n > 1 else 0.0
            out.extend(repr(10.0 ** (a + k * step)) for k in range(n))
        else:
            resolve_c(item, 3)  # validates the spelling
            out.append(item)
    if not out:
        raise ConfigurationError("empty c list")
    return tuple(out)


def parse_node_combos(value) -> tuple[str, ...]:
    combos = []
    for item in _split(value):
        parts = item.split("/")
        if len(parts) != 2 or any(p not in NODE_KINDS for p in parts):
            raise ConfigurationError(f"node combo must look like GLL/GL, got {item!r}")
        combos.append(item)
    return tuple(combos)


def parse_cases(value) -> tuple[tuple[int, int, str], ...]:
    """``N:p:soln/flux`` items, e.g. ``2:3:GLL/GL,4:2:GL/GL``."""
    cases = []
    for item in _split(value):
        try:
            N, p, nodes = item.split(":")
            cases.append((int(N), int(p), parse_node_combos(nodes)[0]))
        except ValueError:
            raise ConfigurationError(f"bad case {item!r}; expected N:p:soln/flux") from None
    return tuple(cases)


@dataclass(frozen=True)
class RunConfig:
    model: str = "advection"
    problem: str = "auto"
    scheme: str = "auto"
    p: tuple = (3,)
    N: tuple = (2, 4, 8, 16, 32, 64)
    c: tuple = ("c_DG", "c_Hu")
    soln_nodes: str = "GLL"
    flux_nodes: str = "GL"
    node_combos: tuple = ()
    cases: tuple = ()
    n_oi: int = 0
    temporal_flux: str = "upwind"
    dissipation: str = "auto"
    entropy_projection: str = "solution"
    mode: str = "auto"
    newton_tol: float = 1e-10
    krylov_rtol: float = 1e-4
    krylov_restart: int = 60
    max_newton: int = 30
    preconditioner: str = "none"
    entropy_mode: str = "stable"
    error_states: str = "auto"
    mol_cfl: float = 0.05
    mol_check_dt: bool = False
    output: str = "-"
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "mol" and self.model != "advection":
            raise ConfigurationError("the method-of-lines reference covers advection only")
        if self.soln_nodes not in NODE_KINDS or self.flux_nodes not in NODE_KINDS:
            raise ConfigurationError(f"node kinds must be in {NODE_KINDS}")
        if self.temporal_flux not in TEMPORAL_FLUXES:
            raise ConfigurationError(f"temporal_flux must be one of {TEMPORAL_FLUXES}")
        if self.dissipation not in DISSIPATIONS:
            raise ConfigurationError(f"dissipation must be one of {DISSIPATIONS}")
        if self.mode not in ("auto", "march", "coupled"):
            raise ConfigurationError("mode must be auto, march or coupled")
        if self.temporal_flux == "two_point" and self.mode == "march":
            raise ConfigurationError("a two-point temporal flux couples all slabs; it needs mode=coupled")
        if self.temporal_flux == "two_point" and self.scheme in ("esfr", "mol"):
            raise ConfigurationError("a two-point temporal flux needs the NSFR scheme")
        if self.entropy_projection not in ("solution", "flux"):
            raise ConfigurationError("entropy_projection must be solution or flux")
        if self.entropy_mode not in ("stable", "preserve"):
            raise ConfigurationError("entropy_mode must be stable or preserve")
        if any(p < 1 for p in self.p) or any(n < 1 for n in self.N) or self.n_oi < 0:
            raise ConfigurationError("p and N must be >= 1 and n_oi >= 0")
        if not (self.newton_tol > 0 and self.krylov_rtol > 0 and self.mol_cfl > 0):
            raise ConfigurationError("tolerances and mol_cfl must be positive")
        if self.krylov_restart < 1 or self.max_newton < 1:
            raise ConfigurationError("krylov_restart and max_newton must be >= 1")

    # -- construction -----------------------------------------------------
    @classmethod
    def from_mapping(cls, mapping: dict, base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            key = key.strip().replace("-", "_")
            if key not in known:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key].default)
        return dataclasses.replace(base, **kwargs)

    @classmethod
    def from_file(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        return cls.from_mapping(read_config_file(path), base)

    def with_overrides(self, **kwargs) -> "RunConfig":
        return RunConfig.from_mapping(kwargs, self)

    # -- derived values ---------------------------------------------------
    def resolved_scheme(self) -> str:
        if self.scheme != "auto":
            return self.scheme
        return "esfr" if self.model == "advection" else "nsfr"

    def combos(self, default=None) -> tuple[str, ...]:
        if self.node_combos:
            return self.node_combos
        return tuple(default) if default else (f"{self.soln_nodes}/{self.flux_nodes}",)

    def error_state_indices(self):
        """States entering the L2 error; Euler tables report density only."""
        if self.error_states == "auto":
            return [0] if self.model == "euler" else None
        if self.error_states == "all":
            return None
        return list(_as_int_list(self.error_states))

    def canonical(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "output":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(":".join(map(str, x)) if isinstance(x, tuple) else str(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines)

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


_PARSERS = {
    "p": _as_int_list,
    "N": _as_int_list,
    "c": parse_c_values,
    "node_combos": parse_node_combos,
    "cases": parse_cases,
    "mol_check_dt": _as_bool,
}


def _coerce(key, raw, default):
    if key in _PARSERS:
        return _PARSERS[key](raw)
    if isinstance(raw, type(default)) and not isinstance(default, bool):
        return raw
    try:
        if isinstance(default, bool):
            return _as_bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None
    return str(raw).strip()


def read_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))
