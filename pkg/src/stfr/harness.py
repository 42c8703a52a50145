"""Experiment driver: convergence tables, c-sweeps, entropy and cost studies.

Each ``run_*`` function takes a :class:`RunConfig` and returns a
:class:`ResultTable`; :func:`write_csv` serialises it with ``#`` metadata
lines followed by one header row.  Sweeps are built from a base
:class:`SpaceTimeFRSolver` with ``clone``/``set_params``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import platform
import sys
from dataclasses import dataclass, field

import numpy as np
import scipy
from sklearn.base import clone

from stfr import __version__
from stfr.config import ALL_NODE_COMBOS, RunConfig
from stfr.diagnostics import conservation_residual, convergence_rates, entropy_series
from stfr.errors import AdmissibilityError, ConfigurationError, NonconvergenceError, StabilityError
from stfr.estimator import SpaceTimeFRSolver
from stfr.mol import MolConfig, SpatialESFR, mol_advance, stable_dt
from stfr.operators import resolve_c
from stfr.physics import advection_model, advection_problem

RUN_ERRORS = (NonconvergenceError, AdmissibilityError, StabilityError)
ENTROPY_PROBLEM = {"burgers": "shock", "euler": "discontinuous"}


@dataclass
class ResultTable:
    command: str
    config: RunConfig
    columns: list
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    ok: bool = True

    def add(self, **row):
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append(row)

    def column(self, name):
        return [r[name] for r in self.rows]


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_csv(table: ResultTable, stream=None) -> str:
    """Write ``table`` to ``stream`` (or return the text when ``None``)."""
    buf = io.StringIO()
    buf.write(f"# stfr {__version__} {table.command}\n")
    buf.write(f"# config_hash: {table.config.fingerprint()}\n")
    buf.write(f"# versions: python {platform.python_version()} numpy {np.__version__} scipy {scipy.__version__}\n")
    for line in table.config.canonical().splitlines():
        buf.write(f"# {line}\n")
    for note in table.notes:
        buf.write(f"# note: {note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(row[c]) for c in table.columns])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def read_csv(text: str):
    """Parse :func:`write_csv` output into ``(metadata_lines, rows as dicts)``."""
    lines = text.splitlines()
    meta = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return meta, list(csv.DictReader(body))


# -- helpers ---------------------------------------------------------------

def base_estimator(cfg: RunConfig, **overrides) -> SpaceTimeFRSolver:
    scheme = cfg.resolved_scheme()
    params = dict(
        model=cfg.model, problem=cfg.problem, scheme=scheme.upper() if scheme != "mol" else "ESFR",
        soln_nodes=cfg.soln_nodes, flux_nodes=cfg.flux_nodes, n_oi=cfg.n_oi,
        temporal_flux=cfg.temporal_flux, dissipation=cfg.dissipation,
        entropy_projection=cfg.entropy_projection, mode=cfg.mode, newton_tol=cfg.newton_tol,
        krylov_rtol=cfg.krylov_rtol, krylov_restart=cfg.krylov_restart, max_newton=cfg.max_newton,
        preconditioner=cfg.preconditioner,
    )
    params.update(overrides)
    return SpaceTimeFRSolver(**params)


def _row_config(cfg: RunConfig, p, N, c, combo, **extra) -> RunConfig:
    soln, flux = combo.split("/")
    return dataclasses.replace(cfg, p=(p,), N=(N,), c=(c,), soln_nodes=soln, flux_nodes=flux,
                               node_combos=(), cases=(), **extra)


def _c_value(c, p) -> float:
    return resolve_c(c, p)


def _fit(est: SpaceTimeFRSolver):
    """Fit ``est``; returns ``(est, None)`` or ``(None, message)``."""
    try:
        return est.fit(), None
    except RUN_ERRORS as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _stats_cols(est):
    if est is None:
        return dict(newton_iterations=-1, krylov_iterations=-1, rhs_assembly_count=-1, last_slab_rhs=-1)
    st = est.stats_
    return dict(newton_iterations=st.newton_iterations, krylov_iterations=st.krylov_iterations,
                rhs_assembly_count=st.rhs_assembly_count, last_slab_rhs=st.last_slab_rhs)


# -- convergence -------------------------------------------------------------

CONVERGENCE_COLUMNS = ["model", "scheme", "p", "c", "c_value", "soln_nodes", "flux_nodes", "N",
                       "l2_error", "rate", "converged", "newton_iterations", "krylov_iterations",
                       "rhs_assembly_count", "last_slab_rhs", "message", "config_hash"]


def run_convergence(cfg: RunConfig) -> ResultTable:
    """Error and observed order per ``(p, c, node combo)`` over the ``N`` list.

    A run that fails is recorded with ``converged = false`` and the sweep
    continues; the rate after a failed level is NaN.
    """
    if cfg.resolved_scheme() == "mol":
        raise ConfigurationError("use order-vs-c for the method-of-lines reference")
    table = ResultTable("converge", cfg, CONVERGENCE_COLUMNS)
    states = cfg.error_state_indices()
    base = base_estimator(cfg)
    for p in cfg.p:
        for c in cfg.c:
            for combo in cfg.combos():
                soln, flux = combo.split("/")
                errors = []
                for N in cfg.N:
                    est, msg = _fit(clone(base).set_params(p=p, N=N, c=c, soln_nodes=soln, flux_nodes=flux))
                    err = est.error(states=states) if est is not None else math.nan
                    errors.append(err)
                    rate = math.nan
                    if len(errors) > 1 and errors[-2] > 0 and err > 0:
                        rate = float(convergence_rates(errors[-2:], cfg.N[len(errors) - 2:len(errors)])[1])
                    table.ok &= est is not None
                    table.add(model=cfg.model, scheme=cfg.resolved_scheme(), p=p, c=c, c_value=_c_value(c, p),
                              soln_nodes=soln, flux_nodes=flux, N=N, l2_error=err, rate=rate,
                              converged=est is not None, message=msg or "",
                              config_hash=_row_config(cfg, p, N, c, combo).fingerprint(), **_stats_cols(est))
    return table


# -- order vs c ---------------------------------------------------------------

ORDER_COLUMNS = ["scheme", "p", "c", "c_value", "soln_nodes", "flux_nodes", "N_coarse", "N_fine",
                 "error_coarse", "error_fine", "rate", "rate_half_dt", "converged", "config_hash"]


def mol_final_error(p, N, c, soln="GLL", flux="GL", n_oi=0, cfl=0.05, dt=None) -> float:
    """Advection error at ``t = 2`` of the RK54 method-of-lines reference."""
    problem = advection_problem()
    spatial = SpatialESFR(advection_model(), N, p, c, (0.0, 2.0), soln, flux, n_oi)
    u0 = spatial.project(problem.initial)
    uT = mol_advance(u0, spatial, MolConfig(t_final=2.0, cfl=cfl, dt=dt))
    return spatial.l2_error(uT, problem.exact, 2.0)


def _mol_dt(p, N, c, soln, flux, n_oi, cfl):
    spatial = SpatialESFR(advection_model(), N, p, c, (0.0, 2.0), soln, flux, n_oi)
    return stable_dt(spatial, spatial.project(advection_problem().initial), cfl)


def run_order_vs_c(cfg: RunConfig) -> ResultTable:
    """Observed order from the last two ``N`` levels for each ``c``.

    ``scheme=auto`` runs both the space-time scheme (``st``) and the RK54
    method-of-lines reference (``mol``); advection only.
    """
    if cfg.model != "advection":
        raise ConfigurationError("order-vs-c compares against the advection method-of-lines reference")
    if len(cfg.N) < 2:
        raise ConfigurationError("order-vs-c needs two N levels")
    schemes = {"auto": ("st", "mol"), "esfr": ("st",), "mol": ("mol",), "nsfr": ("st",)}[cfg.scheme]
    Nc, Nf = cfg.N[-2], cfg.N[-1]
    table = ResultTable("order-vs-c", cfg, ORDER_COLUMNS)
    base = base_estimator(cfg)
    for p in cfg.p:
        for combo in cfg.combos():
            soln, flux = combo.split("/")
            for c in cfg.c:
                for scheme in schemes:
                    errs, ok, half = [], True, math.nan
                    for N in (Nc, Nf):
                        if scheme == "st":
                            est, _ = _fit(clone(base).set_params(p=p, N=N, c=c, soln_nodes=soln, flux_nodes=flux))
                            errs.append(est.error() if est is not None else math.nan)
                            ok &= est is not None
                        else:
                            try:
                                errs.append(mol_final_error(p, N, c, soln, flux, cfg.n_oi, cfg.mol_cfl))
                            except StabilityError:
                                errs.append(math.nan)
                                ok = False
                    rate = math.log(errs[0] / errs[1]) / math.log(Nf / Nc) if ok else math.nan
                    if scheme == "mol" and ok and cfg.mol_check_dt:
                        e_half = [
                            mol_final_error(p, N, c, soln, flux, cfg.n_oi,
                                            dt=0.5 * _mol_dt(p, N, c, soln, flux, cfg.n_oi, cfg.mol_cfl))
                            for N in (Nc, Nf)
                        ]
                        half = math.log(e_half[0] / e_half[1]) / math.log(Nf / Nc)
                    table.ok &= ok
                    table.add(scheme=scheme, p=p, c=c, c_value=_c_value(c, p), soln_nodes=soln,
                              flux_nodes=flux, N_coarse=Nc, N_fine=Nf, error_coarse=errs[0],
                              error_fine=errs[1], rate=rate, rate_half_dt=half, converged=ok,
                              config_hash=_row_config(cfg, p, Nf, c, combo,
                                                      scheme="mol" if scheme == "mol" else "esfr").fingerprint())
    return table


# -- entropy -----------------------------------------------------------------

PRESERVE_COLUMNS = ["model", "c", "c_value", "N", "p", "soln_nodes", "flux_nodes", "preservation_residual",
                    "projection_term", "conservation_max", "newton_iterations", "converged", "message",
                    "config_hash"]
STABLE_COLUMNS = ["model", "c", "c_value", "N", "p", "soln_nodes", "flux_nodes", "level", "t", "entropy",
                  "increment", "max_increment", "total_change", "converged", "message", "config_hash"]


def _entropy_cases(cfg: RunConfig, default_combos=None):
    if cfg.cases:
        return list(cfg.cases)
    return [(N, p, combo) for combo in cfg.combos(default_combos) for p in cfg.p for N in cfg.N]


def _entropy_cfg(cfg: RunConfig) -> RunConfig:
    if cfg.model == "advection":
        raise ConfigurationError("entropy studies cover burgers and euler")
    changes = {}
    if cfg.problem == "auto":
        changes["problem"] = ENTROPY_PROBLEM[cfg.model]
    if cfg.dissipation == "auto":
        changes["dissipation"] = "none"
    if cfg.scheme == "auto":
        changes["scheme"] = "nsfr"
    changes["temporal_flux"] = "two_point" if cfg.entropy_mode == "preserve" else "upwind"
    if cfg.entropy_mode == "preserve":
        changes["mode"] = "coupled"
    return dataclasses.replace(cfg, **changes)


def run_entropy_study(cfg: RunConfig) -> ResultTable:
    """``entropy_mode=preserve``: coupled two-point runs, one row per case.

    ``entropy_mode=stable``: upwind-in-time runs, one row per slab boundary
    with the entropy total and its increment.
    """
    cfg = _entropy_cfg(cfg)
    preserve = cfg.entropy_mode == "preserve"
    table = ResultTable("entropy", cfg, PRESERVE_COLUMNS if preserve else STABLE_COLUMNS)
    base = base_estimator(cfg)
    for c in cfg.c:
        for N, p, combo in _entropy_cases(cfg):
            soln, flux = combo.split("/")
            est, msg = _fit(clone(base).set_params(p=p, N=N, c=c, soln_nodes=soln, flux_nodes=flux))
            common = dict(model=cfg.model, c=c, c_value=_c_value(c, p), N=N, p=p, soln_nodes=soln,
                          flux_nodes=flux, converged=est is not None, message=msg or "",
                          config_hash=_row_config(cfg, p, N, c, combo).fingerprint())
            table.ok &= est is not None
            if est is None:
                if preserve:
                    table.add(preservation_residual=math.nan, projection_term=math.nan,
                              conservation_max=math.nan, newton_iterations=-1, **common)
                else:
                    table.add(level=-1, t=math.nan, entropy=math.nan, increment=math.nan,
                              max_increment=math.nan, total_change=math.nan, **common)
                continue
            disc = est.discretization_
            report = entropy_series(disc, est.field_)
            if preserve:
                table.add(preservation_residual=report.preservation_residual,
                          projection_term=report.projection_term,
                          conservation_max=float(np.max(conservation_residual(disc, est.field_))),
                          newton_iterations=est.stats_.newton_iterations, **common)
            else:
                inc = np.concatenate([[math.nan], report.increments])
                for k, total in enumerate(report.totals):
                    table.add(level=k, t=k * disc.mesh.dt, entropy=float(total), increment=float(inc[k]),
                              max_increment=report.max_increment, total_change=report.total_change, **common)
    return table


# -- cost --------------------------------------------------------------------

COST_COLUMNS = ["model", "p", "N", "c", "c_value", "soln_nodes", "flux_nodes", "last_slab_rhs",
                "rhs_assembly_count", "krylov_iterations", "newton_iterations", "ratio_to_gllgl",
                "ratio_to_c0", "converged", "config_hash"]


def run_cost_study(cfg: RunConfig) -> ResultTable:
    """Right-hand-side assemblies of the last timeslab per ``(node combo, c)``.

    Reported raw and normalised two ways: by the GLL/GL run at the same
    ``c`` and by the same node combo at ``c = 0``.
    """
    if cfg.model != "advection":
        cfg = _entropy_cfg(dataclasses.replace(cfg, entropy_mode="stable"))
    table = ResultTable("cost", cfg, COST_COLUMNS)
    base = base_estimator(cfg)
    counts = {}
    for p in cfg.p:
        for N in cfg.N:
            for combo in cfg.combos(ALL_NODE_COMBOS):
                soln, flux = combo.split("/")
                for c in cfg.c:
                    est, _ = _fit(clone(base).set_params(p=p, N=N, c=c, soln_nodes=soln, flux_nodes=flux))
                    table.ok &= est is not None
                    cols = _stats_cols(est)
                    counts[(p, N, combo, c)] = cols["last_slab_rhs"]
                    table.add(model=cfg.model, p=p, N=N, c=c, c_value=_c_value(c, p), soln_nodes=soln,
                              flux_nodes=flux, last_slab_rhs=cols["last_slab_rhs"],
                              rhs_assembly_count=cols["rhs_assembly_count"],
                              krylov_iterations=cols["krylov_iterations"],
                              newton_iterations=cols["newton_iterations"], ratio_to_gllgl=math.nan,
                              ratio_to_c0=math.nan, converged=est is not None,
                              config_hash=_row_config(cfg, p, N, c, combo).fingerprint())
    zero_c = {}
    for row in table.rows:
        if row["c_value"] == 0.0:
            zero_c.setdefault((row["p"], row["N"], row["soln_nodes"] + "/" + row["flux_nodes"]), row["last_slab_rhs"])
    for row in table.rows:
        ref = counts.get((row["p"], row["N"], "GLL/GL", row["c"]))
        if ref and ref > 0 and row["last_slab_rhs"] >= 0:
            row["ratio_to_gllgl"] = row["last_slab_rhs"] / ref
        ref0 = zero_c.get((row["p"], row["N"], row["soln_nodes"] + "/" + row["flux_nodes"]))
        if ref0 and ref0 > 0 and row["last_slab_rhs"] >= 0:
            row["ratio_to_c0"] = row["last_slab_rhs"] / ref0
    return table


def emit(table: ResultTable, output: str):
    if output in ("-", ""):
        write_csv(table, sys.stdout)
    else:
        with open(output, "w") as fh:
            write_csv(table, fh)
