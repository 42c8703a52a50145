"""scikit-learn style facade over discretization + solver.

``fit`` solves the space-time problem, ``predict`` evaluates the discrete
solution at ``(x, t)`` points and ``score`` returns the negative error, so
parameter sweeps can be written with ``clone``/``set_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from stfr import physics
from stfr.diagnostics import l2_error
from stfr.errors import ConfigurationError
from stfr.mesh import build_mesh
from stfr.residual import Discretization
from stfr.solver import SolverConfig, solve_coupled, solve_march

MODELS = ("advection", "burgers", "euler")
PROBLEMS = {
    "advection": {"sine": physics.advection_problem},
    "burgers": {"manufactured": physics.burgers_manufactured, "shock": physics.burgers_entropy_problem},
    "euler": {"manufactured": physics.euler_manufactured_problem, "discontinuous": physics.euler_discontinuous_problem},
}
DEFAULT_PROBLEM = {"advection": "sine", "burgers": "manufactured", "euler": "manufactured"}
DEFAULT_SCHEME = {"advection": "ESFR", "burgers": "NSFR", "euler": "NSFR"}
DEFAULT_DISSIPATION = {"advection": "upwind", "burgers": "llf", "euler": "matrix"}


def make_model(name, dissipation="auto"):
    if name not in MODELS:
        raise ConfigurationError(f"unknown model {name!r}; expected one of {MODELS}")
    if dissipation in (None, "auto"):
        dissipation = DEFAULT_DISSIPATION[name]
    if name == "advection":
        return physics.advection_model(dissipation=dissipation)
    if name == "burgers":
        if dissipation not in ("llf", "none"):
            raise ConfigurationError(f"burgers dissipation must be llf or none, got {dissipation!r}")
        return physics.burgers_model(with_llf=dissipation == "llf")
    return physics.euler_model(dissipation=dissipation)


def make_problem(model_name, problem="auto"):
    if model_name not in MODELS:
        raise ConfigurationError(f"unknown model {model_name!r}; expected one of {MODELS}")
    if problem in (None, "auto"):
        problem = DEFAULT_PROBLEM[model_name]
    try:
        return PROBLEMS[model_name][problem]()
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {problem!r} for {model_name}; expected one of {sorted(PROBLEMS[model_name])}"
        ) from None


class SpaceTimeFRSolver(BaseEstimator):
    """Space-time FR solve on an ``N x N`` grid over ``[0, 2] x [0, 2]``.

    Parameters mirror the run configuration: ``model`` (advection, burgers,
    euler), ``problem`` (``auto`` picks the smooth manufactured case),
    ``scheme`` (ESFR, NSFR or ``auto``), degree ``p``, grid size ``N``,
    correction parameter ``c`` (``"c_DG"``, ``"c_Hu"`` or a number), node
    families, over-integration ``n_oi``, ``temporal_flux`` (``upwind`` or
    ``two_point``), spatial ``dissipation``, the NSFR ``entropy_projection``
    and solver settings.  ``mode="auto"``
    marches with the upwind temporal flux and solves coupled otherwise.
    """

    def __init__(self, model="advection", problem="auto", scheme="auto", p=3, N=8, c="c_DG",
                 soln_nodes="GLL", flux_nodes="GL", n_oi=0, temporal_flux="upwind",
                 dissipation="auto", entropy_projection="solution", mode="auto",
                 newton_tol=1e-10, krylov_rtol=1e-4, krylov_restart=60, max_newton=30,
                 preconditioner="none"):
        self.model = model
        self.problem = problem
        self.scheme = scheme
        self.p = p
        self.N = N
        self.c = c
        self.soln_nodes = soln_nodes
        self.flux_nodes = flux_nodes
        self.n_oi = n_oi
        self.temporal_flux = temporal_flux
        self.dissipation = dissipation
        self.entropy_projection = entropy_projection
        self.mode = mode
        self.newton_tol = newton_tol
        self.krylov_rtol = krylov_rtol
        self.krylov_restart = krylov_restart
        self.max_newton = max_newton
        self.preconditioner = preconditioner

    def _resolved_mode(self):
        mode = self.mode
        if mode == "auto":
            mode = "march" if self.temporal_flux == "upwind" else "coupled"
        if mode == "march" and self.temporal_flux != "upwind":
            raise ConfigurationError("a two-point temporal flux couples all slabs; use mode=coupled")
        return mode

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            mode=self._resolved_mode(), newton_tol=self.newton_tol, krylov_rtol=self.krylov_rtol,
            krylov_restart=self.krylov_restart, max_newton=self.max_newton,
            preconditioner=self.preconditioner,
        )

    def build_discretization(self) -> Discretization:
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; expected one of {MODELS}")
        scheme = DEFAULT_SCHEME[self.model] if self.scheme == "auto" else self.scheme
        return Discretization(
            make_model(self.model, self.dissipation), make_problem(self.model, self.problem),
            build_mesh(self.N, self.N), int(self.p), scheme, self.c, int(self.n_oi),
            self.soln_nodes, self.flux_nodes, self.temporal_flux, self.entropy_projection,
        )

    def fit(self, X=None, y=None):
        """Solve the discrete system; ``X`` and ``y`` are ignored."""
        config = self.solver_config()
        disc = self.build_discretization()
        if config.mode == "march":
            field, stats = solve_march(disc, config)
        else:
            field, stats = solve_coupled(disc, config)
        self.discretization_ = disc
        self.field_ = field
        self.stats_ = stats
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        """Solution at points ``X[:, 0] = x``, ``X[:, 1] = t``.

        Returns shape ``(n,)`` for scalar laws and ``(n, n_states)`` otherwise.
        """
        check_is_fitted(self, "field_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (x, t), got {X.shape[1]}")
        vals = self.discretization_.evaluate(self.field_, X[:, 0], X[:, 1]).T
        return vals[:, 0] if vals.shape[1] == 1 else vals

    def error(self, states=None) -> float:
        check_is_fitted(self, "field_")
        return l2_error(self.discretization_, self.field_, states=states)

    def score(self, X=None, y=None):
        """Negative error: L2 against the exact solution, or RMS against ``y``."""
        if X is None:
            return -self.error()
        pred = self.predict(X)
        y = np.asarray(y, dtype=float).reshape(pred.shape)
        return -float(np.sqrt(np.mean((pred - y) ** 2)))
