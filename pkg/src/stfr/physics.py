"""Conservation laws: fluxes, entropy machinery and two-point functions.

All state arrays carry the conserved variables on their first axis, i.e. an
Euler state array has shape ``(3, ...)`` and a scalar state ``(1, ...)``.
Two-point functions broadcast over the trailing axes of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from stfr.errors import AdmissibilityError, ConfigurationError

ADVECTION_SPEED = 0.6
GAMMA = 1.4

# Ismail-Roe series switch on u = ((a - b)/(a + b))^2.  4-term series error is
# u^4/9, so 1e-4 keeps the branch jump below 1e-16 relative.
LOG_MEAN_SWITCH = 1e-4


def log_mean(a, b):
    """Logarithmic mean ``(a - b) / (ln a - ln b)`` (Ismail-Roe evaluation)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise AdmissibilityError("logarithmic mean needs positive arguments", state=(a, b))
    return log_mean_from_logs(a, b, np.log(a), np.log(b))


def log_mean_from_logs(a, b, log_a, log_b):
    """Logarithmic mean given precomputed ``log a`` and ``log b``.

    Uses ``f = (a - b)/(a + b)``; ``ln(a/b) = 2 f (1 + f^2/3 + f^4/5 + ...)``
    replaces the quotient when ``f^2`` is below :data:`LOG_MEAN_SWITCH`.
    """
    f = (a - b) / (a + b)
    u = f * f
    small = u < LOG_MEAN_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        big = (log_a - log_b) / (2.0 * f)
    series = 1.0 + u * (1.0 / 3.0 + u * (1.0 / 5.0 + u / 7.0))
    F = np.where(small, series, big)
    return (a + b) / (2.0 * F)


def _mean(a, b):
    return 0.5 * (a + b)


class PhysicsModel:
    """Base class; subclasses fill in the flux and entropy functions."""

    name = "model"
    n_states = 1
    #: True when entropy variables equal the conserved state (no projection needed)
    entropy_is_state = False
    #: True when the flux is linear in the state
    is_linear = False

    def flux(self, u):
        raise NotImplementedError

    def temporal_flux(self, u):
        return u

    def entropy(self, u):
        raise NotImplementedError

    def entropy_variables(self, u):
        raise NotImplementedError

    def conservative_from_entropy(self, v):
        raise NotImplementedError

    def entropy_potential(self, u):
        """``phi = v.u - s``."""
        return np.sum(self.entropy_variables(u) * u, axis=0) - self.entropy(u)

    def entropy_flux(self, u):
        raise NotImplementedError

    def spatial_entropy_potential(self, u):
        """``psi = v.f - F``."""
        return np.sum(self.entropy_variables(u) * self.flux(u), axis=0) - self.entropy_flux(u)

    def two_point_flux(self, ui, uj):
        raise NotImplementedError

    def two_point_state(self, ui, uj):
        raise NotImplementedError

    def two_point_aux(self, u):
        """Per-node data consumed by the ``*_aux`` two-point functions.

        Evaluating nonlinear per-node quantities once, instead of once per
        pair, is what makes flux differencing affordable.
        """
        return u

    def two_point_flux_aux(self, ai, aj):
        return self.two_point_flux(ai, aj)

    def two_point_state_aux(self, ai, aj):
        return self.two_point_state(ai, aj)

    def dissipation(self, uL, uR):
        """Dissipative part of the interface flux (added to the two-point flux)."""
        return np.zeros(np.broadcast_shapes(np.shape(uL), np.shape(uR)))

    def numerical_flux(self, uL, uR):
        """Interface flux between a left and a right state (x-oriented)."""
        return self.two_point_flux(uL, uR) + self.dissipation(uL, uR)

    def max_wave_speed(self, u):
        raise NotImplementedError

    def check_admissible(self, u):
        return u


class AdvectionModel(PhysicsModel):
    name = "advection"
    n_states = 1
    entropy_is_state = True
    is_linear = True

    def __init__(self, a=ADVECTION_SPEED, dissipation="upwind"):
        if dissipation not in ("upwind", "none"):
            raise ConfigurationError(f"advection dissipation must be upwind or none, got {dissipation!r}")
        self.a = float(a)
        self.dissipation_kind = dissipation

    def flux(self, u):
        return self.a * u

    def entropy(self, u):
        return 0.5 * u[0] ** 2

    def entropy_variables(self, u):
        return u

    def conservative_from_entropy(self, v):
        return v

    def entropy_flux(self, u):
        return 0.5 * self.a * u[0] ** 2

    def two_point_flux(self, ui, uj):
        return self.a * _mean(ui, uj)

    def two_point_state(self, ui, uj):
        return _mean(ui, uj)

    def dissipation(self, uL, uR):
        if self.dissipation_kind == "none":
            return super().dissipation(uL, uR)
        return -0.5 * abs(self.a) * (uR - uL)

    def max_wave_speed(self, u):
        return abs(self.a) * np.ones(np.shape(u)[1:])


class BurgersModel(PhysicsModel):
    name = "burgers"
    n_states = 1
    entropy_is_state = True

    def __init__(self, with_llf=False):
        self.with_llf = bool(with_llf)

    def flux(self, u):
        return 0.5 * u * u

    def entropy(self, u):
        return 0.5 * u[0] ** 2

    def entropy_variables(self, u):
        return u

    def conservative_from_entropy(self, v):
        return v

    def entropy_flux(self, u):
        return u[0] ** 3 / 3.0

    def two_point_flux(self, ui, uj):
        return (ui * ui + ui * uj + uj * uj) / 6.0

    def two_point_state(self, ui, uj):
        return _mean(ui, uj)

    def dissipation(self, uL, uR):
        if not self.with_llf:
            return super().dissipation(uL, uR)
        lam = np.maximum(np.abs(uL), np.abs(uR))
        return -0.5 * lam * (uR - uL)

    def max_wave_speed(self, u):
        return np.abs(u[0])


class EulerModel(PhysicsModel):
    """1D Euler equations with entropy ``s = -rho log(p rho^-gamma) / (gamma - 1)``."""

    name = "euler"
    n_states = 3
    entropy_is_state = False

    def __init__(self, dissipation="none", gamma=GAMMA):
        if dissipation not in ("none", "matrix"):
            raise ConfigurationError(f"euler dissipation must be none or matrix, got {dissipation!r}")
        self.gamma = float(gamma)
        self.dissipation_kind = dissipation

    # primitive helpers -----------------------------------------------------
    def primitives(self, u):
        u = np.asarray(u, dtype=float)
        rho, mom, E = u[0], u[1], u[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            vel = mom / rho
            p = (self.gamma - 1.0) * (E - 0.5 * mom * vel)
        if not (rho.min() > 0.0 and p.min() > 0.0):
            bad = "density" if not rho.min() > 0.0 else "pressure"
            raise AdmissibilityError(f"nonpositive {bad}", state=u)
        return rho, vel, p

    def check_admissible(self, u):
        self.primitives(u)
        return u

    def from_primitives(self, rho, vel, p):
        rho, vel, p = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, vel, p)))
        return np.stack([rho, rho * vel, p / (self.gamma - 1.0) + 0.5 * rho * vel * vel])

    # fluxes and entropy ------------------------------------------------------
    def flux(self, u):
        rho, vel, p = self.primitives(u)
        return np.stack([rho * vel, rho * vel * vel + p, vel * (u[2] + p)])

    def entropy(self, u):
        rho, _, p = self.primitives(u)
        g = self.gamma
        return -rho * np.log(p * rho ** (-g)) / (g - 1.0)

    def entropy_variables(self, u):
        rho, vel, p = self.primitives(u)
        g = self.gamma
        S = np.log(p) - g * np.log(rho)
        return np.stack([
            (g - S) / (g - 1.0) - 0.5 * rho * vel * vel / p,
            rho * vel / p,
            -rho / p,
        ])

    def conservative_from_entropy(self, v):
        g = self.gamma
        v1, v2, v3 = v[0], v[1], v[2]
        if np.any(v3 >= 0.0):
            raise AdmissibilityError("entropy variables map outside the admissible set", state=v)
        S = g - (g - 1.0) * (v1 - 0.5 * v2 * v2 / v3)
        rho = np.exp(-(S + np.log(-v3)) / (g - 1.0))
        return self.from_primitives(rho, -v2 / v3, -rho / v3)

    def entropy_potential(self, u):
        return np.asarray(u[0], dtype=float).copy()

    def entropy_flux(self, u):
        return self.entropy(u) * u[1] / u[0]

    def spatial_entropy_potential(self, u):
        return np.asarray(u[1], dtype=float).copy()

    def two_point_aux(self, u):
        """Stack of ``(rho, v, p, log rho, beta, log beta)`` with ``beta = rho/(2p)``."""
        rho, vel, p = self.primitives(u)
        beta = rho / (2.0 * p)
        return np.stack([rho, vel, p, np.log(rho), beta, np.log(beta)])

    def two_point_flux_aux(self, ai, aj):
        """Chandrashekar flux with Ranocha's pressure-equilibrium energy term."""
        rho_ln = log_mean_from_logs(ai[0], aj[0], ai[3], aj[3])
        beta_ln = log_mean_from_logs(ai[4], aj[4], ai[5], aj[5])
        vl, vr = ai[1], aj[1]
        v_avg = _mean(vl, vr)
        f1 = rho_ln * v_avg
        f2 = f1 * v_avg + _mean(ai[2], aj[2])
        # (rho/p)_ln = 2 beta_ln
        f3 = f1 * (0.5 * vl * vr + 1.0 / (2.0 * beta_ln * (self.gamma - 1.0))) + 0.5 * (ai[2] * vr + aj[2] * vl)
        return np.stack(np.broadcast_arrays(f1, f2, f3))

    def two_point_state_aux(self, ai, aj):
        """Entropy-conservative temporal state (log-mean density and beta)."""
        rho_ln = log_mean_from_logs(ai[0], aj[0], ai[3], aj[3])
        beta_ln = log_mean_from_logs(ai[4], aj[4], ai[5], aj[5])
        vl, vr = ai[1], aj[1]
        v_avg = _mean(vl, vr)
        v_tilde = v_avg * v_avg - 0.5 * _mean(vl * vl, vr * vr)
        s3 = rho_ln / (2.0 * beta_ln * (self.gamma - 1.0)) + rho_ln * v_tilde
        return np.stack(np.broadcast_arrays(rho_ln, rho_ln * v_avg, s3))

    def two_point_flux(self, ui, uj):
        return self.two_point_flux_aux(self.two_point_aux(ui), self.two_point_aux(uj))

    def two_point_state(self, ui, uj):
        return self.two_point_state_aux(self.two_point_aux(ui), self.two_point_aux(uj))

    def dissipation(self, uL, uR):
        """Matrix dissipation acting on the entropy-variable jump.

        ``-1/2 R |Lambda| T R^T [[v]]`` with eigenvectors ``R`` of the flux
        Jacobian and scaling ``T = diag(rho/(2 gamma), rho (gamma-1)/gamma,
        rho/(2 gamma))`` so that ``R T R^T = du/dv``, all evaluated at a
        log-mean averaged state.
        """
        if self.dissipation_kind == "none":
            return super().dissipation(uL, uR)
        g = self.gamma
        rl, vl, pl = self.primitives(uL)
        rr, vr, pr = self.primitives(uR)
        rho = log_mean(rl, rr)
        vel = _mean(vl, vr)
        beta_avg = _mean(rl / (2.0 * pl), rr / (2.0 * pr))
        p_hat = _mean(rl, rr) / (2.0 * beta_avg)
        a = np.sqrt(g * p_hat / rho)
        H = a * a / (g - 1.0) + 0.5 * vel * vel
        jump = self.entropy_variables(uR) - self.entropy_variables(uL)
        ones = np.ones_like(vel)
        R = np.array([
            [ones, ones, ones],
            [vel - a, vel, vel + a],
            [H - vel * a, 0.5 * vel * vel, H + vel * a],
        ])
        lam = np.abs(np.array([vel - a, vel, vel + a]))
        T = np.array([rho / (2.0 * g), rho * (g - 1.0) / g, rho / (2.0 * g)])
        # w = |Lambda| T R^T [[v]]
        RTj = np.einsum("ki...,k...->i...", R, jump)
        w = lam * T * RTj
        return -0.5 * np.einsum("ij...,j...->i...", R, w)

    def max_wave_speed(self, u):
        rho, vel, p = self.primitives(u)
        return np.abs(vel) + np.sqrt(self.gamma * p / rho)


def advection_model(a=ADVECTION_SPEED, dissipation="upwind") -> AdvectionModel:
    return AdvectionModel(a, dissipation)


def burgers_model(with_llf=False) -> BurgersModel:
    return BurgersModel(with_llf)


def euler_model(dissipation="none") -> EulerModel:
    return EulerModel(dissipation)


# -- problem data -------------------------------------------------------------


@dataclass
class BoundaryConditions:
    """Dirichlet data at ``t = 0`` plus optional exact solution and source.

    ``initial(x)`` returns a state-first array for the points ``x``; ``exact``
    and ``source`` take ``(x, t)``.
    """

    initial: Callable
    exact: Optional[Callable] = None
    source: Optional[Callable] = None
    name: str = ""


def advection_problem(a=ADVECTION_SPEED) -> BoundaryConditions:
    def exact(x, t):
        return (2.0 * np.sin(np.pi * (x - a * t)) + 1.01)[None]

    return BoundaryConditions(lambda x: exact(x, 0.0), exact, None, "advection-sine")


def burgers_manufactured() -> BoundaryConditions:
    def exact(x, t):
        return np.cos(np.pi * (x - t))[None]

    def source(x, t):
        th = np.pi * (x - t)
        return (np.pi * np.sin(th) * (1.0 - np.cos(th)))[None]

    return BoundaryConditions(lambda x: exact(x, 0.0), exact, source, "burgers-mms")


def burgers_entropy_problem() -> BoundaryConditions:
    def initial(x):
        return (0.2 * np.sin(np.pi * (x - np.pi / 10.0)))[None]

    return BoundaryConditions(initial, None, None, "burgers-shock")


def euler_manufactured(gamma=GAMMA):
    """Exact solution and source for the smooth Euler convergence case."""

    def exact(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        w = 2.0 + 0.1 * np.sin(np.pi * (x - 2.0 * t))
        return np.stack([w, w, w * w])

    def source(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        th = np.pi * (x - 2.0 * t)
        c, s = np.cos(th), np.sin(th)
        g = gamma
        return np.stack([
            -np.pi / 10.0 * c,
            np.pi / 100.0 * c * (5.0 * (7.0 * g - 9.0) + 2.0 * (g - 1.0) * s),
            np.pi / 100.0 * c * (5.0 * (7.0 * g - 15.0) + 2.0 * (g - 2.0) * s),
        ])

    return exact, source


def euler_manufactured_problem() -> BoundaryConditions:
    exact, source = euler_manufactured()
    return BoundaryConditions(lambda x: exact(x, 0.0), exact, source, "euler-mms")


def euler_discontinuous_problem(gamma=GAMMA) -> BoundaryConditions:
    model = EulerModel(gamma=gamma)

    def initial(x):
        x = np.asarray(x, dtype=float)
        left = x <= 0.3
        rho = np.where(left, 1.0, 1.125)
        p = np.where(left, 1.0, 1.1)
        return model.from_primitives(rho, np.zeros_like(x), p)

    return BoundaryConditions(initial, None, None, "euler-discontinuous")
