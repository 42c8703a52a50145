"""Method-of-lines reference: 1D ESFR in space, explicit low-storage RK in time."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stfr.errors import ConfigurationError, StabilityError
from stfr.operators import ElementGeometry, build_operators
from stfr.quadrature import eval_basis, make_rule

# Carpenter & Kennedy (1994) five-stage fourth-order 2N-storage scheme
RK54_A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
RK54_B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
RK54_C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])


@dataclass
class MolConfig:
    t_final: float = 2.0
    cfl: float = 0.05
    dt: float | None = None

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.t_final > 0:
            raise ConfigurationError("t_final must be positive")


def rk54_step(rhs, t, u, dt):
    """One step of the low-storage RK54 scheme."""
    k = np.zeros_like(u)
    for a, b, c in zip(RK54_A, RK54_B, RK54_C):
        k = a * k + dt * rhs(t + c * dt, u)
        u = u + b * k
    return u


class SpatialESFR:
    """Periodic 1D ESFR semi-discretization ``du/dt = -R(u)`` for a scalar or system model."""

    def __init__(self, model, Ks, p, c=0.0, x_range=(0.0, 2.0), soln_kind="GLL", flux_kind="GL", n_oi=0):
        self.model = model
        self.Ks = int(Ks)
        self.x_range = tuple(map(float, x_range))
        self.dx = (self.x_range[1] - self.x_range[0]) / self.Ks
        ops = build_operators(p, n_oi, soln_kind, flux_kind, c, ElementGeometry(self.dx, self.dx))
        self.ops = ops
        W = np.diag(ops.wq)
        MK = ops.M1_ref + ops.K1_ref
        scale = 2.0 / self.dx
        self.A_vol = scale * np.linalg.solve(MK, ops.V1.T @ W @ ops.Dq1)
        self.A_L = scale * np.linalg.solve(MK, ops.eL_s)
        self.A_R = scale * np.linalg.solve(MK, ops.eR_s)
        self.x_nodes = self.x_range[0] + self.dx * (np.arange(self.Ks)[:, None] + 0.5 * (ops.rule_soln.nodes[None, :] + 1.0))

    def project(self, u0):
        """Nodal coefficients of ``u0`` on the solution nodes, ``(ns, Ks, n)``."""
        return np.asarray(u0(self.x_nodes), dtype=float).reshape(self.model.n_states, self.Ks, self.ops.n)

    def residual(self, u):
        ops, model = self.ops, self.model
        uq = u @ ops.V1.T
        fq = model.flux(uq)
        fL, fR = fq @ ops.eL_q, fq @ ops.eR_q
        uL, uR = u @ ops.eL_s, u @ ops.eR_s
        fstar = model.numerical_flux(np.roll(uR, 1, axis=1), uL)  # left face of each element
        fstar_R = np.roll(fstar, -1, axis=1)
        return (
            fq @ self.A_vol.T
            - (fstar - fL)[..., None] * self.A_L
            + (fstar_R - fR)[..., None] * self.A_R
        )

    def l2_error(self, u, exact, t, overint=10):
        ops = self.ops
        rule = make_rule("GL", ops.p + 1 + overint)
        B = eval_basis(ops.basis_soln, rule.nodes)
        xg = self.x_range[0] + self.dx * (np.arange(self.Ks)[:, None] + 0.5 * (rule.nodes[None, :] + 1.0))
        err = u @ B.T - np.asarray(exact(xg, t)).reshape(u.shape[0], self.Ks, -1)
        return float(math.sqrt(np.sum(err**2 * rule.weights * 0.5 * self.dx)))


def stable_dt(spatial: SpatialESFR, u, cfl=0.05):
    speed = float(np.max(spatial.model.max_wave_speed(u @ spatial.ops.V1.T)))
    return cfl * spatial.dx / (max(speed, 1e-14) * (2 * spatial.ops.p + 1))


def mol_advance(u0_coeffs, spatial: SpatialESFR, config: MolConfig | None = None):
    """March ``du/dt = -R(u)`` to ``t_final``; returns the final coefficients."""
    config = config or MolConfig()
    u = np.array(u0_coeffs, dtype=float)
    dt = config.dt if config.dt is not None else stable_dt(spatial, u, config.cfl)
    nsteps = max(1, int(math.ceil(config.t_final / dt - 1e-12)))
    dt = config.t_final / nsteps
    norm0 = max(float(np.linalg.norm(u)), 1e-300)
    rhs = lambda t, v: -spatial.residual(v)
    t = 0.0
    for _ in range(nsteps):
        u = rk54_step(rhs, t, u, dt)
        t += dt
        nrm = float(np.linalg.norm(u))
        if not np.isfinite(nrm) or nrm > 1e6 * norm0 and norm0 > 1e-300:
            raise StabilityError(f"explicit march blew up at t={t:.4g}")
    return u
