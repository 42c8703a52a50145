"""Error norms, convergence rates, conservation and entropy functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stfr.errors import ConfigurationError
from stfr.quadrature import eval_basis, make_rule
from stfr.residual import Discretization


def l2_error(disc: Discretization, U, overint: int = 10, states=None) -> float:
    """Space-time L2 error against the exact solution.

    Gauss-Legendre rule with ``p + 1 + overint`` points per dimension,
    summed over elements and the selected conserved states (all by default;
    not normalised by area).
    """
    exact = disc.problem.exact
    if exact is None:
        raise ConfigurationError(f"problem {disc.problem.name!r} has no exact solution")
    mesh, ops = disc.mesh, disc.ops
    rule = make_rule("GL", ops.p + 1 + overint)
    B = eval_basis(ops.basis_soln, rule.nodes)  # (nq, n)
    w2 = np.outer(rule.weights, rule.weights) * mesh.geometry.J  # [a, i]
    xg = mesh.physical_x(rule.nodes)  # (Ks, nq)
    tg = mesh.physical_t(rule.nodes)  # (Kt, nq)
    n = ops.n
    coef = np.asarray(U, dtype=float).reshape(mesh.Kt, mesh.Ks, disc.ns, n, n)
    uh = np.einsum("ab,ic,tksbc->tksai", B, B, coef)
    X = xg[None, :, None, :]
    T = tg[:, None, :, None]
    X, T = np.broadcast_arrays(X, T)  # (Kt, Ks, nq, nq)
    ue = np.asarray(exact(X, T), dtype=float).reshape(disc.ns, mesh.Kt, mesh.Ks, len(rule.nodes), len(rule.nodes))
    err = uh - ue.transpose(1, 2, 0, 3, 4)
    if states is not None:
        err = err[:, :, list(np.atleast_1d(states))]
    return float(math.sqrt(np.sum(w2 * err**2)))


def convergence_rates(errors, Ns):
    """Observed orders ``log(e_{k-1}/e_k) / log(N_k/N_{k-1})``; first entry is NaN."""
    e = np.asarray(errors, dtype=float)
    N = np.asarray(Ns, dtype=float)
    if e.size != N.size or e.size < 2:
        raise ConfigurationError("need at least two matching (error, N) levels")
    if np.any(e <= 0):
        raise ConfigurationError("errors must be positive to form rates")
    rates = np.full(e.size, np.nan)
    rates[1:] = np.log(e[:-1] / e[1:]) / np.log(N[1:] / N[:-1])
    return rates


def _face_weights(disc: Discretization):
    return disc.ops.wq * disc.mesh.geometry.temporal_flux_scale


def conservation_residual(disc: Discretization, U) -> np.ndarray:
    """Per-state ``|inflow at t=0 - outflow at t=T + integral of the source|``."""
    w = _face_weights(disc)
    inflow = np.einsum("ski,i->s", disc.u0_face, w)
    outflow = np.einsum("ski,i->s", disc.outflow_states(np.asarray(U)[-1]), w)
    # 1^T M q_hat per element, M = J (M1 x M1)
    ones_M = np.kron(disc.ops.M1_ref.sum(0), disc.ops.M1_ref.sum(0)) * disc.mesh.geometry.J
    source = np.einsum("stki,i->s", disc.qhat, ones_M)
    return np.abs(inflow - outflow + source)


def broken_sobolev_face_energy(face_values, M_1D, K_1D) -> float:
    """``u^T (M_1D + K_1D) u`` for face values on the flux nodes."""
    u = np.asarray(face_values, dtype=float)
    return float(u @ (M_1D + K_1D) @ u)


@dataclass
class EntropyReport:
    """Entropy totals at ``t_0, t_1, ..., t_Kt`` and the preservation residual."""

    totals: np.ndarray
    preservation_residual: float
    projection_term: float

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.totals)

    @property
    def total_change(self) -> float:
        return float(self.totals[-1] - self.totals[0])

    @property
    def max_increment(self) -> float:
        return float(np.max(self.increments))


def _face_entropy(disc: Discretization, uf) -> float:
    """Total entropy of face states ``uf`` of shape ``(ns, Ks, N_f)``."""
    ops, model = disc.ops, disc.model
    if model.entropy_is_state:
        # scalar: (1/2) broken-Sobolev energy per face
        H = ops.M_1D + ops.K_1D
        return float(0.5 * np.einsum("ski,ij,skj->", uf, H, uf))
    return float(np.sum(model.entropy(uf) * _face_weights(disc)))


def entropy_series(disc: Discretization, U) -> EntropyReport:
    """Entropy on the bottom face of the mesh (from ``u_0``) and on each slab top.

    The preservation residual is ``S(T) - S(0) - P`` where ``P`` is the
    t=0 projection term ``sum w ([[phi]] - [[v]]^T u_0)``, jumps taken as
    ``a(u_0) - a(u_tilde)`` with ``u_tilde`` the interior trace on face 3.
    For an entropy-conservative scheme it vanishes to solver tolerance.
    """
    U = np.asarray(U, dtype=float)
    ops, model = disc.ops, disc.model
    m = ops.m
    totals = [_face_entropy(disc, disc.u0_face)]
    for kt in range(disc.mesh.Kt):
        totals.append(_face_entropy(disc, disc.outflow_states(U[kt])))
    totals = np.array(totals)

    V = U[0].transpose(1, 0, 2)
    _, uf = disc.states(V)
    ut = uf[:, :, 2 * m:3 * m]
    u0 = disc.u0_face
    if model.entropy_is_state:
        d = u0 - ut
        proj = -0.5 * float(np.einsum("ski,ij,skj->", d, ops.M_1D + ops.K_1D, d))
    else:
        jump_phi = model.entropy_potential(u0) - model.entropy_potential(ut)
        jump_v = model.entropy_variables(u0) - model.entropy_variables(ut)
        proj = float(np.sum((jump_phi - np.sum(jump_v * u0, axis=0)) * _face_weights(disc)))
    residual = float(totals[-1] - totals[0] - proj)
    return EntropyReport(totals, residual, proj)
