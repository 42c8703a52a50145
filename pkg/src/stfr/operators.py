"""Reference-element operators for the 1D+1 space-time FR discretization.

Nodes on the tensor-product element are flattened with the spatial index
fastest: node ``(i_x, i_t)`` lives at ``i_t * n + i_x``.  A 2D operator built
from a temporal factor ``A_t`` and a spatial factor ``A_x`` is therefore
``np.kron(A_t, A_x)``.

Faces follow the ordering ``1: xi = -1``, ``2: xi = +1``, ``3: tau = -1``,
``4: tau = +1``; nodes on each face are ordered by increasing tangential
coordinate and the four faces are stacked into one ``4 * N_f`` block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from stfr.errors import ConfigurationError
from stfr.quadrature import LagrangeBasis1D, eval_basis, eval_basis_derivative, make_rule

FACE_NORMALS_S = (-1.0, 1.0, 0.0, 0.0)
FACE_NORMALS_T = (0.0, 0.0, -1.0, 1.0)


def c_hu(p: int) -> float:
    """Huynh's g2 correction parameter in the Legendre-reference normalization.

    Vincent et al. write the FR norm as ``int u^2 + (c/2) (d^p u)^2``; the
    filter used here is ``c int (d^p u)^2``, hence the extra factor 1/2.
    """
    if p < 1:
        raise ConfigurationError("c_Hu is defined for p >= 1")
    ap = math.factorial(2 * p) / (2**p * math.factorial(p) ** 2)
    return (p + 1) / ((2 * p + 1) * p * (ap * math.factorial(p)) ** 2)


C_DG = 0.0
C_HU_TABLE = {p: c_hu(p) for p in range(1, 11)}


def resolve_c(c, p: int) -> float:
    """Turn a named (``"c_DG"``, ``"c_Hu"``) or numeric value into a float."""
    if isinstance(c, str):
        key = c.strip().lower().replace("_", "")
        if key in ("cdg", "dg"):
            return C_DG
        if key in ("chu", "hu"):
            if p not in C_HU_TABLE:
                raise ConfigurationError(f"no c_Hu value for p={p}")
            return C_HU_TABLE[p]
        try:
            c = float(c)
        except ValueError:
            raise ConfigurationError(f"unknown correction parameter {c!r}") from None
    c = float(c)
    if not c >= 0.0:
        raise ConfigurationError(f"correction parameter must be >= 0, got {c}")
    return c


@dataclass(frozen=True)
class ElementGeometry:
    dx: float
    dt: float

    def __post_init__(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ConfigurationError("element widths must be positive")

    @property
    def J(self) -> float:
        return 0.25 * self.dx * self.dt

    @property
    def J_1D(self) -> float:
        return 0.5 * math.sqrt(self.dx * self.dt)

    @property
    def spatial_flux_scale(self) -> float:
        """Cofactor entry multiplying the spatial flux (``dt/2``)."""
        return 0.5 * self.dt

    @property
    def temporal_flux_scale(self) -> float:
        """Cofactor entry multiplying the temporal flux (``dx/2``)."""
        return 0.5 * self.dx


class OperatorSet:
    """All reference-element matrices for one ``(p, nodes, c, geometry)``.

    Attributes are plain numpy arrays; see the module docstring for the node
    and face ordering.  ``D_*`` and ``L_*`` map flux-node and face-node data
    to solution coefficients, already premultiplied by the inverse (FR) mass
    matrix.
    """

    def __init__(self, p, n_oi, soln_kind, flux_kind, c, geometry):
        if p < 1:
            raise ConfigurationError("polynomial degree must be >= 1")
        if n_oi < 0:
            raise ConfigurationError("overintegration must be >= 0")
        self.p = int(p)
        self.n_oi = int(n_oi)
        self.soln_kind = soln_kind
        self.flux_kind = flux_kind
        self.c = resolve_c(c, self.p)
        self.geometry = geometry

        n = self.p + 1
        m = n + self.n_oi
        self.n, self.m = n, m
        self.n_soln, self.n_q, self.n_f = n * n, m * m, m

        self.rule_soln = make_rule(soln_kind, n)
        self.rule_flux = make_rule(flux_kind, m)
        self.basis_soln = LagrangeBasis1D(self.rule_soln.nodes)
        self.basis_flux = LagrangeBasis1D(self.rule_flux.nodes)
        xq, wq = self.rule_flux.nodes, self.rule_flux.weights
        self.wq = np.asarray(wq)

        # 1D factors
        V = eval_basis(self.basis_soln, xq)  # chi at flux nodes, m x n
        dV = eval_basis_derivative(self.basis_soln, xq)
        Dq = eval_basis_derivative(self.basis_flux, xq)  # phi' at flux nodes
        eL_s = eval_basis(self.basis_soln, [-1.0])[0]
        eR_s = eval_basis(self.basis_soln, [1.0])[0]
        eL_q = eval_basis(self.basis_flux, [-1.0])[0]
        eR_q = eval_basis(self.basis_flux, [1.0])[0]
        self.V1, self.Dq1 = V, Dq
        self.eL_s, self.eR_s, self.eL_q, self.eR_q = eL_s, eR_s, eL_q, eR_q

        W1 = np.diag(wq)
        M1_ref = V.T @ W1 @ V
        D1 = np.linalg.solve(M1_ref, V.T @ W1 @ dV)
        self.M1_ref = M1_ref
        self.D1_soln = D1
        Dp = np.linalg.matrix_power(D1, self.p)
        self.K1_ref = self.c * Dp.T @ M1_ref @ Dp
        self.Dp1_soln = Dp

        # 2D volume operators
        Im = np.eye(m)
        self.chi_q = np.kron(V, V)
        self.W_q = np.kron(wq, wq)
        self.dphi_xi = np.kron(Im, Dq)
        self.dphi_tau = np.kron(Dq, Im)

        # faces: rows stacked as [face1, face2, face3, face4]
        self.chi_f = np.vstack([
            np.kron(V, eL_s[None, :]),
            np.kron(V, eR_s[None, :]),
            np.kron(eL_s[None, :], V),
            np.kron(eR_s[None, :], V),
        ])
        self.phi_f = np.vstack([
            np.kron(Im, eL_q[None, :]),
            np.kron(Im, eR_q[None, :]),
            np.kron(eL_q[None, :], Im),
            np.kron(eR_q[None, :], Im),
        ])
        self.W_f = np.tile(wq, 4)
        self.n_s = np.repeat(FACE_NORMALS_S, m)
        self.n_t = np.repeat(FACE_NORMALS_T, m)

        J = geometry.J
        self.M = J * np.kron(M1_ref, M1_ref)
        self.K = J * np.kron(M1_ref, self.K1_ref)
        self.M_plus_K = self.M + self.K
        self._M_cho = cho_factor(self.M)
        self._MK_cho = cho_factor(self.M_plus_K)

        stiff_t = self.chi_q.T @ (self.W_q[:, None] * self.dphi_tau)
        stiff_s = self.chi_q.T @ (self.W_q[:, None] * self.dphi_xi)
        lift_t = self.chi_f.T * (self.W_f * self.n_t)
        lift_s = self.chi_f.T * (self.W_f * self.n_s)
        self.stiff_t, self.stiff_s = stiff_t, stiff_s
        self.lift_t_unscaled, self.lift_s_unscaled = lift_t, lift_s
        self.D_t = self.solve_M(stiff_t)
        self.D_s = self.solve_M(stiff_s)
        self.D_FR_s = self.solve_MK(stiff_s)
        self.L_t = self.solve_M(lift_t)
        self.L_s = self.solve_M(lift_s)
        self.L_FR_s = self.solve_MK(lift_s)

        # projection of flux-node data onto the solution basis
        self.Pi_q = J * self.solve_M(self.chi_q.T * self.W_q)

        self._build_skew_operators()
        self._build_face_energy()

    # -- linear algebra helpers -------------------------------------------
    # one step of iterative refinement: M + K is ill-conditioned for large c
    def solve_M(self, rhs):
        x = cho_solve(self._M_cho, rhs)
        return x + cho_solve(self._M_cho, rhs - self.M @ x)

    def solve_MK(self, rhs):
        x = cho_solve(self._MK_cho, rhs)
        return x + cho_solve(self._MK_cho, rhs - self.M_plus_K @ x)

    def lift(self, face: int, direction: str) -> np.ndarray:
        """Per-face lifting operator (``face`` in 1..4, ``direction`` 't', 's' or 'FR_s')."""
        L = {"t": self.L_t, "s": self.L_s, "FR_s": self.L_FR_s}[direction]
        m = self.m
        return L[:, (face - 1) * m: face * m]

    def face_slice(self, face: int) -> slice:
        return slice((face - 1) * self.m, face * self.m)

    # -- skew-symmetric hybridized operators ------------------------------
    def _build_skew_operators(self):
        Nq, Nf4 = self.n_q, 4 * self.n_f
        Wq = self.W_q
        Wf = self.W_f

        def qtilde(dphi, normals):
            Q = np.zeros((Nq + Nf4, Nq + Nf4))
            vol = Wq[:, None] * dphi
            Q[:Nq, :Nq] = vol - vol.T
            Q[:Nq, Nq:] = self.phi_f.T * (Wf * normals)
            Q[Nq:, :Nq] = -(Wf * normals)[:, None] * self.phi_f
            Q[Nq:, Nq:] = np.diag(Wf * normals)
            return 0.5 * Q

        self.Qtilde_s = qtilde(self.dphi_xi, self.n_s)
        self.Qtilde_t = qtilde(self.dphi_tau, self.n_t)
        self.B_s = self.Qtilde_s + self.Qtilde_s.T
        self.B_t = self.Qtilde_t + self.Qtilde_t.T
        # skew 1D block shared by both directions: W D - D^T W
        W1 = np.diag(self.wq)
        self.S1 = W1 @ self.Dq1 - self.Dq1.T @ W1

    def _build_face_energy(self):
        scale = self.geometry.temporal_flux_scale
        W1 = np.diag(self.wq)
        Dp = np.linalg.matrix_power(self.Dq1, self.p)
        self.M_1D = scale * W1
        self.K_1D = scale * self.c * Dp.T @ W1 @ Dp


def build_operators(p, n_oi=0, soln_kind="GLL", flux_kind="GL", c=0.0, geometry=None) -> OperatorSet:
    """Assemble every reference operator for one configuration."""
    if geometry is None:
        geometry = ElementGeometry(2.0, 2.0)
    return OperatorSet(p, n_oi, soln_kind, flux_kind, c, geometry)


def check_sbp(ops: OperatorSet) -> dict:
    """Relative residuals of the summation-by-parts identities.

    Residuals are relative to the magnitude of the products that cancel.

    Both directions are checked on the mass-premultiplied operators acting on
    solution coefficients, so each side is a symmetric bilinear form; the
    spatial check uses the FR operators, where ``(M + K) D_FR = stiffness``.
    """
    out = {}
    for name, D, mass, normals in (
        ("spatial", ops.D_FR_s, ops.M_plus_K, ops.n_s),
        ("temporal", ops.D_t, ops.M, ops.n_t),
    ):
        S = mass @ D @ ops.chi_q
        boundary = ops.chi_f.T @ ((ops.W_f * normals)[:, None] * ops.chi_f)
        res = S + S.T - boundary
        # rounding in the triple product scales with |mass| |D| |chi|, which
        # exceeds |S| when M + K is ill conditioned (c far above c_Hu)
        scale = np.abs(mass) @ np.abs(D) @ np.abs(ops.chi_q)
        out[name] = float(np.max(np.abs(res)) / max(np.max(scale), 1.0))
    for name, Q, B in (("qtilde_s", ops.Qtilde_s, ops.B_s), ("qtilde_t", ops.Qtilde_t, ops.B_t)):
        out[name + "_sym"] = float(np.max(np.abs(Q + Q.T - B)))
        out[name + "_ones"] = float(np.max(np.abs(Q.sum(axis=1))))
    return out


def project_to_solution_basis(ops: OperatorSet, values_at_flux_nodes) -> np.ndarray:
    """L2-project flux-node samples (last axis of length ``N_q``) onto the solution basis."""
    vals = np.asarray(values_at_flux_nodes, dtype=float)
    if vals.shape[-1] != ops.n_q:
        raise ConfigurationError(f"expected {ops.n_q} flux-node values, got {vals.shape[-1]}")
    return vals @ ops.Pi_q.T
