"""Space-time ESFR and NSFR residuals.

The residual of an element is the coefficient vector of

    du/dt + df/dx - q

in physical units: temporal contributions are premultiplied by ``M^-1``,
spatial ones by ``(M + K)^-1``.  Both schemes share one assembly,

    R = (dx/2) M^-1 [chi_q^T r_vol^t + chi_f^T r_face^t]
      + (dt/2) (M+K)^-1 [chi_q^T r_vol^s + chi_f^T r_face^s] - q_hat,

and differ only in how the flux-node quantities ``r_vol`` and ``r_face`` are
formed (strong form for ESFR, hybridized flux differencing for NSFR).

Internally state arrays are state-first: ``(n_states, E, ...)`` with ``E``
elements.  The public field layout is ``(Kt, Ks, n_states, N_soln)``.
"""

from __future__ import annotations

import numpy as np

from stfr.errors import ConfigurationError
from stfr.mesh import SpaceTimeMesh
from stfr.operators import OperatorSet, build_operators
from stfr.physics import BoundaryConditions, PhysicsModel
from stfr.quadrature import eval_basis

SCHEMES = ("ESFR", "NSFR")
TEMPORAL_FLUX_MODES = ("upwind", "two_point")
ENTROPY_PROJECTIONS = ("solution", "flux")


def to_state_first(U):
    """``(Kt, Ks, ns, N) -> (ns, Kt*Ks, N)``."""
    Kt, Ks, ns, N = U.shape
    return U.transpose(2, 0, 1, 3).reshape(ns, Kt * Ks, N)


def from_state_first(V, Kt, Ks):
    ns, _, N = V.shape
    return V.reshape(ns, Kt, Ks, N).transpose(1, 2, 0, 3)


class Discretization:
    """A model, problem data, mesh and operator set bound together.

    Parameters
    ----------
    scheme : ``"ESFR"`` or ``"NSFR"``
    temporal_flux : ``"upwind"`` (causal, allows slab marching) or ``"two_point"``
        (entropy-conservative two-point state on interior time interfaces).
    entropy_projection : where NSFR samples the entropy variables before
        mapping back: ``"solution"`` takes ``v(u)`` at the solution nodes
        (nodal collocation), ``"flux"`` uses the quadrature projection
        ``Pi_q v(u_q)``.  Identical when the node sets coincide.
    """

    def __init__(
        self,
        model: PhysicsModel,
        problem: BoundaryConditions,
        mesh: SpaceTimeMesh,
        p: int,
        scheme: str = "ESFR",
        c=0.0,
        n_oi: int = 0,
        soln_kind: str = "GLL",
        flux_kind: str = "GL",
        temporal_flux: str = "upwind",
        entropy_projection: str = "solution",
    ):
        scheme = scheme.upper()
        if scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        if temporal_flux not in TEMPORAL_FLUX_MODES:
            raise ConfigurationError(f"temporal_flux must be one of {TEMPORAL_FLUX_MODES}")
        if temporal_flux == "two_point" and scheme != "NSFR":
            raise ConfigurationError("an entropy-conservative temporal flux needs the NSFR scheme")
        if entropy_projection not in ENTROPY_PROJECTIONS:
            raise ConfigurationError(f"entropy_projection must be one of {ENTROPY_PROJECTIONS}")
        self.entropy_projection = entropy_projection
        self.model = model
        self.problem = problem
        self.mesh = mesh
        self.scheme = scheme
        self.temporal_flux = temporal_flux
        self.ops: OperatorSet = build_operators(p, n_oi, soln_kind, flux_kind, c, mesh.geometry)
        self.p = self.ops.p
        self.ns = model.n_states
        self.rhs_assembly_count = 0
        self._setup()

    # -- setup --------------------------------------------------------------
    def _setup(self):
        ops, mesh = self.ops, self.mesh
        g = mesh.geometry
        self.P_t = g.temporal_flux_scale * ops.solve_M(ops.chi_q.T)
        self.L_t = g.temporal_flux_scale * ops.solve_M(ops.chi_f.T)
        self.P_s = g.spatial_flux_scale * ops.solve_MK(ops.chi_q.T)
        self.L_s = g.spatial_flux_scale * ops.solve_MK(ops.chi_f.T)

        n, m = ops.n, ops.m
        xs, xq = ops.rule_soln.nodes, ops.rule_flux.nodes
        # solution-node coordinates, flattened x fastest
        x_nodes = mesh.physical_x(xs)  # (Ks, n)
        t_nodes = mesh.physical_t(xs)  # (Kt, n)
        X = np.broadcast_to(x_nodes[None, :, None, :], (mesh.Kt, mesh.Ks, n, n))
        T = np.broadcast_to(t_nodes[:, None, :, None], (mesh.Kt, mesh.Ks, n, n))
        self.X_soln = X.reshape(mesh.Kt, mesh.Ks, n * n)
        self.T_soln = T.reshape(mesh.Kt, mesh.Ks, n * n)

        src = self.problem.source
        if src is None:
            self.qhat = np.zeros((self.ns, mesh.Kt, mesh.Ks, n * n))
        else:
            self.qhat = np.asarray(src(self.X_soln, self.T_soln), dtype=float).reshape(
                self.ns, mesh.Kt, mesh.Ks, n * n
            )
        # inflow data at the t = 0 face nodes, (ns, Ks, m)
        self.x_face_t0 = mesh.physical_x(xq)
        self.u0_face = np.asarray(self.problem.initial(self.x_face_t0), dtype=float).reshape(self.ns, mesh.Ks, m)
        self.at_t0 = np.repeat(np.arange(mesh.Kt) == 0, mesh.Ks)
        self.u0_soln = np.asarray(self.problem.initial(x_nodes), dtype=float).reshape(self.ns, mesh.Ks, n)

    @property
    def n_soln(self) -> int:
        return self.ops.n_soln

    @property
    def field_shape(self):
        return (self.mesh.Kt, self.mesh.Ks, self.ns, self.ops.n_soln)

    @property
    def slab_shape(self):
        return (self.mesh.Ks, self.ns, self.ops.n_soln)

    # -- traces -------------------------------------------------------------
    def states(self, V):
        """States used by the fluxes at volume and face flux nodes.

        ``V`` is state-first ``(ns, E, N)``.  Returns ``(uq, uf)`` of shapes
        ``(ns, E, N_q)`` and ``(ns, E, 4 N_f)``; for NSFR with non-quadratic
        entropy these are the entropy-projected states.
        """
        ops = self.ops
        uq = V @ ops.chi_q.T
        if self.scheme == "NSFR" and not self.model.entropy_is_state:
            if self.entropy_projection == "solution":
                vhat = self.model.entropy_variables(V)
            else:
                vhat = self.model.entropy_variables(uq) @ ops.Pi_q.T
            uq_t = self.model.conservative_from_entropy(vhat @ ops.chi_q.T)
            uf_t = self.model.conservative_from_entropy(vhat @ ops.chi_f.T)
            return uq_t, uf_t
        self.model.check_admissible(uq)
        return uq, V @ ops.chi_f.T

    # -- local residual -----------------------------------------------------
    def local_residual(self, V, uq, uf, ext1, ext2, ext3, ext4, qhat, at_t0=None):
        """Residual of ``E`` elements given their exterior face states.

        ``ext1``/``ext2`` are the exterior states on the left/right spatial
        faces, ``ext3`` the state below (inflow), and ``ext4`` the state above
        (only used by the entropy-conservative temporal flux; ``None`` means
        the own trace).  All are ``(ns, E, N_f)``.  ``at_t0`` flags elements
        whose bottom face is the initial boundary, where ``ext3`` is imposed
        directly in every temporal flux mode.
        """
        self.rhs_assembly_count += 1
        ops, model = self.ops, self.model
        m = ops.m
        ns, E = uq.shape[0], uq.shape[1]
        f1, f2, f3, f4 = (uf[:, :, k * m:(k + 1) * m] for k in range(4))

        # numerical fluxes on the four faces (x-oriented for faces 1, 2)
        fs1 = model.numerical_flux(ext1, f1)
        fs2 = model.numerical_flux(f2, ext2)
        if self.temporal_flux == "upwind":
            ft3, ft4 = ext3, f4
        else:
            ft3 = model.two_point_state(ext3, f3)
            if at_t0 is not None:
                ft3 = np.where(at_t0[None, :, None], ext3, ft3)
            ft4 = model.two_point_state(f4, ext4) if ext4 is not None else f4

        wq = ops.wq
        if self.scheme == "ESFR":
            rv_s, rf_s, rv_t, rf_t = self._esfr_terms(uq, f1, f2, f3, f4)
        else:
            rv_s, rf_s, rv_t, rf_t = self._nsfr_terms(uq, f1, f2, f3, f4)

        # interface flux contributions: + W n f*
        rf_s[:, :, 0:m] += -wq * fs1
        rf_s[:, :, m:2 * m] += wq * fs2
        rf_t[:, :, 2 * m:3 * m] += -wq * ft3
        rf_t[:, :, 3 * m:4 * m] += wq * ft4

        R = rv_t @ self.P_t.T + rf_t @ self.L_t.T + rv_s @ self.P_s.T + rf_s @ self.L_s.T
        return R - qhat

    def _esfr_terms(self, uq, f1, f2, f3, f4):
        ops, model = self.ops, self.model
        fq = model.flux(uq)
        gq = model.temporal_flux(uq)
        Wq = ops.W_q
        rv_s = Wq * (fq @ ops.dphi_xi.T)
        rv_t = Wq * (gq @ ops.dphi_tau.T)
        ns, E = uq.shape[:2]
        m = ops.m
        wq = ops.wq
        ff = fq @ ops.phi_f.T
        gf = gq @ ops.phi_f.T
        rf_s = np.zeros((ns, E, 4 * m))
        rf_t = np.zeros((ns, E, 4 * m))
        rf_s[:, :, 0:m] = wq * ff[:, :, 0:m]
        rf_s[:, :, m:2 * m] = -wq * ff[:, :, m:2 * m]
        rf_t[:, :, 2 * m:3 * m] = wq * gf[:, :, 2 * m:3 * m]
        rf_t[:, :, 3 * m:4 * m] = -wq * gf[:, :, 3 * m:4 * m]
        return rv_s, rf_s, rv_t, rf_t

    def _pair_operator(self):
        """Scatter matrix for the strictly upper pairs of the skew 1D block.

        ``S1`` is skew-symmetric with a zero diagonal, so with a symmetric
        two-point function ``sum_j S1[i, j] F(u_i, u_j)`` only needs the
        pairs ``i < j``: ``r = F_pairs @ P.T``.
        """
        if not hasattr(self, "_pairs"):
            m = self.ops.m
            iu, ju = np.triu_indices(m, 1)
            P = np.zeros((m, iu.size))
            k = np.arange(iu.size)
            P[iu, k] = self.ops.S1[iu, ju]
            P[ju, k] = -self.ops.S1[iu, ju]
            self._pairs = (iu, ju, P)
        return self._pairs

    def _nsfr_terms(self, uq, f1, f2, f3, f4):
        ops, model = self.ops, self.model
        m = ops.m
        ns, E = uq.shape[:2]
        wq, eL, eR = ops.wq, ops.eL_q, ops.eR_q
        iu, ju, P = self._pair_operator()
        a = model.two_point_aux(uq.reshape(ns, E, m, m))  # [.., it, ix]
        a1, a2, a3, a4 = (model.two_point_aux(f) for f in (f1, f2, f3, f4))

        # spatial: pairs along tau-lines
        F = model.two_point_flux_aux(a[..., iu], a[..., ju])  # (ns, E, m_t, pairs)
        rv_s = wq[:, None] * (F @ P.T)
        F1 = model.two_point_flux_aux(a, a1[..., :, None])  # [it, i]
        F2 = model.two_point_flux_aux(a, a2[..., :, None])
        rv_s += wq[:, None] * (-eL[None, :] * F1 + eR[None, :] * F2)
        rf_s = np.zeros((ns, E, 4 * m))
        rf_s[:, :, 0:m] = wq * (F1 @ eL)
        rf_s[:, :, m:2 * m] = -wq * (F2 @ eR)

        # temporal: pairs along xi-lines
        G = model.two_point_state_aux(a[..., iu, :], a[..., ju, :])  # (ns, E, pairs, m_x)
        rv_t = wq[None, :] * np.einsum("ap,sepi->seai", P, G)
        G3 = model.two_point_state_aux(a, a3[..., None, :])  # [it, i]
        G4 = model.two_point_state_aux(a, a4[..., None, :])
        rv_t += wq[None, :] * (-eL[:, None] * G3 + eR[:, None] * G4)
        rf_t = np.zeros((ns, E, 4 * m))
        rf_t[:, :, 2 * m:3 * m] = wq * np.einsum("a,seai->sei", eL, G3)
        rf_t[:, :, 3 * m:4 * m] = -wq * np.einsum("a,seai->sei", eR, G4)
        return rv_s.reshape(ns, E, m * m), rf_s, rv_t.reshape(ns, E, m * m), rf_t

    # -- global and slab residuals -----------------------------------------
    def global_exteriors(self, uf):
        """Exterior face states ``(ext1, ext2, ext3, ext4)`` for the whole field."""
        Kt, Ks, m, ns = self.mesh.Kt, self.mesh.Ks, self.ops.m, self.ns
        uf4 = uf.reshape(ns, Kt, Ks, 4, m)
        ext1 = np.roll(uf4[:, :, :, 1], 1, axis=2)
        ext2 = np.roll(uf4[:, :, :, 0], -1, axis=2)
        ext3 = np.empty_like(ext1)
        ext3[:, 0] = self.u0_face
        ext3[:, 1:] = uf4[:, :-1, :, 3]
        ext4 = np.empty_like(ext1)
        ext4[:, :-1] = uf4[:, 1:, :, 2]
        ext4[:, -1] = uf4[:, -1, :, 3]  # t = T uses the interior state
        return tuple(e.reshape(ns, Kt * Ks, m) for e in (ext1, ext2, ext3, ext4))

    def slab_exteriors(self, uf, inflow):
        Ks, m, ns = self.mesh.Ks, self.ops.m, self.ns
        uf4 = uf.reshape(ns, Ks, 4, m)
        ext1 = np.roll(uf4[:, :, 1], 1, axis=1)
        ext2 = np.roll(uf4[:, :, 0], -1, axis=1)
        return ext1, ext2, inflow, None

    def residual(self, U):
        """Residual of the whole space-time field ``(Kt, Ks, ns, N)``."""
        Kt, Ks = self.mesh.Kt, self.mesh.Ks
        V = to_state_first(np.asarray(U, dtype=float))
        uq, uf = self.states(V)
        ext = self.global_exteriors(uf)
        R = self.local_residual(V, uq, uf, *ext, self.qhat.reshape(self.ns, Kt * Ks, -1), self.at_t0)
        return from_state_first(R, Kt, Ks)

    def slab_residual(self, Us, kt, inflow):
        """Residual of timeslab ``kt`` (``Us`` of shape ``(Ks, ns, N)``).

        ``inflow`` holds the exterior states on the slab's bottom faces,
        ``(ns, Ks, N_f)``.  Only valid with the upwind temporal flux.
        """
        if self.temporal_flux != "upwind":
            raise ConfigurationError("slab marching needs the upwind temporal flux")
        V = np.asarray(Us, dtype=float).transpose(1, 0, 2)
        uq, uf = self.states(V)
        ext = self.slab_exteriors(uf, inflow)
        R = self.local_residual(V, uq, uf, *ext, self.qhat[:, kt])
        return R.transpose(1, 0, 2)

    def outflow_states(self, Us):
        """States on the top faces of a slab, ``(ns, Ks, N_f)``."""
        m = self.ops.m
        V = np.asarray(Us, dtype=float).transpose(1, 0, 2)
        _, uf = self.states(V)
        return uf[:, :, 3 * m:4 * m]

    def initial_slab_guess(self, inflow_soln=None):
        """Slab coefficients constant in time, equal to ``inflow_soln`` ``(ns, Ks, n)``."""
        if inflow_soln is None:
            inflow_soln = self.u0_soln
        n = self.ops.n
        g = np.repeat(inflow_soln[:, :, None, :], n, axis=2).reshape(self.ns, self.mesh.Ks, n * n)
        return g.transpose(1, 0, 2).copy()

    def top_trace_soln(self, Us):
        """Top-face values of a slab at the spatial solution nodes, ``(ns, Ks, n)``."""
        n = self.ops.n
        V = np.asarray(Us).transpose(1, 0, 2).reshape(self.ns, self.mesh.Ks, n, n)
        return np.einsum("a,skai->ski", self.ops.eR_s, V)

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, U, x, t):
        """Evaluate the space-time polynomial solution at points ``(x, t)``.

        Returns an array of shape ``(ns, len(x))``.
        """
        U = np.asarray(U, dtype=float)
        x = np.asarray(x, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        mesh = self.mesh
        (x0, x1), (t0, t1) = mesh.x_range, mesh.t_range
        if np.any(t < t0 - 1e-12) or np.any(t > t1 + 1e-12):
            raise ConfigurationError("evaluation times outside the space-time domain")
        xp = x0 + np.mod(x - x0, x1 - x0)
        ks = np.clip(((xp - x0) / mesh.dx).astype(int), 0, mesh.Ks - 1)
        kt = np.clip(((t - t0) / mesh.dt).astype(int), 0, mesh.Kt - 1)
        xi = 2.0 * (xp - (x0 + ks * mesh.dx)) / mesh.dx - 1.0
        tau = 2.0 * (t - (t0 + kt * mesh.dt)) / mesh.dt - 1.0
        basis = self.ops.basis_soln
        Bx = eval_basis(basis, xi)
        Bt = eval_basis(basis, tau)
        n = self.ops.n
        coef = U[kt, ks].reshape(len(x), self.ns, n, n)  # [pt, s, it, ix]
        return np.einsum("pa,pi,psai->sp", Bt, Bx, coef)


def build_discretization(model, problem, mesh, p, scheme="ESFR", c=0.0, n_oi=0, soln_kind="GLL",
                         flux_kind="GL", temporal_flux="upwind", entropy_projection="solution") -> Discretization:
    return Discretization(model, problem, mesh, p, scheme, c, n_oi, soln_kind, flux_kind, temporal_flux,
                          entropy_projection)


def esfr_residual(disc: Discretization, U):
    if disc.scheme != "ESFR":
        raise ConfigurationError("discretization is not ESFR")
    return disc.residual(U)


def nsfr_residual(disc: Discretization, U):
    if disc.scheme != "NSFR":
        raise ConfigurationError("discretization is not NSFR")
    return disc.residual(U)


def entropy_project(disc: Discretization, U):
    """Entropy-projected states ``(uq, uf)`` for a field, state-first layout."""
    return disc.states(to_state_first(np.asarray(U, dtype=float)))
