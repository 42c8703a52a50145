"""Jacobian-free Newton-Krylov solves of the space-time residual.

Two modes are offered: ``march`` solves timeslab by timeslab (valid with the
upwind temporal flux, which makes every slab depend only on the one below),
``coupled`` solves all slabs at once after a loose marched warm start.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from stfr.errors import AdmissibilityError, ConfigurationError, NonconvergenceError
from stfr.residual import Discretization, from_state_first, to_state_first

MODES = ("march", "coupled")
PRECONDITIONERS = ("none", "block_jacobi")


@dataclass
class SolverConfig:
    mode: str = "march"
    newton_tol: float = 1e-10
    max_newton: int = 30
    krylov_rtol: float = 1e-4
    linear_krylov_rtol: float = 1e-12
    krylov_restart: int = 60
    max_krylov: int = 2000
    preconditioner: str = "none"
    max_line_search: int = 12
    divergence_factor: float = 1e4
    warm_start_tol: float = 1e-4
    # accept |R| <= stagnation_factor * tol once updates reach roundoff
    stagnation_factor: float = 100.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigurationError(f"preconditioner must be one of {PRECONDITIONERS}")
        if not self.newton_tol > 0:
            raise ConfigurationError("newton_tol must be positive")
        if self.krylov_restart < 1:
            raise ConfigurationError("krylov_restart must be >= 1")
        if not (self.krylov_rtol > 0 and self.linear_krylov_rtol > 0):
            raise ConfigurationError("Krylov tolerances must be positive")
        if not self.stagnation_factor >= 1:
            raise ConfigurationError("stagnation_factor must be >= 1")
        if self.max_newton < 1:
            raise ConfigurationError("max_newton must be >= 1")


@dataclass
class SolveStats:
    """Iteration and assembly counters; ``slab_*`` lists hold one entry per Newton solve."""

    newton_iterations: int = 0
    krylov_iterations: int = 0
    rhs_assembly_count: int = 0
    residual_norm: float = np.inf
    residual_history: list = field(default_factory=list)
    slab_newton: list = field(default_factory=list)
    slab_krylov: list = field(default_factory=list)
    slab_rhs: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    roundoff_limited: bool = False

    @property
    def last_slab_rhs(self) -> int:
        return self.slab_rhs[-1] if self.slab_rhs else self.rhs_assembly_count


def jacobian_vector_product(F, u, Fu, w, linear=False, eps=None):
    """Forward-difference approximation of ``J(u) w``; one call of ``F``.

    Default step ``eps = sqrt(machine eps) (1 + |u|) / |w|``.  For an affine
    ``F`` the difference quotient is exact for any step, so ``eps = (1 +
    |u|) / |w|`` is used to keep roundoff at machine level.  An explicit
    ``eps`` overrides both.
    """
    nw = np.linalg.norm(w)
    if not nw > 1e-300:
        raise ConfigurationError("Jacobian-vector product needs a nonzero direction")
    if eps is None:
        scale = 1.0 if linear else np.sqrt(np.finfo(float).eps)
        eps = scale * (1.0 + np.linalg.norm(u)) / nw
    return (F(u + eps * w) - Fu) / eps


def _block_jacobi(local, u, block):
    """Inverse element-block Jacobian of ``local`` (frozen neighbours) at ``u``.

    ``u`` is ``(E, block)``; every column of the block is perturbed for all
    elements at once, so this costs ``block + 1`` residual evaluations.
    """
    E = u.shape[0]
    base = local(u)
    J = np.empty((E, block, block))
    eps = np.sqrt(np.finfo(float).eps) * (1.0 + np.abs(u).max())
    for k in range(block):
        up = u.copy()
        up[:, k] += eps
        J[:, :, k] = (local(up) - base) / eps
    return np.linalg.inv(J)


def newton_solve(F, u0, config: SolverConfig, linear=False, precond_builder=None, tol=None):
    """Solve ``F(u) = 0`` for a flat vector ``u``; returns ``(u, stats)``.

    Plain Newton steps; a step is halved only when it produces an
    inadmissible state.  On large systems the residual can hit its
    floating-point floor slightly above ``tol``: once ``|R| <=
    stagnation_factor * tol`` a step that fails to halve the residual ends
    the iteration at the better iterate (flagged in
    ``stats.roundoff_limited``).  Divergence (residual above
    ``divergence_factor`` times the best seen) or exhaustion of
    ``max_newton`` raises :class:`NonconvergenceError`.
    """
    tol = config.newton_tol if tol is None else tol
    stats = SolveStats()
    u = np.array(u0, dtype=float)
    Fu = F(u)
    rnorm = float(np.linalg.norm(Fu))
    best = rnorm
    stats.residual_history.append(rnorm)
    krylov_rtol = config.linear_krylov_rtol if linear else config.krylov_rtol
    n = u.size

    def fail(msg):
        stats.residual_norm = rnorm
        raise NonconvergenceError(msg, stats=stats, field=u)

    while rnorm > tol:
        if stats.newton_iterations >= config.max_newton:
            fail(f"Newton did not converge: |R| = {rnorm:.3e} after {stats.newton_iterations} iterations")
        A = LinearOperator((n, n), matvec=lambda w: jacobian_vector_product(F, u, Fu, w, linear), dtype=float)
        Minv = precond_builder(u) if precond_builder is not None else None
        counter = [0]

        def cb(_):
            counter[0] += 1

        du, _info = gmres(
            A, -Fu, rtol=krylov_rtol, atol=0.0, restart=config.krylov_restart,
            maxiter=max(1, config.max_krylov // config.krylov_restart), M=Minv,
            callback=cb, callback_type="pr_norm",
        )
        stats.krylov_iterations += counter[0]
        stats.newton_iterations += 1

        step = 1.0
        for _ in range(config.max_line_search):
            try:
                trial = u + step * du
                Ft = F(trial)
                break
            except AdmissibilityError:
                step *= 0.5
        else:
            fail("every damped Newton step left the admissible set")
        rtrial = float(np.linalg.norm(Ft))
        if rnorm <= config.stagnation_factor * tol and not rtrial < 0.5 * rnorm:
            stats.roundoff_limited = True
            if rtrial < rnorm:
                u, Fu, rnorm = trial, Ft, rtrial
            stats.residual_history.append(rnorm)
            break
        u, Fu, rnorm = trial, Ft, rtrial
        stats.residual_history.append(rnorm)
        if not np.isfinite(rnorm) or rnorm > config.divergence_factor * best:
            fail(f"Newton diverged: |R| = {rnorm:.3e}")
        best = min(best, rnorm)
    stats.converged = True
    stats.residual_norm = rnorm
    return u, stats


def _slab_preconditioner(disc: Discretization, kt, inflow):
    shape = disc.slab_shape
    block = shape[1] * shape[2]

    def build(u_flat):
        Us = u_flat.reshape(shape)
        V = Us.transpose(1, 0, 2)
        _, uf = disc.states(V)
        ext = disc.slab_exteriors(uf, inflow)
        qhat = disc.qhat[:, kt]

        def local(ub):
            Vb = ub.reshape(shape).transpose(1, 0, 2)
            uq_b, uf_b = disc.states(Vb)
            R = disc.local_residual(Vb, uq_b, uf_b, *ext, qhat)
            return R.transpose(1, 0, 2).reshape(shape[0], block)

        inv = _block_jacobi(local, u_flat.reshape(shape[0], block), block)
        return LinearOperator(
            (u_flat.size,) * 2,
            matvec=lambda r: np.einsum("eij,ej->ei", inv, r.reshape(shape[0], block)).ravel(),
            dtype=float,
        )

    return build


def _global_preconditioner(disc: Discretization):
    Kt, Ks, ns, N = disc.field_shape
    E, block = Kt * Ks, ns * N

    def build(u_flat):
        V = to_state_first(u_flat.reshape(disc.field_shape))
        _, uf = disc.states(V)
        ext = disc.global_exteriors(uf)
        qhat = disc.qhat.reshape(ns, E, N)

        def local(ub):
            Vb = to_state_first(ub.reshape(disc.field_shape))
            uq_b, uf_b = disc.states(Vb)
            R = disc.local_residual(Vb, uq_b, uf_b, *ext, qhat, disc.at_t0)
            return from_state_first(R, Kt, Ks).reshape(E, block)

        inv = _block_jacobi(local, u_flat.reshape(E, block), block)
        return LinearOperator(
            (u_flat.size,) * 2,
            matvec=lambda r: np.einsum("eij,ej->ei", inv, r.reshape(E, block)).ravel(),
            dtype=float,
        )

    return build


def solve_march(disc: Discretization, config: SolverConfig | None = None, tol=None):
    """Solve slab by slab from ``t = 0``; returns ``(U, stats)``."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    count0 = disc.rhs_assembly_count
    Kt = disc.mesh.Kt
    U = np.empty(disc.field_shape)
    stats = SolveStats(residual_norm=0.0)
    inflow = disc.u0_face
    guess = disc.initial_slab_guess()
    linear = disc.model.is_linear
    for kt in range(Kt):
        F = lambda u, kt=kt, inflow=inflow: disc.slab_residual(u.reshape(disc.slab_shape), kt, inflow).ravel()
        pre = _slab_preconditioner(disc, kt, inflow) if config.preconditioner == "block_jacobi" else None
        c_slab = disc.rhs_assembly_count
        try:
            u, st = newton_solve(F, guess.ravel(), config, linear, pre, tol)
        except NonconvergenceError as exc:
            exc.stats.rhs_assembly_count = disc.rhs_assembly_count - count0
            raise
        stats.slab_newton.append(st.newton_iterations)
        stats.slab_krylov.append(st.krylov_iterations)
        stats.slab_rhs.append(disc.rhs_assembly_count - c_slab)
        Us = u.reshape(disc.slab_shape)
        U[kt] = Us
        stats.newton_iterations += st.newton_iterations
        stats.krylov_iterations += st.krylov_iterations
        stats.residual_history.extend(st.residual_history)
        stats.residual_norm = max(stats.residual_norm, st.residual_norm)
        stats.roundoff_limited |= st.roundoff_limited
        inflow = disc.outflow_states(Us)
        guess = disc.initial_slab_guess(disc.top_trace_soln(Us))
    stats.converged = True
    stats.rhs_assembly_count = disc.rhs_assembly_count - count0
    stats.wall_time = time.perf_counter() - t0
    return U, stats


def solve_coupled(disc: Discretization, config: SolverConfig | None = None, initial=None):
    """Solve the whole space-time system at once; returns ``(U, stats)``."""
    config = config or SolverConfig(mode="coupled")
    t0 = time.perf_counter()
    count0 = disc.rhs_assembly_count
    if initial is None:
        warm_disc = disc
        if disc.temporal_flux != "upwind":
            warm_disc = Discretization(
                disc.model, disc.problem, disc.mesh, disc.p, disc.scheme, disc.ops.c,
                disc.ops.n_oi, disc.ops.soln_kind, disc.ops.flux_kind, "upwind", disc.entropy_projection,
            )
        warm_cfg = replace(config, mode="march")
        initial, _ = solve_march(warm_disc, warm_cfg, tol=max(config.warm_start_tol, config.newton_tol))
        if warm_disc is not disc:
            disc.rhs_assembly_count += warm_disc.rhs_assembly_count
    F = lambda u: disc.residual(u.reshape(disc.field_shape)).ravel()
    pre = _global_preconditioner(disc) if config.preconditioner == "block_jacobi" else None
    try:
        u, stats = newton_solve(F, np.asarray(initial).ravel(), config, disc.model.is_linear, pre)
    except NonconvergenceError as exc:
        exc.stats.rhs_assembly_count = disc.rhs_assembly_count - count0
        raise
    stats.rhs_assembly_count = disc.rhs_assembly_count - count0
    stats.slab_newton.append(stats.newton_iterations)
    stats.slab_krylov.append(stats.krylov_iterations)
    stats.slab_rhs.append(stats.rhs_assembly_count)
    stats.wall_time = time.perf_counter() - t0
    return u.reshape(disc.field_shape), stats


def solve(disc: Discretization, config: SolverConfig | None = None):
    config = config or SolverConfig()
    if config.mode == "march":
        if disc.temporal_flux != "upwind":
            raise ConfigurationError("march mode needs the upwind temporal flux; use mode=coupled")
        return solve_march(disc, config)
    return solve_coupled(disc, config)
