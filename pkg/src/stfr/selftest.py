"""Property checks run by ``stfr selftest``.

Each check returns a :class:`PropertyResult` holding the worst observed
violation and the tolerance it is held to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, getcontext

import numpy as np

from stfr.diagnostics import conservation_residual
from stfr.mesh import build_mesh
from stfr.mol import RK54_A, RK54_B
from stfr.operators import build_operators, c_hu, check_sbp
from stfr.physics import (
    LOG_MEAN_SWITCH,
    BoundaryConditions,
    advection_model,
    advection_problem,
    burgers_model,
    euler_discontinuous_problem,
    euler_model,
    log_mean,
)
from stfr.quadrature import make_rule
from stfr.residual import Discretization
from stfr.solver import SolverConfig, solve_march

COMBOS = (("GLL", "GL"), ("GL", "GL"), ("GLL", "GLL"), ("GL", "GLL"))


@dataclass
class PropertyResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


def random_states(model, n, rng, near=False):
    """``n`` admissible random states ``(ns, n)``; ``near`` adds tiny offsets."""
    if model.n_states == 1:
        u = rng.uniform(-2.0, 2.0, size=(1, n))
    else:
        rho = rng.uniform(0.5, 2.0, n)
        vel = rng.uniform(-1.0, 1.0, n)
        p = rng.uniform(0.5, 2.0, n)
        u = model.from_primitives(rho, vel, p)
    if near:
        u = u * (1.0 + 1e-5 * rng.standard_normal(u.shape))
    return u


def _models():
    return (("advection", advection_model()), ("burgers", burgers_model()), ("euler", euler_model()))


def check_quadrature(max_n=12) -> PropertyResult:
    worst = 0.0
    for kind, deg in (("GL", lambda n: 2 * n - 1), ("GLL", lambda n: 2 * n - 3)):
        for n in range(1 if kind == "GL" else 2, max_n + 1):
            rule = make_rule(kind, n)
            for k in range(deg(n) + 1):
                exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
                worst = max(worst, abs(float(np.sum(rule.weights * rule.nodes**k)) - exact))
    return PropertyResult("quadrature_exactness", worst, 1e-13)


def check_sbp_identities() -> list[PropertyResult]:
    worst = {"sbp": 0.0, "K_ones": 0.0, "qtilde_sym": 0.0, "qtilde_ones": 0.0}
    for p in (1, 2, 3, 4, 5):
        for soln, flux in COMBOS:
            for n_oi in (0, 2):
                for c in (0.0, c_hu(p), 1e-2):
                    ops = build_operators(p, n_oi, soln, flux, c)
                    r = check_sbp(ops)
                    worst["sbp"] = max(worst["sbp"], r["spatial"], r["temporal"])
                    worst["qtilde_sym"] = max(worst["qtilde_sym"], r["qtilde_s_sym"], r["qtilde_t_sym"])
                    worst["qtilde_ones"] = max(worst["qtilde_ones"], r["qtilde_s_ones"], r["qtilde_t_ones"])
                    Kn = np.abs(ops.K @ np.ones(ops.n_soln)).max() / max(np.abs(ops.K).max(), 1.0)
                    worst["K_ones"] = max(worst["K_ones"], Kn)
    return [PropertyResult(k, v, 1e-11) for k, v in worst.items()]


def _jump(a, b):
    return b - a


def check_two_point(rng, n_pairs=1000) -> list[PropertyResult]:
    out = []
    for name, model in _models():
        worst = dict(consistency=0.0, symmetry=0.0, tadmor_spatial=0.0, tadmor_temporal=0.0)
        for near in (False, True):
            ui = random_states(model, n_pairs, rng)
            uj = random_states(model, n_pairs, rng) if not near else ui * (1.0 + 1e-7 * rng.standard_normal(ui.shape))
            for kind, two_point, f, pot in (
                ("spatial", model.two_point_flux, model.flux, model.spatial_entropy_potential),
                ("temporal", model.two_point_state, model.temporal_flux, model.entropy_potential),
            ):
                fij, fji, fii = two_point(ui, uj), two_point(uj, ui), two_point(ui, ui)
                scale = np.maximum(1.0, np.abs(f(ui)).max(axis=0))
                worst["consistency"] = max(worst["consistency"], float(np.max(np.abs(fii - f(ui)) / scale)))
                worst["symmetry"] = max(worst["symmetry"], float(np.max(np.abs(fij - fji) / scale)))
                dv = _jump(model.entropy_variables(ui), model.entropy_variables(uj))
                lhs = np.sum(dv * fij, axis=0)
                rhs = _jump(pot(ui), pot(uj))
                tscale = np.maximum(1.0, np.sum(np.abs(dv) * np.abs(fij), axis=0))
                key = "tadmor_" + kind
                worst[key] = max(worst[key], float(np.max(np.abs(lhs - rhs) / tscale)))
        out.extend(PropertyResult(f"{name}_{k}", v, 1e-11) for k, v in worst.items())
    return out


def check_dissipation_sign(rng, n_pairs=1000) -> PropertyResult:
    worst = 0.0
    for model in (advection_model(), burgers_model(with_llf=True), euler_model(dissipation="matrix")):
        uL = random_states(model, n_pairs, rng)
        uR = random_states(model, n_pairs, rng)
        dv = model.entropy_variables(uR) - model.entropy_variables(uL)
        worst = max(worst, float(np.max(np.sum(dv * model.dissipation(uL, uR), axis=0))))
    return PropertyResult("dissipation_sign", max(worst, 0.0), 1e-14)


def _log_mean_reference(a: float, b: float) -> float:
    getcontext().prec = 50
    A, B = Decimal(a), Decimal(b)
    if A == B:
        return a
    return float((A - B) / (A.ln() - B.ln()))


def check_log_mean_continuity() -> PropertyResult:
    """Relative error against a 50-digit reference on both sides of the series switch."""
    worst = 0.0
    f_switch = math.sqrt(LOG_MEAN_SWITCH)
    for b in (0.3, 1.0, 7.0):
        for f in f_switch * np.array([0.5, 0.999, 0.99999, 1.00001, 1.001, 2.0]):
            a = b * (1 + f) / (1 - f)
            got = float(log_mean(a, b))
            worst = max(worst, abs(got - _log_mean_reference(a, b)) / abs(got))
        worst = max(worst, abs(float(log_mean(b, b)) - b) / b)
    return PropertyResult("log_mean_continuity", worst, 1e-12)


def check_entropy_variables(rng, n=200, h=1e-6) -> list[PropertyResult]:
    out = []
    for name, model in _models():
        u = random_states(model, n, rng)
        v = model.entropy_variables(u)
        fd = np.empty_like(u)
        for k in range(model.n_states):
            e = np.zeros(model.n_states)
            e[k] = h
            fd[k] = (model.entropy(u + e[:, None]) - model.entropy(u - e[:, None])) / (2 * h)
        err = float(np.max(np.abs(fd - v) / np.maximum(1.0, np.abs(v))))
        inv = float(np.max(np.abs(model.conservative_from_entropy(v) - u) / np.maximum(1.0, np.abs(u))))
        out.append(PropertyResult(f"{name}_entropy_variables_fd", err, 1e-6))
        out.append(PropertyResult(f"{name}_entropy_inverse", inv, 1e-12))
    return out


def _constant_problem(state):
    state = np.asarray(state, dtype=float)

    def initial(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(state.reshape((-1,) + (1,) * x.ndim), (state.size,) + x.shape).copy()

    return BoundaryConditions(initial=initial, exact=lambda x, t: initial(x), source=None, name="constant")


def check_free_stream() -> PropertyResult:
    worst = 0.0
    states = {"advection": [0.7], "burgers": [0.4], "euler": euler_model().from_primitives(1.2, 0.3, 0.9)}
    for name, model in _models():
        if name == "euler":
            model = euler_model(dissipation="matrix")
        for scheme in ("ESFR", "NSFR"):
            for soln, flux in COMBOS:
                for c in ("c_DG", "c_Hu"):
                    disc = Discretization(model, _constant_problem(states[name]), build_mesh(3, 2), 3,
                                          scheme, c, 0, soln, flux)
                    U = np.empty(disc.field_shape)
                    U[...] = np.asarray(states[name], dtype=float)[None, None, :, None]
                    worst = max(worst, float(np.abs(disc.residual(U)).max()))
    return PropertyResult("free_stream", worst, 1e-11)


def _hadamard_oracle_error(model, ops, disc, rng):
    m, Nq = ops.m, ops.n_q
    uq = random_states(model, Nq, rng)[:, None, :]
    uf = random_states(model, 4 * m, rng)[:, None, :]
    faces = [uf[:, :, k * m:(k + 1) * m] for k in range(4)]
    rv_s, rf_s, rv_t, rf_t = disc._nsfr_terms(uq, *faces)
    h = np.concatenate([uq, uf], axis=2)[:, 0]
    n = h.shape[1]
    worst = 0.0
    for Q, F, rv, rf in ((ops.Qtilde_s, model.two_point_flux, rv_s, rf_s),
                         (ops.Qtilde_t, model.two_point_state, rv_t, rf_t)):
        ref = np.zeros((model.n_states, n))
        for i in range(n):
            for j in range(n):
                ref[:, i] += 2.0 * Q[i, j] * F(h[:, i], h[:, j])
        # the face-face diagonal (boundary) block cancels against the interface correction
        for i in range(Nq, n):
            ref[:, i] -= 2.0 * Q[i, i] * F(h[:, i], h[:, i])
        got = np.concatenate([rv[:, 0], rf[:, 0]], axis=1)
        worst = max(worst, float(np.abs(got - ref).max()))
    return worst


def check_hadamard(rng) -> PropertyResult:
    worst = 0.0
    for model, problem in ((burgers_model(), advection_problem()), (euler_model(), euler_discontinuous_problem())):
        for soln, flux in COMBOS:
            disc = Discretization(model, problem if model.n_states == 3 else _constant_problem([0.0]),
                                  build_mesh(1, 1), 2, "NSFR", 0.0, 0, soln, flux)
            worst = max(worst, _hadamard_oracle_error(model, disc.ops, disc, rng))
    return PropertyResult("hadamard_vs_double_sum", worst, 1e-12)


def check_nsfr_equals_esfr_linear(rng) -> PropertyResult:
    worst = 0.0
    model = advection_model()
    for soln, flux in COMBOS:
        esfr = Discretization(model, advection_problem(), build_mesh(3, 3), 3, "ESFR", 0.0, 0, soln, flux)
        nsfr = Discretization(model, advection_problem(), build_mesh(3, 3), 3, "NSFR", 0.0, 0, soln, flux)
        U = rng.standard_normal(esfr.field_shape)
        worst = max(worst, float(np.abs(esfr.residual(U) - nsfr.residual(U)).max()))
    return PropertyResult("nsfr_equals_esfr_linear", worst, 1e-10)


def check_conservation() -> list[PropertyResult]:
    out = []
    disc = Discretization(advection_model(), advection_problem(), build_mesh(4, 4), 3, "ESFR", "c_Hu")
    U, _ = solve_march(disc, SolverConfig())
    out.append(PropertyResult("conservation_advection", float(conservation_residual(disc, U).max()), 1e-10))
    disc = Discretization(euler_model(), euler_discontinuous_problem(), build_mesh(4, 4), 2, "NSFR", "c_Hu")
    U, _ = solve_march(disc, SolverConfig())
    out.append(PropertyResult("conservation_euler", float(conservation_residual(disc, U).max()), 1e-10))
    return out


def rk54_stability_coefficients(order=5) -> np.ndarray:
    """Coefficients of the RK54 amplification polynomial ``R(z)``, from the 2N-storage recurrence."""
    # track u and k as polynomials in z (u' = lambda u with z = lambda dt)
    u = np.zeros(order + 1)
    u[0] = 1.0
    k = np.zeros(order + 1)
    for a, b in zip(RK54_A, RK54_B):
        zu = np.concatenate([[0.0], u[:-1]])
        k = a * k + zu
        u = u + b * k
    return u


def check_rk54() -> PropertyResult:
    coef = rk54_stability_coefficients()
    taylor = np.array([1.0 / math.factorial(j) for j in range(5)])
    return PropertyResult("rk54_taylor_coefficients", float(np.abs(coef[:5] - taylor).max()), 1e-14)


def run_selftest(seed=0, n_pairs=1000) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    results = [check_quadrature()]
    results += check_sbp_identities()
    results += check_two_point(rng, n_pairs)
    results.append(check_dissipation_sign(rng, n_pairs))
    results.append(check_log_mean_continuity())
    results += check_entropy_variables(rng)
    results.append(check_free_stream())
    results.append(check_hadamard(rng))
    results.append(check_nsfr_equals_esfr_linear(rng))
    results += check_conservation()
    results.append(check_rk54())
    return results
