"""Acceptance suite: one test per acceptance criterion (1 to 9).

Reference numbers below are the published convergence tables, stored as
``{(p, c): [errors for N = 2, 4, ..., N_max]}``.  Each test gathers every
violation before failing so a single run reports the whole picture.
Runs are cached per session, so the criteria share fits where they overlap.
"""

import math

import numpy as np
import pytest

from stfr.config import RunConfig
from stfr.harness import run_cost_study, run_entropy_study, run_order_vs_c
from stfr.operators import resolve_c
from stfr.selftest import run_selftest

from conftest import fit_cached

N_LEVELS = (2, 4, 8, 16, 32, 64, 128)

ADVECTION_GLLGL = {
    (3, "c_DG"): [8.10e-2, 5.15e-3, 3.27e-4, 2.04e-5, 1.27e-6, 7.96e-8, 4.97e-9],
    (3, "c_Hu"): [1.46e-1, 1.10e-2, 7.09e-4, 4.46e-5, 2.79e-6, 1.75e-7, 1.09e-8],
    (4, "c_DG"): [1.12e-2, 4.01e-4, 1.27e-5, 3.96e-7, 1.24e-8, 3.86e-10, 1.22e-11],
    (4, "c_Hu"): [2.28e-2, 8.15e-4, 2.62e-5, 8.21e-7, 2.56e-8, 8.00e-10, 2.50e-11],
}
ADVECTION_GLGL = dict(ADVECTION_GLLGL)
ADVECTION_GLGL[(4, "c_DG")] = ADVECTION_GLLGL[(4, "c_DG")][:-1] + [1.20e-11]
ADVECTION = {"GLL/GL": ADVECTION_GLLGL, "GL/GL": ADVECTION_GLGL}

BURGERS = {
    "GLL/GL": {
        (3, "c_DG"): [2.31e-1, 1.16e-2, 4.71e-4, 1.94e-5, 9.68e-7, 5.68e-8, 3.49e-9],
        (3, "1e-5"): [2.30e-1, 1.15e-2, 4.78e-4, 2.06e-5, 1.04e-6, 6.29e-8, 4.35e-9],
        (3, "c_Hu"): [1.94e-1, 2.91e-2, 3.30e-3, 2.84e-4, 2.19e-5, 1.79e-6, 1.31e-7],
        (4, "c_DG"): [3.78e-2, 1.49e-3, 4.12e-5, 9.06e-7, 1.91e-8, 4.71e-10, 1.33e-11],
        (4, "1e-5"): [5.93e-2, 4.38e-3, 1.50e-4, 4.42e-6, 1.26e-7, 3.79e-9, 1.18e-10],
        (4, "c_Hu"): [6.63e-2, 5.20e-3, 1.80e-4, 5.37e-6, 1.54e-7, 4.73e-9, 1.48e-10],
    },
    "GL/GL": {
        (3, "c_DG"): [7.27e-2, 4.54e-3, 2.35e-4, 1.42e-5, 8.84e-7, 5.54e-8, 3.47e-9],
        (3, "1e-5"): [7.36e-2, 4.76e-3, 2.43e-4, 1.49e-5, 9.46e-7, 6.19e-8, 4.32e-9],
        (3, "c_Hu"): [1.64e-1, 3.20e-2, 3.29e-3, 2.82e-4, 2.19e-5, 1.79e-6, 1.31e-7],
        (4, "c_DG"): [1.82e-2, 4.70e-4, 1.42e-5, 3.88e-7, 1.04e-8, 2.97e-10, 8.99e-12],
        (4, "1e-5"): [7.51e-2, 4.47e-3, 1.51e-4, 4.44e-6, 1.26e-7, 3.79e-9, 1.55e-10],
        (4, "c_Hu"): [8.33e-2, 5.37e-3, 1.81e-4, 5.42e-6, 1.56e-7, 4.74e-9, 1.48e-10],
    },
}

EULER = {
    "GLL/GL": {
        (3, "c_DG"): [7.40e-2, 5.04e-3, 3.57e-4, 2.36e-5, 1.50e-6, 9.38e-8],
        (3, "c_Hu"): [7.57e-2, 5.00e-3, 3.58e-4, 2.36e-5, 1.51e-6, 9.42e-8],
        (4, "c_DG"): [1.97e-2, 1.19e-3, 4.52e-5, 1.53e-6, 4.87e-8, 1.53e-9],
        (4, "c_Hu"): [1.97e-2, 1.19e-3, 4.52e-5, 1.53e-6, 4.88e-8, 1.53e-9],
    },
    "GL/GL": {
        (3, "c_DG"): [8.53e-2, 6.73e-3, 5.10e-4, 5.86e-5, 4.20e-6, 2.64e-7],
        (3, "c_Hu"): [8.57e-2, 6.78e-3, 5.27e-4, 6.13e-5, 5.52e-6, 3.29e-7],
        (4, "c_DG"): [1.84e-2, 1.17e-3, 3.43e-5, 1.11e-6, 3.50e-8, 1.10e-9],
        (4, "c_Hu"): [2.40e-2, 1.34e-3, 5.13e-5, 1.91e-6, 6.85e-8, 2.30e-9],
    },
}


ALL_COMBOS = "GLL/GL,GL/GL,GLL/GLL,GL/GLL"
# entropy preservation cases (N, p, soln/flux)
PRESERVATION_CASES = "2:3:GLL/GLL,2:3:GLL/GL,4:2:GL/GL,2:8:GLL/GL,4:5:GLL/GL"


def _error(model, p, N, c, combo):
    soln, flux = combo.split("/")
    est = fit_cached(model=model, p=p, N=N, c=c, soln_nodes=soln, flux_nodes=flux)
    return est.error(states=[0] if model == "euler" else None)


def _rate(e_coarse, e_fine):
    return math.log2(e_coarse / e_fine)


def _compare_table(model, table, combo, key, Ns, rel_tol, failures):
    """Errors for ``Ns`` against the table; returns the computed errors."""
    p, c = key
    errs = []
    for N in Ns:
        err = _error(model, p, N, c, combo)
        ref = table[combo][key][N_LEVELS.index(N)]
        if not abs(err - ref) <= rel_tol * ref:
            failures.append(f"{combo} p={p} {c} N={N}: error {err:.3e} vs {ref:.2e} ({err / ref - 1:+.1%})")
        errs.append(err)
    return errs


def _report(failures):
    assert not failures, f"{len(failures)} violation(s):\n" + "\n".join(failures)


# -- 1. linear advection ------------------------------------------------------

@pytest.mark.parametrize("combo", ["GLL/GL", "GL/GL"])
def test_criterion_1_advection_convergence(combo):
    failures = []
    for key in ADVECTION[combo]:
        p = key[0]
        errs = _compare_table("advection", ADVECTION, combo, key, N_LEVELS[:6], 0.05, failures)
        rate = _rate(errs[-2], errs[-1])
        if abs(rate - (p + 1)) > 0.1:
            failures.append(f"{combo} p={p} {key[1]}: rate 32->64 {rate:.3f}, expected {p + 1} +/- 0.1")
    _report(failures)


@pytest.mark.slow
@pytest.mark.parametrize("combo", ["GLL/GL", "GL/GL"])
def test_criterion_1_advection_finest_level(combo):
    failures = []
    for key in ADVECTION[combo]:
        _compare_table("advection", ADVECTION, combo, key, (128,), 0.10, failures)
    _report(failures)


# -- 2. Burgers -----------------------------------------------------------------

def test_criterion_2_burgers_convergence():
    failures = []
    # p = 4: the finest pair of the GLL/GL table approaches the optimal order
    for c in ("c_DG", "1e-5", "c_Hu"):
        rate = _rate(_error("burgers", 4, 64, c, "GLL/GL"), _error("burgers", 4, 128, c, "GLL/GL"))
        if abs(rate - 5.0) > 0.15:
            failures.append(f"GLL/GL p=4 {c}: rate 64->128 {rate:.3f}, expected 5.0 +/- 0.15")
    # p = 3 c_Hu: suboptimal rates at intermediate N following the tabulated pattern
    for combo in ("GLL/GL", "GL/GL"):
        ref = BURGERS[combo][(3, "c_Hu")]
        for N in (8, 16, 32, 64):
            i = N_LEVELS.index(N)
            rate = _rate(_error("burgers", 3, N // 2, "c_Hu", combo), _error("burgers", 3, N, "c_Hu", combo))
            expected = _rate(ref[i - 1], ref[i])
            if abs(rate - expected) > 0.2 or not rate < 4.0:
                failures.append(f"{combo} p=3 c_Hu: rate at N={N} {rate:.3f}, expected {expected:.2f} +/- 0.2")
    # anchor value
    err = _error("burgers", 3, 8, "c_DG", "GLL/GL")
    if not abs(err - 4.71e-4) <= 0.10 * 4.71e-4:
        failures.append(f"GLL/GL p=3 c_DG N=8: error {err:.3e} vs 4.71e-4")
    _report(failures)


# -- 3. Euler --------------------------------------------------------------------

@pytest.mark.parametrize("combo,rate_tol", [("GLL/GL", 0.1), ("GL/GL", 0.25)])
def test_criterion_3_euler_convergence(combo, rate_tol):
    failures = []
    for key in EULER[combo]:
        p = key[0]
        errs = _compare_table("euler", EULER, combo, key, N_LEVELS[:6], 0.10, failures)
        rate = _rate(errs[-2], errs[-1])
        if abs(rate - (p + 1)) > rate_tol:
            failures.append(f"{combo} p={p} {key[1]}: rate 32->64 {rate:.3f}, expected {p + 1} +/- {rate_tol}")
    _report(failures)


# -- 4. entropy preservation ---------------------------------------------------

@pytest.mark.parametrize("model,cs", [("burgers", "c_DG,c_Hu"), ("euler", "c_DG")])
def test_criterion_4_entropy_preservation(model, cs):
    cfg = RunConfig().with_overrides(model=model, entropy_mode="preserve", c=cs, cases=PRESERVATION_CASES,
                                     newton_tol=1e-10)
    table = run_entropy_study(cfg)
    assert len(table.rows) == (10 if model == "burgers" else 5)
    failures = [
        f"{r['c']} N={r['N']} p={r['p']} {r['soln_nodes']}/{r['flux_nodes']}: "
        f"residual {r['preservation_residual']:.2e} converged={r['converged']}"
        for r in table.rows
        if not (r["converged"] and abs(r["preservation_residual"]) <= 1e-11)
    ]
    _report(failures)


# -- 5. entropy stability ----------------------------------------------------------

@pytest.mark.parametrize("model", ["burgers", "euler"])
def test_criterion_5_entropy_stability(model):
    cfg = RunConfig().with_overrides(model=model, entropy_mode="stable", c="c_DG,c_Hu", p="3",
                                     N="4,8,16", node_combos=ALL_COMBOS)
    table = run_entropy_study(cfg)
    failures = []
    for r in table.rows:
        if r["level"] == 0 or r["level"] == -1:
            if not r["converged"]:
                failures.append(f"{r['c']} N={r['N']} {r['soln_nodes']}/{r['flux_nodes']}: {r['message']}")
            continue
        if not r["increment"] <= 1e-12:
            failures.append(f"{r['c']} N={r['N']} {r['soln_nodes']}/{r['flux_nodes']} level {r['level']}: "
                            f"increment {r['increment']:.2e}")
    assert {r["N"] for r in table.rows} == {4, 8, 16}
    _report(failures)


# -- 6. stability over a c sweep --------------------------------------------------

@pytest.mark.parametrize("model", ["burgers", "euler"])
def test_criterion_6_stability_over_c(model):
    cs = "1e-7,1e-6,1e-5,1e-4,c_Hu"
    cfg = RunConfig().with_overrides(model=model, entropy_mode="stable", c=cs, p="3", N="8",
                                     node_combos=ALL_COMBOS)
    table = run_entropy_study(cfg)
    finals = {}
    for r in table.rows:
        finals[(r["c"], r["soln_nodes"], r["flux_nodes"])] = (r["total_change"], r["converged"])
    assert len(finals) == 5 * 4
    failures = [f"c={k[0]} {k[1]}/{k[2]}: total change {v[0]:.3e} converged={v[1]}"
                for k, v in finals.items() if not (v[1] and v[0] <= 0.0)]
    _report(failures)


# -- 7. order of accuracy against c ------------------------------------------------

def _drop_location(cs, rates, threshold):
    """First c (log10) where the rate falls below ``threshold``; NaN if never."""
    for c, r in zip(cs, rates):
        if r < threshold:
            return math.log10(c)
    return math.nan


def test_criterion_7_order_vs_c():
    p = 3
    cfg = RunConfig().with_overrides(model="advection", p=str(p), N="16,32", c="log:-7:4:12")
    table = run_order_vs_c(cfg)
    assert table.ok, "a run in the sweep failed"
    failures = []
    drops = {}
    for scheme in ("st", "mol"):
        rows = sorted((r for r in table.rows if r["scheme"] == scheme), key=lambda r: r["c_value"])
        cs = np.array([r["c_value"] for r in rows])
        rates = np.array([r["rate"] for r in rows])
        for c, r in zip(cs, rates):
            if c <= 1e-3 and abs(r - (p + 1)) > 0.1:
                failures.append(f"{scheme} c={c:.1e}: plateau rate {r:.3f}")
        if not rates[-1] <= p + 0.3:
            failures.append(f"{scheme} c={cs[-1]:.1e}: large-c rate {rates[-1]:.3f} > {p + 0.3}")
        drops[scheme] = _drop_location(cs, rates, p + 0.5)
    if not abs(drops["st"] - drops["mol"]) <= 1.0:
        failures.append(f"drop locations (log10 c) st={drops['st']} mol={drops['mol']} differ by more than a decade")
    _report(failures)


# -- 8. cost trend -------------------------------------------------------------------

def test_criterion_8_cost_advection():
    cfg = RunConfig().with_overrides(model="advection", p="3", N="32", c="c_DG,1e-6,1e-5,1e-4,c_Hu")
    table = run_cost_study(cfg)
    assert table.ok
    failures = []
    for combo in ("GLL/GL", "GL/GL", "GLL/GLL", "GL/GLL"):
        soln, flux = combo.split("/")
        rows = sorted((r for r in table.rows if (r["soln_nodes"], r["flux_nodes"]) == (soln, flux)),
                      key=lambda r: r["c_value"])
        counts = [r["last_slab_rhs"] for r in rows]
        if any(b > a for a, b in zip(counts, counts[1:])):
            failures.append(f"{combo}: last-slab counts {counts} increase somewhere between c_DG and c_Hu")
    _report(failures)


@pytest.mark.parametrize("model", ["burgers", "euler"])
def test_criterion_8_cost_entropy_stable(model):
    cfg = RunConfig().with_overrides(model=model, p="3", N="8", c="c_DG,c_Hu", node_combos="GLL/GL")
    table = run_cost_study(cfg)
    assert table.ok
    counts = {r["c"]: r["last_slab_rhs"] for r in table.rows}
    assert counts["c_Hu"] < counts["c_DG"], counts


# -- 9. property suites --------------------------------------------------------------

def test_criterion_9_property_suites():
    results = run_selftest(seed=0, n_pairs=1000)
    names = {r.name for r in results}
    assert len(names) == len(results)
    assert any(n.startswith("conservation") for n in names)
    failures = [f"{r.name}: {r.value:.3e} > {r.tolerance:.1e}" for r in results if not r.passed]
    _report(failures)


def test_c_hu_values_used_by_the_suite():
    # the sweeps above rely on c_Hu sitting inside the swept ranges
    assert 1e-4 < resolve_c("c_Hu", 3) < 1e-3
    assert 1e-5 < resolve_c("c_Hu", 4) < 1e-4
