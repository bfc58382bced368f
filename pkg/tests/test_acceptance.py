"""Acceptance criteria, one test each.

Every test prints one ``[ACCEPT n] PASS|FAIL ...`` line with the measured
values.  Figure reproductions report distances as sums of squared
differences (the quantity the published figures plot) and also print the
square root for reference.

Run with ``pytest tests/test_acceptance.py -v``.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from scripsim.best_reply import (
    best_reply_threshold,
    choice_probabilities,
    discounted_ruin_factor,
    ruin_factors,
    value_iteration_policy,
)
from scripsim.equilibrium import best_reply_vector, greatest_equilibrium, is_fixed_point
from scripsim.experiments import ExperimentConfig, fig3_curves, fig4_samples, fit_rounds_vs_n, run_fig2
from scripsim.model import AgentType, below_capacity, build_game_spec
from scripsim.scrip_chain import exact_stationary
from scripsim.wealth_entropy import base_distribution, min_relent_distribution, relative_entropy, solve_lambda

from conftest import random_spec, random_thresholds, single_type
from oracles import lattice_min_relent, monte_carlo_ruin
from test_exact import small_spec

SEC6_SPEC = {
    "types": [{"alpha": 0.1, "beta": 1.0, "gamma": 1.0, "delta": 0.95, "rho": 1.0, "chi": 1.0}],
    "fractions": ["1"],
    "h": 1,
    "m": "2",
    "n": 1000,
}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, started):
        line = f"[ACCEPT {n}] {'PASS' if ok else 'FAIL'} {detail} ({time.perf_counter() - started:.1f}s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def test_criterion_1_exact_stationary(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_diff = worst_db = 0.0
    count = 0
    for _ in range(24):
        spec, k = small_spec(rng, shared_chi=True)
        res = exact_stationary(spec, k)
        worst_diff = max(worst_diff, res.max_abs_diff)
        worst_db = max(worst_db, res.detailed_balance_residual)
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_diff <= 1e-8 and worst_db <= 1e-10 and elapsed < 60
    report(1, ok, f"{count} instances: max |pi_cf - pi_solved| = {worst_diff:.2e} (<=1e-8), "
                  f"detailed balance {worst_db:.2e} (<=1e-10)", t0)


def test_criterion_2_entropy_solver(report):
    t0 = time.perf_counter()
    spec_u = single_type(m="5/2", n=2, h=2)
    lam_u = solve_lambda(spec_u, (5,)).lam
    d_u = min_relent_distribution(spec_u, (5,))
    uniform_err = float(np.max(np.abs(d_u.values[0] - 1 / 6)))

    spec = single_type(m=2, n=1000)
    d = min_relent_distribution(spec, (5,))
    q = base_distribution(spec, (5,))
    h_star = relative_entropy(d, q)
    grid_best, counts = lattice_min_relent(q.values[0], 1000, 2000)
    beat = h_star - grid_best
    elapsed = time.perf_counter() - t0
    ok = abs(lam_u - 1) <= 1e-9 and uniform_err <= 1e-9 and beat <= 1e-6 and d.in_simplex(spec) and elapsed < 60
    report(2, ok, f"m=2.5: lambda-1 = {lam_u - 1:.1e}, uniform err {uniform_err:.1e}; m=2: grid min "
                  f"{grid_best:.9f} vs H(d*||q) {h_star:.9f} (d* beaten by {max(beat, 0):.1e}, <=1e-6)", t0)


MC_CASES = [(1, 0.25, 0.2, 0.95), (3, 0.3, 0.2, 0.9), (4, 0.1, 0.15, 0.97)]


def test_criterion_3_mdp_cross_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    agree = total = 0
    while total < 60:
        spec = random_spec(rng, n_range=(50, 2000))
        k = random_thresholds(rng, spec)
        for t in range(spec.num_types):
            rep = best_reply_threshold(spec, k, t, cap=5000)
            pol = value_iteration_policy(spec, k, t, state_cap=rep.kappa + 25)  # asserts threshold form + concavity
            agree += pol.threshold == rep.kappa
            total += 1
    mc_ok = True
    mc_worst = 0.0
    for kappa, p_u, p_d, z in MC_CASES:
        mean, se = monte_carlo_ruin(kappa, p_u, p_d, z, 1_000_000, np.random.default_rng(kappa))
        dev = abs(mean - discounted_ruin_factor(kappa, p_u, p_d, z)) / se
        mc_worst = max(mc_worst, dev)
        mc_ok &= dev <= 3
    cf_err = 0.0
    for _ in range(200):
        p_d = float(rng.uniform(1e-4, 0.5))
        p_u = float(rng.uniform(0, 1 - p_d))
        z = float(rng.uniform(0.5, 0.99999))
        cf_err = max(cf_err, abs(ruin_factors(1, p_u, p_d, z)[0] - z * p_d / (1 - z * (1 - p_d))))
    elapsed = time.perf_counter() - t0
    ok = agree == total and mc_ok and cf_err <= 1e-12 and elapsed < 300
    report(3, ok, f"scan == value iteration on {agree}/{total} (type, spec) pairs; MC worst |dev| "
                  f"{mc_worst:.2f} SE (<=3, 1e6 walks); kappa=1 closed form err {cf_err:.1e}", t0)


def test_criterion_4_p_u_identity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    checked = 0
    for _ in range(300):
        spec = random_spec(rng, n_range=(20, 5000))
        k = random_thresholds(rng, spec, hi=30)
        for t in range(spec.num_types):
            p = choice_probabilities(spec, k, t)
            worst = max(worst, abs(p.p_u - p.p_u_identity))
            checked += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    report(4, ok, f"{checked} checks, max |p_u - p_d*lambda*omega| = {worst:.1e} (<=1e-9)", t0)


def test_criterion_5_monotonicity(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    grids = 0
    violations = []
    while grids < 12:
        spec = random_spec(rng, max_types=3, n_range=(1000, 3000))
        T = spec.num_types
        k = random_thresholds(rng, spec, lo=2, hi=8)
        cap = 3000
        # lambda and best replies along m
        ms = [Fraction(j, spec.h) for j in range(1, 6 * spec.h)]
        ms = [m for m in ms if below_capacity(spec.with_m(m), k)]
        lams = [solve_lambda(spec.with_m(m), k).lam for m in ms]
        brs = [best_reply_vector(spec.with_m(m), k, cap)[0] for m in ms]
        if np.any(np.diff(lams) < 0):
            violations.append(("lambda vs m", spec))
        if any(any(a < b for a, b in zip(x, y)) for x, y in zip(brs, brs[1:])):
            violations.append(("BR vs m", spec))
        # along each coordinate of k
        for t in range(T):
            seq = [tuple(v + (j if s == t else 0) for s, v in enumerate(k)) for j in range(6)]
            lk = [solve_lambda(spec, kk).lam for kk in seq]
            bk = [best_reply_vector(spec, kk, cap)[0] for kk in seq]
            if np.any(np.diff(lk) > 0):
                violations.append(("lambda vs k", spec))
            if any(any(a > b for a, b in zip(x, y)) for x, y in zip(bk, bk[1:])):
                violations.append(("BR vs k", spec))
        # n versus 2n
        if best_reply_vector(spec, k, cap)[0] != best_reply_vector(spec.with_n(2 * spec.n), k, cap)[0]:
            violations.append(("BR n vs 2n", spec))
        grids += 1
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 300
    report(5, ok, f"{grids} parameter grids, {len(violations)} monotonicity violations "
                  f"{sorted({v[0] for v in violations})}", t0)


def test_criterion_6_equilibrium(report):
    t0 = time.perf_counter()
    spec = single_type(alpha=0.1, delta=0.99, m=2, n=1000)
    res = greatest_equilibrium(spec)
    kstar = res.thresholds
    fixed = best_reply_vector(spec, kstar, res.cap)[0] == kstar
    above = [k for k in range(kstar[0] + 1, kstar[0] + 3) if is_fixed_point(spec, (k,), res.cap)]
    scan_fixed = [k for k in range(0, kstar[0] + 3) if is_fixed_point(spec, (k,), res.cap)]
    small = greatest_equilibrium(single_type(alpha=0.1, delta=0.05, m=2, n=1000))
    elapsed = time.perf_counter() - t0
    ok = (res.classification == "nontrivial" and kstar[0] > 0 and fixed and not above
          and max(scan_fixed) == kstar[0] and small.thresholds == (0,) and small.classification == "trivial"
          and elapsed < 300)
    report(6, ok, f"delta=0.99: k* = {kstar} ({res.classification}), BR(k*) = k*: {fixed}, fixed points in "
                  f"0..k*+2: {scan_fixed}; delta=0.05: {small.thresholds} ({small.classification})", t0)


def test_criterion_7_figure2(report):
    t0 = time.perf_counter()
    data = {"spec": SEC6_SPEC, "thresholds": [5], "rounds": 1_000_000, "n_values": [5000, 25000],
            "start": "nearest", "observe_every": 1}
    cfg = ExperimentConfig.from_dict(data, mode="fig2", seed=0)
    rows = run_fig2(cfg)["fig2.csv"].splitlines()[2:]
    vals = {int(r.split(",")[0]): (float(r.split(",")[2]), float(r.split(",")[1])) for r in rows}
    sq5, l2_5 = vals[5000]
    sq25, l2_25 = vals[25000]
    ok = sq5 <= 0.002 and sq25 <= 0.0004
    report(7, ok, f"max distance over 1e6 rounds: n=5000 {sq5:.2e} (<=0.002, published .001), "
                  f"n=25000 {sq25:.2e} (<=0.0004, published .0002); root form {l2_5:.4f} / {l2_25:.4f}", t0)


def test_criterion_8_figure3(report):
    t0 = time.perf_counter()
    data = {"spec": SEC6_SPEC, "thresholds": [5], "replicas": 10, "rounds_per_agent": 3.0, "start": "extreme"}
    cfg = ExperimentConfig.from_dict(data, mode="fig3", seed=0)
    rounds, dists, target = fig3_curves(cfg)
    N = cfg.spec.num_agents
    i2 = int(np.flatnonzero(rounds == 2 * N)[0])
    i3 = int(np.flatnonzero(rounds == 3 * N)[0])
    avg = dists.mean(axis=0)
    sq = np.sum((avg - target) ** 2, axis=1)
    per_run = np.sum((dists - target) ** 2, axis=2).mean(axis=0)
    ok = 0.004 <= sq[i2] <= 0.016 and sq[i3] <= 0.002
    report(8, ok, f"distance of 10-run average distribution: 2 rounds/agent {sq[i2]:.4f} (in [0.004, 0.016], "
                  f"published .008), 3 rounds/agent {sq[i3]:.4f} (<=0.002, published .001); mean of per-run "
                  f"distances {per_run[i2]:.4f} / {per_run[i3]:.4f}; root form {np.sqrt(sq[i2]):.4f} / "
                  f"{np.sqrt(sq[i3]):.4f}", t0)


def test_criterion_9_figure4(report):
    t0 = time.perf_counter()
    data = {"spec": SEC6_SPEC, "thresholds": [5], "replicas": 10, "n_values": [1000, 2000, 3000, 4000, 5000],
            "within": 0.001, "metric": "l2_squared", "rounds_per_agent": 20.0, "start": "extreme"}
    cfg = ExperimentConfig.from_dict(data, mode="fig4", seed=0)
    samples = fig4_samples(cfg)
    reached = [(n, h) for n, _, h in samples if h is not None]
    fit = fit_rounds_vs_n(*zip(*reached))
    elapsed = time.perf_counter() - t0
    ok = len(reached) == len(samples) and 2 <= fit.slope <= 5 and elapsed < 900
    report(9, ok, f"rounds to within .001 ~ {fit.slope:.3f}(+-{fit.slope_stderr:.3f}) n + {fit.intercept:.0f} "
                  f"(slope in [2, 5], published ~3); {len(reached)}/{len(samples)} runs reached", t0)
