import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scripsim.equilibrium import best_reply_vector, greatest_equilibrium, is_fixed_point
from scripsim.errors import SpecError
from scripsim.model import AgentType, build_game_spec

from conftest import random_spec, single_type


def test_all_zero_is_fixed_point():
    spec = single_type(m=2, n=100)
    assert best_reply_vector(spec, (0,))[0] == (0,)
    assert is_fixed_point(spec, (0,))


def test_at_capacity_freezes():
    spec = single_type(m=2, n=100)
    k, reports = best_reply_vector(spec, (2,))
    assert k == (0,) and reports is None


def test_small_delta_trivial():
    res = greatest_equilibrium(single_type(alpha=0.1, delta=0.05, m=2, n=100))
    assert res.classification == "trivial"
    assert res.thresholds == (0,)


def test_delta_near_one_nontrivial():
    spec = single_type(alpha=0.1, delta=0.99, m=2, n=100)
    res = greatest_equilibrium(spec)
    assert res.classification == "nontrivial"
    assert res.thresholds[0] > 0
    assert best_reply_vector(spec, res.thresholds)[0] == res.thresholds


def test_greatest_by_full_scan():
    spec = single_type(alpha=0.2, delta=0.9, m=2, n=50)
    res = greatest_equilibrium(spec)
    fixed = [k for k in range(res.cap + 1) if is_fixed_point(spec, (k,), res.cap)]
    assert max(fixed) == res.thresholds[0]


def test_trace_non_increasing_and_csv():
    spec = single_type(alpha=0.3, delta=0.95, m=2, n=100)
    res = greatest_equilibrium(spec)
    tr = np.array(res.trace)
    assert np.all(np.diff(tr, axis=0) <= 0)
    assert tr[0, 0] == res.cap
    lines = res.trace_csv().splitlines()
    assert lines[0] == "step,k_0"
    assert len(lines) == len(res.trace) + 1
    doc = json.loads(res.to_json())
    assert doc["thresholds"] == list(res.thresholds)


def test_tuned_single_type_reaches_five():
    # alpha chosen in the band where the best reply to 5 is 5
    spec = single_type(delta=0.9, m=2, n=1000)
    from scripsim.best_reply import best_reply_threshold
    from scripsim.model import AgentType

    lo, hi = 0.01, 0.99
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        s = spec.with_types([AgentType(alpha=mid, beta=1.0, gamma=1.0, delta=0.9)])
        if best_reply_threshold(s, (5,), 0).kappa >= 5:
            lo = mid
        else:
            hi = mid
    s = spec.with_types([AgentType(alpha=lo, beta=1.0, gamma=1.0, delta=0.9)])
    assert best_reply_vector(s, (5,))[0] == (5,)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_best_reply_monotone_in_profile(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, max_types=2, n_range=(50, 200))
    cap = 200
    lo = tuple(int(v) for v in rng.integers(1, 8, size=spec.num_types))
    hi = tuple(a + int(b) for a, b in zip(lo, rng.integers(0, 4, size=spec.num_types)))
    a = best_reply_vector(spec, lo, cap)[0]
    b = best_reply_vector(spec, hi, cap)[0]
    assert all(x <= y for x, y in zip(a, b))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_two_type_greatest_by_lattice_scan(seed):
    rng = np.random.default_rng(seed)
    t = [AgentType(alpha=float(rng.uniform(0.05, 0.5)), beta=float(rng.uniform(0.3, 1)), gamma=1.0,
                   delta=float(rng.uniform(0.7, 0.98)), rho=float(rng.uniform(0.5, 2)), chi=1.0) for _ in range(2)]
    spec = build_game_spec(t, ["1/2", "1/2"], 2, 1, 60)
    res = greatest_equilibrium(spec)
    kstar = res.thresholds
    bound = [v + 2 for v in kstar]
    for k in itertools.product(*[range(b + 1) for b in bound]):
        if any(a > b for a, b in zip(k, kstar)) and is_fixed_point(spec, k, res.cap):
            pytest.fail(f"fixed point {k} above {kstar}")


def test_equilibrium_non_increasing_in_m():
    ks = [greatest_equilibrium(single_type(alpha=0.2, delta=0.95, m=m, n=100)).thresholds[0] for m in (1, 2, 3, 4)]
    assert all(a >= b for a, b in zip(ks, ks[1:]))


def test_bad_profile():
    with pytest.raises(SpecError):
        best_reply_vector(single_type(m=2, n=10), (1, 2))
