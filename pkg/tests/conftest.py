from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from scripsim.model import AgentType, GameSpec, build_game_spec, below_capacity


def single_type(alpha=0.1, delta=0.95, m=2, n=1000, beta=1.0, rho=1.0, chi=1.0, gamma=1.0, h=1) -> GameSpec:
    return build_game_spec([AgentType(alpha=alpha, beta=beta, gamma=gamma, delta=delta, rho=rho, chi=chi)], [1], h, m, n)


@pytest.fixture
def sec6_spec():
    return single_type()


def random_spec(rng: np.random.Generator, max_types=3, n_range=(20, 400), shared_chi=False) -> GameSpec:
    """Random multi-type spec with h = 2T agents per replica, one of each type pair."""
    T = int(rng.integers(1, max_types + 1))
    chi0 = float(rng.uniform(0.5, 2.0))
    types = [
        AgentType(
            alpha=float(rng.uniform(0.02, 0.8)),
            beta=float(rng.uniform(0.2, 1.0)),
            gamma=1.0,
            delta=float(rng.uniform(0.3, 0.995)),
            rho=float(rng.uniform(0.3, 3.0)),
            chi=chi0 if shared_chi else float(rng.uniform(0.3, 3.0)),
        )
        for _ in range(T)
    ]
    h = 2 * T
    m = Fraction(int(rng.integers(1, 4 * h)), h)
    return build_game_spec(types, [Fraction(1, T)] * T, h, m, int(rng.integers(*n_range)))


def random_thresholds(rng: np.random.Generator, spec: GameSpec, lo=1, hi=10) -> tuple[int, ...]:
    while True:
        k = tuple(int(v) for v in rng.integers(lo, hi + 1, size=spec.num_types))
        if below_capacity(spec, k):
            return k


@st.composite
def specs_and_thresholds(draw, max_types=3, shared_chi=False, n_range=(20, 400)):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, max_types=max_types, n_range=n_range, shared_chi=shared_chi)
    return spec, random_thresholds(rng, spec)
