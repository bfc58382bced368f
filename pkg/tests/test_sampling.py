import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scripsim.scrip_chain import AliasTable, UniformStream, make_rng, replica_rng


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 0))
def test_alias_table_reproduces_weights(w):
    table = AliasTable(w)
    np.testing.assert_allclose(table.probabilities(), np.array(w) / sum(w), atol=1e-12)


def test_alias_table_empirical_frequencies():
    w = [1.0, 0.0, 3.0, 6.0]
    table = AliasTable(w)
    u = make_rng(3).random(200_000)
    counts = np.bincount([table.sample(x) for x in u], minlength=4) / u.size
    np.testing.assert_allclose(counts, np.array(w) / 10, atol=5e-3)
    assert counts[1] == 0


def test_alias_rejects_bad_weights():
    for w in ([], [0, 0], [-1, 2]):
        with pytest.raises(ValueError):
            AliasTable(w)


def test_uniform_stream_matches_generator():
    a = UniformStream(make_rng(11), block=7)
    draws = [a() for _ in range(20)]
    ref = make_rng(11)
    expected = np.concatenate([ref.random(7) for _ in range(3)])[:20]
    np.testing.assert_array_equal(draws, expected)


def test_replica_streams_differ_and_repeat():
    a = replica_rng(5, 0).random(4)
    b = replica_rng(5, 1).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, replica_rng(5, 0).random(4))
