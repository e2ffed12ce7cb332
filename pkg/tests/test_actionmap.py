import numpy as np
import pytest
from hypothesis import given, strategies as st

from socialtrees.actionmap import DiscretizedActionMap, InvalidAction, to_continuous, total_actions


def test_single_channel_values():
    m = DiscretizedActionMap(1)
    assert to_continuous(m, 0).tolist() == [-1.0]
    assert to_continuous(m, 3).tolist() == [0.0]
    assert to_continuous(m, 6).tolist() == [1.0]


def test_second_channel_top_bin():
    m = DiscretizedActionMap(2)
    assert m.channel_bin(13) == (1, 6)
    assert m.to_continuous(13).tolist() == [0.0, 1.0]


def test_bin_grid():
    m = DiscretizedActionMap(1)
    vals = [m.bin_value(b) for b in range(7)]
    assert vals == pytest.approx([-1, -2 / 3, -1 / 3, 0, 1 / 3, 2 / 3, 1])


@pytest.mark.parametrize("n_a,expected", [(1, 7), (2, 14), (6, 42)])
def test_action_count(n_a, expected):
    assert total_actions(DiscretizedActionMap(n_a)) == expected


def test_out_of_range_and_bad_bins():
    m = DiscretizedActionMap(2)
    for bad in (-1, 14, 100):
        with pytest.raises(InvalidAction):
            m.to_continuous(bad)
    with pytest.raises(ValueError):
        DiscretizedActionMap(1, bins=1)


@given(st.integers(1, 6), st.integers(2, 11))
def test_index_is_a_bijection_onto_channel_bin_pairs(n_a, bins):
    m = DiscretizedActionMap(n_a, bins)
    pairs = {m.channel_bin(a) for a in range(m.total_actions)}
    assert pairs == {(c, b) for c in range(n_a) for b in range(bins)}
    for a in range(m.total_actions):
        c, b = m.channel_bin(a)
        v = m.to_continuous(a)
        # exactly one channel may be nonzero, and it sits on the grid
        assert np.count_nonzero(v[np.arange(n_a) != c]) == 0
        assert m.to_discrete(c, v[c]) == a or v[c] == 0.0
