"""Seed derivation: stable, collision-resistant, independent of hash randomization."""

from __future__ import annotations

from hypothesis import given
from hypothesis import strategies as st

from subsearch.seeds import derive_seed

# Frozen outputs: these must never change, or every seeded experiment in the
# repository silently reruns with different instances.
FROZEN = {
    (0, 0): 6213027144842677344,
    (0, 1): 8613600020916457518,
    (0, 2): 5301956043363155061,
    (1, 0): 5995469358269906430,
    (12345, 678): 4860946341809886528,
}


def test_frozen_values():
    for (master, index), expected in FROZEN.items():
        assert derive_seed(master, index) == expected


def test_repeatable():
    assert derive_seed(42, 7) == derive_seed(42, 7)


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=10**6))
def test_range_is_63_bit(master, index):
    seed = derive_seed(master, index)
    assert 0 <= seed < 2**63


def test_distinct_across_indices():
    seeds = {derive_seed(0, i) for i in range(2000)}
    assert len(seeds) == 2000


def test_distinct_across_masters():
    seeds = {derive_seed(m, 0) for m in range(2000)}
    assert len(seeds) == 2000


def test_no_cross_contamination():
    # "1:23" vs "12:3" style prefix collisions must not alias.
    assert derive_seed(1, 23) != derive_seed(12, 3)
    assert derive_seed(11, 1) != derive_seed(1, 11)
