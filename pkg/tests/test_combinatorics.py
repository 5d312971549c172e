import itertools
from collections import Counter
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from condensation import SizeGuardError
from condensation.combinatorics import (
    count_cut_orderings,
    count_ordered,
    count_orderings,
    cut,
    enumerate_ordered,
    enumerate_sigma,
    order,
    ordered,
)

from conftest import brute_sigma


def brute_cut_counts(m, n):
    return Counter(tuple(sorted(xi))[:-1] for xi in brute_sigma(m, n))


def test_order_examples():
    assert order((3, 0, 1)) == (0, 1, 3)
    assert order((2, 2, 2)) == (2, 2, 2)
    assert order((5,)) == (5,)
    with pytest.raises(ValueError):
        order(())


def test_cut_examples():
    assert cut((0, 1, 3)) == (0, 1)
    assert cut((2, 2, 2)) == (2, 2)
    assert cut((0, 0)) == (0,)
    with pytest.raises(ValueError):
        cut((4,))
    with pytest.raises(ValueError):
        cut((3, 1))


def test_ordered_rejects_non_monotone():
    with pytest.raises(ValueError):
        ordered((1, 0))
    with pytest.raises(ValueError):
        ordered((0, -1))


def test_count_orderings_examples():
    assert count_orderings((0, 1, 1)) == 3
    assert count_orderings((2, 2, 2)) == 1
    assert count_orderings((1, 2, 3, 4)) == 24


def test_count_orderings_big():
    zeta = tuple(range(25))
    assert count_orderings(zeta) == 15511210043330985984000000
    assert count_orderings(zeta) > 2**64


def test_count_cut_orderings_examples():
    # brute force over Sigma_{3,10} (66 elements) and Sigma_{3,6}
    assert len(brute_sigma(3, 10)) == 66
    assert brute_cut_counts(3, 10)[(2, 2)] == 3
    assert count_cut_orderings((2, 2), 10, 3) == 3 == 3 * count_orderings((2, 2))
    assert brute_cut_counts(3, 6)[(2, 2)] == 1
    assert count_cut_orderings((2, 2), 6, 3) == 1
    assert count_cut_orderings((3, 4), 8, 3) == 0


@pytest.mark.parametrize("m", [2, 3, 4])
def test_count_cut_orderings_matches_brute_force(m):
    for n in range(13):
        counts = brute_cut_counts(m, n)
        for eta in enumerate_ordered(m - 1, n):
            assert count_cut_orderings(eta, n, m) == counts.get(eta, 0)


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_cut_count_bound_and_eventual_equality(m):
    for eta in enumerate_ordered(m - 1, 6):
        full = m * count_orderings(eta)
        for n in range(40):
            k = count_cut_orderings(eta, n, m)
            assert k <= full
            assert (k == full) == (n - sum(eta) > eta[-1])
        n_big = m * max(eta) + sum(eta) + 1
        assert count_cut_orderings(eta, n_big, m) == full


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_multiplicities_sum_to_sigma_size(m):
    for n in range(21):
        total = sum(count_orderings(z) for z in enumerate_ordered(m, n) if sum(z) == n)
        assert total == comb(n + m - 1, m - 1)


def test_enumerate_sigma_examples():
    assert list(enumerate_sigma(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert list(enumerate_sigma(1, 5)) == [(5,)]
    assert len(list(enumerate_sigma(3, 2))) == 6


@pytest.mark.parametrize("m, n", [(1, 0), (2, 7), (3, 5), (4, 4)])
def test_enumerate_sigma_complete_and_lexicographic(m, n):
    got = list(enumerate_sigma(m, n))
    assert got == sorted(brute_sigma(m, n))
    assert len(got) == len(set(got)) == comb(n + m - 1, m - 1)


def test_enumerate_ordered_examples():
    assert list(enumerate_ordered(2, 2)) == [(0, 0), (0, 1), (0, 2), (1, 1)]
    assert list(enumerate_ordered(1, 3)) == [(0,), (1,), (2,), (3,)]
    assert list(enumerate_ordered(2, 0)) == [(0, 0)]


@pytest.mark.parametrize("m, cap", [(1, 6), (2, 9), (3, 8), (4, 7)])
def test_enumerate_ordered_complete(m, cap):
    expected = sorted(
        {tuple(sorted(x)) for x in itertools.product(range(cap + 1), repeat=m) if sum(x) <= cap}
    )
    got = list(enumerate_ordered(m, cap))
    assert got == expected
    assert count_ordered(m, cap) == len(expected)


def test_size_guards():
    with pytest.raises(SizeGuardError):
        enumerate_sigma(10, 1000)
    with pytest.raises(SizeGuardError):
        enumerate_ordered(6, 2000)


configs = st.lists(st.integers(0, 30), min_size=2, max_size=6)


@given(configs)
def test_order_idempotent(xi):
    once = order(xi)
    assert order(once) == once
    assert sorted(xi) == list(once)


@given(configs, st.randoms())
def test_cut_order_commutes_with_permutations(xi, rnd):
    perm = list(xi)
    rnd.shuffle(perm)
    assert cut(order(perm)) == cut(order(xi))
