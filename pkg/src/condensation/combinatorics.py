"""Configurations, the order and cut maps, and multiplicity counts.

Everything here is exact integer arithmetic. Configurations are plain tuples
of nonnegative ints; ordered configurations are nondecreasing tuples.
"""
from __future__ import annotations

from collections import Counter
from math import comb, factorial

from .errors import SizeGuardError

__all__ = [
    "ENUMERATION_LIMIT",
    "validate_config",
    "ordered",
    "order",
    "cut",
    "count_orderings",
    "count_cut_orderings",
    "count_sigma",
    "enumerate_sigma",
    "count_ordered",
    "enumerate_ordered",
]

ENUMERATION_LIMIT = 10**8


def validate_config(xi):
    xi = tuple(int(v) for v in xi)
    if not xi:
        raise ValueError("a configuration needs at least one site")
    if any(v < 0 for v in xi):
        raise ValueError(f"negative occupation in {xi}")
    return xi


def ordered(zeta):
    """Validate and return ``zeta`` as a nondecreasing tuple.

    Raises ``ValueError`` if ``zeta`` is not monotone.
    """
    zeta = validate_config(zeta)
    if any(a > b for a, b in zip(zeta, zeta[1:])):
        raise ValueError(f"{zeta} is not nondecreasing")
    return zeta


def order(xi):
    """Sort a configuration's occupations in nondecreasing order."""
    return tuple(sorted(validate_config(xi)))


def cut(zeta):
    """Drop the last (largest) coordinate of an ordered configuration."""
    zeta = ordered(zeta)
    if len(zeta) < 2:
        raise ValueError("cut needs at least two sites")
    return zeta[:-1]


def count_orderings(zeta):
    """Number of configurations whose ordering is ``zeta``.

    This is the multinomial m! / prod_v (multiplicity of v)!.
    """
    zeta = ordered(zeta)
    out = factorial(len(zeta))
    for mult in Counter(zeta).values():
        out //= factorial(mult)
    return out


def count_cut_orderings(eta, n, m):
    """Number of xi with |xi| = n on m sites whose order-then-cut image is ``eta``.

    The removed coordinate is forced to be ``n - |eta|``; it must be at least
    the largest entry of ``eta`` or no configuration qualifies.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    eta = ordered(eta)
    if len(eta) != m - 1:
        raise ValueError(f"eta must have length m - 1 = {m - 1}")
    top = n - sum(eta)
    if top < eta[-1]:
        return 0
    return count_orderings(eta + (top,))


def count_sigma(m, n):
    """Size of {xi in N^m : |xi| = n}."""
    return comb(n + m - 1, m - 1)


def _guard(size, what):
    if size > ENUMERATION_LIMIT:
        raise SizeGuardError(
            f"{what} has {size} elements, above the limit {ENUMERATION_LIMIT}"
        )


def enumerate_sigma(m, n):
    """Yield every xi in N^m with |xi| = n once, in lexicographic order."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    _guard(count_sigma(m, n), f"Sigma_(m={m}, n={n})")
    return _compositions(m, n)


def _compositions(m, n):
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(m - 1, n - first):
            yield (first,) + rest


def count_ordered(m, cap):
    """Number of nondecreasing length-m tuples with sum <= cap.

    A nondecreasing m-tuple summing to s is a partition of s into at most m
    parts; p_k(s) = p_{k-1}(s) + p_k(s - k).
    """
    parts = [1] + [0] * cap
    for k in range(1, m + 1):
        for s in range(k, cap + 1):
            parts[s] += parts[s - k]
    return sum(parts)


def enumerate_ordered(m, cap):
    """Yield every nondecreasing length-m tuple with sum <= cap, once.

    Order is lexicographic in the tuple.
    """
    if m < 1 or cap < 0:
        raise ValueError("need m >= 1 and cap >= 0")
    # cheap pre-check before the exact count
    if comb(cap + m, m) > ENUMERATION_LIMIT * factorial(m):
        raise SizeGuardError(f"ordered configurations with m={m}, cap={cap} exceed limit")
    _guard(count_ordered(m, cap), f"X_{m} with |eta| <= {cap}")
    return _ordered_tuples(m, cap, 0)


def _ordered_tuples(m, budget, floor):
    if m == 1:
        for v in range(floor, budget + 1):
            yield (v,)
        return
    # the remaining m - 1 entries are each >= v
    for v in range(floor, budget // m + 1):
        for rest in _ordered_tuples(m - 1, budget - v, v):
            yield (v,) + rest
