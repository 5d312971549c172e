import itertools
import math
from collections import defaultdict

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


# -- brute-force oracles shared by several test modules ----------------------


def brute_sigma(m, n):
    """All xi in N^m with |xi| = n, by filtering the full box."""
    return [xi for xi in itertools.product(range(n + 1), repeat=m) if sum(xi) == n]


def brute_cut_canonical(f, m, n):
    """Pushforward of the canonical law through sort-then-drop-max, by direct summation."""
    weights = {xi: math.prod(f(v) for v in xi) for xi in brute_sigma(m, n)}
    total = math.fsum(weights.values())
    out = defaultdict(list)
    for xi, wt in weights.items():
        out[tuple(sorted(xi))[:-1]].append(wt / total)
    return {eta: math.fsum(ps) for eta, ps in out.items()}


def brute_ordered_gc(f, m, phi, z, cap):
    """Ordered image of the product measure, summing over the box {0..cap}^m."""
    out = defaultdict(list)
    for xi in itertools.product(range(cap + 1), repeat=m):
        if sum(xi) <= cap:
            p = math.prod(phi**v * f(v) for v in xi) / z**m
            out[tuple(sorted(xi))].append(p)
    return {zeta: math.fsum(ps) for zeta, ps in out.items()}


def powerlaw_f(alpha):
    return lambda k: 1.0 if k == 0 else float(k) ** -alpha
