"""Rational-arithmetic versions of the canonical computations.

Used as an oracle for the log-domain path on small instances. Requires a
family whose ``f_exact`` returns ``Fraction`` values (integer-alpha power
laws, tables of decimals).
"""
from __future__ import annotations

from fractions import Fraction
from math import prod

import numpy as np

from .combinatorics import count_cut_orderings, enumerate_ordered, enumerate_sigma
from .ensemble import Pmf

EXACT_N_LIMIT = 400


def _f_values(w, n):
    return [w.f_exact(k) for k in range(n + 1)]


def convolution_table_exact(w, m, n):
    """``F[k][j]`` as Fractions for ``0 <= k <= m``, ``0 <= j <= n``."""
    if n > EXACT_N_LIMIT:
        raise ValueError(f"exact mode limited to n <= {EXACT_N_LIMIT}")
    f = _f_values(w, n)
    F = [[Fraction(int(j == 0)) for j in range(n + 1)]]
    for _ in range(m):
        prev = F[-1]
        F.append([sum(prev[j - i] * f[i] for i in range(j + 1)) for j in range(n + 1)])
    return F


def canonical_pmf_exact(w, m, n):
    f = _f_values(w, n)
    weights = {xi: prod((f[v] for v in xi), start=Fraction(1)) for xi in enumerate_sigma(m, n)}
    total = convolution_table_exact(w, m, n)[m][n]
    return {xi: wt / total for xi, wt in weights.items()}


def ordered_cut_canonical_exact(w, m, n, cap=None):
    """Exact probabilities of every ordered eta with |eta| <= cap (zeros kept)."""
    cap = n if cap is None else cap
    f = _f_values(w, n)
    total = convolution_table_exact(w, m, n)[m][n]
    out = {}
    for eta in enumerate_ordered(m - 1, cap):
        k = count_cut_orderings(eta, n, m)
        if k == 0:
            out[eta] = Fraction(0)
            continue
        weight = prod((f[v] for v in eta), start=Fraction(1)) * f[n - sum(eta)]
        out[eta] = k * weight / total
    return out


def to_pmf(exact, m, n):
    """Convert an exact cut-canonical dict into a float ``Pmf`` of dimension m - 1."""
    support = list(exact)
    mass = sum(exact.values(), Fraction(0))
    prob = np.array([float(p) for p in exact.values()])
    return Pmf(support, prob, dim=m - 1, m=m, n=n, tail=float(1 - mass))
