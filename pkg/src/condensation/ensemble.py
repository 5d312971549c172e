"""Canonical and grand canonical measures and their ordered/cut images.

Probabilities are computed in log domain. The canonical normalizer
F_m(n) = sum over |xi| = n of prod f(xi_j) comes from a convolution table.
Pushforwards through order (and cut) are evaluated on the enumerated set of
ordered configurations with total at most ``cap``; the mass outside that
head is carried as a certified ``tail`` on the ``Pmf``.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .combinatorics import count_orderings, enumerate_ordered, enumerate_sigma

__all__ = [
    "NORMALIZATION_TOL",
    "DEFAULT_TAIL_TARGET",
    "CapWarning",
    "ConvolutionTable",
    "Pmf",
    "SweepRow",
    "build_convolution_table",
    "canonical_pmf",
    "ordered_cut_canonical",
    "ordered_gc_pmf",
    "tail_mass_bound",
    "default_cap",
    "tv_distance",
    "convergence_sweep",
    "write_sweep_csv",
]

NORMALIZATION_TOL = 1e-10
DEFAULT_TAIL_TARGET = 1e-6
# absolute slack added to complement-style tail bounds for rounding in the head sum
_ROUNDING_SLACK = 1e-14


class CapWarning(UserWarning):
    """The truncation level is large relative to the particle number."""


@dataclass(frozen=True)
class ConvolutionTable:
    """``log_F[k, j] = log F_k(j)`` for ``0 <= k <= m``, ``0 <= j <= n``.

    Row 0 is the point mass at j = 0, so ``log_F[0] = [0, -inf, ...]``.
    """

    m: int
    n: int
    log_F: np.ndarray

    def log_partition(self, k, j):
        return float(self.log_F[k, j])


@lru_cache(maxsize=32)
def build_convolution_table(w, m, n):
    """k-fold convolutions of f up to k = m, j = n, in log domain. O(m n^2)."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    lf = w.log_f_array(n)
    log_F = np.full((m + 1, n + 1), -np.inf)
    log_F[0, 0] = 0.0
    log_F[1] = lf
    for k in range(2, m + 1):
        prev = log_F[k - 1]
        row = log_F[k]
        for j in range(n + 1):
            row[j] = logsumexp(prev[j::-1] + lf[: j + 1])
    log_F.setflags(write=False)
    return ConvolutionTable(m, n, log_F)


@dataclass
class Pmf:
    """Finite head of a discrete distribution plus a certified tail mass.

    ``support`` holds configuration tuples of length ``dim``; ``prob`` is the
    parallel array. ``tail`` bounds the mass not listed in ``support``.
    """

    support: list
    prob: np.ndarray
    dim: int
    m: int
    n: int | None = None
    phi: float | None = None
    cap: int | None = None
    tail: float = 0.0

    def __post_init__(self):
        self.prob = np.asarray(self.prob, dtype=float)
        if len(self.support) != len(self.prob):
            raise ValueError("support and prob lengths differ")

    def __len__(self):
        return len(self.support)

    def as_dict(self):
        return dict(zip(self.support, self.prob.tolist()))

    def head_mass(self):
        return math.fsum(self.prob)

    def normalization_error(self):
        return abs(self.head_mass() + self.tail - 1.0)

    def check_normalized(self, tol=NORMALIZATION_TOL):
        if np.any(self.prob < 0):
            raise AssertionError("negative probability")
        err = self.normalization_error()
        if err > tol:
            raise AssertionError(f"head + tail misses 1 by {err:.3g}")

    def totals(self):
        return np.fromiter((sum(c) for c in self.support), dtype=np.int64, count=len(self))


def _log_weights(lf, configs):
    return lf[configs].sum(axis=1)


def canonical_pmf(w, m, n):
    """The canonical measure on {xi in N^m : |xi| = n}, listed in lexicographic order."""
    support = list(enumerate_sigma(m, n))
    lf = w.log_f_array(n)
    arr = np.array(support, dtype=np.int64).reshape(len(support), m)
    log_Fmn = build_convolution_table(w, m, n).log_partition(m, n)
    prob = np.exp(_log_weights(lf, arr) - log_Fmn)
    return Pmf(support, prob, dim=m, m=m, n=n)


@lru_cache(maxsize=16)
def _ordered_support(dim, cap):
    support = list(enumerate_ordered(dim, cap))
    arr = np.array(support, dtype=np.int64).reshape(len(support), dim)
    log_k = np.array([math.log(count_orderings(z)) for z in support])
    arr.setflags(write=False)
    log_k.setflags(write=False)
    return support, arr, log_k


def ordered_cut_canonical(w, m, n, cap=None, table=None):
    """Law of the configuration with its largest site removed, under the canonical measure.

    Enumerates ordered eta of length m - 1 with |eta| <= cap (default n).
    Entries whose removed coordinate n - |eta| would be smaller than max(eta)
    are kept with probability exactly 0.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    if cap is None:
        cap = n
    if not 0 <= cap <= n:
        raise ValueError(f"cap must lie in [0, n]; got cap={cap}, n={n}")
    if 2 * cap >= n and n > 0:
        warnings.warn(
            f"cap={cap} >= n/2 with n={n}: the removed site need not hold most particles",
            CapWarning,
            stacklevel=2,
        )
    if table is None or table.m < m or table.n < n:
        table = build_convolution_table(w, m, n)
    support, arr, log_k = _ordered_support(m - 1, cap)
    lf = w.log_f_array(n)
    top = n - arr.sum(axis=1)
    valid = top >= arr[:, -1]
    # appending top (a new maximum) multiplies the multiplicity count by m / (ties + 1)
    ties = (arr == top[:, None]).sum(axis=1)
    log_w = (
        log_k
        + np.log(m / (ties + 1.0))
        + _log_weights(lf, arr)
        + lf[np.where(valid, top, 0)]
        - table.log_partition(m, n)
    )
    prob = np.where(valid, np.exp(log_w), 0.0)
    complete = cap >= (n * (m - 1)) // m
    tail = 0.0 if complete else max(0.0, 1.0 - math.fsum(prob)) + _ROUNDING_SLACK
    return Pmf(support, prob, dim=m - 1, m=m, n=n, cap=cap, tail=tail)


def _gc_log_normalizer(w, phi):
    value, err = w.series(phi, 0)
    return math.log(value), math.log(value + err)


def tail_mass_bound(w, m, cap, phi=None):
    """Upper bound on the grand canonical mass of {|zeta| > cap} on m sites.

    Computed as one minus the exact head mass, where the head uses the
    convolution table and an upper bound on Z(phi).
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    phi = w.gamma if phi is None else phi
    w._check_phi(phi)
    if phi == 0:
        return 0.0
    _, log_z_hi = _gc_log_normalizer(w, phi)
    table = build_convolution_table(w, m, cap)
    return _tail_from_table(table, m, cap, phi, log_z_hi)


def _tail_from_table(table, m, cap, phi, log_z_hi):
    s = np.arange(cap + 1)
    log_head = logsumexp(table.log_F[m, : cap + 1] + s * math.log(phi)) - m * log_z_hi
    return max(0.0, -math.expm1(log_head)) + _ROUNDING_SLACK


def default_cap(w, m, phi=None, target=DEFAULT_TAIL_TARGET, start=64):
    """Smallest cap with ``tail_mass_bound(w, m, cap, phi) <= target``."""
    phi = w.gamma if phi is None else phi
    w._check_phi(phi)
    if phi == 0:
        return 0
    _, log_z_hi = _gc_log_normalizer(w, phi)
    size = start
    while True:
        table = build_convolution_table(w, m, size)
        s = np.arange(size + 1)
        cum = np.logaddexp.accumulate(table.log_F[m] + s * math.log(phi))
        tails = -np.expm1(cum - m * log_z_hi) + _ROUNDING_SLACK
        hit = np.nonzero(tails <= target)[0]
        if len(hit):
            return int(hit[0])
        size *= 2


def ordered_gc_pmf(w, m, phi=None, cap=None):
    """Ordered image of the grand canonical product measure on m sites.

    ``phi`` defaults to gamma; ``cap`` defaults to the smallest level whose
    certified tail is at most ``DEFAULT_TAIL_TARGET``.
    """
    phi = w.gamma if phi is None else phi
    w._check_phi(phi)
    if cap is None:
        cap = default_cap(w, m, phi)
    support, arr, log_k = _ordered_support(m, cap)
    totals = arr.sum(axis=1)
    if phi == 0:
        prob = (totals == 0).astype(float)
        return Pmf(support, prob, dim=m, m=m, phi=phi, cap=cap, tail=0.0)
    log_z, log_z_hi = _gc_log_normalizer(w, phi)
    lf = w.log_f_array(cap)
    log_w = log_k + totals * math.log(phi) + _log_weights(lf, arr) - m * log_z
    prob = np.exp(log_w)
    table = build_convolution_table(w, m, cap)
    tail = _tail_from_table(table, m, cap, phi, log_z_hi)
    return Pmf(support, prob, dim=m, m=m, phi=phi, cap=cap, tail=tail)


def tv_distance(p, q):
    """Half the l1 distance between two Pmfs, plus half their tail masses.

    The tail term is the worst case for mass outside the listed supports,
    so the result is an upper bound on the true distance.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    pd, qd = p.as_dict(), q.as_dict()
    diffs = [abs(pd.get(k, 0.0) - qd.get(k, 0.0)) for k in pd.keys() | qd.keys()]
    return 0.5 * math.fsum(diffs) + 0.5 * (p.tail + q.tail)


@dataclass
class SweepRow:
    n: int
    tv: float
    tv_tail_bound: float
    background_density: float
    background_err: float
    max_site_fraction: float


SWEEP_COLUMNS = tuple(f.name for f in fields(SweepRow))


def _sweep_row(nu_hat, mu_hat, m, n):
    tv = tv_distance(nu_hat, mu_hat)
    totals = nu_hat.totals()
    background = math.fsum(nu_hat.prob * totals) / (m - 1)
    # per-site background never exceeds n / m
    background_err = nu_hat.tail * n / m
    if n > 0:
        frac = math.fsum(nu_hat.prob * (n - totals)) / n
    else:
        frac = math.nan
    return SweepRow(
        n=n,
        tv=tv,
        tv_tail_bound=0.5 * (nu_hat.tail + mu_hat.tail),
        background_density=background,
        background_err=background_err,
        max_site_fraction=frac,
    )


def convergence_sweep(w, m, n_list, cap=None, threads=1, mode="log"):
    """Distance between the cut canonical law at each n and the critical ordered product law.

    ``mode="exact"`` evaluates the canonical side with rational arithmetic.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be nonempty and strictly increasing")
    if n_list[0] < 0:
        raise ValueError("particle numbers must be >= 0")
    if m < 2:
        raise ValueError("m must be >= 2")
    if mode not in ("log", "exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if cap is None:
        cap = default_cap(w, m - 1)
    mu_hat = ordered_gc_pmf(w, m - 1, w.gamma, cap)
    table = build_convolution_table(w, m, n_list[-1]) if mode == "log" else None

    def one(n):
        if mode == "exact":
            from .exact import ordered_cut_canonical_exact, to_pmf

            nu_hat = to_pmf(ordered_cut_canonical_exact(w, m, n, min(cap, n)), m, n)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CapWarning)
                nu_hat = ordered_cut_canonical(w, m, n, min(cap, n), table=table)
        return _sweep_row(nu_hat, mu_hat, m, n)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, n_list))
    return [one(n) for n in n_list]


def write_sweep_csv(rows, path):
    """Write sweep rows as ``n,tv,tv_tail_bound,background_density,background_err,max_site_fraction``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([fmt_value(v) for v in astuple(row)])


def fmt_value(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)
