"""Single-site weight families f, their critical fugacity and derived series.

Every family exposes ``log f(k)`` for integer ``k >= 0`` and the critical
fugacity ``gamma``. Series such as Z(phi) = sum_k phi^k f(k) are summed with
``math.fsum`` and returned with a certified remainder.

Two parametric families are built in. Both use the convention f(0) = 1::

    PowerLaw(alpha)             f(k) = k**-alpha            gamma = 1
    GeometricPolynomial(b, a)   f(k) = b**-k * k**-a        gamma = b

so that ``gamma**k f(k) = k**-alpha`` for k >= 1 in both cases. A third,
``Tabulated``, holds a finite table of values and a declared gamma.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DivergenceError, OutOfRangeError, TailCertificationError

__all__ = [
    "WeightFamily",
    "PowerLaw",
    "GeometricPolynomial",
    "Tabulated",
    "HypothesisReport",
    "parse_family",
    "power_sum_tail",
]

DEFAULT_REL_TOL = 1e-12

# Euler-Maclaurin: even Bernoulli numbers B_2 .. B_16.
_BERNOULLI_EVEN = (
    Fraction(1, 6),
    Fraction(-1, 30),
    Fraction(1, 42),
    Fraction(-1, 30),
    Fraction(5, 66),
    Fraction(-691, 2730),
    Fraction(7, 6),
    Fraction(-3617, 510),
)
_EM_START = 32
_EM_ORDER = 6

_CHUNK = 1 << 16
_MAX_TERMS = 1 << 27


def power_sum_tail(s, start=_EM_START, order=_EM_ORDER):
    """Return ``(value, err)`` for sum_{k >= start} k**-s, s > 1.

    Euler-Maclaurin expansion at ``start``; for a completely monotone summand
    the remainder is bounded by the first omitted correction term. ``err`` is
    twice that term.
    """
    if s <= 1:
        raise DivergenceError(f"sum of k^-{s} diverges")
    if order + 1 > len(_BERNOULLI_EVEN):
        raise ValueError("Euler-Maclaurin order too large")
    N = float(start)
    terms = [N ** (1.0 - s) / (s - 1.0), 0.5 * N**-s]
    rising = s  # s (s+1) ... (s+2k-2)
    fact = 2.0  # (2k)!
    corr = []
    for k in range(1, order + 2):
        term = float(_BERNOULLI_EVEN[k - 1]) / fact * rising * N ** (-s - 2 * k + 1)
        corr.append(term)
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        fact *= (2 * k + 1) * (2 * k + 2)
    value = math.fsum(terms + corr[:-1])
    return value, 2.0 * abs(corr[-1])


class WeightFamily:
    """Base class; concrete families are frozen dataclasses below.

    Subclasses provide ``gamma``, ``_log_f_block(ks)``, ``spec()`` and the
    series hooks. ``log_f_array`` memoizes ``log f(0..n)`` behind a lock so a
    single family can be shared between threads.
    """

    def __post_init__(self):
        object.__setattr__(self, "_memo", np.zeros(0))
        object.__setattr__(self, "_memo_lock", threading.Lock())

    # -- evaluation -------------------------------------------------------

    def log_f_array(self, n):
        """``log f(k)`` for ``k = 0..n`` as a read-only float array."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        memo = self._memo
        if len(memo) > n:
            return memo[: n + 1]
        with self._memo_lock:
            memo = self._memo
            if len(memo) <= n:
                size = max(n + 1, 2 * len(memo), 64)
                size = self._clip_size(size, n)
                ks = np.arange(size, dtype=np.int64)
                memo = np.asarray(self._log_f_block(ks), dtype=float)
                memo.setflags(write=False)
                object.__setattr__(self, "_memo", memo)
        return memo[: n + 1]

    def _clip_size(self, size, n):
        return size

    def eval_log_f(self, k):
        """Return log f(k)."""
        k = int(k)
        if k < 0:
            raise ValueError(f"occupation count must be >= 0, got {k}")
        return float(self.log_f_array(k)[k])

    def f(self, k):
        return math.exp(self.eval_log_f(k))

    def log_crit_array(self, n):
        """``log(gamma**k f(k))`` for ``k = 0..n``."""
        ks = np.arange(n + 1)
        return self.log_f_array(n) + ks * math.log(self.gamma)

    def f_exact(self, k):
        """f(k) as a ``Fraction``; only for families with rational values."""
        raise ValueError(f"{self.spec()} has no exact rational values")

    # -- series -----------------------------------------------------------

    def _check_phi(self, phi):
        if phi < 0:
            raise ValueError(f"fugacity must be >= 0, got {phi}")
        if phi > self.gamma:
            raise DivergenceError(
                f"phi={phi} exceeds the radius of convergence gamma={self.gamma}"
            )

    def series(self, phi, moment=0, rel_tol=DEFAULT_REL_TOL):
        """Return ``(value, err)`` for sum_k k**moment phi**k f(k).

        ``err`` is a certified bound on ``|value - exact|`` and satisfies
        ``err <= rel_tol * value``.
        """
        if moment not in (0, 1):
            raise ValueError("only moments 0 and 1 are supported")
        if rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        self._check_phi(phi)
        if phi == 0:
            return (1.0 if moment == 0 else 0.0) * math.exp(self.eval_log_f(0)), 0.0
        return self._series(phi, moment, rel_tol)

    def partition_function(self, phi, rel_tol=DEFAULT_REL_TOL):
        """Z(phi) = sum_n phi^n f(n) with relative remainder <= rel_tol."""
        return self.series(phi, 0, rel_tol)[0]

    def partition_function_bounds(self, phi, rel_tol=DEFAULT_REL_TOL):
        value, err = self.series(phi, 0, rel_tol)
        return value - err, value + err

    def density(self, phi, rel_tol=DEFAULT_REL_TOL):
        """Mean occupation R(phi) of one site under the grand canonical measure."""
        self._check_phi(phi)
        if phi == 0:
            return 0.0
        num, _ = self.series(phi, 1, rel_tol / 4)
        den, _ = self.series(phi, 0, rel_tol / 4)
        return num / den

    def critical_density(self, rel_tol=DEFAULT_REL_TOL):
        """rho_c = R(gamma)."""
        return self.density(self.gamma, rel_tol)

    def first_moment_at_gamma(self, rel_tol=DEFAULT_REL_TOL):
        """Unnormalized sum_n n gamma^n f(n)."""
        return self.series(self.gamma, 1, rel_tol)[0]

    # -- hypotheses -------------------------------------------------------

    def check_hypotheses(self, m, n_max):
        """Scan the growth hypotheses up to ``n_max``; never raises."""
        return _check_hypotheses(self, m, n_max)


def _ratio_tail_sum(phi_over_gamma, s, moment_zero_term, rel_tol, c0=1.0):
    """sum_{k>=0} r^k c_k k^moment with c_0 term given and c_k = k^-s for k >= 1.

    Direct summation in chunks. For k > N the term ratio is at most
    q = r (1 + 1/N)^max(-s, 0) < 1, which bounds the remainder geometrically.
    """
    r = phi_over_gamma
    log_r = math.log(r)
    parts = [moment_zero_term * c0]
    start = 1
    partial = parts[0]
    while True:
        ks = np.arange(start, start + _CHUNK, dtype=float)
        terms = np.exp(ks * log_r - s * np.log(ks))
        parts.append(math.fsum(terms))
        partial = math.fsum(parts)
        N = start + _CHUNK - 1
        q = r * (1.0 + 1.0 / N) ** max(-s, 0.0)
        if q < 1.0:
            nxt = math.exp((N + 1) * log_r - s * math.log(N + 1))
            tail = nxt / (1.0 - q)
            if tail <= rel_tol * partial:
                return partial + 0.5 * tail, 0.5 * tail
        start = N + 1
        if start > _MAX_TERMS:
            raise TailCertificationError(
                f"series at phi/gamma={r} did not reach rel_tol={rel_tol} "
                f"within {_MAX_TERMS} terms"
            )


class _PowerTailMixin:
    """Series for families with gamma^k f(k) = k^-alpha (k >= 1), f(0) = 1."""

    def _log_f_block(self, ks):
        ks = np.asarray(ks)
        out = np.zeros(len(ks))
        pos = ks > 0
        out[pos] = -self.alpha * np.log(ks[pos]) - ks[pos] * math.log(self.gamma)
        return out

    def _series(self, phi, moment, rel_tol):
        s = self.alpha - moment
        zero_term = 1.0 if moment == 0 else 0.0
        if phi < self.gamma:
            return _ratio_tail_sum(phi / self.gamma, s, zero_term, rel_tol)
        if s <= 1:
            checkpoints = [10**j for j in range(2, 7)]
            ks = np.arange(1, checkpoints[-1] + 1, dtype=float)
            cums = np.cumsum(ks**-s)
            raise DivergenceError(
                f"sum_k k^{moment} gamma^k f(k) diverges for alpha={self.alpha}",
                partial_sums=[(c, float(cums[c - 1])) for c in checkpoints],
            )
        head = np.arange(1, _EM_START, dtype=float) ** -s
        tail, err = power_sum_tail(s)
        return math.fsum([zero_term, *head, tail]), err


@dataclass(frozen=True)
class PowerLaw(_PowerTailMixin, WeightFamily):
    """f(0) = 1, f(k) = k**-alpha; gamma = 1."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"PowerLaw needs alpha > 1, got {self.alpha}")
        WeightFamily.__post_init__(self)

    @property
    def gamma(self):
        return 1.0

    def spec(self):
        return f"powerlaw:alpha={self.alpha:g}"

    def f_exact(self, k):
        if float(self.alpha) != int(self.alpha):
            raise ValueError("exact values need an integer alpha")
        return Fraction(1) if k == 0 else Fraction(1, k ** int(self.alpha))


@dataclass(frozen=True)
class GeometricPolynomial(_PowerTailMixin, WeightFamily):
    """f(0) = 1, f(k) = b**-k * k**-alpha; gamma = b."""

    b: float
    alpha: float

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"GeometricPolynomial needs b > 0, got {self.b}")
        WeightFamily.__post_init__(self)

    @property
    def gamma(self):
        return float(self.b)

    def spec(self):
        return f"geompoly:b={self.b:g},alpha={self.alpha:g}"

    def f_exact(self, k):
        if float(self.alpha) != int(self.alpha):
            raise ValueError("exact values need an integer alpha")
        if k == 0:
            return Fraction(1)
        b = Fraction(str(self.b))
        return 1 / (b**k * Fraction(k) ** int(self.alpha))


@dataclass(frozen=True)
class Tabulated(WeightFamily):
    """f given by a finite table ``values[0..L-1]`` and a declared gamma.

    ``tail`` optionally declares a bound on sum_{k >= L} k gamma^k f(k); it is
    needed to certify any series at phi = gamma. Below gamma, without a declared
    tail, gamma^k f(k) is taken to stay below its last tabulated value.
    """

    values: tuple
    gamma: float
    tail: float | None = None
    source: str = field(default="", compare=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("empty weight table")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ValueError("tabulated weights must be finite and positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "values", vals)
        WeightFamily.__post_init__(self)

    def __len__(self):
        return len(self.values)

    def _clip_size(self, size, n):
        if n >= len(self.values):
            raise OutOfRangeError(
                f"f({n}) requested but the table has {len(self.values)} entries"
            )
        return min(size, len(self.values))

    def _log_f_block(self, ks):
        return np.log(np.asarray(self.values)[ks])

    def spec(self):
        return f"table:path={self.source}" if self.source else "table"

    def f_exact(self, k):
        if k >= len(self.values):
            raise OutOfRangeError(f"f({k}) beyond table")
        return Fraction(repr(self.values[k]))

    def _series(self, phi, moment, rel_tol):
        L = len(self.values)
        ks = np.arange(L, dtype=float)
        terms = np.asarray(self.values) * np.exp(ks * math.log(phi))
        if moment:
            terms = terms * ks
        head = math.fsum(terms)
        r = phi / self.gamma
        if self.tail is not None:
            bound = self.tail * r**L
        elif r < 1:
            c_last = self.values[-1] * self.gamma ** (L - 1)
            if moment == 0:
                bound = c_last * r**L / (1 - r)
            else:
                bound = c_last * r**L * (L * (1 - r) + r) / (1 - r) ** 2
        else:
            raise TailCertificationError(
                "tabulated family has no declared tail; cannot certify a series at gamma"
            )
        if bound > rel_tol * head:
            raise TailCertificationError(
                f"tail bound {bound:.3g} exceeds rel_tol * head for the tabulated family"
            )
        return head + 0.5 * bound, 0.5 * bound


def parse_family(spec):
    """Build a family from ``powerlaw:alpha=3``, ``geompoly:b=2,alpha=3`` or
    ``table:path=<file>``.

    A table file holds a ``gamma=<value>`` header line, an optional
    ``tail=<value>`` line and then one positive decimal per line.
    """
    if ":" not in spec:
        raise ValueError(f"malformed family spec {spec!r}")
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"malformed parameter {item!r} in {spec!r}")
        params[key.strip()] = value.strip()
    kind = kind.strip().lower()
    try:
        if kind == "powerlaw":
            _expect_keys(params, {"alpha"}, spec)
            return PowerLaw(float(params["alpha"]))
        if kind == "geompoly":
            _expect_keys(params, {"b", "alpha"}, spec)
            return GeometricPolynomial(float(params["b"]), float(params["alpha"]))
        if kind == "table":
            _expect_keys(params, {"path"}, spec)
            return load_table(params["path"])
    except (TypeError, KeyError) as exc:
        raise ValueError(f"bad parameters in {spec!r}: {exc}") from exc
    raise ValueError(f"unknown family kind {kind!r}")


def _expect_keys(params, keys, spec):
    if set(params) != keys:
        raise ValueError(f"{spec!r}: expected parameters {sorted(keys)}")


def load_table(path):
    gamma = tail = None
    values = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("gamma="):
            gamma = float(line[6:])
        elif line.startswith("tail="):
            tail = float(line[5:])
        else:
            try:
                values.append(float(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from exc
    if gamma is None:
        raise ValueError(f"{path}: missing gamma= header line")
    return Tabulated(tuple(values), gamma, tail, source=str(path))


# -- hypothesis scan ----------------------------------------------------------


@dataclass
class HypothesisReport:
    family: str
    m: int
    n_max: int
    c_candidate: float
    c1_candidate: float
    monotone: bool
    first_violation: int | None
    gamma: float
    ratio_at_n_max: float
    ratio_deviation: float
    r_star: float | None = None
    critical_density: float | None = None
    notes: list = field(default_factory=list)

    def to_text(self):
        lines = [
            f"family: {self.family}",
            f"m: {self.m}",
            f"n_max: {self.n_max}",
            f"gamma: {self.gamma!r}",
            f"C_candidate: {self.c_candidate!r}",
            f"C1_candidate: {self.c1_candidate!r}",
            f"crit_weight_nonincreasing: {str(self.monotone).lower()}",
            f"first_monotonicity_violation: {self.first_violation}",
            f"ratio_f(n)/f(n+1)_at_n_max: {self.ratio_at_n_max!r}",
            f"ratio_deviation_from_gamma: {self.ratio_deviation!r}",
            f"R_star_unnormalized: {self.r_star!r}",
            f"critical_density: {self.critical_density!r}",
        ]
        lines += [f"note: {note}" for note in self.notes]
        return "\n".join(lines) + "\n"


def _sparse_table(values, op):
    levels = [values]
    span = 1
    while 2 * span <= len(values):
        prev = levels[-1]
        levels.append(op(prev[:-span], prev[span:]))
        span *= 2
    return levels


def _range_query(levels, op, lo, hi):
    length = hi - lo + 1
    j = np.floor(np.log2(length)).astype(int)
    out = np.empty(len(lo))
    for level in np.unique(j):
        sel = j == level
        table = levels[level]
        out[sel] = op(table[lo[sel]], table[hi[sel] - (1 << level) + 1])
    return out


def _check_hypotheses(w, m, n_max):
    notes = []
    if m < 1:
        raise ValueError("m must be >= 1")
    n_max = max(int(n_max), m)
    if isinstance(w, Tabulated) and n_max >= len(w):
        notes.append(f"n_max clipped from {n_max} to table length - 2 = {len(w) - 2}")
        n_max = len(w) - 2
    logc = w.log_crit_array(n_max + 1)
    head = logc[: n_max + 1]
    ns = np.arange(1, n_max + 1)
    lo = -(-ns // m)  # ceil(n / m)

    c_candidate = float(np.exp(np.max(head[lo] - head[ns])))

    mx = _sparse_table(head, np.maximum)
    mn = _sparse_table(head, np.minimum)
    spread = _range_query(mx, np.maximum, lo, ns) - _range_query(mn, np.minimum, lo, ns)
    c1_candidate = float(np.exp(np.max(spread)))

    steps = np.diff(head)
    bad = np.nonzero(steps > 1e-12 * np.maximum(1.0, np.abs(head[:-1])))[0]
    monotone = len(bad) == 0
    first_violation = int(bad[0] + 1) if len(bad) else None

    log_f = w.log_f_array(n_max + 1)
    ratio = float(np.exp(log_f[n_max] - log_f[n_max + 1]))

    r_star = rho_c = None
    try:
        r_star = w.first_moment_at_gamma()
        rho_c = w.critical_density()
    except (DivergenceError, TailCertificationError) as exc:
        notes.append(f"critical moments unavailable: {exc}")
    return HypothesisReport(
        family=w.spec(),
        m=m,
        n_max=n_max,
        c_candidate=c_candidate,
        c1_candidate=c1_candidate,
        monotone=monotone,
        first_violation=first_violation,
        gamma=float(w.gamma),
        ratio_at_n_max=ratio,
        ratio_deviation=ratio - w.gamma,
        r_star=r_star,
        critical_density=rho_c,
        notes=notes,
    )
