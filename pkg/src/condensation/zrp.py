"""Zero-range process on m sites, simulated event by event.

A site holding k particles emits one at rate g(k) = f(k-1)/f(k); the particle
lands on y with probability p(x, y). With a symmetric kernel the canonical
measure on n particles is the stationary law.

Randomness comes from a Philox generator keyed by ``(seed, replica)``. Each
attempted event consumes exactly three uniforms (holding time, departure
site, destination), so a run is reproducible from its seed regardless of how
the uniforms are blocked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np
from numba import njit

from .combinatorics import cut, enumerate_ordered, enumerate_sigma, order
from .ensemble import Pmf, tv_distance
from .mcstats import DEFAULT_BATCHES, batch_means

__all__ = [
    "JumpKernel",
    "ZrpState",
    "StationaryEstimate",
    "Trajectory",
    "make_rng",
    "rate_g",
    "rate_table",
    "step",
    "estimate_stationary",
    "pool_estimates",
    "condensate_trajectory",
]

_BLOCK = 3 * (1 << 18)
_STATE_LIMIT = 2_000_000
_FLUX_STATE_LIMIT = 2000

_DONE, _NEED_UNIFORMS, _NEED_TRACE = 0, 1, 2


def make_rng(seed, replica=0):
    """Counter-based generator for stream ``replica`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


@dataclass(frozen=True)
class JumpKernel:
    """Symmetric, irreducible transition matrix with zero diagonal."""

    p: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 2:
            raise ValueError("kernel must be a square matrix on at least two sites")
        if np.any(p < 0):
            raise ValueError("kernel entries must be nonnegative")
        if np.any(np.diag(p) != 0):
            raise ValueError("kernel must have zero diagonal")
        if not np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12):
            raise ValueError("kernel rows must sum to 1")
        if not np.allclose(p, p.T, rtol=0, atol=1e-12):
            raise ValueError("kernel must be symmetric")
        if not _connected(p > 0):
            raise ValueError("kernel must be irreducible")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def m(self):
        return self.p.shape[0]

    @classmethod
    def ring(cls, m):
        """Nearest-neighbour walk on a ring; p(x, x +- 1) = 1/2."""
        p = np.zeros((m, m))
        for x in range(m):
            p[x, (x + 1) % m] += 0.5
            p[x, (x - 1) % m] += 0.5
        return cls(p, "ring")

    @classmethod
    def complete(cls, m):
        p = (np.ones((m, m)) - np.eye(m)) / (m - 1)
        return cls(p, "complete")

    @classmethod
    def named(cls, name, m):
        if name == "ring":
            return cls.ring(m)
        if name == "complete":
            return cls.complete(m)
        raise ValueError(f"unknown kernel {name!r}")

    def cumulative(self):
        cum = np.cumsum(self.p, axis=1)
        cum[:, -1] = np.inf  # absorbs rounding in the last bucket
        return cum


def _connected(adj):
    seen = {0}
    frontier = [0]
    while frontier:
        x = frontier.pop()
        for y in np.nonzero(adj[x])[0]:
            if y not in seen:
                seen.add(int(y))
                frontier.append(int(y))
    return len(seen) == len(adj)


def rate_g(w, k):
    """Emission rate of a site with k >= 1 particles: f(k-1) / f(k)."""
    k = int(k)
    if k < 1:
        raise ValueError("an empty site emits no particles")
    return math.exp(w.eval_log_f(k - 1) - w.eval_log_f(k))


def rate_table(w, n):
    """``g[k]`` for k = 0..n with ``g[0] = 0``."""
    lf = w.log_f_array(n)
    g = np.zeros(n + 1)
    g[1:] = np.exp(lf[:-1] - lf[1:])
    return g


@dataclass(frozen=True)
class ZrpState:
    occupancies: tuple
    time: float
    seed: int
    replica: int = 0
    rng: np.random.Generator = field(default=None, compare=False, repr=False)

    @classmethod
    def initial(cls, n, m, seed, replica=0, init="condensed"):
        rng = make_rng(seed, replica)
        occ = _initial_occupancies(n, m, init, rng)
        return cls(tuple(int(v) for v in occ), 0.0, seed, replica, rng)

    @property
    def m(self):
        return len(self.occupancies)

    @property
    def n(self):
        return sum(self.occupancies)


def _initial_occupancies(n, m, init, rng):
    if isinstance(init, str):
        if init == "condensed":
            occ = np.zeros(m, dtype=np.int64)
            occ[0] = n
            return occ
        if init == "uniform":
            return rng.multinomial(n, np.full(m, 1.0 / m)).astype(np.int64)
        raise ValueError(f"unknown initial condition {init!r}")
    occ = np.asarray(init, dtype=np.int64)
    if occ.shape != (m,) or occ.sum() != n or np.any(occ < 0):
        raise ValueError("initial occupancies must be m nonnegative ints summing to n")
    return occ.copy()


def step(state, w, kernel):
    """Advance by one event; the state's generator is advanced in place."""
    occ = np.array(state.occupancies, dtype=np.int64)
    if kernel.m != len(occ):
        raise ValueError("kernel size does not match the configuration")
    g = np.array([rate_g(w, k) if k > 0 else 0.0 for k in occ])
    lam = g.sum()
    if lam == 0:
        raise ValueError("no particles: no event can occur")
    u0, u1, u2 = state.rng.random(3)
    dt = -math.log1p(-u0) / lam
    x = _pick(np.cumsum(g), u1 * lam)
    y = _pick(kernel.cumulative()[x], u2)
    occ[x] -= 1
    occ[y] += 1
    return replace(state, occupancies=tuple(int(v) for v in occ), time=state.time + dt)


def _pick(cum, target):
    idx = int(np.searchsorted(cum, target, side="right"))
    return min(idx, len(cum) - 1)


# -- compiled event loop -------------------------------------------------------


def _rank_table(m, n):
    """``pre[k, r, v]``: compositions of r into k parts whose first part is < v."""
    pre = np.zeros((m + 1, n + 1, n + 2), dtype=np.int64)
    for k in range(2, m + 1):
        for r in range(n + 1):
            acc = 0
            for v in range(r + 1):
                pre[k, r, v] = acc
                acc += comb(r - v + k - 2, k - 2)
            pre[k, r, r + 1] = acc
    return pre


@njit(cache=True)
def _rank(occ, pre):
    m = occ.shape[0]
    r = 0
    for i in range(m):
        r += occ[i]
    out = 0
    for i in range(m - 1):
        out += pre[m - i, r, occ[i]]
        r -= occ[i]
    return out


@njit(cache=True)
def _accumulate(a, b, t_burn, batch_len, n_batches, hist, max_time, state_rank, max_occ, track_hist):
    if a < t_burn:
        a = t_burn
    while a < b:
        i = int((a - t_burn) / batch_len)
        if i >= n_batches:
            i = n_batches - 1
        edge = t_burn + (i + 1) * batch_len
        seg = b if (i == n_batches - 1 or b < edge) else edge
        if seg > a:
            if track_hist:
                hist[i, state_rank] += seg - a
            max_time[i] += (seg - a) * max_occ
        a = seg if seg > a else b


@njit(cache=True, nogil=True)
def _run(occ, g, cum_p, u, pos, t, t_end, t_burn, batch_len, n_batches,
         pre, hist, max_time, track_hist, flux, track_flux,
         stride, trace_t, trace_occ, trace_count, events):
    m = occ.shape[0]
    state_rank = _rank(occ, pre) if (track_hist or track_flux) else 0
    while True:
        if stride > 0 and trace_count >= trace_t.shape[0]:
            return _NEED_TRACE, pos, t, events, trace_count
        lam = 0.0
        max_occ = 0
        for i in range(m):
            lam += g[occ[i]]
            if occ[i] > max_occ:
                max_occ = occ[i]
        if lam == 0.0:
            _accumulate(t, t_end, t_burn, batch_len, n_batches, hist, max_time,
                        state_rank, max_occ, track_hist)
            return _DONE, pos, t_end, events, trace_count
        if pos + 3 > u.shape[0]:
            return _NEED_UNIFORMS, pos, t, events, trace_count
        dt = -np.log1p(-u[pos]) / lam
        target = u[pos + 1] * lam
        u2 = u[pos + 2]
        pos += 3
        if t + dt >= t_end:
            _accumulate(t, t_end, t_burn, batch_len, n_batches, hist, max_time,
                        state_rank, max_occ, track_hist)
            return _DONE, pos, t_end, events, trace_count
        _accumulate(t, t + dt, t_burn, batch_len, n_batches, hist, max_time,
                    state_rank, max_occ, track_hist)
        t += dt
        x = -1
        acc = 0.0
        for i in range(m):
            if occ[i] > 0:
                acc += g[occ[i]]
                x = i
                if target < acc:
                    break
        y = m - 1
        for j in range(m):
            if u2 < cum_p[x, j]:
                y = j
                break
        occ[x] -= 1
        occ[y] += 1
        events += 1
        if track_hist or track_flux:
            new_rank = _rank(occ, pre)
            if track_flux:
                flux[state_rank, new_rank] += 1
            state_rank = new_rank
        if stride > 0 and events % stride == 0:
            trace_t[trace_count] = t
            for i in range(m):
                trace_occ[trace_count, i] = occ[i]
            trace_count += 1


def _simulate(w, kernel, n, t_total, t_burn, seed, replica, n_batches, init,
              track_hist, track_flux, stride, trace_block=1 << 16):
    m = kernel.m
    if t_total < 0 or not 0 <= t_burn <= t_total:
        raise ValueError("need 0 <= t_burn <= t_total")
    if n_batches < 2:
        raise ValueError("need at least two batches")
    rng = make_rng(seed, replica)
    occ = _initial_occupancies(n, m, init, rng)
    n_states = comb(n + m - 1, m - 1)
    if track_hist and n_states * n_batches > _STATE_LIMIT * DEFAULT_BATCHES:
        raise ValueError(f"{n_states} states is too many to histogram")
    if track_flux and n_states > _FLUX_STATE_LIMIT:
        raise ValueError(f"{n_states} states is too many for a flux matrix")
    pre = _rank_table(m, n) if (track_hist or track_flux) else np.zeros((1, 1, 1), np.int64)
    hist = np.zeros((n_batches, n_states if track_hist else 1))
    flux = np.zeros((n_states, n_states) if track_flux else (1, 1), dtype=np.int64)
    max_time = np.zeros(n_batches)
    batch_len = (t_total - t_burn) / n_batches if t_total > t_burn else 1.0
    g = rate_table(w, n)
    cum_p = kernel.cumulative()

    trace_t = [np.array([0.0])]
    trace_occ = [occ[None, :].copy()]
    buf_t = np.zeros(trace_block if stride > 0 else 0)
    buf_occ = np.zeros((len(buf_t), m), dtype=np.int64)

    u = np.zeros(0)
    pos, t, events, count = 0, 0.0, 0, 0
    while True:
        status, pos, t, events, count = _run(
            occ, g, cum_p, u, pos, t, t_total, t_burn, batch_len, n_batches,
            pre, hist, max_time, track_hist, flux, track_flux,
            stride, buf_t, buf_occ, count, events,
        )
        if status == _NEED_UNIFORMS:
            u = rng.random(_BLOCK)
            pos = 0
        elif status == _NEED_TRACE:
            trace_t.append(buf_t[:count].copy())
            trace_occ.append(buf_occ[:count].copy())
            count = 0
        else:
            break
    if stride > 0:
        trace_t.append(buf_t[:count].copy())
        trace_occ.append(buf_occ[:count].copy())
    return {
        "occ": occ,
        "events": events,
        "hist": hist,
        "max_time": max_time,
        "batch_len": batch_len,
        "flux": flux if track_flux else None,
        "trace_t": np.concatenate(trace_t),
        "trace_occ": np.concatenate(trace_occ),
    }


# -- stationary estimates ------------------------------------------------------


@dataclass
class StationaryEstimate:
    """Time-weighted occupation of each configuration, split into equal time batches."""

    m: int
    n: int
    t_total: float
    t_burn: float
    events: int
    configs: list
    batch_occupation: np.ndarray  # (batches, states), fraction of batch time
    batch_max_fraction: np.ndarray  # (batches,), time average of max site / n
    flux: np.ndarray | None = None

    @property
    def n_batches(self):
        return self.batch_occupation.shape[0]

    def occupation(self):
        return batch_means(self.batch_occupation)

    def pmf(self):
        mean, _ = self.occupation()
        return Pmf(list(self.configs), mean, dim=self.m, m=self.m, n=self.n)

    def _cut_index(self):
        support = list(enumerate_ordered(self.m - 1, self.n))
        where = {eta: i for i, eta in enumerate(support)}
        idx = np.array([where[cut(order(xi))] for xi in self.configs], dtype=np.int64)
        return support, idx

    def ordered_cut(self):
        """``(support, mean, se)`` of the cut-and-ordered law, per batch-means."""
        support, idx = self._cut_index()
        batches = np.zeros((self.n_batches, len(support)))
        np.add.at(batches.T, idx, self.batch_occupation.T)
        mean, se = batch_means(batches)
        return support, mean, se

    def ordered_cut_pmf(self):
        support, mean, _ = self.ordered_cut()
        return Pmf(support, mean, dim=self.m - 1, m=self.m, n=self.n, cap=self.n)

    def tv_to(self, exact):
        """TV to an exact Pmf of the cut law, with the l1-propagated batch-means error."""
        support, mean, se = self.ordered_cut()
        emp = Pmf(support, mean, dim=self.m - 1, m=self.m, n=self.n)
        return tv_distance(emp, exact), 0.5 * float(np.sum(se))

    def max_site_fraction(self):
        mean, se = batch_means(self.batch_max_fraction)
        return float(mean), float(se)

    def background_density(self):
        """Batch-means estimate of (n - max site) / (m - 1)."""
        vals = (1.0 - self.batch_max_fraction) * self.n / (self.m - 1)
        mean, se = batch_means(vals)
        return float(mean), float(se)


def estimate_stationary(w, kernel, n, t_total, t_burn=None, seed=0, replica=0,
                        n_batches=DEFAULT_BATCHES, init="condensed", track_flux=False):
    """Occupation measure of a run over (t_burn, t_total]; t_burn defaults to 0.1 t_total."""
    if t_total <= 0:
        raise ValueError("t_total must be positive")
    t_burn = 0.1 * t_total if t_burn is None else t_burn
    if not 0 <= t_burn < t_total:
        raise ValueError("need 0 <= t_burn < t_total")
    out = _simulate(w, kernel, n, t_total, t_burn, seed, replica, n_batches, init,
                    track_hist=True, track_flux=track_flux, stride=0)
    occupation = out["hist"] / out["batch_len"]
    if n > 0:
        frac = out["max_time"] / out["batch_len"] / n
    else:
        frac = np.ones(n_batches)
    return StationaryEstimate(
        m=kernel.m,
        n=n,
        t_total=t_total,
        t_burn=t_burn,
        events=out["events"],
        configs=list(enumerate_sigma(kernel.m, n)),
        batch_occupation=occupation,
        batch_max_fraction=frac,
        flux=out["flux"],
    )


def pool_estimates(estimates):
    """Concatenate the batches of independent replicas with equal batch lengths."""
    first = estimates[0]
    for est in estimates[1:]:
        if (est.m, est.n, est.t_total, est.t_burn) != (first.m, first.n, first.t_total, first.t_burn):
            raise ValueError("replicas must share m, n, t_total and t_burn")
    flux = None
    if all(e.flux is not None for e in estimates):
        flux = sum(e.flux for e in estimates)
    return StationaryEstimate(
        m=first.m,
        n=first.n,
        t_total=first.t_total,
        t_burn=first.t_burn,
        events=sum(e.events for e in estimates),
        configs=first.configs,
        batch_occupation=np.concatenate([e.batch_occupation for e in estimates]),
        batch_max_fraction=np.concatenate([e.batch_max_fraction for e in estimates]),
        flux=flux,
    )


@dataclass
class Trajectory:
    times: np.ndarray
    occupancies: np.ndarray  # (samples, m)
    t_total: float
    events: int

    @property
    def max_occ(self):
        return self.occupancies.max(axis=1)

    @property
    def argmax_site(self):
        """1-based index of the fullest site; ties go to the lowest index."""
        return self.occupancies.argmax(axis=1) + 1

    def max_fraction(self):
        n = self.occupancies[0].sum()
        return self.max_occ / n if n else np.ones(len(self.times))

    def time_average_max_fraction(self, t_from=0.0):
        """Time average over [t_from, t_total], holding each sample until the next."""
        edges = np.append(self.times, self.t_total)
        lo = np.clip(edges[:-1], t_from, None)
        hi = np.clip(edges[1:], t_from, None)
        dur = hi - lo
        if dur.sum() <= 0:
            return float(self.max_fraction()[-1])
        return float(np.dot(dur, self.max_fraction()) / dur.sum())


def condensate_trajectory(w, kernel, n, t_total, seed=0, replica=0, stride=1, init="condensed"):
    """Record the configuration at t = 0 and after every ``stride``-th event."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = _simulate(w, kernel, n, t_total, 0.0, seed, replica, 2, init,
                    track_hist=False, track_flux=False, stride=stride)
    return Trajectory(out["trace_t"], out["trace_occ"], t_total, out["events"])
