"""PAC probability intervals from noise samples.

Given ``N`` i.i.d. noise samples, ``n_out`` of which push the successor state
outside a region, the interval ``[lower, upper]`` contains the true
probability of landing in that region with confidence at least ``1 - beta``.
The bounds are roots of binomial tail equations

    beta / 2N = sum_{i=0}^{n_out}     C(N, i) (1 - lower)^i lower^(N - i)
    beta / 2N = 1 - sum_{i=0}^{n_out-1} C(N, i) (1 - upper)^i upper^(N - i)

Both sums are regularized incomplete beta functions, which we invert by
bisection.
"""

from __future__ import annotations

import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .partition import Partition, Polytope

logger = logging.getLogger(__name__)

BISECT_ITERS = 64
BOUNDARY_TOL = 1e-9


def _check_args(N, beta, n_out):
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    n_out = np.asarray(n_out)
    if np.any(n_out < 0) or np.any(n_out > N) or np.any(n_out != np.round(n_out)):
        raise ValueError(f"n_out must be an integer in [0, {N}]")


def _bisect_increasing(f, size, iters=BISECT_ITERS):
    """Vectorized bisection for the root of increasing ``f`` on [0, 1]."""
    lo = np.zeros(size)
    hi = np.ones(size)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = f(mid) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def lower_bounds(N: int, beta: float, n_out) -> np.ndarray:
    """Lower PAC bound for each entry of ``n_out`` (0 where ``n_out == N``)."""
    _check_args(N, beta, n_out)
    k = np.atleast_1d(np.asarray(n_out, dtype=float))
    c = beta / (2 * N)
    out = np.zeros(k.shape)
    m = k < N
    if np.any(m):
        a, b = N - k[m], k[m] + 1
        # sum_{i<=k} C(N,i)(1-p)^i p^(N-i) == I_p(N-k, k+1), increasing in p
        out[m] = _bisect_increasing(lambda p: betainc(a, b, p) - c, a.size)
    return out


def upper_bounds(N: int, beta: float, n_out) -> np.ndarray:
    """Upper PAC bound for each entry of ``n_out`` (1 where ``n_out == 0``)."""
    _check_args(N, beta, n_out)
    k = np.atleast_1d(np.asarray(n_out, dtype=float))
    c = beta / (2 * N)
    out = np.ones(k.shape)
    m = k > 0
    if np.any(m):
        a, b = k[m], N - k[m] + 1
        # 1 - sum_{i<k} C(N,i)(1-p)^i p^(N-i) == I_{1-p}(k, N-k+1); solve for e = 1 - p
        out[m] = 1.0 - _bisect_increasing(lambda e: betainc(a, b, e) - c, a.size)
    return out


def solve_lower_bound(N: int, beta: float, n_out: int) -> float:
    return float(lower_bounds(N, beta, n_out)[0])


def solve_upper_bound(N: int, beta: float, n_out: int) -> float:
    return float(upper_bounds(N, beta, n_out)[0])


@dataclass(frozen=True, eq=False)
class IntervalTable:
    """PAC intervals for every ``n_out`` in ``0..N`` at fixed ``N`` and ``beta``."""

    N: int
    beta: float
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, N: int, beta: float) -> IntervalTable:
        k = np.arange(N + 1)
        lower = lower_bounds(N, beta, k)
        upper = upper_bounds(N, beta, k)
        lower.setflags(write=False)
        upper.setflags(write=False)
        return cls(N=int(N), beta=float(beta), lower=lower, upper=upper)

    def interval(self, n_out):
        return self.lower[n_out], self.upper[n_out]

    def header(self) -> str:
        return json.dumps({"format": "scenario-imdp interval table", "version": 1,
                           "N": self.N, "beta": self.beta,
                           "columns": ["n_out", "lower", "upper"]})

    def save(self, path) -> None:
        """Write a binary table with a JSON text header embedded."""
        np.savez(Path(path), header=np.array(self.header()), lower=self.lower, upper=self.upper)

    @classmethod
    def load(cls, path) -> IntervalTable:
        with np.load(Path(path)) as data:
            meta = json.loads(str(data["header"]))
            return cls(N=int(meta["N"]), beta=float(meta["beta"]),
                       lower=data["lower"].copy(), upper=data["upper"].copy())

    def to_csv(self, path) -> None:
        k = np.arange(self.N + 1)
        np.savetxt(Path(path), np.column_stack([k, self.lower, self.upper]), delimiter=",",
                   header=f"N={self.N} beta={self.beta}\nn_out,lower,upper",
                   fmt=["%d", "%.12f", "%.12f"])


@functools.lru_cache(maxsize=64)
def interval_table(N: int, beta: float) -> IntervalTable:
    """Cached :class:`IntervalTable` for ``(N, beta)``."""
    logger.debug("building interval table N=%d beta=%g", N, beta)
    return IntervalTable.build(int(N), float(beta))


@dataclass(frozen=True, eq=False)
class SampleCounts:
    """Per-action successor counts in compressed sparse row layout.

    Row ``j`` spans ``indptr[j]:indptr[j+1]`` of ``successors`` and
    ``counts``; successors ascend and the absorbing index, when present,
    comes last.
    """

    N: int
    indptr: np.ndarray
    successors: np.ndarray
    counts: np.ndarray
    absorbing: int

    @property
    def n_actions(self) -> int:
        return self.indptr.size - 1

    def row(self, j):
        s = slice(self.indptr[j], self.indptr[j + 1])
        return self.successors[s], self.counts[s]

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)


def _to_csr(N, rows, absorbing):
    sizes = [r[0].size for r in rows]
    indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    succ = np.concatenate([r[0] for r in rows]).astype(np.int64) if rows else np.zeros(0, np.int64)
    cnt = np.concatenate([r[1] for r in rows]).astype(np.int64) if rows else np.zeros(0, np.int64)
    return SampleCounts(N=N, indptr=indptr, successors=succ, counts=cnt, absorbing=absorbing)


def count_samples_direct(part: Partition, targets, samples) -> SampleCounts:
    """Count successor regions of ``d_j + w`` by locating every point."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("no noise samples given")
    rows = []
    for d in targets:
        idx = part.region_index(d + samples)
        succ, cnt = np.unique(idx, return_counts=True)
        rows.append((succ, cnt))
    return _to_csr(samples.shape[0], rows, part.absorbing)


def count_samples(part: Partition, targets, samples, chunk=2048) -> SampleCounts:
    """Count, for every action, how many samples land in each region.

    The noiseless successor of action ``j`` is ``d_j`` from every source
    state, so one row per action is shared by all states enabling it. When
    the targets are the cell centers, ``d_j + w`` lands in cell
    ``k_j + delta(w)`` with an offset ``delta`` independent of ``j``, which
    lets us bin the samples once.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("no noise samples given")
    if samples.shape[1] != part.n:
        raise ValueError(f"samples have dimension {samples.shape[1]}, expected {part.n}")
    if targets.shape[0] != part.n_regions or not np.array_equal(targets, part.centers()):
        return count_samples_direct(part, targets, samples)

    # samples within rounding distance of a cell face are located exactly
    t = samples / part.widths + 0.5
    frac = t - np.floor(t)
    risky = np.any((frac < BOUNDARY_TOL) | (frac > 1 - BOUNDARY_TOL), axis=1)
    safe = samples[~risky]
    edge = samples[risky]

    delta = np.floor(safe / part.widths + 0.5).astype(np.int64)
    offsets, mult = np.unique(delta.reshape(-1, part.n), axis=0, return_counts=True)
    k_targets = part.multi_index(np.arange(part.n_regions))
    counts_dim = part.counts
    rows = []
    for start in range(0, part.n_regions, chunk):
        k = k_targets[start:start + chunk, None, :] + offsets[None, :, :]
        inside = np.all((k >= 0) & (k < counts_dim), axis=-1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(np.where(inside[..., None], k, 0), -1, 0)),
                                    tuple(counts_dim))
        for r in range(k.shape[0]):
            m = inside[r]
            succ = flat[r, m]
            cnt = mult[m]
            if edge.shape[0]:
                idx = part.region_index(targets[start + r] + edge)
                succ = np.concatenate([succ, idx])
                cnt = np.concatenate([cnt, np.ones(idx.size, dtype=np.int64)])
                succ, inv = np.unique(succ, return_inverse=True)
                cnt = np.bincount(inv.reshape(-1), weights=cnt).astype(np.int64)
                keep = succ != part.absorbing
                succ, cnt = succ[keep], cnt[keep]
            n_abs = samples.shape[0] - cnt.sum()
            if n_abs:
                succ = np.append(succ, part.absorbing)
                cnt = np.append(cnt, n_abs)
            rows.append((succ, cnt))
    return _to_csr(samples.shape[0], rows, part.absorbing)


def frequentist_row(counts: SampleCounts, j: int) -> dict[int, float]:
    """Point estimates ``N_in / N`` for the successors of action ``j``."""
    succ, cnt = counts.row(j)
    return {int(s): c / counts.N for s, c in zip(succ, cnt)}


def scaling_factors(poly: Polytope, points) -> np.ndarray:
    """Smallest scale at which each point lies inside ``poly`` scaled about its anchor."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    Mh = poly.M @ poly.center
    slack = poly.b - Mh
    if np.any(slack <= 0):
        raise ValueError("anchor point must lie in the interior of the polytope")
    lam = (points @ poly.M.T - Mh) / slack
    return np.maximum(lam.max(axis=1), 0.0)


def scenario_program_oracle(poly: Polytope, points, n_discard: int) -> float:
    """Optimal scale of the scenario program after discarding ``n_discard`` samples.

    Solves ``min lam s.t. x_i in poly(lam)`` over the retained samples,
    removing the (unique) active sample one at a time. Meant for testing the
    counting shortcut, not for production use.
    """
    lam = list(scaling_factors(poly, points))
    if n_discard >= len(lam):
        raise ValueError("cannot discard all samples")
    for _ in range(n_discard):
        lam.pop(int(np.argmax(lam)))
    return float(max(lam))
