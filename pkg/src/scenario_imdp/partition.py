"""Uniform rectangular partitions of a bounded state-space region.

Regions are numbered ``0 .. n_regions - 1`` in C (row-major) order over the
grid; every point outside the bounded region maps to ``absorbing``
(``== n_regions``). Cells are half-open ``[lo, hi)`` along each axis, except
that the upper face of the whole domain belongs to the last cell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

ALIGN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex polytope ``{x | M x <= b}`` with an interior anchor ``center``."""

    M: np.ndarray
    b: np.ndarray
    center: np.ndarray | None = None
    vertices: np.ndarray | None = None

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.M.T <= self.b + tol, axis=-1)

    def scaled(self, lam: float) -> Polytope:
        return scaled_polytope(self, lam)


def box_polytope(lower, upper) -> Polytope:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = lower.size
    M = np.vstack([np.eye(n), -np.eye(n)])
    b = np.concatenate([upper, -lower])
    corners = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float)
    vertices = lower + corners * (upper - lower)
    return Polytope(M=M, b=b, center=(lower + upper) / 2, vertices=vertices)


def scaled_polytope(poly: Polytope, lam: float) -> Polytope:
    """Scale ``poly`` by ``lam`` about its anchor point.

    Returns ``{x | M x <= lam (b - M h) + M h}``, so ``lam = 1`` gives the
    polytope back, ``lam = 0`` collapses it onto ``h`` and the family is
    nested in ``lam``.
    """
    if lam < 0:
        raise ValueError("scale factor must be nonnegative")
    if poly.center is None:
        raise ValueError("polytope has no anchor point to scale about")
    Mh = poly.M @ poly.center
    b = lam * (poly.b - Mh) + Mh
    vertices = None
    if poly.vertices is not None:
        vertices = poly.center + lam * (poly.vertices - poly.center)
    return Polytope(M=poly.M, b=b, center=poly.center, vertices=vertices)


class Partition:
    """Uniform grid of ``prod(counts)`` axis-aligned cells.

    Parameters
    ----------
    lower : array-like of shape (n,)
        Lower corner of the bounded domain.
    widths : array-like of shape (n,)
        Cell width per dimension.
    counts : array-like of shape (n,)
        Number of cells per dimension.
    """

    def __init__(self, lower, widths, counts):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.widths = np.asarray(widths, dtype=float).reshape(-1)
        self.counts = np.asarray(counts, dtype=int).reshape(-1)
        if not (self.lower.shape == self.widths.shape == self.counts.shape):
            raise ValueError("lower, widths and counts must have equal length")
        if np.any(self.widths <= 0):
            raise ValueError("cell widths must be strictly positive")
        if np.any(self.counts < 1):
            raise ValueError("cell counts must be at least 1")
        for arr in (self.lower, self.widths, self.counts):
            arr.setflags(write=False)

    @classmethod
    def centered(cls, center, widths, counts):
        center = np.asarray(center, dtype=float)
        widths = np.asarray(widths, dtype=float)
        counts = np.asarray(counts, dtype=int)
        return cls(center - widths * counts / 2, widths, counts)

    def __repr__(self):
        return (f"Partition(lower={self.lower.tolist()}, widths={self.widths.tolist()}, "
                f"counts={self.counts.tolist()})")

    def __eq__(self, other):
        return (isinstance(other, Partition) and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.widths, other.widths)
                and np.array_equal(self.counts, other.counts))

    __hash__ = None

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def n_regions(self) -> int:
        return int(np.prod(self.counts))

    @property
    def absorbing(self) -> int:
        return self.n_regions

    @property
    def upper(self) -> np.ndarray:
        return self.grid_line(self.counts)

    def grid_line(self, k):
        """Coordinate of grid line ``k`` (integer array, per dimension)."""
        return self.lower + np.asarray(k) * self.widths

    def cell_multi_index(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-dimension cell index of each point, and an inside-domain mask."""
        x = np.asarray(x, dtype=float)
        k = np.floor((x - self.lower) / self.widths).astype(np.int64)
        # align with the grid lines used to build the cell polytopes
        k -= x < self.grid_line(k)
        k += x >= self.grid_line(k + 1)
        top = self.counts - 1
        on_upper_face = (k == self.counts) & (x == self.upper)
        k = np.where(on_upper_face, top, k)
        inside = np.all((k >= 0) & (k <= top), axis=-1)
        return k, inside

    def region_index(self, x):
        """Map points to region indices; ``absorbing`` outside the domain."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError("points must be finite")
        k, inside = self.cell_multi_index(x)
        flat = np.ravel_multi_index(tuple(np.moveaxis(np.where(inside[..., None], k, 0), -1, 0)),
                                    tuple(self.counts))
        out = np.where(inside, flat, self.absorbing)
        return int(out) if out.ndim == 0 else out

    def multi_index(self, i):
        return np.stack(np.unravel_index(np.asarray(i), tuple(self.counts)), axis=-1)

    def region_bounds(self, i=None):
        """Lower and upper corners of the given regions (all if ``i`` is None)."""
        if i is None:
            i = np.arange(self.n_regions)
        k = self.multi_index(i)
        return self.grid_line(k), self.grid_line(k + 1)

    def centers(self, i=None):
        lo, hi = self.region_bounds(i)
        return (lo + hi) / 2

    def region_polytope(self, i) -> Polytope:
        i = int(i)
        if not 0 <= i < self.n_regions:
            raise IndexError(f"region {i} has no polytope (absorbing index is {self.absorbing})")
        lo, hi = self.region_bounds(i)
        return box_polytope(lo, hi)

    def regions_in_box(self, lower, upper):
        """Indices of the regions that make up ``box ∩ domain``.

        Raises
        ------
        ValueError
            If the box does not align with grid lines.
        """
        lower = np.maximum(np.asarray(lower, dtype=float), self.lower)
        upper = np.minimum(np.asarray(upper, dtype=float), self.upper)
        if np.any(upper <= lower):
            return np.array([], dtype=int)
        k_lo = (lower - self.lower) / self.widths
        k_hi = (upper - self.lower) / self.widths
        for k in (k_lo, k_hi):
            if np.any(np.abs(k - np.round(k)) > ALIGN_RTOL * np.maximum(1.0, np.abs(k))):
                raise ValueError(f"box [{lower}, {upper}] is not aligned with the partition grid")
        k_lo = np.round(k_lo).astype(int)
        k_hi = np.round(k_hi).astype(int)
        ranges = [np.arange(a, b) for a, b in zip(k_lo, k_hi)]
        grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, self.n)
        return np.sort(np.ravel_multi_index(tuple(grid.T), tuple(self.counts)))

    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))
