"""Discrete-time linear systems with additive process noise.

The state evolves as ``x' = A x + B u + q + w`` with ``u`` confined to an
axis-aligned box and ``w`` drawn from an unknown distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Linear system ``x' = A x + B u + q + w`` with box-bounded inputs.

    Parameters
    ----------
    A : array-like of shape (n, n)
    B : array-like of shape (n, p)
    q : array-like of shape (n,)
        Constant deterministic drift.
    u_min, u_max : array-like of shape (p,)
        Lower and upper corner of the input box.
    steps_per_action : int
        Number of concrete time steps covered by one step of this model.
    base : LinearSystem or None
        The concrete one-step system when this model is a grouped version.
    """

    A: np.ndarray
    B: np.ndarray
    q: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    steps_per_action: int = 1
    base: LinearSystem | None = field(default=None, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n = A.shape[0]
        q = np.zeros(n) if self.q is None else np.asarray(self.q, dtype=float).reshape(-1)
        u_min = np.asarray(self.u_min, dtype=float).reshape(-1)
        u_max = np.asarray(self.u_max, dtype=float).reshape(-1)

        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got shape {B.shape}")
        if q.shape != (n,):
            raise ValueError(f"q must have length {n}, got {q.shape}")
        if u_min.shape != (B.shape[1],) or u_max.shape != (B.shape[1],):
            raise ValueError("input bounds must have one entry per column of B")
        if np.any(u_min > u_max):
            raise ValueError("input box is empty: u_min > u_max")
        for name, arr in (("A", A), ("B", B), ("q", q), ("u_min", u_min), ("u_max", u_max)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if int(self.steps_per_action) < 1:
            raise ValueError("steps_per_action must be a positive integer")

        for name, arr in (("A", A), ("B", B), ("q", q), ("u_min", u_min), ("u_max", u_max)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "steps_per_action", int(self.steps_per_action))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def B_pinv(self) -> np.ndarray:
        # cached on first use; the dataclass is frozen
        try:
            return self.__dict__["_B_pinv"]
        except KeyError:
            pinv = np.linalg.pinv(self.B)
            pinv.setflags(write=False)
            object.__setattr__(self, "_B_pinv", pinv)
            return pinv

    def step(self, x, u, w=None):
        """Advance one step. ``x`` may be a batch of shape (m, n)."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        x_next = x @ self.A.T + u @ self.B.T + self.q
        if w is not None:
            x_next = x_next + w
        return x_next


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; infinite bounds are allowed and mean unbounded."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray([-np.inf if v is None else v for v in np.atleast_1d(self.lower)], dtype=float)
        hi = np.asarray([np.inf if v is None else v for v in np.atleast_1d(self.upper)], dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)


@dataclass(frozen=True)
class ReachAvoidSpec:
    """Reach ``goal`` within ``horizon`` steps while avoiding ``critical``."""

    goal: tuple[Box, ...]
    critical: tuple[Box, ...] = ()
    horizon: int = 1
    threshold: float = 0.0
    x0: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "critical", tuple(self.critical))
        if int(self.horizon) < 1:
            raise ValueError("horizon must be a positive integer")
        if not 0.0 <= float(self.threshold) <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.x0 is not None:
            object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))


@dataclass
class ValidationReport:
    rank: int
    n: int
    singular_values: np.ndarray
    cond_A: float
    cond_B: float
    checks: dict[str, bool]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def __str__(self):
        lines = [f"rank(B) = {self.rank} (n = {self.n}), cond(A) = {self.cond_A:.3g}, "
                 f"cond(B) = {self.cond_B:.3g}"]
        lines += [f"  {'PASS' if ok else 'FAIL'}  {name}" for name, ok in self.checks.items()]
        return "\n".join(lines)


def numerical_rank(M, rtol=RANK_RTOL):
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.sum(s > rtol * s[0])), s


def validate_system(sys: LinearSystem) -> ValidationReport:
    """Check finiteness, the input box, and full row rank of ``B``."""
    rank, s = numerical_rank(sys.B)
    checks = {
        "finite entries": bool(np.all(np.isfinite(sys.A)) and np.all(np.isfinite(sys.B))
                               and np.all(np.isfinite(sys.q))),
        "nonempty input box": bool(np.all(sys.u_min < sys.u_max)),
        "B has full row rank": rank == sys.n,
        "A is invertible": numerical_rank(sys.A)[0] == sys.n,
    }
    return ValidationReport(
        rank=rank,
        n=sys.n,
        singular_values=s,
        cond_A=float(np.linalg.cond(sys.A)),
        cond_B=float(s[0] / s[-1]) if s.size and s[-1] > 0 else np.inf,
        checks=checks,
    )


def group_steps(sys: LinearSystem, m: int) -> LinearSystem:
    """Lump ``m`` consecutive time steps into one.

    The grouped model is ``x_{k+m} = A^m x_k + U [u_k; ...; u_{k+m-1}] + qbar + wbar``
    with ``U = [A^{m-1} B | ... | A B | B]`` and ``qbar = sum_i A^i q``. Noise fed
    to the grouped model must be aggregated the same way (see
    :func:`aggregate_noise`).

    Raises
    ------
    ValueError
        If ``m < 1`` or the grouped input matrix is still rank deficient.
    """
    m = int(m)
    if m < 1:
        raise ValueError("m must be a positive integer")
    if m == 1:
        return sys

    base = sys if sys.base is None else sys.base
    powers = [np.eye(sys.n)]
    for _ in range(m - 1):
        powers.append(sys.A @ powers[-1])
    A_bar = sys.A @ powers[-1]
    U_bar = np.hstack([powers[m - 1 - i] @ sys.B for i in range(m)])
    q_bar = sum(P @ sys.q for P in powers)

    rank, s = numerical_rank(U_bar)
    if rank < sys.n:
        raise ValueError(
            f"grouping {m} steps leaves the input matrix rank deficient: "
            f"rank {rank} < {sys.n}, smallest singular value {s[-1]:.3g}"
        )
    return LinearSystem(
        A=A_bar,
        B=U_bar,
        q=q_bar,
        u_min=np.tile(sys.u_min, m),
        u_max=np.tile(sys.u_max, m),
        steps_per_action=sys.steps_per_action * m,
        base=base,
    )


def aggregate_noise(base: LinearSystem, per_step):
    """Combine per-step noise of shape (..., m, n) into grouped-step noise.

    ``wbar = sum_i A^{m-1-i} w_i`` for the concrete matrix ``A`` of ``base``.
    """
    w = np.asarray(per_step, dtype=float)
    m = w.shape[-2]
    total = np.zeros(w.shape[:-2] + (w.shape[-1],))
    for i in range(m):
        total = total @ base.A.T + w[..., i, :]
    return total
