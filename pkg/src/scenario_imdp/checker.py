"""Robust finite-horizon value iteration for interval MDPs.

The controller maximizes, and an adversary picks the worst distribution
inside each interval row at every backup (rectangular, time-varying
uncertainty). The result is a time-dependent deterministic policy together
with the lower bound on the reach-avoid probability it guarantees.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .abstraction import ActionSet, control_input
from .imdp import FEAS_TOL, IntervalMdp
from .partition import Partition
from .sysmodel import LinearSystem

logger = logging.getLogger(__name__)

NO_ACTION = -1


@dataclass(frozen=True)
class InnerMinResult:
    value: float
    distribution: np.ndarray


def inner_min(lower, upper, values) -> InnerMinResult:
    """Minimize ``sum_i p_i values_i`` over ``lower <= p <= upper, sum p = 1``.

    Successors are visited from the lowest value up, each receiving as much
    of the free mass ``1 - sum(lower)`` as its interval allows. Ties keep the
    given successor order.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    values = np.asarray(values, dtype=float)
    if lower.sum() > 1 + FEAS_TOL or upper.sum() < 1 - FEAS_TOL or np.any(lower > upper):
        raise ValueError("infeasible interval row")
    order = np.argsort(values, kind="stable")
    cap = (upper - lower)[order]
    free = 1.0 - lower.sum()
    before = np.cumsum(cap) - cap
    extra = np.clip(free - before, 0.0, cap)
    p = lower.copy()
    p[order] += extra
    return InnerMinResult(value=float(p @ values), distribution=p)


class _PaddedRows:
    """Interval rows padded to equal length for vectorized inner minimization."""

    def __init__(self, mdp: IntervalMdp):
        sizes = np.diff(mdp.indptr)
        width = max(int(sizes.max()), 1)
        J = mdp.n_actions
        self.succ = np.full((J, width), mdp.absorbing, dtype=np.int64)
        self.lower = np.zeros((J, width))
        self.cap = np.zeros((J, width))
        rows = np.repeat(np.arange(J), sizes)
        cols = np.arange(mdp.successors.size) - np.repeat(mdp.indptr[:-1], sizes)
        self.succ[rows, cols] = mdp.successors
        self.lower[rows, cols] = mdp.lower
        self.cap[rows, cols] = mdp.upper - mdp.lower
        self.free = 1.0 - self.lower.sum(axis=1)

    def inner_min(self, V):
        vals = V[self.succ]
        order = np.argsort(vals, axis=1, kind="stable")
        v_sorted = np.take_along_axis(vals, order, axis=1)
        cap = np.take_along_axis(self.cap, order, axis=1)
        before = np.cumsum(cap, axis=1) - cap
        extra = np.clip(self.free[:, None] - before, 0.0, cap)
        return (self.lower * vals).sum(axis=1) + (extra * v_sorted).sum(axis=1)


@dataclass(frozen=True, eq=False)
class RobustPolicy:
    """Time-dependent policy and its robust values.

    ``choice[k, s]`` is the action at step ``k`` in state ``s`` (``-1`` for
    terminal states or states without actions); ``values[k, s]`` is the
    max-min probability of reaching the goal within ``horizon - k`` steps.
    """

    horizon: int
    choice: np.ndarray
    values: np.ndarray

    def guarantee(self, s) -> float:
        return float(self.values[0, s])

    def to_csv(self, path, states=None) -> None:
        states = np.arange(self.values.shape[1]) if states is None else np.asarray(states)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "state", "action", "value"])
            for k in range(self.horizon):
                for s in states:
                    w.writerow([k, int(s), int(self.choice[k, s]), repr(float(self.values[k, s]))])


def _segment_argmax(q, choice_state, choice_action, n_states):
    """Max of ``q`` per state and the smallest action attaining it."""
    best = np.full(n_states, -np.inf)
    np.maximum.at(best, choice_state, q)
    hit = q == best[choice_state]
    arg = np.full(n_states, np.iinfo(np.int64).max)
    np.minimum.at(arg, choice_state[hit], choice_action[hit])
    return best, arg


def robust_value_iteration(mdp: IntervalMdp, horizon: int | None = None) -> RobustPolicy:
    """Backward induction of the max-min reach-avoid probability."""
    K = mdp.horizon if horizon is None else int(horizon)
    if K is None or K < 1:
        raise ValueError("horizon must be a positive integer")
    S = mdp.n_states
    terminal = np.zeros(S, dtype=bool)
    terminal[mdp.goal] = True
    terminal[mdp.critical] = True
    terminal[mdp.absorbing] = True
    goal_mask = np.zeros(S, dtype=bool)
    goal_mask[mdp.goal] = True

    # the deadlock self-loop only matters for the absorbing state, which is terminal
    live = ~terminal[mdp.choice_state]
    cs, ca = mdp.choice_state[live], mdp.choice_action[live]
    stuck = np.setdiff1d(np.flatnonzero(~terminal), cs)
    if stuck.size:
        logger.warning("%d non-terminal states have no enabled action; valued 0", stuck.size)

    rows = _PaddedRows(mdp)
    values = np.zeros((K + 1, S))
    choice = np.full((K, S), NO_ACTION, dtype=np.int64)
    values[K] = goal_mask
    for k in range(K - 1, -1, -1):
        q = rows.inner_min(values[k + 1])
        best, arg = _segment_argmax(q[ca], cs, ca, S)
        has = np.isfinite(best) & ~terminal
        v = np.where(has, best, 0.0)
        v[goal_mask] = 1.0
        values[k] = np.clip(v, 0.0, 1.0)
        choice[k, has] = arg[has]
    return RobustPolicy(horizon=K, choice=choice, values=values)


class FeedbackController:
    """Piecewise-linear feedback ``u = B^+ (d_j - q - A x)``.

    The target ``d_j`` is chosen by the abstract policy for the region of
    ``x`` at step ``k``. States in goal, critical or absorbing regions, and
    states whose region has no action, get the halt signal: action ``-1``
    and a NaN input.
    """

    def __init__(self, policy: RobustPolicy, actions: ActionSet, system: LinearSystem,
                 partition: Partition, goal=(), critical=()):
        self.policy = policy
        self.targets = actions.targets
        self.system = system
        self.partition = partition
        self.halt = np.zeros(partition.n_regions + 1, dtype=bool)
        self.halt[np.asarray(goal, dtype=np.int64)] = True
        self.halt[np.asarray(critical, dtype=np.int64)] = True
        self.halt[partition.absorbing] = True

    @property
    def horizon(self) -> int:
        return self.policy.horizon

    def action(self, x, k: int):
        if not 0 <= k < self.horizon:
            raise IndexError(f"step {k} is outside the horizon 0..{self.horizon - 1}")
        region = self.partition.region_index(x)
        a = self.policy.choice[k, region]
        return np.where(self.halt[region], NO_ACTION, a)

    def __call__(self, x, k: int):
        """Return ``(u, action)`` for a state or a batch of states."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        a = self.action(x, k)
        u = np.full((x.shape[0], self.system.p), np.nan)
        go = a != NO_ACTION
        if np.any(go):
            u_go, ok = control_input(self.system, self.targets[a[go]], x[go])
            if not np.all(ok):
                logger.warning("%d states needed inputs outside the box", int(np.sum(~ok)))
            u[go] = u_go
        return (u[0], int(a[0])) if single else (u, a)


def extract_controller(policy: RobustPolicy, actions: ActionSet, system: LinearSystem,
                       partition: Partition, mdp: IntervalMdp | None = None) -> FeedbackController:
    goal = mdp.goal if mdp is not None else ()
    critical = mdp.critical if mdp is not None else ()
    return FeedbackController(policy, actions, system, partition, goal, critical)
