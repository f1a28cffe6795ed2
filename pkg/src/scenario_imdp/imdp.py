"""Interval MDP assembly and a plain-text interchange format.

States ``0 .. R-1`` are partition regions, state ``R`` is the absorbing
state. Action ``j < J`` steers towards the center of region ``j``; action
``J`` is the deadlock self-loop of the absorbing state. Interval rows are
stored once per action and shared by every state that enables the action.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .abstraction import ActionSet
from .partition import Partition
from .scenario import IntervalTable, SampleCounts
from .sysmodel import ReachAvoidSpec

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-12
FORMAT_TAG = "# scenario-imdp interval MDP v1"


@dataclass(frozen=True, eq=False)
class IntervalMdp:
    n_states: int
    choice_state: np.ndarray
    choice_action: np.ndarray
    indptr: np.ndarray
    successors: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    goal: np.ndarray
    critical: np.ndarray
    initial: int | None = None
    N: int | None = None
    beta: float | None = None
    horizon: int | None = None

    @property
    def absorbing(self) -> int:
        return self.n_states - 1

    @property
    def n_actions(self) -> int:
        """Number of rows, the deadlock row included."""
        return self.indptr.size - 1

    @property
    def deadlock_action(self) -> int:
        return self.n_actions - 1

    def n_choices(self, include_deadlock=True) -> int:
        n = self.choice_state.size
        return n if include_deadlock else n - 1

    def n_transitions(self, include_deadlock=True) -> int:
        sizes = np.diff(self.indptr)
        n = int(sizes[self.choice_action].sum())
        return n if include_deadlock else n - int(sizes[self.deadlock_action])

    def n_stored_entries(self) -> int:
        return int(self.successors.size)

    def row(self, j):
        s = slice(self.indptr[j], self.indptr[j + 1])
        return self.successors[s], self.lower[s], self.upper[s]

    def enabled(self, s) -> np.ndarray:
        lo, hi = np.searchsorted(self.choice_state, [s, s + 1])
        return self.choice_action[lo:hi]

    def summary(self) -> dict:
        return {
            "states": self.n_states,
            "choices": self.n_choices(),
            "choices_without_deadlock": self.n_choices(False),
            "transitions": self.n_transitions(),
            "transitions_without_deadlock": self.n_transitions(False),
        }

    def equals(self, other: IntervalMdp) -> bool:
        arrays = ("choice_state", "choice_action", "indptr", "successors", "lower", "upper",
                  "goal", "critical")
        return (self.n_states == other.n_states
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and (self.initial, self.N, self.beta, self.horizon)
                == (other.initial, other.N, other.beta, other.horizon))


def spec_regions(part: Partition, spec: ReachAvoidSpec):
    """Goal and critical region indices; boxes must align with the grid."""
    def collect(boxes):
        idx = [part.regions_in_box(b.lower, b.upper) for b in boxes]
        return np.unique(np.concatenate(idx)) if idx else np.array([], dtype=np.int64)

    goal = collect(spec.goal).astype(np.int64)
    critical = collect(spec.critical).astype(np.int64)
    clash = np.intersect1d(goal, critical)
    if clash.size:
        raise ValueError(f"goal and critical regions overlap in {clash.size} regions")
    return goal, critical


def build_imdp(part: Partition, actions: ActionSet, counts: SampleCounts,
               table: IntervalTable | None, spec: ReachAvoidSpec | None = None, *,
               robust=True) -> IntervalMdp:
    """Assemble the interval MDP from shared per-action successor counts.

    With ``robust=False`` every interval collapses onto the frequentist
    estimate ``N_in / N`` (the non-robust baseline MDP).
    """
    N = counts.N
    if robust and (table is None or table.N != N):
        raise ValueError("interval table does not match the sample count")
    if counts.n_actions != actions.n_actions:
        raise ValueError("counts and action set disagree on the number of actions")

    used = np.zeros(actions.n_actions, dtype=bool)
    used[actions.choice_action] = True
    sizes = np.where(used, counts.row_sizes(), 0)
    sizes = np.append(sizes, 1)  # deadlock row
    indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    keep = np.repeat(used, counts.row_sizes())
    succ = counts.successors[keep]
    n_in = counts.counts[keep]
    if robust:
        lower = table.lower[N - n_in]
        upper = table.upper[N - n_in]
    else:
        lower = n_in / N
        upper = lower.copy()

    absorbing = part.absorbing
    succ = np.append(succ, absorbing)
    lower = np.append(lower, 1.0)
    upper = np.append(upper, 1.0)

    row_lo = np.add.reduceat(lower, indptr[:-1][sizes > 0])
    row_hi = np.add.reduceat(upper, indptr[:-1][sizes > 0])
    if np.any(row_lo > 1 + FEAS_TOL) or np.any(row_hi < 1 - FEAS_TOL):
        raise ValueError("infeasible interval row: sum of lower bounds > 1 or upper bounds < 1")

    deadlock = actions.n_actions
    choice_state = np.append(actions.choice_state, absorbing)
    choice_action = np.append(actions.choice_action, deadlock)

    goal = critical = np.array([], dtype=np.int64)
    initial = horizon = None
    if spec is not None:
        goal, critical = spec_regions(part, spec)
        horizon = spec.horizon
        if spec.x0 is not None:
            initial = int(part.region_index(spec.x0))

    mdp = IntervalMdp(
        n_states=part.n_regions + 1,
        choice_state=choice_state.astype(np.int64),
        choice_action=choice_action.astype(np.int64),
        indptr=indptr,
        successors=succ.astype(np.int64),
        lower=np.asarray(lower, dtype=float),
        upper=np.asarray(upper, dtype=float),
        goal=goal,
        critical=critical,
        initial=initial,
        N=N,
        beta=table.beta if robust else None,
        horizon=horizon,
    )
    logger.info("built %s MDP: %s", "interval" if robust else "point", mdp.summary())
    return mdp


def _fmt_list(xs) -> str:
    return " ".join(str(int(x)) for x in xs)


def export_interchange(mdp: IntervalMdp, path) -> None:
    """Write ``mdp`` as text.

    Layout: a ``#`` tag line, ``key value...`` header lines (``states``,
    ``choices``, ``transitions``, ``initial``, ``goal``, ``critical``, ``N``,
    ``beta``, ``horizon``), an ``edges`` line, then one line
    ``state action successor [lower,upper]`` per transition, sorted by
    state, action and successor. Floats are written with ``repr`` so that
    reading the file back reproduces the model exactly.
    """
    lines = [
        FORMAT_TAG,
        f"states {mdp.n_states}",
        f"choices {mdp.n_choices()}",
        f"transitions {mdp.n_transitions()}",
        f"initial {'-' if mdp.initial is None else mdp.initial}",
        f"goal {_fmt_list(mdp.goal)}".rstrip(),
        f"critical {_fmt_list(mdp.critical)}".rstrip(),
        f"N {'-' if mdp.N is None else mdp.N}",
        f"beta {'-' if mdp.beta is None else repr(float(mdp.beta))}",
        f"horizon {'-' if mdp.horizon is None else mdp.horizon}",
        f"actions {mdp.n_actions}",
        "edges",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for s, a in zip(mdp.choice_state, mdp.choice_action):
            succ, lo, hi = mdp.row(a)
            for t, l, h in zip(succ, lo, hi):
                fh.write(f"{s} {a} {t} [{float(l)!r},{float(h)!r}]\n")


def read_interchange(path) -> IntervalMdp:
    header = {}
    edges = []
    with open(path) as fh:
        if fh.readline().strip() != FORMAT_TAG:
            raise ValueError(f"{path} is not a scenario-imdp interchange file")
        for line in fh:
            line = line.strip()
            if line == "edges":
                break
            key, _, rest = line.partition(" ")
            header[key] = rest
        for line in fh:
            s, a, t, iv = line.split()
            lo, hi = iv.strip("[]").split(",")
            edges.append((int(s), int(a), int(t), float(lo), float(hi)))

    def opt(key, cast):
        v = header.get(key, "-")
        return None if v == "-" else cast(v)

    n_states = int(header["states"])
    n_actions = int(header["actions"])
    pairs = sorted({(s, a) for s, a, *_ in edges})
    rows = {}
    for s, a, t, lo, hi in edges:
        first = rows.setdefault(a, (s, []))
        if first[0] == s:
            first[1].append((t, lo, hi))
    sizes = np.zeros(n_actions, dtype=np.int64)
    for a, (_, entries) in rows.items():
        sizes[a] = len(entries)
    indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    succ = np.zeros(indptr[-1], dtype=np.int64)
    lower = np.zeros(indptr[-1])
    upper = np.zeros(indptr[-1])
    for a, (_, entries) in rows.items():
        for k, (t, lo, hi) in enumerate(entries):
            succ[indptr[a] + k], lower[indptr[a] + k], upper[indptr[a] + k] = t, lo, hi

    def ints(key):
        return np.array([int(v) for v in header.get(key, "").split()], dtype=np.int64)

    return IntervalMdp(
        n_states=n_states,
        choice_state=np.array([p[0] for p in pairs], dtype=np.int64),
        choice_action=np.array([p[1] for p in pairs], dtype=np.int64),
        indptr=indptr,
        successors=succ,
        lower=lower,
        upper=upper,
        goal=ints("goal"),
        critical=ints("critical"),
        initial=opt("initial", int),
        N=opt("N", int),
        beta=opt("beta", float),
        horizon=opt("horizon", int),
    )


def write_summary_csv(records, path) -> None:
    """Write a list of dicts (one per model or iteration) as CSV."""
    records = list(records)
    if not records:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)

