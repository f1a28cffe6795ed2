"""Small constructors shared by several test modules."""

import numpy as np

from scenario_imdp.imdp import IntervalMdp


def make_mdp(n_states, rows, goal=(), critical=(), horizon=None, initial=0):
    """IntervalMdp from ``rows[s] = [(successors, lower, upper), ...]``.

    The last state is absorbing; its deadlock row is appended automatically.
    Each (state, action) pair gets its own row.
    """
    choice_state, choice_action, succ, lo, hi, sizes = [], [], [], [], [], []
    a = 0
    for s in range(n_states - 1):
        for t, l, h in rows[s]:
            choice_state.append(s)
            choice_action.append(a)
            succ.extend(t)
            lo.extend(l)
            hi.extend(h)
            sizes.append(len(t))
            a += 1
    choice_state.append(n_states - 1)
    choice_action.append(a)
    succ.append(n_states - 1)
    lo.append(1.0)
    hi.append(1.0)
    sizes.append(1)
    return IntervalMdp(
        n_states=n_states,
        choice_state=np.array(choice_state, dtype=np.int64),
        choice_action=np.array(choice_action, dtype=np.int64),
        indptr=np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64),
        successors=np.array(succ, dtype=np.int64),
        lower=np.array(lo, dtype=float),
        upper=np.array(hi, dtype=float),
        goal=np.array(sorted(goal), dtype=np.int64),
        critical=np.array(sorted(critical), dtype=np.int64),
        initial=initial,
        horizon=horizon,
    )


def random_row(rng, n_states, max_succ=4, width=0.3):
    m = int(rng.integers(1, max_succ + 1))
    succ = np.sort(rng.choice(n_states, size=m, replace=False))
    p = rng.dirichlet(np.ones(m))
    lo = np.clip(p - rng.uniform(0, width, m), 0, 1)
    hi = np.clip(p + rng.uniform(0, width, m), 0, 1)
    return succ, lo, hi


def random_imdp(rng, n_states=5, n_actions=3, horizon=None):
    """Random interval MDP; state ``n_states - 1`` is absorbing."""
    rows = [[random_row(rng, n_states) for _ in range(int(rng.integers(1, n_actions + 1)))]
            for _ in range(n_states - 1)]
    goal = {0}
    critical = {1} if rng.random() < 0.5 else set()
    return make_mdp(n_states, rows, goal, critical, horizon), rows, goal, critical


def random_feasible_row(rng, m):
    p = rng.dirichlet(np.ones(m))
    lo = p * rng.uniform(0, 1, m)
    hi = p + (1 - p) * rng.uniform(0, 1, m)
    return lo, hi
