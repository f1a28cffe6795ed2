"""Abstract actions, one-step backward reachable sets and the control law.

Every region ``j`` contributes one action whose target point is the region
center ``d_j``. The action is enabled in region ``i`` when every state of the
region can be steered (noiselessly) onto ``d_j`` with an admissible input.
"""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull

from .partition import Partition, Polytope
from .sysmodel import LinearSystem, numerical_rank

logger = logging.getLogger(__name__)

CONTAIN_TOL = 1e-9
INPUT_TOL = 1e-9
THREADS_ENV = "SCENARIO_IMDP_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class ActionSet:
    """Targets and enabled state-action pairs.

    ``choice_state`` and ``choice_action`` list every enabled pair, sorted by
    state and then by action.
    """

    targets: np.ndarray
    choice_state: np.ndarray
    choice_action: np.ndarray
    n_states: int

    @property
    def n_actions(self) -> int:
        return self.targets.shape[0]

    @property
    def n_choices(self) -> int:
        return self.choice_state.size

    def enabled(self, i) -> np.ndarray:
        lo, hi = np.searchsorted(self.choice_state, [i, i + 1])
        return self.choice_action[lo:hi]

    def enabled_lists(self) -> list[np.ndarray]:
        bounds = np.searchsorted(self.choice_state, np.arange(self.n_states + 1))
        return [self.choice_action[a:b] for a, b in zip(bounds[:-1], bounds[1:])]

    def used_actions(self) -> np.ndarray:
        """Actions enabled in at least one state."""
        return np.unique(self.choice_action)


def _check_invertible(sys: LinearSystem):
    if numerical_rank(sys.A)[0] < sys.n:
        raise ValueError("backward reachable sets require an invertible A")
    if numerical_rank(sys.B)[0] < sys.n:
        raise ValueError("backward reachable sets require B with full row rank")


def _input_box_vertices(sys: LinearSystem) -> np.ndarray:
    corners = np.array(list(itertools.product((0, 1), repeat=sys.p)), dtype=float)
    return sys.u_min + corners * (sys.u_max - sys.u_min)


def _reach_halfspaces(sys: LinearSystem):
    """Half-spaces ``M x <= b0 + M A^{-1} d`` describing G(d) for every d."""
    _check_invertible(sys)
    A_inv = np.linalg.inv(sys.A)
    if sys.p == sys.n:
        B_inv = np.linalg.inv(sys.B)
        L = B_inv @ sys.A
        c = -B_inv @ sys.q
        M = np.vstack([-L, L])
        # u = B^-1 (d - q) - L x must lie in [u_min, u_max]
        b0 = np.concatenate([sys.u_max - c, c - sys.u_min])
        # offset that depends on d: +-B^-1 d == M A^-1 d
        return M, b0, A_inv
    # general case: G(0) = -A^-1 (q + B U), a zonotope; take its hull
    pts = -(sys.q + _input_box_vertices(sys) @ sys.B.T) @ A_inv.T
    hull = ConvexHull(pts)
    M = hull.equations[:, :-1]
    b0 = -hull.equations[:, -1]
    return M, b0, A_inv


def backward_reach_set(sys: LinearSystem, d) -> Polytope:
    """States from which some admissible input maps the noiseless successor onto ``d``."""
    d = np.asarray(d, dtype=float)
    M, b0, A_inv = _reach_halfspaces(sys)
    b = b0 + M @ (A_inv @ d)
    vertices = (d - sys.q - _input_box_vertices(sys) @ sys.B.T) @ A_inv.T
    center = A_inv @ (d - sys.q - sys.B @ ((sys.u_min + sys.u_max) / 2))
    if vertices.shape[0] > 2 ** sys.n:
        vertices = vertices[ConvexHull(vertices).vertices]
    return Polytope(M=M, b=b, center=center, vertices=vertices)


def enabled_actions(sys: LinearSystem, part: Partition, targets=None, *,
                    tol=CONTAIN_TOL, chunk=64, threads=None) -> ActionSet:
    """Enable action ``j`` in region ``i`` iff ``R_i`` lies inside ``G(d_j)``.

    For a box ``R_i`` the largest value of ``M_r x`` over the box equals the
    largest value over its ``2^n`` vertices, so comparing
    ``M c_i + |M| h_i`` against the offsets of ``G(d_j)`` is the exact vertex
    membership test.
    """
    if targets is None:
        targets = part.centers()
    targets = np.asarray(targets, dtype=float)
    M, b0, A_inv = _reach_halfspaces(sys)
    lo, hi = part.region_bounds()
    reach_c = (lo + hi) / 2 @ M.T + ((hi - lo) / 2) @ np.abs(M).T  # (R, F)
    shift = targets @ A_inv.T @ M.T  # (J, F)
    limit = b0 + tol

    def block(start):
        stop = min(start + chunk, part.n_regions)
        ok = np.all(reach_c[start:stop, None, :] - shift[None, :, :] <= limit, axis=-1)
        s, a = np.nonzero(ok)
        return s + start, a

    threads = default_threads() if threads is None else threads
    starts = range(0, part.n_regions, chunk)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    states = np.concatenate([p[0] for p in parts]) if parts else np.array([], dtype=int)
    actions = np.concatenate([p[1] for p in parts]) if parts else np.array([], dtype=int)
    logger.info("enabled %d state-action pairs over %d regions and %d actions",
                states.size, part.n_regions, targets.shape[0])
    return ActionSet(targets=targets, choice_state=states.astype(np.int64),
                     choice_action=actions.astype(np.int64), n_states=part.n_regions)


def control_input(sys: LinearSystem, d, x, tol=INPUT_TOL):
    """Input that maps ``x`` noiselessly onto ``d``: ``u = B^+ (d - q - A x)``.

    Returns
    -------
    u : ndarray
        The input, clamped onto the input box when it overshoots by at most
        ``tol`` per coordinate.
    in_bounds : bool or ndarray of bool
        False where the required input leaves the box by more than ``tol``.
    """
    d = np.asarray(d, dtype=float)
    x = np.asarray(x, dtype=float)
    u = (d - sys.q - x @ sys.A.T) @ sys.B_pinv.T
    in_bounds = np.all((u >= sys.u_min - tol) & (u <= sys.u_max + tol), axis=-1)
    u = np.where(in_bounds[..., None] if u.ndim > 1 else in_bounds,
                 np.clip(u, sys.u_min, sys.u_max), u)
    return u, in_bounds
