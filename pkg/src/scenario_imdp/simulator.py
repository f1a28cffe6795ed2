"""Noise sources and closed-loop Monte Carlo validation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .checker import NO_ACTION, FeedbackController
from .imdp import spec_regions
from .partition import Partition
from .sysmodel import LinearSystem, ReachAvoidSpec, aggregate_noise

logger = logging.getLogger(__name__)

# spawn-key tags keeping abstraction and validation streams apart
ABSTRACTION_STREAM = 0xAB
VALIDATION_STREAM = 0x5A


def _factor(cov):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    vals, vecs = np.linalg.eigh(cov)
    if np.any(vals < -1e-12 * max(1.0, np.abs(vals).max())):
        raise ValueError("covariance matrix is not positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass
class NoiseSource:
    """Process-noise generator.

    ``kind`` is one of ``"gaussian"`` (``mean``, ``cov``), ``"uniform"``
    (``low``, ``high``), ``"mixture"`` (``weights``, ``means``, ``covs``) or
    ``"pool"`` (``pool``, rows drawn without replacement). With
    ``per_step=True`` the samples describe one concrete time step and are
    aggregated when the model groups several steps.
    """

    kind: str
    seed: int = 0
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    weights: np.ndarray | None = None
    means: np.ndarray | None = None
    covs: np.ndarray | None = None
    pool: np.ndarray | None = field(default=None, repr=False)
    per_step: bool = False

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "mixture", "pool"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian":
            self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            self._L = _factor(self.cov)
        elif self.kind == "uniform":
            self.low = np.atleast_1d(np.asarray(self.low, dtype=float))
            self.high = np.atleast_1d(np.asarray(self.high, dtype=float))
        elif self.kind == "mixture":
            self.weights = np.asarray(self.weights, dtype=float)
            self.weights = self.weights / self.weights.sum()
            self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
            self.covs = np.asarray(self.covs, dtype=float)
            self._Ls = [_factor(c) for c in self.covs]
        else:
            self.pool = np.atleast_2d(np.asarray(self.pool, dtype=float))
            if self.pool.shape[0] == 0:
                raise ValueError("empty noise sample pool")

    @classmethod
    def from_file(cls, path, seed=0, per_step=False) -> NoiseSource:
        """Load a pool with one sample per line, comma or whitespace separated."""
        text = Path(path).read_text().replace(",", " ")
        rows = [list(map(float, line.split())) for line in text.splitlines()
                if line.strip() and not line.lstrip().startswith("#")]
        return cls(kind="pool", pool=np.array(rows, dtype=float), seed=seed, per_step=per_step)

    @property
    def dim(self) -> int:
        if self.kind == "gaussian":
            return self.mean.size
        if self.kind == "uniform":
            return self.low.size
        if self.kind == "mixture":
            return self.means.shape[1]
        return self.pool.shape[1]

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            z = rng.standard_normal((size, self._L.shape[1]))
            return self.mean + z @ self._L.T
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=(size, self.low.size))
        if self.kind == "mixture":
            comp = rng.choice(self.weights.size, size=size, p=self.weights)
            z = rng.standard_normal((size, self.dim))
            out = np.empty((size, self.dim))
            for c, L in enumerate(self._Ls):
                m = comp == c
                out[m] = self.means[c] + z[m] @ L.T
            return out
        if size > self.pool.shape[0]:
            raise ValueError(f"noise pool exhausted: need {size} samples, have {self.pool.shape[0]}")
        return self.pool[rng.choice(self.pool.shape[0], size=size, replace=False)]


def _steps(system: LinearSystem | None, noise: NoiseSource) -> int:
    if system is None or not noise.per_step:
        return 1
    return system.steps_per_action


def draw_abstraction_samples(noise: NoiseSource, N: int, system: LinearSystem | None = None,
                             iteration: int = 0) -> np.ndarray:
    """``N`` i.i.d. samples at the model's step resolution.

    The stream is keyed on ``(seed, iteration)`` and tagged so that it never
    coincides with the validation streams of :func:`simulate`.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(noise.seed), ABSTRACTION_STREAM,
                                                        int(iteration)]))
    m = _steps(system, noise)
    if m == 1:
        return noise.sample(rng, N)
    raw = noise.sample(rng, N * m).reshape(N, m, -1)
    return aggregate_noise(system.base, raw)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator owned by a single validation trial."""
    ss = np.random.SeedSequence([int(seed), VALIDATION_STREAM, int(trial)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SimulationReport:
    trials: int
    successes: int
    successes_strict: int | None = None
    input_violations: int = 0
    trajectories: np.ndarray | None = field(default=None, repr=False)

    @property
    def empirical_probability(self) -> float:
        return self.successes / self.trials

    @property
    def wilson(self) -> tuple[float, float]:
        lo, hi = proportion_confint(self.successes, self.trials, alpha=0.05, method="wilson")
        return float(lo), float(hi)

    @property
    def wilson_half_width(self) -> float:
        lo, hi = self.wilson
        return (hi - lo) / 2

    def as_dict(self) -> dict:
        lo, hi = self.wilson
        return {"trials": self.trials, "successes": self.successes,
                "empirical": self.empirical_probability, "wilson_low": lo, "wilson_high": hi,
                "successes_strict": self.successes_strict,
                "input_violations": self.input_violations}

    def trajectories_to_csv(self, path) -> None:
        if self.trajectories is None:
            raise ValueError("trajectories were not recorded")
        T, K1, n = self.trajectories.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "k"] + [f"x{i}" for i in range(n)])
            for t in range(T):
                for k in range(K1):
                    x = self.trajectories[t, k]
                    if np.all(np.isnan(x)):
                        break
                    w.writerow([t, k] + [repr(float(v)) for v in x])


ACTIVE, SUCCESS, FAILURE = 0, 1, 2


def simulate(system: LinearSystem, controller: FeedbackController, spec: ReachAvoidSpec,
             noise: NoiseSource, trials: int, seed: int = 0, *, x0=None,
             record: bool = False) -> SimulationReport:
    """Run ``trials`` closed-loop trajectories and count reach-avoid successes.

    A trial succeeds when the continuous state enters a goal region within
    the horizon before touching a critical region or leaving the partitioned
    domain. When the model groups ``m`` concrete steps and the noise is given
    per concrete step, the intermediate states are also checked against the
    critical regions; the count of successful trials that never touch a
    critical region at any concrete step is reported as ``successes_strict``.
    """
    part: Partition = controller.partition
    x0 = spec.x0 if x0 is None else np.asarray(x0, dtype=float)
    if x0 is None:
        raise ValueError("no initial state given")
    if noise.dim != system.n:
        raise ValueError(f"noise has dimension {noise.dim}, system has {system.n}")
    K = controller.horizon
    if spec.horizon != K:
        raise ValueError(f"controller horizon {K} does not match the property horizon {spec.horizon}")

    goal, critical = spec_regions(part, spec)
    is_goal = np.zeros(part.n_regions + 1, dtype=bool)
    is_goal[goal] = True
    is_crit = np.zeros(part.n_regions + 1, dtype=bool)
    is_crit[critical] = True
    is_bad = is_crit.copy()
    is_bad[part.absorbing] = True

    m = _steps(system, noise)
    intermediate = m > 1
    draws = np.stack([noise.sample(trial_rng(seed, t), K * m) for t in range(trials)])
    draws = draws.reshape(trials, K, m, system.n)

    x = np.tile(x0, (trials, 1))
    status = np.full(trials, ACTIVE)
    clipped = np.zeros(trials, dtype=bool)  # hit a critical region at an intermediate step
    violations = 0
    traj = np.full((trials, K + 1, system.n), np.nan) if record else None

    def judge(x, idx):
        r = part.region_index(x[idx])
        status[idx[is_goal[r]]] = SUCCESS
        status[idx[is_bad[r]]] = FAILURE

    judge(x, np.arange(trials))
    if record:
        traj[:, 0] = x
    for k in range(K):
        idx = np.flatnonzero(status == ACTIVE)
        if idx.size == 0:
            break
        u, a = controller(x[idx], k)
        halted = a == NO_ACTION
        status[idx[halted]] = FAILURE
        idx, u = idx[~halted], u[~halted]
        if idx.size == 0:
            break
        out = np.any((u < system.u_min - 1e-9) | (u > system.u_max + 1e-9), axis=1)
        violations += int(out.sum())
        if intermediate:
            base = system.base
            xi = x[idx]
            u_steps = u.reshape(idx.size, m, base.p)
            for i in range(m - 1):
                xi = base.step(xi, u_steps[:, i], draws[idx, k, i])
                clipped[idx[is_crit[part.region_index(xi)]]] = True
            x[idx] = base.step(xi, u_steps[:, m - 1], draws[idx, k, m - 1])
        else:
            x[idx] = system.step(x[idx], u, draws[idx, k, 0])
        judge(x, idx)
        if record:
            traj[idx, k + 1] = x[idx]

    successes = int(np.sum(status == SUCCESS))
    strict = int(np.sum((status == SUCCESS) & ~clipped)) if intermediate else None
    return SimulationReport(trials=trials, successes=successes, successes_strict=strict,
                            input_violations=violations, trajectories=traj)
