"""Iterative abstraction loop and the repeated soundness experiment.

The loop computes states and actions once, then repeatedly draws ``N`` noise
samples, builds the interval MDP, and verifies it, growing ``N`` by a factor
``gamma`` until the guarantee from the initial state reaches ``eta`` or the
sample budget runs out.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .abstraction import ActionSet, enabled_actions
from .checker import FeedbackController, RobustPolicy, extract_controller, robust_value_iteration
from .config import ModelConfig
from .imdp import IntervalMdp, build_imdp, write_summary_csv
from .scenario import count_samples, interval_table
from .simulator import NoiseSource, draw_abstraction_samples, simulate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNREACHED = 2


@dataclass
class RunConfig:
    """Parameters of one synthesis run.

    ``max_iterations=None`` keeps going until ``N`` reaches ``max_n``;
    ``eta=None`` takes the threshold from the model file.
    """

    beta: float = 0.01
    n0: int = 25
    gamma: float = 2.0
    max_n: int = 12_800
    max_iterations: int | None = None
    eta: float | None = None
    abstraction_seed: int | None = None
    validation_seed: int = 0
    trials: int = 0
    cumulative: bool = False
    threads: int | None = None
    out_dir: str | None = None
    model_path: str | None = None

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.n0 < 1 or self.max_n < self.n0:
            raise ValueError("need 1 <= n0 <= max_n")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.eta is not None and not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


def sample_sizes(n0: int, gamma: float, max_n: int, max_iterations: int | None = None) -> list[int]:
    """``n0, gamma n0, gamma^2 n0, ...`` capped at ``max_n``."""
    out = []
    z = 0
    while max_iterations is None or z < max_iterations:
        N = min(int(round(n0 * gamma ** z)), max_n)
        out.append(N)
        if N >= max_n and max_iterations is None:
            break
        z += 1
    return out


@dataclass
class RunArtifacts:
    exit_code: int
    records: list[dict]
    actions: ActionSet
    mdp: IntervalMdp | None = None
    policy: RobustPolicy | None = None
    controller: FeedbackController | None = None
    guarantee: float | None = None
    validation: dict | None = None
    n_action_builds: int = 0
    out_dir: Path | None = field(default=None)


def _versions() -> dict:
    try:
        own = metadata.version("scenario-imdp")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"scenario-imdp": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _noise_with_seed(noise: NoiseSource, seed: int | None) -> NoiseSource:
    return noise if seed is None else dataclasses.replace(noise, seed=int(seed))


def run_synthesis(model: ModelConfig, cfg: RunConfig) -> RunArtifacts:
    """Run the iterative abstraction loop on ``model``."""
    if model.noise is None:
        raise ValueError("the model has no noise source")
    if model.spec.x0 is None:
        raise ValueError("the model has no initial state")
    eta = model.spec.threshold if cfg.eta is None else cfg.eta
    noise = _noise_with_seed(model.noise, cfg.abstraction_seed)
    part, system, spec = model.partition, model.system, model.spec

    t = time.perf_counter()
    actions = enabled_actions(system, part, threads=cfg.threads)
    n_builds = 1
    logger.info("states and actions computed in %.2f s", time.perf_counter() - t)

    records = []
    pool = np.zeros((0, system.n))
    art = RunArtifacts(exit_code=EXIT_UNREACHED, records=records, actions=actions)
    for z, N in enumerate(sample_sizes(cfg.n0, cfg.gamma, cfg.max_n, cfg.max_iterations)):
        t0 = time.perf_counter()
        if cfg.cumulative:
            extra = N - pool.shape[0]
            if extra > 0:
                pool = np.vstack([pool, draw_abstraction_samples(noise, extra, system, z)])
            W = pool[:N]
        else:
            W = draw_abstraction_samples(noise, N, system, z)
        counts = count_samples(part, actions.targets, W)
        table = interval_table(N, cfg.beta)
        t1 = time.perf_counter()
        mdp = build_imdp(part, actions, counts, table, spec)
        t2 = time.perf_counter()
        policy = robust_value_iteration(mdp)
        t3 = time.perf_counter()
        g = policy.guarantee(mdp.initial)
        records.append({"iteration": z, "N": N, "states": mdp.n_states,
                        "choices": mdp.n_choices(), "transitions": mdp.n_transitions(),
                        "interval_time": t1 - t0, "build_time": t2 - t1,
                        "verify_time": t3 - t2, "guarantee": g})
        logger.info("iteration %d: N=%d guarantee=%.4f (eta=%.4f)", z, N, g, eta)
        art.mdp, art.policy, art.guarantee = mdp, policy, g
        if g >= eta:
            art.exit_code = EXIT_OK
            art.controller = extract_controller(policy, actions, system, part, mdp)
            break
    art.n_action_builds = n_builds

    if art.controller is not None and cfg.trials > 0:
        rep = simulate(system, art.controller, spec, model.noise, cfg.trials, cfg.validation_seed)
        art.validation = rep.as_dict()

    if cfg.out_dir is not None:
        art.out_dir = _write_outputs(art, model, cfg, eta)
    return art


def _write_outputs(art: RunArtifacts, model: ModelConfig, cfg: RunConfig, eta: float) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(art.records, out / "iterations.csv")
    files = ["iterations.csv"]
    if art.controller is not None:
        art.policy.to_csv(out / "policy.csv")
        files.append("policy.csv")
    if art.validation is not None:
        write_summary_csv([{"N": art.records[-1]["N"], "guarantee": art.guarantee,
                            **art.validation}], out / "validation.csv")
        files.append("validation.csv")
    manifest = {
        "model": model.name,
        "model_path": cfg.model_path,
        "model_config": model.raw,
        "run_config": dataclasses.asdict(cfg),
        "eta": eta,
        "seeds": {"abstraction": model.noise.seed if cfg.abstraction_seed is None
                  else cfg.abstraction_seed, "validation": cfg.validation_seed},
        "exit_code": art.exit_code,
        "guarantee": art.guarantee,
        "iterations": len(art.records),
        "action_builds": art.n_action_builds,
        "files": files,
        "versions": _versions(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
    return out


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


def soundness_experiment(model: ModelConfig, sizes, repetitions=10, trials=10_000, *, beta=0.01,
                         robust=True, seed=0, actions: ActionSet | None = None) -> list[dict]:
    """Guarantee versus simulated performance over repeated abstractions.

    For each sample size and repetition, fresh noise samples give a new
    model; its controller is simulated on independent noise. A repetition is
    flagged ``violated`` when the guarantee exceeds the empirical
    probability by more than two Wilson half-widths.
    """
    system, part, spec = model.system, model.partition, model.spec
    if actions is None:
        actions = enabled_actions(system, part)
    rows = []
    for N in sizes:
        table = interval_table(N, beta) if robust else None
        for r in range(repetitions):
            noise = _noise_with_seed(model.noise, seed + r)
            W = draw_abstraction_samples(noise, N, system, iteration=N)
            mdp = build_imdp(part, actions, count_samples(part, actions.targets, W), table, spec,
                             robust=robust)
            policy = robust_value_iteration(mdp)
            ctl = extract_controller(policy, actions, system, part, mdp)
            rep = simulate(system, ctl, spec, noise, trials, seed=seed + r)
            g = policy.guarantee(mdp.initial)
            hw = rep.wilson_half_width
            rows.append({"N": N, "repetition": r, "robust": robust, "guarantee": g,
                         "empirical": rep.empirical_probability, "wilson_half_width": hw,
                         "violated": g > rep.empirical_probability + 2 * hw})
    return rows


def summarize_experiment(rows: list[dict]) -> list[dict]:
    """Per-``N`` means and standard deviations of guarantee and empirical probability."""
    out = []
    for N in sorted({r["N"] for r in rows}):
        g = np.array([r["guarantee"] for r in rows if r["N"] == N])
        e = np.array([r["empirical"] for r in rows if r["N"] == N])
        v = sum(r["violated"] for r in rows if r["N"] == N)
        out.append({"N": N, "guarantee_mean": g.mean(), "guarantee_std": g.std(ddof=1) if g.size > 1 else 0.0,
                    "empirical_mean": e.mean(), "empirical_std": e.std(ddof=1) if e.size > 1 else 0.0,
                    "violations": int(v), "repetitions": int(g.size)})
    return out
