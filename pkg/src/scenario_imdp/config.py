"""Model configuration files (YAML or JSON).

Schema::

    name: bas1zone                     # optional
    system:
      A: [[...], ...]                  # n x n, row-major
      B: [[...], ...]                  # n x p
      q: [...]                         # optional, defaults to zeros
      input_bounds: {lower: [...], upper: [...]}
      group_steps: 1                   # optional
    partition:
      center: [...]                    # or ``lower``: [...]
      widths: [...]
      counts: [...]
    spec:
      goal: [{lower: [...], upper: [...]}]   # ``null`` entries are unbounded
      critical: []
      horizon: 64
      threshold: 0.9
      initial_state: [...]
    noise:                              # optional
      kind: gaussian                    # gaussian | uniform | mixture | file
      seed: 0
      per_step: false                   # samples describe one concrete step
      mean: [...]; cov: [[...]]         # gaussian
      low: [...]; high: [...]           # uniform
      weights, means, covs              # mixture
      path: samples.txt                 # file, relative to the config file
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .partition import Partition
from .simulator import NoiseSource
from .sysmodel import Box, LinearSystem, ReachAvoidSpec, group_steps


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Everything needed to run the synthesis loop on one model.

    ``system`` is the model the abstraction works with (grouped when
    ``group_steps > 1``); ``raw`` keeps the parsed dictionary for manifests.
    """

    system: LinearSystem
    partition: Partition
    spec: ReachAvoidSpec
    noise: NoiseSource | None
    name: str = "model"
    raw: dict | None = None


def _arr(d, key, ctx, ndim=None):
    if key not in d:
        raise ConfigError(f"{ctx}: missing field {key!r}")
    try:
        a = np.asarray(d[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{ctx}.{key}: not numeric ({exc})") from None
    if ndim is not None and a.ndim != ndim:
        raise ConfigError(f"{ctx}.{key}: expected {ndim}-d array, got shape {a.shape}")
    return a


def _box(d, ctx):
    if not isinstance(d, dict) or "lower" not in d or "upper" not in d:
        raise ConfigError(f"{ctx}: a box needs 'lower' and 'upper'")
    return Box(list(d["lower"]), list(d["upper"]))


def _noise(d, base_dir):
    d = dict(d)
    kind = d.pop("kind", None)
    if "seed" not in d:
        raise ConfigError("noise: a seed is mandatory")
    seed = int(d.pop("seed"))
    per_step = bool(d.pop("per_step", False))
    if kind == "file":
        path = Path(d["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        return NoiseSource.from_file(path, seed=seed, per_step=per_step)
    if kind not in ("gaussian", "uniform", "mixture"):
        raise ConfigError(f"noise: unknown kind {kind!r}")
    try:
        return NoiseSource(kind=kind, seed=seed, per_step=per_step, **d)
    except TypeError as exc:
        raise ConfigError(f"noise: {exc}") from None


def model_from_dict(d: dict, base_dir=".") -> ModelConfig:
    """Build a :class:`ModelConfig` from a parsed config dictionary."""
    for section in ("system", "partition", "spec"):
        if section not in d:
            raise ConfigError(f"missing section {section!r}")
    s = d["system"]
    A = _arr(s, "A", "system", 2)
    B = _arr(s, "B", "system", 2)
    q = np.asarray(s.get("q", np.zeros(A.shape[0])), dtype=float)
    bounds = s.get("input_bounds")
    if not isinstance(bounds, dict):
        raise ConfigError("system.input_bounds must hold 'lower' and 'upper'")
    system = LinearSystem(A=A, B=B, q=q, u_min=_arr(bounds, "lower", "input_bounds"),
                          u_max=_arr(bounds, "upper", "input_bounds"))
    m = int(s.get("group_steps", 1))
    if m > 1:
        system = group_steps(system, m)

    p = d["partition"]
    widths = _arr(p, "widths", "partition", 1)
    counts = _arr(p, "counts", "partition", 1)
    if "lower" in p:
        part = Partition(_arr(p, "lower", "partition", 1), widths, counts)
    elif "center" in p:
        part = Partition.centered(_arr(p, "center", "partition", 1), widths, counts)
    else:
        raise ConfigError("partition: give either 'lower' or 'center'")
    if part.n != system.n:
        raise ConfigError(f"partition has dimension {part.n}, system has {system.n}")

    sp = d["spec"]
    x0 = sp.get("initial_state")
    spec = ReachAvoidSpec(
        goal=[_box(b, "spec.goal") for b in sp.get("goal", [])],
        critical=[_box(b, "spec.critical") for b in sp.get("critical", []) or []],
        horizon=int(sp.get("horizon", 1)),
        threshold=float(sp.get("threshold", 0.0)),
        x0=None if x0 is None else np.asarray(x0, dtype=float),
    )
    noise = _noise(d["noise"], base_dir) if d.get("noise") else None
    return ModelConfig(system=system, partition=part, spec=spec, noise=noise,
                       name=str(d.get("name", "model")), raw=d)


def load_model(path) -> ModelConfig:
    """Read a YAML or JSON model file."""
    path = Path(path)
    text = path.read_text()
    try:
        d = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return model_from_dict(d, base_dir=path.parent)


def dump_model(d: dict, path) -> None:
    """Write a config dictionary as YAML (or JSON for a ``.json`` suffix)."""
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(d, indent=2))
    else:
        path.write_text(yaml.safe_dump(d, sort_keys=False))
