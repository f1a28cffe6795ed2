"""Ready-made benchmark models.

Each entry is a config dictionary in the :mod:`scenario_imdp.config` schema,
so a benchmark can be written to disk, edited and loaded back.

``uav6d`` and ``bas2zone`` are full size (tens of thousands of regions and
hundreds of millions of transitions for ``bas2zone``); they are provided for
completeness and are not meant for quick runs. ``uav4d`` is a desk-scale
planar version of the drone model.
"""

from __future__ import annotations

import copy
import itertools

import numpy as np

from .config import ModelConfig, model_from_dict


def _runs(centers, width):
    """Merge sorted cell centers into contiguous ``[lo, hi]`` intervals."""
    centers = sorted(centers)
    out = []
    for c in centers:
        if out and np.isclose(out[-1][1], c - width / 2):
            out[-1][1] = c + width / 2
        else:
            out.append([c - width / 2, c + width / 2])
    return out


def _blocks(spec, widths):
    """Boxes covering the cells whose centers are listed per dimension.

    ``spec`` maps a dimension to a list of centers; dimensions left out are
    unbounded.
    """
    n = len(widths)
    per_dim = [_runs(spec[i], widths[i]) if i in spec else [[None, None]] for i in range(n)]
    return [{"lower": [iv[0] for iv in combo], "upper": [iv[1] for iv in combo]}
            for combo in itertools.product(*per_dim)]


def _uav_blocks():
    w = [2, 1.5, 2, 1.5, 2, 1.5]
    px, py, pz = 0, 2, 4
    groups = [
        {px: [-10, -8, -6], py: [0, 2, 6, 8], pz: [-6, -4, -2, 0, 2]},
        {px: [-10, -8, -6], py: [6, 8], pz: [2, 4]},
        {px: [-10, -8, -6], py: [4], pz: [-6]},
        {px: [0, 2], py: [2, 4, 6, 8], pz: [-6, -4, -2, 4]},
        {px: [0, 2], py: [2, 8], pz: [0, 2]},
        {px: [0, 2], py: [-2, 0], pz: [-6, -4, -2, 0, 2, 4, 6]},
        {px: [4, 6, 8], py: [-2, 0], pz: [-6, -4, -2]},
        {px: [-10, -8], py: [-4, -2], pz: [-6, -4, -2, 0]},
        {px: [0, 2], py: [-8, -6, -4], pz: [-6]},
        {px: [0, 2], py: [-8, -6, -4], pz: [4, 6]},
        {px: [12, 14], py: [-8, -6], pz: [-6]},
        {px: [10, 12, 14], py: [6, 8], pz: [-6, -4, -2, 0]},
    ]
    return [box for g in groups for box in _blocks(g, w)]


def _double_integrator(dims):
    A = np.kron(np.eye(dims), [[1.0, 1.0], [0.0, 1.0]])
    B = np.kron(np.eye(dims), [[0.5], [1.0]])
    return A.tolist(), B.tolist()


def _uav6d():
    A, B = _double_integrator(3)
    return {
        "name": "uav6d",
        "system": {"A": A, "B": B, "q": [0.0] * 6,
                   "input_bounds": {"lower": [-4.0] * 3, "upper": [4.0] * 3},
                   "group_steps": 2},
        "partition": {"center": [0.0] * 6, "widths": [2, 1.5, 2, 1.5, 2, 1.5],
                      "counts": [15, 3, 9, 3, 7, 3]},
        "spec": {"goal": [{"lower": [11, None, 1, None, -7, None],
                           "upper": [15, None, 5, None, -3, None]}],
                 "critical": _uav_blocks(), "horizon": 32, "threshold": 0.75,
                 "initial_state": [-14.0, 0.0, 6.0, 0.0, -6.0, 0.0]},
        # heavy-tailed stand-in for gust turbulence, per concrete step
        "noise": {"kind": "mixture", "seed": 0, "per_step": True, "weights": [0.9, 0.1],
                  "means": [[0.0] * 6, [0.0] * 6],
                  "covs": [(0.05 * np.eye(6)).tolist(), (0.5 * np.eye(6)).tolist()]},
    }


def _uav4d():
    A, B = _double_integrator(2)
    return {
        "name": "uav4d",
        "system": {"A": A, "B": B, "q": [0.0] * 4,
                   "input_bounds": {"lower": [-4.0] * 2, "upper": [4.0] * 2},
                   "group_steps": 2},
        "partition": {"center": [0.0] * 4, "widths": [2, 1.5, 2, 1.5],
                      "counts": [11, 3, 11, 3]},
        "spec": {"goal": [{"lower": [7, None, 7, None], "upper": [11, None, 11, None]}],
                 "critical": [{"lower": [-3, None, -3, None], "upper": [1, None, 3, None]}],
                 "horizon": 16, "threshold": 0.75, "initial_state": [-8.0, 0.0, -8.0, 0.0]},
        "noise": {"kind": "mixture", "seed": 0, "per_step": True, "weights": [0.9, 0.1],
                  "means": [[0.0] * 4, [0.0] * 4],
                  "covs": [(0.05 * np.eye(4)).tolist(), (0.5 * np.eye(4)).tolist()]},
    }


def _bas2zone():
    return {
        "name": "bas2zone",
        "system": {
            "A": [[0.8425, 0.0537, -0.0084, 0.0000],
                  [0.0515, 0.8435, 0.0000, -0.0064],
                  [0.0668, 0.0000, 0.8971, 0.0000],
                  [0.0000, 0.0668, 0.0000, 0.8971]],
            "B": [[0.0584, 0, 0, 0], [0, 0.0599, 0, 0], [0, 0, 0.0362, 0], [0, 0, 0, 0.0362]],
            "q": [1.2291, 1.0749, 0.0, 0.0],
            "input_bounds": {"lower": [14.0, 14.0, 65.0, 65.0], "upper": [26.0, 26.0, 85.0, 85.0]},
        },
        "partition": {"center": [20.0, 20.0, 38.3, 38.3], "widths": [0.2] * 4,
                      "counts": [21, 21, 9, 9]},
        "spec": {"goal": [{"lower": [19.9, 19.9, None, None], "upper": [20.1, 20.1, None, None]}],
                 "critical": [], "horizon": 32, "threshold": 0.9,
                 "initial_state": [18.6, 18.6, 38.3, 38.3]},
        "noise": {"kind": "gaussian", "seed": 0, "mean": [0.0] * 4,
                  "cov": (0.01 * np.eye(4)).tolist()},
    }


def _bas1zone():
    return {
        "name": "bas1zone",
        "system": {"A": [[0.8820, 0.0058], [0.0134, 0.9625]],
                   "B": [[0.0584, 0.0], [0.0, 0.0241]],
                   "q": [0.9604, 1.3269],
                   "input_bounds": {"lower": [14.0, -10.0], "upper": [28.0, 10.0]}},
        "partition": {"center": [21.0, 38.0], "widths": [0.2, 0.2], "counts": [19, 20]},
        "spec": {"goal": [{"lower": [20.9, None], "upper": [21.1, None]}], "critical": [],
                 "horizon": 64, "threshold": 0.9, "initial_state": [19.2, 37.1]},
        "noise": {"kind": "gaussian", "seed": 0, "mean": [0.0, 0.0],
                  "cov": [[0.02, 0.0], [0.0, 0.1]]},
    }


_BUILDERS = {"uav6d": _uav6d, "uav4d": _uav4d, "bas2zone": _bas2zone, "bas1zone": _bas1zone}
FULL_SCALE = ("uav6d", "bas2zone")


def benchmark_dicts() -> dict[str, dict]:
    """Config dictionaries of all benchmarks, keyed by name."""
    return {name: copy.deepcopy(build()) for name, build in _BUILDERS.items()}


def benchmark_configs() -> dict[str, ModelConfig]:
    """Loaded :class:`ModelConfig` objects of all benchmarks, keyed by name."""
    return {name: model_from_dict(d) for name, d in benchmark_dicts().items()}


def benchmark(name: str) -> ModelConfig:
    try:
        return model_from_dict(copy.deepcopy(_BUILDERS[name]()))
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(_BUILDERS)}") from None
