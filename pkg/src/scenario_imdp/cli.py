"""Command-line interface: ``scenario-imdp {synthesize,simulate,table,export}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .abstraction import THREADS_ENV, enabled_actions
from .benchmarks import benchmark
from .checker import extract_controller, robust_value_iteration
from .config import load_model
from .imdp import build_imdp, export_interchange, write_summary_csv
from .scenario import IntervalTable, count_samples, interval_table
from .simulator import NoiseSource, draw_abstraction_samples, simulate
from .synthesis import (EXIT_ERROR, RunConfig, _noise_with_seed, _versions, run_synthesis,
                        soundness_experiment, summarize_experiment)

logger = logging.getLogger("scenario_imdp")


def _add_model_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("model", nargs="?", help="model config file (YAML or JSON)")
    g.add_argument("--benchmark", help="built-in model: bas1zone, bas2zone, uav4d, uav6d")
    p.add_argument("--noise-file", help="noise sample file overriding the model's noise")


def _model(args):
    model = benchmark(args.benchmark) if args.benchmark else load_model(args.model)
    if getattr(args, "noise_file", None):
        seed = model.noise.seed if model.noise is not None else 0
        per_step = model.noise.per_step if model.noise is not None else False
        model.noise = NoiseSource.from_file(args.noise_file, seed=seed, per_step=per_step)
    return model


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenario-imdp",
                                 description="Sampling-based interval MDP controller synthesis.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--threads", type=int, default=None,
                    help=f"worker threads (default: ${THREADS_ENV} or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", help="iterative abstraction until the threshold is met")
    _add_model_args(s)
    s.add_argument("--beta", type=float, default=0.01)
    s.add_argument("--n0", type=int, default=25)
    s.add_argument("--gamma", type=float, default=2.0)
    s.add_argument("--max-n", type=int, default=12_800)
    s.add_argument("--max-iterations", type=int, default=None)
    s.add_argument("--eta", type=float, default=None, help="threshold (default: from the model)")
    s.add_argument("--abstraction-seed", type=int, default=None)
    s.add_argument("--validation-seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=0, help="Monte Carlo validation trials")
    s.add_argument("--cumulative", action="store_true", help="reuse earlier samples")
    s.add_argument("--out-dir", default="out")

    m = sub.add_parser("simulate", help="guarantee versus simulated performance")
    _add_model_args(m)
    m.add_argument("-N", "--samples", type=int, nargs="+", default=[25, 100, 400, 1600])
    m.add_argument("--repetitions", type=int, default=10)
    m.add_argument("--trials", type=int, default=10_000)
    m.add_argument("--beta", type=float, default=0.01)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--frequentist", action="store_true", help="also run the point-estimate MDP")
    m.add_argument("--trajectories", type=int, default=0,
                   help="dump this many trajectories of the first run")
    m.add_argument("--out-dir", default="out")

    t = sub.add_parser("table", help="dump the probability interval table")
    t.add_argument("-N", "--samples", type=int, required=True)
    t.add_argument("--beta", type=float, default=0.01)
    t.add_argument("--out", required=True, help="output file (.csv or .npz)")

    e = sub.add_parser("export", help="write the interval MDP in the interchange format")
    _add_model_args(e)
    e.add_argument("-N", "--samples", type=int, default=25)
    e.add_argument("--beta", type=float, default=0.01)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--out", required=True, help="interchange file")
    e.add_argument("--summary", help="also write model size statistics as CSV")
    return ap


def _cmd_synthesize(args) -> int:
    model = _model(args)
    cfg = RunConfig(beta=args.beta, n0=args.n0, gamma=args.gamma, max_n=args.max_n,
                    max_iterations=args.max_iterations, eta=args.eta,
                    abstraction_seed=args.abstraction_seed, validation_seed=args.validation_seed,
                    trials=args.trials, cumulative=args.cumulative, threads=args.threads,
                    out_dir=args.out_dir, model_path=args.model)
    art = run_synthesis(model, cfg)
    for r in art.records:
        print(f"N={r['N']:>6}  states={r['states']}  choices={r['choices']}  "
              f"transitions={r['transitions']}  guarantee={r['guarantee']:.4f}")
    if art.validation:
        v = art.validation
        print(f"empirical={v['empirical']:.4f}  wilson=[{v['wilson_low']:.4f}, {v['wilson_high']:.4f}]")
    print("controller found" if art.controller is not None else "threshold not reached")
    return art.exit_code


def _cmd_simulate(args) -> int:
    model = _model(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    actions = enabled_actions(model.system, model.partition, threads=args.threads)
    rows = []
    for robust in (True, False) if args.frequentist else (True,):
        rows += soundness_experiment(model, args.samples, args.repetitions, args.trials,
                                     beta=args.beta, robust=robust, seed=args.seed, actions=actions)
    write_summary_csv(rows, out / "runs.csv")
    summary = []
    for robust in sorted({r["robust"] for r in rows}, reverse=True):
        for s in summarize_experiment([r for r in rows if r["robust"] == robust]):
            summary.append({"model": "iMDP" if robust else "MDP", **s})
            print(f"{summary[-1]['model']:>4} N={s['N']:>6}  guarantee={s['guarantee_mean']:.4f}  "
                  f"empirical={s['empirical_mean']:.4f}±{s['empirical_std']:.4f}  "
                  f"violations={s['violations']}/{s['repetitions']}")
    write_summary_csv(summary, out / "report.csv")
    files = ["runs.csv", "report.csv"]
    if args.trajectories > 0:
        N = args.samples[0]
        noise = _noise_with_seed(model.noise, args.seed)
        W = draw_abstraction_samples(noise, N, model.system, iteration=N)
        mdp = build_imdp(model.partition, actions, count_samples(model.partition, actions.targets, W),
                         interval_table(N, args.beta), model.spec)
        ctl = extract_controller(robust_value_iteration(mdp), actions, model.system,
                                 model.partition, mdp)
        rep = simulate(model.system, ctl, model.spec, noise, args.trajectories, args.seed,
                       record=True)
        rep.trajectories_to_csv(out / "trajectories.csv")
        files.append("trajectories.csv")
    manifest = {"command": "simulate", "model": model.name, "model_config": model.raw,
                "args": {k: v for k, v in vars(args).items() if k != "func"},
                "files": files, "versions": _versions()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return 0


def _cmd_table(args) -> int:
    table = IntervalTable.build(args.samples, args.beta)
    if args.out.endswith(".npz"):
        table.save(args.out)
    else:
        table.to_csv(args.out)
    print(f"wrote {args.samples + 1} intervals to {args.out}")
    return 0


def _cmd_export(args) -> int:
    model = _model(args)
    noise = _noise_with_seed(model.noise, args.seed)
    actions = enabled_actions(model.system, model.partition, threads=args.threads)
    W = draw_abstraction_samples(noise, args.samples, model.system)
    mdp = build_imdp(model.partition, actions,
                     count_samples(model.partition, actions.targets, W),
                     interval_table(args.samples, args.beta), model.spec)
    export_interchange(mdp, args.out)
    if args.summary:
        write_summary_csv([{"N": args.samples, **mdp.summary()}], args.summary)
    print(json.dumps(mdp.summary()))
    return 0


COMMANDS = {"synthesize": _cmd_synthesize, "simulate": _cmd_simulate, "table": _cmd_table,
            "export": _cmd_export}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
