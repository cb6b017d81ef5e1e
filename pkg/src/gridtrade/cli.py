"""Command-line entry point.

Subcommands: synth-data, simulate, train, evaluate, compare, report.
Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ALGORITHMS, ConfigError, ExperimentConfig, load_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridtrade",
        description="Cooperative P2P power trading simulator with an RL harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_algo=False):
        p.add_argument("--config", help="YAML experiment file (defaults apply without it)")
        p.add_argument("--seed", type=int, help="override the scenario/training seed")
        p.add_argument("--out", help="output directory")
        if needs_algo:
            p.add_argument("--algo", choices=sorted(ALGORITHMS),
                           help="algorithm name (overrides the config)")
            p.add_argument("--action-space", choices=("res", "ut_res"),
                           help="trade label set (default follows the algorithm name)")
            p.add_argument("--gcn", action="store_true", default=None,
                           help="enable the graph-convolutional state encoder")
            p.add_argument("--no-target-net", action="store_true",
                           help="share parameters between online and target nets")

    p = sub.add_parser("synth-data", help="write the synthetic generation and SMP CSVs")
    common(p)
    p.add_argument("--days", type=int, default=1, help="days of generation data")

    p = sub.add_parser("simulate", help="run the rule-based baseline and dump the trace")
    common(p)
    p.add_argument("--days", type=int, default=1, help="days to simulate")

    p = sub.add_parser("train", help="train one algorithm on one seed")
    common(p, needs_algo=True)
    p.add_argument("--epochs", type=int, help="override the training epoch count")

    p = sub.add_parser("evaluate", help="evaluate checkpoints from a training run")
    common(p, needs_algo=True)
    p.add_argument("--run-dir", required=True, help="directory holding agent checkpoints")

    p = sub.add_parser("compare", help="train all compare algorithms and tabulate savings")
    common(p)
    p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("report", help="render figures for a run directory")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--out", help="directory for the figures (default: run dir)")
    return parser


def _load_experiment(args) -> ExperimentConfig:
    exp = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        exp = dataclasses.replace(
            exp, scenario=dataclasses.replace(exp.scenario, seed=args.seed),
            training=dataclasses.replace(exp.training, seeds=(args.seed,)))
    if getattr(args, "algo", None):
        exp = dataclasses.replace(exp, algorithm=dataclasses.replace(
            exp.algorithm, name=args.algo, action_space=None))
    if getattr(args, "action_space", None):
        exp = dataclasses.replace(exp, algorithm=dataclasses.replace(
            exp.algorithm, action_space=args.action_space))
    if getattr(args, "gcn", None):
        exp = dataclasses.replace(exp, algorithm=dataclasses.replace(
            exp.algorithm, gcn=True))
    if getattr(args, "no_target_net", False):
        hp = dict(exp.algorithm.hyperparams)
        hp["target_sync"] = 0
        exp = dataclasses.replace(exp, algorithm=dataclasses.replace(
            exp.algorithm, hyperparams=hp))
    if getattr(args, "epochs", None):
        exp = dataclasses.replace(exp, training=dataclasses.replace(
            exp.training, epochs=args.epochs))
    if getattr(args, "out", None):
        exp = dataclasses.replace(exp, output_dir=args.out)
    exp.algorithm.build_hyperparams()  # validate early
    return exp


def _cmd_synth_data(args) -> int:
    import csv

    from .scenario import Scenario

    exp = _load_experiment(args)
    scenario = Scenario(exp.scenario)
    out = exp.output_dir
    os.makedirs(out, exist_ok=True)
    gen_path = os.path.join(out, "generation.csv")
    with open(gen_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["interval", "cluster_id", "wind_kw", "pv_kw"])
        for day in range(args.days):
            data = scenario.day(day)
            base = day * exp.scenario.horizon
            for c in range(exp.scenario.k):
                for n in range(exp.scenario.horizon):
                    writer.writerow([base + n, c, repr(data.wind_kw[c][n]),
                                     repr(data.pv_kw[c][n])])
    smp_path = os.path.join(out, "smp.csv")
    with open(smp_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour_of_year", "smp_usd_per_kwh"])
        for h, r in zip(scenario.tariff.smp_hours, scenario.tariff.smp_rates):
            writer.writerow([repr(float(h)), repr(float(r))])
    print(f"wrote {gen_path} and {smp_path}")
    return 0


def _cmd_simulate(args) -> int:
    import dataclasses as dc

    from .experiment import TRACE_HEADER, _write_csv, evaluate, write_manifest
    import time

    exp = _load_experiment(args)
    exp = dc.replace(exp, training=dc.replace(exp.training, eval_days=args.days))
    started = time.time()
    result = evaluate(exp, exp.scenario.seed, agents=None, record_trace=True)
    os.makedirs(exp.output_dir, exist_ok=True)
    trace_path = os.path.join(exp.output_dir, "step_trace.csv")
    _write_csv(trace_path, TRACE_HEADER, result["trace"])
    write_manifest(exp.output_dir, exp, exp.scenario.seed, started, [trace_path])
    total = sum(result["cost"])
    print(f"simulated {args.days} day(s); total baseline cost ${total:.2f}; "
          f"trace at {trace_path}")
    return 0


def _cmd_train(args) -> int:
    from .experiment import run_train

    exp = _load_experiment(args)
    seed = exp.training.seeds[0]
    result = run_train(exp, seed, exp.output_dir)
    print(f"trained {exp.algorithm.name} (seed {seed}); "
          f"final-epoch mean reward {result['final_epoch_reward']:.3f}; "
          f"artifacts in {result['out_dir']}")
    return 0


def _cmd_evaluate(args) -> int:
    from .experiment import _write_csv, evaluate, load_agents

    exp = _load_experiment(args)
    seed = exp.training.seeds[0]
    agents = load_agents(args.run_dir, exp, seed)
    result = evaluate(exp, seed, agents, record_trace=True)
    out = args.out or args.run_dir
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "evaluation.csv")
    _write_csv(path, ("cluster_id", "cost_usd", "baseline_cost_usd",
                      "consumption_kwh", "traded_kwh"),
               [(c, result["cost"][c], result["baseline_cost"][c],
                 result["consumption"][c], result["traded"][c])
                for c in range(exp.scenario.k)])
    print(f"evaluation written to {path}")
    return 0


def _cmd_compare(args) -> int:
    from .experiment import run_compare

    exp = _load_experiment(args)
    out = run_compare(exp, exp.output_dir, workers=args.workers)
    print(f"comparison table at {out['summary_path']}")
    for row in out["table"]:
        best = min((v, k) for k, v in row.items() if k.endswith("_cost_usd"))
        print(f"  cluster {row['cluster']}: baseline ${row['baseline_cost_usd']:.2f}, "
              f"best {best[1][:-9]} ${best[0]:.2f}")
    return 0


def _cmd_report(args) -> int:
    from .report import emit_report

    paths = emit_report(args.run_dir, args.out)
    for p in paths:
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "synth-data": _cmd_synth_data,
        "simulate": _cmd_simulate,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "compare": _cmd_compare,
        "report": _cmd_report,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures get a distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
