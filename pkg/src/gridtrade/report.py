"""Plot and table emission from run directories."""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


class ReportError(RuntimeError):
    pass


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def _reward_curve_figure(curve_path: str, out_path: str) -> None:
    header, rows = _read_csv(curve_path)
    epochs: dict[int, list[float]] = {}
    for row in rows:
        epochs.setdefault(int(row[0]), []).append(float(row[2]))
    xs = sorted(epochs)
    ys = [sum(epochs[e]) / len(epochs[e]) for e in xs]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(xs, ys)
    ax.set_xlabel("training epoch")
    ax.set_ylabel("average reward")
    ax.set_title("Average reward per training epoch")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _grouped_bars(ax, clusters, series: dict[str, list[float]], ylabel: str) -> None:
    width = 0.8 / max(len(series), 1)
    for i, (name, values) in enumerate(series.items()):
        xs = [c + i * width for c in range(len(clusters))]
        ax.bar(xs, values, width=width, label=name)
    ax.set_xticks([c + 0.4 for c in range(len(clusters))])
    ax.set_xticklabels([str(c) for c in clusters])
    ax.set_xlabel("cluster")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7, ncol=3)


def _comparison_figures(comparison_path: str, run_dir: str, out_dir: str) -> list[str]:
    header, rows = _read_csv(comparison_path)
    clusters = [int(float(r[0])) for r in rows]
    col = {name: i for i, name in enumerate(header)}
    algos = sorted({name[:-9] for name in header if name.endswith("_cost_usd")
                    and name != "baseline_cost_usd"})
    emitted = []

    cost_series = {"baseline": [float(r[col["baseline_cost_usd"]]) for r in rows]}
    for algo in algos:
        cost_series[algo] = [float(r[col[f"{algo}_cost_usd"]]) for r in rows]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    _grouped_bars(ax, clusters, cost_series, "electricity cost (USD)")
    ax.set_title("Total cluster electricity cost")
    fig.tight_layout()
    path = os.path.join(out_dir, "cluster_costs.png")
    fig.savefig(path)
    plt.close(fig)
    emitted.append(path)

    # consumption and traded energy come from the per-run evaluation files
    consumption: dict[str, list[float]] = {}
    traded: dict[str, list[float]] = {}
    for entry in sorted(os.listdir(run_dir)):
        eval_path = os.path.join(run_dir, entry, "evaluation.csv")
        if not os.path.isfile(eval_path):
            continue
        algo = entry.rsplit("_seed", 1)[0]
        if algo in consumption:
            continue
        _, ev_rows = _read_csv(eval_path)
        consumption[algo] = [float(r[3]) for r in ev_rows]
        traded[algo] = [float(r[4]) for r in ev_rows]
    for series, fname, label, title in (
            (consumption, "cluster_consumption.png", "power consumption (kWh)",
             "Total cluster power consumption"),
            (traded, "cluster_traded.png", "traded energy (kWh)",
             "Traded power of nanogrid clusters")):
        if not series:
            continue
        fig, ax = plt.subplots(figsize=(9, 4.5))
        _grouped_bars(ax, clusters, series, label)
        ax.set_title(title)
        fig.tight_layout()
        path = os.path.join(out_dir, fname)
        fig.savefig(path)
        plt.close(fig)
        emitted.append(path)
    return emitted


def emit_report(run_dir: str, out_dir: str | None = None) -> list[str]:
    """Render the figures a run directory supports; errors name missing inputs.

    Training runs get a reward curve; comparison directories get grouped cost,
    consumption and traded-energy bars.
    """
    if not os.path.isdir(run_dir):
        raise ReportError(f"run directory not found: {run_dir}")
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    emitted = []

    curve = os.path.join(run_dir, "training_curve.csv")
    if os.path.isfile(curve):
        path = os.path.join(out_dir, "reward_curve.png")
        _reward_curve_figure(curve, path)
        emitted.append(path)

    comparison = os.path.join(run_dir, "comparison.csv")
    if os.path.isfile(comparison):
        emitted.extend(_comparison_figures(comparison, run_dir, out_dir))
        curves = {}
        for entry in sorted(os.listdir(run_dir)):
            cpath = os.path.join(run_dir, entry, "training_curve.csv")
            if os.path.isfile(cpath):
                algo = entry.rsplit("_seed", 1)[0]
                curves.setdefault(algo, cpath)
        if curves:
            fig, ax = plt.subplots(figsize=(8, 4.5))
            for algo, cpath in curves.items():
                _, rows = _read_csv(cpath)
                epochs: dict[int, list[float]] = {}
                for row in rows:
                    epochs.setdefault(int(row[0]), []).append(float(row[2]))
                xs = sorted(epochs)
                ax.plot(xs, [sum(epochs[e]) / len(epochs[e]) for e in xs], label=algo)
            ax.set_xlabel("training epoch")
            ax.set_ylabel("average reward")
            ax.set_title("Average rewards per training epoch")
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = os.path.join(out_dir, "reward_curves.png")
            fig.savefig(path)
            plt.close(fig)
            emitted.append(path)

    if not emitted:
        raise ReportError(
            f"{run_dir}: nothing to report; expected training_curve.csv (training run) "
            f"or comparison.csv (comparison run), or per-run step_trace.csv artifacts")
    return emitted
