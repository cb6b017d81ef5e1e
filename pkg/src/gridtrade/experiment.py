"""Training/evaluation runs, the baseline comparison table, and run artifacts.

A run is fully determined by (config, seed): agent rngs derive from the seed,
the scenario from the scenario seed, so repeated runs write byte-identical
CSVs. Comparison fans (algorithm, seed) jobs out to worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .agents import DQNAgent, PPOAgent
from .config import ALGORITHMS, ConfigError, ExperimentConfig
from .env import ACTION_SPACES, TradingEnv
from .market import HOURS_PER_INTERVAL
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .scenario import Scenario, ScenarioConfig

TRACE_HEADER = ("interval", "cluster_id", "demand_kw", "res_kw", "ev_kw", "grid_kw",
                "p2p_buy_kwh", "p2p_sell_kwh", "cost_usd", "baseline_cost_usd", "reward")
ROUND_TRACE_HEADER = ("interval", "stage", "cluster_id", "message_type", "kwh", "usd")
CURVE_HEADER = ("epoch", "agent_id", "avg_reward", "epsilon", "loss")


def make_agents(exp: ExperimentConfig, seed: int):
    """One independent learner per cluster, or None for the rule-based baseline."""
    algo = exp.algorithm
    family = algo.family
    if family is None:
        return None
    hp = algo.build_hyperparams()
    k = exp.scenario.k
    state_dim = 2 * k + 2
    labels = ACTION_SPACES[algo.action_space]
    agents = []
    for cluster in range(k):
        rng = np.random.default_rng([seed, cluster, 7])
        if family == "ppo":
            agent = PPOAgent(state_dim, len(labels), hp, rng, gcn=algo.gcn, k=k)
        else:
            recurrent = {"dqn": None, "drqn": "lstm", "bi_drqn": "bilstm"}[family]
            agent = DQNAgent(state_dim, len(labels), hp, rng, recurrent=recurrent,
                             gcn=algo.gcn, k=k)
        agents.append(agent)
    return agents


def _scenario_for_seed(exp: ExperimentConfig, seed: int) -> Scenario:
    cfg = dataclasses.replace(exp.scenario, seed=seed)
    return Scenario(cfg)


def train(exp: ExperimentConfig, seed: int):
    """Train one algorithm on one seed; returns (agents, curve_rows, scenario)."""
    scenario = _scenario_for_seed(exp, seed)
    env = TradingEnv(scenario)
    agents = make_agents(exp, seed)
    labels = ACTION_SPACES[exp.algorithm.action_space]
    curve = []
    for epoch in range(exp.training.epochs):
        state = env.reset(epoch % exp.training.days_pool)
        if agents is not None:
            for agent in agents:
                agent.begin_episode()
        reward_sums = [0.0] * env.k
        losses = [[] for _ in range(env.k)]
        done = False
        while not done:
            if agents is None:
                acts = None
                step_labels = env.baseline_labels()
            else:
                acts = [agent.act(state) for agent in agents]
                step_labels = [labels[a] for a in acts]
            next_state, rewards, done, _ = env.step(step_labels)
            if agents is not None:
                for c, agent in enumerate(agents):
                    agent.observe(state, acts[c], rewards[c], next_state, done)
                    if agent.last_loss is not None:
                        losses[c].append(agent.last_loss)
            for c in range(env.k):
                reward_sums[c] += rewards[c]
            state = next_state
        for c in range(env.k):
            eps = float("nan")
            if agents is not None and agents[c].epsilon is not None:
                eps = agents[c].epsilon.value
            avg_loss = float(np.mean(losses[c])) if losses[c] else float("nan")
            curve.append((epoch, c, reward_sums[c] / env.horizon, eps, avg_loss))
        if agents is not None:
            for agent in agents:
                agent.end_episode()
                if agent.last_loss is not None and not np.isfinite(agent.last_loss):
                    raise RuntimeError(
                        f"non-finite loss for agent at epoch {epoch}; aborting run")
    return agents, curve, scenario


def evaluate(exp: ExperimentConfig, seed: int, agents=None, scenario: Scenario | None = None,
             record_trace: bool = False):
    """Greedy rollout over the evaluation days.

    Returns a dict with per-cluster totals: cost, baseline cost, consumption
    and traded energy, plus the step trace when requested.
    """
    scenario = scenario or _scenario_for_seed(exp, seed)
    env = TradingEnv(scenario, record_trace=record_trace)
    labels = ACTION_SPACES[exp.algorithm.action_space]
    k = env.k
    cost = [0.0] * k
    baseline_cost = [0.0] * k
    consumption = [0.0] * k
    traded = [0.0] * k
    trace: list[tuple] = []
    round_trace: list[tuple] = []
    for day in range(exp.training.eval_days):
        state = env.reset(day)
        if agents is not None:
            for agent in agents:
                agent.begin_episode()
        done = False
        while not done:
            if agents is None:
                step_labels = env.baseline_labels()
            else:
                step_labels = [labels[agent.act(state, greedy=True)] for agent in agents]
            n = env._n
            state, rewards, done, info = env.step(step_labels)
            for c in range(k):
                cost[c] += info["cost"][c]
                baseline_cost[c] += info["baseline_cost"][c]
                pw_cluster, _, _ = env._cluster_position(c, n)
                consumption[c] += pw_cluster * HOURS_PER_INTERVAL
        if record_trace:
            trace.extend(env.trace_rows)
            env.trace_rows.clear()
            round_trace.extend(env.round_trace_rows)
            env.round_trace_rows.clear()
    if record_trace:
        for row in trace:
            traded[row[1]] += row[6] + row[7]
    return {"cost": cost, "baseline_cost": baseline_cost, "consumption": consumption,
            "traded": traded, "trace": trace, "round_trace": round_trace}


# ---------------------------------------------------------------------------
# artifact emission


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_manifest(out_dir: str, exp: ExperimentConfig, seed, started: float,
                   files: list[str]) -> None:
    manifest = {
        "config_hash": exp.config_hash(),
        "seed": seed,
        "code_version": __version__,
        "started_unix": started,
        "finished_unix": time.time(),
        "files": sorted(files),
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    os.replace(tmp, os.path.join(out_dir, "manifest.json"))


def save_agents(out_dir: str, agents) -> list[str]:
    files = []
    for c, agent in enumerate(agents):
        named = {name: p.data for name, p in agent.named_parameters()}
        path = os.path.join(out_dir, f"agent_{c:02d}.ckpt")
        save_checkpoint(path, named)
        files.append(path)
    return files


def load_agents(out_dir: str, exp: ExperimentConfig, seed: int):
    agents = make_agents(exp, seed)
    if agents is None:
        return None
    for c, agent in enumerate(agents):
        stored = load_checkpoint(os.path.join(out_dir, f"agent_{c:02d}.ckpt"))
        for name, p in agent.named_parameters():
            if name not in stored:
                raise ConfigError(f"checkpoint missing parameter {name}")
            if stored[name].shape != p.data.shape:
                raise ConfigError(f"checkpoint shape mismatch for {name}")
            p.data = stored[name].copy()
    return agents


def _write_evaluation(out_dir: str, exp: ExperimentConfig, result: dict) -> str:
    path = os.path.join(out_dir, "evaluation.csv")
    _write_csv(path,
               ("cluster_id", "cost_usd", "baseline_cost_usd", "consumption_kwh",
                "traded_kwh"),
               [(c, result["cost"][c], result["baseline_cost"][c],
                 result["consumption"][c], result["traded"][c])
                for c in range(exp.scenario.k)])
    return path


def run_train(exp: ExperimentConfig, seed: int, out_dir: str) -> dict:
    """Full train-then-evaluate for one (algorithm, seed); writes artifacts.

    The rule-based baseline has nothing to train: it skips straight to the
    evaluation rollout and emits only the trace and evaluation files.
    """
    started = time.time()
    os.makedirs(out_dir, exist_ok=True)
    if exp.algorithm.family is None:
        agents, curve, scenario = None, [], None
    else:
        agents, curve, scenario = train(exp, seed)
    result = evaluate(exp, seed, agents, scenario, record_trace=True)

    files = []
    if agents is not None:
        curve_path = os.path.join(out_dir, "training_curve.csv")
        _write_csv(curve_path, CURVE_HEADER, curve)
        files.append(curve_path)
        files.extend(save_agents(out_dir, agents))
    trace_path = os.path.join(out_dir, "step_trace.csv")
    _write_csv(trace_path, TRACE_HEADER, result["trace"])
    files.append(trace_path)
    files.append(_write_evaluation(out_dir, exp, result))
    write_manifest(out_dir, exp, seed, started, files)

    final_epoch = exp.training.epochs - 1
    final_rewards = [r for (e, c, r, _, _) in curve if e == final_epoch]
    return {"algorithm": exp.algorithm.name, "seed": seed,
            "cost": result["cost"], "baseline_cost": result["baseline_cost"],
            "consumption": result["consumption"], "traded": result["traded"],
            "final_epoch_reward": float(np.mean(final_rewards)) if final_rewards
            else float("nan"),
            "out_dir": out_dir}


def saving_percent(baseline_cost: float, variant_cost: float) -> float:
    """Cost reduction relative to the baseline, in percent."""
    if baseline_cost == 0:
        raise ValueError("baseline cost must be nonzero")
    return (baseline_cost - variant_cost) / baseline_cost * 100.0


def _compare_job(payload) -> dict:
    exp_data, name, seed, out_root = payload
    exp = ExperimentConfig(**exp_data)
    exp = dataclasses.replace(exp, algorithm=dataclasses.replace(
        exp.algorithm, name=name,
        action_space=ALGORITHMS[name][1] if name != "baseline" else "res"))
    out_dir = os.path.join(out_root, f"{name}_seed{seed}")
    if name == "baseline":
        os.makedirs(out_dir, exist_ok=True)
        started = time.time()
        result = evaluate(exp, seed, agents=None, record_trace=True)
        trace_path = os.path.join(out_dir, "step_trace.csv")
        _write_csv(trace_path, TRACE_HEADER, result["trace"])
        write_manifest(out_dir, exp, seed, started, [trace_path])
        return {"algorithm": name, "seed": seed, "cost": result["cost"],
                "baseline_cost": result["baseline_cost"],
                "consumption": result["consumption"], "traded": result["traded"],
                "final_epoch_reward": float("nan"), "out_dir": out_dir}
    return run_train(exp, seed, out_dir)


def run_compare(exp: ExperimentConfig, out_root: str, workers: int | None = None) -> dict:
    """Train every compare algorithm on every seed and tabulate the savings."""
    os.makedirs(out_root, exist_ok=True)
    names = ("baseline",) + tuple(exp.compare_algorithms)
    seeds = exp.training.seeds
    exp_data = {f.name: getattr(exp, f.name) for f in dataclasses.fields(exp)}
    jobs = [(exp_data, name, seed, out_root) for name in names for seed in seeds]
    if workers is None:
        workers = exp.training.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_compare_job, jobs))
    else:
        results = [_compare_job(j) for j in jobs]

    by_algo: dict[str, list[dict]] = {}
    for res in results:
        by_algo.setdefault(res["algorithm"], []).append(res)

    k = exp.scenario.k
    mean_cost = {name: [float(np.mean([r["cost"][c] for r in by_algo[name]]))
                        for c in range(k)] for name in names}
    table_rows = []
    for c in range(k):
        base = mean_cost["baseline"][c]
        row = {"cluster": c + 1, "baseline_cost_usd": base}
        for name in exp.compare_algorithms:
            cost = mean_cost[name][c]
            row[f"{name}_cost_usd"] = cost
            row[f"{name}_saving_pct"] = saving_percent(base, cost)
        table_rows.append(row)

    header = list(table_rows[0].keys())
    summary_path = os.path.join(out_root, "comparison.csv")
    _write_csv(summary_path, header, [[row[h] for h in header] for row in table_rows])

    rewards_path = os.path.join(out_root, "final_rewards.csv")
    _write_csv(rewards_path, ("algorithm", "seed", "final_epoch_reward"),
               [(r["algorithm"], r["seed"], r["final_epoch_reward"])
                for r in results if r["algorithm"] != "baseline"])
    return {"results": results, "mean_cost": mean_cost, "table": table_rows,
            "summary_path": summary_path}
