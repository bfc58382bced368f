"""Experiment configurations and runners behind the ``scripsim`` CLI.

Every runner is a pure function of its :class:`ExperimentConfig`: replica
``r`` draws from ``replica_rng(seed, r)``, and each CSV starts with a
comment line carrying the config hash and seed, so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.stats import linregress

from .best_reply import best_reply_threshold, choice_probabilities
from .equilibrium import greatest_equilibrium
from .errors import SpecError
from .model import GameSpec, check_thresholds
from .scrip_chain import exact_stationary, initial_state, replica_rng, simulate, state_from_counts
from .scrip_chain.simulation import WealthState
from .wealth_entropy import (
    MoneyDistribution,
    distances,
    min_relent_distribution,
    realizable_counts,
    solve_lambda,
)

log = logging.getLogger(__name__)

MODES = ("simulate", "distribution", "best-reply", "equilibrium", "exact", "fig2", "fig3", "fig4")
STARTS = ("random", "nearest", "extreme")
METRICS = ("l2", "l2_squared")

_CONFIG_KEYS = {
    "spec", "thresholds", "rounds", "replicas", "observe_every", "n_values", "metric",
    "within", "rounds_per_agent", "start", "cap", "max_states", "workers",
}


class ConfigError(SpecError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    spec: GameSpec
    seed: int
    thresholds: tuple[int, ...] | None = None
    rounds: int = 1_000_000
    replicas: int = 1
    observe_every: int = 1
    n_values: tuple[int, ...] = ()
    metric: str = "l2_squared"
    within: float = 0.001
    rounds_per_agent: float = 6.0
    start: str = "random"
    cap: int | None = None
    max_states: int = 200_000
    workers: int = 1
    out_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.start not in STARTS:
            raise ConfigError(f"start must be one of {STARTS}")
        for name in ("rounds", "max_states"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("replicas", "observe_every", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.within <= 0 or self.rounds_per_agent <= 0:
            raise ConfigError("within and rounds_per_agent must be positive")
        if any(n < 1 for n in self.n_values):
            raise ConfigError("n_values must be positive")
        if self.thresholds is not None:
            check_thresholds(self.spec, self.thresholds, strict=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], mode: str, seed: int, out_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "spec" not in data:
            raise ConfigError("config needs a 'spec' object")
        try:
            spec = GameSpec.from_dict(data["spec"])
            kw = {}
            if data.get("thresholds") is not None:
                kw["thresholds"] = tuple(int(v) for v in data["thresholds"])
            for key in ("rounds", "replicas", "observe_every", "max_states", "workers"):
                if key in data:
                    kw[key] = _as_int(data[key], key)
            if data.get("cap") is not None:
                kw["cap"] = _as_int(data["cap"], "cap")
            if "n_values" in data:
                kw["n_values"] = tuple(_as_int(v, "n_values") for v in data["n_values"])
            for key in ("within", "rounds_per_agent"):
                if key in data:
                    kw[key] = float(data[key])
            for key in ("metric", "start"):
                if key in data:
                    kw[key] = str(data[key])
        except (TypeError, ValueError, KeyError) as e:
            if isinstance(e, SpecError):
                raise
            raise ConfigError(str(e)) from e
        return cls(mode=mode, spec=spec, seed=int(seed), out_dir=out_dir, **kw)

    def resolved(self) -> dict:
        """Every setting that influences outputs (the output directory does not)."""
        return {
            "mode": self.mode,
            "seed": self.seed,
            "spec": self.spec.to_dict(),
            "rho_rescale": self.spec.rho_scale,
            "thresholds": None if self.thresholds is None else list(self.thresholds),
            "rounds": self.rounds,
            "replicas": self.replicas,
            "observe_every": self.observe_every,
            "n_values": list(self.n_values),
            "metric": self.metric,
            "within": self.within,
            "rounds_per_agent": self.rounds_per_agent,
            "start": self.start,
            "cap": self.cap,
            "max_states": self.max_states,
        }

    def sha256(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def header(self) -> str:
        return f"# config_sha256={self.sha256()} seed={self.seed}\n"

    def k(self) -> tuple[int, ...]:
        if self.thresholds is None:
            raise ConfigError(f"mode {self.mode!r} needs 'thresholds'")
        return tuple(self.thresholds)


def _as_int(v, name: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(v)


def _csv(cfg: ExperimentConfig, header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(cfg.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    # results come back in submission order, so output is independent of scheduling
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- starting states -------------------------------------------------------


def extreme_state(spec: GameSpec, k: Sequence[int]) -> WealthState:
    """Agents hold either nothing or their full threshold, in agent order.

    For one type with ``k = 5`` and ``m = 2`` this is ``m h n / 5`` agents
    at 5 and the rest at 0.
    """
    k = check_thresholds(spec, k, strict=False)
    types = spec.agent_types()
    x = np.zeros(spec.num_agents, dtype=np.int64)
    left = spec.total_money
    for a, t in enumerate(types):
        if left <= 0:
            break
        if k[t] <= left:
            x[a] = k[t]
            left -= k[t]
    if left:
        raise ConfigError("money supply cannot be split into full-threshold holdings")
    return WealthState(spec, x)


def nearest_state(spec: GameSpec, k: Sequence[int]) -> WealthState:
    """Holdings whose empirical distribution is the nearest realizable ``d*``."""
    return state_from_counts(spec, realizable_counts(min_relent_distribution(spec, k), spec))


def start_state(cfg: ExperimentConfig, spec: GameSpec, k, rng) -> WealthState:
    if cfg.start == "extreme":
        return extreme_state(spec, k)
    if cfg.start == "nearest":
        return nearest_state(spec, k)
    return initial_state(spec, rng)


# --- modes -------------------------------------------------------------------


def _simulate_replica(args):
    cfg, r = args
    k = cfg.k()
    rng = replica_rng(cfg.seed, r)
    state = start_state(cfg, cfg.spec, k, rng)
    _, res = simulate(cfg.spec, k, cfg.rounds, rng, observe_every=cfg.observe_every, state=state)
    return res


def run_simulate(cfg: ExperimentConfig) -> dict[str, str]:
    """Trace per replica plus a JSON summary."""
    results = _map(_simulate_replica, [(cfg, r) for r in range(cfg.replicas)], cfg.workers)
    files = {}
    summary = []
    for r, res in enumerate(results):
        files[f"trace_{r}.csv"] = _csv(cfg, res.TRACE_COLUMNS, res.trace_csv_rows())
        summary.append({
            "replica": r,
            "rounds": res.rounds,
            "observations": res.observations,
            "max_distance_L2": res.max_l2,
            "max_distance_L2_squared": res.max_l2_squared,
            "mean_distance_L2": res.mean_l2,
            "mean_distance_L2_squared": res.mean_l2_squared,
            "final_excess": res.final_excess,
            "final_distribution": [list(map(float, v)) for v in res.final.values],
        })
    files["summary.json"] = _json(cfg, {"replicas": summary})
    return files


def run_distribution(cfg: ExperimentConfig) -> dict[str, str]:
    k = check_thresholds(cfg.spec, cfg.k(), strict=True)
    sol = solve_lambda(cfg.spec, k)
    d = min_relent_distribution(cfg.spec, k, sol)
    near = MoneyDistribution(tuple(c / cfg.spec.num_agents for c in realizable_counts(d, cfg.spec)))
    rows = [
        (t, i, _fmt(v), _fmt(near.values[t][i]))
        for t, vals in enumerate(d.values)
        for i, v in enumerate(vals)
    ]
    return {
        "distribution.csv": _csv(cfg, ("type_index", "dollars", "fraction", "nearest_realizable"), rows),
        "lambda.json": _json(cfg, {
            "lambda": sol.lam,
            "achieved_mean": sol.achieved_mean,
            "iterations": sol.iterations,
            "nearest_realizable_distance_L2": distances(near, d)[0],
        }),
    }


def run_best_reply(cfg: ExperimentConfig) -> dict[str, str]:
    k = check_thresholds(cfg.spec, cfg.k(), strict=True)
    sol = solve_lambda(cfg.spec, k)
    reports = [
        best_reply_threshold(cfg.spec, k, t, cfg.cap, probs=choice_probabilities(cfg.spec, k, t, sol)).to_dict()
        for t in range(cfg.spec.num_types)
    ]
    return {"best_reply.json": _json(cfg, {"thresholds": list(k), "reports": reports})}


def run_equilibrium(cfg: ExperimentConfig) -> dict[str, str]:
    res = greatest_equilibrium(cfg.spec, cfg.cap)
    trace = io.StringIO()
    trace.write(cfg.header())
    trace.write(res.trace_csv())
    return {"equilibrium.json": _json(cfg, res.to_dict()), "equilibrium_trace.csv": trace.getvalue()}


def run_exact(cfg: ExperimentConfig) -> dict[str, str]:
    res = exact_stationary(cfg.spec, cfg.k(), cfg.max_states)
    return {
        "exact_stationary.csv": cfg.header() + res.to_csv(),
        "exact_summary.json": _json(cfg, {
            "states": int(len(res.states)),
            "max_abs_diff": res.max_abs_diff,
            "detailed_balance_residual": res.detailed_balance_residual,
            "agrees": res.agrees,
        }),
    }


# --- figure reproductions ----------------------------------------------------


def _fig2_one(args):
    cfg, idx, n = args
    spec = cfg.spec.with_n(n)
    k = cfg.k()
    target = min_relent_distribution(spec, k)
    state = nearest_state(spec, k)
    _, res = simulate(spec, k, cfg.rounds, replica_rng(cfg.seed, idx), observe_every=cfg.observe_every,
                      state=state, target=target, keep_trace=False)
    return res


def run_fig2(cfg: ExperimentConfig) -> dict[str, str]:
    """Maximum distance to ``d*`` over ``rounds`` rounds from the nearest realizable start, per ``n``."""
    ns = cfg.n_values or (cfg.spec.n,)
    results = _map(_fig2_one, [(cfg, i, n) for i, n in enumerate(ns)], cfg.workers)
    rows = [
        (n, _fmt(r.max_l2), _fmt(r.max_l2_squared), _fmt(r.mean_l2), _fmt(r.mean_l2_squared), r.observations)
        for n, r in zip(ns, results)
    ]
    header = ("n", "max_L2_distance", "max_L2_squared_distance", "mean_L2_distance", "mean_L2_squared_distance", "observations")
    return {"fig2.csv": _csv(cfg, header, rows)}


def fig3_cadence(num_agents: int) -> int:
    """Rounds between fig3 snapshots: a twentieth of a round per agent."""
    return max(1, num_agents // 20)


def _fig3_one(args):
    cfg, r = args
    spec, k = cfg.spec, cfg.k()
    N = spec.num_agents
    target = min_relent_distribution(spec, k)
    rng = replica_rng(cfg.seed, r)
    state = extreme_state(spec, k) if cfg.start != "random" else initial_state(spec, rng)
    step_rounds = fig3_cadence(N)
    horizon = int(round(cfg.rounds_per_agent * N))
    snaps = []
    done = 0
    _, res = simulate(spec, k, 0, rng, state=state, target=target, keep_trace=False)
    snaps.append((0, res.final.flat()))
    while done < horizon:
        chunk = min(step_rounds, horizon - done)
        _, res = simulate(spec, k, chunk, rng, state=state, target=target, keep_trace=False)
        done += chunk
        snaps.append((done, res.final.flat()))
    return snaps


def fig3_curves(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snapshot rounds, per-replica flat distributions ``[replica, snapshot, level]`` and ``d*``."""
    runs = _map(_fig3_one, [(cfg, r) for r in range(cfg.replicas)], cfg.workers)
    rounds = np.array([r for r, _ in runs[0]])
    dists = np.array([[v for _, v in run] for run in runs])
    target = min_relent_distribution(cfg.spec, cfg.k()).flat()
    return rounds, dists, target


def run_fig3(cfg: ExperimentConfig) -> dict[str, str]:
    """Distance to ``d*`` over time from the extreme start, across replicas.

    Two summaries per snapshot: the distance of the replica-averaged
    distribution, and the average of the per-replica distances.
    """
    rounds, dists, target = fig3_curves(cfg)
    N = cfg.spec.num_agents
    sq_of_mean = np.sum((dists.mean(axis=0) - target) ** 2, axis=1)
    sq_each = np.sum((dists - target) ** 2, axis=2)
    rows = [
        (f"{r / N:.4f}", int(r), _fmt(math.sqrt(a)), _fmt(a), _fmt(np.sqrt(b).mean()), _fmt(b.mean()))
        for r, a, b in zip(rounds, sq_of_mean, sq_each.T)
    ]
    header = ("rounds_per_agent", "round", "avg_distribution_L2", "avg_distribution_L2_squared",
              "avg_distance_L2", "avg_distance_L2_squared")
    return {"fig3.csv": _csv(cfg, header, rows)}


def _fig4_one(args):
    cfg, n, r = args
    spec = cfg.spec.with_n(n)
    k = cfg.k()
    rng = replica_rng(cfg.seed, n * 1_000_003 + r)
    state = extreme_state(spec, k) if cfg.start != "random" else initial_state(spec, rng)
    horizon = int(round(cfg.rounds_per_agent * spec.num_agents))
    _, res = simulate(spec, k, horizon, rng, observe_every=1, state=state, within=cfg.within,
                      metric=cfg.metric, keep_trace=False, stop_when_within=True)
    return res.first_within


@dataclass
class Fig4Fit:
    slope: float
    slope_stderr: float
    intercept: float
    intercept_stderr: float
    points: int


def fit_rounds_vs_n(ns: Sequence[int], rounds: Sequence[int]) -> Fig4Fit:
    fit = linregress(np.asarray(ns, float), np.asarray(rounds, float))
    return Fig4Fit(float(fit.slope), float(fit.stderr), float(fit.intercept), float(fit.intercept_stderr), len(ns))


def fig4_samples(cfg: ExperimentConfig) -> list[tuple[int, int, int | None]]:
    ns = cfg.n_values or (1000, 2000, 3000, 4000, 5000)
    jobs = [(cfg, n, r) for n in ns for r in range(cfg.replicas)]
    hits = _map(_fig4_one, jobs, cfg.workers)
    return [(n, r, h) for (_, n, r), h in zip(jobs, hits)]


def run_fig4(cfg: ExperimentConfig) -> dict[str, str]:
    """Rounds until the distance first drops to ``within``, per ``n``, with a linear fit."""
    samples = fig4_samples(cfg)
    missing = [(n, r) for n, r, h in samples if h is None]
    if missing:
        log.warning("%d runs never got within %g", len(missing), cfg.within)
    ok = [(n, h) for n, _, h in samples if h is not None]
    fit = fit_rounds_vs_n(*zip(*ok)) if len({n for n, _ in ok}) >= 2 else None
    by_n: dict[int, list[int]] = {}
    for n, h in ok:
        by_n.setdefault(n, []).append(h)
    rows = [
        (n, _fmt(np.mean(v)), _fmt(np.std(v, ddof=1) / math.sqrt(len(v)) if len(v) > 1 else float("nan")), len(v))
        for n, v in sorted(by_n.items())
    ]
    runs = [(n, r, "" if h is None else h) for n, r, h in samples]
    summary = {"metric": cfg.metric, "within": cfg.within, "unreached": len(missing),
               "fit": None if fit is None else fit.__dict__}
    return {
        "fig4.csv": _csv(cfg, ("n", "rounds_to_within", "stderr", "runs"), rows),
        "fig4_runs.csv": _csv(cfg, ("n", "replica", "rounds_to_within"), runs),
        "fig4_fit.json": _json(cfg, summary),
    }


def _json(cfg: ExperimentConfig, payload: dict) -> str:
    doc = {"config_sha256": cfg.sha256(), "config": cfg.resolved(), **payload}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


RUNNERS: dict[str, Callable[[ExperimentConfig], dict[str, str]]] = {
    "simulate": run_simulate,
    "distribution": run_distribution,
    "best-reply": run_best_reply,
    "equilibrium": run_equilibrium,
    "exact": run_exact,
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
}


def run(cfg: ExperimentConfig) -> dict[str, str]:
    """Run ``cfg.mode`` and write its files into ``cfg.out_dir`` (if set)."""
    files = RUNNERS[cfg.mode](cfg)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
        for name, text in files.items():
            (out / name).write_text(text)
    return files
