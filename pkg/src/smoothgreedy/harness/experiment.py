"""Seeded, replicated execution and regret summaries."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .. import rng as rngmod
from ..agents import BASELINES, Algo, AgentConfig, RunTrace, run_baseline, run_multi, run_single
from ..diagnostics import auto_t_min
from ..environments import Mode
from .config import ExperimentConfig

MIN_FIT_START = 64
BOOTSTRAP_SAMPLES = 1000
BOOTSTRAP_SEED = 0


@dataclass
class SlopeFit:
    slope: float
    ci: tuple[float, float]
    window: tuple[int, int]


@dataclass
class ResultSet:
    config: ExperimentConfig
    seeds: list[int]
    traces: list[RunTrace]
    aggregate: dict[str, Any] = field(default_factory=dict)
    t_min: dict[int, int] = field(default_factory=dict)

    def trace_for(self, seed: int) -> RunTrace:
        return self.traces[self.seeds.index(seed)]


def run_seed(config: ExperimentConfig, seed: int) -> RunTrace:
    """One replicate. Truth, t_min and every random draw derive from ``seed``."""
    rngs = rngmod.streams(seed)
    truth = config.truth.generate(rngs["truth"])
    env = config.make_environment()
    base = config.agent
    t_min = base.t_min
    if t_min == "auto":
        if truth.mode is Mode.SINGLE and base.algo in (Algo.SINGLE, Algo.UNSTRUCTURED):
            t_min, _ = auto_t_min(truth.specs[0], truth.thetas[0], config.horizon,
                                  rngs["diagnostics"])
        else:
            t_min = 0
    cfg = AgentConfig(base.algo, int(t_min), base.warm_start, base.estimator, base.oracle_init)

    if cfg.algo is Algo.SINGLE:
        trace = run_single(env, truth, truth.specs[0], cfg, config.horizon, rngs,
                           config.store_contexts)
    elif cfg.algo is Algo.MULTI:
        trace = run_multi(env, truth, truth.specs, cfg, config.horizon, cfg.warm_start, rngs,
                          config.store_contexts)
    else:
        assert cfg.algo in BASELINES
        trace = run_baseline(cfg.algo, env, truth, cfg, config.horizon, rngs,
                             config.store_contexts)
    trace.meta.update({"seed": seed, "t_min": int(t_min), "theta_star": truth.thetas.tolist()})
    return trace


def default_fit_window(config: ExperimentConfig, t_min: int) -> tuple[int, int]:
    """``[lo, T]`` with ``lo`` past the random/round-robin prefix and at least 64."""
    lo = max(t_min + 1, config.agent.warm_start + 1, MIN_FIT_START)
    lo = min(lo, config.horizon - 1)
    return (max(lo, 1), config.horizon)


def run_experiment(config: ExperimentConfig, parallel: int = 1) -> ResultSet:
    """Run every seed; any scheduling gives the same per-seed traces.

    Traces are ordered by seed value before aggregation, so permuting the
    seed list leaves the aggregates bit-identical.
    """
    seeds = sorted(config.seeds)
    traces: list[RunTrace] = []
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(run_seed, config, s) for s in seeds]
            for s, fut in zip(seeds, futures):
                try:
                    traces.append(fut.result())
                except Exception as exc:
                    raise RuntimeError(f"seed {s}: {type(exc).__name__}: {exc}") from exc
    else:
        for s in seeds:
            try:
                traces.append(run_seed(config, s))
            except Exception as exc:
                raise RuntimeError(f"seed {s}: {type(exc).__name__}: {exc}") from exc
    rs = ResultSet(config, seeds, traces, t_min={s: tr.meta["t_min"] for s, tr in zip(seeds, traces)})
    rs.aggregate = aggregate(rs)
    return rs


def mean_ci(x: Sequence[float], level: float = 0.95) -> tuple[float, tuple[float, float]]:
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    if x.size < 2:
        return m, (math.nan, math.nan)
    h = float(stats.t.ppf(0.5 + level / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return m, (m - h, m + h)


def aggregate(rs: ResultSet) -> dict[str, Any]:
    cum = np.stack([tr.cum_regret for tr in rs.traces])
    err = np.stack([tr.est_error for tr in rs.traces])
    t_min = max(rs.t_min.values()) if rs.t_min else 0
    window = rs.config.fit_window or default_fit_window(rs.config, t_min)
    final_mean, final_ci = mean_ci(cum[:, -1])
    out = {
        "mean_cum_regret": cum.mean(axis=0),
        "p05_cum_regret": np.percentile(cum, 5, axis=0),
        "p50_cum_regret": np.percentile(cum, 50, axis=0),
        "p95_cum_regret": np.percentile(cum, 95, axis=0),
        "mean_est_error": err.mean(axis=0),
        "final_regret_mean": final_mean,
        "final_regret_ci": final_ci,
        "fit_window": window,
    }
    if len(rs.traces) >= 5:
        fit = summarize_regret(rs.traces, window)
        out["slope"], out["slope_ci"] = fit.slope, fit.ci
    else:
        out["slope"], out["slope_ci"] = math.nan, (math.nan, math.nan)
    return out


def _loglog_slope(curve: np.ndarray, lo: int, hi: int) -> float:
    t = np.arange(lo, hi + 1, dtype=float)
    y = curve[lo - 1: hi]
    ok = y > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(t[ok]), np.log(y[ok]), 1)[0])


def summarize_regret(traces, fit_window: tuple[int, int],
                     n_boot: int = BOOTSTRAP_SAMPLES, seed: int = BOOTSTRAP_SEED) -> SlopeFit:
    """OLS slope of ``log(mean cumulative regret)`` on ``log t`` for ``t`` in
    ``[lo, hi]`` (1-based, inclusive), with a 90% seed-bootstrap interval.

    ``traces`` may be RunTrace objects or raw cumulative-regret arrays.
    Curves that are zero everywhere in the window yield ``nan``.
    """
    curves = np.stack([tr.cum_regret if isinstance(tr, RunTrace) else np.asarray(tr, float)
                       for tr in traces])
    if curves.shape[0] < 5:
        raise ValueError("summarize_regret needs at least 5 traces")
    lo, hi = int(fit_window[0]), int(fit_window[1])
    if not 1 <= lo < hi <= curves.shape[1]:
        raise ValueError(f"fit window {fit_window} outside [1, {curves.shape[1]}]")
    slope = _loglog_slope(curves.mean(axis=0), lo, hi)
    if math.isnan(slope):
        return SlopeFit(math.nan, (math.nan, math.nan), (lo, hi))
    rng = np.random.default_rng(seed)
    n = curves.shape[0]
    boots = np.array([
        _loglog_slope(curves[rng.integers(0, n, n)].mean(axis=0), lo, hi)
        for _ in range(n_boot)
    ])
    boots = boots[~np.isnan(boots)]
    ci = (float(np.percentile(boots, 5)), float(np.percentile(boots, 95)))
    return SlopeFit(slope, ci, (lo, hi))
