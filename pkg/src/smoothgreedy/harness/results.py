"""CSV/JSON persistence of result sets and the summary schema."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from ..agents import RunTrace
from .experiment import ResultSet, mean_ci, summarize_regret

AGGREGATE_COLUMNS = ("t", "mean_cum_regret", "p05_cum_regret", "p50_cum_regret",
                     "p95_cum_regret", "mean_est_error")


def summary_schema() -> dict[str, Any]:
    text = resources.files("smoothgreedy").joinpath("schemas/summary.schema.json").read_text()
    return json.loads(text)


def _fmt(x) -> str:
    return "%.17g" % x


def _clean(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _dump_json(path: Path, obj) -> None:
    try:
        path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_trace_csv(trace: RunTrace, path) -> None:
    path = Path(path)
    rows = zip(range(1, trace.horizon + 1), trace.episode, trace.chosen_arm,
               trace.optimal_arm, trace.reward, trace.inst_regret, trace.cum_regret,
               trace.est_error)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RunTrace.COLUMNS)
            for t, e, c, o, r, ir, cr, ee in rows:
                w.writerow((t, int(e), int(c), int(o), _fmt(r), _fmt(ir), _fmt(cr), _fmt(ee)))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_trace_csv(path) -> RunTrace:
    """Inverse of :func:`write_trace_csv` (per-round columns only)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            body = list(reader)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if header != RunTrace.COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    cols = list(zip(*body)) if body else [()] * len(header)
    ints = {c: np.array([int(v) for v in col], dtype=np.int64)
            for c, col in zip(header, cols) if c in ("t", "episode", "chosen_arm", "optimal_arm")}
    flts = {c: np.array([float(v) for v in col], dtype=float)
            for c, col in zip(header, cols) if c not in ints}
    return RunTrace(
        chosen_arm=ints["chosen_arm"],
        optimal_arm=ints["optimal_arm"],
        reward=flts["reward"],
        inst_regret=flts["inst_regret"],
        cum_regret=flts["cum_regret"],
        episode=ints["episode"],
        est_error=flts["est_error"],
    )


def build_summary(rs: ResultSet) -> dict[str, Any]:
    agg = rs.aggregate
    echo = rs.config.echo()
    echo["resolved_t_min"] = {str(s): int(v) for s, v in rs.t_min.items()}
    echo["fit_window"] = list(agg["fit_window"])
    return _clean({
        "config_echo": echo,
        "slope": agg["slope"],
        "slope_ci": list(agg["slope_ci"]),
        "final_regret_mean": agg["final_regret_mean"],
        "final_regret_ci": list(agg["final_regret_ci"]),
        "fit_window": list(agg["fit_window"]),
        "seeds": list(rs.seeds),
        "t_min": {str(s): int(v) for s, v in rs.t_min.items()},
        "n_traces": len(rs.traces),
    })


def emit_results(rs: ResultSet, path, format: str = "csv") -> list[Path]:
    """Write ``trace_seed{n}.csv``, ``episodes_seed{n}.json``, ``aggregate.csv``,
    ``config.json`` and ``summary.json`` under ``path``; return the files written."""
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    if rs is None or not rs.traces:
        raise ValueError("empty result set: nothing to write")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    written: list[Path] = []
    for seed, tr in zip(rs.seeds, rs.traces):
        p = out / f"trace_seed{seed}.csv"
        write_trace_csv(tr, p)
        written.append(p)
        p = out / f"episodes_seed{seed}.json"
        _dump_json(p, {"seed": seed, "meta": tr.meta, "episodes": tr.episodes})
        written.append(p)

    agg = rs.aggregate
    p = out / "aggregate.csv"
    try:
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(AGGREGATE_COLUMNS)
            for t in range(len(agg["mean_cum_regret"])):
                w.writerow([t + 1] + [_fmt(agg[c][t]) for c in AGGREGATE_COLUMNS[1:]])
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc}") from exc
    written.append(p)

    summary = build_summary(rs)
    jsonschema.validate(summary, summary_schema())
    p = out / "config.json"
    _dump_json(p, summary["config_echo"])
    written.append(p)
    p = out / "summary.json"
    _dump_json(p, summary)
    written.append(p)
    return written


def summarize_dir(path, fit_window=None) -> dict[str, Any]:
    """Recompute the slope and final-regret summary from a results directory."""
    d = Path(path)
    if not d.is_dir():
        raise FileNotFoundError(f"results directory not found: {d}")
    files = sorted(d.glob("trace_seed*.csv"), key=lambda f: int(f.stem[len("trace_seed"):]))
    if not files:
        raise ValueError(f"{d}: no trace_seed*.csv files")
    traces = [read_trace_csv(f) for f in files]
    horizon = traces[0].horizon
    echo: dict[str, Any] = {}
    if (d / "config.json").is_file():
        echo = json.loads((d / "config.json").read_text())
    if fit_window is None:
        fit_window = echo.get("fit_window")
    if fit_window is None:
        fit_window = (min(64, horizon - 1), horizon)
    final = [tr.cum_regret[-1] for tr in traces]
    fm, fci = mean_ci(final)
    if len(traces) >= 5:
        fit = summarize_regret(traces, tuple(fit_window))
        slope, sci = fit.slope, fit.ci
    else:
        slope, sci = math.nan, (math.nan, math.nan)
    summary = _clean({
        "config_echo": echo,
        "slope": slope,
        "slope_ci": list(sci),
        "final_regret_mean": fm,
        "final_regret_ci": list(fci),
        "fit_window": list(fit_window),
        "seeds": [int(f.stem[len("trace_seed"):]) for f in files],
        "n_traces": len(traces),
    })
    jsonschema.validate(summary, summary_schema())
    return summary


__all__ = ["emit_results", "read_trace_csv", "write_trace_csv", "build_summary",
           "summarize_dir", "summary_schema"]
