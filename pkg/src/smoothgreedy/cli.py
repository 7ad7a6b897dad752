"""Command-line entry point: ``smoothgreedy run|diag|summarize``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import rng as rngmod
from .errors import ConfigError
from .norms import NormFamily, NormSpec, norm_value

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _params(text: str) -> dict:
    try:
        p = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params: not valid JSON ({exc})") from None
    if not isinstance(p, dict):
        raise ConfigError("--params: expected a JSON object")
    return p


def _need(p: dict, key: str):
    if key not in p:
        raise ConfigError(f"--params.{key}: required field missing")
    return p[key]


def _theta_and_spec(p: dict) -> tuple[np.ndarray, NormSpec]:
    """Structured parameter from ``theta_star`` or a canonical sparse/low-rank one."""
    try:
        family = NormFamily(p.get("family", "l1"))
    except ValueError:
        raise ConfigError(f"--params.family: {p.get('family')!r} is not one of "
                          f"{[f.value for f in NormFamily]}") from None
    if family is NormFamily.NUCLEAR:
        shape = tuple(_need(p, "shape"))
    else:
        shape = (int(_need(p, "p")),) if "theta_star" not in p else (len(p["theta_star"]),)
    dim = int(np.prod(shape))
    if "theta_star" in p:
        theta = np.asarray(p["theta_star"], dtype=float).reshape(-1)
    elif family is NormFamily.NUCLEAR:
        r = int(p.get("rank", 1))
        theta = np.zeros(shape)
        for j in range(r):
            theta[j, j] = 1.0 / np.sqrt(r)
        theta = theta.reshape(-1)
    else:
        s = int(p.get("s", 1))
        if not 1 <= s <= dim:
            raise ConfigError(f"--params.s: must lie in [1, {dim}]")
        theta = np.zeros(dim)
        theta[:s] = 1.0 / np.sqrt(s)
    spec = NormSpec(family, shape, 1.0)
    return theta, spec.with_radius(norm_value(spec, theta))


def _diag(kind: str, p: dict) -> dict:
    rng = rngmod.stream(int(p.get("seed", 0)), "diagnostics")
    if kind == "width":
        theta, spec = _theta_and_spec(p)
        est = dg.gaussian_width_mc(dg.error_set_sampler(spec, theta), spec.dim,
                                   int(p.get("n", 2000)), rng, int(p.get("directions", 2000)))
        return est.to_json()
    if kind == "margin":
        alpha = p.get("alpha")
        est = dg.margin_probability_mc(float(_need(p, "sigma")), float(_need(p, "r")),
                                       int(p.get("n", 10**6)), rng, alpha,
                                       p.get("method", "auto"))
        return est.to_json()
    if kind == "eigen":
        theta, spec = _theta_and_spec(p)
        if "Z" in p:
            Z = np.asarray(p["Z"], dtype=float)
        else:
            Z = float(p.get("sigma", 1.0)) * rng.standard_normal((int(_need(p, "T")), spec.dim))
        m = int(p.get("directions", 2000))
        reps = int(p.get("reps", 20))
        vals = []
        for _ in range(max(reps, 2)):
            D = dg.error_set_sampler(spec, theta)(m, rng)
            vals.append(dg.restricted_min_eigenvalue(Z, D))
        vals = np.asarray(vals)
        return dg.McEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)),
                             int(vals.size)).to_json()
    if kind == "argmaxvar":
        k = int(_need(p, "k"))
        est = dg.argmax_gaussian_variance_mc(k, float(p.get("sigma", 1.0)), p.get("shifts"),
                                             int(p.get("n", 10**6)), rng)
        return est.to_json()
    if kind == "tail":
        ok, est = dg.max_gaussian_tail_check(int(_need(p, "k")), float(p.get("sigma", 1.0)),
                                             float(_need(p, "delta")), int(p.get("n", 10**5)), rng)
        return {**est.to_json(), "holds": ok}
    raise ConfigError(f"diag: unknown estimator {kind!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smoothgreedy",
                                 description="Structured greedy contextual-bandit simulator.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, default=None,
                     help="output directory (default: output.path from the config)")
    run.add_argument("--parallel", type=int, default=1)

    diag = sub.add_parser("diag", help="Monte Carlo diagnostics")
    diag.add_argument("estimator", choices=["width", "margin", "eigen", "argmaxvar", "tail"])
    diag.add_argument("--params", default="{}", help="JSON object of estimator parameters")

    summ = sub.add_parser("summarize", help="recompute summary from a results directory")
    summ.add_argument("--in", dest="indir", required=True, type=Path)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            from .harness import emit_results, load_config, run_experiment

            cfg = load_config(args.config)
            if args.parallel < 1:
                raise ConfigError("--parallel: must be >= 1")
            out = args.out if args.out is not None else Path(cfg.output["path"])
            rs = run_experiment(cfg, parallel=args.parallel)
            emit_results(rs, out, cfg.output["format"])
            agg = rs.aggregate
            print(json.dumps({"out": str(out), "seeds": rs.seeds,
                              "final_regret_mean": agg["final_regret_mean"],
                              "slope": None if np.isnan(agg["slope"]) else agg["slope"]}))
        elif args.cmd == "diag":
            print(json.dumps(_diag(args.estimator, _params(args.params))))
        else:
            from .harness import summarize_dir

            print(json.dumps(summarize_dir(args.indir), indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures map to one exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
