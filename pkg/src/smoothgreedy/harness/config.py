"""Experiment configuration: loading, validation, defaults and echo."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..agents import Algo, AgentConfig
from ..environments import (
    EnvKind,
    Environment,
    GroundTruth,
    Mode,
    NoiseFamily,
    NoiseModel,
    make_strategy,
)
from ..errors import ConfigError
from ..estimator import SolverConfig
from ..norms import NormFamily

SEEDS_ENV_VAR = "SMOOTHGREEDY_SEEDS"

DEFAULTS: dict[str, Any] = {
    "environment": {
        "kind": "gaussian",
        "k": None,
        "p": None,
        "sigma": 0.3,
        "strategy": {"name": "zero"},
        "noise": {"family": "gaussian", "kappa": 1.0},
        "rewards_only": False,
    },
    "agent": {
        "algo": "single",
        "t_min": "auto",
        "warm_start": 0,
        "oracle_init": False,
        "estimator": {"max_iters": 2000, "tol": 1e-9, "sv_tol": 1e-10, "puffer": True},
    },
    "truth": {
        "mode": "single",
        "structure": "sparse",
        "norm": "l1",
        "s": 1,
        "rank": 1,
        "shape": None,
    },
    "seeds": [0],
    "output": {"path": "results", "format": "csv"},
    "store_contexts": False,
    "fit_window": None,
}

STRUCTURES = ("sparse", "lowrank", "dense")


def _enum(value, enum_cls, where: str):
    try:
        return enum_cls(value)
    except ValueError:
        raise ConfigError(
            f"{where}: {value!r} is not one of {[e.value for e in enum_cls]}"
        ) from None


def _int(obj, key, where, minimum=None):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}, got {v}")
    return v


def _num(obj, key, where, minimum=None):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}, got {v}")
    return float(v)


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if key not in defaults and where:
            raise ConfigError(f"{where}.{key}: unknown field")
        if isinstance(defaults.get(key), dict) and isinstance(val, dict) and key != "strategy":
            out[key] = _merge(defaults[key], val, f"{where}.{key}" if where else key)
        else:
            out[key] = val
    return out


@dataclass
class TruthConfig:
    mode: Mode
    structure: str
    norm: NormFamily
    p: int
    k: int
    s: int = 1
    rank: int = 1
    shape: tuple[int, ...] | None = None

    @property
    def param_shape(self) -> tuple[int, ...]:
        """Shape of the constraint: ``(m, q)`` for nuclear, else ``(p,)``."""
        if self.norm is NormFamily.NUCLEAR:
            return self.shape
        return (self.p,)

    def generate(self, rng: np.random.Generator) -> GroundTruth:
        """Draw ``theta*`` (one per arm in multi mode), each with unit l2 norm.

        sparse: ``s`` random coordinates set to ``+-1/sqrt(s)``; lowrank: a
        normalised product of Gaussian ``m x rank`` and ``rank x q`` factors;
        dense: a uniform unit vector.
        """
        n = 1 if self.mode is Mode.SINGLE else self.k
        thetas = np.zeros((n, self.p))
        for i in range(n):
            if self.structure == "sparse":
                idx = rng.choice(self.p, self.s, replace=False)
                thetas[i, idx] = rng.choice([-1.0, 1.0], self.s) / np.sqrt(self.s)
            elif self.structure == "lowrank":
                m, q = self.shape if self.shape is not None else (self.p, 1)
                th = rng.standard_normal((m, self.rank)) @ rng.standard_normal((self.rank, q))
                thetas[i] = th.reshape(-1) / np.linalg.norm(th)
            else:
                g = rng.standard_normal(self.p)
                thetas[i] = g / np.linalg.norm(g)
        return GroundTruth.from_thetas(self.mode, thetas, self.norm, self.param_shape)


@dataclass
class ExperimentConfig:
    environment: dict[str, Any]
    agent: AgentConfig
    truth: TruthConfig
    horizon: int
    seeds: list[int]
    output: dict[str, Any] = field(default_factory=lambda: {"path": "results", "format": "csv"})
    store_contexts: bool = False
    fit_window: tuple[int, int] | None = None
    raw: dict[str, Any] = field(default_factory=dict)

    def make_environment(self) -> Environment:
        env = self.environment
        return Environment(
            kind=EnvKind(env["kind"]),
            k=env["k"],
            p=env["p"],
            sigma=env["sigma"],
            strategy=make_strategy(env["strategy"]),
            noise=NoiseModel(env["noise"]["family"], env["noise"]["kappa"]),
            rewards_only=env["rewards_only"],
        )

    def echo(self) -> dict[str, Any]:
        """The fully-defaulted configuration, as JSON."""
        out = copy.deepcopy(self.raw)
        out["seeds"] = list(self.seeds)
        return out


def validate(obj: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config: top level must be a JSON object")
    for key in ("environment", "horizon"):
        if key not in obj:
            raise ConfigError(f"{key}: required field missing")
    top_known = set(DEFAULTS) | {"horizon"}
    for key in obj:
        if key not in top_known:
            raise ConfigError(f"{key}: unknown field")
    cfg = _merge({**DEFAULTS, "horizon": None}, obj, "")

    env = cfg["environment"]
    _enum(env["kind"], EnvKind, "environment.kind")
    k = _int(env, "k", "environment", 1)
    p = _int(env, "p", "environment", 1)
    _num(env, "sigma", "environment", 0.0)
    if not isinstance(env["noise"], dict):
        raise ConfigError("environment.noise: expected an object")
    _enum(env["noise"].get("family"), NoiseFamily, "environment.noise.family")
    _num(env["noise"], "kappa", "environment.noise", 0.0)
    make_strategy(env["strategy"])  # raises ConfigError on unknown names

    ag = cfg["agent"]
    algo = _enum(ag["algo"], Algo, "agent.algo")
    t_min = ag["t_min"]
    if t_min != "auto":
        _int(ag, "t_min", "agent", 0)
    warm = _int(ag, "warm_start", "agent", 0)
    est = ag["estimator"]
    try:
        solver = SolverConfig(
            max_iters=_int(est, "max_iters", "agent.estimator", 1),
            tol=_num(est, "tol", "agent.estimator"),
            sv_tol=_num(est, "sv_tol", "agent.estimator"),
            puffer=bool(est["puffer"]),
        )
    except ValueError as exc:
        raise ConfigError(f"agent.estimator: {exc}") from None

    tr = cfg["truth"]
    mode = _enum(tr["mode"], Mode, "truth.mode")
    norm = _enum(tr["norm"], NormFamily, "truth.norm")
    if tr["structure"] not in STRUCTURES:
        raise ConfigError(f"truth.structure: {tr['structure']!r} is not one of {list(STRUCTURES)}")
    s = _int(tr, "s", "truth", 1)
    rank = _int(tr, "rank", "truth", 1)
    if s > p:
        raise ConfigError(f"truth.s: sparsity {s} exceeds environment.p = {p}")
    shape = tr["shape"]
    if norm is NormFamily.NUCLEAR or tr["structure"] == "lowrank":
        if not (isinstance(shape, list) and len(shape) == 2):
            raise ConfigError("truth.shape: nuclear/lowrank truth needs shape [m, q]")
        if shape[0] * shape[1] != p:
            raise ConfigError(f"truth.shape: {shape} has {shape[0] * shape[1]} entries "
                              f"but environment.p = {p}")
        if rank > min(shape):
            raise ConfigError(f"truth.rank: {rank} exceeds min(shape) = {min(shape)}")
    elif shape is not None:
        if shape != [p]:
            raise ConfigError(f"truth.shape: {shape} disagrees with environment.p = {p}")
    shape_t = tuple(shape) if isinstance(shape, list) and len(shape) == 2 else None

    multi_algo = algo is Algo.MULTI
    if multi_algo and mode is not Mode.MULTI:
        raise ConfigError("truth.mode: algo 'multi' needs multi-parameter truth")
    if algo is Algo.SINGLE and mode is not Mode.SINGLE:
        raise ConfigError("truth.mode: algo 'single' needs single-parameter truth")

    horizon = _int(cfg, "horizon", "", 1) if isinstance(cfg["horizon"], int) else None
    if horizon is None:
        raise ConfigError(f"horizon: expected a positive integer, got {cfg['horizon']!r}")

    if mode is Mode.MULTI and algo in (Algo.MULTI, Algo.UNSTRUCTURED):
        if warm < k or warm % k:
            raise ConfigError(
                f"agent.warm_start: {warm} must be a positive multiple of environment.k = {k}"
            )
        if horizon <= warm:
            raise ConfigError(f"horizon: {horizon} must exceed agent.warm_start = {warm}")

    seeds = cfg["seeds"]
    if (not isinstance(seeds, list) or not seeds
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in seeds)):
        raise ConfigError("seeds: expected a nonempty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds: entries must be distinct")

    out = cfg["output"]
    if out.get("format") != "csv":
        raise ConfigError(f"output.format: only 'csv' is supported, got {out.get('format')!r}")

    fw = cfg["fit_window"]
    if fw is not None:
        if not (isinstance(fw, list) and len(fw) == 2 and all(isinstance(v, int) for v in fw)
                and 1 <= fw[0] < fw[1] <= horizon):
            raise ConfigError(f"fit_window: expected [lo, hi] with 1 <= lo < hi <= horizon, got {fw}")

    agent = AgentConfig(algo, t_min, warm, solver, bool(ag["oracle_init"]))
    truth = TruthConfig(mode, tr["structure"], norm, p, k, s, rank, shape_t)
    return ExperimentConfig(
        environment=env,
        agent=agent,
        truth=truth,
        horizon=horizon,
        seeds=list(seeds),
        output=out,
        store_contexts=bool(cfg["store_contexts"]),
        fit_window=tuple(fw) if fw else None,
        raw=cfg,
    )


def parse_seed_list(text: str) -> list[int]:
    """``"1,2,5"`` or ``"0:30"`` (half-open range)."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return list(range(int(lo), int(hi)))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{SEEDS_ENV_VAR}: cannot parse seed list {text!r}") from None


def load_config(path, seeds_override: str | None = None) -> ExperimentConfig:
    """Read, default and validate a JSON experiment file.

    ``seeds_override`` (or the ``SMOOTHGREEDY_SEEDS`` environment variable)
    replaces the seed list.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from None
    override = seeds_override if seeds_override is not None else os.environ.get(SEEDS_ENV_VAR)
    if override:
        obj["seeds"] = parse_seed_list(override)
    return validate(obj)
