"""Episodic greedy agents and the round loop that scores them.

Agents only ever see the constraint (a ``NormSpec`` whose radius is the
assumed-known ``R(theta*)``), the contexts of the current round and their
own rewards. Regret, optimal arms and estimation errors are computed by the
runner, which holds the ground truth.

Single-parameter schedule: episode 1 covers rounds 1-2, episode ``e >= 2``
covers rounds ``2^(e-1)+1 .. 2^e``; the estimate used during episode ``e+1``
is fitted on episode ``e``'s rows only.

Multi-parameter schedule: rounds ``1..T0`` are round-robin; at ``t = T0``
each arm is fitted on its ``T0/k`` rows, then each arm runs its own doubling
episodes ``T_{i,e} = 2 T_{i,e-1}`` counted in rounds where it was chosen.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .environments import (
    Environment,
    GroundTruth,
    History,
    Mode,
    generate_contexts,
    reward,
)
from .errors import ConfigError
from .estimator import DesignBlock, SolverConfig, estimate_parameter
from .norms import NormFamily, NormSpec


class Algo(str, enum.Enum):
    SINGLE = "single"
    MULTI = "multi"
    RANDOM = "random"
    ORACLE = "oracle_greedy"
    UNSTRUCTURED = "unstructured_greedy"


BASELINES = (Algo.RANDOM, Algo.ORACLE, Algo.UNSTRUCTURED)
UNSTRUCTURED_RADIUS_FACTOR = 10.0


def select_arm(estimates: np.ndarray, contexts: np.ndarray) -> int:
    """Greedy choice; ties go to the lowest index.

    ``estimates`` is ``(dim,)`` or ``(1, dim)`` for a shared parameter and
    ``(k, dim)`` for one parameter per arm.
    """
    est = np.atleast_2d(estimates)
    if est.shape[0] == 1:
        scores = contexts @ est[0]
    else:
        scores = np.einsum("ij,ij->i", contexts, est)
    return int(np.argmax(scores))


class _Buffer:
    """Growable design block."""

    def __init__(self, dim: int, cap: int = 16):
        self.Z = np.empty((cap, dim))
        self.y = np.empty(cap)
        self.n = 0

    def append(self, z, r):
        if self.n == self.Z.shape[0]:
            self.Z = np.concatenate([self.Z, np.empty_like(self.Z)])
            self.y = np.concatenate([self.y, np.empty_like(self.y)])
        self.Z[self.n] = z
        self.y[self.n] = r
        self.n += 1

    def block(self) -> DesignBlock:
        return DesignBlock(self.Z[: self.n].copy(), self.y[: self.n].copy())


def episode_end(e: int) -> int:
    """Last round of single-parameter episode ``e``."""
    return 2 if e == 1 else 2**e


class SingleGreedyAgent:
    """Structured greedy with one shared parameter.

    The first ``t_min`` rounds pick an arm uniformly at random; every row
    still lands in the current episode's buffer.
    """

    def __init__(
        self,
        spec: NormSpec,
        solver: SolverConfig | None = None,
        t_min: int = 0,
        rng: np.random.Generator | None = None,
        init_estimate=None,
    ):
        self.spec = spec
        self.solver = solver or SolverConfig()
        self.t_min = int(t_min)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.theta_hat = (
            np.zeros(spec.dim) if init_estimate is None
            else np.asarray(init_estimate, dtype=float).reshape(-1).copy()
        )
        # oracle-initialised debug mode: refits start from the current estimate
        self.warm_solver = init_estimate is not None
        self.episode = 1
        self.buffer = _Buffer(spec.dim)
        self.fits: list[dict[str, Any]] = []

    @property
    def estimates(self) -> np.ndarray:
        return self.theta_hat[None, :]

    def select(self, t: int, contexts: np.ndarray) -> int:
        if t <= self.t_min:
            return int(self.rng.integers(contexts.shape[0]))
        return select_arm(self.theta_hat, contexts)

    def observe(self, t: int, arm: int, z: np.ndarray, r: float) -> bool:
        """Record ``(z, r)``; returns True when the estimate was refreshed."""
        self.buffer.append(z, r)
        if t < episode_end(self.episode):
            return False
        res = estimate_parameter(self.buffer.block(), self.spec, self.solver,
                                 self.theta_hat if self.warm_solver else None)
        self.fits.append({
            "episode": self.episode,
            "length": self.buffer.n,
            "puffer_rank": res.puffer_rank,
            "iterations": res.iterations,
        })
        self.theta_hat = res.theta_hat
        self.episode += 1
        self.buffer = _Buffer(self.spec.dim)
        return True


class MultiGreedyAgent:
    """Per-arm parameters with a round-robin warm start of ``warm_start`` rounds."""

    def __init__(
        self,
        specs: list[NormSpec],
        warm_start: int,
        solver: SolverConfig | None = None,
        init_estimates=None,
    ):
        self.specs = list(specs)
        self.k = len(self.specs)
        if warm_start < self.k or warm_start % self.k:
            raise ConfigError(
                f"agent.warm_start: {warm_start} must be a positive multiple of k = {self.k}"
            )
        self.T0 = int(warm_start)
        self.solver = solver or SolverConfig()
        dim = self.specs[0].dim
        self.theta_hat = (
            np.zeros((self.k, dim)) if init_estimates is None
            else np.array(init_estimates, dtype=float).reshape(self.k, dim)
        )
        self.warm_solver = init_estimates is not None
        self.episode = [0] * self.k
        self.length = [self.T0 // self.k] * self.k  # T_{i, e_i}
        self.count = [0] * self.k  # t_i
        self.buffers = [_Buffer(dim) for _ in range(self.k)]
        self.fits: list[dict[str, Any]] = []

    @property
    def estimates(self) -> np.ndarray:
        return self.theta_hat

    def select(self, t: int, contexts: np.ndarray) -> int:
        if t <= self.T0:
            return (t - 1) % self.k
        return select_arm(self.theta_hat, contexts)

    def _fit(self, i: int):
        buf = self.buffers[i]
        res = estimate_parameter(buf.block(), self.specs[i], self.solver,
                                 self.theta_hat[i] if self.warm_solver else None)
        self.fits.append({
            "arm": i,
            "episode": self.episode[i],
            "length": buf.n,
            "puffer_rank": res.puffer_rank,
            "iterations": res.iterations,
        })
        self.theta_hat[i] = res.theta_hat
        self.buffers[i] = _Buffer(buf.Z.shape[1])

    def observe(self, t: int, arm: int, z: np.ndarray, r: float) -> bool:
        self.buffers[arm].append(z, r)
        if t < self.T0:
            return False
        if t == self.T0:
            for i in range(self.k):
                self._fit(i)
                self.episode[i] = 1
                self.length[i] = 2 * self.length[i]
            return True
        self.count[arm] += 1
        if self.count[arm] < self.length[arm]:
            return False
        self._fit(arm)
        self.episode[arm] += 1
        self.length[arm] *= 2
        self.count[arm] = 0
        return True


class RandomAgent:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.estimates = None
        self.fits: list[dict[str, Any]] = []

    def select(self, t, contexts):
        return int(self.rng.integers(contexts.shape[0]))

    def observe(self, t, arm, z, r):
        return False


class FixedGreedyAgent:
    """Greedy with a frozen parameter; with the truth it is the clairvoyant comparator."""

    def __init__(self, thetas):
        self.theta_hat = np.atleast_2d(np.asarray(thetas, dtype=float)).copy()
        self.fits: list[dict[str, Any]] = []

    @property
    def estimates(self):
        return self.theta_hat

    def select(self, t, contexts):
        return select_arm(self.theta_hat, contexts)

    def observe(self, t, arm, z, r):
        return False


# ---------------------------------------------------------------------------
# traces


@dataclass
class AgentConfig:
    algo: Algo = Algo.SINGLE
    t_min: int | str = 0
    warm_start: int = 0
    estimator: SolverConfig = field(default_factory=SolverConfig)
    oracle_init: bool = False

    def __post_init__(self):
        try:
            self.algo = Algo(self.algo)
        except ValueError:
            raise ConfigError(
                f"agent.algo: unknown value {self.algo!r}; expected one of "
                f"{[a.value for a in Algo]}"
            ) from None

    def to_json(self) -> dict[str, Any]:
        return {
            "algo": self.algo.value,
            "t_min": self.t_min,
            "warm_start": self.warm_start,
            "estimator": self.estimator.to_json(),
            "oracle_init": self.oracle_init,
        }


@dataclass
class RunTrace:
    """Per-round record of one run; arms and episodes are 0/1-based as noted.

    ``episode`` is the single-parameter episode index, or in multi mode the
    chosen arm's episode index (0 during warm start). ``est_error`` is the
    error of the estimate in force at that round (the max over arms in
    multi mode).
    """

    chosen_arm: np.ndarray
    optimal_arm: np.ndarray
    reward: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    episode: np.ndarray
    est_error: np.ndarray
    episodes: list[dict[str, Any]] = field(default_factory=list)
    contexts: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return int(self.chosen_arm.shape[0])

    COLUMNS = ("t", "episode", "chosen_arm", "optimal_arm", "reward",
               "inst_regret", "cum_regret", "est_error")


def _estimate_error(estimates, truth: GroundTruth) -> float:
    if estimates is None:
        return math.nan
    diff = np.atleast_2d(estimates) - truth.thetas
    return float(np.max(np.linalg.norm(diff, axis=1)))


def _play(env: Environment, truth: GroundTruth, agent, horizon: int,
          rngs: dict[str, np.random.Generator], store_contexts: bool,
          warm_start: int | None = None) -> RunTrace:
    if horizon < 1:
        raise ConfigError(f"horizon: must be >= 1, got {horizon}")
    k, p = env.k, env.p
    if truth.mode is Mode.MULTI and truth.n_params != k:
        raise ConfigError(f"truth has {truth.n_params} parameters but environment k = {k}")
    env.strategy.reset()
    history = History()
    multi = isinstance(agent, MultiGreedyAgent)

    chosen = np.empty(horizon, dtype=np.int64)
    optimal = np.empty(horizon, dtype=np.int64)
    rew = np.empty(horizon)
    inst = np.empty(horizon)
    ep = np.empty(horizon, dtype=np.int64)
    err = np.empty(horizon)
    ctx = np.empty((horizon, k, p)) if store_contexts else None

    # (arm, episode) -> rounds where arm was optimal but not chosen
    t_star: dict[tuple[int, int], int] = {}
    cur_err = _estimate_error(agent.estimates, truth)

    for t in range(1, horizon + 1):
        batch = generate_contexts(env, t, history, rngs["strategy"], rngs["perturbations"])
        x = batch.contexts
        arm = agent.select(t, x)
        r = reward(truth, arm, x[arm], env.noise, rngs["noise"], k=k)
        means = truth.expected_rewards(x)
        best = int(np.argmax(means))

        i = t - 1
        chosen[i], optimal[i], rew[i] = arm, best, r
        inst[i] = means[best] - means[arm]
        err[i] = cur_err
        if ctx is not None:
            ctx[i] = x
        if multi:
            ep[i] = agent.episode[arm]
            if t > agent.T0 and best != arm:
                key = (best, agent.episode[best])
                t_star[key] = t_star.get(key, 0) + 1
        else:
            ep[i] = getattr(agent, "episode", 0)

        n_fits = len(agent.fits)
        if agent.observe(t, arm, x[arm], r):
            cur_err = _estimate_error(agent.estimates, truth)
            est = np.atleast_2d(agent.estimates)
            for f in agent.fits[n_fits:]:
                j = f.get("arm", 0)
                f["est_error"] = float(np.linalg.norm(est[j] - truth.thetas[j]))

        history.batches.append(batch)
        history.arms.append(arm)
        history.rewards.append(r)
        if not env.rewards_only:
            history.estimates = agent.estimates

    episodes = _episode_table(agent, truth, t_star, horizon)
    return RunTrace(chosen, optimal, rew, inst, np.cumsum(inst), ep, err,
                    episodes, ctx)


def _episode_table(agent, truth, t_star, horizon) -> list[dict[str, Any]]:
    rows = []
    if isinstance(agent, SingleGreedyAgent):
        for f in agent.fits:
            rows.append(dict(f))
        if agent.buffer.n:
            rows.append({"episode": agent.episode, "length": agent.buffer.n,
                         "puffer_rank": None, "iterations": None, "est_error": None})
        return rows
    if isinstance(agent, MultiGreedyAgent):
        for f in agent.fits:
            i, e = f["arm"], f["episode"]
            rows.append({**f, "nominal_length": f["length"], "closed": True,
                         "t_star": t_star.get((i, e), 0)})
        for i in range(agent.k):
            if agent.episode[i] >= 1:
                e = agent.episode[i]
                rows.append({"arm": i, "episode": e, "length": agent.count[i],
                             "nominal_length": agent.length[i], "closed": False,
                             "t_star": t_star.get((i, e), 0),
                             "puffer_rank": None, "iterations": None,
                             "est_error": None})
        return rows
    return rows


def run_single(env: Environment, truth: GroundTruth, spec: NormSpec, cfg: AgentConfig,
               horizon: int, rngs: dict[str, np.random.Generator],
               store_contexts: bool = False) -> RunTrace:
    """Structured greedy with a shared parameter.

    ``spec`` carries the constraint handed to the agent; ``truth`` stays on
    this side of the loop and is used only for scoring.
    """
    if truth.mode is not Mode.SINGLE:
        raise ConfigError("truth.mode: run_single needs single-parameter truth")
    if not isinstance(cfg.t_min, int) or cfg.t_min < 0:
        raise ConfigError(f"agent.t_min: expected a resolved nonnegative int, got {cfg.t_min!r}")
    init = truth.thetas[0] if cfg.oracle_init else None
    agent = SingleGreedyAgent(spec, cfg.estimator, cfg.t_min, rngs["agent"], init)
    trace = _play(env, truth, agent, horizon, rngs, store_contexts)
    trace.meta.update({"algo": cfg.algo.value, "t_min": cfg.t_min})
    return trace


def run_multi(env: Environment, truth: GroundTruth, specs: list[NormSpec], cfg: AgentConfig,
              horizon: int, warm_start: int, rngs: dict[str, np.random.Generator],
              store_contexts: bool = False) -> RunTrace:
    if truth.mode is not Mode.MULTI:
        raise ConfigError("truth.mode: run_multi needs multi-parameter truth")
    if horizon <= warm_start:
        raise ConfigError(f"horizon: must exceed warm_start = {warm_start}")
    init = truth.thetas if cfg.oracle_init else None
    agent = MultiGreedyAgent(specs, warm_start, cfg.estimator, init)
    trace = _play(env, truth, agent, horizon, rngs, store_contexts)
    trace.meta.update({"algo": cfg.algo.value, "warm_start": warm_start})
    return trace


def unstructured_spec(truth: GroundTruth, i: int = 0) -> NormSpec:
    """L2 ball of radius ``10 ||theta*_i||_2``: the constraint never binds."""
    th = truth.thetas[i]
    return NormSpec(NormFamily.L2, (th.size,),
                    UNSTRUCTURED_RADIUS_FACTOR * float(np.linalg.norm(th)))


def run_baseline(kind: Algo | str, env: Environment, truth: GroundTruth, cfg: AgentConfig,
                 horizon: int, rngs: dict[str, np.random.Generator],
                 store_contexts: bool = False) -> RunTrace:
    kind = Algo(kind)
    if kind is Algo.RANDOM:
        trace = _play(env, truth, RandomAgent(rngs["agent"]), horizon, rngs, store_contexts)
    elif kind is Algo.ORACLE:
        trace = _play(env, truth, FixedGreedyAgent(truth.thetas), horizon, rngs, store_contexts)
    elif kind is Algo.UNSTRUCTURED:
        if truth.mode is Mode.SINGLE:
            return _retag(run_single(env, truth, unstructured_spec(truth), cfg, horizon, rngs,
                                     store_contexts), kind)
        specs = [unstructured_spec(truth, i) for i in range(truth.n_params)]
        return _retag(run_multi(env, truth, specs, cfg, horizon, cfg.warm_start, rngs,
                                store_contexts), kind)
    else:
        raise ConfigError(f"agent.algo: {kind.value!r} is not a baseline")
    trace.meta["algo"] = kind.value
    return trace


def _retag(trace: RunTrace, kind: Algo) -> RunTrace:
    trace.meta["algo"] = kind.value
    return trace
