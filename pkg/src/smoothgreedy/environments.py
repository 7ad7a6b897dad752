"""Context and reward generation.

Contexts are ``x_i = mu_i + g_i`` with ``||mu_i||_2 <= 1`` and
``g_i ~ N(0, sigma^2 I)``. In the Gaussian environment the means are zero;
in the smoothed environment an adversary strategy picks the means from the
history, they are radially clipped into the unit ball, and fresh
perturbations are then drawn from their own stream.

Arms are 0-based throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, DimensionError, DomainError
from .norms import NormSpec, norm_value


class Mode(str, enum.Enum):
    SINGLE = "single"
    MULTI = "multi"


@dataclass
class GroundTruth:
    """True parameter(s) and the constraint each one induces.

    ``thetas`` has shape ``(1, dim)`` in single mode and ``(k, dim)`` in
    multi mode; ``specs[i]`` has radius ``R(thetas[i])``.
    """

    mode: Mode
    thetas: np.ndarray
    specs: list[NormSpec]

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        if self.mode is Mode.SINGLE and self.thetas.shape[0] != 1:
            raise DimensionError("single mode takes exactly one parameter vector")
        if len(self.specs) != self.thetas.shape[0]:
            raise DimensionError("need one NormSpec per parameter vector")
        for th, sp in zip(self.thetas, self.specs):
            r = norm_value(sp, th)
            if abs(r - sp.radius) > 1e-9 * max(1.0, sp.radius):
                raise DomainError(f"spec radius {sp.radius} != R(theta*) = {r}")

    @classmethod
    def from_thetas(cls, mode, thetas, family, shape=None) -> "GroundTruth":
        """Build truth with each radius set to ``R(theta*_i)``."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        shape = tuple(shape) if shape is not None else (thetas.shape[1],)
        base = NormSpec(family, shape, 0.0)
        specs = [base.with_radius(norm_value(base, th)) for th in thetas]
        return cls(mode, thetas, specs)

    @property
    def n_params(self) -> int:
        return self.thetas.shape[0]

    def theta_for(self, arm: int) -> np.ndarray:
        return self.thetas[0] if self.mode is Mode.SINGLE else self.thetas[arm]

    def expected_rewards(self, contexts: np.ndarray) -> np.ndarray:
        """``<x_i, theta*_i>`` for every arm of one round."""
        if self.mode is Mode.SINGLE:
            return contexts @ self.thetas[0]
        return np.einsum("ij,ij->i", contexts, self.thetas)


@dataclass
class ContextBatch:
    mus: np.ndarray
    perturbations: np.ndarray
    sigma: float

    @property
    def contexts(self) -> np.ndarray:
        return self.mus + self.perturbations

    @property
    def k(self) -> int:
        return self.mus.shape[0]


class NoiseFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean reward noise with scale ``kappa``.

    The uniform family is ``U[-kappa*sqrt(3), kappa*sqrt(3)]``, which has
    variance ``kappa^2``. ``kappa = 0`` gives noiseless rewards.
    """

    family: NoiseFamily = NoiseFamily.GAUSSIAN
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise DomainError(f"noise kappa must be finite and >= 0, got {self.kappa}")

    def sample(self, rng: np.random.Generator, size=None):
        if self.family is NoiseFamily.GAUSSIAN:
            return self.kappa * rng.standard_normal(size)
        h = self.kappa * math.sqrt(3.0)
        return rng.uniform(-h, h, size)

    def to_json(self) -> dict:
        return {"family": self.family.value, "kappa": self.kappa}


# ---------------------------------------------------------------------------
# adversary


@dataclass
class History:
    """What an adaptive adversary may look at before choosing means.

    ``estimates`` holds the agent's current estimate(s) as a ``(n, dim)``
    array and stays ``None`` when the adversary is restricted to rewards.
    """

    batches: list[ContextBatch] = field(default_factory=list)
    arms: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    estimates: np.ndarray | None = None


def clip_to_unit_ball(mus: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(mus, axis=1, keepdims=True)
    return np.where(nrm > 1.0, mus / np.where(nrm > 0, nrm, 1.0), mus)


class Strategy:
    name = "base"
    needs_estimates = False

    def means(self, history: History, k: int, p: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def reset(self) -> None:
        """Forget per-run state; called at the start of every run."""

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name}


class Zero(Strategy):
    name = "zero"

    def means(self, history, k, p, rng):
        return np.zeros((k, p))


class Constant(Strategy):
    name = "constant"

    def __init__(self, v):
        self.v = np.asarray(v, dtype=float)

    def means(self, history, k, p, rng):
        if self.v.shape != (p,):
            raise DimensionError(f"constant mean has shape {self.v.shape}, expected ({p},)")
        return np.tile(self.v, (k, 1))

    def to_json(self):
        return {"name": self.name, "v": self.v.tolist()}


class EqualMeans(Strategy):
    """Every arm gets the same mean: a unit direction drawn once per run."""

    name = "equal_means"

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self._dir: np.ndarray | None = None

    def reset(self):
        self._dir = None

    def means(self, history, k, p, rng):
        if self._dir is None:
            d = rng.standard_normal(p)
            self._dir = self.scale * d / np.linalg.norm(d)
        return np.tile(self._dir, (k, 1))

    def to_json(self):
        return {"name": self.name, "scale": self.scale}


class AlignEstimate(Strategy):
    """``mu_i = theta_hat_i / ||theta_hat_i||``, or 0 while the estimate is 0."""

    name = "align_estimate"
    needs_estimates = True
    sign = 1.0

    def means(self, history, k, p, rng):
        est = history.estimates
        if est is None:
            return np.zeros((k, p))
        est = np.atleast_2d(est)
        if est.shape[0] == 1:
            est = np.repeat(est, k, axis=0)
        nrm = np.linalg.norm(est, axis=1, keepdims=True)
        out = np.divide(est, nrm, out=np.zeros_like(est), where=nrm > 0)
        return self.sign * out


class AntiAlignEstimate(AlignEstimate):
    name = "anti_align_estimate"
    sign = -1.0


STRATEGIES = {
    cls.name: cls for cls in (Zero, Constant, EqualMeans, AlignEstimate, AntiAlignEstimate)
}


def make_strategy(obj: dict[str, Any] | str | None) -> Strategy:
    if obj is None:
        return Zero()
    if isinstance(obj, str):
        obj = {"name": obj}
    obj = dict(obj)
    name = obj.pop("name", None)
    if name not in STRATEGIES:
        raise ConfigError(f"environment.strategy.name: unknown strategy {name!r}; "
                          f"expected one of {sorted(STRATEGIES)}")
    try:
        return STRATEGIES[name](**obj)
    except TypeError as exc:
        raise ConfigError(f"environment.strategy: bad arguments for {name!r}: {exc}") from None


def adversary_step(strategy: Strategy, history: History, k: int, p: int,
                   rng: np.random.Generator) -> np.ndarray:
    """The strategy's means for the next round, each clipped to the unit ball."""
    return clip_to_unit_ball(np.asarray(strategy.means(history, k, p, rng), dtype=float))


# ---------------------------------------------------------------------------
# environment


class EnvKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    SMOOTHED = "smoothed"


@dataclass
class Environment:
    kind: EnvKind
    k: int
    p: int
    sigma: float
    strategy: Strategy = field(default_factory=Zero)
    noise: NoiseModel = field(default_factory=NoiseModel)
    rewards_only: bool = False

    def __post_init__(self):
        self.kind = EnvKind(self.kind)
        if self.k < 1 or self.p < 1:
            raise DomainError("k and p must be positive")
        if not (self.sigma >= 0):
            raise DomainError("sigma must be >= 0")
        if self.rewards_only and self.strategy.needs_estimates:
            raise ConfigError(
                f"environment.strategy: {self.strategy.name!r} reads estimates, "
                "which rewards_only hides"
            )

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "k": self.k,
            "p": self.p,
            "sigma": self.sigma,
            "strategy": self.strategy.to_json(),
            "noise": self.noise.to_json(),
            "rewards_only": self.rewards_only,
        }


def generate_contexts(
    env: Environment,
    t: int,
    history: History,
    strategy_rng: np.random.Generator,
    perturbation_rng: np.random.Generator,
) -> ContextBatch:
    """Contexts for round ``t`` (1-based).

    The adversary moves first; perturbations come afterwards from their own
    stream, so they never depend on the means.
    """
    if t < 1:
        raise DomainError("rounds are numbered from 1")
    if env.kind is EnvKind.GAUSSIAN:
        mus = np.zeros((env.k, env.p))
    else:
        mus = adversary_step(env.strategy, history, env.k, env.p, strategy_rng)
    g = env.sigma * perturbation_rng.standard_normal((env.k, env.p))
    return ContextBatch(mus, g, env.sigma)


def reward(truth: GroundTruth, arm: int, context, noise: NoiseModel,
           rng: np.random.Generator, k: int | None = None) -> float:
    """``<context, theta*_arm> + omega``; ``k`` bounds the arm index in single mode."""
    k_max = truth.n_params if truth.mode is Mode.MULTI else k
    if arm < 0 or (k_max is not None and arm >= k_max):
        raise IndexError(f"arm {arm} out of range")
    x = np.asarray(context, dtype=float)
    return float(x @ truth.theta_for(arm)) + float(noise.sample(rng))
