"""Monte Carlo estimators for the geometric and order-statistic quantities
behind the regret analysis: Gaussian width of the error cone, restricted
eigenvalues, the margin probability, the variance of an argmax-selected
Gaussian and the max-of-Gaussians tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from .errors import DimensionError, DomainError, SamplingError
from .norms import NormSpec, sample_error_directions

_CHUNK = 100_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.std_error < 0:
            raise DomainError("std_error must be nonnegative")
        if self.n_samples < 2:
            raise DomainError("need at least two samples")

    def to_json(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n": self.n_samples}


def _mean_se(x: np.ndarray) -> McEstimate:
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def error_set_sampler(spec: NormSpec, theta_star) -> Callable[[int, np.random.Generator], np.ndarray]:
    """Direction source for :func:`gaussian_width_mc` drawn from the error cone."""

    def draw(m, rng):
        return sample_error_directions(spec, theta_star, m, rng)[0]

    return draw


def gaussian_width_mc(sampler, p: int, n: int, rng: np.random.Generator,
                      directions: int = 2000) -> McEstimate:
    """Lower-bound estimate of ``E sup_{u in A} <g, u>``.

    ``sampler`` is a ``(m, rng) -> (m, p)`` callable or a fixed ``(m, p)``
    array of unit directions. The supremum runs over that finite set, so the
    result is biased low.
    """
    if n < 100:
        raise DomainError("gaussian_width_mc needs n >= 100")
    D = np.asarray(sampler(directions, rng) if callable(sampler) else sampler, dtype=float)
    D = np.atleast_2d(D)
    if D.shape[1] != p:
        raise DimensionError(f"directions have dimension {D.shape[1]}, expected {p}")
    sups = np.empty(n)
    step = max(1, _CHUNK * 10 // max(D.shape[0], 1))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        g = rng.standard_normal((hi - lo, p))
        sups[lo:hi] = (g @ D.T).max(axis=1)
    return _mean_se(sups)


def restricted_min_eigenvalue(Z, directions) -> float:
    """``min_u (1/T) ||Z u||^2`` over the supplied unit directions."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    if D.shape[0] == 0:
        raise DomainError("need at least one direction")
    if D.shape[1] != Z.shape[1]:
        raise DimensionError(f"directions have dimension {D.shape[1]}, Z has {Z.shape[1]} columns")
    if np.any(np.abs(np.linalg.norm(D, axis=1) - 1) > 1e-8):
        raise DomainError("directions must have unit norm")
    return float(np.min(np.sum((Z @ D.T) ** 2, axis=0)) / Z.shape[0])


def margin_probability_mc(sigma: float, r: float, n: int, rng: np.random.Generator,
                          alpha: float | None = None, method: str = "auto") -> McEstimate:
    """Estimate ``P(eta >= r + alpha | eta >= r)`` for ``eta ~ N(0, sigma^2)``.

    ``alpha`` defaults to ``sigma^2 / r``. ``n`` counts conditional draws.
    ``method="rejection"`` keeps unconditional draws that land above ``r``
    and refuses when fewer than one in a million would; ``"inverse"`` draws
    the truncated law directly through the Gaussian survival function;
    ``"auto"`` uses rejection while the acceptance rate is at least 1%.
    """
    if r <= 0 or sigma <= 0:
        raise DomainError("r and sigma must be positive")
    if n < 10_000:
        raise DomainError("margin_probability_mc needs n >= 1e4")
    a = sigma**2 / r if alpha is None else float(alpha)
    accept = float(norm.sf(r / sigma))
    if method == "auto":
        method = "rejection" if accept >= 1e-2 else "inverse"
    if method == "rejection":
        if accept < 1e-6:
            raise SamplingError(
                f"P(eta >= r) = {accept:.3g} is below 1e-6; lower r or use method='inverse'"
            )
        eta = np.empty(n)
        have = 0
        while have < n:
            draw = sigma * rng.standard_normal(max(_CHUNK, int(1.2 * (n - have) / accept)))
            kept = draw[draw >= r][: n - have]
            eta[have: have + kept.size] = kept
            have += kept.size
    elif method == "inverse":
        u = rng.uniform(size=n)
        eta = sigma * norm.isf(u * accept)
    else:
        raise DomainError(f"unknown method {method!r}")
    hit = (eta >= r + a).astype(float)
    ph = float(hit.mean())
    return McEstimate(ph, math.sqrt(max(ph * (1 - ph), 0.0) / n), n)


def margin_probability_exact(sigma: float, r: float, alpha: float | None = None) -> float:
    a = sigma**2 / r if alpha is None else alpha
    return float(norm.sf((r + a) / sigma) / norm.sf(r / sigma))


def argmax_gaussian_variance_mc(k: int, sigma: float, shifts, n: int,
                                rng: np.random.Generator) -> McEstimate:
    """Variance of ``g_j`` where ``j = argmax_i (g_i + shift_i)``, ``g_i ~ N(0, sigma^2)``.

    The standard error uses the fourth central moment of the selected draws.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if n < 10_000:
        raise DomainError("argmax_gaussian_variance_mc needs n >= 1e4")
    mu = np.zeros(k) if shifts is None else np.asarray(shifts, dtype=float).reshape(-1)
    if mu.shape != (k,):
        raise DimensionError(f"expected {k} shifts, got {mu.shape}")
    z = np.empty(n)
    rows = max(1, _CHUNK * 10 // k)
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        g = sigma * rng.standard_normal((hi - lo, k))
        j = np.argmax(g + mu, axis=1)
        z[lo:hi] = g[np.arange(hi - lo), j]
    c = z - z.mean()
    var = float(c @ c / (n - 1))
    m4 = float(np.mean(c**4))
    se = math.sqrt(max(m4 - var**2, 0.0) / n)
    return McEstimate(var, se, n)


def max_gaussian_tail_check(k: int, sigma: float, delta: float, n: int,
                            rng: np.random.Generator) -> tuple[bool, McEstimate]:
    """Check ``P(max_i g_i <= sqrt(2) sigma (sqrt(log k) + sqrt(log 1/delta))) >= 1 - 2 delta``."""
    if not 0 < delta < 0.5:
        raise DomainError("delta must lie in (0, 1/2)")
    thr = max_gaussian_threshold(k, sigma, delta)
    inside = np.empty(n)
    rows = max(1, _CHUNK * 10 // k)
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        g = sigma * rng.standard_normal((hi - lo, k))
        inside[lo:hi] = g.max(axis=1) <= thr
    ph = float(inside.mean())
    est = McEstimate(ph, math.sqrt(max(ph * (1 - ph), 0.0) / n), n)
    return bool(ph >= 1 - 2 * delta - 3 * est.std_error), est


def max_gaussian_threshold(k: int, sigma: float, delta: float) -> float:
    return math.sqrt(2) * sigma * (math.sqrt(math.log(k)) + math.sqrt(math.log(1 / delta)))


def beta_estimate(contexts, directions) -> float:
    """``max |<x, v>|`` over stored contexts and error-cone directions.

    ``contexts`` may be any array whose last axis is the dimension
    (e.g. a ``(T, k, p)`` history).
    """
    X = np.asarray(contexts, dtype=float)
    D = np.atleast_2d(np.asarray(directions, dtype=float))
    if X.size == 0 or D.size == 0:
        raise DomainError("beta_estimate needs contexts and directions")
    X = X.reshape(-1, X.shape[-1])
    if X.shape[1] != D.shape[1]:
        raise DimensionError("contexts and directions disagree on dimension")
    best = 0.0
    for lo in range(0, X.shape[0], 4096):
        best = max(best, float(np.abs(X[lo: lo + 4096] @ D.T).max()))
    return best


def auto_t_min(spec: NormSpec, theta_star, horizon: int, rng: np.random.Generator,
               n: int = 2000, directions: int = 2000) -> tuple[int, McEstimate]:
    """Warm-start length ``ceil((w_hat + sqrt(log log T))^2)``."""
    w = gaussian_width_mc(error_set_sampler(spec, theta_star), spec.dim, n, rng, directions)
    lll = math.log(math.log(horizon)) if horizon > math.e else 0.0
    return int(math.ceil((w.value + math.sqrt(max(lll, 0.0))) ** 2)), w
