"""Atomic norms, exact Euclidean projection onto their balls, and sampling
of directions in the error cone around a structured parameter.

Each norm family is a small object registered in ``FAMILIES``; a new family
(group-sparse, k-support, ...) plugs in by providing ``value``, ``project``,
``box_halfwidth`` and ``sample_ball``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DimensionError, DomainError, EmptyErrorSetError, InputError

MAX_REJECTIONS = 10_000
_REJECTION_CHUNK = 2_000
_FACE_P = 1 / 3  # face dimension ~ Geometric(1/3), mean 3


class NormFamily(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    NUCLEAR = "nuclear"


@dataclass(frozen=True)
class NormSpec:
    """Constraint descriptor ``R(theta) <= radius``.

    ``shape`` is ``(p,)`` for vector norms and ``(m, p)`` for the nuclear
    norm, in which case parameters are the row-major flattening of an
    ``m x p`` matrix.
    """

    family: NormFamily
    shape: tuple[int, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "family", NormFamily(self.family))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "radius", float(self.radius))
        if any(s < 1 for s in self.shape):
            raise DimensionError(f"shape entries must be positive, got {self.shape}")
        if self.family is NormFamily.NUCLEAR and len(self.shape) != 2:
            raise DimensionError("nuclear norm requires shape (m, p)")
        if self.family is not NormFamily.NUCLEAR and len(self.shape) != 1:
            raise DimensionError(f"{self.family.value} norm requires shape (p,)")
        if not math.isfinite(self.radius):
            raise InputError("radius must be finite")
        if self.radius < 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def with_radius(self, radius: float) -> "NormSpec":
        return NormSpec(self.family, self.shape, radius)

    def to_json(self) -> dict[str, Any]:
        return {"family": self.family.value, "shape": list(self.shape), "radius": self.radius}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "NormSpec":
        return cls(NormFamily(obj["family"]), tuple(obj["shape"]), obj["radius"])


@dataclass
class ErrorSetSample:
    """A unit direction ``u`` with ``R(theta_star + epsilon * u) <= radius``."""

    direction: np.ndarray
    feasible: bool
    epsilon: float
    method: str = field(default="rejection")


# ---------------------------------------------------------------------------
# family implementations (batched over a leading axis)


def _simplex_threshold(v: np.ndarray, radius: float) -> np.ndarray:
    """Project nonnegative rows of ``v`` onto ``{x >= 0, sum(x) = radius}``.

    Sort-and-threshold: the threshold is ``(cumsum_rho - radius) / rho`` at
    the largest ``rho`` with ``u_rho > (cumsum_rho - radius) / rho``.
    """
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - radius
    ind = np.arange(1, v.shape[-1] + 1)
    cond = u - css / ind > 0
    cond[..., 0] = True  # exact arithmetic always admits rho = 1; rounding may not
    rho = v.shape[-1] - np.argmax(cond[..., ::-1], axis=-1)
    tau = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(v - tau, 0.0)


class _L1:
    def value(self, x, shape):
        return np.abs(x).sum(axis=-1)

    def project(self, x, shape, radius):
        if radius == 0:
            return np.zeros_like(x)
        if np.abs(x).sum() <= radius:
            return x.copy()
        return np.sign(x) * _simplex_threshold(np.abs(x), radius)

    def box_halfwidth(self, radius):
        return radius

    def sample_ball(self, n, shape, radius, rng):
        # points on random low-dimensional faces: these include the vertices
        # +-radius e_j that generate the error cone
        d = shape[0]
        sizes = np.minimum(rng.geometric(_FACE_P, size=n), d)
        out = np.zeros((n, d))
        for j in range(n):
            idx = rng.choice(d, sizes[j], replace=False)
            w = rng.exponential(size=sizes[j])
            out[j, idx] = rng.choice([-1.0, 1.0], size=sizes[j]) * w / w.sum()
        return radius * out


class _L2:
    def value(self, x, shape):
        # scale first so tiny nonzero vectors do not underflow to 0
        m = np.max(np.abs(x), axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        return m[..., 0] * np.sqrt(np.sum((x / safe) ** 2, axis=-1))

    def project(self, x, shape, radius):
        nrm = float(np.linalg.norm(x))
        if nrm <= radius:
            return x.copy()
        return x * (radius / nrm)

    def box_halfwidth(self, radius):
        return radius

    def sample_ball(self, n, shape, radius, rng):
        d = shape[0]
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return radius * g


class _Nuclear:
    def value(self, x, shape):
        mats = x.reshape(x.shape[:-1] + tuple(shape))
        return np.linalg.svd(mats, compute_uv=False).sum(axis=-1)

    def project(self, x, shape, radius):
        u, s, vt = np.linalg.svd(x.reshape(shape), full_matrices=False)
        if s.sum() <= radius:
            return x.copy()
        if radius == 0:
            return np.zeros_like(x)
        s = _simplex_threshold(s, radius)
        return ((u * s) @ vt).reshape(-1)

    def box_halfwidth(self, radius):
        # |X_ij| <= ||X||_op <= ||X||_*
        return radius

    def sample_ball(self, n, shape, radius, rng):
        # random low-rank points on the boundary
        m, p = shape
        ranks = np.minimum(rng.geometric(_FACE_P, size=n), min(m, p))
        out = np.empty((n, m * p))
        for j in range(n):
            r = ranks[j]
            qu, _ = np.linalg.qr(rng.standard_normal((m, r)))
            qv, _ = np.linalg.qr(rng.standard_normal((p, r)))
            e = rng.exponential(size=r)
            out[j] = ((qu * (radius * e / e.sum())) @ qv.T).reshape(-1)
        return out


FAMILIES = {
    NormFamily.L1: _L1(),
    NormFamily.L2: _L2(),
    NormFamily.NUCLEAR: _Nuclear(),
}


def _as_param(spec: NormSpec, theta) -> np.ndarray:
    x = np.asarray(theta, dtype=float)
    if x.size != spec.dim or (x.ndim > 1 and x.shape != spec.shape):
        raise DimensionError(f"parameter of shape {x.shape} does not match {spec.shape}")
    return x.reshape(-1)


# ---------------------------------------------------------------------------
# public operations


def norm_value(spec: NormSpec, theta) -> float:
    """``R(theta)`` for the family of ``spec``."""
    x = _as_param(spec, theta)
    return float(FAMILIES[spec.family].value(x, spec.shape))


def norm_values(spec: NormSpec, thetas: np.ndarray) -> np.ndarray:
    """Row-wise ``R`` of a ``(n, dim)`` array."""
    x = np.asarray(thetas, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.dim:
        raise DimensionError(f"expected (n, {spec.dim}) array, got {x.shape}")
    return FAMILIES[spec.family].value(x, spec.shape)


def project_ball(spec: NormSpec, theta) -> np.ndarray:
    """Euclidean projection of ``theta`` onto ``{v : R(v) <= spec.radius}``.

    Returns a flat vector; ``theta`` is returned unchanged (as a copy) when
    already feasible.
    """
    x = _as_param(spec, theta)
    if not np.all(np.isfinite(x)):
        raise InputError("theta contains NaN or Inf")
    return FAMILIES[spec.family].project(x, spec.shape, spec.radius)


def sample_ball_points(spec: NormSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return FAMILIES[spec.family].sample_ball(n, spec.shape, spec.radius, rng)


def sample_error_directions(
    spec: NormSpec,
    theta_star,
    n: int,
    rng: np.random.Generator,
    max_rejections: int = MAX_REJECTIONS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``n`` unit directions of the error cone at ``theta_star``.

    A feasible point ``v`` is drawn uniformly from the bounding box of the
    ball by rejection; after ``max_rejections`` consecutive rejections the
    sampler switches to radial sampling toward a random boundary point on
    a low-dimensional face (sparse for l1, low rank for nuclear). The direction is ``(v - theta_star) / ||v - theta_star||``.

    Returns ``(directions, epsilons, from_rejection)``.
    """
    fam = FAMILIES[spec.family]
    ts = _as_param(spec, theta_star)
    radius = spec.radius
    if radius == 0 and not np.any(ts):
        raise EmptyErrorSetError("theta_star = 0 with radius 0 leaves no error directions")
    r_star = norm_value(spec, ts)
    if abs(r_star - radius) > 1e-9 * max(1.0, radius):
        raise DomainError(f"R(theta_star) = {r_star} differs from radius {radius}")

    pts: list[np.ndarray] = []
    have = 0
    rejected = 0
    h = fam.box_halfwidth(radius)
    while have < n and rejected < max_rejections:
        size = min(_REJECTION_CHUNK, max_rejections - rejected)
        box = rng.uniform(-h, h, size=(size, spec.dim))
        ok = fam.value(box, spec.shape) <= radius
        ok &= np.any(box != ts, axis=1)
        idx = np.flatnonzero(ok)
        if idx.size:
            take = idx[: n - have]
            pts.append(box[take])
            have += take.size
            rejected = 0
        else:
            rejected += size
    n_rej = have

    while have < n:
        b = fam.sample_ball(n - have, spec.shape, radius, rng)
        rb = fam.value(b, spec.shape)
        b = b[rb > 0]
        b *= (radius / fam.value(b, spec.shape))[:, None]
        b = b[np.any(b != ts, axis=1)]
        pts.append(b)
        have += b.shape[0]

    v = np.concatenate(pts)[:n]
    delta = v - ts
    eps = np.linalg.norm(delta, axis=1)
    from_rejection = np.arange(n) < n_rej
    return delta / eps[:, None], eps, from_rejection


def sample_error_direction(
    spec: NormSpec,
    theta_star,
    rng: np.random.Generator,
    max_rejections: int = MAX_REJECTIONS,
) -> ErrorSetSample:
    dirs, eps, rej = sample_error_directions(spec, theta_star, 1, rng, max_rejections)
    u, e = dirs[0], float(eps[0])
    ts = _as_param(spec, theta_star)
    feasible = norm_value(spec, ts + e * u) <= spec.radius + 1e-8
    return ErrorSetSample(u, bool(feasible), e, "rejection" if rej[0] else "radial")
