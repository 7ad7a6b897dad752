"""Puffer-preconditioned constrained least squares.

At each episode boundary the design block ``(Z, y)`` is preconditioned with
``F = U D^+ U^T`` from the thin SVD ``Z / sqrt(T) = U D V^T`` and the
estimate is

    argmin_theta (1 / 2T) ||F y - F Z theta||^2   s.t.  R(theta) <= radius

solved by projected gradient descent from ``theta = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, InputError, SolverDivergenceError
from .norms import NormSpec, norm_value, project_ball


@dataclass
class SolverConfig:
    max_iters: int = 2000
    tol: float = 1e-9
    sv_tol: float = 1e-10
    puffer: bool = True
    record_objective: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.tol <= 0 or self.sv_tol <= 0:
            raise DomainError("tol and sv_tol must be positive")

    def to_json(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "tol": self.tol,
            "sv_tol": self.sv_tol,
            "puffer": self.puffer,
        }


@dataclass
class DesignBlock:
    Z: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.Z.shape[0] != self.y.shape[0]:
            raise DimensionError(f"Z has {self.Z.shape[0]} rows but y has {self.y.shape[0]}")

    @property
    def episode_len(self) -> int:
        return int(self.y.shape[0])


@dataclass
class PufferResult:
    Z_tilde: np.ndarray
    y_tilde: np.ndarray
    U: np.ndarray
    singular_values: np.ndarray
    rank: int
    dropped_singulars: int
    degenerate: bool = False

    @property
    def F(self) -> np.ndarray:
        """The ``T x T`` preconditioner ``U D^+ U^T`` (built on demand)."""
        return (self.U / self.singular_values) @ self.U.T


@dataclass
class EstimateResult:
    theta_hat: np.ndarray
    iterations: int
    final_gap: float
    puffer_rank: int
    constraint_active: bool
    objective: list[float] = field(default_factory=list)


def puffer_transform(block: DesignBlock, tol: float = 1e-10) -> PufferResult:
    T = block.episode_len
    if T < 1:
        raise DomainError("puffer_transform needs at least one row")
    if tol <= 0:
        raise DomainError("tol must be positive")
    Z, y = block.Z, block.y
    if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(y))):
        raise InputError("design block contains NaN or Inf")

    U, s, _ = np.linalg.svd(Z / math.sqrt(T), full_matrices=False)
    keep = s > tol * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    d = int(keep.sum())
    U, s_kept = U[:, keep], s[keep]
    if d == 0:
        return PufferResult(
            np.zeros_like(Z), np.zeros_like(y), U, s_kept, 0, int(s.size), degenerate=True
        )
    # F Z = U D^{-1} (U^T Z), never forming the T x T matrix.
    Z_tilde = U @ ((U.T @ Z) / s_kept[:, None])
    y_tilde = U @ ((U.T @ y) / s_kept)
    return PufferResult(Z_tilde, y_tilde, U, s_kept, d, int(s.size - d))


def constrained_least_squares(
    Z_tilde: np.ndarray,
    y_tilde: np.ndarray,
    spec: NormSpec,
    cfg: SolverConfig | None = None,
    puffer_rank: int | None = None,
    theta0=None,
) -> EstimateResult:
    """Projected gradient descent with constant step ``1/L``.

    Starts from zero unless ``theta0`` is given (the oracle-initialised
    debug mode passes the current estimate).
    """
    cfg = cfg or SolverConfig()
    Z = np.atleast_2d(np.asarray(Z_tilde, dtype=float))
    y = np.asarray(y_tilde, dtype=float).reshape(-1)
    T, p = Z.shape
    if p != spec.dim:
        raise DimensionError(f"design has {p} columns, parameter length is {spec.dim}")
    if y.shape[0] != T:
        raise DimensionError("Z_tilde and y_tilde disagree on row count")

    G = Z.T @ Z / T
    b = Z.T @ y / T
    c = float(y @ y) / (2 * T)
    rank = puffer_rank if puffer_rank is not None else int(np.linalg.matrix_rank(Z))

    def f(th):
        return 0.5 * float(th @ G @ th) - float(b @ th) + c

    theta = np.zeros(p) if theta0 is None else project_ball(spec, theta0)
    L = float(np.linalg.eigvalsh(G)[-1]) if T else 0.0
    obj = [f(theta)] if cfg.record_objective else []
    if L <= 0:
        return EstimateResult(theta, 0, 0.0, rank, False, obj)

    f_prev = f(theta)
    gap = 0.0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        nxt = project_ball(spec, theta - (G @ theta - b) / L)
        f_new = f(nxt)
        if not math.isfinite(f_new):
            raise SolverDivergenceError(f"objective became {f_new} at iteration {it}")
        move = float(np.linalg.norm(nxt - theta))
        gap = f_prev - f_new
        theta, f_prev = nxt, f_new
        if cfg.record_objective:
            obj.append(f_new)
        if move < cfg.tol:
            break

    r = norm_value(spec, theta)
    active = spec.radius > 0 and r >= spec.radius * (1 - 1e-8)
    return EstimateResult(theta, it, gap, rank, bool(active), obj)


def estimate_parameter(
    block: DesignBlock, spec: NormSpec, cfg: SolverConfig | None = None, theta0=None
) -> EstimateResult:
    """Puffer transform followed by constrained least squares."""
    cfg = cfg or SolverConfig()
    if block.episode_len < 1:
        raise DomainError("cannot estimate from an empty design block")
    if cfg.puffer:
        pr = puffer_transform(block, cfg.sv_tol)
        return constrained_least_squares(pr.Z_tilde, pr.y_tilde, spec, cfg, pr.rank, theta0)
    return constrained_least_squares(block.Z, block.y, spec, cfg, None, theta0)
