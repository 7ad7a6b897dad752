"""Seeded random streams.

Every run draws from Philox (counter-based) generators, one per
``(seed, role)`` pair. A role's stream is derived with
``SeedSequence(seed, spawn_key=(role_index,))`` so that, for a fixed seed,
the perturbation stream is identical no matter which adversary strategy,
agent or norm is used. That alignment is what makes paired comparisons
across configurations meaningful.
"""

from __future__ import annotations

import numpy as np

ROLES = (
    "truth",
    "strategy",
    "perturbations",
    "noise",
    "agent",
    "diagnostics",
)


def stream(seed: int, role: str) -> np.random.Generator:
    """Return the generator for ``role`` under ``seed``."""
    if role not in ROLES:
        raise ValueError(f"unknown rng role {role!r}; expected one of {ROLES}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(ROLES.index(role),))
    return np.random.Generator(np.random.Philox(ss))


def streams(seed: int) -> dict[str, np.random.Generator]:
    return {role: stream(seed, role) for role in ROLES}
