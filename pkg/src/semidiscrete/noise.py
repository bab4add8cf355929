"""Reproducible Brownian increments with dyadic Brownian-bridge refinement.

Every Gaussian deviate is an inverse-CDF transform of a Philox counter-based
uniform.  The Philox key is ``(seed, stream_id)`` and the counter block is
addressed by ``(refinement level, purpose)``, so a draw depends only on *which*
number it is, never on the order in which paths or levels were generated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1

# counter word 2 separates independent uses of the same (seed, stream, level)
PURPOSE_INCREMENTS = 0
PURPOSE_AUX = 1


@dataclass(frozen=True)
class RngSeed:
    """Identifies one independent stream: a global seed plus a path index."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")


def standard_normals(seed: RngSeed, n: int, level: int = 0,
                     purpose: int = PURPOSE_INCREMENTS) -> np.ndarray:
    """Return ``n`` standard normal deviates from the addressed counter block."""
    bitgen = np.random.Philox(
        key=np.array([seed.seed, seed.stream_id], dtype=np.uint64),
        counter=np.array([0, level, purpose, 0], dtype=np.uint64),
    )
    raw = bitgen.random_raw(n)
    # 53-bit uniforms on the open interval (0, 1), so ndtri never returns +-inf
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BrownianPath:
    """Increments of one Brownian path on nested dyadic grids.

    ``levels[k]`` holds ``n_steps * 2**k`` increments over steps of size
    ``dt / 2**k``.  Level ``k`` increments equal the pairwise sums of level
    ``k + 1`` increments up to one rounding.
    """

    seed: RngSeed
    dt: float
    n_steps: int
    levels: tuple = field(repr=False)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def step_size(self, level: int) -> float:
        return self.dt / 2**level

    def increments(self, level: int = 0) -> np.ndarray:
        if level > self.depth:
            raise ValueError(f"level {level} not generated (depth {self.depth}); call refine()")
        return self.levels[level]


def sample_increments(seed: RngSeed, n_steps: int, dt: float) -> BrownianPath:
    """Draw ``n_steps`` independent N(0, dt) increments (refinement level 0)."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps!r}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    n_steps = int(n_steps)
    dw = np.sqrt(dt) * standard_normals(seed, n_steps, level=0)
    return BrownianPath(seed=seed, dt=float(dt), n_steps=n_steps, levels=(_readonly(dw),))


def bridge_split(parents: np.ndarray, parent_dt: float, z: np.ndarray) -> np.ndarray:
    """Split each parent increment into two children via the Brownian bridge.

    Given the parent increment ``w`` over a step ``parent_dt``, the first child
    is ``w / 2 + sqrt(parent_dt) / 2 * z`` and the second is the remainder.
    """
    first = 0.5 * parents + 0.5 * np.sqrt(parent_dt) * z
    children = np.empty(2 * parents.size)
    children[0::2] = first
    children[1::2] = parents - first
    return children


def refine(path: BrownianPath, target_level: int) -> BrownianPath:
    """Return a copy of ``path`` refined down to ``target_level``.

    Existing levels are kept as-is; each new level ``k`` uses only level
    ``k - 1`` and the counter block for ``k``, so refining in one go or in
    several calls gives identical increments.
    """
    if target_level < path.depth:
        raise ValueError(f"target_level {target_level} is below current depth {path.depth}")
    levels = list(path.levels)
    for k in range(path.depth + 1, target_level + 1):
        parents = levels[k - 1]
        z = standard_normals(path.seed, parents.size, level=k)
        levels.append(_readonly(bridge_split(parents, path.step_size(k - 1), z)))
    return BrownianPath(seed=path.seed, dt=path.dt, n_steps=path.n_steps, levels=tuple(levels))


def increment_matrix(seed: int, path_ids, n_steps: int, dt: float, level: int = 0) -> np.ndarray:
    """Stack the level-``level`` increments of several paths into a 2-D array.

    Row ``i`` is the path with ``stream_id = path_ids[i]``.
    """
    path_ids = list(path_ids)
    out = np.empty((len(path_ids), n_steps * 2**level))
    for row, pid in enumerate(path_ids):
        path = sample_increments(RngSeed(seed, pid), n_steps, dt)
        if level:
            path = refine(path, level)
        out[row] = path.increments(level)
    return out


def aux_normal_matrix(seed: int, path_ids, n: int, level: int = 0) -> np.ndarray:
    """Standard normals independent of the increments, one row per path."""
    path_ids = list(path_ids)
    out = np.empty((len(path_ids), n))
    for row, pid in enumerate(path_ids):
        out[row] = standard_normals(RngSeed(seed, pid), n, level=level, purpose=PURPOSE_AUX)
    return out
