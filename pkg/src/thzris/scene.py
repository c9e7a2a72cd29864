"""3D world geometry: base station, elevated reflector, box buildings, drone grid.

Positions are in meters. The drone grid is a regular 3D lattice of hover
points; buildings are axis-aligned boxes that block line of sight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned building box, closed on all faces."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("box corners must be 3-vectors")
        if not np.all(hi > lo):
            raise ValueError(f"box must have positive extent on every axis: lo={lo}, hi={hi}")

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True)
class GridSpec:
    """Regular 3D lattice: origin + index * spacing along each axis."""

    origin: np.ndarray
    spacing: tuple[float, float, float] = (0.81, 0.81, 0.8)
    counts: tuple[int, int, int] = (40, 25, 4)

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if self.origin.shape != (3,):
            raise ValueError("grid origin must be a 3-vector")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"grid spacing must be strictly positive: {self.spacing}")
        if any(c < 1 for c in self.counts):
            raise ValueError(f"grid counts must be >= 1: {self.counts}")

    @property
    def n_points(self) -> int:
        nx, ny, nz = self.counts
        return nx * ny * nz

    def indices(self):
        """All grid indices in (ix, iy, iz) lexicographic order."""
        nx, ny, nz = self.counts
        for ix in range(nx):
            for iy in range(ny):
                for iz in range(nz):
                    yield (ix, iy, iz)

    def all_positions(self) -> np.ndarray:
        """(n_points, 3) array of positions, same order as indices()."""
        nx, ny, nz = self.counts
        ix, iy, iz = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        idx = np.stack([ix.ravel(), iy.ravel(), iz.ravel()], axis=1).astype(float)
        return self.origin + idx * np.asarray(self.spacing)


@dataclass(frozen=True)
class StepPolicy:
    """Per-step axis weights for the drone walk.

    Weights are normalized to a distribution over {x, y, z} axis moves.
    x moves are always forward (+x); y and z pick a sign uniformly and
    reflect off the grid boundary.
    """

    weight_x: float = 0.8
    weight_y: float = 0.2
    weight_z: float = 0.2

    def __post_init__(self):
        w = (self.weight_x, self.weight_y, self.weight_z)
        if any(v < 0 for v in w):
            raise ValueError(f"step weights must be nonnegative: {w}")
        if sum(w) == 0:
            raise ValueError("step weights must not all be zero")


@dataclass(frozen=True)
class Scene:
    bs_position: np.ndarray
    ris_position: np.ndarray
    buildings: tuple[Box, ...]
    grid: GridSpec
    carrier_frequency: float = 200e9
    bandwidth: float = 1e9
    step_policy: StepPolicy = field(default_factory=StepPolicy)

    def __post_init__(self):
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, dtype=float))
        object.__setattr__(self, "ris_position", np.asarray(self.ris_position, dtype=float))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        for name, p in (("bs_position", self.bs_position), ("ris_position", self.ris_position)):
            if p.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            for box in self.buildings:
                if box.contains(p):
                    raise ValueError(f"{name} {p} lies inside building {box.lo}..{box.hi}")


def default_scene() -> Scene:
    """Street-corner layout: low base station, one tall corner building
    shadowing roughly a quarter of the grid, reflector hovering above
    everything with clear view of the whole grid."""
    return Scene(
        bs_position=(-25.0, 0.0, 6.0),
        ris_position=(15.0, 25.0, 80.0),
        buildings=(Box(lo=(-15.0, -20.0, 0.0), hi=(-7.0, -2.0, 34.0)),),
        grid=GridSpec(origin=(0.0, -9.72, 40.0)),
    )


def grid_position(grid: GridSpec, idx) -> np.ndarray:
    """Position of grid index (ix, iy, iz) in meters."""
    ix, iy, iz = idx
    nx, ny, nz = grid.counts
    if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
        raise ValueError(f"grid index {idx} out of range for counts {grid.counts}")
    dx, dy, dz = grid.spacing
    return grid.origin + np.array([ix * dx, iy * dy, iz * dz])


def _segment_hits_box(a: np.ndarray, b: np.ndarray, box: Box) -> bool:
    """Slab test of the open segment (a, b) against a closed box.

    Grazing contact with a face counts as a hit; the segment endpoints
    themselves do not (a transmitter sitting on a wall is not blocked
    by it).
    """
    d = b - a
    t_lo, t_hi = 0.0, 1.0
    for ax in range(3):
        if d[ax] == 0.0:
            if a[ax] < box.lo[ax] or a[ax] > box.hi[ax]:
                return False
        else:
            t1 = (box.lo[ax] - a[ax]) / d[ax]
            t2 = (box.hi[ax] - a[ax]) / d[ax]
            if t1 > t2:
                t1, t2 = t2, t1
            t_lo = max(t_lo, t1)
            t_hi = min(t_hi, t2)
            if t_lo > t_hi:
                return False
    # Overlap with the open interval (0, 1): endpoint-only contact is free.
    return t_hi > 0.0 and t_lo < 1.0


def line_of_sight(scene: Scene, a, b) -> bool:
    """True iff no building box intersects the open segment between a and b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("line_of_sight endpoints must differ")
    # Canonical endpoint order: rounding in the slab test then cannot make
    # the answer depend on direction for rays that exactly graze a face.
    if tuple(b) < tuple(a):
        a, b = b, a
    return not any(_segment_hits_box(a, b, box) for box in scene.buildings)


# Axis-step encoding: integer deltas on the grid index.
_STEPS = {
    "+x": (1, 0, 0),
    "+y": (0, 1, 0),
    "-y": (0, -1, 0),
    "+z": (0, 0, 1),
    "-z": (0, 0, -1),
}


def sample_step(rng: np.random.Generator, policy: StepPolicy, grid: GridSpec | None = None,
                at=None) -> tuple[int, int, int]:
    """Draw one axis move: +x always forward, y/z uniform sign.

    With `grid` and the current index `at`, y/z moves reflect off the
    boundary and axes of extent 1 are never drawn.
    """
    w = np.array([policy.weight_x, policy.weight_y, policy.weight_z], dtype=float)
    if grid is not None:
        # A 1-cell axis has no room to move on unit steps.
        w = np.where(np.array(grid.counts) > 1, w, 0.0)
        if w.sum() == 0:
            raise ValueError("no movable axis: grid too small for the step policy")
    axis = rng.choice(3, p=w / w.sum())
    if axis == 0:
        return _STEPS["+x"]
    sign = 1 if rng.random() < 0.5 else -1
    if grid is not None and at is not None:
        i = at[axis]
        n = grid.counts[axis]
        if i + sign < 0 or i + sign >= n:
            sign = -sign
    return (0, sign, 0) if axis == 1 else (0, 0, sign)


def generate_trajectory(scene: Scene, rng: np.random.Generator, start, length: int) -> list[tuple[int, int, int]]:
    """Random axis-step walk of `length` grid indices starting at `start`.

    Starts must leave room for length-1 forward x steps, so a walk is
    never truncated.
    """
    if length < 2:
        raise ValueError(f"trajectory length must be >= 2, got {length}")
    grid = scene.grid
    nx, ny, nz = grid.counts
    ix, iy, iz = start
    if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
        raise ValueError(f"start {start} outside grid {grid.counts}")
    if nx < length:
        raise ValueError(f"grid nx={nx} too small for a length-{length} trajectory")
    if ix > nx - length:
        raise ValueError(f"start ix={ix} leaves no room for {length - 1} forward steps (nx={nx})")
    path = [(ix, iy, iz)]
    cur = (ix, iy, iz)
    for _ in range(length - 1):
        step = sample_step(rng, scene.step_policy, grid=grid, at=cur)
        cur = (cur[0] + step[0], cur[1] + step[1], cur[2] + step[2])
        path.append(cur)
    return path
