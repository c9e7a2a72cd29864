#!/usr/bin/env python3
"""Walk through the world model: the street-corner scene, the shadow the
corner building casts on the drone grid, and a few random trajectories.

Writes scene_topview.svg next to this script's output/ directory.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from thzris.scene import default_scene, generate_trajectory, grid_position, line_of_sight

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

scene = default_scene()
grid = scene.grid
print(f"grid: {grid.counts} cells at {grid.spacing} m spacing, "
      f"base {grid.origin[2]:.0f} m above ground")
print(f"base station at {scene.bs_position}, reflector at {scene.ris_position}")

# Which cells can the base station see? Collapse z: a column counts as
# shadowed if its lowest plane is blocked (higher planes are never worse).
nx, ny, _ = grid.counts
shadow = np.zeros((nx, ny), dtype=bool)
for ix in range(nx):
    for iy in range(ny):
        pos = grid_position(grid, (ix, iy, 0))
        shadow[ix, iy] = not line_of_sight(scene, scene.bs_position, pos)
print(f"shadowed columns: {shadow.mean():.1%} of the grid footprint")

# A few drone walks: forward-biased with occasional sideways/vertical moves.
rng = np.random.default_rng(7)
walks = [generate_trajectory(scene, rng, (0, 5 + 7 * k, 1), 10) for k in range(3)]

fig, ax = plt.subplots(figsize=(9, 6))
xs = grid.origin[0] + np.arange(nx) * grid.spacing[0]
ys = grid.origin[1] + np.arange(ny) * grid.spacing[1]
ax.pcolormesh(xs, ys, shadow.T, cmap="Reds", alpha=0.6, shading="nearest")
for box in scene.buildings:
    ax.add_patch(plt.Rectangle((box.lo[0], box.lo[1]), box.hi[0] - box.lo[0],
                               box.hi[1] - box.lo[1], color="gray"))
ax.plot(*scene.bs_position[:2], "b^", markersize=12, label="base station")
ax.plot(*scene.ris_position[:2], "g*", markersize=16, label="reflector (80 m up)")
for walk in walks:
    pts = np.array([grid_position(grid, idx) for idx in walk])
    ax.plot(pts[:, 0], pts[:, 1], "k.-", linewidth=1)
ax.set_xlabel("x [m]")
ax.set_ylabel("y [m]")
ax.set_title("top view: building shadow (red) over the drone grid, sample walks")
ax.legend(loc="upper left")
fig.tight_layout()
fig.savefig(out_dir / "scene_topview.svg")
print(f"wrote {out_dir / 'scene_topview.svg'}")
