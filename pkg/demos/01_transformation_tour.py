"""Tour of the centroid-based transformation for grouped robots.

Builds the transformation for three groups of three robots, applies it to a
spread-out starting configuration, and shows the properties that make it
useful for formation control: the partition into intra-group shape
variables, inter-group shape variables and the centroid; translation
invariance of everything except the centroid; and exact invertibility.
"""

import numpy as np

from formscale.cbt import GroupLayout, build_multi_group_phi, stack_points, unstack_points
from formscale.scenario import equilateral_vertices, shape_vectors_from_points

np.set_printoptions(precision=4, suppress=True)

positions = np.array(
    [[-4, 7], [-3, 8], [-6, 12], [-1, -5], [0, 6], [1, -8], [3, -12], [-7, -16], [4, 16]],
    dtype=float,
)

layout = GroupLayout([3, 3, 3])
cbt = build_multi_group_phi(layout)
print(f"layout {list(layout.sizes)}: {layout.n_robots} robots, "
      f"{layout.n_intra} intra + {layout.n_inter} inter shape variables + centroid")
print(f"transformation is {cbt.matrix.shape[0]}x{cbt.matrix.shape[1]}, "
      f"condition number {cbt.condition_number:.3f}\n")

z = cbt.transform(stack_points(positions))
parts = cbt.split(z)
for g, block in enumerate(parts.groups):
    print(f"group {g + 1} shape variables:\n{block}")
print(f"inter-group shape variables:\n{parts.inter}")
print(f"overall centroid: {parts.centroid}  (arithmetic mean: {positions.mean(axis=0)})\n")

# translating every robot moves only the centroid
shift = np.array([100.0, -50.0])
z_shifted = cbt.transform(stack_points(positions + shift))
moved = np.abs(z_shifted - z) > 1e-9
print(f"after translating all robots by {shift}: "
      f"{moved[:-2].sum()} shape coordinates changed, centroid moved by "
      f"{z_shifted[layout.centroid_slice] - z[layout.centroid_slice]}\n")

# the inverse map reconstructs a configuration from desired shape variables
z_desired = np.zeros(18)
for g in range(3):
    z_desired[layout.intra_slice(g)] = shape_vectors_from_points(
        equilateral_vertices(7.0)
    ).reshape(-1)
z_desired[layout.inter_slice] = shape_vectors_from_points(
    equilateral_vertices(20.0)
).reshape(-1)
z_desired[layout.centroid_slice] = [0.0, 0.0]
target = unstack_points(cbt.untransform(z_desired))
print("desired nested-triangle configuration reconstructed from shape variables:")
print(target)
side = np.linalg.norm(target[0] - target[1])
mu = np.array([target[3 * g : 3 * g + 3].mean(axis=0) for g in range(3)])
print(f"robot triangle side {side:.4f} m, "
      f"group-centroid triangle side {np.linalg.norm(mu[0] - mu[1]):.4f} m")

roundtrip = cbt.untransform(cbt.transform(stack_points(positions)))
print(f"\nround-trip error: {np.abs(roundtrip - stack_points(positions)).max():.2e}")
