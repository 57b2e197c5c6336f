"""Centroid-based transformations for single and multiple groups of planar robots.

The transformation maps stacked robot positions ``X = [p_1; ...; p_N]`` (each
``p_i`` a 2-vector) onto shape variables plus the centroid:

* intra-group shape variables, one block of ``rho_i - 1`` vectors per
  subgroup, encoding the geometry of that subgroup;
* inter-group shape variables (``m - 1`` vectors) encoding the geometry of
  the subgroup centroids, each subgroup treated as one agent concentrated at
  its centroid;
* the overall centroid ``(1/N) * sum(p_i)``.

Shape rows follow the Jacobi construction: the first row of a block is
``(p_2 - p_1) / sqrt(2)`` and row ``k >= 2`` is
``p_{k+1} - mean(p_1..p_k)``.  Every row's scalar coefficients sum to zero,
so shape variables are invariant under rigid translations; only the centroid
row carries absolute position.  Scalar coefficients act identically on x and
y, i.e. the full matrix is the Kronecker product of a coefficient matrix
with the 2x2 identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutError, ShapeMismatchError

__all__ = [
    "GroupLayout",
    "CbtMatrix",
    "TransformedParts",
    "shape_coefficients",
    "build_single_group_phi",
    "build_multi_group_phi",
    "to_transformed",
    "from_transformed",
    "stack_points",
    "unstack_points",
]

#: Round-trip tolerance enforced at construction time.
ROUNDTRIP_TOL = 1e-10


def stack_points(points) -> np.ndarray:
    """Flatten an (N, 2) array of planar points into a 2N vector."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeMismatchError(f"expected (N, 2) points, got shape {pts.shape}")
    return pts.reshape(-1)


def unstack_points(vec) -> np.ndarray:
    """Reshape a 2N vector of stacked planar points into an (N, 2) array."""
    v = np.asarray(vec, dtype=float)
    if v.ndim != 1 or v.size % 2 != 0:
        raise ShapeMismatchError(f"expected a flat 2N vector, got shape {v.shape}")
    return v.reshape(-1, 2)


class GroupLayout:
    """Sizes of the m subgroups plus the index bookkeeping they induce.

    Parameters
    ----------
    sizes : sequence of int
        Number of robots per subgroup, each at least 2.

    Attributes
    ----------
    sizes : tuple of int
    m : int
        Number of subgroups.
    n_robots : int
        Total robot count N.
    n_intra : int
        Total number of intra-group shape variables, sum(rho_i - 1).
    n_inter : int
        Number of inter-group shape variables, m - 1.
    """

    def __init__(self, sizes):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) == 0:
            raise LayoutError("layout needs at least one subgroup")
        for i, s in enumerate(sizes):
            if s < 2:
                raise LayoutError(
                    f"subgroup {i} has {s} robot(s); every subgroup needs at "
                    "least 2 so it has at least one shape variable"
                )
        self.sizes = sizes
        self.m = len(sizes)
        self.n_robots = sum(sizes)
        self.n_intra = sum(s - 1 for s in sizes)
        self.n_inter = self.m - 1

        # Robot index offsets (Cartesian side) and transformed-row offsets.
        self._robot_offsets = np.concatenate([[0], np.cumsum(sizes)])
        intra_counts = [s - 1 for s in sizes]
        self._intra_offsets = np.concatenate([[0], np.cumsum(intra_counts)])

    # -- robot-index (Cartesian) bookkeeping --------------------------------

    def robot_indices(self, group: int) -> range:
        """Global robot indices belonging to one subgroup."""
        return range(self._robot_offsets[group], self._robot_offsets[group + 1])

    def robot_slice(self, group: int) -> slice:
        """Slice into a stacked 2N position vector covering one subgroup."""
        return slice(2 * self._robot_offsets[group], 2 * self._robot_offsets[group + 1])

    # -- transformed-coordinate bookkeeping ---------------------------------

    def intra_slice(self, group: int) -> slice:
        """Rows of one subgroup's shape variables in the transformed vector."""
        return slice(2 * self._intra_offsets[group], 2 * self._intra_offsets[group + 1])

    @property
    def intra_all_slice(self) -> slice:
        """Rows of all intra-group shape variables."""
        return slice(0, 2 * self.n_intra)

    @property
    def inter_slice(self) -> slice:
        """Rows of the inter-group shape variables."""
        return slice(2 * self.n_intra, 2 * (self.n_intra + self.n_inter))

    @property
    def centroid_slice(self) -> slice:
        """Rows of the overall centroid (always the last two)."""
        n = self.n_intra + self.n_inter
        return slice(2 * n, 2 * n + 2)

    def level_slices(self) -> list[slice]:
        """Slices for every control level: each group, inter, centroid."""
        out = [self.intra_slice(g) for g in range(self.m)]
        out.append(self.inter_slice)
        out.append(self.centroid_slice)
        return out

    def level_names(self) -> list[str]:
        return [f"intra_{g + 1}" for g in range(self.m)] + ["inter", "centroid"]

    def __eq__(self, other):
        return isinstance(other, GroupLayout) and self.sizes == other.sizes

    def __repr__(self):
        return f"GroupLayout(sizes={list(self.sizes)})"


@dataclass(frozen=True)
class TransformedParts:
    """Partition of a transformed 2N vector into its coordinate levels."""

    groups: tuple  # one (rho_i - 1, 2) array per subgroup
    inter: np.ndarray  # (m - 1, 2)
    centroid: np.ndarray  # (2,)


def shape_coefficients(n: int) -> np.ndarray:
    """Scalar Jacobi coefficient rows for n points: an (n-1, n) matrix.

    Row 0 implements ``(x_2 - x_1)/sqrt(2)``; row ``k >= 1`` implements
    ``x_{k+2} - mean(x_1..x_{k+1})``.  Every row sums to zero.
    """
    if n < 2:
        raise LayoutError(f"need at least 2 points for shape variables, got {n}")
    rows = np.zeros((n - 1, n))
    rows[0, 0] = -1.0 / np.sqrt(2.0)
    rows[0, 1] = 1.0 / np.sqrt(2.0)
    for k in range(2, n):
        rows[k - 1, :k] = -1.0 / k
        rows[k - 1, k] = 1.0
    return rows


def _expand(coeffs: np.ndarray) -> np.ndarray:
    """Expand scalar coefficients into 2x2 identity blocks."""
    return np.kron(coeffs, np.eye(2))


def build_single_group_phi(rho: int) -> np.ndarray:
    """Transformation matrix for one group of ``rho`` robots.

    Returns the (2*rho, 2*rho) matrix stacking the shape rows over the
    centroid row ``(1/rho) * [I2 I2 ... I2]``.

    Raises
    ------
    LayoutError
        If ``rho < 2``.
    """
    if rho < 2:
        raise LayoutError(f"group size must be >= 2, got {rho}")
    coeffs = np.vstack([shape_coefficients(rho), np.full((1, rho), 1.0 / rho)])
    return _expand(coeffs)


@dataclass(frozen=True)
class CbtMatrix:
    """A multi-group transformation with its cached inverse and partitions.

    Attributes
    ----------
    matrix : (2N, 2N) ndarray
        Row blocks: per-group shape rows, inter-group shape rows, centroid.
    inverse : (2N, 2N) ndarray
        Cached inverse (LU with partial pivoting at construction).
    layout : GroupLayout
    condition_number : float
        2-norm condition number, reported for diagnostics.
    """

    matrix: np.ndarray
    inverse: np.ndarray
    layout: GroupLayout
    condition_number: float = field(default=np.nan)

    @property
    def n_robots(self) -> int:
        return self.layout.n_robots

    @property
    def row_blocks(self) -> dict:
        """Named row ranges: intra_1..intra_m, inter, centroid."""
        lay = self.layout
        blocks = {f"intra_{g + 1}": lay.intra_slice(g) for g in range(lay.m)}
        blocks["inter"] = lay.inter_slice
        blocks["centroid"] = lay.centroid_slice
        return blocks

    def transform(self, x) -> np.ndarray:
        """Map stacked positions to transformed coordinates, Z = Phi X."""
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.n_robots,):
            raise ShapeMismatchError(
                f"expected vector of length {2 * self.n_robots}, got shape {x.shape}"
            )
        return self.matrix @ x

    def untransform(self, z) -> np.ndarray:
        """Map transformed coordinates back to stacked positions."""
        z = np.asarray(z, dtype=float)
        if z.shape != (2 * self.n_robots,):
            raise ShapeMismatchError(
                f"expected vector of length {2 * self.n_robots}, got shape {z.shape}"
            )
        return self.inverse @ z

    def split(self, z) -> TransformedParts:
        """Partition a transformed 2N vector into per-level pieces."""
        z = np.asarray(z, dtype=float)
        lay = self.layout
        groups = tuple(z[lay.intra_slice(g)].reshape(-1, 2) for g in range(lay.m))
        return TransformedParts(
            groups=groups,
            inter=z[lay.inter_slice].reshape(-1, 2),
            centroid=z[lay.centroid_slice].copy(),
        )


def build_multi_group_phi(layout: GroupLayout) -> CbtMatrix:
    """Assemble the full multi-group transformation for a layout.

    The coefficient matrix stacks, in order: the Jacobi shape rows of each
    subgroup (acting only on that subgroup's columns), the Jacobi shape rows
    applied to the subgroup centroids, and the overall centroid row.  For a
    single subgroup there are no inter rows and the result equals
    ``build_single_group_phi``.

    Raises
    ------
    LayoutError
        If the assembled matrix is numerically singular (cannot happen for a
        valid layout; guarded with a condition-number diagnostic).
    """
    if not isinstance(layout, GroupLayout):
        layout = GroupLayout(layout)
    n = layout.n_robots
    coeffs = np.zeros((n, n))
    row = 0
    col = 0
    for rho in layout.sizes:
        coeffs[row : row + rho - 1, col : col + rho] = shape_coefficients(rho)
        row += rho - 1
        col += rho
    if layout.m > 1:
        # Inter rows: shape coefficients over centroids, each centroid being
        # the mean of its subgroup's columns.
        inter = shape_coefficients(layout.m)
        col = 0
        for g, rho in enumerate(layout.sizes):
            coeffs[row : row + layout.m - 1, col : col + rho] = (
                inter[:, g : g + 1] / rho
            )
            col += rho
        row += layout.m - 1
    coeffs[row, :] = 1.0 / n

    matrix = _expand(coeffs)
    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond) or cond > 1e12:
        raise LayoutError(
            f"transformation for layout {list(layout.sizes)} is numerically "
            f"singular (condition number {cond:.3e})"
        )
    inverse = np.linalg.inv(matrix)
    resid = float(np.abs(matrix @ inverse - np.eye(2 * n)).max())
    if resid > ROUNDTRIP_TOL:
        raise LayoutError(
            f"inverse round-trip residual {resid:.3e} exceeds {ROUNDTRIP_TOL:.0e} "
            f"(condition number {cond:.3e})"
        )
    return CbtMatrix(matrix=matrix, inverse=inverse, layout=layout, condition_number=cond)


def to_transformed(cbt: CbtMatrix, x) -> np.ndarray:
    """Z = Phi X for a stacked 2N position (or velocity) vector."""
    return cbt.transform(x)


def from_transformed(cbt: CbtMatrix, z) -> np.ndarray:
    """X = Phi^-1 Z, the inverse coordinate map."""
    return cbt.untransform(z)
