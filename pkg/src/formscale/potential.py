"""Barrier-like collision-avoidance potential and its gradients.

The pairwise potential is

    V_ij = ( min{0, (||q_i - q_j||^2 - R^2) / (||q_i - q_j||^2 - r^2)} )^2

with sensing radius R and hard safety distance r.  It vanishes (with zero
slope) for separations at or beyond R, and diverges as the separation
approaches r from above.  Separations at or below r are treated as hard
failures so that a simulation can never silently tunnel through the barrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cbt import CbtMatrix
from .errors import BarrierViolationError, ConfigError

__all__ = [
    "PotentialParams",
    "PotentialField",
    "pair_potential",
    "pair_gradient",
    "avoidance_gradient",
    "avoidance_gradients",
    "transformed_potential",
]


@dataclass(frozen=True)
class PotentialParams:
    sensing_radius: float = 2.0  # m
    safe_distance: float = 0.5  # m

    def __post_init__(self):
        if not 0 < self.safe_distance < self.sensing_radius:
            raise ConfigError(
                f"need 0 < safe_distance < sensing_radius, got "
                f"{self.safe_distance} and {self.sensing_radius}"
            )


@dataclass(frozen=True)
class PotentialField:
    """Stacked avoidance control vector and its transformed partition."""

    gradient_stack: np.ndarray  # (2N,), the stacked per-robot vectors
    transformed: np.ndarray  # (2N,), Phi @ gradient_stack


def pair_potential(q_i, q_j, params: PotentialParams) -> float:
    """V_ij for one robot pair; raises inside the safety distance."""
    q_i = np.asarray(q_i, dtype=float)
    q_j = np.asarray(q_j, dtype=float)
    s2 = float(np.sum((q_i - q_j) ** 2))
    r2 = params.safe_distance**2
    if s2 <= r2:
        raise BarrierViolationError((0, 1), np.sqrt(s2))
    ratio = (s2 - params.sensing_radius**2) / (s2 - r2)
    return float(min(0.0, ratio) ** 2)


def pair_gradient(q_i, q_j, params: PotentialParams) -> np.ndarray:
    """dV_ij/dq_i in closed form; zero at/beyond the sensing radius."""
    q_i = np.asarray(q_i, dtype=float)
    q_j = np.asarray(q_j, dtype=float)
    diff = q_i - q_j
    s2 = float(np.sum(diff**2))
    r2 = params.safe_distance**2
    big_r2 = params.sensing_radius**2
    if s2 <= r2:
        raise BarrierViolationError((0, 1), np.sqrt(s2))
    if s2 >= big_r2:
        return np.zeros(2)
    # V = g(s2)^2 with g = (s2 - R^2)/(s2 - r^2), so
    # dV/dq_i = 2 g g'(s2) * 2 (q_i - q_j),  g'(s2) = (R^2 - r^2)/(s2 - r^2)^2.
    g = (s2 - big_r2) / (s2 - r2)
    return 4.0 * g * (big_r2 - r2) / (s2 - r2) ** 2 * diff


def avoidance_gradient(positions, i: int, params: PotentialParams) -> np.ndarray:
    """Avoidance vector for robot i: minus the summed pair gradients.

    Points away from nearby robots (a repulsive direction).
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    total = np.zeros(2)
    for j in range(pts.shape[0]):
        if j == i:
            continue
        total -= pair_gradient(pts[i], pts[j], params)
    return total


def avoidance_gradients(positions, params: PotentialParams) -> np.ndarray:
    """Vectorized avoidance vectors for all robots, shape (N, 2)."""
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    n = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    s2 = np.sum(diff**2, axis=-1)
    np.fill_diagonal(s2, np.inf)
    r2 = params.safe_distance**2
    big_r2 = params.sensing_radius**2
    if np.any(s2 <= r2):
        i, j = np.unravel_index(int(np.argmin(s2)), s2.shape)
        raise BarrierViolationError((int(i), int(j)), float(np.sqrt(s2[i, j])))
    coef = np.zeros((n, n))
    active = s2 < big_r2
    if np.any(active):
        sa = s2[active]
        g = (sa - big_r2) / (sa - r2)
        coef[active] = 4.0 * g * (big_r2 - r2) / (sa - r2) ** 2
    # grad_i V = sum_j coef_ij * (p_i - p_j); avoidance vector is its negative
    return -np.einsum("ij,ijk->ik", coef, diff)


def transformed_potential(
    positions, cbt: CbtMatrix, params: PotentialParams
) -> PotentialField:
    """Stack the avoidance vectors and map them through the transformation."""
    stack = avoidance_gradients(positions, params).reshape(-1)
    return PotentialField(gradient_stack=stack, transformed=cbt.matrix @ stack)
