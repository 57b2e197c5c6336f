"""Planar dynamics of nonholonomic differential-drive robots.

Each robot obeys

    pdd_i = A_i(theta_i, omega_i) pd_i + B_i(theta_i) u_i + C_i(omega_i)
    J thetadd_i = (R/r) (tau_r - tau_l)

with u_i = [tau_r, tau_l] the wheel torques,

    A_i = omega * [[-sin θ cos θ, -sin² θ], [cos² θ, sin θ cos θ]]
    B_i = [[cos θ/(m r) - dR sin θ/(J r),  cos θ/(m r) + dR sin θ/(J r)],
           [sin θ/(m r) + dR cos θ/(J r),  sin θ/(m r) - dR cos θ/(J r)]]
    C_i = -d omega² [cos θ, sin θ]

where m is the robot mass, J = I - m d², d the wheel-axle to
center-of-mass offset, R the half wheel separation and r the wheel radius.
det(B_i) = -2 d R / (m J r²) independently of θ, so the torque map is
invertible whenever d != 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegrationError

__all__ = [
    "RobotParams",
    "RobotState",
    "SwarmState",
    "robot_matrices",
    "collective_matrices",
    "derivative",
    "torque_map_determinant",
]


@dataclass(frozen=True)
class RobotParams:
    """Physical constants of one robot (shared by the whole swarm here).

    ``half_wheel_base`` is the wheel-separation parameter entering the
    torque map; it is distinct from the sensing radius used by the
    collision-avoidance potential.
    """

    mass: float = 1.0  # kg
    inertia: float = 0.05  # kg m^2
    com_offset: float = 0.05  # m, wheel axis to center of mass
    half_wheel_base: float = 0.15  # m
    wheel_radius: float = 0.05  # m

    def __post_init__(self):
        if self.mass <= 0 or self.inertia <= 0:
            raise ConfigError("mass and inertia must be positive")
        if self.wheel_radius <= 0 or self.half_wheel_base <= 0:
            raise ConfigError("wheel_radius and half_wheel_base must be positive")
        if self.com_offset == 0:
            raise ConfigError(
                "com_offset must be nonzero for the torque map to be invertible"
            )
        if self.effective_inertia <= 0:
            raise ConfigError(
                f"effective inertia J = I - m d^2 = {self.effective_inertia:.6g} "
                "must be positive"
            )

    @property
    def effective_inertia(self) -> float:
        """J = I - m d^2."""
        return self.inertia - self.mass * self.com_offset**2


@dataclass
class RobotState:
    """Kinematic state of one robot."""

    position: np.ndarray  # (2,)
    heading: float  # rad
    velocity: np.ndarray  # (2,)
    spin: float  # rad/s, heading rate

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        values = [*self.position, self.heading, *self.velocity, self.spin]
        if not np.all(np.isfinite(values)):
            raise ConfigError(f"robot state has non-finite entries: {values}")


@dataclass
class SwarmState:
    """States of all N robots as arrays."""

    positions: np.ndarray  # (N, 2)
    headings: np.ndarray  # (N,)
    velocities: np.ndarray  # (N, 2)
    spins: np.ndarray  # (N,)

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        self.headings = np.atleast_1d(np.asarray(self.headings, dtype=float))
        self.spins = np.atleast_1d(np.asarray(self.spins, dtype=float))
        n = self.positions.shape[0]
        if (
            self.velocities.shape != (n, 2)
            or self.headings.shape != (n,)
            or self.spins.shape != (n,)
        ):
            raise ConfigError("inconsistent swarm state array shapes")

    @classmethod
    def at_rest(cls, positions, headings=0.0) -> "SwarmState":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        n = positions.shape[0]
        headings = np.broadcast_to(np.asarray(headings, dtype=float), (n,)).copy()
        return cls(
            positions=positions,
            headings=headings,
            velocities=np.zeros((n, 2)),
            spins=np.zeros(n),
        )

    @property
    def n_robots(self) -> int:
        return self.positions.shape[0]

    def robots(self) -> list[RobotState]:
        return [
            RobotState(
                position=self.positions[i],
                heading=float(self.headings[i]),
                velocity=self.velocities[i],
                spin=float(self.spins[i]),
            )
            for i in range(self.n_robots)
        ]


def robot_matrices(theta: float, omega: float, params: RobotParams):
    """Evaluate (A_i, B_i, C_i) for one robot at heading theta, spin omega."""
    s, c = np.sin(theta), np.cos(theta)
    a = omega * np.array([[-s * c, -s * s], [c * c, s * c]])
    mr = params.mass * params.wheel_radius
    jr = params.effective_inertia * params.wheel_radius
    dr = params.com_offset * params.half_wheel_base
    b = np.array(
        [
            [c / mr - dr * s / jr, c / mr + dr * s / jr],
            [s / mr + dr * c / jr, s / mr - dr * c / jr],
        ]
    )
    cvec = -params.com_offset * omega**2 * np.array([c, s])
    return a, b, cvec


def batch_matrices(headings, spins, params: RobotParams):
    """Vectorized (A, B, C) for all robots: shapes (N,2,2), (N,2,2), (N,2)."""
    th = np.asarray(headings, dtype=float)
    om = np.asarray(spins, dtype=float)
    s, c = np.sin(th), np.cos(th)
    a = np.empty((th.size, 2, 2))
    a[:, 0, 0] = -s * c * om
    a[:, 0, 1] = -s * s * om
    a[:, 1, 0] = c * c * om
    a[:, 1, 1] = s * c * om
    mr = params.mass * params.wheel_radius
    jr = params.effective_inertia * params.wheel_radius
    dr = params.com_offset * params.half_wheel_base
    b = np.empty((th.size, 2, 2))
    b[:, 0, 0] = c / mr - dr * s / jr
    b[:, 0, 1] = c / mr + dr * s / jr
    b[:, 1, 0] = s / mr + dr * c / jr
    b[:, 1, 1] = s / mr - dr * c / jr
    cvec = np.empty((th.size, 2))
    cvec[:, 0] = -params.com_offset * om**2 * c
    cvec[:, 1] = -params.com_offset * om**2 * s
    return a, b, cvec


def torque_map_determinant(params: RobotParams) -> float:
    """det(B_i) = -2 d R / (m J r^2); heading-independent."""
    return (
        -2.0
        * params.com_offset
        * params.half_wheel_base
        / (params.mass * params.effective_inertia * params.wheel_radius**2)
    )


def collective_matrices(state: SwarmState, params: RobotParams):
    """Block-diagonal (A, B) of shape (2N, 2N) and stacked C of shape (2N,)."""
    a, b, cvec = batch_matrices(state.headings, state.spins, params)
    n = state.n_robots
    big_a = np.zeros((2 * n, 2 * n))
    big_b = np.zeros((2 * n, 2 * n))
    for i in range(n):
        big_a[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = a[i]
        big_b[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b[i]
    return big_a, big_b, cvec.reshape(-1)


def derivative(state: SwarmState, torques, params: RobotParams):
    """Time derivatives of the full swarm state under given wheel torques.

    Parameters
    ----------
    torques : (N, 2) array
        Right and left wheel torque per robot.

    Returns
    -------
    (pdot, vdot, thetadot, omegadot) with shapes (N,2), (N,2), (N,), (N,).
    """
    tau = np.atleast_2d(np.asarray(torques, dtype=float))
    if tau.shape != (state.n_robots, 2):
        raise ConfigError(f"expected ({state.n_robots}, 2) torques, got {tau.shape}")
    if not (
        np.all(np.isfinite(tau))
        and np.all(np.isfinite(state.velocities))
        and np.all(np.isfinite(state.spins))
    ):
        raise IntegrationError("non-finite state or torque input")
    a, b, cvec = batch_matrices(state.headings, state.spins, params)
    vdot = (
        np.einsum("nij,nj->ni", a, state.velocities)
        + np.einsum("nij,nj->ni", b, tau)
        + cvec
    )
    omegadot = (
        params.half_wheel_base
        / (params.effective_inertia * params.wheel_radius)
        * (tau[:, 0] - tau[:, 1])
    )
    return state.velocities.copy(), vdot, state.spins.copy(), omegadot
