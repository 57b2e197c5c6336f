"""Multi-time-scale formation control toolkit for grouped wheeled robots.

Subpackages cover the centroid-based coordinate transformation (``cbt``),
the nonholonomic robot dynamics (``dynamics``), the singularly perturbed
formation controllers (``control``), the collision-avoidance potential
(``potential``), stability certificates (``stability``), the closed-loop
simulator (``sim``), scenario files (``scenario``) and plotting (``plots``).
"""

from .cbt import (
    CbtMatrix,
    GroupLayout,
    build_multi_group_phi,
    build_single_group_phi,
    from_transformed,
    to_transformed,
)
from .control import (
    ControllerConfig,
    DesiredFormation,
    SinusoidTrajectory,
    ConstantTrajectory,
    gain_matrices,
    scaled_gains,
)
from .dynamics import RobotParams, RobotState, SwarmState
from .potential import PotentialParams, transformed_potential
from .sim import (
    Scenario,
    SimConfig,
    TrajectoryLog,
    min_pair_distance,
    run_scenario,
    settling_times,
)
from .stability import GrowthConstants, analyze_stability, solve_lyapunov

__version__ = "0.1.0"

__all__ = [
    "CbtMatrix",
    "GroupLayout",
    "build_multi_group_phi",
    "build_single_group_phi",
    "to_transformed",
    "from_transformed",
    "ControllerConfig",
    "DesiredFormation",
    "SinusoidTrajectory",
    "ConstantTrajectory",
    "gain_matrices",
    "scaled_gains",
    "RobotParams",
    "RobotState",
    "SwarmState",
    "PotentialParams",
    "transformed_potential",
    "Scenario",
    "SimConfig",
    "TrajectoryLog",
    "run_scenario",
    "settling_times",
    "min_pair_distance",
    "GrowthConstants",
    "analyze_stability",
    "solve_lyapunov",
    "__version__",
]
