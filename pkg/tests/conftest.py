import numpy as np
import pytest

from formscale.cbt import GroupLayout
from formscale.control import ControllerConfig, DesiredFormation, SinusoidTrajectory
from formscale.dynamics import RobotParams, SwarmState
from formscale.potential import PotentialParams
from formscale.scenario import equilateral_vertices, shape_vectors_from_points
from formscale.sim import Scenario, SimConfig

# Initial positions of the nine-robot reference scenario (used verbatim).
PUBLISHED_POSITIONS = np.array(
    [
        [-4.0, 7.0],
        [-3.0, 8.0],
        [-6.0, 12.0],
        [-1.0, -5.0],
        [0.0, 6.0],
        [1.0, -8.0],
        [3.0, -12.0],
        [-7.0, -16.0],
        [4.0, 16.0],
    ]
)


def make_paper_scenario(**sim_overrides) -> Scenario:
    """The nine-robot nested-triangle scenario built from library pieces."""
    layout = GroupLayout([3, 3, 3])
    formation = DesiredFormation(
        layout,
        intra=[shape_vectors_from_points(equilateral_vertices(7.0))] * 3,
        inter=shape_vectors_from_points(equilateral_vertices(20.0)),
        trajectory=SinusoidTrajectory(speed_x=1.0, amplitude=30.0, frequency=0.1),
    )
    sim_kwargs = dict(dt=1e-4, horizon=15.0, log_every=10)
    sim_kwargs.update(sim_overrides)
    return Scenario(
        name="paper_fig2",
        layout=layout,
        params=RobotParams(),
        controller=ControllerConfig(),
        formation=formation,
        initial=SwarmState.at_rest(PUBLISHED_POSITIONS),
        potential=PotentialParams(),
        sim=SimConfig(**sim_kwargs),
    )


@pytest.fixture(scope="session")
def paper_scenario() -> Scenario:
    return make_paper_scenario()
