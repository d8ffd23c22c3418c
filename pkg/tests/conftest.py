import numpy as np
import pytest

from resplan.scene import Corridor, Obstacle, Scenario, feature_vector
from resplan.trajectory import DT, T_F, EgoState, Trajectory, inertial_reference


def make_ego(speed=10.0, vy=0.0, heading=0.0):
    return EgoState(position=np.zeros(2), heading=heading,
                    velocity=np.array([speed, vy]))


def straight_corridor(length=90.0, half_width=4.0, back=6.0):
    xs = np.arange(-back, length + 2.5, 2.5)
    line = np.stack([xs, np.zeros_like(xs)], axis=1)
    return Corridor(centerline=line, half_width=half_width)


def make_scenario(scenario_id="t0", speed=10.0, obstacles=(), corridor=None,
                  expert=None, seed=0):
    ego = make_ego(speed=speed)
    corridor = corridor or straight_corridor()
    expert = expert or inertial_reference(ego)
    obstacles = list(obstacles)
    return Scenario(id=scenario_id, seed=seed, ego=ego, obstacles=obstacles,
                    corridor=corridor, expert=expert,
                    features=feature_vector(ego, obstacles, corridor))


@pytest.fixture
def empty_scene():
    return make_scenario()
