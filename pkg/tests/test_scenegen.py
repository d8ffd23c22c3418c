import numpy as np
import pytest

from resplan.dataset import DatasetError, read_dataset, scenario_to_dict, write_dataset
from resplan.expert import SceneLayout, scripted_expert
from resplan.generate import (
    DEFAULT_SCENEGEN,
    SceneGenConfig,
    generate_dataset,
    generate_scenario,
)
from resplan.metrics import sub_metrics
from resplan.scene import STOP_SENTINEL, Corridor, Obstacle, feature_vector
from resplan.trajectory import DT, T_F, EgoState, inertial_reference


def _layout(speed=10.0, corridor=None, obstacles=(), **kw):
    ego = EgoState(position=np.zeros(2), heading=0.0, velocity=np.array([speed, 0.0]))
    if corridor is None:
        xs = np.arange(-6.0, 90.0, 2.0)
        corridor = Corridor(np.stack([xs, np.zeros_like(xs)], axis=1), 4.0)
    return SceneLayout(ego=ego, corridor=corridor, obstacles=list(obstacles),
                       cruise_speed=speed, **kw)


def test_cruise_expert_matches_inertial_reference():
    layout = _layout(speed=10.0)
    expert = scripted_expert(layout)
    ref = inertial_reference(layout.ego)
    assert np.abs(expert.waypoints - ref.waypoints).max() < 0.1


def test_obstacle_expert_dodges_with_clearance():
    blocker = Obstacle(center=np.array([15.0, 0.0]), radius=0.8, velocity=np.zeros(2))
    layout = _layout(speed=7.0, obstacles=[blocker])
    expert = scripted_expert(layout)
    clearance = np.min(np.linalg.norm(expert.waypoints - blocker.center, axis=1)) - blocker.radius
    assert clearance >= 0.3
    assert np.abs(expert.waypoints[:, 1]).max() > 0.3  # lateral residual component


def test_stop_expert_terminal_speed():
    xs = np.arange(-6.0, 14.0, 2.0)
    xs = np.append(xs, 14.0)
    corridor = Corridor(np.stack([xs, np.zeros_like(xs)], axis=1), 4.0)
    layout = _layout(speed=6.0, corridor=corridor, stop_s=20.0)
    expert = scripted_expert(layout)
    v_end = np.linalg.norm(expert.waypoints[-1] - expert.waypoints[-2]) / DT
    assert v_end < 0.5


def test_generate_scenario_deterministic():
    a = generate_scenario(123)
    b = generate_scenario(123)
    assert a.id == b.id and a.seed == b.seed
    assert np.array_equal(a.expert.waypoints, b.expert.waypoints)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.ego.velocity, b.ego.velocity)
    assert scenario_to_dict(a) == scenario_to_dict(b)


def test_generate_scenario_horizon():
    s = generate_scenario(9)
    assert s.expert.waypoints.shape == (8, 2)
    assert s.expert.dt == 0.5  # 8 waypoints spanning 4.0 s


def test_generated_experts_pass_metric_gate():
    for seed in range(40):
        s = generate_scenario(seed)
        scores = sub_metrics(s.expert, s)
        assert scores.nc == 1.0 and scores.dac == 1.0
        assert scores.comfort == 1.0 and scores.ttc == 1.0


def test_features_pure_function_of_geometry():
    s = generate_scenario(55)
    again = feature_vector(s.ego, s.obstacles, s.corridor)
    assert np.array_equal(s.features, again)


def test_stop_feature_sentinel_rule():
    ds = generate_dataset(3, 60)
    for s in ds:
        remaining = s.corridor.length - float(s.corridor.project(s.ego.position[None])[0][0])
        if remaining <= 60.0:
            assert s.features[-1] == pytest.approx(remaining)
        else:
            assert s.features[-1] == STOP_SENTINEL


def test_dataset_round_trip(tmp_path):
    scenarios = generate_dataset(21, 100)
    path = str(tmp_path / "data.jsonl")
    manifest = write_dataset(scenarios, path, config_hash="deadbeef")
    assert manifest.count == 100
    loaded_manifest, loaded = read_dataset(path)
    assert loaded_manifest.count == 100
    assert loaded_manifest.config_hash == "deadbeef"
    for a, b in zip(scenarios, loaded):
        assert scenario_to_dict(a) == scenario_to_dict(b)


def test_dataset_write_byte_identical(tmp_path):
    scenarios = generate_dataset(5, 20)
    p1, p2 = str(tmp_path / "a.jsonl"), str(tmp_path / "b.jsonl")
    write_dataset(scenarios, p1)
    write_dataset(generate_dataset(5, 20), p2)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_empty_dataset_valid(tmp_path):
    path = str(tmp_path / "empty.jsonl")
    manifest = write_dataset([], path)
    assert manifest.count == 0
    loaded_manifest, scenarios = read_dataset(path)
    assert loaded_manifest.count == 0 and scenarios == []


def test_truncated_file_names_line(tmp_path):
    scenarios = generate_dataset(6, 4)
    path = str(tmp_path / "trunc.jsonl")
    write_dataset(scenarios, path)
    lines = open(path).read().splitlines()
    broken = str(tmp_path / "broken.jsonl")
    with open(broken, "w") as fh:
        fh.write("\n".join(lines[:3]) + "\n")
        fh.write(lines[3][: len(lines[3]) // 2] + "\n")
    with pytest.raises(DatasetError, match="line 4"):
        read_dataset(broken)


def test_missing_records_detected(tmp_path):
    scenarios = generate_dataset(6, 4)
    path = str(tmp_path / "short.jsonl")
    write_dataset(scenarios, path)
    lines = open(path).read().splitlines()
    short = str(tmp_path / "cut.jsonl")
    with open(short, "w") as fh:
        fh.write("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetError, match="expected 4 records"):
        read_dataset(short)


def test_version_mismatch(tmp_path):
    path = str(tmp_path / "v9.jsonl")
    with open(path, "w") as fh:
        fh.write('{"format_version":9,"count":0,"config_hash":"","horizon":8,"dt":0.5}\n')
    with pytest.raises(DatasetError, match="version"):
        read_dataset(path)


def test_family_mix_and_speed_config_respected():
    cfg = SceneGenConfig(family_weights=(1.0, 0.0, 0.0, 0.0, 0.0),
                         speed_min=8.0, speed_max=9.0)
    ds = generate_dataset(2, 12, cfg)
    for s in ds:
        assert not s.obstacles or all(
            abs(o.center[1]) - o.radius > s.corridor.half_width for o in s.obstacles)
        assert s.features[-1] == STOP_SENTINEL  # no stop scenes in a cruise-only mix
