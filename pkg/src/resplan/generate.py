"""Synthetic scenario families and the generation-time compliance gate.

Five families: straight cruise, lane bend, static-obstacle avoidance,
lead-vehicle following, and stop-before-line. Every generated scenario is
gated on the metric oracle (NC, DAC, comfort, TTC all passing for the
scripted expert); non-compliant layouts are resampled from the same stream
so generation stays a pure function of (seed, config).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .expert import ExpertError, SceneLayout, scripted_expert
from .metrics import DEFAULT_THRESHOLDS, sub_metrics
from .rng import RngStream, derive_seed
from .scene import Corridor, Obstacle, Scenario, feature_vector
from .trajectory import DT, T_F, EgoState

FAMILIES = ("cruise", "bend", "obstacle", "lead", "stop")


class GenerationError(RuntimeError):
    """No compliant scenario found within the retry budget."""


@dataclass(frozen=True)
class SceneGenConfig:
    family_weights: tuple = (0.30, 0.25, 0.20, 0.15, 0.10)
    speed_min: float = 4.5
    speed_max: float = 13.0
    half_width_min: float = 3.2
    half_width_max: float = 4.5
    max_decorations: int = 2
    retries: int = 12
    # std of the recorded-state estimate error (clipped at 2 sigma); the
    # inertial reference extrapolates the *sensed* state while the expert
    # drives the true one, so residuals carry a sensor-mismatch component
    pos_noise: float = 0.8
    vel_noise_long: float = 0.3
    vel_noise_lat: float = 0.15

    def key(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


DEFAULT_SCENEGEN = SceneGenConfig()


def _straight_centerline(length: float, back: float = 6.0) -> np.ndarray:
    xs = np.arange(-back, length - 1e-9, 2.0)
    xs = np.append(xs, length)  # end exactly at length (the stop line, if any)
    return np.stack([xs, np.zeros_like(xs)], axis=1)


def _bend_centerline(straight: float, radius: float, sign: float,
                     total: float, back: float = 6.0) -> np.ndarray:
    ds = 1.5
    n = int(math.ceil((total + back) / ds)) + 1
    pts = [np.array([-back, 0.0])]
    heading = 0.0
    s = -back
    for _ in range(n):
        if s > straight:
            heading += sign * ds / radius
        pts.append(pts[-1] + ds * np.array([math.cos(heading), math.sin(heading)]))
        s += ds
    return np.stack(pts)


def _decorations(rng: RngStream, config: SceneGenConfig, corridor: Corridor,
                 count: int) -> list:
    out = []
    for _ in range(count):
        s = 8.0 + float(rng.uniform(())) * 32.0
        side = 1.0 if float(rng.uniform(())) < 0.5 else -1.0
        radius = 0.5 + float(rng.uniform(())) * 0.7
        lat = side * (corridor.half_width + radius + 1.0 + float(rng.uniform(())) * 5.0)
        base = corridor.point_at(s)[0]
        normal = corridor.normal_at(s)[0]
        out.append(Obstacle(center=base + lat * normal, radius=radius,
                            velocity=np.zeros(2)))
    return out


def _sample_layout(rng: RngStream, config: SceneGenConfig) -> SceneLayout:
    layout = _sample_clean_layout(rng, config)
    draws = np.clip(rng.normal((4,)), -2.0, 2.0)
    dp = draws[:2] * config.pos_noise
    dv = draws[2:] * np.array([config.vel_noise_long, config.vel_noise_lat])
    true_ego = EgoState(position=-dp, heading=layout.ego.heading,
                        velocity=layout.ego.velocity.copy())
    sensed_ego = EgoState(position=np.zeros(2), heading=layout.ego.heading,
                          velocity=layout.ego.velocity + dv)
    layout.ego = true_ego
    layout.sensed_ego = sensed_ego
    return layout


def _sample_clean_layout(rng: RngStream, config: SceneGenConfig) -> SceneLayout:
    u = float(rng.uniform(()))
    weights = np.asarray(config.family_weights, dtype=np.float64)
    cum = np.cumsum(weights / weights.sum())
    family = FAMILIES[int(np.searchsorted(cum, u))]

    speed_span = config.speed_max - config.speed_min
    speed = config.speed_min + float(rng.uniform(())) * speed_span
    half_width = config.half_width_min + float(rng.uniform(())) * (
        config.half_width_max - config.half_width_min)
    ego = EgoState(position=np.zeros(2), heading=0.0, velocity=np.array([speed, 0.0]))
    long_length = max(66.0, 4.5 * speed + 18.0)
    n_decor = int(rng.integers(0, config.max_decorations + 1, ()))

    if family == "cruise":
        corridor = Corridor(_straight_centerline(long_length), half_width)
        obstacles = _decorations(rng, config, corridor, n_decor)
        return SceneLayout(ego, corridor, obstacles, cruise_speed=speed)

    if family == "bend":
        speed = min(speed, 11.0)
        ego = EgoState(position=np.zeros(2), heading=0.0, velocity=np.array([speed, 0.0]))
        radius = speed * speed / 2.0 + 15.0 + float(rng.uniform(())) * 60.0
        sign = 1.0 if float(rng.uniform(())) < 0.5 else -1.0
        straight = 6.0 + float(rng.uniform(())) * 8.0
        corridor = Corridor(_bend_centerline(straight, radius, sign, long_length), half_width)
        obstacles = _decorations(rng, config, corridor, n_decor)
        return SceneLayout(ego, corridor, obstacles, cruise_speed=speed)

    if family == "obstacle":
        speed = min(speed, 9.5)
        ego = EgoState(position=np.zeros(2), heading=0.0, velocity=np.array([speed, 0.0]))
        radius = 0.6 + float(rng.uniform(())) * 0.5
        lat = (float(rng.uniform(())) - 0.5) * 1.2
        s_obs = 14.0 + float(rng.uniform(())) * 10.0
        peak = abs(lat) + radius + 1.25
        hw = max(half_width, peak + 0.9)
        corridor = Corridor(_straight_centerline(long_length), hw)
        blocker = Obstacle(center=np.array([s_obs, lat]), radius=radius,
                           velocity=np.zeros(2))
        obstacles = [blocker] + _decorations(rng, config, corridor, n_decor)
        return SceneLayout(ego, corridor, obstacles, cruise_speed=speed)

    if family == "lead":
        gap0 = 14.0 + float(rng.uniform(())) * 10.0
        lead_speed = (0.45 + float(rng.uniform(())) * 0.25) * speed
        corridor = Corridor(_straight_centerline(long_length), half_width)
        lead = Obstacle(center=np.array([gap0, 0.0]), radius=1.0,
                        velocity=np.array([lead_speed, 0.0]))
        obstacles = [lead] + _decorations(rng, config, corridor, n_decor)
        return SceneLayout(ego, corridor, obstacles, cruise_speed=speed,
                           lead_index=0)

    # stop family: the corridor ends at the stop line
    speed = min(speed, 6.0)
    ego = EgoState(position=np.zeros(2), heading=0.0, velocity=np.array([speed, 0.0]))
    brake_dist = speed * speed / (2.0 * 2.2)
    stop_x = 1.5 + brake_dist + speed * float(rng.uniform(())) * 0.35
    corridor = Corridor(_straight_centerline(stop_x), half_width)
    obstacles = _decorations(rng, config, corridor, n_decor)
    return SceneLayout(ego, corridor, obstacles, cruise_speed=speed,
                       stop_s=6.0 + stop_x)


def generate_scenario(seed: int, config: SceneGenConfig = DEFAULT_SCENEGEN) -> Scenario:
    """Deterministic compliant scenario for (seed, config)."""
    rng = RngStream(derive_seed("scenegen", config.key(), seed))
    last_reason = "no attempt"
    for _ in range(config.retries):
        try:
            layout = _sample_layout(rng, config)
            expert = scripted_expert(layout)
        except ExpertError as exc:
            last_reason = str(exc)
            continue
        recorded = layout.sensed_ego if layout.sensed_ego is not None else layout.ego
        scenario = Scenario(id=f"s{seed:016x}", seed=seed, ego=recorded,
                            obstacles=layout.obstacles, corridor=layout.corridor,
                            expert=expert,
                            features=feature_vector(recorded, layout.obstacles,
                                                    layout.corridor))
        scores = sub_metrics(expert, scenario, DEFAULT_THRESHOLDS)
        if scores.nc == scores.dac == scores.comfort == scores.ttc == 1.0:
            return scenario
        last_reason = (f"expert gate failed: nc={scores.nc} dac={scores.dac} "
                       f"comfort={scores.comfort} ttc={scores.ttc}")
    raise GenerationError(
        f"seed {seed}: no compliant scenario in {config.retries} attempts ({last_reason})")


def generate_dataset(base_seed: int, count: int,
                     config: SceneGenConfig = DEFAULT_SCENEGEN) -> list:
    """Count scenarios with per-scenario seeds derived from (base_seed, index).

    Seeds whose retry budget is exhausted are resampled deterministically.
    """
    scenarios = []
    for i in range(count):
        attempt = 0
        while True:
            seed = derive_seed(base_seed, "scenario", i, attempt)
            try:
                scenarios.append(generate_scenario(seed, config))
                break
            except GenerationError:
                attempt += 1
                if attempt >= 8:
                    raise
    return scenarios
