"""Scripted driving expert: pure pursuit over an offset path with speed ramps.

The expert integrates a point-mass at a fine timestep, steering toward a
lookahead point on the corridor centerline (laterally offset around static
blockers) while capping speed for stop points, lead vehicles, and path
curvature. Waypoints are sampled at the planning interval. Acceleration and
heading-rate limits are chosen so sampled plans satisfy the comfort metric
with margin; infeasible layouts raise ExpertError and the generator retries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import Corridor, Obstacle
from .trajectory import DT, T_F, EgoState, Trajectory

SIM_DT = 0.05
SIM_STEPS = int(round(T_F * DT / SIM_DT))
SAMPLE_EVERY = int(round(DT / SIM_DT))

ACCEL_LIMIT = 2.5        # m/s^2, longitudinal command clamp
LAT_ACCEL_LIMIT = 2.2    # m/s^2, curvature-based speed cap
SPEED_GAIN = 1.6         # 1/s, first-order speed tracking
STOP_DECEL = 2.2         # m/s^2, braking envelope
STOP_MARGIN = 1.5        # m, stop short of the corridor end
HEADWAY_S = 1.0          # s, desired time gap behind a lead vehicle
MIN_GAP = 2.0            # m, surface gap floor behind a lead vehicle
DODGE_CLEARANCE = 0.75   # m, extra lateral room past a blocker radius


class ExpertError(RuntimeError):
    """The scripted expert cannot produce a plan for this layout."""


@dataclass
class SceneLayout:
    """Generation-time scene description (before the expert runs).

    ego is the vehicle's true state, which the expert integrates from;
    sensed_ego is the noisy state estimate recorded in the scenario (the
    seed of the inertial reference). When None, the estimate is perfect.
    """

    ego: EgoState
    corridor: Corridor
    obstacles: list
    cruise_speed: float
    stop_s: float | None = None        # arc length of the stop point, if any
    lead_index: int | None = None      # obstacle index of the lead vehicle
    sensed_ego: EgoState | None = None


def _blocker_bumps(layout: SceneLayout):
    """Gaussian lateral-offset bumps around static obstacles inside the corridor."""
    bumps = []
    corridor = layout.corridor
    for i, obs in enumerate(layout.obstacles):
        if i == layout.lead_index or np.linalg.norm(obs.velocity) > 1e-9:
            continue
        s, lat, _ = corridor.project(obs.center[None, :])
        s, lat = float(s[0]), float(lat[0])
        if abs(lat) - obs.radius >= corridor.half_width:
            continue  # fully outside the band
        side = 1.0 if lat <= 0.0 else -1.0
        peak = lat + side * (obs.radius + DODGE_CLEARANCE)
        if abs(peak) > corridor.half_width - 0.5:
            raise ExpertError("no room to pass the blocker inside the corridor")
        width = max(4.0, layout.cruise_speed * math.sqrt(abs(peak) / LAT_ACCEL_LIMIT))
        bumps.append((s, peak, width))
    return bumps


def _offset_at(bumps, s: float) -> float:
    total = 0.0
    for s0, peak, width in bumps:
        total += peak * math.exp(-((s - s0) ** 2) / (2.0 * width * width))
    return total


def _curvature_speed_cap(bumps, corridor: Corridor, s: float) -> float:
    """Speed that keeps lateral acceleration within budget on the offset path."""
    h = 1.5
    f0 = _offset_at(bumps, s - h)
    f1 = _offset_at(bumps, s)
    f2 = _offset_at(bumps, s + h)
    kappa = abs(f0 - 2.0 * f1 + f2) / (h * h)
    t0 = corridor.tangent_at(s - h)[0]
    t2 = corridor.tangent_at(s + h)[0]
    turn = math.atan2(t0[0] * t2[1] - t0[1] * t2[0], float(t0 @ t2))
    kappa += abs(turn) / (2.0 * h)
    if kappa < 1e-6:
        return float("inf")
    return math.sqrt(LAT_ACCEL_LIMIT / kappa)


def scripted_expert(layout: SceneLayout) -> Trajectory:
    """Trajectory of T_F waypoints tracking the corridor around the layout."""
    corridor = layout.corridor
    bumps = _blocker_bumps(layout)
    lead = layout.obstacles[layout.lead_index] if layout.lead_index is not None else None
    lead_s0 = lead_speed = 0.0
    if lead is not None:
        ls, _, ltan = corridor.project(lead.center[None, :])
        lead_s0 = float(ls[0])
        lead_speed = float(lead.velocity @ ltan[0])

    pos = layout.ego.position.copy()
    theta = layout.ego.heading
    v = layout.ego.speed
    waypoints = []

    for step in range(1, SIM_STEPS + 1):
        t = step * SIM_DT
        s_now, _, _ = corridor.project(pos[None, :])
        s_now = float(s_now[0])

        v_allow = layout.cruise_speed
        v_allow = min(v_allow, _curvature_speed_cap(bumps, corridor, s_now + max(2.0, v)))
        if layout.stop_s is not None:
            remaining = layout.stop_s - STOP_MARGIN - s_now
            v_allow = min(v_allow, math.sqrt(2.0 * STOP_DECEL * max(remaining, 0.0)))
        if lead is not None:
            gap = (lead_s0 + lead_speed * t) - s_now - lead.radius
            desired = MIN_GAP + HEADWAY_S * v
            v_allow = min(v_allow, max(0.0, lead_speed + 0.7 * (gap - desired)))

        accel = max(-ACCEL_LIMIT, min(ACCEL_LIMIT, SPEED_GAIN * (v_allow - v)))
        v = max(0.0, v + accel * SIM_DT)

        look = max(3.0, 0.8 * v)
        s_look = s_now + look
        target = corridor.point_at(s_look)[0] + _offset_at(bumps, s_look) * corridor.normal_at(s_look)[0]
        to_target = target - pos
        if np.hypot(to_target[0], to_target[1]) > 1e-9 and v > 1e-3:
            theta_des = math.atan2(to_target[1], to_target[0])
            dtheta = (theta_des - theta + math.pi) % (2.0 * math.pi) - math.pi
            omega_lim = min(1.5, LAT_ACCEL_LIMIT / max(v, 1.0))
            theta += max(-omega_lim * SIM_DT, min(omega_lim * SIM_DT, dtheta))

        pos = pos + v * SIM_DT * np.array([math.cos(theta), math.sin(theta)])
        if step % SAMPLE_EVERY == 0:
            waypoints.append(pos.copy())

    if len(waypoints) != T_F:
        raise ExpertError("simulation produced the wrong number of waypoints")
    return Trajectory(np.stack(waypoints))
