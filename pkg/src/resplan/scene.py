"""Scenario types: obstacles, corridors, and the scene-feature vector.

The corridor owns the polyline geometry (arc-length projection, tangents)
used by both the expert script and the rule-based metrics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trajectory import DT, T_F, EgoState, Trajectory

# feature vector layout (fixed; the conditioning stand-in for a sensor encoder)
N_OBSTACLE_SLOTS = 4
OBSTACLE_FEAT = 5          # rel x, rel y, rel vx, rel vy, radius
N_CORRIDOR_SAMPLES = 8
CORRIDOR_FEAT = 4          # rel x, rel y, tangent x, tangent y
CORRIDOR_SAMPLE_ARCS = np.array([3.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0])
STOP_SENTINEL = -1.0
STOP_VISIBLE_RANGE = 60.0
FEATURE_DIM = 1 + N_OBSTACLE_SLOTS * OBSTACLE_FEAT + N_CORRIDOR_SAMPLES * CORRIDOR_FEAT + 2


@dataclass(eq=False)
class Obstacle:
    """Constant-velocity disc in the ego frame."""

    center: np.ndarray
    radius: float
    velocity: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")

    def center_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.center + self.velocity * t[..., None]


@dataclass(eq=False)
class Corridor:
    """Drivable band: polyline centerline with a constant half width."""

    centerline: np.ndarray
    half_width: float

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=np.float64)
        if self.centerline.ndim != 2 or self.centerline.shape[0] < 2 or self.centerline.shape[1] != 2:
            raise ValueError("centerline must be an (n >= 2, 2) polyline")
        seg = np.diff(self.centerline, axis=0)
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self._seg_len <= 0.0):
            raise ValueError("consecutive centerline points must be distinct")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        self._seg_dir = seg / self._seg_len[:, None]
        self._cum_s = np.concatenate([[0.0], np.cumsum(self._seg_len)])

    @property
    def length(self) -> float:
        return float(self._cum_s[-1])

    def project(self, points: np.ndarray):
        """Project points onto the centerline.

        Returns (s, lateral, tangent): arc-length coordinate, signed lateral
        offset (positive left of travel direction), and unit tangent of the
        closest segment, each aligned with the input rows.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        a = self.centerline[:-1]          # (m, 2)
        d = self._seg_dir                 # (m, 2)
        rel = pts[:, None, :] - a[None, :, :]             # (n, m, 2)
        t = np.einsum("nmk,mk->nm", rel, d)
        t = np.clip(t, 0.0, self._seg_len[None, :])
        closest = a[None, :, :] + t[..., None] * d[None, :, :]
        diff = pts[:, None, :] - closest
        dist2 = np.einsum("nmk,nmk->nm", diff, diff)
        idx = np.argmin(dist2, axis=1)
        rows = np.arange(pts.shape[0])
        s = self._cum_s[idx] + t[rows, idx]
        tangent = d[idx]
        offset = pts - closest[rows, idx]
        lateral = tangent[:, 0] * offset[:, 1] - tangent[:, 1] * offset[:, 0]
        return s, lateral, tangent

    def point_at(self, s) -> np.ndarray:
        """Centerline point at arc length s (clamped to the polyline)."""
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        s = np.clip(s, 0.0, self.length)
        idx = np.clip(np.searchsorted(self._cum_s, s, side="right") - 1, 0, len(self._seg_len) - 1)
        local = s - self._cum_s[idx]
        return self.centerline[idx] + local[:, None] * self._seg_dir[idx]

    def tangent_at(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        s = np.clip(s, 0.0, self.length)
        idx = np.clip(np.searchsorted(self._cum_s, s, side="right") - 1, 0, len(self._seg_len) - 1)
        return self._seg_dir[idx]

    def normal_at(self, s) -> np.ndarray:
        t = self.tangent_at(s)
        return np.stack([-t[:, 1], t[:, 0]], axis=1)


@dataclass(eq=False)
class Scenario:
    """One synthetic scene with its scripted ground-truth trajectory."""

    id: str
    seed: int
    ego: EgoState
    obstacles: list
    corridor: Corridor
    expert: Trajectory
    features: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.shape != (FEATURE_DIM,):
            raise ValueError(f"features must have length {FEATURE_DIM}")


def feature_vector(ego: EgoState, obstacles, corridor: Corridor) -> np.ndarray:
    """Fixed-length scene description; a pure function of the geometry."""
    feats = np.zeros(FEATURE_DIM)
    feats[0] = ego.speed
    # nearest obstacles first, zero-padded slots
    ranked = sorted(obstacles, key=lambda o: float(np.hypot(*(o.center - ego.position))))
    base = 1
    for slot, obs in enumerate(ranked[:N_OBSTACLE_SLOTS]):
        off = base + slot * OBSTACLE_FEAT
        feats[off:off + 2] = obs.center - ego.position
        feats[off + 2:off + 4] = obs.velocity - ego.velocity
        feats[off + 4] = obs.radius
    base += N_OBSTACLE_SLOTS * OBSTACLE_FEAT
    s0, _, _ = corridor.project(ego.position[None, :])
    sample_s = float(s0[0]) + CORRIDOR_SAMPLE_ARCS
    pts = corridor.point_at(sample_s)
    tans = corridor.tangent_at(sample_s)
    for i in range(N_CORRIDOR_SAMPLES):
        off = base + i * CORRIDOR_FEAT
        feats[off:off + 2] = pts[i] - ego.position
        feats[off + 2:off + 4] = tans[i]
    base += N_CORRIDOR_SAMPLES * CORRIDOR_FEAT
    feats[base] = corridor.half_width
    remaining = corridor.length - float(s0[0])
    feats[base + 1] = remaining if remaining <= STOP_VISIBLE_RANGE else STOP_SENTINEL
    return feats


def feature_tokens(features: np.ndarray):
    """Split a feature vector into per-entity tokens for attention layers.

    Returns (ego_token (3,), obstacle_tokens (4, 5), corridor_tokens (8, 4)).
    """
    features = np.asarray(features, dtype=np.float64)
    ego_token = np.array([features[0], features[-2], features[-1]])
    obs = features[1:1 + N_OBSTACLE_SLOTS * OBSTACLE_FEAT].reshape(N_OBSTACLE_SLOTS, OBSTACLE_FEAT)
    start = 1 + N_OBSTACLE_SLOTS * OBSTACLE_FEAT
    cor = features[start:start + N_CORRIDOR_SAMPLES * CORRIDOR_FEAT].reshape(
        N_CORRIDOR_SAMPLES, CORRIDOR_FEAT)
    return ego_token, obs, cor
