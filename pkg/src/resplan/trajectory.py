"""Inertial references, trajectory residuals, and their normalization.

All trajectories are T_F (8) future waypoints at DT (0.5 s) spacing in the
ego frame: origin at the ego position, x forward along heading, y left.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream

T_F = 8
DT = 0.5


@dataclass(eq=False)
class EgoState:
    """Current position, heading, and velocity; seed of the inertial reference."""

    position: np.ndarray
    heading: float
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if not (-math.pi < self.heading <= math.pi):
            raise ValueError(f"heading must lie in (-pi, pi], got {self.heading}")
        if not (np.isfinite(self.position).all() and np.isfinite(self.velocity).all()):
            raise ValueError("ego state must be finite")

    @property
    def speed(self) -> float:
        return float(np.hypot(self.velocity[0], self.velocity[1]))


@dataclass(eq=False)
class Trajectory:
    """T_F ordered (x, y) waypoints, meters, at fixed DT spacing."""

    waypoints: np.ndarray
    dt: float = DT

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64)
        if self.waypoints.shape != (T_F, 2):
            raise ValueError(f"expected {(T_F, 2)} waypoints, got {self.waypoints.shape}")
        if not np.isfinite(self.waypoints).all():
            raise ValueError("waypoints must be finite")

    def __eq__(self, other):
        return (isinstance(other, Trajectory) and self.dt == other.dt
                and np.array_equal(self.waypoints, other.waypoints))


@dataclass(eq=False)
class Residual:
    """Point-wise displacement between a trajectory and its reference."""

    deltas: np.ndarray

    def __post_init__(self):
        self.deltas = np.asarray(self.deltas, dtype=np.float64)
        if self.deltas.shape != (T_F, 2):
            raise ValueError(f"expected {(T_F, 2)} deltas, got {self.deltas.shape}")
        if not np.isfinite(self.deltas).all():
            raise ValueError("deltas must be finite")

    def __eq__(self, other):
        return isinstance(other, Residual) and np.array_equal(self.deltas, other.deltas)


def inertial_reference(ego: EgoState, horizon: int = T_F, dt: float = DT) -> Trajectory:
    """Constant-velocity extrapolation: waypoint i is p0 + v0 * (i * dt)."""
    if dt <= 0 or horizon < 1:
        raise ValueError("dt must be positive and horizon >= 1")
    steps = np.arange(1, horizon + 1, dtype=np.float64)[:, None] * dt
    return Trajectory(ego.position[None, :] + ego.velocity[None, :] * steps, dt=dt)


def residual(gt: Trajectory, ref: Trajectory) -> Residual:
    """Point-wise difference gt - ref."""
    if gt.waypoints.shape != ref.waypoints.shape or gt.dt != ref.dt:
        raise ValueError("trajectory and reference must share length and dt")
    return Residual(gt.waypoints - ref.waypoints)


def compose(ref: Trajectory, res: Residual) -> Trajectory:
    """Reconstruct a trajectory as ref + residual."""
    if ref.waypoints.shape != res.deltas.shape:
        raise ValueError("reference and residual must share length")
    return Trajectory(ref.waypoints + res.deltas, dt=ref.dt)


@dataclass
class NormStats:
    """Componentwise residual extremes plus the symmetric-interval transform parameters."""

    r_min: np.ndarray
    r_max: np.ndarray
    gamma: float = 1.0
    eps0: float = 1e-6
    dataset_hash: str = ""

    def __post_init__(self):
        self.r_min = np.asarray(self.r_min, dtype=np.float64)
        self.r_max = np.asarray(self.r_max, dtype=np.float64)
        if self.r_min.shape != (2,) or self.r_max.shape != (2,):
            raise ValueError("r_min and r_max must be per-dimension (x, y) pairs")
        if np.any(self.r_min > self.r_max):
            raise ValueError("r_min must not exceed r_max")
        if self.gamma <= 0 or self.eps0 <= 0:
            raise ValueError("gamma and eps0 must be positive")

    @property
    def span(self) -> np.ndarray:
        return self.r_max - self.r_min + self.eps0

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "r_min": self.r_min.tolist(),
            "r_max": self.r_max.tolist(),
            "gamma": self.gamma,
            "epsilon0": self.eps0,
            "dataset_hash": self.dataset_hash,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NormStats":
        if d.get("version") != 1:
            raise ValueError(f"unsupported NormStats version {d.get('version')!r}")
        return cls(r_min=np.array(d["r_min"]), r_max=np.array(d["r_max"]),
                   gamma=d["gamma"], eps0=d["epsilon0"], dataset_hash=d["dataset_hash"])

    def save(self, path: str) -> None:
        payload = json.dumps(self.to_json_dict(), separators=(",", ":"))
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "NormStats":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def fit_norm_stats(residuals, gamma: float = 1.0, eps0: float = 1e-6,
                   dataset_hash: str = "") -> NormStats:
    """Exact componentwise extremes over all residuals and timesteps."""
    arrays = [r.deltas if isinstance(r, Residual) else np.asarray(r) for r in residuals]
    if not arrays:
        raise ValueError("cannot fit normalization stats on an empty dataset")
    stacked = np.stack(arrays)
    return NormStats(r_min=stacked.min(axis=(0, 1)), r_max=stacked.max(axis=(0, 1)),
                     gamma=gamma, eps0=eps0, dataset_hash=dataset_hash)


def normalize(res: Residual, stats: NormStats) -> Residual:
    """Map each component to 2*gamma*(r - r_min)/(r_max - r_min + eps0) - gamma.

    Inputs outside [r_min, r_max] are allowed and map outside [-gamma, gamma];
    clamping would break the exact inverse.
    """
    return Residual(normalize_array(res.deltas, stats))


def denormalize(res: Residual, stats: NormStats) -> Residual:
    """Exact algebraic inverse of normalize (including the eps0 guard)."""
    return Residual(denormalize_array(res.deltas, stats))


def normalize_array(deltas: np.ndarray, stats: NormStats) -> np.ndarray:
    return 2.0 * stats.gamma * (deltas - stats.r_min) / stats.span - stats.gamma


def denormalize_array(normed: np.ndarray, stats: NormStats) -> np.ndarray:
    return (normed + stats.gamma) * stats.span / (2.0 * stats.gamma) + stats.r_min


def count_out_of_range(normed: np.ndarray, gamma: float) -> int:
    """Diagnostic: components whose normalized value falls outside [-gamma, gamma]."""
    return int((np.abs(np.asarray(normed)) > gamma).sum())


@dataclass(eq=False)
class ReferenceCluster:
    """K perturbed inertial references and the velocity deltas that made them."""

    references: list
    perturbations: np.ndarray
    sigma: tuple

    def __post_init__(self):
        self.perturbations = np.asarray(self.perturbations, dtype=np.float64)
        if len(self.references) != len(self.perturbations):
            raise ValueError("references and perturbations must have equal length")

    def __len__(self) -> int:
        return len(self.references)

    def waypoint_array(self) -> np.ndarray:
        return np.stack([t.waypoints for t in self.references])


def perturb_references(ego: EgoState, sigma, k: int, rng: RngStream,
                       horizon: int = T_F, dt: float = DT) -> ReferenceCluster:
    """K references from velocity perturbations N(0, diag(sigma^2)).

    Perturbations are sampled in the ego-aligned (longitudinal, lateral)
    basis and rotated into the working frame by the heading.
    """
    sigma_long, sigma_lat = float(sigma[0]), float(sigma[1])
    if sigma_long < 0 or sigma_lat < 0 or k < 1:
        raise ValueError("sigma components must be nonnegative and k >= 1")
    draws = rng.normal((k, 2)) * np.array([sigma_long, sigma_lat])
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    rot = np.array([[c, -s], [s, c]])
    deltas = draws @ rot.T
    refs = []
    for dv in deltas:
        shifted = EgoState(position=ego.position.copy(), heading=ego.heading,
                           velocity=ego.velocity + dv)
        refs.append(inertial_reference(shifted, horizon=horizon, dt=dt))
    return ReferenceCluster(references=refs, perturbations=deltas,
                            sigma=(sigma_long, sigma_lat))


REPRESENTATIONS = ("raw", "residual", "normalized")


@dataclass
class HorizonStats:
    """Per-timestep mean and standard deviation per dimension."""

    representation: str
    mean: np.ndarray
    std: np.ndarray


def horizon_stats(trajectories, references=None, representation: str = "raw",
                  stats: NormStats | None = None) -> HorizonStats:
    """Distribution of a dataset over the prediction horizon.

    trajectories: iterable of Trajectory (ground truth). references: matching
    iterable of Trajectory, required for the residual-based representations.
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"representation must be one of {REPRESENTATIONS}")
    gt = np.stack([t.waypoints for t in trajectories]) if trajectories else np.empty((0, T_F, 2))
    if gt.shape[0] == 0:
        raise ValueError("cannot compute horizon stats on an empty dataset")
    if representation == "raw":
        values = gt
    else:
        if references is None:
            raise ValueError("residual representations require references")
        refs = np.stack([t.waypoints for t in references])
        values = gt - refs
        if representation == "normalized":
            if stats is None:
                raise ValueError("normalized representation requires NormStats")
            values = normalize_array(values, stats)
    return HorizonStats(representation=representation,
                        mean=values.mean(axis=0), std=values.std(axis=0))


def trajectory_set_hash(trajectories) -> str:
    """Stable content hash of a trajectory set (for NormStats provenance)."""
    h = hashlib.sha256()
    for t in trajectories:
        h.update(t.waypoints.tobytes())
    return h.hexdigest()[:16]
