"""Target representations for the denoiser: what the network diffuses.

Three codecs cover the ablation axes: residual modeling with per-dimension
symmetric normalization (the full method), residual modeling with a single
global min-max (normalization ablated), and direct trajectory coordinates
with a single global min-max (residual modeling ablated). Encoding maps
expert waypoints (given the per-member references) into the diffused
space; decoding is the exact inverse plus reference composition.
"""
from __future__ import annotations

import numpy as np

from .trajectory import T_F, NormStats, denormalize_array, normalize_array

FLAT_DIM = T_F * 2


class PRNormResidualCodec:
    """Residuals against per-member references, normalized per dimension."""

    kind = "residual_prnorm"

    def __init__(self, stats: NormStats):
        self.stats = stats

    def encode(self, gt: np.ndarray, refs: np.ndarray) -> np.ndarray:
        res = gt[None, :, :] - refs
        return normalize_array(res, self.stats).reshape(len(refs), FLAT_DIM)

    def decode(self, normed: np.ndarray, refs: np.ndarray) -> np.ndarray:
        res = denormalize_array(normed.reshape(-1, T_F, 2), self.stats)
        return refs + res

    def slope(self) -> np.ndarray:
        """Per-component meters per normalized unit (for denormalized-space loss)."""
        per_dim = self.stats.span / (2.0 * self.stats.gamma)
        return np.tile(per_dim, T_F)

    def to_manifest(self) -> dict:
        return {"kind": self.kind, "norm_stats": self.stats.to_json_dict()}


class _GlobalMinMax:
    """Single scalar min-max over every component, mapped to [0, 1]."""

    def __init__(self, lo: float, hi: float, eps0: float = 1e-6):
        if hi < lo or eps0 <= 0:
            raise ValueError("need hi >= lo and positive eps0")
        self.lo = float(lo)
        self.hi = float(hi)
        self.eps0 = float(eps0)

    @property
    def span(self) -> float:
        return self.hi - self.lo + self.eps0

    def scale(self, values: np.ndarray) -> np.ndarray:
        return (values - self.lo) / self.span

    def unscale(self, scaled: np.ndarray) -> np.ndarray:
        return scaled * self.span + self.lo


class GlobalResidualCodec(_GlobalMinMax):
    """Residuals against per-member references, vanilla global min-max."""

    kind = "residual_global"

    def encode(self, gt: np.ndarray, refs: np.ndarray) -> np.ndarray:
        res = gt[None, :, :] - refs
        return self.scale(res).reshape(len(refs), FLAT_DIM)

    def decode(self, normed: np.ndarray, refs: np.ndarray) -> np.ndarray:
        return refs + self.unscale(normed.reshape(-1, T_F, 2))

    def slope(self) -> np.ndarray:
        return np.full(FLAT_DIM, self.span)

    def to_manifest(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "eps0": self.eps0}


class GlobalTrajectoryCodec(_GlobalMinMax):
    """Direct waypoint coordinates, vanilla global min-max (no references)."""

    kind = "trajectory_global"

    def encode(self, gt: np.ndarray, refs: np.ndarray) -> np.ndarray:
        scaled = self.scale(gt).reshape(FLAT_DIM)
        return np.tile(scaled, (len(refs), 1))

    def decode(self, normed: np.ndarray, refs: np.ndarray) -> np.ndarray:
        return self.unscale(normed.reshape(-1, T_F, 2))

    def slope(self) -> np.ndarray:
        return np.full(FLAT_DIM, self.span)

    def to_manifest(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi, "eps0": self.eps0}


def fit_codec(kind: str, scenarios, references, gamma: float = 1.0,
              eps0: float = 1e-6, dataset_hash: str = ""):
    """Fit a codec of the given kind on (expert, unperturbed reference) pairs."""
    gts = np.stack([s.expert.waypoints for s in scenarios])
    refs = np.stack([r.waypoints for r in references])
    if kind == PRNormResidualCodec.kind:
        from .trajectory import fit_norm_stats
        stats = fit_norm_stats(list(gts - refs), gamma=gamma, eps0=eps0,
                               dataset_hash=dataset_hash)
        return PRNormResidualCodec(stats)
    if kind == GlobalResidualCodec.kind:
        res = gts - refs
        return GlobalResidualCodec(float(res.min()), float(res.max()), eps0)
    if kind == GlobalTrajectoryCodec.kind:
        return GlobalTrajectoryCodec(float(gts.min()), float(gts.max()), eps0)
    raise ValueError(f"unknown codec kind {kind!r}")


def codec_from_manifest(entry: dict):
    kind = entry["kind"]
    if kind == PRNormResidualCodec.kind:
        return PRNormResidualCodec(NormStats.from_json_dict(entry["norm_stats"]))
    if kind == GlobalResidualCodec.kind:
        return GlobalResidualCodec(entry["lo"], entry["hi"], entry["eps0"])
    if kind == GlobalTrajectoryCodec.kind:
        return GlobalTrajectoryCodec(entry["lo"], entry["hi"], entry["eps0"])
    raise ValueError(f"unknown codec kind {kind!r}")
