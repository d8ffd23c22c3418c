"""Fixed sinusoidal input encodings (not trained, not differentiated)."""
from __future__ import annotations

import numpy as np

from .trajectory import T_F

TIME_DIM = 32
WAYPOINT_FREQS = 4
WAYPOINT_ENC_DIM = T_F * 2 * 2 * WAYPOINT_FREQS  # 128

# wavelengths from 16 m up to 128 m cover the coordinate range
_WAYPOINT_OMEGAS = np.pi * 2.0 ** np.arange(WAYPOINT_FREQS) / 64.0


def timestep_embedding(steps, dim: int = TIME_DIM) -> np.ndarray:
    """Transformer-style sin/cos features of diffusion step indices."""
    steps = np.atleast_1d(np.asarray(steps, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = steps[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def waypoint_encoding(waypoints: np.ndarray) -> np.ndarray:
    """Per-trajectory positional features: sin/cos of each coordinate.

    waypoints: (..., T_F, 2) -> (..., WAYPOINT_ENC_DIM)
    """
    waypoints = np.asarray(waypoints, dtype=np.float64)
    lead = waypoints.shape[:-2]
    angles = waypoints[..., None] * _WAYPOINT_OMEGAS  # (..., T_F, 2, F)
    feats = np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)
    return feats.reshape(lead + (WAYPOINT_ENC_DIM,))
