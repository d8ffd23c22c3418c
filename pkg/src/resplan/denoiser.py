"""Conditional denoiser: predicts the clean normalized target from a noisy one.

Condition vector: summed projections of scene features, timestep embedding,
and the member's reference positional encoding, squashed by tanh. The trunk
is three affine layers; the condition enters by concatenation at the input
and again additively after the first layer.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .codecs import FLAT_DIM
from .encodings import TIME_DIM, WAYPOINT_ENC_DIM, timestep_embedding, waypoint_encoding
from .rng import RngStream


def _init(rng: RngStream, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.normal((fan_in, fan_out)) / np.sqrt(fan_in)


class DenoiserNet:
    """MLP denoiser over flattened (T_F x 2) targets."""

    def __init__(self, feature_dim: int, hidden: int = 256, cond_dim: int = 128,
                 seed: int = 0):
        self.feature_dim = feature_dim
        self.hidden = hidden
        self.cond_dim = cond_dim
        rng = RngStream(seed)
        spec = {
            "scene_w": (feature_dim, cond_dim), "scene_b": (cond_dim,),
            "time_w": (TIME_DIM, cond_dim), "time_b": (cond_dim,),
            "ref_w": (WAYPOINT_ENC_DIM, cond_dim), "ref_b": (cond_dim,),
            "in_w": (FLAT_DIM + cond_dim, hidden), "in_b": (hidden,),
            "inject_w": (cond_dim, hidden), "inject_b": (hidden,),
            "mid_w": (hidden, hidden), "mid_b": (hidden,),
            "out_w": (hidden, FLAT_DIM), "out_b": (FLAT_DIM,),
        }
        self.params = []
        self._by_name = {}
        for name, shape in spec.items():
            if name.endswith("_b"):
                value = np.zeros(shape)
            else:
                value = _init(rng, *shape)
            p = ad.Parameter(name, value)
            self.params.append(p)
            self._by_name[name] = p

    def __getitem__(self, name: str) -> ad.Parameter:
        return self._by_name[name]

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.params)

    def condition(self, features: np.ndarray, steps, ref_waypoints: np.ndarray) -> ad.Tensor:
        """Condition rows for a batch: (n, feature_dim), steps (n,), refs (n, T_F, 2)."""
        t_emb = timestep_embedding(steps)
        r_enc = waypoint_encoding(ref_waypoints)
        c = ad.affine(ad.constant(features), self["scene_w"], self["scene_b"])
        c = ad.add(c, ad.affine(ad.constant(t_emb), self["time_w"], self["time_b"]))
        c = ad.add(c, ad.affine(ad.constant(r_enc), self["ref_w"], self["ref_b"]))
        return ad.tanh(c)

    def forward(self, z: ad.Tensor, cond: ad.Tensor) -> ad.Tensor:
        h = ad.tanh(ad.affine(ad.concat([z, cond], axis=1), self["in_w"], self["in_b"]))
        h = ad.add(h, ad.affine(cond, self["inject_w"], self["inject_b"]))
        h = ad.tanh(ad.affine(h, self["mid_w"], self["mid_b"]))
        return ad.affine(h, self["out_w"], self["out_b"])

    def predict(self, z: np.ndarray, features: np.ndarray, steps,
                ref_waypoints: np.ndarray) -> np.ndarray:
        """Inference forward pass; returns plain arrays."""
        cond = self.condition(features, steps, ref_waypoints)
        return self.forward(ad.constant(z), cond).data

    def state_dict(self) -> dict:
        return {p.name: p.value.copy() for p in self.params}

    def load_state_dict(self, weights: dict) -> None:
        for p in self.params:
            arr = np.asarray(weights[p.name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise ValueError(f"weight {p.name!r}: shape {arr.shape} != {p.value.shape}")
            p.value[...] = arr

    def param_manifest(self) -> list:
        return [[p.name, list(p.value.shape)] for p in self.params]


class ZeroDenoiser:
    """Stub that always predicts a zero clean sample (for contract tests)."""

    def predict(self, z: np.ndarray, features, steps, ref_waypoints) -> np.ndarray:
        return np.zeros_like(np.asarray(z, dtype=np.float64))
