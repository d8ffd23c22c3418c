"""DDPM noise schedule and the forward noising transform."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_T = 1000
DEFAULT_BETA_MIN = 1e-4
DEFAULT_BETA_MAX = 2e-2


@dataclass
class NoiseSchedule:
    """Per-step noise variances and their running products.

    alpha_bar has T + 1 entries with alpha_bar[0] == 1, so index i is the
    product over steps 1..i.
    """

    steps: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bar: np.ndarray
    beta_min: float
    beta_max: float


def make_schedule(steps: int = DEFAULT_T, beta_min: float = DEFAULT_BETA_MIN,
                  beta_max: float = DEFAULT_BETA_MAX) -> NoiseSchedule:
    """Linear beta interpolation over `steps` diffusion steps."""
    if not (0.0 < beta_min <= beta_max < 1.0) or steps < 1:
        raise ValueError(f"invalid schedule bounds beta=[{beta_min}, {beta_max}], T={steps}")
    if steps == 1:
        betas = np.array([beta_min])
    else:
        betas = np.linspace(beta_min, beta_max, steps)
    alphas = 1.0 - betas
    alpha_bar = np.concatenate([[1.0], np.cumprod(alphas)])
    return NoiseSchedule(steps=steps, betas=betas, alphas=alphas, alpha_bar=alpha_bar,
                         beta_min=float(beta_min), beta_max=float(beta_max))


def forward_noise(clean: np.ndarray, step, eps: np.ndarray,
                  schedule: NoiseSchedule) -> np.ndarray:
    """z = sqrt(abar_i) * clean + sqrt(1 - abar_i) * eps.

    step may be a scalar or a per-row integer array; rows of clean/eps then
    get their own step.
    """
    clean = np.asarray(clean, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != clean.shape:
        raise ValueError("noise shape must match the clean sample")
    step_arr = np.asarray(step)
    if np.any(step_arr < 1) or np.any(step_arr > schedule.steps):
        raise ValueError(f"step {step} outside [1, {schedule.steps}]")
    abar = schedule.alpha_bar[step_arr]
    if step_arr.ndim > 0:
        abar = abar.reshape((-1,) + (1,) * (clean.ndim - 1))
    return np.sqrt(abar) * clean + np.sqrt(1.0 - abar) * eps


def ddim_step_sequence(steps: int, total: int) -> list:
    """Decreasing sub-schedule for few-step sampling: uniform stride from T.

    For steps=2, total=1000 this is [1000, 500]; the final update targets 0.
    """
    if steps < 1:
        raise ValueError("need at least one sampling step")
    taus = [int(np.ceil(total * (steps - j) / steps)) for j in range(steps)]
    return sorted(set(taus), reverse=True)
