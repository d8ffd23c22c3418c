import numpy as np
import pytest

from resplan.rng import RngStream
from resplan.schedule import (
    NoiseSchedule,
    ddim_step_sequence,
    forward_noise,
    make_schedule,
)


def test_defaults_match_published_settings():
    s = make_schedule()
    assert s.steps == 1000
    assert s.betas[0] == pytest.approx(1e-4)
    assert s.betas[-1] == pytest.approx(2e-2)


def test_alpha_bar_structure():
    s = make_schedule(200, 1e-4, 2e-2)
    assert s.alpha_bar[0] == 1.0
    assert s.alpha_bar[1] == pytest.approx(1.0 - s.betas[0])
    assert np.all(np.diff(s.alpha_bar) < 0.0)
    assert np.all((s.betas > 0.0) & (s.betas < 1.0))
    assert np.all(np.diff(s.betas) > 0.0)


def test_terminal_alpha_bar_vanishes():
    # independent oracle: sum of logs instead of the cumulative product
    s = make_schedule()
    log_abar_T = np.sum(np.log1p(-s.betas))
    assert np.exp(log_abar_T) == pytest.approx(s.alpha_bar[-1], rel=1e-9)
    assert s.alpha_bar[-1] < 1e-4


def test_invalid_bounds_rejected():
    with pytest.raises(ValueError):
        make_schedule(100, 0.0, 0.02)
    with pytest.raises(ValueError):
        make_schedule(100, 0.03, 0.02)
    with pytest.raises(ValueError):
        make_schedule(0, 1e-4, 2e-2)


def _stub_schedule(abar_i: float) -> NoiseSchedule:
    # single-step schedule with a chosen alpha_bar[1]
    return NoiseSchedule(steps=1, betas=np.array([1.0 - abar_i]),
                         alphas=np.array([abar_i]),
                         alpha_bar=np.array([1.0, abar_i]),
                         beta_min=0.0, beta_max=0.0)


def test_forward_noise_noiseless_limit():
    rng = RngStream(seed=1)
    clean = rng.normal((4, 16))
    eps = rng.normal((4, 16))
    z = forward_noise(clean, 1, eps, _stub_schedule(1.0))
    assert np.array_equal(z, clean)


def test_forward_noise_pure_noise_limit():
    rng = RngStream(seed=2)
    clean = rng.normal((4, 16))
    eps = rng.normal((4, 16))
    z = forward_noise(clean, 1, eps, _stub_schedule(0.0))
    assert np.array_equal(z, eps)


def test_forward_noise_unit_variance():
    s = make_schedule()
    rng = RngStream(seed=3)
    for step in (1, 250, 500, 750, 1000):
        clean = rng.normal((100_000,))
        eps = rng.normal((100_000,))
        z = forward_noise(clean, step, eps, s)
        assert abs(z.var() - 1.0) < 0.02
        assert abs(z.mean()) < 0.02


def test_forward_noise_step_bounds():
    s = make_schedule(10, 1e-4, 2e-2)
    clean = np.zeros((2, 4))
    with pytest.raises(ValueError):
        forward_noise(clean, 0, clean, s)
    with pytest.raises(ValueError):
        forward_noise(clean, 11, clean, s)


def test_forward_noise_per_row_steps():
    s = make_schedule(100, 1e-4, 2e-2)
    clean = np.ones((3, 2))
    eps = np.zeros((3, 2))
    z = forward_noise(clean, np.array([1, 50, 100]), eps, s)
    expected = np.sqrt(s.alpha_bar[[1, 50, 100]])[:, None] * np.ones((3, 2))
    assert np.allclose(z, expected)


def test_ddim_step_sequence():
    assert ddim_step_sequence(2, 1000) == [1000, 500]
    assert ddim_step_sequence(1, 1000) == [1000]
    assert ddim_step_sequence(4, 1000) == [1000, 750, 500, 250]
    assert ddim_step_sequence(2, 999) == [999, 500]
