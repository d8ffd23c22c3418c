import numpy as np
import pytest

from resplan.rng import RngStream
from resplan.trajectory import (
    DT,
    T_F,
    EgoState,
    NormStats,
    Residual,
    Trajectory,
    compose,
    count_out_of_range,
    denormalize,
    fit_norm_stats,
    horizon_stats,
    inertial_reference,
    normalize,
    perturb_references,
    residual,
)


def ego(px=0.0, py=0.0, heading=0.0, vx=0.0, vy=0.0):
    return EgoState(position=np.array([px, py]), heading=heading,
                    velocity=np.array([vx, vy]))


def test_inertial_reference_straight_line():
    ref = inertial_reference(ego(vx=10.0))
    expected = np.array([[5.0 * i, 0.0] for i in range(1, 9)])
    assert np.array_equal(ref.waypoints, expected)


def test_inertial_reference_zero_velocity_fixed_point():
    ref = inertial_reference(ego(px=2.0, py=-1.0))
    assert np.array_equal(ref.waypoints, np.tile([2.0, -1.0], (T_F, 1)))


def test_inertial_reference_first_waypoint():
    ref = inertial_reference(ego(vx=3.0, vy=4.0))
    assert np.array_equal(ref.waypoints[0], [1.5, 2.0])


def test_residual_of_identical_trajectories_is_zero():
    ref = inertial_reference(ego(vx=7.0))
    assert np.array_equal(residual(ref, ref).deltas, np.zeros((T_F, 2)))


def test_residual_constant_offset():
    ref = inertial_reference(ego(vx=5.0))
    gt = Trajectory(ref.waypoints + np.array([1.0, -2.0]))
    r = residual(gt, ref)
    assert np.array_equal(r.deltas, np.tile([1.0, -2.0], (T_F, 1)))


def test_compose_residual_round_trip_bitwise():
    # pairs constructed the way the pipeline produces them: gt := ref + delta
    rng = RngStream(seed=99)
    for _ in range(200):
        speed = float(rng.uniform(()) * 14 + 1)
        ref = inertial_reference(ego(vx=speed, vy=float(rng.normal(()) * 0.5)))
        delta = Residual(rng.normal((T_F, 2)) * float(10 ** rng.uniform(()) - 0.5))
        gt = compose(ref, delta)
        back = compose(ref, residual(gt, ref))
        assert np.array_equal(back.waypoints, gt.waypoints)


def test_compose_residual_close_for_arbitrary_pairs():
    rng = RngStream(seed=100)
    for _ in range(200):
        gt = Trajectory(rng.normal((T_F, 2)) * 20.0)
        ref = Trajectory(rng.normal((T_F, 2)) * 20.0)
        back = compose(ref, residual(gt, ref))
        err = np.abs(back.waypoints - gt.waypoints)
        assert err.max() <= 1e-12 * np.abs(gt.waypoints).max()


def test_residual_length_mismatch():
    ref = inertial_reference(ego(vx=5.0))
    other = Trajectory(ref.waypoints, dt=0.25)
    with pytest.raises(ValueError):
        residual(other, ref)


def test_fit_norm_stats_extremes():
    base = np.zeros((T_F, 2))
    res = []
    for v in (-2.0, 0.0, 2.0):
        d = base.copy()
        d[3, 0] = v
        res.append(Residual(d))
    stats = fit_norm_stats(res)
    assert stats.r_min[0] == -2.0 and stats.r_max[0] == 2.0
    assert stats.r_min[1] == 0.0 and stats.r_max[1] == 0.0


def test_fit_norm_stats_degenerate_all_zero():
    stats = fit_norm_stats([Residual(np.zeros((T_F, 2)))], gamma=1.0, eps0=1e-6)
    normed = normalize(Residual(np.zeros((T_F, 2))), stats)
    assert np.allclose(normed.deltas, -1.0)
    back = denormalize(normed, stats)
    assert np.array_equal(back.deltas, np.zeros((T_F, 2)))


def test_fit_norm_stats_permutation_invariant():
    rng = RngStream(seed=3)
    res = [Residual(rng.normal((T_F, 2))) for _ in range(20)]
    a = fit_norm_stats(res)
    b = fit_norm_stats(list(reversed(res)))
    assert np.array_equal(a.r_min, b.r_min) and np.array_equal(a.r_max, b.r_max)


def test_fit_norm_stats_empty_errors():
    with pytest.raises(ValueError):
        fit_norm_stats([])


def _stats(r_min=(-2.0, -2.0), r_max=(2.0, 2.0), gamma=1.0, eps0=1e-12):
    return NormStats(r_min=np.array(r_min), r_max=np.array(r_max), gamma=gamma, eps0=eps0)


def test_normalize_endpoints_and_midpoint():
    stats = _stats()
    d = np.zeros((T_F, 2))
    d[0, 0] = 2.0
    d[1, 0] = -2.0
    normed = normalize(Residual(d), stats).deltas
    assert normed[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert normed[1, 0] == pytest.approx(-1.0, abs=1e-9)
    assert normed[2, 0] == pytest.approx(0.0, abs=1e-12)


def test_normalize_denormalize_round_trip_oracle():
    rng = RngStream(seed=8)
    stats = NormStats(r_min=np.array([-3.0, -1.5]), r_max=np.array([5.0, 2.5]), eps0=1e-6)
    span = stats.r_max - stats.r_min
    worst = 0.0
    for _ in range(100):
        u = rng.uniform((T_F, 2))
        deltas = stats.r_min + u * span
        back = denormalize(normalize(Residual(deltas), stats), stats)
        worst = max(worst, float(np.max(np.abs(back.deltas - deltas) / span)))
    assert worst < 1e-9


def test_normalize_strictly_monotone_per_component():
    stats = _stats(eps0=1e-6)
    rng = RngStream(seed=12)
    a = rng.normal((T_F, 2))
    b = a + np.abs(rng.normal((T_F, 2))) + 1e-9
    na = normalize(Residual(a), stats).deltas
    nb = normalize(Residual(b), stats).deltas
    assert np.all(nb > na)


def test_normalize_out_of_range_not_clamped():
    stats = _stats()
    d = np.zeros((T_F, 2))
    d[0, 0] = 10.0
    normed = normalize(Residual(d), stats)
    assert normed.deltas[0, 0] > 1.0
    assert count_out_of_range(normed.deltas, stats.gamma) == 1
    back = denormalize(normed, stats)
    assert back.deltas[0, 0] == pytest.approx(10.0, rel=1e-12)


def test_norm_stats_json_round_trip(tmp_path):
    stats = NormStats(r_min=np.array([-1.25, -0.5]), r_max=np.array([3.5, 0.75]),
                      gamma=0.9, eps0=1e-5, dataset_hash="abc123")
    path = str(tmp_path / "stats.json")
    stats.save(path)
    loaded = NormStats.load(path)
    assert np.array_equal(loaded.r_min, stats.r_min)
    assert np.array_equal(loaded.r_max, stats.r_max)
    assert loaded.gamma == stats.gamma and loaded.eps0 == stats.eps0
    assert loaded.dataset_hash == "abc123"


def test_perturb_references_zero_sigma_collapses_to_inertial():
    e = ego(vx=9.0, vy=0.5)
    cluster = perturb_references(e, (0.0, 0.0), k=6, rng=RngStream(seed=1))
    base = inertial_reference(e)
    for ref in cluster.references:
        assert np.array_equal(ref.waypoints, base.waypoints)
    assert np.array_equal(cluster.perturbations, np.zeros((6, 2)))


def test_perturb_references_deterministic():
    e = ego(vx=9.0)
    a = perturb_references(e, (1.0, 0.5), k=20, rng=RngStream(seed=5))
    b = perturb_references(e, (1.0, 0.5), k=20, rng=RngStream(seed=5))
    assert np.array_equal(a.waypoint_array(), b.waypoint_array())


def test_perturb_references_moments():
    e = ego(vx=9.0)
    cluster = perturb_references(e, (1.0, 0.5), k=100_000, rng=RngStream(seed=6))
    d = cluster.perturbations
    assert abs(d[:, 0].mean()) < 0.02 * 1.0
    assert abs(d[:, 1].mean()) < 0.02 * 0.5
    assert abs(d[:, 0].var() - 1.0) < 0.03 * 1.0
    assert abs(d[:, 1].var() - 0.25) < 0.03 * 0.25


def test_perturb_references_rotated_by_heading():
    # heading pi/2: longitudinal perturbations point along +y
    e = EgoState(position=np.zeros(2), heading=np.pi / 2, velocity=np.array([0.0, 8.0]))
    cluster = perturb_references(e, (1.0, 0.0), k=5000, rng=RngStream(seed=7))
    d = cluster.perturbations
    assert np.abs(d[:, 0]).max() < 1e-12  # no x component
    assert d[:, 1].std() > 0.9


def test_horizon_stats_constant_velocity_fleet():
    rng = RngStream(seed=11)
    trajs, refs = [], []
    for _ in range(50):
        e = ego(vx=float(5 + 10 * rng.uniform(())))
        ref = inertial_reference(e)
        trajs.append(ref)
        refs.append(ref)
    res_stats = horizon_stats(trajs, refs, "residual")
    assert np.max(np.abs(res_stats.mean)) < 1e-9
    raw_stats = horizon_stats(trajs, refs, "raw")
    x_means = raw_stats.mean[:, 0]
    steps = np.arange(1, T_F + 1)
    ratio = x_means / steps
    assert np.allclose(ratio, ratio[0])  # linear growth in t


def test_horizon_stats_normalized_bounded_by_gamma():
    rng = RngStream(seed=13)
    trajs, refs = [], []
    for _ in range(200):
        e = ego(vx=float(5 + 10 * rng.uniform(())))
        ref = inertial_reference(e)
        gt = compose(ref, Residual(rng.normal((T_F, 2)) * 2.0))
        trajs.append(gt)
        refs.append(ref)
    residuals = [residual(t, r) for t, r in zip(trajs, refs)]
    stats = fit_norm_stats(residuals, gamma=1.0)
    h = horizon_stats(trajs, refs, "normalized", stats=stats)
    assert np.all(h.std <= stats.gamma)


def test_horizon_stats_errors():
    with pytest.raises(ValueError):
        horizon_stats([], representation="raw")
    ref = inertial_reference(ego(vx=3.0))
    with pytest.raises(ValueError):
        horizon_stats([ref], None, "weird")
    with pytest.raises(ValueError):
        horizon_stats([ref], [ref], "normalized", stats=None)
