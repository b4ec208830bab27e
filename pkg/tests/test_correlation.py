"""Estimator exactness, reference curves, and angle sweeps."""

import io
import math

import numpy as np
import pytest

from bellsim import (
    Cap,
    ConfigurationError,
    FixedAxis,
    Mixture,
    UniformSphere,
    UnitVector,
    direction_at_angle,
    estimate_correlation,
    generate_database,
    reference_linear,
    reference_singlet,
    sweep_correlation,
    write_curve_csv,
)
from bellsim.correlation import CURVE_CSV_HEADER
from bellsim.geometry import X_AXIS, Y_AXIS, Z_AXIS

from oracles import brute_force_estimate, random_unit, sign_product_mean_quadrature


# -- the estimator ----------------------------------------------------------


def test_equal_settings_give_exact_anticorrelation():
    db = generate_database(6, UniformSphere(), 10_000)
    a = random_unit(np.random.default_rng(0))
    est = estimate_correlation(db, a, a)
    assert est.tie_count == 0
    assert est.value == -1.0 and est.count_pos == 0 and est.standard_error == 0.0
    flipped = estimate_correlation(db, a, a.negated())
    assert flipped.value == 1.0 and flipped.count_neg == 0


def test_right_angle_estimate_near_zero_at_large_n():
    db = generate_database(0, UniformSphere(), 1_000_000)
    est = estimate_correlation(db, direction_at_angle(0.0), direction_at_angle(math.pi / 2))
    assert abs(est.value) <= 0.004  # 3*SE ~ 0.003 plus margin


def test_matches_trial_by_trial_oracle_exactly():
    rng = np.random.default_rng(40)
    dists = [
        UniformSphere(),
        Cap(Y_AXIS, 0.9),
        Mixture(((0.5, UniformSphere()), (0.5, FixedAxis(Z_AXIS)))),
    ]
    for i, dist in enumerate(dists):
        db = generate_database(100 + i, dist, 257)
        a, b = random_unit(rng), random_unit(rng)
        est = estimate_correlation(db, a, b)
        pos, neg, ties, value = brute_force_estimate(db, a, b)
        assert (est.count_pos, est.count_neg, est.tie_count) == (pos, neg, ties)
        assert est.value == value


def test_tie_handling_matches_oracle():
    # every spin along +z measured against x: both stations tie on every trial
    db = generate_database(1, FixedAxis(Z_AXIS), 101)
    est = estimate_correlation(db, X_AXIS, X_AXIS)
    pos, neg, ties, value = brute_force_estimate(db, X_AXIS, X_AXIS)
    assert est.tie_count == ties == 101
    assert est.value == value == 1.0  # both tie-ruled to +1, product +1


def test_symmetry_in_settings_without_ties():
    rng = np.random.default_rng(41)
    db = generate_database(9, UniformSphere(), 4001)
    for _ in range(20):
        a, b = random_unit(rng), random_unit(rng)
        ab = estimate_correlation(db, a, b)
        ba = estimate_correlation(db, b, a)
        assert ab.tie_count == 0
        assert ab.value == ba.value


def test_tallies_are_exact_integers():
    rng = np.random.default_rng(42)
    for trial in range(25):
        db = generate_database(trial, UniformSphere(), int(rng.integers(1, 400)))
        a, b = random_unit(rng), random_unit(rng)
        est = estimate_correlation(db, a, b)
        assert est.count_pos + est.count_neg == est.n
        assert est.value == (est.count_pos - est.count_neg) / est.n
        assert -1.0 <= est.value <= 1.0
        assert round(est.value * est.n) == est.count_pos - est.count_neg


def test_worker_partitioning_is_exact():
    db = generate_database(3, UniformSphere(), 60_000)
    a, b = direction_at_angle(0.0), direction_at_angle(1.0)
    serial = estimate_correlation(db, a, b, workers=1)
    parallel_est = estimate_correlation(db, a, b, workers=8)
    assert serial == parallel_est


# -- reference curves -------------------------------------------------------


def test_reference_values_at_special_angles():
    assert reference_linear(0.0) == -1.0
    assert reference_linear(math.pi) == 1.0
    assert reference_linear(math.pi / 2) == 0.0
    assert reference_linear(math.pi / 4) == pytest.approx(-0.5, abs=1e-15)
    assert reference_singlet(0.0) == -1.0
    assert reference_singlet(math.pi / 2) == pytest.approx(0.0, abs=1e-15)
    assert reference_singlet(math.pi / 4) == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)
    for bad in (-0.2, math.pi + 0.2):
        with pytest.raises(ConfigurationError):
            reference_linear(bad)
        with pytest.raises(ConfigurationError):
            reference_singlet(bad)


def test_linear_law_agrees_with_integration_oracle():
    for theta in (math.pi / 4, math.pi / 2, 0.33, 2.8):
        assert sign_product_mean_quadrature(theta) == pytest.approx(
            reference_linear(theta), abs=1e-6
        )


def test_reference_curves_intersect_only_at_three_angles():
    gap = lambda t: reference_linear(t) - reference_singlet(t)
    for node in (0.0, math.pi / 2, math.pi):
        assert abs(gap(node)) <= 1e-15
    grid = np.linspace(0.0, math.pi, 2001)
    interior = [t for t in grid if min(abs(t), abs(t - math.pi / 2), abs(t - math.pi)) > 0.01]
    assert all(abs(gap(float(t))) > 1e-3 for t in interior)
    # gap at pi/4 is sqrt(2)/2 - 1/2; the global maximum sits at arcsin(2/pi)
    assert abs(gap(math.pi / 4)) == pytest.approx(math.sqrt(2) / 2 - 0.5, abs=1e-15)
    t_star = math.asin(2.0 / math.pi)
    best = math.cos(t_star) + 2.0 * t_star / math.pi - 1.0
    assert max(abs(gap(float(t))) for t in grid) == pytest.approx(best, abs=1e-6)
    assert best > abs(gap(math.pi / 4))


# -- sweeps -----------------------------------------------------------------


def test_single_point_grids():
    db = generate_database(12, UniformSphere(), 5000)
    low = sweep_correlation(db, [0.0])
    assert len(low.points) == 1
    assert low.points[0].estimate.value == -1.0 and low.points[0].estimate.tie_count == 0
    high = sweep_correlation(db, [math.pi])
    assert high.points[0].estimate.value == 1.0 and high.points[0].estimate.tie_count == 0


def test_sweep_matches_pointwise_estimates():
    db = generate_database(13, UniformSphere(), 3000)
    grid = [0.1, 0.8, 2.0, 3.0]
    curve = sweep_correlation(db, grid)
    for theta, point in zip(grid, curve.points):
        est = estimate_correlation(db, direction_at_angle(0.0), direction_at_angle(theta))
        assert point.estimate == est
        assert point.linear_ref == reference_linear(theta)
        assert point.singlet_ref == reference_singlet(theta)


def test_sweep_rejects_bad_grids():
    db = generate_database(1, UniformSphere(), 10)
    for bad in ([], [0.5, 0.4], [0.5, 0.5], [-0.1, 0.5], [0.5, math.pi + 0.1]):
        with pytest.raises(ConfigurationError):
            sweep_correlation(db, bad)


def test_sweep_with_explicit_plane():
    db = generate_database(14, Cap(Y_AXIS, 0.8), 2000)
    grid = [0.0, 0.7, 1.9]
    curve = sweep_correlation(db, grid, plane=(X_AXIS, Y_AXIS))
    for theta, point in zip(grid, curve.points):
        b = UnitVector.normalize(math.sin(theta), math.cos(theta), 0.0)
        est = estimate_correlation(db, Y_AXIS, b)
        assert point.estimate == est
    with pytest.raises(ConfigurationError):
        sweep_correlation(db, grid, plane=(X_AXIS, UnitVector.normalize(1.0, 1.0, 0.0)))


def test_sweep_worker_invariance():
    db = generate_database(15, UniformSphere(), 30_000)
    grid = list(np.linspace(0.0, math.pi, 13))
    assert sweep_correlation(db, grid, workers=1) == sweep_correlation(db, grid, workers=8)


def test_estimator_tracks_linear_law_across_seeds():
    # at a fixed angle, the estimate should sit within 3 SE of the linear
    # law in at least 99 percent of independent runs
    theta = 0.8
    expected = reference_linear(theta)
    a, b = direction_at_angle(0.0), direction_at_angle(theta)
    hits = 0
    for seed in range(200):
        db = generate_database(1000 + seed, UniformSphere(), 10_000)
        est = estimate_correlation(db, a, b)
        if abs(est.value - expected) <= 3.0 * est.standard_error:
            hits += 1
    assert hits >= 198


# -- CSV --------------------------------------------------------------------


def test_curve_csv_schema_and_precision():
    db = generate_database(16, UniformSphere(), 777)
    curve = sweep_correlation(db, [0.25, 1.25, 2.25])
    buf = io.StringIO()
    write_curve_csv(curve, buf, provenance="test run")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# test run"
    assert lines[1] == CURVE_CSV_HEADER
    assert len(lines) == 2 + 3
    fields = lines[2].split(",")
    assert len(fields) == 9
    assert float(fields[0]) == 0.25
    assert float(fields[2]) == curve.points[0].estimate.value  # 17g round-trips
    assert int(fields[4]) == curve.points[0].estimate.count_pos
    assert float(fields[1]) == pytest.approx(math.degrees(0.25), abs=1e-12)
