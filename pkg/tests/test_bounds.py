import math

import numpy as np
import pytest

from channel.model import CLEAR, OBSTRUCTED, toa_distance_std
from localization.bounds import (FisherInfo, area_sweep, bounds_report, crb_map, crb_std, crb_stds,
                                 expected_rms, fisher, linearization_bias, noise_gain, rms_bound)
from localization.jacobian import assemble
from localization.observation import ObservationLayout, build_covariance, forward_model, synthesize
from scenario.geometry import (PositionVector, ReferenceLayout, Scheme, TargetCluster,
                               anchor_lattice, centered_anchor, cluster_positions,
                               corner_references, default_formation, grid_references)

CENTER = PositionVector([25.0], [25.0])
CLUSTER = PositionVector([24.0, 25.0, 24.0, 25.0], [24.0, 24.0, 25.0, 25.0])


def fim(pos, scheme, refs, params=CLEAR):
    return fisher(pos, ObservationLayout.build(pos.n, refs.m, scheme), refs, params)


@pytest.mark.parametrize("params, expected", [(CLEAR, 2.638), (OBSTRUCTED, 12.05)])
def test_toa_only_center_bound(params, expected, square50):
    info = fim(CENTER, Scheme.TOA_ONLY, square50, params)
    assert crb_std(info, 0) == pytest.approx(expected, abs=0.01)
    scale = info.matrix[0, 0]
    assert abs(info.matrix[0, 1]) < 1e-12 * scale
    assert info.matrix[0, 0] == pytest.approx(2.0 / (params.sigma_tau * 299_792_458.0) ** 2)


def test_rss_only_center_bound(square18):
    info = fim(PositionVector([9.0], [9.0]), Scheme.RSS_ONLY, square18)
    expected = math.log(10.0) * 8.0 * 9.0 * math.sqrt(2.0) / (10.0 * 3.086)
    assert crb_std(info, 0) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(7.6, abs=0.05)


def test_hybrid_center_bound(square50):
    info = fim(CENTER, Scheme.HYBRID, square50)
    assert crb_std(info, 0) == pytest.approx(2.62, abs=0.01)


def test_single_target_cotar_equals_hybrid(square50):
    pos = PositionVector([13.0], [31.0])
    np.testing.assert_array_equal(fim(pos, Scheme.COTAR, square50).matrix,
                                  fim(pos, Scheme.HYBRID, square50).matrix)


def test_neighbor_rows_add_information(square50):
    cotar = fim(CLUSTER, Scheme.COTAR, square50)
    hybrid = fim(CLUSTER, Scheme.HYBRID, square50)
    gap = np.linalg.eigvalsh(cotar.matrix - hybrid.matrix)
    assert gap.min() > -1e-9 * np.abs(cotar.matrix).max()
    assert np.all(crb_stds(cotar) <= crb_stds(hybrid) + 1e-12)
    assert crb_stds(cotar).mean() < crb_stds(hybrid).mean()


def test_fisher_is_symmetric(square50):
    info = fim(CLUSTER, Scheme.COTAR, square50)
    np.testing.assert_array_equal(info.matrix, info.matrix.T)
    assert info.n_targets == 4


def test_rms_bound_matches_node_bounds(square50):
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    stds = crb_stds(fisher(CLUSTER, layout, square50, CLEAR))
    eps = rms_bound(CLUSTER, layout, square50, CLEAR)
    assert eps == pytest.approx(math.sqrt(np.mean(stds ** 2)), rel=1e-12)


def test_more_references_never_hurt(square50):
    pos = PositionVector([12.0], [37.0])
    for scheme in (Scheme.TOA_ONLY, Scheme.RSS_ONLY, Scheme.HYBRID):
        four = crb_std(fim(pos, scheme, square50), 0)
        nine = crb_std(fim(pos, scheme, grid_references(50.0, 25.0)), 0)
        assert nine <= four


def test_rss_bound_scales_with_shadowing(square50):
    pos = PositionVector([12.0], [37.0])
    base = crb_std(fim(pos, Scheme.RSS_ONLY, square50), 0)
    doubled = crb_std(fim(pos, Scheme.RSS_ONLY, square50, CLEAR.with_noise(16.0, 8.8e-9)), 0)
    assert doubled == pytest.approx(2.0 * base, rel=1e-9)


def test_singular_information_gives_infinite_bound():
    singular = FisherInfo(np.zeros((2, 2)))
    assert singular.covariance() is None
    assert crb_std(singular, 0) == math.inf
    assert np.all(np.isinf(crb_stds(FisherInfo(np.zeros((4, 4))))))


def test_noise_gain_reproduces_covariance(square50):
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    gain = noise_gain(CLUSTER, layout, square50, CLEAR)
    propagated = gain @ np.diag(build_covariance(layout, CLEAR)) @ gain.T
    covariance = fim(CLUSTER, Scheme.COTAR, square50).covariance()
    np.testing.assert_allclose(propagated, covariance, rtol=1e-6, atol=1e-12)


def test_bias_vanishes_at_truth(square50):
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    bias = linearization_bias(CLUSTER, CLUSTER, layout, square50, CLEAR)
    np.testing.assert_allclose(bias, 0.0, atol=1e-12)


def test_bias_is_second_order(square50):
    truth = PositionVector([20.0], [30.0])
    layout = ObservationLayout.build(1, 4, Scheme.HYBRID)
    small = linearization_bias(truth, truth.translated(0.1, -0.1), layout, square50, CLEAR)
    large = linearization_bias(truth, truth.translated(0.2, -0.2), layout, square50, CLEAR)
    assert np.linalg.norm(large) / np.linalg.norm(small) == pytest.approx(4.0, rel=0.05)


def test_far_start_inflates_expected_rms(square50):
    truth = PositionVector([10.0], [40.0])
    layout = ObservationLayout.build(1, 4, Scheme.HYBRID)
    near = expected_rms(truth, truth, layout, square50, CLEAR)
    far = expected_rms(truth, PositionVector([25.0], [25.0]), layout, square50, CLEAR)
    eps = rms_bound(truth, layout, square50, CLEAR)
    assert near == pytest.approx(eps, rel=1e-9)
    assert far > near
    bias = linearization_bias(truth, PositionVector([25.0], [25.0]), layout, square50, CLEAR)
    assert far ** 2 == pytest.approx(eps ** 2 + bias @ bias, rel=1e-9)


def test_bounds_report(square50):
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    init = CLUSTER.translated(3.0, -2.0)
    report = bounds_report(CLUSTER, layout, square50, CLEAR, init=init)
    assert report.crb_std.shape == (4,)
    assert report.eps == pytest.approx(rms_bound(CLUSTER, layout, square50, CLEAR))
    assert report.expected_rms == pytest.approx(
        expected_rms(CLUSTER, init, layout, square50, CLEAR))
    assert report.mean_crb == pytest.approx(report.crb_std.mean())
    assert bounds_report(CLUSTER, layout, square50, CLEAR).bias is None


def test_crb_map_rows(square18):
    formation = default_formation(4, 1.0)
    anchors = anchor_lattice(18.0, 3.0, formation)
    rows = crb_map(18.0, square18, formation, CLEAR, pitch=3.0)
    assert len(rows) == len(Scheme) * len(anchors) * 2
    assert rows[0].scheme == list(Scheme)[0].value
    assert (rows[0].x, rows[0].y) == (anchors[0][0] + 0.5, anchors[0][1] + 0.5)
    assert [row.metric for row in rows[:2]] == ["crb", "eps"]
    values = {(row.scheme, row.x, row.y, row.metric): row.value_m for row in rows}
    for row in rows:
        if row.scheme == Scheme.COTAR.value:
            assert row.value_m <= values[(Scheme.TOA_ONLY.value, row.x, row.y, row.metric)]
            assert row.condition == "clear"


def test_area_sweep_scaling():
    rows = area_sweep([10.0, 100.0, 1000.0], list(Scheme), [CLEAR])
    table = {(row.side_m, row.scheme): row for row in rows}
    assert len(rows) == 3 * len(Scheme)
    rss = [table[(side, Scheme.RSS_ONLY.value)].crb_m for side in (10.0, 100.0, 1000.0)]
    assert rss[1] == pytest.approx(10.0 * rss[0], rel=1e-9)
    assert rss[2] == pytest.approx(10.0 * rss[1], rel=1e-9)
    toa = [table[(side, Scheme.TOA_ONLY.value)].crb_m for side in (10.0, 100.0, 1000.0)]
    assert toa[2] == pytest.approx(toa[0], rel=1e-9)
    for side in (10.0, 100.0, 1000.0):
        cotar = table[(side, Scheme.COTAR.value)].crb_m
        assert cotar <= table[(side, Scheme.TOA_ONLY.value)].crb_m
        assert cotar <= table[(side, Scheme.RSS_ONLY.value)].crb_m


def test_toa_center_bound_is_exact(square50):
    info = fim(CENTER, Scheme.TOA_ONLY, square50)
    assert crb_std(info, 0) == pytest.approx(toa_distance_std(CLEAR), rel=1e-9)


def test_bounds_are_translation_invariant(square50):
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    base = fisher(CLUSTER, layout, square50, CLEAR).matrix
    moved = fisher(CLUSTER.translated(500.0, -300.0), layout, square50.translated(500.0, -300.0),
                   CLEAR).matrix
    np.testing.assert_allclose(moved, base, rtol=1e-8, atol=1e-10 * np.abs(base).max())


def test_fisher_matches_empirical_score_covariance(square50):
    pos = PositionVector([20.0, 21.0], [30.0, 30.5])
    layout = ObservationLayout.build(2, 4, Scheme.COTAR)
    jacobian = assemble(pos, layout, square50, CLEAR)
    variances = build_covariance(layout, CLEAR)
    model = forward_model(pos, layout, square50, CLEAR)
    rng = np.random.default_rng(21)
    scores = np.array([jacobian.T @ ((synthesize(pos, layout, square50, CLEAR, 0.0, rng).r - model)
                                     / variances) for _ in range(20_000)])
    empirical = scores.T @ scores / len(scores)
    analytic = fisher(pos, layout, square50, CLEAR).matrix
    np.testing.assert_allclose(np.diag(empirical), np.diag(analytic), rtol=0.05)
    scale = np.sqrt(np.outer(np.diag(analytic), np.diag(analytic)))
    assert np.all(np.abs(empirical - analytic) <= 0.05 * scale)


def test_bounds_are_rotation_invariant(square50):
    angle = 0.7
    rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    pos = PositionVector([20.0, 21.0, 20.0, 21.0], [30.0, 30.0, 31.0, 31.0])
    turned_pos = rotation @ np.vstack([pos.x, pos.y])
    turned_refs = rotation @ square50.points().T
    layout = ObservationLayout.build(4, 4, Scheme.COTAR)
    base = crb_stds(fisher(pos, layout, square50, CLEAR))
    turned = crb_stds(fisher(PositionVector(*turned_pos), layout,
                             ReferenceLayout(*turned_refs), CLEAR))
    np.testing.assert_allclose(turned, base, rtol=1e-9)


def small_square_values(scheme):
    formation = default_formation(4, 1.0)
    rows = crb_map(18.0, corner_references(18.0), formation, CLEAR, [scheme],
                   anchors=np.array([[0.5, 0.5], [8.5, 8.5]]))
    corner, center = [row.value_m for row in rows if row.metric == "crb"]
    return corner, center


def test_small_square_map_values():
    toa_corner, toa_center = small_square_values(Scheme.TOA_ONLY)
    assert toa_center == pytest.approx(2.7, abs=0.2)
    assert toa_corner == pytest.approx(2.9, abs=0.2)
    cotar_corner, cotar_center = small_square_values(Scheme.COTAR)
    assert cotar_center == pytest.approx(1.55, abs=0.2)
    assert cotar_corner < cotar_center
    hybrid_corner, _ = small_square_values(Scheme.HYBRID)
    assert cotar_corner < hybrid_corner < toa_corner


def test_cooperation_bound_on_the_large_square():
    refs = corner_references(1000.0)
    eps = []
    for n in (1, 4, 9, 16, 25):
        formation = default_formation(n, 1.0)
        pos = cluster_positions(TargetCluster(formation, centered_anchor(1000.0, formation)))
        eps.append(rms_bound(pos, ObservationLayout.build(n, 4, Scheme.COTAR), refs, CLEAR))
    assert eps[0] == pytest.approx(2.7, abs=0.15)
    assert eps[-1] == pytest.approx(0.7, abs=0.15)
    assert all(later <= earlier + 1e-12 for earlier, later in zip(eps, eps[1:]))
