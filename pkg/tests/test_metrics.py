import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gdflab.metrics import (EvalReport, assign_modes, d_star_on_real, evaluate, kl_over_modes,
                            optimal_d_diagnostic, silverman_bandwidth)
from gdflab.mixture import Component, MixtureSpec, extreme_ring_spec, ring_spec, sample

RING = ring_spec()


def test_assign_nearest_center_and_quality_threshold():
    c = RING.centers
    pts = np.array([c[0], c[3] + [0.059, 0.0], c[5] + [0.0, 0.061], [1e-9, 1e-9]])
    labels, quality = assign_modes(pts, RING)
    assert labels[:3].tolist() == [0, 3, 5]
    assert quality.tolist() == [True, True, False, False]


def test_assign_tie_goes_to_lowest_index():
    spec = MixtureSpec((Component(0.5, (-1.0, 0.0), 0.1), Component(0.5, (1.0, 0.0), 0.1)))
    labels, _ = assign_modes(np.array([[0.0, 3.0]]), spec)
    assert labels.tolist() == [0]


def test_assign_rejects_bad_shape():
    with pytest.raises(ValueError):
        assign_modes(np.zeros((3, 3)), RING)


def test_total_collapse_kl_is_log_k():
    samples = np.repeat(RING.centers[:1], 500, axis=0)
    rep = evaluate(samples, RING)
    assert rep.modes_covered == 1
    assert rep.per_mode_counts == [500] + [0] * 7
    assert rep.kl_to_real == pytest.approx(math.log(8), rel=1e-4)
    assert rep.high_quality_fraction == 1.0


def test_true_samples_cover_all_and_small_kl():
    samples = sample(RING, 20_000, np.random.default_rng(0)).samples
    rep = evaluate(samples, RING)
    assert rep.modes_covered == 8
    assert rep.kl_to_real < 0.01
    assert rep.high_quality_fraction > 0.98


def test_no_quality_samples_gives_undefined_kl():
    rep = evaluate(np.zeros((10, 2)), RING)
    assert rep.modes_covered == 0
    assert rep.kl_to_real is None
    assert rep.to_dict()["kl_direction"] == "generated||real"


def test_kl_validation():
    with pytest.raises(ValueError):
        kl_over_modes([-1, 2], [0.5, 0.5])
    with pytest.raises(ValueError):
        kl_over_modes([1, 2], [0.5, 0.5], smoothing=0.0)
    assert kl_over_modes([5, 5], [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1000), min_size=8, max_size=8).filter(lambda c: sum(c) > 0))
def test_kl_non_negative_and_bounded(counts):
    kl = kl_over_modes(counts, RING.weights)
    assert 0.0 <= kl <= math.log(8) + 1e-4


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 300))
def test_modes_covered_bounds(seed, m):
    x = np.random.default_rng(seed).uniform(-2.5, 2.5, (m, 2))
    rep = evaluate(x, RING)
    assert 0 <= rep.modes_covered <= min(8, m)
    assert sum(rep.per_mode_counts) == round(rep.high_quality_fraction * m)
    assert rep.samples_evaluated == m


def test_minor_modes_excludes_heaviest():
    spec = extreme_ring_spec()
    rep = EvalReport(8, [10, 1, 1, 0, 1, 1, 1, 1], 0.1, 0.5, 100)
    assert rep.minor_modes_covered(spec.weights) == 6


def test_silverman_matches_formula():
    x = np.random.default_rng(1).normal(size=(400, 2))
    expected = (400 * 4 / 4.0) ** (-2 / 6) * np.cov(x, rowvar=False)
    assert np.allclose(silverman_bandwidth(x), expected)


def test_d_star_half_when_generator_matches():
    spec = ring_spec(component_std=0.3)
    gen = sample(spec, 2000, np.random.default_rng(2)).samples
    diag = d_star_on_real(spec, gen, n_points=1000, seed=3)
    assert abs(diag.mean - 0.5) <= 0.1
    assert sum(diag.histogram) == 1000


def test_d_star_high_when_generator_collapses():
    gen = np.random.default_rng(4).normal(RING.centers[0], 0.02, (1000, 2))
    diag = d_star_on_real(RING, gen, seed=5)
    assert diag.mean > 0.8
    assert np.all((diag.values >= 0) & (diag.values <= 1))


def test_d_star_validation():
    with pytest.raises(ValueError):
        optimal_d_diagnostic(RING, np.zeros((50, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        optimal_d_diagnostic(RING, np.ones((200, 2)), np.zeros((3, 2)))
