import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import sphere_views
from sphrf.depth_sampler import uniform_candidates
from sphrf.errors import InvalidParam
from sphrf.visibility import (LogisticMixture, default_bandwidth, mixture_from_depth, occlusion_prob,
                              sample_visibility, visibility)


def random_mixture(rng, n, batch=()):
    mu = rng.uniform(0.2, 9.0, batch + (n,))
    sigma = rng.uniform(0.01, 1.0, batch + (n,))
    m = rng.random(batch + (n,))
    m /= m.sum(axis=-1, keepdims=True)
    m[..., -1] = 1.0 - m[..., :-1].sum(axis=-1)
    return LogisticMixture(mu, sigma, m)


def test_single_component_median():
    mix = LogisticMixture([2.0], [0.1], [1.0])
    assert occlusion_prob(mix, 2.0) == 0.5
    assert visibility(mix, 2.0) == 0.5
    assert sample_visibility(mix, 2.0) == 0.5


def test_left_tail():
    mix = LogisticMixture([5.0], [0.05], [1.0])
    assert occlusion_prob(mix, 1e-6) < 1e-30
    assert visibility(mix, 1e-6) == pytest.approx(1.0)


def test_two_saturated_components():
    mix = LogisticMixture([1.0, 3.0], [0.1, 0.1], [0.5, 0.5])
    assert occlusion_prob(mix, 2.0) == pytest.approx(0.5, abs=1e-4)


def test_complement_exact(rng):
    mix = random_mixture(rng, 2, (10**4,))
    t = rng.uniform(0.01, 10, 10**4)
    assert np.all(visibility(mix, t) + occlusion_prob(mix, t) == 1.0)


def test_monotone_random_mixtures(rng):
    mix = random_mixture(rng, 3, (1000,))
    t = np.sort(rng.uniform(0.01, 12, (100, 1000)), axis=0)
    o = occlusion_prob(mix, t)
    v = visibility(mix, t)
    assert np.all(np.diff(o, axis=0) >= 0)
    assert np.all(np.diff(v, axis=0) <= 0)


def test_right_limit(rng):
    for _ in range(200):
        mix = random_mixture(rng, int(rng.integers(1, 4)))
        t = mix.mu.max() + 40 * mix.sigma.max()
        assert occlusion_prob(mix, t) == pytest.approx(1.0, abs=1e-9)


@given(st.floats(0.1, 10), st.floats(0.01, 2), st.floats(0, 1), st.floats(0.01, 20))
def test_identical_components_collapse(mu, sigma, w, t):
    single = LogisticMixture([mu], [sigma], [1.0])
    pair = LogisticMixture([mu, mu], [sigma, sigma], [w, 1.0 - w])
    assert occlusion_prob(pair, t) == occlusion_prob(single, t)


def test_mixture_validation():
    with pytest.raises(InvalidParam):
        LogisticMixture([1.0], [0.0], [1.0])
    with pytest.raises(InvalidParam):
        LogisticMixture([1.0, 2.0], [0.1, 0.1], [0.6, 0.6])
    with pytest.raises(InvalidParam):
        mixture_from_depth(-1.0, 0.1)
    with pytest.raises(InvalidParam):
        mixture_from_depth(1.0, 0.1, N_l=3)


def test_from_depth_single():
    mix = mixture_from_depth(2.0, 0.05, N_l=1)
    assert mix.count == 1 and visibility(mix, 2.0) == 0.5


@given(st.floats(0.1, 10), st.floats(1e-3, 1.0), st.sampled_from([1, 2]))
def test_from_depth_invariants(depth, bw, n):
    mix = mixture_from_depth(depth, bw, n)
    assert mix.count == n
    assert abs(mix.m.sum() - 1.0) <= 1e-12 and np.all(mix.sigma > 0)


def test_default_bandwidth():
    assert default_bandwidth(2.0) == pytest.approx(0.04)
    assert default_bandwidth(2.0, bin_width=0.2) == pytest.approx(0.1)


def test_sphere_scene_oracle_depth():
    _, _, views = sphere_views()
    gt = views[0][1].scalar()
    bin_width = np.diff(uniform_candidates(0.1, 10.0, 64)).mean()
    mix = mixture_from_depth(gt, default_bandwidth(gt, bin_width))
    v_gt = visibility(mix, gt)
    v_half = visibility(mix, 0.5 * gt)
    assert v_gt.min() >= 0.4 and v_gt.max() <= 0.6
    assert v_half.min() >= 0.95
