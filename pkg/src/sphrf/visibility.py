"""Visibility along a ray as the complement of a logistic-mixture occlusion CDF.

The mixture parameters are normally predicted by a network from a depth map.
Here they are built analytically from a single depth value: a sharp logistic
step at the surface plus a wider, weaker step at the same depth that models
depth uncertainty. That construction is a modeling stand-in, not a learned
decoder.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidParam

DEFAULT_COMPONENTS = 2
# Two-component layout: (offset relative to depth, scale multiplier, weight).
SURFACE_COMPONENT = (0.0, 1.0, 0.8)
TAIL_COMPONENT = (0.0, 3.0, 0.2)


@dataclass(frozen=True)
class LogisticMixture:
    """Mixture parameters; arrays may carry leading batch axes, components last."""

    mu: np.ndarray
    sigma: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        mu, sigma, m = (np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in (self.mu, self.sigma, self.m))
        mu, sigma, m = np.broadcast_arrays(mu, sigma, m)
        if mu.shape[-1] < 1:
            raise InvalidParam("mixture needs at least one component")
        if np.any(sigma <= 0):
            raise InvalidParam("logistic scales must be positive")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=-1) - 1.0) > 1e-12):
            raise InvalidParam("blending weights must be nonnegative and sum to 1")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "m", m)

    @property
    def count(self) -> int:
        return self.mu.shape[-1]


def occlusion_prob(mix: LogisticMixture, t) -> np.ndarray:
    """o(t) = sum_k m_k S((t - mu_k) / sigma_k), broadcasting t against the batch axes."""
    t = np.asarray(t, dtype=np.float64)[..., None]
    s = expit((t - mix.mu) / mix.sigma)
    o = (mix.m * s).sum(axis=-1)
    # identical components: report the single logistic itself, not a rounded re-sum
    same = np.all(mix.mu == mix.mu[..., :1], axis=-1) & np.all(mix.sigma == mix.sigma[..., :1], axis=-1)
    if np.any(same):
        o = np.where(same, s[..., 0], o)
    return o


def visibility(mix: LogisticMixture, t) -> np.ndarray:
    return 1.0 - occlusion_prob(mix, t)


def sample_visibility(mix: LogisticMixture, t_i) -> np.ndarray:
    """Visibility of sample depth(s) t_i measured in the view the mixture belongs to."""
    return visibility(mix, t_i)


def default_bandwidth(depth, bin_width: float | None = None):
    depth = np.asarray(depth, dtype=np.float64)
    bw = 0.02 * depth
    if bin_width is not None:
        bw = np.maximum(bw, 0.5 * bin_width)
    return bw


def mixture_from_depth(depth, bandwidth, N_l: int = DEFAULT_COMPONENTS) -> LogisticMixture:
    """Analytic mixture for a surface at ``depth`` (scalar or array)."""
    depth = np.asarray(depth, dtype=np.float64)
    bandwidth = np.asarray(bandwidth, dtype=np.float64)
    if np.any(depth <= 0) or np.any(bandwidth <= 0):
        raise InvalidParam("depth and bandwidth must be positive")
    depth, bandwidth = np.broadcast_arrays(depth, bandwidth)
    if N_l == 1:
        return LogisticMixture(depth[..., None], bandwidth[..., None], np.ones(depth.shape + (1,)))
    if N_l == 2:
        comps = (SURFACE_COMPONENT, TAIL_COMPONENT)
        mu = np.stack([depth * (1.0 + off) for off, _, _ in comps], axis=-1)
        sigma = np.stack([bandwidth * k for _, k, _ in comps], axis=-1)
        m = np.broadcast_to(np.array([w for _, _, w in comps]), mu.shape)
        return LogisticMixture(mu, sigma, m)
    raise InvalidParam(f"N_l must be 1 or 2, got {N_l}")
