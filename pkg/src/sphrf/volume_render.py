"""Alpha compositing along rays.

All functions broadcast over leading "ray" axes: sample arrays are ``(..., N)``
and colors ``(..., N, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParam, InvalidRange

DEFAULT_FAR_CAP = 10.0
PDF_FLOOR = 1e-5
_ALPHA_MAX = np.nextafter(1.0, 0.0)


def ray_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream); independent of call order."""
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) | ((int(stream) & 0xFFFFFFFFFFFFFFFF) << 64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RaySamples:
    t: np.ndarray
    sigma: np.ndarray
    color: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        color = np.asarray(self.color, dtype=np.float64)
        if t.shape[-1] < 1:
            raise InvalidParam("need at least one sample")
        if t.shape != sigma.shape or color.shape[:-1] != t.shape:
            raise InvalidParam("t, sigma and color disagree in shape")
        if np.any(sigma < 0):
            raise InvalidParam("densities must be nonnegative")
        if np.any(np.diff(t, axis=-1) <= 0):
            raise InvalidParam("sample depths must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "color", color)


@dataclass(frozen=True)
class RenderResult:
    color: np.ndarray
    depth: np.ndarray
    weights: np.ndarray
    transmittance_residual: np.ndarray


def alpha_from_density(sigma, delta) -> np.ndarray:
    x = np.asarray(sigma, dtype=np.float64) * np.asarray(delta, dtype=np.float64)
    return np.minimum(-np.expm1(-x), _ALPHA_MAX)


def sample_deltas(t, far_cap: float = DEFAULT_FAR_CAP) -> np.ndarray:
    """Interval lengths ``t[i+1] - t[i]``; the last interval ends at ``far_cap``."""
    t = np.asarray(t, dtype=np.float64)
    last = np.maximum(far_cap - t[..., -1:], 0.0)
    return np.concatenate([np.diff(t, axis=-1), last], axis=-1)


def transmittance(alpha) -> np.ndarray:
    """Exclusive product of (1 - alpha), with one extra trailing entry (the residual)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    ones = np.ones(alpha.shape[:-1] + (1,))
    return np.cumprod(np.concatenate([ones, 1.0 - alpha], axis=-1), axis=-1)


def weights_from_alpha(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=np.float64)
    return transmittance(alpha)[..., :-1] * alpha


def blend_weights(samples: RaySamples, far_cap: float = DEFAULT_FAR_CAP) -> np.ndarray:
    alpha = alpha_from_density(samples.sigma, sample_deltas(samples.t, far_cap))
    return weights_from_alpha(alpha)


def composite(samples: RaySamples, far_cap: float = DEFAULT_FAR_CAP) -> RenderResult:
    alpha = alpha_from_density(samples.sigma, sample_deltas(samples.t, far_cap))
    trans = transmittance(alpha)
    w = trans[..., :-1] * alpha
    color = np.einsum("...n,...nc->...c", w, samples.color)
    total = w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        depth = np.where(total > 0, (w * samples.t).sum(axis=-1) / total, 0.0)
    return RenderResult(color, depth, w, trans[..., -1])


def stratified_sample(near: float, far: float, N: int, rng=None, shape=(), jitter: bool = True) -> np.ndarray:
    """One sample per equal-width bin of [near, far]; bin midpoints without jitter."""
    if not (0 < near < far):
        raise InvalidRange(f"need 0 < near < far, got near={near}, far={far}")
    if N < 1:
        raise InvalidParam("N must be at least 1")
    edges = np.linspace(near, far, N + 1)
    lo, width = edges[:-1], np.diff(edges)
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    if jitter:
        if rng is None:
            raise InvalidParam("jittered sampling needs an rng")
        offset = rng.random(shape + (N,))
    else:
        offset = np.full(shape + (N,), 0.5)
    return lo + width * offset


def _batched_searchsorted(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """searchsorted(cdf[r], u[r], side='right') for every row r at once."""
    rows = cdf.shape[0]
    offset = 2.0 * np.arange(rows)[:, None]
    idx = np.searchsorted((cdf + offset).ravel(), (u + offset).ravel(), side="right")
    return idx.reshape(u.shape) - (cdf.shape[1] * np.arange(rows))[:, None]


def importance_resample(coarse_t, coarse_weights, N_fine: int, rng, far_cap: float = DEFAULT_FAR_CAP,
                        merge: bool = True) -> np.ndarray:
    """Inverse-CDF sampling of the piecewise-constant PDF ~ (w + floor) over the coarse intervals.

    Interval i spans ``[t_i, t_{i+1})`` (the last one ends at ``far_cap``),
    matching the compositing intervals. Returns sorted fine depths, merged
    with the coarse ones when ``merge`` is set.
    """
    t = np.asarray(coarse_t, dtype=np.float64)
    w = np.asarray(coarse_weights, dtype=np.float64)
    if np.any(w < 0):
        raise InvalidParam("coarse weights must be nonnegative")
    lead = t.shape[:-1]
    N = t.shape[-1]
    t2 = t.reshape(-1, N)
    w2 = w.reshape(-1, N) + PDF_FLOOR
    edges = np.concatenate([t2, np.maximum(far_cap, t2[:, -1:])], axis=1)
    pdf = w2 / w2.sum(axis=1, keepdims=True)
    cdf = np.concatenate([np.zeros((t2.shape[0], 1)), np.cumsum(pdf, axis=1)], axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((t2.shape[0], N_fine))
    k = np.clip(_batched_searchsorted(cdf, u) - 1, 0, N - 1)
    c0 = np.take_along_axis(cdf, k, axis=1)
    p = np.take_along_axis(pdf, k, axis=1)
    lo = np.take_along_axis(edges, k, axis=1)
    hi = np.take_along_axis(edges, k + 1, axis=1)
    frac = np.clip((u - c0) / p, 0.0, 1.0)
    fine = lo + frac * (hi - lo)
    out = np.concatenate([t2, fine], axis=1) if merge else fine
    out.sort(axis=1)
    return out.reshape(lead + (out.shape[1],))
