"""Depth hypotheses for sphere sweeps: uniform bins plus mono-guided Gaussian-quantile bins."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfc

from .errors import InvalidParam, InvalidRange, OutOfDomain
from .panorama import EquirectImage

NEAR = 0.1
FAR = 10.0
MIN_GAP = 1e-6

UNIFORM = 0
MONO = 1

# Acklam's rational approximation of the standard normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def std_normal_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=np.float64) / np.sqrt(2.0))


def _acklam_lower(p):
    """Rational approximation for p <= 0.5 (relative error ~1e-9)."""
    out = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    out[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
        (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    q = p[~tail] - 0.5
    r = q * q
    out[~tail] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    return out


def std_normal_quantile(p):
    """Phi^-1(p): rational approximation followed by one Newton step on the CDF.

    The upper half is evaluated as -Phi^-1(1 - p) so both tails keep full
    relative accuracy.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise OutOfDomain("quantile needs p in (0, 1)")
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    upper = p > 0.5
    q = np.where(upper, 1.0 - p, p)
    z = _acklam_lower(q)
    pdf = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    z = z - (std_normal_cdf(z) - q) / pdf
    z = np.where(upper, -z, z)
    z = np.where(p == 0.5, 0.0, z)
    return z[0] if scalar else z


def coverage_mass(beta: float) -> float:
    """P* = erf(beta / sqrt 2): Gaussian mass inside mu +- beta sigma."""
    return float(erf(beta / np.sqrt(2.0)))


def quantile_bin_edges(N_mono: int, beta: float) -> np.ndarray:
    """The N_mono + 1 probability levels bounding the equal-mass bins."""
    if N_mono < 1 or beta <= 0:
        raise InvalidParam("need N_mono >= 1 and beta > 0")
    P = coverage_mass(beta)
    k = np.arange(N_mono + 1)
    return k / N_mono * P + (1.0 - P) / 2.0


def quantile_offsets(N_mono: int, beta: float) -> np.ndarray:
    """Standardized offsets b_k: midpoints (in z) of N_mono equal-mass bins covering +-beta.

    Only the lower half of the edges is evaluated; the upper half is its
    mirror image, which makes the offsets exactly antisymmetric.
    """
    edges = quantile_bin_edges(N_mono, beta)
    half = (N_mono + 1) // 2
    z_low = std_normal_quantile(edges[:half])
    mid = [0.0] if N_mono % 2 == 0 else []
    z = np.concatenate([z_low, mid, -z_low[::-1]])
    b = 0.5 * (z[:-1] + z[1:])
    if N_mono % 2:
        b[N_mono // 2] = 0.0
    return b


@dataclass(frozen=True)
class GaussianPrior:
    mu: EquirectImage
    sigma: float = 0.5
    beta: float = 3.0

    def __post_init__(self):
        if self.mu.channels != 1:
            raise InvalidParam("prior must be a single-channel depth map")
        if np.any(self.mu.data <= 0) or self.sigma <= 0 or self.beta <= 0:
            raise InvalidParam("prior depth, sigma and beta must be positive")


@dataclass(frozen=True)
class DepthCandidates:
    """Ascending depth hypotheses, shape (D,) or per pixel (H, W, D), with source tags."""

    t: np.ndarray
    source: np.ndarray

    @property
    def count(self) -> int:
        return self.t.shape[-1]

    @property
    def per_pixel(self) -> bool:
        return self.t.ndim == 3

    def at(self, row: int, col: int) -> np.ndarray:
        return self.t[row, col] if self.per_pixel else self.t

    def bin_width(self) -> float:
        """Median spacing of the hypotheses, a scalar resolution summary."""
        return float(np.median(np.diff(self.t, axis=-1)))


def mono_candidates(prior: GaussianPrior, u, v, N_mono: int, near: float = NEAR, far: float = FAR) -> np.ndarray:
    """Candidates mu + b_k sigma at integer pixel (column u, row v), clamped to [near, far]."""
    mu = prior.mu.scalar()[np.asarray(v), np.asarray(u)]
    b = quantile_offsets(N_mono, prior.beta)
    return np.clip(np.asarray(mu, dtype=np.float64)[..., None] + b * prior.sigma, near, far)


def mono_candidate_map(prior: GaussianPrior, N_mono: int, near: float = NEAR, far: float = FAR) -> np.ndarray:
    H, W = prior.mu.height, prior.mu.width
    rows, cols = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    return mono_candidates(prior, cols, rows, N_mono, near, far)


def uniform_candidates(near: float, far: float, N_uni: int, inverse_depth: bool = False) -> np.ndarray:
    if not (0 < near < far):
        raise InvalidRange(f"need 0 < near < far, got near={near}, far={far}")
    if N_uni < 1:
        raise InvalidParam("N_uni must be at least 1")
    if inverse_depth:
        edges = np.linspace(1.0 / near, 1.0 / far, N_uni + 1)
        return np.sort(1.0 / (0.5 * (edges[:-1] + edges[1:])))
    edges = np.linspace(near, far, N_uni + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _enforce_ascent(t: np.ndarray, far: float) -> np.ndarray:
    step = MIN_GAP * np.arange(t.shape[-1])
    t = np.maximum.accumulate(t - step, axis=-1) + step
    if np.any(t[..., -1] > far):
        # push back down from the far end instead
        rev = np.minimum(t[..., ::-1], far) + step
        t = (np.minimum.accumulate(rev, axis=-1) - step)[..., ::-1]
    return t


def merge_candidates(uniform, mono=None, far: float = FAR) -> DepthCandidates:
    """Sorted union of uniform and (optionally per-pixel) mono candidates."""
    uniform = np.asarray(uniform, dtype=np.float64)
    if mono is None or np.size(mono) == 0:
        t = np.sort(uniform)
        tags = np.full(t.shape, UNIFORM, dtype=np.int8)
        return DepthCandidates(_enforce_ascent(t, far), tags)
    mono = np.asarray(mono, dtype=np.float64)
    lead = mono.shape[:-1]
    uni = np.broadcast_to(uniform, lead + uniform.shape)
    t = np.concatenate([uni, mono], axis=-1)
    tags = np.concatenate([np.full(uni.shape, UNIFORM, np.int8), np.full(mono.shape, MONO, np.int8)], axis=-1)
    order = np.argsort(t, axis=-1, kind="stable")
    t = np.take_along_axis(t, order, axis=-1)
    tags = np.take_along_axis(tags, order, axis=-1)
    return DepthCandidates(_enforce_ascent(t, far), tags)


def build_candidates(near: float = NEAR, far: float = FAR, N_uni: int = 59, N_mono: int = 5,
                     prior: GaussianPrior | None = None, inverse_depth: bool = False) -> DepthCandidates:
    """Uniform candidates, plus mono-guided ones when a prior is given and N_mono > 0."""
    uni = uniform_candidates(near, far, N_uni, inverse_depth) if N_uni > 0 else np.empty(0)
    if prior is None or N_mono == 0:
        return merge_candidates(uni, None, far)
    mono = mono_candidate_map(prior, N_mono, near, far)
    if N_uni == 0:
        return merge_candidates(np.empty(0), mono, far)
    return merge_candidates(uni, mono, far)
