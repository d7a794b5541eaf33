"""Training-free spherical radiance-field renderer.

Every sample along a target ray is projected into each source panorama. The
source colors are blended with weights proportional to the per-view
visibility, and density comes from how much of each view's occlusion CDF the
sample interval crosses. Both rules are analytic replacements for learned
aggregation and decoding networks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParam, NoSources
from .panorama import EquirectImage, sample_bilinear_wrapped
from .parallel import run_chunks
from .sphere_geom import CameraPose, pixel_directions, project_point, spherical_to_cartesian, pixel_to_spherical
from .visibility import DEFAULT_COMPONENTS, default_bandwidth, mixture_from_depth, occlusion_prob
from .volume_render import RaySamples, composite, importance_resample, ray_rng, sample_deltas, stratified_sample

WEIGHT_FLOOR = 1e-6
ROW_CHUNK = 8


@dataclass(frozen=True)
class SourceView:
    image: EquirectImage
    pose: CameraPose
    depth: EquirectImage
    visibility_bandwidth: float | None = None
    bin_width: float | None = None

    def __post_init__(self):
        if self.image.shape[:2] != self.depth.shape[:2]:
            raise InvalidParam("source image and depth differ in size")
        if self.depth.channels != 1:
            raise InvalidParam("source depth must be single-channel")

    def bandwidth_at(self, depth: np.ndarray) -> np.ndarray:
        if self.visibility_bandwidth is not None:
            return np.full(np.shape(depth), float(self.visibility_bandwidth))
        return default_bandwidth(depth, self.bin_width)


@dataclass(frozen=True)
class RenderConfig:
    height: int = 128
    width: int = 256
    n_coarse: int = 64
    n_fine: int = 64
    near: float = 0.1
    far: float = 10.0
    kappa: float = 1.0
    n_components: int = DEFAULT_COMPONENTS
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if min(self.height, self.width, self.n_coarse) < 1 or self.n_fine < 0:
            raise InvalidParam("sample counts and sizes must be positive")
        if not (0 < self.near < self.far):
            raise InvalidParam("need 0 < near < far")
        if self.kappa <= 0:
            raise InvalidParam("kappa must be positive")


def aggregate_sample(colors, visibilities, hits=None, kappa: float = 1.0):
    """Blend per-view colors and hit rates into one sample color and density.

    ``colors`` is (..., J, 3), ``visibilities`` and ``hits`` are (..., J).
    The color weights are the visibilities (plus a tiny floor), renormalized.
    ``hits`` are the per-view probability masses per unit length crossed by
    the sample interval; density is ``kappa`` times their mean, divided by the
    mean visibility, i.e. the chance of stopping here given the ray got here.
    """
    colors = np.asarray(colors, dtype=np.float64)
    vis = np.asarray(visibilities, dtype=np.float64)
    if vis.shape[-1] < 1:
        raise NoSources("aggregation needs at least one source view")
    w = vis + WEIGHT_FLOOR
    color = (w[..., None] * colors).sum(axis=-2) / w.sum(axis=-1)[..., None]
    if hits is None:
        return color, np.zeros(vis.shape[:-1])
    hits = np.asarray(hits, dtype=np.float64)
    density = kappa * hits.mean(axis=-1) / (vis.mean(axis=-1) + WEIGHT_FLOOR)
    return color, density


def _shade(origins, dirs, t, sources, cfg: RenderConfig):
    """Sample colors and densities for depths ``t`` (R, N) along the rays."""
    t_end = np.concatenate([t[:, 1:], np.maximum(cfg.far, t[:, -1:])], axis=1)
    delta = t_end - t
    t_mid = 0.5 * (t + t_end)
    p_start = origins[:, None, :] + t[..., None] * dirs[:, None, :]
    p_end = origins[:, None, :] + t_end[..., None] * dirs[:, None, :]
    p_mid = origins[:, None, :] + t_mid[..., None] * dirs[:, None, :]
    J = len(sources)
    colors = np.empty(t.shape + (J, 3))
    vis_mid = np.empty(t.shape + (J,))
    vis_start = np.empty(t.shape + (J,))
    hits = np.empty(t.shape + (J,))
    for j, src in enumerate(sources):
        H, W = src.image.height, src.image.width
        (u, v), dist_mid = project_point(p_mid, src.pose, H, W, strict=False)
        colors[..., j, :] = sample_bilinear_wrapped(src.image, u, v)[..., :3]
        d_src = np.maximum(sample_bilinear_wrapped(src.depth, u, v)[..., 0], 1e-6)
        mix = mixture_from_depth(d_src, src.bandwidth_at(d_src), cfg.n_components)
        dist_a = np.linalg.norm(p_start - src.pose.center, axis=-1)
        dist_b = np.linalg.norm(p_end - src.pose.center, axis=-1)
        o_a = occlusion_prob(mix, dist_a)
        o_b = occlusion_prob(mix, dist_b)
        vis_mid[..., j] = 1.0 - occlusion_prob(mix, dist_mid)
        vis_start[..., j] = 1.0 - np.minimum(o_a, o_b)
        with np.errstate(divide="ignore", invalid="ignore"):
            hits[..., j] = np.where(delta > 0, np.abs(o_b - o_a) / delta, 0.0)
    color, _ = aggregate_sample(colors, vis_mid)
    _, density = aggregate_sample(colors, vis_start, hits, cfg.kappa)
    # density was built for [t, t_end); make the compositor use the same interval
    deltas = sample_deltas(t, cfg.far)
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(deltas > 0, density * delta / deltas, 0.0)
    return color, density


def _strictly_increasing(t: np.ndarray) -> np.ndarray:
    step = 1e-9 * np.arange(t.shape[-1])
    return np.maximum.accumulate(t - step, axis=-1) + step


def render_rays(origins, dirs, sources, cfg: RenderConfig, rng: np.random.Generator, jitter: bool = True):
    """Coarse-to-fine rendering of a batch of rays; returns the fine-pass RenderResult."""
    sources = list(sources)
    if not sources:
        raise NoSources("rendering needs at least one source view")
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    R = dirs.shape[0]
    t = stratified_sample(cfg.near, cfg.far, cfg.n_coarse, rng, shape=(R,), jitter=jitter)
    color, sigma = _shade(origins, dirs, t, sources, cfg)
    coarse = composite(RaySamples(t, sigma, color), cfg.far)
    if cfg.n_fine == 0:
        return coarse
    t = importance_resample(t, coarse.weights, cfg.n_fine, rng, cfg.far, merge=True)
    t = _strictly_increasing(t)
    color, sigma = _shade(origins, dirs, t, sources, cfg)
    return composite(RaySamples(t, sigma, color), cfg.far)


def render_ray(u: float, v: float, target_pose: CameraPose, sources, cfg: RenderConfig, rng=None):
    """Render a single target pixel (continuous coordinates)."""
    theta, phi = pixel_to_spherical(u, v, cfg.height, cfg.width)
    d = spherical_to_cartesian(theta, phi) @ target_pose.rotation.T
    rng = rng if rng is not None else ray_rng(cfg.seed, 0)
    res = render_rays(target_pose.center[None], d[None], sources, cfg, rng)
    return res


def render_panorama(target_pose: CameraPose, sources, cfg: RenderConfig):
    """Render the full target panorama; returns (color, expected depth, residual) images."""
    sources = list(sources)
    if not sources:
        raise NoSources("rendering needs at least one source view")
    H, W = cfg.height, cfg.width
    dirs = pixel_directions(H, W) @ target_pose.rotation.T
    color = np.empty((H, W, 3))
    depth = np.empty((H, W))
    residual = np.empty((H, W))

    def work(chunk, r0, r1):
        rng = ray_rng(cfg.seed, chunk)
        d = dirs[r0:r1].reshape(-1, 3)
        o = np.broadcast_to(target_pose.center, d.shape)
        res = render_rays(o, d, sources, cfg, rng)
        color[r0:r1] = res.color.reshape(r1 - r0, W, 3)
        depth[r0:r1] = res.depth.reshape(r1 - r0, W)
        residual[r0:r1] = res.transmittance_residual.reshape(r1 - r0, W)

    run_chunks(work, H, ROW_CHUNK, cfg.threads)
    return (EquirectImage(np.clip(color, 0.0, 1.0).astype(np.float32)),
            EquirectImage(depth.astype(np.float32)),
            EquirectImage(residual.astype(np.float32)))
