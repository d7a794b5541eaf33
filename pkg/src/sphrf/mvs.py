"""360 degree sphere-sweep stereo.

Pipeline: features -> per-source cost volumes -> mean fusion -> box-filter
aggregation -> winner-take-all or softmin depth decoding. Hand-crafted
descriptors and the box filter stand in for learned encoders and the 3D CNN.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from .depth_sampler import DepthCandidates
from .errors import DescriptorMismatch, InvalidParam, ShapeMismatch, UnknownDescriptor
from .image_io import atomic_write_bytes, atomic_write_text
from .panorama import EquirectImage, resize_area, sample_bilinear_wrapped
from .parallel import run_chunks
from .sphere_geom import CameraPose, cast_ray, pixel_centers, pixel_directions, project_point

DESCRIPTORS = ("rgb", "zncc_patch", "census")
PATCH = 5
ZNCC_EPS = 1e-6
DEFAULT_TAU = 0.02
ROW_CHUNK = 16


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray
    descriptor: str

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class CostVolume:
    cost: np.ndarray  # (H, W, D), lower is better
    candidates: DepthCandidates

    def __post_init__(self):
        if self.cost.shape[-1] != self.candidates.count:
            raise ShapeMismatch("cost volume depth does not match the candidate count")
        if self.candidates.per_pixel and self.candidates.t.shape != self.cost.shape:
            raise ShapeMismatch("per-pixel candidates must match the volume shape")

    @property
    def shape(self):
        return self.cost.shape

    def depth_grid(self) -> np.ndarray:
        """Candidate depths broadcast to the volume shape."""
        return np.broadcast_to(self.candidates.t, self.cost.shape)


def _gray(data: np.ndarray) -> np.ndarray:
    if data.shape[2] == 1:
        return data[:, :, 0].astype(np.float64)
    return data[:, :, :3].astype(np.float64) @ np.array([0.299, 0.587, 0.114])


def _patch_stack(gray: np.ndarray, size: int = PATCH) -> np.ndarray:
    """(H, W, size*size) neighborhoods; wrap horizontally, clamp vertically."""
    r = size // 2
    padded = np.pad(gray, ((r, r), (0, 0)), mode="edge")
    padded = np.pad(padded, ((0, 0), (r, r)), mode="wrap")
    H, W = gray.shape
    out = np.empty((H, W, size * size))
    k = 0
    for dy in range(size):
        for dx in range(size):
            out[:, :, k] = padded[dy:dy + H, dx:dx + W]
            k += 1
    return out


def extract_features(img: EquirectImage, descriptor: str = "zncc_patch", downsample: int = 1) -> FeatureMap:
    if descriptor not in DESCRIPTORS:
        raise UnknownDescriptor(f"unknown descriptor {descriptor!r}; choose from {DESCRIPTORS}")
    if downsample > 1:
        img = resize_area(img, downsample)
    if descriptor == "rgb":
        return FeatureMap(img.data.astype(np.float64), descriptor)
    patches = _patch_stack(_gray(img.data))
    if descriptor == "zncc_patch":
        centered = patches - patches.mean(axis=-1, keepdims=True)
        norm = np.maximum(np.linalg.norm(centered, axis=-1, keepdims=True), ZNCC_EPS)
        # zero-variance patches stay exactly zero
        return FeatureMap(np.where(norm > ZNCC_EPS, centered / norm, 0.0), descriptor)
    center = patches[:, :, PATCH * PATCH // 2]
    neighbors = np.delete(patches, PATCH * PATCH // 2, axis=-1)
    return FeatureMap((neighbors < center[..., None]).astype(np.float64), descriptor)


def sphere_sweep_warp(ref_pose: CameraPose, src_pose: CameraPose, u, v, t_i, H: int, W: int, strict: bool = True):
    """Source-view pixel of reference pixel (u, v) hypothesized at spherical depth t_i."""
    ray = cast_ray(u, v, ref_pose, H, W)
    t_i = np.asarray(t_i, dtype=np.float64)
    pts = ray.origin + t_i[..., None] * ray.direction
    pix, _ = project_point(pts, src_pose, H, W, strict=strict)
    return pix


def build_cost_volume(ref: FeatureMap, src: FeatureMap, ref_pose: CameraPose, src_pose: CameraPose,
                      candidates: DepthCandidates, threads: int | None = None) -> CostVolume:
    """cost(u, v, i) = mean |f_ref(u, v) - f_src(warp(u, v, t_i))|."""
    if ref.descriptor != src.descriptor or ref.data.shape != src.data.shape:
        raise DescriptorMismatch("reference and source features differ in descriptor or shape")
    H, W, _ = ref.data.shape
    D = candidates.count
    if candidates.per_pixel and candidates.t.shape[:2] != (H, W):
        raise ShapeMismatch("per-pixel candidates do not match the feature map")
    dirs = pixel_directions(H, W) @ ref_pose.rotation.T
    cost = np.empty((H, W, D))

    def work(_, r0, r1):
        d = dirs[r0:r1]
        f_ref = ref.data[r0:r1]
        t_all = candidates.t[r0:r1] if candidates.per_pixel else np.broadcast_to(candidates.t, (r1 - r0, W, D))
        for i in range(D):
            pts = ref_pose.center + t_all[:, :, i, None] * d
            (u, v), _ = project_point(pts, src_pose, H, W, strict=False)
            f_src = sample_bilinear_wrapped(src.data, u, v)
            cost[r0:r1, :, i] = np.abs(f_ref - f_src).mean(axis=-1)

    run_chunks(work, H, ROW_CHUNK, threads)
    return CostVolume(cost, candidates)


def fuse_cost_volumes(volumes) -> CostVolume:
    volumes = list(volumes)
    if not volumes:
        raise InvalidParam("nothing to fuse")
    first = volumes[0]
    for vol in volumes[1:]:
        if vol.shape != first.shape or not np.array_equal(vol.candidates.t, first.candidates.t):
            raise ShapeMismatch("cost volumes differ in shape or candidates")
    if len(volumes) == 1:
        return first
    return CostVolume(np.mean([v.cost for v in volumes], axis=0), first.candidates)


def _interp_rows(x: np.ndarray, y: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of each row's curve (x, y) at that row's queries q.

    ``x`` is ascending per row; queries outside the range take the end value.
    """
    n, D = x.shape
    q = np.clip(q, x[:, :1], x[:, -1:])
    span = x[:, -1:] - x[:, :1] + 1.0
    offset = np.cumsum(np.concatenate([[0.0], span[:-1, 0] + 1.0]))[:, None] - x[:, :1]
    k = np.searchsorted((x + offset).ravel(), (q + offset).ravel(), side="right").reshape(q.shape)
    k = k - (D * np.arange(n))[:, None]
    k0 = np.clip(k - 1, 0, D - 2)
    x0 = np.take_along_axis(x, k0, axis=1)
    x1 = np.take_along_axis(x, k0 + 1, axis=1)
    y0 = np.take_along_axis(y, k0, axis=1)
    y1 = np.take_along_axis(y, k0 + 1, axis=1)
    f = np.clip((q - x0) / np.maximum(x1 - x0, 1e-12), 0.0, 1.0)
    return y0 + f * (y1 - y0)


def _aggregate_per_pixel(vol: CostVolume, radius: int) -> np.ndarray:
    """Window mean of the neighbors' cost curves evaluated at each pixel's own depths."""
    t = vol.candidates.t
    H, W, D = t.shape
    acc = np.zeros((H, W, D))
    rows = np.arange(H)
    q = t.reshape(-1, D)
    for dy in range(-radius, radius + 1):
        r = np.clip(rows + dy, 0, H - 1)
        for dx in range(-radius, radius + 1):
            nt = np.roll(t[r], -dx, axis=1).reshape(-1, D)
            nc = np.roll(vol.cost[r], -dx, axis=1).reshape(-1, D)
            acc += _interp_rows(nt, nc, q).reshape(H, W, D)
    return acc / (2 * radius + 1) ** 2


def aggregate_cost(vol: CostVolume, radius: int) -> CostVolume:
    """Spatial box filter of half-width ``radius``: wrap horizontally, clamp vertically.

    Shared candidates are filtered slab by slab (separably). With per-pixel
    candidates slab k holds different depths at different pixels, so each
    neighbor's cost curve is interpolated at the center pixel's depths first.
    """
    if radius < 0:
        raise InvalidParam("radius must be nonnegative")
    if radius == 0:
        return vol
    if vol.candidates.per_pixel:
        return CostVolume(_aggregate_per_pixel(vol, radius), vol.candidates)
    size = 2 * radius + 1
    c = uniform_filter1d(vol.cost, size, axis=1, mode="wrap")
    c = uniform_filter1d(c, size, axis=0, mode="nearest")
    return CostVolume(c, vol.candidates)


def decode_depth(vol: CostVolume, mode: str = "soft", tau: float = DEFAULT_TAU) -> EquirectImage:
    t = vol.depth_grid()
    if mode == "wta":
        k = np.argmin(vol.cost, axis=-1)
        depth = np.take_along_axis(t, k[..., None], axis=-1)[..., 0]
    elif mode == "soft":
        if tau <= 0:
            raise InvalidParam("softmin temperature must be positive")
        z = -(vol.cost - vol.cost.min(axis=-1, keepdims=True)) / tau
        w = np.exp(z)
        depth = (w * t).sum(axis=-1) / w.sum(axis=-1)
    else:
        raise InvalidParam(f"unknown decode mode {mode!r}")
    return EquirectImage(depth.astype(np.float32))


def pole_mask(H: int, fraction: float = 0.05) -> np.ndarray:
    """Boolean (H,) rows that are NOT within ``fraction`` of either pole."""
    phi = (np.arange(H) + 0.5) / H
    return (phi >= fraction) & (phi <= 1.0 - fraction)


def upsample_depth(depth: EquirectImage, H: int, W: int) -> EquirectImage:
    """Bilinear (wrap-aware) resize of a coarse depth map to H x W."""
    u, v = pixel_centers(H, W)
    su = u * depth.width / W
    sv = v * depth.height / H
    return EquirectImage(sample_bilinear_wrapped(depth, su, sv).astype(np.float32))


def consistency_mask(depth: EquirectImage, pose: CameraPose, others, rel: float = 0.1) -> np.ndarray:
    """Pixels whose 3D point agrees with at least one other view's depth map.

    ``others`` is a sequence of (depth, pose). A point agrees with a view when
    its distance to that camera matches the depth stored at the nearest
    projected pixel within ``rel`` (relative). Pixels that fail every check
    are typically half-occluded: seen here but hidden from the other cameras.
    """
    H, W = depth.height, depth.width
    d = depth.scalar().astype(np.float64)
    pts = pose.center + (pixel_directions(H, W) @ pose.rotation.T) * d[..., None]
    ok = np.zeros((H, W), dtype=bool)
    for other_depth, other_pose in others:
        if other_depth.shape[:2] != (H, W):
            raise ShapeMismatch("consistency check needs depth maps of equal size")
        (u, v), dist = project_point(pts, other_pose, H, W, strict=False)
        ui = np.floor(u).astype(int) % W
        vi = np.clip(np.floor(v).astype(int), 0, H - 1)
        ok |= np.abs(other_depth.scalar()[vi, ui] - dist) <= rel * dist
    return ok


def fill_inconsistent(depth: EquirectImage, valid: np.ndarray) -> EquirectImage:
    """Replace invalid pixels by the farther of the nearest valid pixels on the same row.

    Half-occluded regions belong to the background, hence the farther
    neighbor. Rows without any valid pixel are left untouched.
    """
    d = depth.scalar()
    H, W = d.shape
    valid = np.asarray(valid, dtype=bool)
    idx = np.broadcast_to(np.arange(3 * W), (H, 3 * W))
    v3 = np.tile(valid, 3)
    left = np.maximum.accumulate(np.where(v3, idx, -1), axis=1)[:, W:2 * W]
    right = np.minimum.accumulate(np.where(v3, idx, 3 * W)[:, ::-1], axis=1)[:, ::-1][:, W:2 * W]
    has = valid.any(axis=1)[:, None]
    d3 = np.tile(d, 3)
    left = np.clip(left, 0, 3 * W - 1)
    right = np.clip(right, 0, 3 * W - 1)
    fill = np.maximum(np.take_along_axis(d3, left, 1), np.take_along_axis(d3, right, 1))
    out = np.where(valid | ~has, d, fill)
    return EquirectImage(out.astype(np.float32))


def estimate_depth(ref_img: EquirectImage, ref_pose: CameraPose, sources, candidates: DepthCandidates,
                   descriptor: str = "zncc_patch", radius: int = 0, mode: str = "soft",
                   tau: float = DEFAULT_TAU, downsample: int = 1, threads: int | None = None):
    """Depth of the reference view from one or more (image, pose) sources.

    Returns ``(depth, fused_volume)``; the depth is upsampled back to the
    reference resolution when the features were downsampled.
    """
    sources = list(sources)
    if not sources:
        raise InvalidParam("need at least one source view")
    f_ref = extract_features(ref_img, descriptor, downsample)
    vols = []
    for img, pose in sources:
        f_src = extract_features(img, descriptor, downsample)
        vols.append(build_cost_volume(f_ref, f_src, ref_pose, pose, candidates, threads))
    vol = aggregate_cost(fuse_cost_volumes(vols), radius)
    depth = decode_depth(vol, mode, tau)
    if downsample > 1:
        depth = upsample_depth(depth, ref_img.height, ref_img.width)
    return depth, vol


def dump_cost_volume(vol: CostVolume, path) -> None:
    """Raw little-endian float32 (H, W, D) plus a JSON sidecar at ``path + '.json'``."""
    path = Path(path)
    atomic_write_bytes(path, np.ascontiguousarray(vol.cost, dtype="<f4").tobytes())
    meta = {
        "dims": list(vol.shape),
        "dtype": "float32",
        "byte_order": "little",
        "layout": "row-major (H, W, D)",
        "per_pixel_candidates": bool(vol.candidates.per_pixel),
        "candidates": None if vol.candidates.per_pixel else vol.candidates.t.tolist(),
    }
    atomic_write_text(path.with_name(path.name + ".json"), json.dumps(meta, indent=2))


def load_cost_volume(path) -> tuple:
    """Read a dump back as (cost array, metadata dict)."""
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    cost = np.fromfile(path, dtype="<f4").reshape(meta["dims"])
    return cost, meta
