"""Procedural closed scenes traced analytically.

Scenes are built from spheres and axis-aligned boxes. Each primitive carries a
solid (3D) Lambertian texture evaluated at the hit point, so colors do not
depend on the viewing direction and are continuous across the panorama seam.
Either side of a surface can be hit, so rooms (camera inside) and objects
(camera outside) use the same primitives.

Scene JSON schema::

    {
      "name": "room",
      "primitives": [
        {"type": "sphere", "center": [x, y, z], "radius": r, "texture": TEXTURE},
        {"type": "box", "min": [x, y, z], "max": [x, y, z], "texture": TEXTURE}
      ],
      "poses": [{"rotation": [[...], [...], [...]], "center": [x, y, z]}]
    }

    TEXTURE = {"kind": "trig", "frequency": f, "base": [r, g, b], "amplitude": a, "seed": s}
            | {"kind": "checker", "frequency": f, "color_a": [r, g, b], "color_b": [r, g, b]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParam, NoHit
from .panorama import EquirectImage
from .sphere_geom import CameraPose, Ray, cast_ray, pixel_centers

HIT_EPS = 1e-9


@dataclass(frozen=True)
class Texture:
    kind: str = "trig"
    frequency: float = 6.0
    base: tuple = (0.5, 0.5, 0.5)
    amplitude: float = 0.3
    seed: int = 0
    color_a: tuple = (0.9, 0.9, 0.9)
    color_b: tuple = (0.1, 0.1, 0.1)

    def __post_init__(self):
        if self.kind not in ("trig", "checker"):
            raise InvalidParam(f"unknown texture kind {self.kind!r}")

    def _trig_params(self):
        rng = np.random.default_rng(self.seed)
        k = rng.normal(size=(2, 3, 3))
        k /= np.linalg.norm(k, axis=-1, keepdims=True)
        phase = rng.uniform(0, 2 * np.pi, size=(2, 3))
        return k, phase

    def __call__(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        f = self.frequency
        if self.kind == "checker":
            parity = np.floor(f * p + 1e-7).astype(np.int64).sum(axis=-1) % 2
            return np.where(parity[..., None] == 0, np.asarray(self.color_a), np.asarray(self.color_b))
        k, phase = self._trig_params()
        # two octaves per channel, distinct directions per channel
        s1 = np.sin(f * np.einsum("...i,ci->...c", p, k[0]) + phase[0])
        s2 = np.sin(1.7 * f * np.einsum("...i,ci->...c", p, k[1]) + phase[1])
        return np.clip(np.asarray(self.base) + self.amplitude * (0.6 * s1 + 0.4 * s2), 0.0, 1.0)

    def to_dict(self) -> dict:
        if self.kind == "checker":
            return {"kind": "checker", "frequency": self.frequency,
                    "color_a": list(self.color_a), "color_b": list(self.color_b)}
        return {"kind": "trig", "frequency": self.frequency, "base": list(self.base),
                "amplitude": self.amplitude, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Texture":
        d = dict(d)
        for key in ("base", "color_a", "color_b"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    texture: Texture = field(default_factory=Texture)

    def intersect(self, o: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Nearest hit distance > HIT_EPS for unit directions, inf on a miss."""
        oc = o - np.asarray(self.center, dtype=np.float64)
        b = np.einsum("...i,...i->...", oc, d)
        c = np.einsum("...i,...i->...", oc, oc) - self.radius**2
        disc = b * b - c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        # numerically stable root pair
        q = -b - np.copysign(sq, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = q
            r2 = np.where(q != 0, c / q, 0.0)
        lo = np.minimum(r1, r2)
        hi = np.maximum(r1, r2)
        t = np.where(lo > HIT_EPS, lo, np.where(hi > HIT_EPS, hi, np.inf))
        return np.where(hit, t, np.inf)

    def to_dict(self) -> dict:
        return {"type": "sphere", "center": list(self.center), "radius": self.radius,
                "texture": self.texture.to_dict()}


@dataclass(frozen=True)
class Box:
    min: tuple
    max: tuple
    texture: Texture = field(default_factory=Texture)

    def intersect(self, o: np.ndarray, d: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t0 = (lo - o) * inv
            t1 = (hi - o) * inv
        # a zero direction component gives +-inf or nan (origin on the slab plane)
        tmin = np.where(np.isnan(t0), -np.inf, np.minimum(t0, t1))
        tmax = np.where(np.isnan(t0), np.inf, np.maximum(t0, t1))
        t_near = tmin.max(axis=-1)
        t_far = tmax.min(axis=-1)
        hit = t_near <= t_far
        t = np.where(t_near > HIT_EPS, t_near, np.where(t_far > HIT_EPS, t_far, np.inf))
        return np.where(hit, t, np.inf)

    def to_dict(self) -> dict:
        return {"type": "box", "min": list(self.min), "max": list(self.max), "texture": self.texture.to_dict()}


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    poses: tuple = ()
    name: str = "scene"

    def to_dict(self) -> dict:
        return {"name": self.name, "primitives": [p.to_dict() for p in self.primitives],
                "poses": [p.to_dict() for p in self.poses]}

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        prims = []
        for p in d["primitives"]:
            tex = Texture.from_dict(p.get("texture", {}))
            if p["type"] == "sphere":
                prims.append(Sphere(tuple(p["center"]), float(p["radius"]), tex))
            elif p["type"] == "box":
                prims.append(Box(tuple(p["min"]), tuple(p["max"]), tex))
            else:
                raise InvalidParam(f"unknown primitive type {p['type']!r}")
        poses = tuple(CameraPose.from_dict(p) for p in d.get("poses", []))
        return cls(tuple(prims), poses, d.get("name", "scene"))

    def save(self, path) -> None:
        from .image_io import atomic_write_text

        atomic_write_text(path, json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def with_primitives(self, primitives) -> "Scene":
        return Scene(tuple(primitives), self.poses, self.name)


def trace_arrays(scene: Scene, origins, directions, require_hit: bool = True):
    """Vectorized tracing: returns (t, color, primitive index)."""
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    o, d = np.broadcast_arrays(o, d)
    ts = np.stack([p.intersect(o, d) for p in scene.primitives], axis=0)
    idx = np.argmin(ts, axis=0)
    t = np.take_along_axis(ts, idx[None], axis=0)[0]
    if require_hit and not np.all(np.isfinite(t)):
        raise NoHit(f"{np.count_nonzero(~np.isfinite(t))} rays left the scene")
    color = np.zeros(t.shape + (3,))
    finite = np.isfinite(t)
    p = o + np.where(finite, t, 0.0)[..., None] * d
    for k, prim in enumerate(scene.primitives):
        sel = (idx == k) & finite
        if np.any(sel):
            color[sel] = prim.texture(p[sel])
    return t, color, idx


def trace(scene: Scene, ray: Ray):
    t, color, _ = trace_arrays(scene, ray.origin, ray.direction)
    return t, color


def render_gt(scene: Scene, pose: CameraPose, H: int, W: int):
    """Ground-truth color and spherical depth panoramas seen from ``pose``."""
    u, v = pixel_centers(H, W)
    ray = cast_ray(u, v, pose, H, W)
    t, color, _ = trace_arrays(scene, ray.origin, ray.direction)
    return EquirectImage(color.astype(np.float32)), EquirectImage(t.astype(np.float32))


def visible_from(scene: Scene, points: np.ndarray, center, rel_tol: float = 1e-6) -> np.ndarray:
    """True where the straight segment from ``center`` reaches ``points`` unobstructed."""
    points = np.asarray(points, dtype=np.float64)
    delta = points - np.asarray(center, dtype=np.float64)
    dist = np.linalg.norm(delta, axis=-1)
    d = delta / dist[..., None]
    t, _, _ = trace_arrays(scene, np.broadcast_to(center, d.shape), d, require_hit=False)
    return t >= dist * (1.0 - rel_tol) - 1e-9


def single_view_mask(scene: Scene, ref: CameraPose, other: CameraPose, H: int, W: int) -> np.ndarray:
    """Reference pixels whose surface point the other camera cannot see."""
    u, v = pixel_centers(H, W)
    ray = cast_ray(u, v, ref, H, W)
    t, _, _ = trace_arrays(scene, ray.origin, ray.direction)
    pts = ray.origin + t[..., None] * ray.direction
    return ~visible_from(scene, pts, other.center)


# --- builtin scenes --------------------------------------------------------

ROOM_MIN = (-4.0, -1.5, -3.0)
ROOM_MAX = (4.0, 1.5, 3.0)


def make_sphere_scene(radius: float = 3.0, frequency: float = 6.0) -> Scene:
    tex = Texture("trig", frequency, (0.5, 0.5, 0.5), 0.35, seed=1)
    return Scene((Sphere((0.0, 0.0, 0.0), radius, tex),), name="sphere")


def _room_box(frequency: float = 5.0) -> Box:
    return Box(ROOM_MIN, ROOM_MAX, Texture("trig", frequency, (0.55, 0.5, 0.45), 0.3, seed=2))


def make_room_scene() -> Scene:
    """Box room with a sphere and a box inside."""
    prims = (
        _room_box(),
        Sphere((1.0, -0.6, 1.8), 0.6, Texture("trig", 7.0, (0.4, 0.5, 0.6), 0.3, seed=3)),
        Box((-2.6, -1.5, -2.0), (-1.6, -0.5, -1.2), Texture("trig", 7.0, (0.6, 0.45, 0.35), 0.3, seed=4)),
    )
    return Scene(prims, name="sphere-room")


def baseline_poses(baseline: float, count: int = 2, axis=(1.0, 0.0, 0.0), lift: float = 0.0):
    """``count`` identity-rotation poses evenly spread over ``baseline`` along ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    offs = np.linspace(-0.5, 0.5, count) * baseline
    return tuple(CameraPose.identity(o * axis + np.array([0.0, lift, 0.0])) for o in offs)


def square_poses(diagonal: float = 1.0):
    """Four poses at the corners of a horizontal square with the given diagonal."""
    h = diagonal / 2.0
    corners = [(h, 0, 0), (0, 0, h), (-h, 0, 0), (0, 0, -h)]
    return tuple(CameraPose.identity(c) for c in corners)


OCCLUDER = ((0.2, -1.0, 1.2), (1.2, 1.0, 1.25))


def make_occlusion_scene(with_occluder: bool = True, baseline: float = 1.0):
    """Room plus a thin slab that hides part of the far wall from the second camera.

    Returns ``(scene, (ref_pose, src_pose), mask)`` where ``mask`` marks the
    reference pixels (at 128 x 256) visible from the reference only.
    """
    prims = [_room_box()]
    if with_occluder:
        prims.append(Box(*OCCLUDER, Texture("trig", 8.0, (0.3, 0.6, 0.4), 0.3, seed=5)))
    poses = baseline_poses(baseline, 2)
    scene = Scene(tuple(prims), poses, name="occlusion" if with_occluder else "occlusion-free")
    mask = single_view_mask(scene, poses[0], poses[1], 128, 256)
    return scene, poses, mask


BUILTIN_SCENES = {
    "sphere": make_sphere_scene,
    "sphere-room": make_room_scene,
    "occlusion": lambda: make_occlusion_scene()[0],
}


def builtin_scene(name: str) -> Scene:
    try:
        return BUILTIN_SCENES[name]()
    except KeyError:
        raise InvalidParam(f"unknown builtin scene {name!r}; choose from {sorted(BUILTIN_SCENES)}") from None


def noisy_prior(gt_depth: EquirectImage, sigma_noise: float, seed: int, relative: float = 0.0,
                near: float = 0.1, far: float = 10.0) -> EquirectImage:
    """Simulated monocular depth: gt * exp(N(0, relative)) + N(0, sigma_noise), clamped."""
    if sigma_noise < 0 or relative < 0:
        raise InvalidParam("noise levels must be nonnegative")
    rng = np.random.default_rng(seed)
    gt = gt_depth.data.astype(np.float64)
    eta = rng.normal(0.0, 1.0, gt.shape) * relative
    add = rng.normal(0.0, 1.0, gt.shape) * sigma_noise
    return EquirectImage(np.clip(gt * np.exp(eta) + add, near, far).astype(np.float32))
