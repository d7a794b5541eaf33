"""Equirectangular image container, wrap-aware bilinear sampling, cube maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParam, NumericalError, ShapeMismatch
from .sphere_geom import cartesian_to_spherical, pixel_centers, pixel_directions, spherical_to_pixel


@dataclass(frozen=True)
class EquirectImage:
    """H x W x C float32 samples. Pixel (row, col) has its center at (col + .5, row + .5)."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ShapeMismatch(f"expected (H, W, C) data, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NumericalError("image contains non-finite values")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self):
        return self.data.shape

    def scalar(self) -> np.ndarray:
        """The single channel as an (H, W) array; only for C == 1."""
        if self.channels != 1:
            raise ShapeMismatch("scalar() needs a single-channel image")
        return self.data[:, :, 0]

    @classmethod
    def constant(cls, H: int, W: int, value) -> "EquirectImage":
        value = np.atleast_1d(np.asarray(value, dtype=np.float32))
        return cls(np.broadcast_to(value, (H, W, value.size)).copy())


@dataclass(frozen=True)
class CubeMap:
    """Six F x F x C faces with 90 degree field of view."""

    faces: dict

    def __post_init__(self):
        missing = set(FACE_NAMES) - set(self.faces)
        if missing:
            raise InvalidParam(f"cube map is missing faces {sorted(missing)}")
        shapes = {np.shape(self.faces[n]) for n in FACE_NAMES}
        if len(shapes) != 1:
            raise ShapeMismatch(f"faces disagree in shape: {shapes}")
        shape = shapes.pop()
        if len(shape) != 3 or shape[0] != shape[1]:
            raise ShapeMismatch(f"faces must be square (F, F, C), got {shape}")
        faces = {}
        for n in FACE_NAMES:
            f = np.ascontiguousarray(self.faces[n], dtype=np.float32)
            f.setflags(write=False)
            faces[n] = f
        object.__setattr__(self, "faces", faces)

    @property
    def size(self) -> int:
        return self.faces["front"].shape[0]

    @property
    def channels(self) -> int:
        return self.faces["front"].shape[2]


# (forward, right, up) unit axes of each face in the panorama camera frame.
# Front is the panorama center column (+z); moving right on a face moves
# toward increasing longitude, matching the panorama's left-to-right order.
FACE_AXES = {
    "front": ((0, 0, 1), (-1, 0, 0), (0, 1, 0)),
    "right": ((-1, 0, 0), (0, 0, -1), (0, 1, 0)),
    "back": ((0, 0, -1), (1, 0, 0), (0, 1, 0)),
    "left": ((1, 0, 0), (0, 0, 1), (0, 1, 0)),
    "up": ((0, 1, 0), (-1, 0, 0), (0, 0, -1)),
    "down": ((0, -1, 0), (-1, 0, 0), (0, 0, 1)),
}
FACE_NAMES = tuple(FACE_AXES)


def sample_bilinear_wrapped(img, u, v) -> np.ndarray:
    """Bilinear lookup at continuous (u, v); returns (..., C) float64.

    Columns wrap modulo W, rows clamp to the first/last pixel center.
    ``img`` may be an EquirectImage or a raw (H, W, C) array.
    """
    data = img.data if isinstance(img, EquirectImage) else np.asarray(img)
    if data.ndim == 2:
        data = data[:, :, None]
    H, W = data.shape[:2]
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = np.mod(u, W) - 0.5
    y = np.clip(v, 0.5, H - 0.5) - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    c0 = np.mod(x0, W)
    c1 = np.mod(x0 + 1, W)
    r1 = np.minimum(y0 + 1, H - 1)
    top = data[y0, c0].astype(np.float64) * (1.0 - fx) + data[y0, c1] * fx
    bot = data[r1, c0].astype(np.float64) * (1.0 - fx) + data[r1, c1] * fx
    return top * (1.0 - fy) + bot * fy


def face_directions(name: str, F: int) -> np.ndarray:
    """Unnormalized directions through the F x F pixel centers of one face."""
    fwd, right, up = (np.asarray(a, dtype=np.float64) for a in FACE_AXES[name])
    s = (np.arange(F) + 0.5) / F * 2.0 - 1.0
    yy, xx = np.meshgrid(-s, s, indexing="ij")
    return fwd + xx[..., None] * right + yy[..., None] * up


def equirect_to_cubemap(img: EquirectImage, F: int) -> CubeMap:
    if F <= 0:
        raise InvalidParam("face size must be positive")
    faces = {}
    for name in FACE_NAMES:
        sph = cartesian_to_spherical(face_directions(name, F))
        u, v = spherical_to_pixel(sph.theta, sph.phi, img.height, img.width)
        faces[name] = sample_bilinear_wrapped(img, u, v).astype(np.float32)
    return CubeMap(faces)


def _sample_face_clamped(face: np.ndarray, i, j) -> np.ndarray:
    F = face.shape[0]
    i = np.clip(i, 0.0, F - 1.0)
    j = np.clip(j, 0.0, F - 1.0)
    i0 = np.minimum(np.floor(i).astype(np.int64), F - 2) if F > 1 else np.zeros(np.shape(i), np.int64)
    j0 = np.minimum(np.floor(j).astype(np.int64), F - 2) if F > 1 else np.zeros(np.shape(j), np.int64)
    fi = (i - i0)[..., None]
    fj = (j - j0)[..., None]
    i1 = np.minimum(i0 + 1, F - 1)
    j1 = np.minimum(j0 + 1, F - 1)
    f = face.astype(np.float64)
    top = f[i0, j0] * (1 - fj) + f[i0, j1] * fj
    bot = f[i1, j0] * (1 - fj) + f[i1, j1] * fj
    return top * (1 - fi) + bot * fi


def cubemap_to_equirect(cm: CubeMap, H: int) -> EquirectImage:
    """Stitch a cube map into an H x 2H panorama."""
    if H <= 0:
        raise InvalidParam("height must be positive")
    W = 2 * H
    d = pixel_directions(H, W)
    F = cm.size
    out = np.zeros((H, W, cm.channels), dtype=np.float64)
    axis = np.argmax(np.abs(d), axis=-1)
    sign = np.take_along_axis(d, axis[..., None], axis=-1)[..., 0] >= 0
    for name, (fwd, right, up) in FACE_AXES.items():
        k = int(np.flatnonzero(fwd)[0])
        positive = sum(fwd) > 0
        sel = (axis == k) & (sign == positive)
        if not np.any(sel):
            continue
        ds = d[sel]
        depth = ds @ np.asarray(fwd, dtype=np.float64)
        x = (ds @ np.asarray(right, dtype=np.float64)) / depth
        y = (ds @ np.asarray(up, dtype=np.float64)) / depth
        j = (x + 1.0) / 2.0 * F - 0.5
        i = (1.0 - y) / 2.0 * F - 0.5
        out[sel] = _sample_face_clamped(cm.faces[name], i, j)
    return EquirectImage(out.astype(np.float32))


def latitude_weights(H: int) -> np.ndarray:
    """Cosine-latitude weight of each row (pixel centers); 1 at the equator."""
    return np.cos((np.arange(H) + 0.5 - H / 2.0) * np.pi / H)


def face_solid_angle_weights(F: int) -> np.ndarray:
    """Relative solid angle of each face pixel (proportional to 1 / |d|^3)."""
    s = (np.arange(F) + 0.5) / F * 2.0 - 1.0
    yy, xx = np.meshgrid(s, s, indexing="ij")
    return (1.0 + xx**2 + yy**2) ** -1.5


def resize_area(img: EquirectImage, factor: int) -> EquirectImage:
    """Box downsample by an integer factor in both directions."""
    H, W, C = img.shape
    if H % factor or W % factor:
        raise ShapeMismatch(f"{H}x{W} is not divisible by {factor}")
    a = img.data.astype(np.float64).reshape(H // factor, factor, W // factor, factor, C)
    return EquirectImage(a.mean(axis=(1, 3)).astype(np.float32))


__all__ = [
    "EquirectImage",
    "CubeMap",
    "FACE_NAMES",
    "sample_bilinear_wrapped",
    "equirect_to_cubemap",
    "cubemap_to_equirect",
    "latitude_weights",
    "face_solid_angle_weights",
    "resize_area",
    "pixel_centers",
]
