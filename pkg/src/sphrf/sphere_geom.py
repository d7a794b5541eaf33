"""Coordinate algebra for equirectangular panoramas.

Conventions (all float64):

* pixel ``(u, v)``: ``u`` is the column, ``v`` the row, both continuous.
* ``phi = v / H * pi`` is the polar angle from the +y axis (``v = 0`` looks up),
  ``theta = u / W * 2 pi - pi / 2`` is the longitude, kept in ``[-pi/2, 3pi/2)``.
* unit direction ``(sin phi cos theta, cos phi, sin phi sin theta)``.

Every function accepts scalars or arrays and broadcasts like numpy.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegeneratePoint, InvalidParam, ZeroVector

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi
# Longitude assigned to the two poles, where the direction does not depend on it.
POLE_THETA = -HALF_PI


class PixelCoord(NamedTuple):
    u: np.ndarray
    v: np.ndarray


class SphericalCoord(NamedTuple):
    theta: np.ndarray
    phi: np.ndarray
    t: np.ndarray


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world rigid transform: ``x_world = R @ x_cam + center``."""

    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9, rtol=0.0):
            raise InvalidParam("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidParam("rotation must have determinant +1")
        R.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", c)

    @classmethod
    def identity(cls, center=(0.0, 0.0, 0.0)) -> "CameraPose":
        return cls(np.eye(3), np.asarray(center, dtype=np.float64))

    @classmethod
    def from_quaternion(cls, q, center) -> "CameraPose":
        return cls(rotation_from_quaternion(q), center)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "center": self.center.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraPose":
        return cls(np.asarray(d["rotation"], dtype=np.float64), np.asarray(d["center"], dtype=np.float64))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction


def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) quaternion; the input is normalized first."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    R = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
    # re-orthonormalize away the rounding of the closed form
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return rotation_from_quaternion(np.concatenate([[np.cos(half)], np.sin(half) * axis]))


def pixel_to_spherical(u, v, H: int, W: int):
    """Return ``(theta, phi)`` for pixel coordinates; ``u`` wraps, ``v`` clamps to [0, H]."""
    u = np.mod(np.asarray(u, dtype=np.float64), W)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, H)
    phi = v / H * np.pi
    theta = u / W * TWO_PI - HALF_PI
    return theta, phi


def spherical_to_cartesian(theta, phi) -> np.ndarray:
    """Unit direction(s), stacked on the last axis."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    s = np.sin(phi)
    return np.stack(np.broadcast_arrays(s * np.cos(theta), np.cos(phi), s * np.sin(theta)), axis=-1)


def _normalize_theta(theta):
    theta = np.where(theta < -HALF_PI, theta + TWO_PI, theta)
    return np.where(theta >= 1.5 * np.pi, theta - TWO_PI, theta)


def cartesian_to_spherical(x, y=None, z=None) -> SphericalCoord:
    """Inverse of :func:`spherical_to_cartesian` scaled by radius.

    Accepts either three coordinate arrays or a single ``(..., 3)`` array.
    The longitude comes from ``atan2(z, x)`` so every quadrant is recovered.
    """
    if y is None:
        xyz = np.asarray(x, dtype=np.float64)
        x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    else:
        x, y, z = (np.asarray(a, dtype=np.float64) for a in (x, y, z))
    rho = np.hypot(x, z)
    t = np.hypot(rho, y)
    if np.any(t < 1e-12):
        raise ZeroVector("cannot take spherical coordinates of the zero vector")
    phi = np.arctan2(rho, y)
    theta = np.where(rho == 0.0, POLE_THETA, _normalize_theta(np.arctan2(z, x)))
    return SphericalCoord(theta, phi, t)


def spherical_to_pixel(theta, phi, H: int, W: int) -> PixelCoord:
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    u = np.mod((theta + HALF_PI) / TWO_PI * W, W)
    u = np.where(u >= W, u - W, u)
    v = phi / np.pi * H
    return PixelCoord(u, v)


def cast_ray(u, v, pose: CameraPose, H: int, W: int) -> Ray:
    theta, phi = pixel_to_spherical(u, v, H, W)
    d = spherical_to_cartesian(theta, phi) @ pose.rotation.T
    origin = np.broadcast_to(pose.center, d.shape)
    return Ray(origin, d)


def project_point(pt_world, pose: CameraPose, H: int, W: int, strict: bool = True):
    """Project world point(s) into a panorama.

    Returns ``(PixelCoord, t)`` with ``t`` the spherical depth. With
    ``strict=False`` points at the camera center are nudged instead of
    raising, which bulk callers (ray marching) prefer.
    """
    p = np.asarray(pt_world, dtype=np.float64)
    cam = (p - pose.center) @ pose.rotation
    dist = np.linalg.norm(cam, axis=-1)
    if np.any(dist < 1e-9):
        if strict:
            raise DegeneratePoint("point coincides with the camera center")
        cam = np.where((dist < 1e-9)[..., None], np.array([1e-9, 0.0, 0.0]), cam)
    sph = cartesian_to_spherical(cam)
    return spherical_to_pixel(sph.theta, sph.phi, H, W), sph.t


def pixel_centers(H: int, W: int) -> PixelCoord:
    """Continuous coordinates of every pixel center, shaped (H, W)."""
    v, u = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    return PixelCoord(u, v)


def pixel_directions(H: int, W: int) -> np.ndarray:
    """Camera-frame unit directions through pixel centers, (H, W, 3)."""
    u, v = pixel_centers(H, W)
    return spherical_to_cartesian(*pixel_to_spherical(u, v, H, W))
