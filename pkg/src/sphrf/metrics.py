"""Image and depth quality metrics for equirectangular panoramas.

WS-PSNR and the WS depth errors weight every row by the cosine of its
latitude, ``w(v) = cos((v + 0.5 - H/2) * pi / H)``, to undo the oversampling
of the poles. LPIPS is not provided because it needs a learned network.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import ShapeMismatch
from .image_io import quantize_srgb8
from .panorama import EquirectImage, latitude_weights

PSNR_CAP = 99.0
VALID_DEPTH = (0.1, 10.0)
LPIPS_NOTE = "LPIPS not reported (requires a learned network)"


def _arr(x) -> np.ndarray:
    a = x.data if isinstance(x, EquirectImage) else np.asarray(x)
    a = a.astype(np.float64)
    return a[:, :, None] if a.ndim == 2 else a


def _pair(a, b):
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(1.0 / mse)))


def psnr(a, b) -> float:
    a, b = _pair(a, b)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def ws_weights(H: int, W: int) -> np.ndarray:
    return np.broadcast_to(latitude_weights(H)[:, None], (H, W))


def ws_psnr(a, b) -> float:
    a, b = _pair(a, b)
    H, W, _ = a.shape
    w = ws_weights(H, W)
    err = ((a - b) ** 2).mean(axis=-1)
    return _psnr_from_mse(float((w * err).sum() / w.sum()))


def _gray(a: np.ndarray) -> np.ndarray:
    if a.shape[2] == 1:
        return a[:, :, 0]
    return a[:, :, :3] @ np.array([0.299, 0.587, 0.114])


def _blur(x: np.ndarray) -> np.ndarray:
    # 11 x 11 Gaussian, sigma 1.5; wrap across the seam, reflect at the poles
    x = gaussian_filter1d(x, 1.5, axis=1, mode="wrap", truncate=5 / 1.5)
    return gaussian_filter1d(x, 1.5, axis=0, mode="reflect", truncate=5 / 1.5)


def ssim_map(a, b, data_range: float = 1.0) -> np.ndarray:
    a, b = _pair(a, b)
    x, y = _gray(a), _gray(b)
    C1 = (0.01 * data_range) ** 2
    C2 = (0.03 * data_range) ** 2
    mx, my = _blur(x), _blur(y)
    sxx = _blur(x * x) - mx * mx
    syy = _blur(y * y) - my * my
    sxy = _blur(x * y) - mx * my
    return ((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2))


def ssim(a, b) -> float:
    """Mean local SSIM of the Rec.601 luma; the raw value in [-1, 1] is reported."""
    return float(ssim_map(a, b).mean())


@dataclass
class DepthReport:
    L1: float
    L2: float
    RMSE: float
    WS_L1: float
    WS_L2: float
    WS_RMSE: float
    valid_fraction: float


def depth_metrics(pred, gt, mask=None) -> DepthReport:
    """Errors over pixels with gt in [0.1, 10] (intersected with ``mask`` if given)."""
    p, g = _pair(pred, gt)
    p, g = p[:, :, 0], g[:, :, 0]
    H, W = g.shape
    valid = (g >= VALID_DEPTH[0]) & (g <= VALID_DEPTH[1])
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        if m.ndim == 1:  # per-row mask
            m = m[:, None]
        valid &= np.broadcast_to(m, (H, W))
    n = int(valid.sum())
    if n == 0:
        nan = float("nan")
        return DepthReport(nan, nan, nan, nan, nan, nan, 0.0)
    e = (p - g)[valid]
    w = ws_weights(H, W)[valid]
    l2 = float(np.mean(e**2))
    ws_l2 = float((w * e**2).sum() / w.sum())
    return DepthReport(
        L1=float(np.mean(np.abs(e))),
        L2=l2,
        RMSE=float(np.sqrt(l2)),
        WS_L1=float((w * np.abs(e)).sum() / w.sum()),
        WS_L2=ws_l2,
        WS_RMSE=float(np.sqrt(ws_l2)),
        valid_fraction=n / (H * W),
    )


@dataclass
class MetricReport:
    psnr: float | None = None
    ws_psnr: float | None = None
    ssim: float | None = None
    depth: DepthReport | None = None
    notes: list = field(default_factory=lambda: [LPIPS_NOTE])

    @property
    def valid_fraction(self) -> float | None:
        return None if self.depth is None else self.depth.valid_fraction

    def to_dict(self) -> dict:
        d = asdict(self)
        d["valid_fraction"] = self.valid_fraction
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        rows = [("metric", "value")]
        for key in ("psnr", "ws_psnr", "ssim"):
            val = getattr(self, key)
            if val is not None:
                rows.append((key, f"{val:.4f}"))
        if self.depth is not None:
            for key, val in asdict(self.depth).items():
                rows.append((f"depth.{key}", f"{val:.6f}"))
        width = max(len(r[0]) for r in rows)
        lines = [f"# {n}" for n in self.notes]
        lines += [f"{k.ljust(width)}  {v}" for k, v in rows]
        return "\n".join(lines) + "\n"


def evaluate_images(pred, gt, quantize: bool = True) -> MetricReport:
    """PSNR / WS-PSNR / SSIM, on 8-bit sRGB values unless ``quantize`` is off."""
    a, b = _pair(pred, gt)
    if quantize:
        a, b = quantize_srgb8(a), quantize_srgb8(b)
    return MetricReport(psnr=psnr(a, b), ws_psnr=ws_psnr(a, b), ssim=ssim(a, b))
