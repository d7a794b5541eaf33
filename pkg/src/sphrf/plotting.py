"""Report figures, drawn with the object-oriented matplotlib API (no pyplot state)."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .image_io import atomic_write_bytes, linear_to_srgb
from .panorama import EquirectImage


def _as_display(img):
    a = img.data if isinstance(img, EquirectImage) else np.asarray(img)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim == 3:
        return linear_to_srgb(a[:, :, :3]), {}
    return a, {"cmap": "viridis"}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    buf = io.BytesIO()
    # no timestamps or version strings, so reruns give identical bytes
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    atomic_write_bytes(Path(path), buf.getvalue())


def panel_figure(path, panels, title: str | None = None, ncols: int = 2) -> None:
    """Grid of labeled panoramas; ``panels`` is a list of (label, image[, imshow kwargs])."""
    n = len(panels)
    ncols = max(1, min(ncols, n))
    nrows = -(-n // ncols)
    fig = Figure(figsize=(4.2 * ncols, 2.4 * nrows + (0.4 if title else 0)))
    for k, entry in enumerate(panels):
        label, img = entry[0], entry[1]
        extra = entry[2] if len(entry) > 2 else {}
        ax = fig.add_subplot(nrows, ncols, k + 1)
        data, kw = _as_display(img)
        kw.update(extra)
        im = ax.imshow(data, interpolation="nearest", **kw)
        if data.ndim == 2:
            fig.colorbar(im, ax=ax, fraction=0.025, pad=0.02)
        ax.set_title(label, fontsize=9)
        ax.set_axis_off()
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def depth_figure(path, pred, gt, title: str | None = None) -> None:
    p = pred.scalar() if isinstance(pred, EquirectImage) else np.asarray(pred)
    g = gt.scalar() if isinstance(gt, EquirectImage) else np.asarray(gt)
    vmax = float(np.percentile(g, 99))
    panel_figure(path, [
        ("predicted depth [m]", p, {"vmin": 0.0, "vmax": vmax}),
        ("ground truth depth [m]", g, {"vmin": 0.0, "vmax": vmax}),
        ("|error| [m]", np.abs(p - g), {"vmin": 0.0, "vmax": 0.5, "cmap": "magma"}),
    ], title=title, ncols=1)


def render_figure(path, color, gt_color, title: str | None = None) -> None:
    c = np.asarray(color.data if isinstance(color, EquirectImage) else color, dtype=np.float64)
    g = np.asarray(gt_color.data if isinstance(gt_color, EquirectImage) else gt_color, dtype=np.float64)
    err = np.abs(linear_to_srgb(c) - linear_to_srgb(g)).mean(axis=-1)
    panel_figure(path, [
        ("rendered", color),
        ("ground truth", gt_color),
        ("mean |error| (sRGB)", err, {"vmin": 0.0, "vmax": 0.1, "cmap": "magma"}),
    ], title=title, ncols=1)


def error_profile_figure(path, pred, gt, title: str | None = None) -> None:
    """Per-row mean absolute error against latitude, showing where errors concentrate."""
    p = np.asarray(pred.data if isinstance(pred, EquirectImage) else pred, dtype=np.float64)
    g = np.asarray(gt.data if isinstance(gt, EquirectImage) else gt, dtype=np.float64)
    rows = np.abs(p - g).reshape(p.shape[0], -1).mean(axis=1)
    lat = 90.0 - (np.arange(p.shape[0]) + 0.5) * 180.0 / p.shape[0]
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(lat, rows)
    ax.set_xlabel("latitude [deg]")
    ax.set_ylabel("mean |error|")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)
