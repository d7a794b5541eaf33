"""Command-line entry point: ``sphrf {synth,depth,render,convert}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
failure (non-finite values). Every command writes a ``manifest.json`` with
the config hash, the seeds and the sha256 of every file it produced.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, add_override_flags, config_from_args
from .errors import ConfigError, ImageFormatError, NumericalError, SphrfError
from .image_io import atomic_write_text, read_image, write_image
from .mvs import dump_cost_volume
from .panorama import FACE_NAMES, CubeMap, EquirectImage, cubemap_to_equirect, equirect_to_cubemap
from .pipeline import (depth_report, input_indices, load_scene, predict_depth, predict_depths, prior_seed,
                       render_view, synth_views, view_poses)
from .plotting import depth_figure, error_profile_figure, panel_figure, render_figure

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _progress(msg: str) -> None:
    print(f"[sphrf] {msg}", file=sys.stderr, flush=True)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: list[Path] = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.root / name
        self.files.append(p)
        return p

    def image(self, name: str, img: EquirectImage) -> None:
        write_image(self.path(name), img)

    def text(self, name: str, text: str) -> None:
        atomic_write_text(self.path(name), text)

    def manifest(self, command: str, cfg: RunConfig | None, extra: dict | None = None) -> None:
        data = {
            "command": command,
            "version": __version__,
            "config": None if cfg is None else cfg.to_dict(),
            "config_sha256": None if cfg is None else cfg.digest(),
            "seeds": {} if cfg is None else {"master": cfg.seed},
            "outputs": {str(p.relative_to(self.root)): _sha256(p) for p in self.files if p.exists()},
        }
        data.update(extra or {})
        atomic_write_text(self.root / "manifest.json", json.dumps(data, indent=2, sort_keys=True) + "\n")


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        a = a.data if isinstance(a, EquirectImage) else np.asarray(a)
        if not np.all(np.isfinite(a)):
            raise NumericalError(f"{name}: non-finite values")


def _report(out: Outputs, stem: str, report) -> None:
    out.text(f"{stem}.json", report.to_json() + "\n")
    table = report.to_table()
    out.text(f"{stem}.txt", table)
    print(table, end="")


# --- commands -------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    scene = load_scene(cfg)
    out = Outputs(Path(cfg.out))
    poses = view_poses(cfg, scene)
    _progress(f"synth: {len(poses)} views of {scene.name!r} at {cfg.height}x{cfg.width}")
    views = synth_views(scene, poses, cfg.height, cfg.width)
    panels = []
    for i, v in enumerate(views):
        _check_finite(f"view {i}", v.image, v.depth)
        out.image(f"view_{i}_color.png", v.image)
        out.image(f"view_{i}_depth.pfm", v.depth)
        panels += [(f"view {i} color", v.image), (f"view {i} depth [m]", v.depth)]
    scene_path = out.path("scene.json")
    type(scene)(scene.primitives, tuple(poses), scene.name).save(scene_path)
    panel_figure(out.path("figures/synth.png"), panels, title=scene.name)
    out.manifest("synth", cfg, {"poses": [p.to_dict() for p in poses]})
    return EXIT_OK


def cmd_depth(cfg: RunConfig, dump_cost: bool = False) -> int:
    scene = load_scene(cfg)
    out = Outputs(Path(cfg.out))
    poses = view_poses(cfg, scene)
    idx = input_indices(cfg, poses)
    _progress(f"depth: reference view {idx[0]}, sources {list(idx[1:])}, sampling {cfg.sampling}")
    views = synth_views(scene, [poses[i] for i in idx], cfg.height, cfg.width)
    order = list(range(len(views)))
    if cfg.consistency > 0 and cfg.sampling != "mono-only":
        depths, vols, masks = predict_depths(cfg, views, order)
        pred, vol = depths[0], vols[0]
        checked = float(masks[0].mean())
    else:
        pred, vol = predict_depth(cfg, views, 0, order[1:])
        checked = None
    _check_finite("depth", pred)
    gt = views[0].depth
    report = depth_report(cfg, pred, gt)
    if checked is not None:
        report.notes.append(f"cross-view consistent fraction: {checked:.4f}")
    out.image("depth_pred.pfm", pred)
    out.image("depth_gt.pfm", gt)
    if dump_cost and vol is not None:
        dump_cost_volume(vol, out.path("cost_volume.f32"))
        out.files.append(out.root / "cost_volume.f32.json")
    _report(out, "report", report)
    depth_figure(out.path("figures/depth.png"), pred, gt, title=f"sampling: {cfg.sampling}")
    error_profile_figure(out.path("figures/depth_rows.png"), pred, gt, title="depth error by latitude")
    seeds = {f"prior_view_{i}": prior_seed(cfg.seed, i) for i in order} if cfg.sampling != "uniform" else {}
    out.manifest("depth", cfg, {"prior_seeds": seeds, "input_views": list(idx)})
    return EXIT_OK


def cmd_render(cfg: RunConfig) -> int:
    scene = load_scene(cfg)
    out = Outputs(Path(cfg.out))
    poses = view_poses(cfg, scene)
    idx = input_indices(cfg, poses)
    _progress(f"render: {cfg.render_mode} view from inputs {list(idx)}, depths from {cfg.depth_source}")
    views = synth_views(scene, [poses[i] for i in idx], cfg.height, cfg.width)
    res = render_view(cfg, scene, views, range(len(views)))
    _check_finite("render", res["color"], res["depth"])
    out.image("render_color.png", res["color"])
    out.image("render_color.pfm", res["color"])
    out.image("render_depth.pfm", res["depth"])
    out.image("gt_color.png", res["gt_color"])
    for k, d in enumerate(res["source_depths"]):
        out.image(f"source_{k}_depth.pfm", d)
    _report(out, "report", res["report"])
    render_figure(out.path("figures/render.png"), res["color"], res["gt_color"], title=f"{cfg.render_mode} view")
    error_profile_figure(out.path("figures/render_rows.png"), res["color"], res["gt_color"],
                         title="color error by latitude")
    out.manifest("render", cfg, {"target_pose": res["target"].to_dict(), "input_views": list(idx)})
    return EXIT_OK


def cmd_convert(args) -> int:
    out = Outputs(Path(args.out))
    src = Path(args.input)
    if args.direction == "to-cubemap":
        img = read_image(src)
        face = args.face_size or img.height // 2
        cm = equirect_to_cubemap(img, face)
        ext = src.suffix.lower() or ".png"
        for name in FACE_NAMES:
            out.image(f"{name}{ext}", EquirectImage(cm.faces[name]))
        panel_figure(out.path("figures/cubemap.png"), [(n, EquirectImage(cm.faces[n])) for n in FACE_NAMES], ncols=3)
    else:
        if not src.is_dir():
            raise FileNotFoundError(f"{src}: expected a directory of cube faces")
        faces = {}
        for name in FACE_NAMES:
            hits = sorted(src.glob(f"{name}.*"))
            if not hits:
                raise FileNotFoundError(f"{src}: missing face {name!r}")
            faces[name] = read_image(hits[0]).data
        cm = CubeMap(faces)
        F = next(iter(faces.values())).shape[0]
        pano = cubemap_to_equirect(cm, args.height or 2 * F)
        ext = ".pfm" if hits[0].suffix.lower() == ".pfm" else ".png"
        out.image(f"panorama{ext}", pano)
        panel_figure(out.path("figures/panorama.png"), [("stitched", pano)], ncols=1)
    out.manifest("convert", None, {"input": src.name, "direction": args.direction})
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphrf", description="Spherical radiance-field toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "render ground-truth panoramas and depths of a scene",
        "depth": "estimate the depth of the first input view and score it",
        "render": "render a novel panorama from the input views and score it",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", metavar="PATH", help="JSON run configuration")
        if name == "depth":
            abl = sp.add_mutually_exclusive_group()
            abl.add_argument("--no-mono", action="store_true", help="ablation: uniform candidates only")
            abl.add_argument("--mono-only", action="store_true", help="ablation: monocular prior as the depth")
            sp.add_argument("--dump-cost", action="store_true", help="write the fused cost volume")
        add_override_flags(sp)
    cv = sub.add_parser("convert", help="equirectangular <-> cube map")
    cv.add_argument("--input", required=True, help="panorama file, or directory of faces")
    cv.add_argument("--direction", choices=("to-cubemap", "to-equirect"), default="to-cubemap")
    cv.add_argument("--face-size", type=int, default=None)
    cv.add_argument("--height", type=int, default=None)
    cv.add_argument("--out", default="out")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "convert":
        return cmd_convert(args)
    cfg = config_from_args(args)
    if args.command == "synth":
        return cmd_synth(cfg)
    if args.command == "depth":
        if args.no_mono:
            cfg = cfg.replace(sampling="uniform")
        elif args.mono_only:
            cfg = cfg.replace(sampling="mono-only")
        return cmd_depth(cfg, args.dump_cost)
    return cmd_render(cfg)


def main(argv=None) -> int:
    try:
        return run(argv)
    except NumericalError as exc:
        print(f"sphrf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ImageFormatError) as exc:
        print(f"sphrf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, SphrfError) as exc:
        print(f"sphrf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
