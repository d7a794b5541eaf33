"""End-to-end runs driven by a :class:`RunConfig`: scenes, depth, rendering."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .depth_sampler import DepthCandidates, GaussianPrior, build_candidates
from .errors import ConfigError
from .metrics import MetricReport, depth_metrics, evaluate_images
from .mvs import consistency_mask, estimate_depth, fill_inconsistent, pole_mask
from .panorama import EquirectImage
from .renderer import RenderConfig, SourceView, render_panorama
from .scene_oracle import BUILTIN_SCENES, Scene, baseline_poses, builtin_scene, noisy_prior, render_gt, square_poses
from .sphere_geom import CameraPose


@dataclass
class View:
    pose: CameraPose
    image: EquirectImage
    depth: EquirectImage


def load_scene(cfg: RunConfig) -> Scene:
    if cfg.scene in BUILTIN_SCENES:
        return builtin_scene(cfg.scene)
    path = Path(cfg.scene)
    if not path.is_file():
        raise ConfigError(f"scene {cfg.scene!r} is neither a builtin name nor a file")
    try:
        return Scene.load(path)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed scene file ({exc})") from None


def view_poses(cfg: RunConfig, scene: Scene) -> tuple:
    """Camera poses of the run; poses stored in a scene file take precedence."""
    if scene.poses and cfg.scene not in BUILTIN_SCENES:
        return tuple(scene.poses)
    if cfg.layout == "square":
        return square_poses(cfg.baseline)
    return baseline_poses(cfg.baseline, cfg.views)


def input_indices(cfg: RunConfig, poses) -> tuple:
    """Which views are inputs: first and last on a line, two or four corners of a square."""
    if cfg.layout == "square" and len(poses) == 4:
        return (0, 1, 2, 3) if cfg.sources == 4 else (0, 2)
    return (0, len(poses) - 1)


def synth_views(scene: Scene, poses, H: int, W: int) -> list:
    return [View(p, *render_gt(scene, p, H, W)) for p in poses]


def prior_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, 1, index]).generate_state(1)[0])


def mono_prior(cfg: RunConfig, gt_depth: EquirectImage, index: int) -> GaussianPrior:
    """Simulated monocular prediction: the GT depth plus seeded Gaussian noise."""
    mu = noisy_prior(gt_depth, cfg.prior_noise, prior_seed(cfg.seed, index), near=cfg.near, far=cfg.far)
    return GaussianPrior(mu, cfg.prior_sigma, cfg.beta)


def candidates_for(cfg: RunConfig, prior: GaussianPrior | None) -> DepthCandidates:
    if cfg.sampling == "uniform":
        return build_candidates(cfg.near, cfg.far, cfg.n_candidates, 0, None, cfg.inverse_depth)
    return build_candidates(cfg.near, cfg.far, cfg.n_uni, cfg.n_mono, prior, cfg.inverse_depth)


def _prior_for(cfg: RunConfig, views, i: int):
    if cfg.sampling == "uniform":
        return None
    if cfg.downsample > 1:
        raise ConfigError("mono-guided sampling runs at full resolution; use downsample = 1")
    return mono_prior(cfg, views[i].depth, i)


def predict_depth(cfg: RunConfig, views, ref: int, sources) -> tuple:
    """Depth of view ``ref`` from the given source views; returns (depth, cost volume or None)."""
    prior = _prior_for(cfg, views, ref)
    if cfg.sampling == "mono-only":
        return prior.mu, None
    cand = candidates_for(cfg, prior)
    return estimate_depth(views[ref].image, views[ref].pose,
                          [(views[j].image, views[j].pose) for j in sources], cand,
                          descriptor=cfg.descriptor, radius=cfg.radius, mode=cfg.decode, tau=cfg.tau,
                          downsample=cfg.downsample, threads=cfg.threads)


def predict_depths(cfg: RunConfig, views, indices) -> tuple:
    """Depth of every view in ``indices`` (each matched against the others).

    With ``cfg.consistency > 0`` pixels whose depth agrees with no other view
    are refilled from their farther row neighbor. Returns (depths, volumes,
    valid masks).
    """
    indices = list(indices)
    raw, vols = [], []
    for i in indices:
        d, vol = predict_depth(cfg, views, i, [j for j in indices if j != i])
        raw.append(d)
        vols.append(vol)
    masks = [np.ones(d.shape[:2], dtype=bool) for d in raw]
    if cfg.consistency > 0 and len(indices) > 1:
        out = []
        for k, i in enumerate(indices):
            others = [(raw[m], views[j].pose) for m, j in enumerate(indices) if j != i]
            masks[k] = consistency_mask(raw[k], views[i].pose, others, cfg.consistency)
            out.append(fill_inconsistent(raw[k], masks[k]))
        raw = out
    return raw, vols, masks


def depth_report(cfg: RunConfig, pred: EquirectImage, gt: EquirectImage) -> MetricReport:
    keep = pole_mask(gt.height, cfg.pole_fraction)
    report = MetricReport(depth=depth_metrics(pred, gt, keep))
    n = int((~keep).sum()) // 2
    report.notes.append(f"pole rows masked: {n} per pole (fraction {cfg.pole_fraction})")
    return report


def target_pose(cfg: RunConfig, inputs) -> CameraPose:
    if cfg.render_mode == "identity":
        return inputs[0]
    center = np.mean([p.center for p in inputs], axis=0)
    if cfg.render_mode == "above":
        center = center + np.array([0.0, cfg.lift, 0.0])
    return CameraPose(inputs[0].rotation, center)


def render_config(cfg: RunConfig) -> RenderConfig:
    return RenderConfig(cfg.height, cfg.width, cfg.n_coarse, cfg.n_fine, cfg.near, cfg.far,
                        cfg.kappa, cfg.n_components, cfg.seed, cfg.threads)


def render_view(cfg: RunConfig, scene: Scene, views, indices) -> dict:
    """Render the configured target from the input views and score it against the oracle."""
    indices = list(indices)
    if cfg.depth_source == "mvs":
        depths = predict_depths(cfg, views, indices)[0]
    else:
        depths = [views[i].depth for i in indices]
    sources = [SourceView(views[i].image, views[i].pose, d) for i, d in zip(indices, depths)]
    target = target_pose(cfg, [views[i].pose for i in indices])
    if cfg.render_mode == "identity":
        sources = sources[:1]
    color, depth, residual = render_panorama(target, sources, render_config(cfg))
    gt_color, gt_depth = render_gt(scene, target, cfg.height, cfg.width)
    report = evaluate_images(color, gt_color)
    report.depth = depth_metrics(depth, gt_depth)
    report.notes.append(f"render mode {cfg.render_mode}, source depths from {cfg.depth_source}")
    return {"target": target, "color": color, "depth": depth, "residual": residual,
            "gt_color": gt_color, "gt_depth": gt_depth, "source_depths": depths, "report": report}
