"""Run configuration shared by every CLI command.

A config file is a flat JSON object whose keys are the field names of
:class:`RunConfig`. Unknown keys, wrong types and out-of-range values raise
:class:`ConfigError`. Every key can also be overridden on the command line
with ``--key value`` (underscores become dashes).

Keys::

    scene            builtin name (sphere, sphere-room, occlusion) or scene JSON path
    layout           "line" (poses along x) or "square" (four poses, diagonal = baseline)
    baseline         first-to-last camera distance in meters
    views            number of poses on a line layout
    height, width    panorama size (width must be 2 * height)
    descriptor       rgb | zncc_patch | census
    sampling         mono | uniform | mono-only (candidate ablations)
    n_candidates     D, used by the uniform ablation
    n_mono, n_uni    mono-guided and uniform candidate counts
    prior_sigma      Gaussian prior std sigma, meters
    beta             coverage half-width in units of sigma
    prior_noise      additive noise of the simulated monocular prior, meters
    inverse_depth    space the uniform candidates in inverse depth
    near, far        depth range, meters
    radius           cost aggregation half-window, pixels
    decode           soft | wta
    tau              soft-argmin temperature
    downsample       feature downsampling factor
    consistency      relative tolerance of the cross-view depth check (0 disables)
    sources          2 (first and last views) or 4 (square layout) for depth runs
    pole_fraction    fraction of rows masked at each pole in depth metrics
    n_coarse, n_fine renderer sample counts
    kappa            density scale of the renderer
    n_components     logistic components per visibility (1 or 2)
    render_mode      identity | middle | above
    lift             height of the target above the midpoint in "above" mode
    depth_source     gt | mvs (source depths used by the renderer)
    seed             master seed
    threads          worker threads (null: environment default)
    out              output directory
"""
from __future__ import annotations

import argparse
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .mvs import DESCRIPTORS

SAMPLING_MODES = ("mono", "uniform", "mono-only")
RENDER_MODES = ("identity", "middle", "above")


@dataclass(frozen=True)
class RunConfig:
    scene: str = "sphere-room"
    layout: str = "line"
    baseline: float = 1.0
    views: int = 3
    height: int = 128
    width: int = 256
    descriptor: str = "zncc_patch"
    sampling: str = "mono"
    n_candidates: int = 64
    n_mono: int = 5
    n_uni: int = 59
    prior_sigma: float = 0.5
    beta: float = 3.0
    prior_noise: float = 0.5
    inverse_depth: bool = False
    near: float = 0.1
    far: float = 10.0
    radius: int = 2
    decode: str = "soft"
    tau: float = 0.02
    downsample: int = 1
    consistency: float = 0.0
    sources: int = 2
    pole_fraction: float = 0.05
    n_coarse: int = 64
    n_fine: int = 64
    kappa: float = 1.0
    n_components: int = 2
    render_mode: str = "middle"
    lift: float = 0.25
    depth_source: str = "gt"
    seed: int = 0
    threads: int | None = None
    out: str = "out"

    def __post_init__(self):
        _check_types(self)
        checks = [
            (self.layout in ("line", "square"), "layout must be 'line' or 'square'"),
            (self.baseline > 0, "baseline must be positive"),
            (self.views >= 2, "views must be at least 2"),
            (self.height >= 2 and self.width == 2 * self.height, "width must equal 2 * height"),
            (self.descriptor in DESCRIPTORS, f"descriptor must be one of {DESCRIPTORS}"),
            (self.sampling in SAMPLING_MODES, f"sampling must be one of {SAMPLING_MODES}"),
            (self.n_candidates >= 1 and self.n_mono >= 1 and self.n_uni >= 1, "candidate counts must be positive"),
            (self.prior_sigma > 0 and self.beta > 0, "prior_sigma and beta must be positive"),
            (self.prior_noise >= 0, "prior_noise must be nonnegative"),
            (0 < self.near < self.far, "need 0 < near < far"),
            (self.radius >= 0, "radius must be nonnegative"),
            (self.decode in ("soft", "wta"), "decode must be 'soft' or 'wta'"),
            (self.tau > 0, "tau must be positive"),
            (self.downsample >= 1 and self.height % self.downsample == 0, "downsample must divide height"),
            (self.consistency >= 0, "consistency must be nonnegative"),
            (self.sources in (2, 4), "sources must be 2 or 4"),
            (self.sources == 2 or self.layout == "square", "four sources need the square layout"),
            (0 <= self.pole_fraction < 0.5, "pole_fraction must be in [0, 0.5)"),
            (self.n_coarse >= 1 and self.n_fine >= 0, "sample counts must be positive"),
            (self.kappa > 0, "kappa must be positive"),
            (self.n_components in (1, 2), "n_components must be 1 or 2"),
            (self.render_mode in RENDER_MODES, f"render_mode must be one of {RENDER_MODES}"),
            (self.depth_source in ("gt", "mvs"), "depth_source must be 'gt' or 'mvs'"),
            (self.seed >= 0, "seed must be nonnegative"),
            (self.threads is None or self.threads >= 1, "threads must be positive"),
            (bool(self.out), "out must be a directory path"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    # --- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        """sha256 of the canonical JSON, minus keys that cannot change outputs."""
        d = self.to_dict()
        for key in ("threads", "out"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d)

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d)


def _base_type(f):
    # annotations are strings because of the future import
    return {"str": str, "int": int, "float": float, "bool": bool, "int | None": int}[f.type]


def _check_types(cfg: RunConfig) -> None:
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        want = _base_type(f)
        if val is None and f.type.endswith("None"):
            continue
        if want is float and isinstance(val, int) and not isinstance(val, bool):
            object.__setattr__(cfg, f.name, float(val))
            continue
        if isinstance(val, bool) and want is not bool:
            raise ConfigError(f"{f.name}: expected {want.__name__}, got bool")
        if not isinstance(val, want):
            raise ConfigError(f"{f.name}: expected {want.__name__}, got {type(val).__name__}")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def add_override_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--key`` flag per RunConfig field; unset flags leave the config alone."""
    group = parser.add_argument_group("config overrides")
    for f in fields(RunConfig):
        kind = _base_type(f)
        conv = _parse_bool if kind is bool else kind
        group.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, type=conv,
                           default=None, metavar=kind.__name__.upper())


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    for f in fields(RunConfig):
        val = getattr(args, "cfg_" + f.name, None)
        if val is not None:
            changes[f.name] = val
    return cfg.replace(**changes) if changes else cfg
