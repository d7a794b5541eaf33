import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sphrf.scene_oracle import baseline_poses, make_room_scene, make_sphere_scene, render_gt

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def room_views(baseline: float = 1.0, count: int = 3, H: int = 128):
    scene = make_room_scene()
    poses = baseline_poses(baseline, count)
    return scene, poses, tuple(render_gt(scene, p, H, 2 * H) for p in poses)


@functools.lru_cache(maxsize=None)
def sphere_views(baseline: float = 0.5, H: int = 128):
    scene = make_sphere_scene()
    poses = baseline_poses(baseline, 2)
    return scene, poses, tuple(render_gt(scene, p, H, 2 * H) for p in poses)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
