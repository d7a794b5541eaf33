import json

import numpy as np
import pytest

from sphrf.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from sphrf.image_io import read_image, write_image
from sphrf.panorama import EquirectImage

FAST = ["--height", "32", "--width", "64"]
FAST_RENDER = FAST + ["--n-coarse", "16", "--n-fine", "16"]


def run(*argv):
    return main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_synth_default_layout(tmp_path):
    out = tmp_path / "new" / "dir"  # created on demand
    assert run("synth", "--out", out) == EXIT_OK
    for i in range(3):
        assert read_image(out / f"view_{i}_color.png").shape == (128, 256, 3)
        assert read_image(out / f"view_{i}_depth.pfm").shape == (128, 256, 1)
    m = manifest(out)
    xs = [p["center"][0] for p in m["poses"]]
    assert xs == pytest.approx([-0.5, 0.0, 0.5])
    assert len(m["config_sha256"]) == 64 and m["seeds"] == {"master": 0}
    assert "figures/synth.png" in m["outputs"]


def test_synth_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", *FAST, "--out", a) == EXIT_OK
    assert run("synth", *FAST, "--out", b, "--threads", "3") == EXIT_OK
    ma, mb = manifest(a), manifest(b)
    assert ma["outputs"] == mb["outputs"]
    assert (a / "view_1_depth.pfm").read_bytes() == (b / "view_1_depth.pfm").read_bytes()


@pytest.mark.parametrize("flag,sampling", [([], "mono"), (["--no-mono"], "uniform"), (["--mono-only"], "mono-only")])
def test_depth_ablations(tmp_path, flag, sampling, capsys):
    out = tmp_path / "d"
    assert run("depth", *FAST, *flag, "--out", out) == EXIT_OK
    m = manifest(out)
    assert m["config"]["sampling"] == sampling
    report = json.loads((out / "report.json").read_text())
    assert 0 < report["valid_fraction"] <= 1
    assert any("pole rows masked" in n for n in report["notes"])
    assert "depth.WS_RMSE" in capsys.readouterr().out
    assert read_image(out / "depth_pred.pfm").shape == (32, 64, 1)


def test_depth_four_sources_and_dump(tmp_path):
    out = tmp_path / "d4"
    assert run("depth", *FAST, "--layout", "square", "--sources", "4", "--sampling", "uniform",
               "--consistency", "0.1", "--dump-cost", "--out", out) == EXIT_OK
    assert manifest(out)["input_views"] == [0, 1, 2, 3]
    notes = json.loads((out / "report.json").read_text())["notes"]
    assert any(n.startswith("cross-view consistent fraction") for n in notes)
    meta = json.loads((out / "cost_volume.f32.json").read_text())
    assert meta["dims"] == [32, 64, 64]
    assert (out / "cost_volume.f32").stat().st_size == 4 * 32 * 64 * 64


@pytest.mark.parametrize("mode", ["identity", "middle", "above"])
def test_render_modes(tmp_path, mode):
    out = tmp_path / mode
    assert run("render", *FAST_RENDER, "--render-mode", mode, "--out", out) == EXIT_OK
    m = manifest(out)
    center = m["target_pose"]["center"]
    expected = {"identity": [-0.5, 0, 0], "middle": [0, 0, 0], "above": [0, 0.25, 0]}[mode]
    assert center == pytest.approx(expected)
    report = json.loads((out / "report.json").read_text())
    assert report["psnr"] > 15
    for name in ("render_color.png", "render_color.pfm", "render_depth.pfm", "gt_color.png"):
        assert name in m["outputs"]


def test_render_with_mvs_depths(tmp_path):
    out = tmp_path / "mvs"
    assert run("render", *FAST_RENDER, "--depth-source", "mvs", "--sampling", "uniform", "--out", out) == EXIT_OK
    assert "source_1_depth.pfm" in manifest(out)["outputs"]


def test_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"height": 32, "width": 64, "scene": "sphere"}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "o") == EXIT_OK
    cfg.write_text(json.dumps({"hieght": 32}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "o") == EXIT_CONFIG
    assert "unknown config keys" in capsys.readouterr().err
    assert run("synth", "--config", tmp_path / "missing.json") == EXIT_IO
    assert run("synth", "--height", "33") == EXIT_CONFIG
    assert run("synth", "--scene", "nowhere", "--out", tmp_path / "never") == EXIT_CONFIG
    assert not (tmp_path / "never").exists()  # nothing is created for a rejected run
    bad_scene = tmp_path / "s.json"
    bad_scene.write_text("{}")
    assert run("synth", *FAST, "--scene", bad_scene, "--out", tmp_path / "o") == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        run("synth", "--height", "abc")
    assert exc.value.code == 2


def test_scene_file_poses(tmp_path):
    a = tmp_path / "a"
    assert run("synth", *FAST, "--views", "2", "--baseline", "2.0", "--out", a) == EXIT_OK
    b = tmp_path / "b"
    assert run("synth", *FAST, "--scene", a / "scene.json", "--out", b) == EXIT_OK
    assert [p["center"][0] for p in manifest(b)["poses"]] == pytest.approx([-1.0, 1.0])
    assert (a / "view_1_color.png").read_bytes() == (b / "view_1_color.png").read_bytes()


def test_convert_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pano = EquirectImage(rng.random((32, 64, 3)))
    src = tmp_path / "pano.pfm"
    write_image(src, pano)
    faces = tmp_path / "faces"
    assert run("convert", "--input", src, "--face-size", "16", "--out", faces) == EXIT_OK
    assert read_image(faces / "front.pfm").shape == (16, 16, 3)
    back = tmp_path / "back"
    assert run("convert", "--input", faces, "--direction", "to-equirect", "--out", back) == EXIT_OK
    assert read_image(back / "panorama.pfm").shape == (32, 64, 3)
    assert run("convert", "--input", tmp_path / "nope.png", "--out", back) == EXIT_IO
    (tmp_path / "junk.png").write_bytes(b"junk")
    assert run("convert", "--input", tmp_path / "junk.png", "--out", back) == EXIT_IO


def test_nonfinite_exit_code(tmp_path):
    data = np.ones((4, 8), dtype="<f4")
    data[1, 2] = np.nan
    src = tmp_path / "nan.pfm"
    src.write_bytes(b"Pf\n8 4\n-1.0\n" + data.tobytes())
    assert run("convert", "--input", src, "--out", tmp_path / "x") == EXIT_NUMERIC
