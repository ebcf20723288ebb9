import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from spectracube import __version__
from spectracube.cli import main
from spectracube.core import ArrayGeometry
from spectracube.evaluation import bd_metrics
from spectracube.io import DatasetLayout, read_cube, read_cube_dir, read_depth, read_metrics_csv, write_cube_dir
from spectracube.pipeline import compare_nocs_tnocs
from spectracube.reconstruct import MatchConfig
from spectracube.synth import generate, random_scene_spec

SPEC = """width = 48
height = 40
frames = 2
layer - - - - 24.0
layer 18 8 10 24 2.5 4 0
"""

SMALL = ["--block-radius", "2", "--search-radius", "6", "--n-matches", "8"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    (root / "spec.txt").write_text(SPEC)
    assert main(["synth", "--spec", str(root / "spec.txt"), "--out", str(root), "--scene", "toy",
                 "--cameras", "4,5", "--seed", "3"]) == 0
    return root


def test_synth_writes_layout(dataset):
    lay = DatasetLayout(dataset)
    cube = read_cube(lay, "toy", 5, 1)
    assert cube.shape == (31, 40, 48)
    assert read_depth(lay.depth_path("toy", 5, 1)).depth.min() == pytest.approx(2.5)
    assert not lay.frame_dir("toy", 0, 0).exists()


def test_rgb_previews(dataset, tmp_path):
    frame = DatasetLayout(dataset).frame_dir("toy", 4, 0)
    assert main(["rgb", "--in", str(frame), "--out", str(tmp_path / "one.png")]) == 0
    img = Image.open(tmp_path / "one.png")
    assert img.mode == "RGB" and img.size == (48, 40)
    assert main(["rgb", "--in", str(dataset / "toy"), "--out", str(tmp_path / "all")]) == 0
    assert sorted(p.name for p in (tmp_path / "all").iterdir()) == [
        "cam4_frame00.png", "cam4_frame01.png", "cam5_frame00.png", "cam5_frame01.png"]


def test_filters_and_warp(dataset, tmp_path):
    frame = DatasetLayout(dataset).frame_dir("toy", 4, 0)
    assert main(["filters", "--in", str(frame), "--out", str(tmp_path / "f"), "--names", "bp450,bp550"]) == 0
    assert sorted(p.name for p in (tmp_path / "f").iterdir()) == ["bp450.png", "bp550.png"]
    assert main(["warp", "--root", str(dataset), "--scene", "toy", "--src", "5", "--dst", "4",
                 "--filter", "bp450", "--out", str(tmp_path / "w")]) == 0
    mask = np.array(Image.open(tmp_path / "w" / "mask.png"))
    assert 0 < np.count_nonzero(mask == 0) < mask.size // 4


def test_extract_texture(dataset, tmp_path):
    frame = DatasetLayout(dataset).frame_dir("toy", 4, 0)
    assert main(["extract-texture", "--in", str(frame), "--quad", "2,3,2,13,12,13,12,3",
                 "--width", "10", "--height", "10", "--out", str(tmp_path / "t")]) == 0
    tex = read_cube_dir(tmp_path / "t")
    assert np.array_equal(tex.samples, read_cube_dir(frame).samples[:, 3:13, 2:12])


def test_reconstruct_matches_library(dataset, tmp_path):
    csv = tmp_path / "m.csv"
    for method in ("nocs", "tnocs"):
        assert main(["reconstruct", method, "--root", str(dataset), "--scene", "toy", "--out",
                     str(tmp_path / method), "--csv", str(csv), "--label", method, *SMALL]) == 0
        assert (tmp_path / method / "reconstructed.png").exists()
    lay = DatasetLayout(dataset)
    cubes = [None] * 9
    depths = [None] * 9
    for cam in (4, 5):
        cubes[cam] = [read_cube(lay, "toy", cam, t) for t in (0, 1)]
        depths[cam] = [read_depth(lay.depth_path("toy", cam, t)) for t in (0, 1)]
    ref = compare_nocs_tnocs(cubes, depths, ArrayGeometry(baseline_mm=40.0), 5, 1, MatchConfig(2, 6, 8))
    rows = {label: q for label, _, q in read_metrics_csv(csv)}
    assert rows["nocs"] == pytest.approx(ref["psnr_nocs"], abs=1e-6)
    assert rows["tnocs"] == pytest.approx(ref["psnr_tnocs"], abs=1e-6)


def test_config_file_and_flag_override(dataset, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("search_radius = 4\nB = 6\nblock-radius = 2\n")
    base = ["reconstruct", "nocs", "--root", str(dataset), "--scene", "toy", "--config", str(cfg)]
    assert main(base + ["--out", str(tmp_path / "a"), "--csv", str(tmp_path / "a.csv")]) == 0
    assert main(base + ["--out", str(tmp_path / "b"), "--csv", str(tmp_path / "b.csv"),
                        "--search-radius", "6", "--n-matches", "8"]) == 0
    assert main(["reconstruct", "nocs", "--root", str(dataset), "--scene", "toy", *SMALL,
                 "--out", str(tmp_path / "c"), "--csv", str(tmp_path / "c.csv")]) == 0
    a, b, c = (read_metrics_csv(tmp_path / f"{n}.csv")[0][2] for n in "abc")
    assert b == c and a != b


def test_bad_config_key(dataset, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert main(["reconstruct", "nocs", "--root", str(dataset), "--scene", "toy", "--out", str(tmp_path),
                 "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def _write_video(root, seed):
    spec = random_scene_spec(seed, max_dim=24, min_dim=16, n_frames=3, max_motion=2)
    video = generate(spec, cameras=[4])
    for t, cube in enumerate(video.cubes[4]):
        write_cube_dir(cube, root / f"frame{t:02d}")
    return [read_cube_dir(root / f"frame{t:02d}") for t in range(3)]


def test_encode_decode_lossless(tmp_path, capsys):
    frames = _write_video(tmp_path / "v", 4)
    assert main(["encode", "--in", str(tmp_path / "v"), "--out", str(tmp_path / "v.bin"), "--qp", "0"]) == 0
    assert main(["decode", "--in", str(tmp_path / "v.bin"), "--out", str(tmp_path / "d")]) == 0
    for t, cube in enumerate(frames):
        assert read_cube_dir(tmp_path / "d" / f"frame{t:02d}") == cube
    assert main(["eval", "psnr", "--a", str(tmp_path / "v"), "--b", str(tmp_path / "d")]) == 0
    assert capsys.readouterr().out.strip().endswith("psnr_db=inf")


def test_encode_rd_and_bd(tmp_path, capsys):
    _write_video(tmp_path / "v", 5)
    csv = tmp_path / "rd.csv"
    for qp in (22, 27, 32, 37):
        assert main(["encode", "--in", str(tmp_path / "v"), "--out", str(tmp_path / f"{qp}.bin"),
                     "--qp", str(qp), "--csv", str(csv)]) == 0
    rows = read_metrics_csv(csv)
    rates = [r for _, r, _ in rows]
    assert rates == sorted(rates, reverse=True)
    half = tmp_path / "half.csv"
    half.write_text("label,rate_bits,psnr_db\n" + "".join(f"{l},{r / 2},{q}\n" for l, r, q in rows))
    capsys.readouterr()
    assert main(["eval", "bd", "--a", str(csv), "--b", str(half), "--svg", str(tmp_path / "rd.svg")]) == 0
    out = capsys.readouterr().out
    want, _ = bd_metrics([(r, q) for _, r, q in rows], [(r / 2, q) for _, r, q in rows])
    assert f"bd_rate_percent={want:.6f}" in out
    assert (tmp_path / "rd.svg").read_text().startswith("<svg")


def test_outputs_are_deterministic(tmp_path):
    _write_video(tmp_path / "v", 6)
    for name in ("a", "b"):
        assert main(["encode", "--in", str(tmp_path / "v"), "--out", str(tmp_path / f"{name}.bin")]) == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_missing_input_exits_nonzero(tmp_path, capsys):
    assert main(["decode", "--in", str(tmp_path / "nope.bin"), "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("error:")
    with pytest.raises(SystemExit) as info:
        main(["encode"])
    assert info.value.code == 2


def test_module_entry_point():
    run = subprocess.run([sys.executable, "-m", "spectracube", "--version"], capture_output=True, text=True)
    assert run.returncode == 0 and __version__ in run.stdout
    run = subprocess.run([sys.executable, "-m", "spectracube", "reconstruct", "--help"],
                         capture_output=True, text=True)
    assert run.returncode == 0 and "--n-matches" in run.stdout
