"""Command-line entry point: ``spectracube <subcommand> ...``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines whose
keys are the long flag names (dashes or underscores); explicit flags win over
the file. Randomness only enters through ``--seed``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .codec import Bitstream, CodecConfig, decode, encode_video
from .core import ArrayGeometry, HyperCube
from .evaluation import bd_metrics, psnr, rd_curves_svg
from .exceptions import SpectraCubeError
from .geometry import Quad, extract_texture, warp_cube, warp_view
from .io import (
    DatasetLayout,
    append_metrics_csv,
    quantize8,
    read_cube,
    read_cube_dir,
    read_depth,
    read_metrics_csv,
    write_cube_dir,
    write_png8,
)
from .pipeline import cross_spectral_case
from .reconstruct import CONFIG_ALIASES, MatchConfig, reconstruct_nocs, reconstruct_tnocs
from .spectra import apply_filters, builtin_filter_bank, load_filter_bank, render_rgb
from .synth import generate, read_scene_spec, write_scene

log = logging.getLogger("spectracube")


class CliError(Exception):
    pass


def _read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = CONFIG_ALIASES.get(key, key)
        out[key.replace("-", "_")] = value
    return out


def _frame_dirs(root: Path):
    """Directories under ``root`` (inclusive) that hold channel PNGs, sorted."""
    root = Path(root)
    if not root.exists():
        raise FileNotFoundError(f"no such path: {root}")
    cands = [root] + sorted(p for p in root.rglob("*") if p.is_dir())
    return [p for p in cands if any(p.glob("ch*.png"))]


def _video_dirs(root: Path):
    """Frame directories of one video: ``root/frame00, root/frame01, ...``."""
    frames = sorted(p for p in Path(root).glob("frame*") if p.is_dir())
    if not frames:
        raise FileNotFoundError(f"no frame* directories in {root}")
    return frames


def _read_video(root):
    return [read_cube_dir(d) for d in _video_dirs(root)]


def _write_rgb_png(cube: HyperCube, path, white_balance=True):
    rgb = render_rgb(cube, white_balance=white_balance).rgb
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.moveaxis(quantize8(rgb), 0, -1), mode="RGB").save(path, format="PNG")


def _bank(args):
    return load_filter_bank(args.bank) if args.bank else builtin_filter_bank()


def cmd_synth(args):
    spec = read_scene_spec(args.spec, seed=args.seed)
    cams = None if args.cameras is None else [int(c) for c in args.cameras.split(",")]
    video = generate(spec, cameras=cams)
    layout = DatasetLayout(args.out, n_cameras=spec.geometry.n_cameras, n_frames=spec.n_frames)
    write_scene(video, layout, args.scene)
    print(f"wrote {args.scene}: {spec.width}x{spec.height}, {spec.n_frames} frame(s) to {args.out}")


def cmd_rgb(args):
    dirs = _frame_dirs(args.inp)
    if not dirs:
        raise CliError(f"no channel images under {args.inp}")
    out = Path(args.out)
    single = len(dirs) == 1 and out.suffix.lower() == ".png"
    for d in dirs:
        target = out if single else out / ("_".join(d.relative_to(args.inp).parts) or "rgb")
        if not single:
            target = target.with_name(target.name + ".png")
        _write_rgb_png(read_cube_dir(d), target, white_balance=not args.no_white_balance)
        print(target)


def cmd_filters(args):
    bank = _bank(args)
    cube = read_cube_dir(args.inp)
    images = apply_filters(cube, bank)
    names = bank.names if not args.names else args.names.split(",")
    out = Path(args.out)
    for name in names:
        img = images[bank.names.index(name)]
        write_png8(img, out / f"{name}.png")
    print(f"wrote {len(names)} filter image(s) to {out}")


def cmd_extract_texture(args):
    vals = [float(v) for v in args.quad.split(",")]
    if len(vals) != 8:
        raise CliError("--quad needs 8 comma-separated numbers x0,y0,...,x3,y3")
    quad = Quad(np.array(vals).reshape(4, 2))
    tex = extract_texture(read_cube_dir(args.inp), quad, args.width, args.height)
    write_cube_dir(tex, args.out)
    print(f"wrote {args.width}x{args.height} texture to {args.out}")


def _geometry(args):
    return ArrayGeometry(baseline_mm=args.baseline_mm)


def cmd_warp(args):
    layout = DatasetLayout(args.root)
    frame_dir = layout.frame_dir(args.scene, args.src, args.frame)
    cube = read_cube_dir(frame_dir)
    depth = read_depth(layout.depth_path(args.scene, args.src, args.frame))
    geom = _geometry(args)
    out = Path(args.out)
    if args.filter:
        bank = _bank(args)
        plane = apply_filters(cube, bank)[bank.names.index(args.filter)]
        warped, mask = warp_view(plane, depth, geom, args.src, args.dst)
        write_png8(warped, out / f"{args.filter}.png")
    else:
        planes, mask = warp_cube(cube, depth, geom, args.src, args.dst)
        write_cube_dir(HyperCube(np.clip(planes, 0, 1), cube.grid), out)
    write_png8(mask.valid.astype(np.float64), out / "mask.png")
    print(f"warped cam{args.src} -> cam{args.dst}: {int(mask.invalid.sum())} missing pixel(s)")


def _match_config(args):
    return MatchConfig(args.block_radius, args.search_radius, args.n_matches, args.batch_fraction)


def _load_case(args, frame):
    layout = DatasetLayout(args.root)
    geom = _geometry(args)
    center = geom.center
    cams = [center, args.peripheral]
    cubes = [None] * geom.n_cameras
    depths = [None] * geom.n_cameras
    for cam in cams:
        cubes[cam] = {frame: read_cube(layout, args.scene, cam, frame)}
        depths[cam] = {frame: read_depth(layout.depth_path(args.scene, cam, frame))}
    return cross_spectral_case(cubes, depths, geom, args.peripheral, frame,
                               args.reference_filter, args.target_filter, _bank(args))


def cmd_reconstruct(args):
    cfg = _match_config(args)
    cur = _load_case(args, args.frame)
    if args.method == "nocs":
        out = reconstruct_nocs(cur.reference, cur.distorted, cur.missing, cfg, n_jobs=args.threads)
    else:
        if args.frame < 1:
            raise CliError("tnocs needs --frame >= 1")
        prev = _load_case(args, args.frame - 1)
        out = reconstruct_tnocs(cur.reference, prev.reference, cur.distorted, prev.distorted,
                                cur.missing, prev.missing, cfg, n_jobs=args.threads)
    value = psnr(out, cur.truth)
    odir = Path(args.out)
    write_png8(out, odir / "reconstructed.png")
    write_png8(cur.missing.astype(np.float64), odir / "missing.png")
    label = args.label or f"{args.method}:{args.scene}:cam{args.peripheral}:frame{args.frame:02d}"
    if args.csv:
        append_metrics_csv([(label, 0.0, value)], args.csv)
    print(f"{label} psnr_db={value:.6f}")


def cmd_encode(args):
    video = _read_video(args.inp)
    cfg = CodecConfig(qp=args.qp, block_size=args.block_size)
    res = encode_video(video, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    res.bitstream.write(out)
    rate = res.size_bits
    quality = np.mean([psnr(a, b) for a, b in zip(res.reconstruction, video)])
    if args.csv:
        append_metrics_csv([(args.label or f"qp{args.qp}", rate, quality)], args.csv)
    print(f"qp={args.qp} rate_bits={rate} psnr_db={quality:.6f}")


def cmd_decode(args):
    frames = decode(Bitstream.read(args.inp))
    out = Path(args.out)
    for t, cube in enumerate(frames):
        write_cube_dir(cube, out / f"frame{t:02d}")
    print(f"decoded {len(frames)} frame(s) to {out}")


def _load_any(path):
    path = Path(path)
    if any(path.glob("ch*.png")):
        return [read_cube_dir(path)]
    return _read_video(path)


def cmd_eval(args):
    if args.metric == "psnr":
        a, b = _load_any(args.a), _load_any(args.b)
        if len(a) != len(b):
            raise CliError(f"frame counts differ: {len(a)} vs {len(b)}")
        sa = np.concatenate([c.samples for c in a])
        sb = np.concatenate([c.samples for c in b])
        print(f"psnr_db={psnr(sa, sb):.6f}")
        return
    ca = [(r, q) for _, r, q in read_metrics_csv(args.a)]
    cb = [(r, q) for _, r, q in read_metrics_csv(args.b)]
    rate, quality = bd_metrics(ca, cb)
    if args.svg:
        rd_curves_svg({Path(args.a).stem: ca, Path(args.b).stem: cb}, args.svg)
    print(f"bd_rate_percent={rate:.6f} bd_psnr_db={quality:.6f}")


def _common(p):
    p.add_argument("--config", help="key = value file providing defaults for the flags")
    p.add_argument("--seed", type=int, default=None, help="seed for any randomness")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _scene_args(p):
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--scene", required=True, help="scene name below the root")
    p.add_argument("--baseline-mm", type=float, default=40.0, help="camera baseline in mm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectracube", description="Hyperspectral camera-array simulation, reconstruction and coding.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a procedural scene into the dataset layout")
    _common(p)
    p.add_argument("--spec", required=True, help="scene spec file (key = value plus layer rows)")
    p.add_argument("--out", required=True, help="dataset root to write")
    p.add_argument("--scene", default="scene", help="scene name (default: scene)")
    p.add_argument("--cameras", help="comma-separated camera indices (default: all)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rgb", help="render CIE 1931 RGB previews of channel stacks")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="frame directory or any tree of them")
    p.add_argument("--out", required=True, help="output .png (single frame) or directory")
    p.add_argument("--no-white-balance", action="store_true", help="skip equal-energy white balance")
    p.set_defaults(func=cmd_rgb)

    p = sub.add_parser("filters", help="simulate the filter bank cameras on one frame")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="frame directory")
    p.add_argument("--out", required=True, help="output directory, one PNG per filter")
    p.add_argument("--bank", help="filter bank CSV (default: built-in nine filters)")
    p.add_argument("--names", help="comma-separated subset of filter names")
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("extract-texture", help="rectify a quadrilateral region into a texture")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="frame directory")
    p.add_argument("--quad", required=True, help="x0,y0,x1,y1,x2,y2,x3,y3 (TL, BL, BR, TR)")
    p.add_argument("--width", type=int, required=True, help="texture width in pixels")
    p.add_argument("--height", type=int, required=True, help="texture height in pixels")
    p.add_argument("--out", required=True, help="output frame directory")
    p.set_defaults(func=cmd_extract_texture)

    p = sub.add_parser("warp", help="forward-warp one camera view into another")
    _common(p)
    _scene_args(p)
    p.add_argument("--src", type=int, required=True, help="source camera index")
    p.add_argument("--dst", type=int, required=True, help="destination camera index")
    p.add_argument("--frame", type=int, default=0, help="frame index")
    p.add_argument("--filter", help="warp this filter image instead of the full cube")
    p.add_argument("--bank", help="filter bank CSV (default: built-in)")
    p.add_argument("--out", required=True, help="output directory (images plus mask.png)")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("reconstruct", help="fill occlusions of a warped view (NOCS or TNOCS)")
    p.add_argument("method", choices=("nocs", "tnocs"))
    _common(p)
    _scene_args(p)
    p.add_argument("--peripheral", type=int, default=5, help="peripheral camera index (default 5)")
    p.add_argument("--frame", type=int, default=1, help="frame to reconstruct")
    p.add_argument("--reference-filter", default="bp550", help="filter seen by the center camera")
    p.add_argument("--target-filter", default="bp450", help="filter of the peripheral camera")
    p.add_argument("--bank", help="filter bank CSV (default: built-in)")
    d = MatchConfig()
    p.add_argument("--block-radius", type=int, default=d.block_radius, help="block radius (7x7 blocks: 3)")
    p.add_argument("--search-radius", type=int, default=d.search_radius, help="search window radius")
    p.add_argument("--n-matches", type=int, default=d.n_matches, help="B, matches per pixel incl. itself")
    p.add_argument("--batch-fraction", type=float, default=d.batch_fraction, help="share filled per round")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--csv", help="append a label,rate_bits,psnr_db row here (rate 0)")
    p.add_argument("--label", help="row label for --csv")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("encode", help="encode a video directory (frame*/ch*.png)")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="directory with frame00, frame01, ...")
    p.add_argument("--out", required=True, help="bitstream file")
    p.add_argument("--qp", type=int, default=27, help="quantization parameter 0-51 (0: lossless)")
    p.add_argument("--block-size", type=int, default=8, help="transform block size")
    p.add_argument("--csv", help="append a label,rate_bits,psnr_db row here")
    p.add_argument("--label", help="row label for --csv")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bitstream into frame*/ch*.png")
    _common(p)
    p.add_argument("--in", dest="inp", required=True, help="bitstream file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="PSNR between cubes or BD metrics between RD curves")
    p.add_argument("metric", choices=("psnr", "bd"))
    _common(p)
    p.add_argument("--a", required=True, help="psnr: frame/video dir; bd: anchor CSV")
    p.add_argument("--b", required=True, help="psnr: frame/video dir; bd: test CSV")
    p.add_argument("--svg", help="bd: also write an RD plot here")
    p.set_defaults(func=cmd_eval)
    return ap


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        values = _read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, raw in values.items():
            if key not in known or key in ("config", "help", "func"):
                raise CliError(f"{args.config}: unknown key {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(raw) if action.type else raw
        sub.set_defaults(**defaults)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (SpectraCubeError, CliError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
