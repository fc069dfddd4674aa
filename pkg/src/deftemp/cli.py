"""Command line interface.

Subcommands:
  run      segment one image with a template
  track    segment an ordered image sequence, seeding each frame from the last
  fixture  synthesize a test scene (image + template + ground truth)

Exit codes: 0 success, 2 no acceptable match (or failed frames in track
mode), 3 configuration errors, 4 file I/O errors.
"""

import argparse
import glob as globlib
import sys
from pathlib import Path

from deftemp.config import build_pipeline_config, load_config, parse_pose
from deftemp.errors import (
    DeftempError,
    IoError,
    NoCandidates,
    NoEdges,
    NoSearchSpace,
)
from deftemp.fixtures import FixtureSpec, make_fixture
from deftemp.pipeline import FrameFailure, run_pipeline, run_track
from deftemp.raster import save_image, save_template

EXIT_OK = 0
EXIT_NO_MATCH = 2
EXIT_CONFIG = 3
EXIT_IO = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this CLI reserves 2 for
    # "no acceptable match", so usage problems map to the config exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common_flags(p):
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--roi-percentile", type=float, default=None,
                   help="response percentile an ROI peak must clear")
    p.add_argument("--roi-max-windows", type=int, default=None,
                   help="maximum number of ROI windows")
    p.add_argument("--pso-seed", type=int, default=None,
                   help="base RNG seed for the swarm")
    p.add_argument("--pso-iters", type=int, default=None,
                   help="swarm iterations")
    p.add_argument("--pso-particles", type=int, default=None,
                   help="swarm size")
    p.add_argument("--alpha", type=float, default=None,
                   help="rigidity penalty weight")
    p.add_argument("--cp-radius", type=float, default=None,
                   help="half-width of the box each control point may move in")
    p.add_argument("--skip-roi", action="store_true", default=None,
                   help="skip ROI discovery and search the whole frame")
    p.add_argument("--dump-epf", action="store_true", default=None,
                   help="write the finest edge potential field as epf.pgm")
    p.add_argument("--dump-candidates", action="store_true", default=None,
                   help="write candidates from every pyramid level")
    p.add_argument("--dump-trace", action="store_true", default=None,
                   help="write the winning swarm cost trace as trace.csv")
    p.add_argument("--dump-warp", action="store_true", default=None,
                   help="write the final warp sampled on a grid as warp.csv")


def build_parser() -> _Parser:
    parser = _Parser(prog="deftemp",
                     description="deformable template localization")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p_run = sub.add_parser("run", help="segment a single image")
    p_run.add_argument("--image", required=True)
    p_run.add_argument("--template", required=True)
    p_run.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p_run)

    p_track = sub.add_parser("track", help="segment an ordered sequence")
    p_track.add_argument("--images", required=True, nargs="+",
                         help="frame paths or globs, in order")
    p_track.add_argument("--template", required=True)
    p_track.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p_track)

    p_fix = sub.add_parser("fixture", help="synthesize a test scene")
    p_fix.add_argument("--shape", required=True,
                       choices=("ellipse", "rectangle", "cshape"))
    p_fix.add_argument("--size", type=int, default=256,
                       help="square image side in pixels")
    p_fix.add_argument("--pose", default=None,
                       help="s=..,theta=..,dx=..,dy=.. "
                            "(omit to center the shape)")
    p_fix.add_argument("--deform", type=float, default=0.0,
                       help="radial deformation amplitude in pixels")
    p_fix.add_argument("--cycles", type=int, default=3,
                       help="deformation cycles around the boundary")
    p_fix.add_argument("--noise", type=float, default=0.0,
                       help="additive Gaussian noise sigma")
    p_fix.add_argument("--seed", type=int, default=0)
    p_fix.add_argument("--points", type=int, default=48,
                       help="contour points on the template")
    p_fix.add_argument("--cps", type=int, default=8,
                       help="control points on the template")
    p_fix.add_argument("--out", required=True, help="output directory")
    return parser


def _overrides_from_args(args) -> dict:
    return {
        "stage1.percentile": args.roi_percentile,
        "stage1.max_windows": args.roi_max_windows,
        "pso.seed": args.pso_seed,
        "pso.iterations": args.pso_iters,
        "pso.particles": args.pso_particles,
        "pso.alpha": args.alpha,
        "pso.radius": args.cp_radius,
        "pipeline.skip_roi": args.skip_roi,
        "pipeline.dump_epf": args.dump_epf,
        "pipeline.dump_candidates": args.dump_candidates,
        "pipeline.dump_trace": args.dump_trace,
        "pipeline.dump_warp": args.dump_warp,
    }


def _expand_images(patterns) -> tuple:
    paths = []
    for pat in patterns:
        if any(ch in pat for ch in "*?["):
            hits = sorted(globlib.glob(pat))
            if not hits:
                raise IoError(f"no files match {pat!r}")
            paths.extend(hits)
        else:
            paths.append(pat)
    return tuple(paths)


def _config_from_args(args, **fields):
    file_values = load_config(args.config) if args.config else None
    return build_pipeline_config(file_values, _overrides_from_args(args),
                                 **fields)


def _cmd_run(args) -> int:
    cfg = _config_from_args(args, mode="run", image=args.image,
                            template=args.template, out_dir=args.out)
    result = run_pipeline(cfg)
    print(f"match: cost={result.final_cost:.6f} "
          f"pose=(s={result.pose.scale:.4f}, theta={result.pose.rotation:.4f}, "
          f"dx={result.pose.dx:.2f}, dy={result.pose.dy:.2f})")
    print(f"outputs written to {args.out}")
    return EXIT_OK


def _cmd_track(args) -> int:
    cfg = _config_from_args(args, mode="track",
                            images=_expand_images(args.images),
                            template=args.template, out_dir=args.out)
    results = run_track(cfg)
    failures = 0
    for entry in results:
        if isinstance(entry, FrameFailure):
            failures += 1
            print(f"frame {entry.frame_index}: FAILED ({entry.error})")
        else:
            note = " [relocalized]" if entry.relocalized else ""
            print(f"frame {entry.frame_index}: cost="
                  f"{entry.final_cost:.6f}{note}")
    print(f"outputs written to {args.out}")
    return EXIT_NO_MATCH if failures else EXIT_OK


def _cmd_fixture(args) -> int:
    pose = parse_pose(args.pose) if args.pose else None
    spec = FixtureSpec(shape=args.shape, size=(args.size, args.size),
                       pose=pose, deform_amplitude=args.deform,
                       deform_cycles=args.cycles, noise=args.noise,
                       seed=args.seed, contour_points=args.points,
                       control_points=args.cps)
    fixture = make_fixture(spec)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output dir {out}: {exc}") from exc
    save_image(fixture.image, out / "image.pgm")
    save_template(fixture.template, out / "template.txt")
    lines = [
        f"shape = {spec.shape}",
        f"symmetry = {fixture.symmetry:.6f}",
        f"pose.scale = {fixture.pose.scale:.6f}",
        f"pose.rotation = {fixture.pose.rotation:.6f}",
        f"pose.dx = {fixture.pose.dx:.6f}",
        f"pose.dy = {fixture.pose.dy:.6f}",
    ]
    for i, (x, y) in enumerate(fixture.cp_targets):
        lines.append(f"cp{i}.x = {x:.6f}")
        lines.append(f"cp{i}.y = {y:.6f}")
    try:
        (out / "truth.txt").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write truth file: {exc}") from exc
    print(f"fixture written to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "track":
            return _cmd_track(args)
        return _cmd_fixture(args)
    except (NoCandidates, NoEdges, NoSearchSpace) as exc:
        print(f"no match: {exc}", file=sys.stderr)
        for key, val in sorted(getattr(exc, "diagnostics", {}).items()):
            print(f"  {key} = {val}", file=sys.stderr)
        return EXIT_NO_MATCH
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DeftempError as exc:
        # config and data-contract problems (bad values, mismatched inputs)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
