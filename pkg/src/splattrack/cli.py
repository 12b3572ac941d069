"""Command-line entry points: synth, estimate, plan, serve."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .pipeline import PipelineConfig, run_estimate
from .planner import plan as plan_path
from .planner import smooth
from .splatmap import build_occupancy, load_ply
from .synth import overhead_scenario, write_scenario


def _vec3(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric coordinate in {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splattrack")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic scenario directory")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--frames", type=int, default=50)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--n-samples", type=int, default=8)
    p_synth.add_argument("--depth-sigma", type=float, default=0.0)
    p_synth.add_argument("--logit-sigma", type=float, default=0.0)
    p_synth.add_argument("--outlier-frac", type=float, default=0.0)

    p_est = sub.add_parser("estimate", help="run the pose pipeline over a scenario")
    p_est.add_argument("--scenario", required=True)
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--out", required=True)

    p_plan = sub.add_parser("plan", help="plan a path on a splat map")
    p_plan.add_argument("--map", required=True)
    p_plan.add_argument("--start", type=_vec3, required=True)
    p_plan.add_argument("--goal", type=_vec3, required=True)
    p_plan.add_argument("--voxel", type=float, default=0.2)

    p_serve = sub.add_parser("serve", help="serve the live API")
    p_serve.add_argument("--map", required=True)
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--backend", default="")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--ui", default="", help="directory of console files to serve at /")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "synth":
        scn = overhead_scenario(
            seed=args.seed,
            n_frames=args.frames,
            depth_sigma=args.depth_sigma,
            logit_sigma=args.logit_sigma,
            outlier_frac=args.outlier_frac,
            n_samples=args.n_samples,
        )
        write_scenario(scn, args.out)
        print(f"wrote {args.frames} frames to {args.out}")
        return 0
    if args.command == "estimate":
        cfg = PipelineConfig.from_file(args.config)
        count = run_estimate(args.scenario, cfg, args.out)
        print(f"wrote {count} pose records to {args.out}")
        return 0
    if args.command == "plan":
        splat_map = load_ply(args.map)
        grid = build_occupancy(splat_map, args.voxel)
        path = plan_path(grid, args.start, args.goal)
        path = smooth(path, grid, iterations=64)
        print(json.dumps(path.to_payload()))
        return 0
    if args.command == "serve":
        from .service import serve

        cfg = PipelineConfig.from_file(args.config)
        serve(
            cfg,
            args.map,
            args.port,
            backend_url=args.backend,
            host=args.host,
            ui_dir=args.ui or None,
        )
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
