"""Command-line entry point: ``gpcellseg {denoise,segment,eval,synth,bench}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from gpcellseg import io
from gpcellseg.evaluation import AP_ALPHAS, average_precision, iou_matrix, match_masks, rmse, write_ap_csv
from gpcellseg.fast_gp import profile_loglik_direct, profile_loglik_fast
from gpcellseg.kernels import KernelFamily
from gpcellseg.pipeline import PipelineConfig, read_config_file, segment_pipeline
from gpcellseg.segmentation import object_table
from gpcellseg.synthetic import (DiffusionConfig, PhantomConfig, add_noise, branin_field,
                                 diffusion_field, phantom_cells)
from gpcellseg.tiling import denoise, make_layout

log = logging.getLogger("gpcellseg")

BENCH_SIZES = (10, 20, 40, 80)


class JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"time": record.created, "level": record.levelname,
                           "logger": record.name, "message": record.getMessage()})


def _setup_logging(json_log: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter() if json_log else logging.Formatter("%(levelname)s %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


class Outputs:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.created_dir = not self.dir.exists()
        self.dir.mkdir(parents=True, exist_ok=True)
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.dir / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in reversed(self.paths):
            p.unlink(missing_ok=True)
        for d in sorted({p.parent for p in self.paths}, key=lambda d: len(d.parts), reverse=True):
            if d != self.dir and d.exists() and not any(d.iterdir()):
                d.rmdir()
        if self.created_dir and self.dir.exists() and not any(self.dir.iterdir()):
            self.dir.rmdir()


def resolve_config(args) -> PipelineConfig:
    """defaults < config file < command-line flags"""
    config = PipelineConfig()
    if getattr(args, "config", None):
        config = PipelineConfig.from_mapping(read_config_file(args.config), config)
    flags = {"tile_side": args.tile_side, "kernel": args.kernel, "alpha_grid": args.alpha_grid,
             "seed": args.seed}
    return PipelineConfig.from_mapping(flags, config)


def _require_input(args):
    if not args.input:
        raise ValueError("--input is required")
    return io.load_image(args.input)


def cmd_denoise(args, out: Outputs, config: PipelineConfig) -> None:
    Y = _require_input(args)
    layout = make_layout(Y.shape, config.tile_side)
    den = denoise(Y, layout, config.kernel, want_variance=True)
    io.save_image_float(den.stitch("mean"), out.path("mean.tiff"))
    io.save_image_float(den.stitch("variance"), out.path("variance.tiff"))
    out.path("layout.json").write_text(layout.to_json())
    io.write_json({"params": den.params.to_dict(), "calibration_tile": den.calibration_tile,
                   "tile_mu": den.mus, "tile_sigma2": den.sigma2s,
                   "flags": {str(k): v for k, v in den.flags.items()}}, out.path("params.json"))


def cmd_segment(args, out: Outputs, config: PipelineConfig) -> None:
    Y = _require_input(args)
    res = segment_pipeline(Y, config)
    io.save_label_mask(res.labels, out.path("labels.png"))
    io.write_json(object_table(res.labels), out.path("objects.json"))
    for k, trace in enumerate(res.traces):
        trace.to_csv(out.path(f"traces/tile_{k:03d}.csv"))
    if res.denoised is not None:
        out.path("layout.json").write_text(res.denoised.layout.to_json())
    summary = {
        "n_objects": int(res.labels.max()),
        "config": vars(config),
        "params": res.denoised.params.to_dict() if res.denoised else None,
        "alpha_star": [t.alpha_star for t in res.traces],
        "flags": {str(k): v for k, v in res.flags.items()},
    }
    io.write_json(summary, out.path("summary.json"))
    log.info("segmented %d objects", summary["n_objects"])


def cmd_eval(args, out: Outputs, config: PipelineConfig) -> None:
    summary = {}
    if args.gt or args.pred:
        if not (args.gt and args.pred):
            raise ValueError("--gt and --pred must be given together")
        gt, pred = io.load_label_mask(args.gt), io.load_label_mask(args.pred)
        ious = iou_matrix(gt, pred)
        matches = [match_masks(gt, pred, a, ious) for a in AP_ALPHAS]
        name = args.name or Path(args.pred).stem
        write_ap_csv(out.path("ap.csv"), [(name, m) for m in matches])
        summary["ap"] = {repr(m.alpha): average_precision(m) for m in matches}
        summary["n_gt"], summary["n_pred"] = matches[0].n_gt, matches[0].n_pred
    if args.truth or args.estimate:
        if not (args.truth and args.estimate):
            raise ValueError("--truth and --estimate must be given together")
        value = rmse(io.load_image(args.estimate), io.load_image(args.truth))
        with open(out.path("rmse.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image", "rmse"])
            w.writerow([args.name or Path(args.estimate).stem, repr(value)])
        summary["rmse"] = value
    if not summary:
        raise ValueError("nothing to evaluate: give --gt/--pred and/or --truth/--estimate")
    io.write_json(summary, out.path("eval.json"))


def cmd_synth(args, out: Outputs, config: PipelineConfig) -> None:
    seed = config.seed
    if args.kind == "cells":
        pc = PhantomConfig(overlap_pairs=args.overlap_pairs)
        clean, labels = phantom_cells(args.n1, args.n2, args.n_objects, args.shape, seed, pc)
        io.save_label_mask(labels, out.path("gt_labels.png"))
    elif args.kind == "branin":
        clean = branin_field(n1=args.n1, n2=args.n2)
    else:
        clean = diffusion_field(DiffusionConfig(nx=args.n1, nt=args.n2))
    noisy = add_noise(clean, args.sigma0, seed + 1)
    io.save_image_float(clean, out.path("clean.tiff"))
    io.save_image_float(noisy, out.path("image.tiff"))


def cmd_bench(args, out: Outputs, config: PipelineConfig) -> None:
    rng = np.random.default_rng(config.seed)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else BENCH_SIZES
    families = [KernelFamily.parse(config.kernel)] if args.kernel else list(KernelFamily)
    rows = []
    for n in sizes:
        Y = rng.random((n, n))
        g = n / 5
        for fam in families:
            for method, fn in (("fast", profile_loglik_fast), ("direct", profile_loglik_direct)):
                best = np.inf
                for _ in range(args.repeats):
                    t0 = time.perf_counter()
                    fn(Y, g, g, 0.1, fam)
                    best = min(best, time.perf_counter() - t0)
                rows.append((n * n, f"{method}-{fam.value}", best))
                log.info("N=%d %s-%s %.4gs", n * n, method, fam.value, best)
    with open(out.path("bench.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "method", "seconds"])
        for N, m, s in rows:
            w.writerow([N, m, repr(s)])


COMMANDS = {"denoise": cmd_denoise, "segment": cmd_segment, "eval": cmd_eval,
            "synth": cmd_synth, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input")
    common.add_argument("--output-dir", default=".")
    common.add_argument("--config")
    common.add_argument("--tile-side", type=int)
    common.add_argument("--kernel", choices=["matern52", "exp"])
    common.add_argument("--alpha-grid", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--json-log", action="store_true")

    parser = argparse.ArgumentParser(prog="gpcellseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("denoise", parents=[common], help="per-tile GP predictive mean and variance")
    sub.add_parser("segment", parents=[common], help="full unsupervised segmentation")
    p = sub.add_parser("eval", parents=[common], help="AP curve and/or RMSE")
    p.add_argument("--gt")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--estimate")
    p.add_argument("--name")
    p = sub.add_parser("synth", parents=[common], help="write synthetic image/ground-truth pairs")
    p.add_argument("--kind", choices=["cells", "branin", "diffusion"], default="cells")
    p.add_argument("--n1", type=int, default=200)
    p.add_argument("--n2", type=int, default=200)
    p.add_argument("--n-objects", type=int, default=12)
    p.add_argument("--shape", choices=["disc", "blob"], default="disc")
    p.add_argument("--overlap-pairs", type=int, default=0)
    p.add_argument("--sigma0", type=float, default=0.1)
    p = sub.add_parser("bench", parents=[common], help="fast vs direct likelihood timing")
    p.add_argument("--sizes", help="comma-separated image sides (default 10,20,40,80)")
    p.add_argument("--repeats", type=int, default=3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.json_log)
    out = None
    try:
        config = resolve_config(args)
        out = Outputs(args.output_dir)
        COMMANDS[args.command](args, out, config)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.error("%s failed: %s", args.command, exc)
        if out is not None:
            out.cleanup()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
