"""Command-line interface: segment, phantom and evaluate subcommands.

Exit codes: 0 success, 1 usage or parameter error, 2 I/O or format error,
3 knowledge-base error.  The CTXSEG_LOG environment variable (quiet, info,
debug) controls stderr verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import (
    CtxsegError,
    DimensionMismatchError,
    FormatError,
    InvalidParameterError,
    InvalidSpecError,
    ParseError,
    ValidationError,
)
from .knowledge_base import MATCH_POLICIES, load_kb
from .oversegmentation import ingest_label_map, read_pgm, write_label_map, write_pgm
from .phantom import LAYOUTS, PhantomSpec, generate_phantom, phantom_kb, pixel_accuracy, write_phantom
from .region_graph import relabeled_labels, write_merge_log
from .segmenter import DefuzzMode, SegmenterParams, defuzzify, segment, write_iteration_log

log = logging.getLogger("ctxseg.cli")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this CLI reserves 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_segmentation_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in DefuzzMode],
                   default=DefuzzMode.HCD_AND_MCD.value,
                   help="which tiers receive a crisp label (default: %(default)s)")
    p.add_argument("--n-superpixels", type=int, default=400, metavar="N",
                   help="over-segmentation target region count (default: %(default)s)")
    p.add_argument("--compactness", type=float, default=0.1, metavar="C",
                   help="superpixel spatial weight (default: %(default)s)")
    p.add_argument("--similarity-threshold", type=float, default=0.1, metavar="T",
                   help="intensity gap treated as 'similar', normalized units "
                        "(default: %(default)s)")
    p.add_argument("--merge-threshold", type=float, default=0.1, metavar="T",
                   help="membership distance below which same-class neighbors merge "
                        "(default: %(default)s)")
    p.add_argument("--eps", type=float, default=1e-4, metavar="E",
                   help="propagation convergence threshold (default: %(default)s)")
    p.add_argument("--max-inner", type=int, default=500, metavar="N",
                   help="max propagation sweeps per classification round "
                        "(default: %(default)s)")
    p.add_argument("--max-outer", type=int, default=10, metavar="N",
                   help="max classification rounds (default: %(default)s)")
    p.add_argument("--match-policy", choices=list(MATCH_POLICIES), default="exact",
                   help="how an observed context matches a declared configuration "
                        "(default: %(default)s)")
    p.add_argument("--weighted-merge", action="store_true",
                   help="area-weight membership vectors when merging regions")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for propagation sweeps (default: %(default)s)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the PNG report figures")


def _params_from_args(args) -> SegmenterParams:
    return SegmenterParams(
        similarity_threshold=args.similarity_threshold,
        convergence_eps=args.eps,
        max_inner_iterations=args.max_inner,
        match_policy=args.match_policy,
        threads=args.threads,
        merge_distance_threshold=args.merge_threshold,
        max_outer_iterations=args.max_outer,
        defuzz_mode=DefuzzMode(args.mode),
        weighted_merge=args.weighted_merge,
    )


def _add_phantom_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layout", choices=list(LAYOUTS), default="mammo4")
    p.add_argument("--stripes", type=int, default=3, metavar="N",
                   help="band count for the stripes layout (default: %(default)s)")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=4.0,
                   help="Gaussian pixel noise, gray levels (default: %(default)s)")
    p.add_argument("--means", type=str, default=None, metavar="M0,M1,...",
                   help="comma-separated class means (default: layout-specific)")


def _spec_from_args(args) -> PhantomSpec:
    means = None
    if args.means:
        means = tuple(float(tok) for tok in args.means.split(","))
    return PhantomSpec(
        width=args.width,
        height=args.height,
        layout=args.layout,
        n_stripes=args.stripes,
        class_means=means,
        noise_std=args.noise_std,
        seed=args.seed,
    )


def _write_run_outputs(result, kb, outdir: Path, figures: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_pgm(result.label_map, outdir / "class.pgm")
    write_pgm(result.tier_map, outdir / "tier.pgm")
    labels, _ = relabeled_labels(result.final_graph)
    write_label_map(labels, outdir / "regions.pgm")
    write_iteration_log(result.iteration_log, outdir / "iterations.csv")
    write_merge_log(result.final_graph, outdir / "merges.csv")
    result.partition.write_csv(outdir / "partition.csv")
    if figures:
        from . import report

        report.save_report_figures(result, kb.class_names(), outdir / "figures")


def cmd_segment(args) -> int:
    img = read_pgm(args.image)
    kb = load_kb(args.kb)
    labels = ingest_label_map(args.labels) if args.labels else None
    params = _params_from_args(args)
    result = segment(img, kb, params, labels=labels,
                     n_superpixels=args.n_superpixels, compactness=args.compactness)
    _write_run_outputs(result, kb, Path(args.out), figures=not args.no_figures)
    print(f"regions: {result.n_initial_regions} -> {result.n_final_regions}")
    print(f"iterations: {result.n_iterations}")
    print(f"converged: {str(result.converged).lower()}")
    if result.no_seeds:
        print("warning: no seed regions; output is the initial classification")
    return 0


def cmd_phantom(args) -> int:
    paths = write_phantom(_spec_from_args(args), args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_evaluate(args) -> int:
    if args.image or args.truth:
        if not (args.image and args.truth and args.kb):
            raise InvalidParameterError("--image, --truth and --kb must be given together")
        img = read_pgm(args.image)
        truth = read_pgm(args.truth).astype(int)
        if img.shape != truth.shape:
            raise DimensionMismatchError(
                f"image {img.shape} vs truth {truth.shape}"
            )
        kb = load_kb(args.kb)
    else:
        spec = _spec_from_args(args)
        img, truth = generate_phantom(spec)
        kb = phantom_kb(spec)

    params = _params_from_args(args)
    result = segment(img, kb, params,
                     n_superpixels=args.n_superpixels, compactness=args.compactness)
    graph, pm = result.final_graph, result.partition

    print("mode,accuracy_all,accuracy_labeled")
    for mode in DefuzzMode:
        label_map = defuzzify(graph, pm, mode)
        acc_all = pixel_accuracy(label_map, truth, ignore_unlabeled=False)
        acc_labeled = pixel_accuracy(label_map, truth, ignore_unlabeled=True)
        print(f"{mode.value},{acc_all:.6f},{acc_labeled:.6f}")

    if args.out:
        _write_run_outputs(result, kb, Path(args.out), figures=not args.no_figures)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctxseg",
                     description="Knowledge-driven fuzzy contextual segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_seg = sub.add_parser("segment", help="segment a PGM image", parents=[])
    p_seg.add_argument("--image", required=True, help="input 8-bit binary PGM")
    p_seg.add_argument("--kb", required=True, help="knowledge-base file")
    p_seg.add_argument("--out", required=True, help="output directory")
    p_seg.add_argument("--labels", default=None,
                       help="precomputed over-segmentation (16-bit PGM of region ids)")
    _add_segmentation_flags(p_seg)
    p_seg.set_defaults(handler=cmd_segment)

    p_ph = sub.add_parser("phantom", help="generate a synthetic phantom")
    _add_phantom_flags(p_ph)
    p_ph.add_argument("--out", required=True, help="output directory")
    p_ph.set_defaults(handler=cmd_phantom)

    p_ev = sub.add_parser("evaluate",
                          help="segment a phantom and print pixel accuracies as CSV")
    _add_phantom_flags(p_ev)
    p_ev.add_argument("--image", default=None, help="evaluate this image instead")
    p_ev.add_argument("--truth", default=None, help="ground-truth class map (8-bit PGM)")
    p_ev.add_argument("--kb", default=None, help="knowledge base for --image/--truth")
    p_ev.add_argument("--out", default=None, help="also write run outputs here")
    _add_segmentation_flags(p_ev)
    p_ev.set_defaults(handler=cmd_evaluate)
    return parser


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("CTXSEG_LOG", "quiet"), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (ParseError, ValidationError) as exc:
        print(f"ctxseg: knowledge base error: {exc}", file=sys.stderr)
        return 3
    except (OSError, FormatError, DimensionMismatchError) as exc:
        print(f"ctxseg: i/o error: {exc}", file=sys.stderr)
        return 2
    except (InvalidParameterError, InvalidSpecError) as exc:
        print(f"ctxseg: parameter error: {exc}", file=sys.stderr)
        return 1
    except CtxsegError as exc:
        print(f"ctxseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
