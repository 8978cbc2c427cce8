"""Command-line entry point: ``sarstack <subcommand> ...``.

Exit status: 0 success, 1 usage error, 2 data or format error, 3 contract
violation (e.g. a non-monotone filter file). Failures also print one JSON
line ``{"error": ..., "exit": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments, gmlc
from .classic import FrostParams, LeeParams, frost, lee
from .errors import ContractViolation, DomainError
from .image import (RegionOfInterest, Window, labels_to_image, pattern_to_string, read_pgm,
                    write_pgm)
from .quality import assess
from .speckle import G0Params, PhantomSpec, gamma_star, generate_phantom
from .stackfilter import Statistic, iter_apply, read_filter, to_dnf, train, write_filter

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONTRACT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DomainError(f"{path}: invalid JSON: {exc}") from None


def _contrast(text):
    if text is None:
        return None
    return experiments._parse_contrast(text)


def cmd_simulate(args):
    if args.spec:
        spec = PhantomSpec.from_dict(_load_json(args.spec))
    else:
        width = args.width or args.size
        height = args.height or args.size
        spec = PhantomSpec(
            width=width, height=height,
            left=G0Params(args.alpha_left, args.gamma_left or gamma_star(args.alpha_left), args.looks),
            right=G0Params(args.alpha_right, args.gamma_right or gamma_star(args.alpha_right), args.looks),
            border=args.border, contrast=_contrast(args.contrast), seed=args.seed,
            levels=args.levels, clip_quantile=args.clip_quantile,
        )
    ph = generate_phantom(spec)
    write_pgm(ph.image, args.out)
    if args.labels:
        write_pgm(labels_to_image(ph.labels), args.labels)
    if args.reference:
        write_pgm(ph.reference, args.reference)


def cmd_train(args):
    img = read_pgm(args.input)
    roi = RegionOfInterest.from_json(_load_json(args.roi))
    f = train(img, roi, Statistic.parse(args.stat), Window.parse(args.window))
    write_filter(f, args.out, img.levels)


def cmd_apply(args):
    img = read_pgm(args.input)
    f, _ = read_filter(args.filter)
    out = img
    dump = Path(args.dump_dir) if args.dump_dir else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)
    for i, out in enumerate(iter_apply(img, f, args.iters), 1):
        if dump and (i % args.dump_every == 0 or i == args.iters):
            write_pgm(out, dump / f"iter_{i:04d}.pgm")
    write_pgm(out, args.out)


def cmd_lee(args):
    write_pgm(lee(read_pgm(args.input), LeeParams(Window.parse(args.window), args.looks)), args.out)


def cmd_frost(args):
    write_pgm(frost(read_pgm(args.input), FrostParams(Window.parse(args.window), args.damping)),
              args.out)


def cmd_quality(args):
    rep = assess(read_pgm(args.ref), read_pgm(args.input), args.window)
    print(f"Q={rep.q:.6f} beta={rep.beta:.6f} windows={rep.q_windows} skipped={rep.q_skipped}")


def _class_rois(data):
    if isinstance(data, dict):
        data = data.get("classes")
    if not isinstance(data, list) or len(data) < 2:
        raise DomainError("class ROI document must list the rectangles of at least two classes")
    return [RegionOfInterest.from_json(rs) for rs in data]


def cmd_gmlc(args):
    img = read_pgm(args.input)
    rois = _class_rois(_load_json(args.roi))
    model = gmlc.fit(img, rois)
    labels = gmlc.classify(img, model)
    if args.out:
        write_pgm(labels_to_image(labels), args.out)
    for c in range(model.n_classes):
        print(f"class {c}: mean={model.means[c]:.6g} var={model.variances[c]:.6g}")
    if args.truth:
        truth = read_pgm(args.truth).pixels
        mask = None
        if args.eval_roi:
            mask = RegionOfInterest.from_json(_load_json(args.eval_roi)).mask(img.shape)
        cm = gmlc.confusion(labels, truth, mask, model.n_classes)
        text = cm.to_csv()
        if args.confusion:
            Path(args.confusion).write_text(text)
        sys.stdout.write(text)


def _write(path: Path, text: str):
    path.write_text(text, newline="\n")


def cmd_mc_quality(args):
    data = _load_json(args.config) if args.config else {}
    for key in ("seed", "replications", "size", "workers"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    cfg = experiments.QualityMcConfig.from_dict(data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = experiments.run_quality_mc(cfg)
    _write(out / "config.json", cfg.to_json() + "\n")
    _write(out / "quality_rows.csv", res.rows_csv())
    _write(out / "quality_aggregate.csv", res.aggregate_csv())
    if args.exemplars:
        experiments.dump_quality_exemplar(cfg, out / "exemplars")
    sys.stdout.write(res.aggregate_csv())


def cmd_mc_classify(args):
    data = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    cfg = experiments.ClassifExpConfig.from_dict(data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = experiments.run_classification_exp(cfg)
    _write(out / "classification.csv", res.to_csv())
    if args.dump_maps:
        experiments.dump_classification_maps(res, out / "labels")
    sys.stdout.write(res.to_csv())
    last = max(cfg.iterations)
    off = experiments.border_offset(res.label_maps[("stack", last)], res.border)
    print(f"border offset after {last} stack iterations: {off:.3f} columns")


def cmd_inspect_filter(args):
    f, levels = read_filter(args.filter)
    terms = to_dnf(f)
    print(f"window {f.window}")
    print(f"levels {levels}")
    print(f"inputs {f.n}")
    print(f"true patterns {int(f.table.sum())} of {f.table.size}")
    print(f"minimal terms {len(terms)}")
    for t in terms[:args.terms]:
        print(f"  {pattern_to_string(t, f.n)}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sarstack", description="Adaptive stack filters for speckled imagery.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("simulate", help="two-region G0 phantom")
    s.add_argument("--spec", help="PhantomSpec JSON (overrides the other options)")
    s.add_argument("--alpha-left", type=float, default=-1.5)
    s.add_argument("--alpha-right", type=float, default=-10.0)
    s.add_argument("--gamma-left", type=float, help="default: unit-mean scale")
    s.add_argument("--gamma-right", type=float, help="default: unit-mean scale")
    s.add_argument("--looks", type=float, default=1.0)
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--width", type=int)
    s.add_argument("--height", type=int)
    s.add_argument("--border", type=int, help="first column of the right region")
    s.add_argument("--contrast", help="ratio of region means, e.g. 10:1")
    s.add_argument("--levels", type=int, default=255, choices=(255, 65535))
    s.add_argument("--clip-quantile", type=float, default=0.995)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--labels")
    s.add_argument("--reference", help="write the noiseless region-mean image")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("train", help="train a stack filter on regions of interest")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--roi", required=True, help="JSON list of {x,y,w,h[,stat]}")
    s.add_argument("--stat", default="mean",
                   help="mean | median | lower-quartile | upper-quartile | constant:<v>")
    s.add_argument("--window", default="3x3")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("apply", help="apply a stack filter k times")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--filter", required=True)
    s.add_argument("--iters", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--dump-dir", help="write intermediate iterations here")
    s.add_argument("--dump-every", type=int, default=1)
    s.set_defaults(func=cmd_apply)

    s = sub.add_parser("lee", help="Lee filter")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--window", default="3x3")
    s.add_argument("--looks", type=float, default=1.0)
    s.set_defaults(func=cmd_lee)

    s = sub.add_parser("frost", help="Frost filter")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--window", default="3x3")
    s.add_argument("--damping", type=float, default=2.0)
    s.set_defaults(func=cmd_frost)

    s = sub.add_parser("quality", help="Q and beta indexes of an image against a reference")
    s.add_argument("--ref", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--window", type=int, default=8, help="Q window side")
    s.set_defaults(func=cmd_quality)

    s = sub.add_parser("gmlc", help="Gaussian maximum-likelihood classification")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--roi", required=True, help="JSON list (one entry per class) of rectangle lists")
    s.add_argument("--out", help="label map PGM")
    s.add_argument("--truth", help="ground-truth label PGM")
    s.add_argument("--eval-roi", help="JSON rectangles restricting the confusion matrix")
    s.add_argument("--confusion", help="write the confusion matrix CSV here")
    s.set_defaults(func=cmd_gmlc)

    s = sub.add_parser("mc-quality", help="Monte Carlo study of Q and beta versus contrast")
    s.add_argument("--config")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--size", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--exemplars", action="store_true", help="dump PGMs of replication 0")
    s.set_defaults(func=cmd_mc_quality)

    s = sub.add_parser("mc-classify", help="classification accuracy after filtering")
    s.add_argument("--config")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--dump-maps", action="store_true")
    s.set_defaults(func=cmd_mc_classify)

    s = sub.add_parser("inspect-filter", help="summarise a filter file")
    s.add_argument("--filter", required=True)
    s.add_argument("--terms", type=int, default=5, help="minimal terms to list")
    s.set_defaults(func=cmd_inspect_filter)
    return p


def _fail(kind: str, code: int, message: str) -> int:
    print(json.dumps({"error": kind, "exit": code, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, str(exc))
    try:
        args.func(args)
    except ContractViolation as exc:
        return _fail("contract", EXIT_CONTRACT, str(exc))
    except (DomainError, OSError) as exc:
        return _fail("data", EXIT_DATA, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
