"""``replimap`` command line.

Exit codes: 0 success, 1 internal error, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .deteval import replicability_map
from .errors import ConfigError, ParseError, ReplimapError, ValidationError
from .geomodel import load_annotations, load_detections, load_manifest, write_canonical
from .hypotest import levene_test, paired_t_test, pearson
from .partition import PartitionScheme, make_partition, region_census, regions_doc
from .report import append_stats, csv_text, write_map, write_run_meta, write_text
from .rng import RngStream
from .spatialstats import WEIGHT_KINDS, build_weights, moran_permutation_test
from .sim.config import load_config, resolve_config
from .sim.experiments import EXPERIMENTS, run_experiment

SCHEMES = ("grid10", "lat10", "lon20")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _scheme(name: str) -> PartitionScheme:
    try:
        return PartitionScheme.from_name(name)
    except ReplimapError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _threads(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("--seed must fit in 64 unsigned bits")
    return v


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ValidationError(f"cannot create output directory {out}: {e.strerror}") from e
    return out


# partition ----------------------------------------------------------------------------

def cmd_partition(args) -> int:
    scenes = load_manifest(args.manifest)
    boxes = load_annotations(args.gt, scenes) if args.gt else []
    regions = make_partition(args.scheme)
    census = region_census(scenes, boxes, args.scheme)
    out = _outdir(args.output)
    write_canonical(out / "regions.json", regions_doc(args.scheme, regions))
    rows = [{**r.as_dict(), "n_scenes": c.n_scenes, "n_gt": c.n_gt} for r, c in zip(regions, census)]
    write_text(out / "census.csv", csv_text(rows, ["region_id", "lat_lo", "lat_hi", "lon_lo", "lon_hi",
                                                    "n_scenes", "n_gt"]))
    inputs = {"manifest": args.manifest, **({"gt": args.gt} if args.gt else {})}
    write_run_meta(out, "partition", {"scheme": args.scheme.name}, inputs)
    print(f"{len(regions)} regions, {sum(c.n_scenes > 0 for c in census)} populated -> {out}")
    return 0


# repmap ---------------------------------------------------------------------------------

def cmd_repmap(args) -> int:
    scenes = load_manifest(args.manifest)
    gts = load_annotations(args.gt, scenes)
    dets = load_detections(args.pred, scenes)
    regions = make_partition(args.scheme)
    scores = replicability_map(list(scenes), gts, dets, args.scheme, args.iou)
    out = _outdir(args.output)
    write_map(out, regions, scores, args.format, args.scheme.as_dict())
    write_run_meta(out, "repmap", {"scheme": args.scheme.name, "iou_thresh": args.iou, "format": args.format},
                   {"manifest": args.manifest, "gt": args.gt, "pred": args.pred})
    vals = [s.map50 for s in scores if s.map50 is not None]
    mean = sum(vals) / len(vals) if vals else float("nan")
    print(f"{len(regions)} regions, {len(vals)} with ground truth, mean map50 {mean:.4f} -> {out}")
    return 0


# stats ----------------------------------------------------------------------------------

def _read_table(path) -> tuple[list[str], list[dict]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            header = list(reader.fieldnames or [])
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from e
    except csv.Error as e:
        raise ParseError(f"{path}: malformed CSV ({e})") from e
    if not header:
        raise ParseError(f"{path}: empty table")
    return header, rows


def _number(text, where: str) -> float | None:
    if text is None or text.strip() == "":
        return None
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValidationError(f"{where}: not finite: {text!r}")
    return v


def _column(header, rows, name, path) -> list[float | None]:
    if name not in header:
        raise ValidationError(f"{path}: no column {name!r} (have {', '.join(header)})")
    return [_number(r.get(name), f"{path} row {i + 2} column {name!r}") for i, r in enumerate(rows)]


def _pick(header, wanted: list[str] | None, k: int, path) -> list[str]:
    if wanted:
        return wanted
    if len(header) < k:
        raise ValidationError(f"{path}: need at least {k} columns")
    return header[:k]


def _stats_morans(args, header, rows):
    if args.scheme is None:
        raise ValidationError("morans-i needs --scheme")
    regions = make_partition(args.scheme)
    col = args.column or "map50"
    if "region_id" not in header:
        raise ValidationError(f"{args.input}: no column 'region_id'")
    vals = _column(header, rows, col, args.input)
    by_id = {}
    for r, v in zip(rows, vals):
        rid = r["region_id"]
        if rid in by_id:
            raise ValidationError(f"{args.input}: duplicate region_id {rid!r}")
        by_id[rid] = v
    known = {r.region_id for r in regions}
    extra = sorted(set(by_id) - known)
    if extra:
        raise ValidationError(f"{args.input}: region {extra[0]!r} is not part of {args.scheme.name}")
    default = {"grid": "grid_rook_wrap", "lat_strips": "lat_path", "lon_strips": "lon_cycle"}[args.scheme.kind]
    kind = args.weights or default
    weights = build_weights(regions, kind, args.transform)
    res = moran_permutation_test([by_id.get(r.region_id) for r in regions], weights, args.n_perm,
                                 RngStream(args.seed, "stats/moran"), threads=args.threads)
    entry = {**res.report(), "transform": args.transform, "column": col}
    line = (f"Moran's I = {res.i_obs:.6f} (E = {res.e_null:.6f}), pseudo p = {res.pseudo_p:.4g}, "
            f"z = {res.z_sim:.3f}, n = {res.n_used}, {kind}")
    return entry, line, {"scheme": args.scheme.name, "weights": kind, "transform": args.transform,
                         "column": col, "n_perm": args.n_perm, "seed": args.seed}


def _paired_columns(header, rows, cols, path, drop_missing: bool):
    a = _column(header, rows, cols[0], path)
    b = _column(header, rows, cols[1], path)
    pairs = [(x, y) for x, y in zip(a, b) if x is not None and y is not None]
    if not drop_missing and len(pairs) != len(rows):
        raise ValidationError(f"{path}: missing values in columns {cols[0]!r}/{cols[1]!r}")
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _stats_ttest(args, header, rows):
    cols = _pick(header, args.columns, 2, args.input)
    if len(cols) != 2:
        raise ValidationError("ttest-paired needs exactly two columns")
    a, b = _paired_columns(header, rows, cols, args.input, drop_missing=False)
    res = paired_t_test(a, b)
    entry = {**res.report(), "columns": cols}
    line = f"paired t = {res.t:.6f}, df = {res.df}, p = {res.p_two_sided:.4g} ({cols[1]} - {cols[0]})"
    return entry, line, {"columns": cols}


def _stats_levene(args, header, rows):
    cols = _pick(header, args.columns, 2, args.input)
    groups = [[v for v in _column(header, rows, c, args.input) if v is not None] for c in cols]
    res = levene_test(groups, center=args.center)
    entry = {**res.report(), "columns": cols, "center": args.center}
    line = f"Levene W = {res.w:.6f}, df = ({res.df1}, {res.df2}), p = {res.p:.4g}"
    return entry, line, {"columns": cols, "center": args.center}


def _stats_pearson(args, header, rows):
    cols = _pick(header, args.columns, 2, args.input)
    if len(cols) != 2:
        raise ValidationError("pearson needs exactly two columns")
    x, y = _paired_columns(header, rows, cols, args.input, drop_missing=True)
    res = pearson(x, y)
    entry = {**res.report(), "columns": cols}
    line = f"Pearson r = {res.r:.6f}, n = {res.n}, p = {res.p_two_sided:.4g}"
    return entry, line, {"columns": cols}


STATS = {"morans-i": _stats_morans, "ttest-paired": _stats_ttest, "levene": _stats_levene,
         "pearson": _stats_pearson}


def cmd_stats(args) -> int:
    header, rows = _read_table(args.input)
    entry, line, cfg = STATS[args.test](args, header, rows)
    out = _outdir(args.output)
    append_stats(out / "stats.json", [entry])
    write_run_meta(out, f"stats {args.test}", cfg, {"input": args.input})
    print(line)
    return 0


# simulate ---------------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else resolve_config()
    if args.include_training_strip is not None:
        for key in ("exp4", "exp5"):
            cfg[key]["include_training_strip"] = args.include_training_strip
    out = _outdir(args.output)
    run_experiment(args.experiment, args.seed, out, cfg, threads=args.threads,
                   inputs={"config": args.config} if args.config else None)
    summary = (out / "summary.md").read_text(encoding="utf-8").splitlines()[0].lstrip("# ")
    print(f"{summary}: report written to {out}")
    return 0


# parser -------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_threads, default=os.cpu_count() or 1,
                        help="worker threads (default: hardware count); never changes output")

    p = _Parser(prog="replimap", description="Replicability maps and reproducibility statistics "
                                              "for spatial object detection.")
    p.add_argument("--version", action="version", version=f"replimap {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("partition", parents=[common], help="partition scenes into regions")
    sp.add_argument("manifest")
    sp.add_argument("--scheme", type=_scheme, required=True, metavar="{grid10,lat10,lon20}")
    sp.add_argument("--gt", help="annotations file, adds ground-truth counts to the census")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("repmap", parents=[common], help="per-region mAP50 replicability map")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--scheme", type=_scheme, required=True, metavar="{grid10,lat10,lon20}")
    sp.add_argument("--iou", type=float, default=0.5, help="IoU threshold (default 0.5)")
    sp.add_argument("--format", choices=("geojson", "csv", "both"), default="both")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_repmap)

    sp = sub.add_parser("stats", parents=[common], help="statistical tests on CSV inputs")
    sp.add_argument("test", choices=tuple(STATS))
    sp.add_argument("input", help="CSV file")
    sp.add_argument("--columns", type=lambda s: [c for c in s.split(",") if c],
                    help="comma-separated columns (default: the first two)")
    sp.add_argument("--column", help="value column for morans-i (default map50)")
    sp.add_argument("--scheme", type=_scheme, metavar="{grid10,lat10,lon20}")
    sp.add_argument("--weights", choices=WEIGHT_KINDS)
    sp.add_argument("--transform", choices=("binary", "row"), default="binary")
    sp.add_argument("--n-perm", type=int, default=999)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--center", choices=("mean", "median"), default="mean")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("simulate", parents=[common], help="replay one of the five experiments")
    sp.add_argument("experiment", choices=EXPERIMENTS)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--config", help="JSON config overriding the defaults")
    sp.add_argument("--include-training-strip", action=argparse.BooleanOptionalAction, default=None,
                    help="keep the training strip in the strip Moran's I (exp4/exp5; default: config, on)")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ReplimapError as e:
        print(f"replimap: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"replimap: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
