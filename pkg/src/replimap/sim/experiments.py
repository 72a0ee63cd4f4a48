"""The five replay experiments and their report directories.

Each ``expN`` function is pure: (seed, resolved config) -> result object.
:func:`run_experiment` renders a result into a report directory.  Runs are
spread over a thread pool, but every draw comes from a substream labelled by
experiment, run and scene, so thread count never changes the output.
"""
from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from ..deteval import RegionScore, average_precision_arrays, iou_matrix, match_batch, region_scores
from ..errors import ConfigError, ReplimapError
from ..geomodel import detections_doc, write_canonical
from ..hypotest import levene_test, paired_t_test, pearson
from ..partition import PartitionScheme, Region, make_partition, region_index
from ..report import csv_text, geojson_doc, map_features, map_rows, MAP_COLUMNS, stats_doc, write_run_meta, write_text
from ..rng import RngStream
from ..spatialstats import MoranResult, build_weights, moran_permutation_test
from .config import resolve_config
from .detector import DetectorParams, RenderedDetections, draw_noise, draw_noise_batch, render, run_stream
from .field import LearningCurve, PerformanceField
from .world import SyntheticWorld, world_from_config

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4", "exp5")
DEGENERATE_SD = "all replicates identical"


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _models(seed: int, cfg: dict):
    field = PerformanceField.from_config(seed, cfg["field"])
    curve = LearningCurve(**cfg["curve"])
    return field, curve, DetectorParams.from_config(cfg["detector"])


def match_runs(world: SyntheticWorld, rds: list[RenderedDetections], iou_thresh: float,
               ious: np.ndarray | None = None) -> list[np.ndarray]:
    """Match several untrimmed runs over the same world in one stacked pass."""
    R, S = len(rds), world.n_scenes
    gt_boxes = np.tile(world.gt_boxes, (R, 1, 1))
    gt_valid = np.tile(world.gt_valid, (R, 1))
    tp = match_batch(gt_boxes, gt_valid, np.concatenate([rd.boxes for rd in rds]),
                     np.concatenate([rd.scores for rd in rds]), np.concatenate([rd.valid for rd in rds]),
                     iou_thresh, ious=ious)
    return [tp[r * S:(r + 1) * S] for r in range(R)]


def overall_ap(world: SyntheticWorld, rd: RenderedDetections, is_tp: np.ndarray) -> float:
    if world.n_gt == 0:
        return float("nan")
    return average_precision_arrays(rd.scores[rd.valid], is_tp[rd.valid], world.n_gt)


def strip_scores(world: SyntheticWorld, rd: RenderedDetections, tp: np.ndarray, scheme: PartitionScheme,
                 regions: list[Region]) -> list[RegionScore]:
    where = region_index(world.lat, world.lon, scheme)
    return region_scores(where, len(regions), [r.region_id for r in regions],
                         rd.scores, rd.valid, tp, world.gt_valid)


def _error_entry(test: str, err: ReplimapError, **extra) -> dict:
    return {"test": test, "error": str(err), **extra}


# Experiment 1: training-set size -------------------------------------------------

@dataclass
class Exp1Result:
    seed: int
    sizes: list[int]
    acc: np.ndarray                  # (n_sizes, replicates) overall mAP50
    tests: list[dict]                # one stats entry per successive pair
    world: SyntheticWorld
    runs: dict[str, RenderedDetections] = dc_field(default_factory=dict)

    @property
    def mean(self) -> np.ndarray:
        return self.acc.mean(axis=1)

    def pair_p(self, a: int, b: int) -> float | None:
        for e in self.tests:
            if e["pair"] == [a, b]:
                return e.get("p")
        raise KeyError((a, b))


def exp1(seed: int, cfg: dict, threads: int = 1, keep_runs: bool = False) -> Exp1Result:
    """Each replicate draws its detector noise once and renders it at every
    size, so paired differences isolate the training-size effect."""
    c = cfg["exp1"]
    field, curve, params = _models(seed, cfg)
    world = world_from_config(seed, cfg, c["n_val_scenes"])
    fv = field(world.lat, world.lon)
    sizes = list(c["sizes"])
    R = c["replicates"]
    noises = draw_noise_batch(world, [run_stream(seed, "exp1", r) for r in range(R)], params.fp_slots)
    ious = None

    def size_block(n):
        nonlocal ious
        rds = [render(world, nz, curve(n), fv, params, field.noise_sd, trim=False) for nz in noises]
        if ious is None:  # box geometry does not depend on quality
            ious = iou_matrix(np.concatenate([rd.boxes for rd in rds]), np.tile(world.gt_boxes, (R, 1, 1)))
        tps = match_runs(world, rds, params.iou_thresh, ious)
        return [overall_ap(world, rd, tp) for rd, tp in zip(rds, tps)], (rds if keep_runs else None)

    first = size_block(sizes[0])
    parts = [first] + _pmap(size_block, sizes[1:], threads)
    acc = np.array([p[0] for p in parts])
    runs = {}
    if keep_runs:
        for i, n in enumerate(sizes):
            for r in range(R):
                runs[f"n{n:04d}_r{r:02d}"] = parts[i][1][r]
    tests = []
    for i in range(len(sizes) - 1):
        pair = [sizes[i], sizes[i + 1]]
        try:
            tests.append({**paired_t_test(acc[i], acc[i + 1]).report(), "pair": pair})
        except ReplimapError as e:
            tests.append(_error_entry("paired_t", e, pair=pair, n=int(acc.shape[1])))
    return Exp1Result(seed, sizes, acc, tests, world, runs)


# Experiment 2: fixed versus varying seeds -----------------------------------------

@dataclass
class Exp2Result:
    seed: int
    groups: dict[str, list[float]]   # fixed, varying, low, high
    entries: list[dict]
    world: SyntheticWorld
    runs: dict[str, RenderedDetections] = dc_field(default_factory=dict)

    def sd(self, group: str) -> float:
        v = self.groups[group]
        return float(np.std(v, ddof=1))

    def levene_p(self, label: str) -> float | None:
        for e in self.entries:
            if e.get("test") == "levene" and e.get("label") == label:
                return e.get("p")
        return None


def _group_entry(name: str, vals: list[float]) -> dict:
    arr = np.asarray(vals)
    entry = {"test": "group_summary", "group": name, "n": int(arr.size),
             "mean": float(arr.mean()), "sd": float(arr.std(ddof=1))}
    if np.all(arr == arr[0]):
        entry["flag"] = DEGENERATE_SD
    return entry


def exp2(seed: int, cfg: dict, threads: int = 1, keep_runs: bool = False,
         groups: tuple[str, ...] = ("fixed", "varying", "low", "high")) -> Exp2Result:
    """Fixed-seed runs reuse one run label; varying-seed runs are labelled by
    replicate.  A second pair of varying-seed groups differs only in the
    run-to-run training noise and feeds Levene's test.  ``groups`` limits
    which groups are simulated; comparisons need both of their groups."""
    c = cfg["exp2"]
    field, curve, params = _models(seed, cfg)
    world = world_from_config(seed, cfg, c["n_val_scenes"])
    fv = field(world.lat, world.lon)
    q = curve(c["train_size"])
    R = c["replicates"]
    plans = [("fixed", "exp2", True, params.run_noise_sd),
             ("varying", "exp2", False, params.run_noise_sd),
             ("low", "exp2/low", False, c["low_run_noise_sd"]),
             ("high", "exp2/high", False, c["high_run_noise_sd"])]
    plans = [pl for pl in plans if pl[0] in groups]
    jobs = [(name, label, fixed, sd, r) for name, label, fixed, sd in plans for r in range(R)]

    noises = draw_noise_batch(world, [run_stream(seed, label, r, fixed) for _, label, fixed, _, r in jobs],
                              params.fp_slots)

    def one(k):
        p = replace(params, run_noise_sd=jobs[k][3])
        return render(world, noises[k], q, fv, p, field.noise_sd, trim=False)

    rds = _pmap(one, range(len(jobs)), threads)
    tps = match_runs(world, rds, params.iou_thresh)
    out = [(overall_ap(world, rd, tp), rd if keep_runs else None) for rd, tp in zip(rds, tps)]
    acc = {name: [] for name, *_ in plans}
    runs = {}
    for (name, _, _, _, r), (ap, rd) in zip(jobs, out):
        acc[name].append(ap)
        if keep_runs:
            runs[f"{name}_r{r:02d}"] = rd
    entries = [_group_entry(name, acc[name]) for name in acc]
    for label, a, b in (("fixed_vs_varying", "fixed", "varying"), ("low_vs_high", "low", "high")):
        if a not in acc or b not in acc:
            continue
        try:
            entries.append({**levene_test([acc[a], acc[b]]).report(), "label": label})
        except ReplimapError as e:
            entries.append(_error_entry("levene", e, label=label))
    return Exp2Result(seed, acc, entries, world, runs)


# Experiment 3: replicability map ----------------------------------------------------

@dataclass
class Exp3Result:
    seed: int
    scheme: PartitionScheme
    regions: list[Region]
    scores: list[RegionScore]
    entries: list[dict]
    world: SyntheticWorld
    runs: dict[str, RenderedDetections] = dc_field(default_factory=dict)

    @property
    def pearson_entry(self) -> dict:
        return self.entries[0]


def exp3(seed: int, cfg: dict, threads: int = 1, keep_runs: bool = False) -> Exp3Result:
    c = cfg["exp3"]
    field, curve, params = _models(seed, cfg)
    world = world_from_config(seed, cfg)
    scheme = PartitionScheme.from_name(c["scheme"])
    regions = make_partition(scheme)
    noise = draw_noise(world, run_stream(seed, "exp3", 0), params.fp_slots)
    rd = render(world, noise, curve(c["train_size"]), field(world.lat, world.lon), params, field.noise_sd)
    tp = match_batch(world.gt_boxes, world.gt_valid, rd.boxes, rd.scores, rd.valid, params.iou_thresh)
    scores = strip_scores(world, rd, tp, scheme, regions)
    cells = [s for s in scores if s.map50 is not None]
    try:
        entry = {**pearson([s.map50 for s in cells], [s.n_scenes for s in cells]).report(),
                 "label": "map50_vs_n_scenes"}
    except ReplimapError as e:
        entry = _error_entry("pearson", e, label="map50_vs_n_scenes")
    return Exp3Result(seed, scheme, regions, scores, [entry], world, {"main": rd} if keep_runs else {})


# Experiments 4 and 5: strip training, Moran's I ------------------------------------------

@dataclass
class StripModel:
    name: str
    train: tuple[float, float]
    train_region: int
    scores: list[RegionScore]
    moran: MoranResult | None
    entry: dict

    @property
    def values(self) -> list[float | None]:
        return [s.map50 for s in self.scores]


@dataclass
class StripResult:
    seed: int
    experiment: str
    scheme: PartitionScheme
    regions: list[Region]
    models: list[StripModel]
    world: SyntheticWorld
    runs: dict[str, RenderedDetections] = dc_field(default_factory=dict)

    @property
    def entries(self) -> list[dict]:
        return [m.entry for m in self.models]

    def mean_i(self) -> float:
        vals = [m.moran.i_obs for m in self.models if m.moran is not None]
        return float(np.mean(vals)) if vals else float("nan")


def _lat_distance(a, b):
    return np.abs(np.asarray(a) - b)


def _lon_distance(a, b):
    d = np.abs(np.asarray(a) - b) % 360.0
    return np.minimum(d, 360.0 - d)


def _strip_experiment(seed: int, cfg: dict, key: str, threads: int, keep_runs: bool) -> StripResult:
    c = cfg[key]
    field, curve, params = _models(seed, cfg)
    world = world_from_config(seed, cfg)
    latitude = key == "exp4"
    if latitude:
        scheme, axis, dist, unit = PartitionScheme.lat_strips(c["strip_deg"]), 0, _lat_distance, "lat"
    else:
        scheme, axis, dist, unit = PartitionScheme.lon_strips(c["strip_deg"]), 1, _lon_distance, "lon"
    regions = make_partition(scheme)
    where = region_index(world.lat, world.lon, scheme)
    centers = np.array([r.center[axis] for r in regions])
    weights = build_weights(regions, c["weights"])
    fv = field(world.lat, world.lon)
    q = curve(c["train_size"])

    strips = c["train_strips"]
    mids = [(lo + hi) / 2.0 for lo, hi in strips]
    noises = draw_noise_batch(world, [run_stream(seed, f"{key}/model", i) for i in range(len(strips))],
                              params.fp_slots)
    rds = [render(world, nz, q * np.exp(-dist(centers, mid) / c["proximity_deg"])[where], fv, params,
                  field.noise_sd, trim=False) for nz, mid in zip(noises, mids)]
    tps = match_runs(world, rds, params.iou_thresh)

    def one(i):
        lo, hi = strips[i]
        name = f"train_{unit}{lo:g}_{hi:g}"
        scores = strip_scores(world, rds[i], tps[i], scheme, regions)
        train_region = int(np.argmin(dist(centers, mids[i])))
        vals = [s.map50 for s in scores]
        if not c["include_training_strip"]:
            vals[train_region] = None
        try:
            mr = moran_permutation_test(vals, weights, c["n_perm"], RngStream(seed, f"{key}/moran:{i}"))
            entry = {**mr.report(), "label": name}
        except ReplimapError as e:
            mr, entry = None, _error_entry("morans_i", e, label=name)
        return StripModel(name, (float(lo), float(hi)), train_region, scores, mr, entry)

    models = _pmap(one, range(len(strips)), threads)
    runs = {m.name: rd for m, rd in zip(models, rds)} if keep_runs else {}
    return StripResult(seed, key, scheme, regions, models, world, runs)


def exp4(seed: int, cfg: dict, threads: int = 1, keep_runs: bool = False) -> StripResult:
    """Latitude strips: quality decays with distance from the training strip."""
    return _strip_experiment(seed, cfg, "exp4", threads, keep_runs)


def exp5(seed: int, cfg: dict, threads: int = 1, keep_runs: bool = False) -> StripResult:
    """Longitude strips: weak proximity decay, longitude patches dominate."""
    return _strip_experiment(seed, cfg, "exp5", threads, keep_runs)


RUNNERS = {"exp1": exp1, "exp2": exp2, "exp3": exp3, "exp4": exp4, "exp5": exp5}


# report directories ----------------------------------------------------------------------

def _fmt(v, digits: int = 4) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{digits}f}"
    return str(v)


def _md_table(header: list[str], rows: list[list]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_fmt(v) for v in row) + " |" for row in rows]
    return "\n".join(lines)


def _summary_exp1(res: Exp1Result) -> str:
    rows = []
    for i, n in enumerate(res.sizes):
        row = [n, float(res.acc[i].mean()), float(res.acc[i].std(ddof=1))]
        rows.append(row)
    tests = []
    for e in res.tests:
        a, b = e["pair"]
        tests.append([f"{a} vs {b}", e.get("t"), e.get("p"),
                      "yes" if e.get("p") is not None and e["p"] < 0.05 else "no"])
    return "\n\n".join([
        "# Experiment 1: training-set size",
        f"seed {res.seed}, {res.acc.shape[1]} replicates per size, {res.world.n_scenes} validation scenes",
        "## Accuracy by training size",
        _md_table(["size", "mean map50", "sd"], rows),
        "## Paired t-tests, successive sizes",
        _md_table(["pair", "t", "p", "p < 0.05"], tests),
    ]) + "\n"


def _summary_exp2(res: Exp2Result) -> str:
    rows = []
    for e in res.entries:
        if e["test"] == "group_summary":
            rows.append([e["group"], e["n"], e["mean"], e["sd"], e.get("flag", "")])
    lev = []
    for e in res.entries:
        if e["test"] == "levene":
            lev.append([e["label"], e.get("w"), e.get("p"), e.get("error", "")])
    return "\n\n".join([
        "# Experiment 2: fixed versus varying seeds",
        f"seed {res.seed}, {res.world.n_scenes} validation scenes",
        "## Groups",
        _md_table(["group", "runs", "mean map50", "sd", "flag"], rows),
        "## Levene's test (mean-centred)",
        _md_table(["comparison", "W", "p", "note"], lev),
    ]) + "\n"


def _summary_exp3(res: Exp3Result) -> str:
    e = res.pearson_entry
    populated = sum(1 for s in res.scores if s.map50 is not None)
    return "\n\n".join([
        "# Experiment 3: replicability map",
        f"seed {res.seed}, scheme {res.scheme.name}, {len(res.regions)} cells, {populated} with ground truth",
        "## Pearson correlation, cell map50 vs scene count",
        _md_table(["n", "r", "p", "note"], [[e.get("n"), e.get("r"), e.get("p"), e.get("error", "")]]),
    ]) + "\n"


def _summary_strips(res: StripResult) -> str:
    title = ("# Experiment 4: latitude strips" if res.experiment == "exp4"
             else "# Experiment 5: longitude strips")
    header = ["strip"] + [m.name for m in res.models]
    rows = []
    for k, r in enumerate(res.regions):
        row = [r.region_id]
        for m in res.models:
            v = m.scores[k].map50
            cell = _fmt(v)
            row.append(cell + " *" if k == m.train_region else cell)
        rows.append(row)
    mor = [[m.name, m.entry.get("i_obs"), m.entry.get("pseudo_p"), m.entry.get("z_sim"),
            m.entry.get("error", "")] for m in res.models]
    return "\n\n".join([
        title,
        f"seed {res.seed}; * marks the training strip",
        "## map50 by strip",
        _md_table(header, rows),
        "## Moran's I",
        _md_table(["model", "I", "pseudo p", "z", "note"], mor),
    ]) + "\n"


def _write_detections(outdir: Path, world: SyntheticWorld, runs: dict[str, RenderedDetections], mode: str):
    for name, rd in runs.items():
        rep = re.search(r"_r(\d+)$", name)
        if mode == "none" or (mode == "first" and rep is not None and int(rep.group(1)) != 0):
            continue
        write_canonical(outdir / f"detections_{name}.json", detections_doc(rd.to_list(world)))


def _map_files(outdir: Path, regions, scored: list[tuple[dict, list[RegionScore]]], scheme: dict):
    feats, rows, extra_cols = [], [], []
    for extra, scores in scored:
        feats += map_features(regions, scores, extra)
        for row in map_rows(regions, scores):
            rows.append({**extra, **row})
        extra_cols = list(extra)
    write_canonical(outdir / "map.geojson", geojson_doc(feats, scheme))
    write_text(outdir / "map.csv", csv_text(rows, extra_cols + list(MAP_COLUMNS)))


def run_experiment(name: str, seed: int, outdir, config: dict | None = None, threads: int = 1,
                   inputs: dict[str, str] | None = None) -> Path:
    """Run one experiment and write its report directory; returns the directory.

    ``inputs`` (role -> path) are digested into ``run_meta.json``.
    """
    if name not in RUNNERS:
        raise ConfigError("/experiment", f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
    cfg = resolve_config(config)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = RUNNERS[name](seed, cfg, threads=threads, keep_runs=True)

    write_canonical(outdir / "manifest.json", res.world.manifest_doc())
    write_canonical(outdir / "annotations.json", res.world.annotations_doc())
    _write_detections(outdir, res.world, res.runs, cfg["report"]["detections"])

    if name == "exp1":
        entries, summary = res.tests, _summary_exp1(res)
        rows = [{"size": n, "replicate": r, "map50": float(res.acc[i, r])}
                for i, n in enumerate(res.sizes) for r in range(res.acc.shape[1])]
        write_text(outdir / "accuracy.csv", csv_text(rows, ["size", "replicate", "map50"]))
    elif name == "exp2":
        entries, summary = res.entries, _summary_exp2(res)
        rows = [{"group": g, "replicate": r, "map50": v}
                for g, vals in res.groups.items() for r, v in enumerate(vals)]
        write_text(outdir / "accuracy.csv", csv_text(rows, ["group", "replicate", "map50"]))
    elif name == "exp3":
        entries, summary = res.entries, _summary_exp3(res)
        _map_files(outdir, res.regions, [({}, res.scores)], res.scheme.as_dict())
    else:
        entries, summary = res.entries, _summary_strips(res)
        _map_files(outdir, res.regions, [({"model": m.name}, m.scores) for m in res.models],
                   res.scheme.as_dict())

    write_canonical(outdir / "stats.json", stats_doc(entries))
    write_text(outdir / "summary.md", summary)
    write_run_meta(outdir, f"simulate {name} --seed {seed}", {"seed": seed, **cfg}, inputs)
    return outdir
