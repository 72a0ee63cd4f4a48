"""Simulated crater detector.

A run draws all of its randomness up front (:func:`draw_noise`) from
per-scene substreams, then :func:`render` turns that noise into detections
for a given quality level.  Rendering the same noise at two quality levels
gives common-random-number comparisons; every scene consumes a fixed number
of draws, so one scene's output never depends on another's.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geomodel import BBox, Detection
from ..rng import RngStream, StreamBatch
from .world import SyntheticWorld, log_uniform


@dataclass(frozen=True)
class DetectorParams:
    sigma_px: float = 3.0
    lambda_fp: float = 0.5
    score_spread: float = 0.2
    fp_slots: int = 10
    run_noise_sd: float = 0.01
    iou_thresh: float = 0.5

    @classmethod
    def from_config(cls, cfg: dict, **overrides) -> "DetectorParams":
        return cls(**{**cfg, **overrides})


@dataclass(frozen=True)
class DetectorNoise:
    """Uniform/normal draws for one run over one world."""

    eps: np.ndarray        # (S, G) standard normal, per crater
    u_det: np.ndarray      # (S, G)
    jitter: np.ndarray     # (S, G, 4) standard normal
    u_score: np.ndarray    # (S, G)
    u_fp_count: np.ndarray  # (S,)
    fp_uniform: np.ndarray  # (S, K, 4): size, x, y, score
    run_shift: float       # standard normal, scaled by run_noise_sd at render time


def run_stream(seed: int, experiment: str, replicate: int | str, fixed_seed: bool = False) -> RngStream:
    """Run-level stream; fixed-seed runs share one label across replicates."""
    label = f"{experiment}/run:fixed" if fixed_seed else f"{experiment}/run:{replicate}"
    return RngStream(seed, label)


def draw_noise_batch(world: SyntheticWorld, streams: list[RngStream], fp_slots: int = 10) -> list[DetectorNoise]:
    """Noise for several runs at once; identical to calling :func:`draw_noise` per run.

    All ``runs x scenes`` substreams advance together, which amortizes the
    per-draw overhead.
    """
    S, G = world.gt_valid.shape
    R = len(streams)
    labels = [f"scene:{i}" for i in range(S)]
    keys = np.concatenate([StreamBatch.children(st, labels).keys for st in streams]) if R else np.zeros(0)
    batch = StreamBatch(keys)
    valid = np.tile(world.gt_valid, (R, 1))
    eps = np.zeros((R * S, G))
    u_det = np.zeros((R * S, G))
    jitter = np.zeros((R * S, G, 4))
    u_score = np.zeros((R * S, G))
    for j in range(G):
        m = valid[:, j]
        eps[:, j] = batch.normal(m)
        u_det[:, j] = batch.uniform(m)
        for c in range(4):
            jitter[:, j, c] = batch.normal(m)
        u_score[:, j] = batch.uniform(m)
    u_fp_count = batch.uniform()
    fp_uniform = np.zeros((R * S, fp_slots, 4))
    for k in range(fp_slots):
        for c in range(4):
            fp_uniform[:, k, c] = batch.uniform()
    out = []
    for r, st in enumerate(streams):
        sl = slice(r * S, (r + 1) * S)
        shift = float(StreamBatch.children(st, ["training"]).normal()[0])
        out.append(DetectorNoise(eps[sl], u_det[sl], jitter[sl], u_score[sl], u_fp_count[sl],
                                 fp_uniform[sl], shift))
    return out


def draw_noise(world: SyntheticWorld, stream: RngStream, fp_slots: int = 10) -> DetectorNoise:
    return draw_noise_batch(world, [stream], fp_slots)[0]


def poisson_from_uniform(u: np.ndarray, lam: np.ndarray, cap: int) -> np.ndarray:
    """Inverse-CDF Poisson counts, truncated at ``cap``; monotone in ``lam``."""
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    for i in range(1, cap + 1):
        step = u >= cdf
        if not step.any():
            break
        k = np.where(step, i, k)
        p = p * lam / i
        cdf = cdf + p
    return k


@dataclass(frozen=True)
class RenderedDetections:
    """Padded per-scene detections: crater slots first, then false positives."""

    boxes: np.ndarray   # (S, D, 4)
    scores: np.ndarray  # (S, D)
    valid: np.ndarray   # (S, D)

    def to_list(self, world: SyntheticWorld) -> list[Detection]:
        out = []
        for s, j in zip(*np.nonzero(self.valid)):
            x, y, w, h = (float(v) for v in self.boxes[s, j])
            out.append(Detection(world.scene_id(int(s)), BBox(x, y, w, h), float(self.scores[s, j])))
        return out


def render(world: SyntheticWorld, noise: DetectorNoise, quality, field_values,
           params: DetectorParams, noise_sd: float, trim: bool = True) -> RenderedDetections:
    """Turn run noise into detections.

    ``quality`` is the model quality per scene (scalar or ``(S,)``) before the
    run-level shift; ``field_values`` is f(lat, lon) per scene.  With
    ``trim=False`` every false-positive slot is kept (masked), so box geometry
    is identical for any quality and IoUs can be computed once.
    """
    S, G = world.gt_valid.shape
    W, H = float(world.width_px), float(world.height_px)
    q = np.broadcast_to(np.asarray(quality, dtype=np.float64), (S,))
    q = q + params.run_noise_sd * noise.run_shift
    base = q * np.asarray(field_values, dtype=np.float64)
    p = np.clip(base[:, None] + noise_sd * noise.eps, 0.0, 1.0)
    emit = world.gt_valid & (noise.u_det < p)

    box = world.gt_boxes + params.sigma_px * noise.jitter
    x0 = np.maximum(box[..., 0], 0.0)
    y0 = np.maximum(box[..., 1], 0.0)
    x1 = np.minimum(box[..., 0] + np.maximum(box[..., 2], 0.0), W)
    y1 = np.minimum(box[..., 1] + np.maximum(box[..., 3], 0.0), H)
    emit &= (x1 > x0) & (y1 > y0)
    # keep the jittered extent exactly where no clipping happened
    bw = np.where((box[..., 0] >= 0.0) & (box[..., 0] + box[..., 2] <= W), box[..., 2], x1 - x0)
    bh = np.where((box[..., 1] >= 0.0) & (box[..., 1] + box[..., 3] <= H), box[..., 3], y1 - y0)
    tp_boxes = np.stack([x0, y0, bw, bh], axis=-1)
    tp_scores = np.clip(p - params.score_spread * noise.u_score, 0.0, 1.0)

    p_scene = np.clip(base, 0.0, 1.0)
    lam = params.lambda_fp * (1.0 - p_scene)
    K = noise.fp_uniform.shape[1]
    n_fp = poisson_from_uniform(noise.u_fp_count, lam, K)
    k_used = int(n_fp.max(initial=0)) if trim else K
    fu = noise.fp_uniform[:, :k_used]
    side = log_uniform(fu[..., 0], 0.2, 25.5) * (1000.0 / world.gsd_m)
    fp_boxes = np.stack([fu[..., 1] * (W - side), fu[..., 2] * (H - side), side, side], axis=-1)
    fp_scores = np.clip(p_scene[:, None] - params.score_spread * fu[..., 3], 0.0, 1.0)
    fp_valid = np.arange(k_used)[None, :] < n_fp[:, None]

    # invalid slots keep their geometry so candidate IoUs can be reused across quality levels
    return RenderedDetections(
        np.concatenate([tp_boxes, fp_boxes], axis=1),
        np.concatenate([tp_scores, fp_scores], axis=1),
        np.concatenate([emit, fp_valid], axis=1),
    )


def gen_detections(world: SyntheticWorld, field, curve, train_size: int, seed: int,
                   replicate: int = 0, fixed_seed: bool = False,
                   params: DetectorParams | None = None, experiment: str = "sim",
                   quality_multiplier=1.0) -> RenderedDetections:
    """One simulated run of a model trained on ``train_size`` images."""
    params = params or DetectorParams()
    stream = run_stream(seed, experiment, replicate, fixed_seed)
    noise = draw_noise(world, stream, params.fp_slots)
    q = curve(train_size) * np.asarray(quality_multiplier, dtype=np.float64)
    return render(world, noise, q, field(world.lat, world.lon), params, field.noise_sd)
