"""Contiguity weights over partitions and Moran's I with permutation inference."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateError, DomainError, InsufficientDataError, ZeroVarianceError
from .partition import Region
from .rng import RngStream, StreamBatch

WEIGHT_KINDS = ("grid_rook_wrap", "grid_queen_wrap", "lat_path", "lon_cycle")
TRANSFORMS = ("binary", "row")
# permuted statistics within this distance of the observed one count as ties
TIE_TOL = 1e-12


@dataclass(frozen=True)
class WeightsMatrix:
    """Symmetric binary adjacency stored as undirected edges ``i < j``.

    ``transform="row"`` row-standardises at evaluation time (after any
    null regions have been dropped).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    kind: str
    transform: str = "binary"
    region_ids: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise DomainError(f"unknown weights transform {self.transform!r}")
        for i, j in self.edges:
            if not 0 <= i < j < self.n:
                raise DomainError(f"bad edge ({i}, {j}) for n={self.n}")

    @property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def directed(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, weight) with both directions of every edge."""
        if not self.edges:
            e = np.zeros(0, dtype=np.int64)
            return e, e, np.zeros(0)
        pairs = np.array(self.edges, dtype=np.int64)
        src = np.concatenate([pairs[:, 0], pairs[:, 1]])
        dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
        if self.transform == "binary":
            w = np.ones(src.size)
        else:
            w = 1.0 / self.degree[src]
        return src, dst, w

    @property
    def s0(self) -> float:
        return float(self.directed()[2].sum())

    def dense(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        src, dst, w = self.directed()
        m[src, dst] = w
        return m

    def subset(self, keep) -> "WeightsMatrix":
        keep = np.asarray(keep, dtype=bool)
        new_index = np.cumsum(keep) - 1
        edges = tuple((int(new_index[i]), int(new_index[j])) for i, j in self.edges if keep[i] and keep[j])
        ids = tuple(r for r, k in zip(self.region_ids, keep) if k) if self.region_ids else ()
        return WeightsMatrix(int(keep.sum()), edges, self.kind, self.transform, ids)


def _edges_grid(rows: int, cols: int, wrap: bool, queen: bool) -> tuple[tuple[int, int], ...]:
    out = set()
    steps = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if queen else [])
    for r in range(rows):
        for c in range(cols):
            for dr, dc in steps:
                r2, c2 = r + dr, c + dc
                if not 0 <= r2 < rows:
                    continue
                if not 0 <= c2 < cols:
                    if not wrap:
                        continue
                    c2 %= cols
                a, b = r * cols + c, r2 * cols + c2
                if a != b:
                    out.add((min(a, b), max(a, b)))
    return tuple(sorted(out))


def grid_weights(rows: int, cols: int, wrap: bool = True, queen: bool = False,
                 transform: str = "binary") -> WeightsMatrix:
    """Contiguity on a row-major ``rows x cols`` lattice; ``wrap`` joins first and last columns."""
    kind = "grid_queen_wrap" if queen else "grid_rook_wrap"
    return WeightsMatrix(rows * cols, _edges_grid(rows, cols, wrap, queen), kind, transform)


def _scheme_of(regions: Sequence[Region]) -> str:
    prefixes = {r.region_id.split(":", 1)[0] for r in regions}
    if len(prefixes) != 1:
        raise DomainError(f"regions mix schemes {sorted(prefixes)}")
    return prefixes.pop()


def build_weights(regions: Sequence[Region], kind: str, transform: str = "binary") -> WeightsMatrix:
    if kind not in WEIGHT_KINDS:
        raise DomainError(f"unknown weights kind {kind!r}; expected one of {', '.join(WEIGHT_KINDS)}")
    regions = list(regions)
    if not regions:
        raise DomainError("no regions")
    scheme = _scheme_of(regions)
    ids = tuple(r.region_id for r in regions)
    n = len(regions)
    if kind in ("grid_rook_wrap", "grid_queen_wrap"):
        if scheme != "grid":
            raise DomainError(f"{kind} weights need a grid partition, got {scheme} regions")
        rows = len({(r.lat_lo, r.lat_hi) for r in regions})
        cols = n // rows
        if rows * cols != n:
            raise DomainError("grid regions do not form a full lattice")
        w = grid_weights(rows, cols, wrap=True, queen=kind == "grid_queen_wrap", transform=transform)
        return WeightsMatrix(n, w.edges, kind, transform, ids)
    if kind == "lat_path":
        if scheme != "lat":
            raise DomainError(f"lat_path weights need latitude strips, got {scheme} regions")
        edges = tuple((i, i + 1) for i in range(n - 1))
    else:
        if scheme != "lon":
            raise DomainError(f"lon_cycle weights need longitude strips, got {scheme} regions")
        edges = {(i, i + 1) for i in range(n - 1)}
        if n > 2:
            edges.add((0, n - 1))
        edges = tuple(sorted(edges))
    return WeightsMatrix(n, edges, kind, transform, ids)


# Moran's I ---------------------------------------------------------------------

def _prepare(values, weights: WeightsMatrix):
    vals = np.array([np.nan if v is None else float(v) for v in values], dtype=np.float64)
    if vals.size != weights.n:
        raise DomainError(f"{vals.size} values for a {weights.n}-region weights matrix")
    keep = np.isfinite(vals)
    x = vals[keep]
    if x.size < 2:
        raise InsufficientDataError(f"Moran's I needs at least 2 non-null values, got {x.size}")
    if x.max() == x.min():
        raise ZeroVarianceError("all values are equal")
    sub = weights.subset(keep) if not keep.all() else weights
    src, dst, w = sub.directed()
    s0 = float(w.sum())
    if s0 == 0:
        raise InsufficientDataError("no neighbouring pairs remain after dropping null regions")
    z = x - x.mean()
    return z, src, dst, w, s0


def _moran_rows(z_rows: np.ndarray, src, dst, w, s0: float, denom: float) -> np.ndarray:
    n = z_rows.shape[1]
    num = (z_rows[:, src] * z_rows[:, dst] * w).sum(axis=1)
    return (n / s0) * num / denom


def morans_i(values, weights: WeightsMatrix) -> float:
    """Global Moran's I; ``None``/NaN regions are dropped with their edges."""
    z, src, dst, w, s0 = _prepare(values, weights)
    return float(_moran_rows(z[None, :], src, dst, w, s0, float((z * z).sum()))[0])


@dataclass(frozen=True)
class MoranResult:
    i_obs: float
    e_null: float
    pseudo_p: float
    z_sim: float
    n_perm: int
    n_used: int
    kind: str = ""
    seed: int | None = None
    perm_mean: float = float("nan")
    perm_sd: float = float("nan")

    def report(self) -> dict:
        return {"test": "morans_i", "kind": self.kind, "n_used": self.n_used, "i_obs": self.i_obs,
                "e_null": self.e_null, "pseudo_p": self.pseudo_p, "z_sim": self.z_sim,
                "n_perm": self.n_perm, "seed": self.seed}


def permutation_indices(rng: RngStream, n: int, start: int, stop: int) -> np.ndarray:
    """Fisher-Yates permutations ``start..stop-1``; permutation k uses substream ``perm:k``."""
    batch = StreamBatch.children(rng, [f"perm:{k}" for k in range(start, stop)])
    m = stop - start
    idx = np.tile(np.arange(n), (m, 1))
    rows = np.arange(m)
    for i in range(n - 1, 0, -1):
        j = np.minimum((batch.uniform() * (i + 1)).astype(np.int64), i)
        tmp = idx[rows, j].copy()
        idx[rows, j] = idx[:, i]
        idx[:, i] = tmp
    return idx


def moran_permutation_test(values, weights: WeightsMatrix, n_perm: int = 999,
                           rng: RngStream | None = None, threads: int = 1,
                           chunk: int = 1000) -> MoranResult:
    """Moran's I with a one-sided (upper tail) permutation pseudo p-value.

    Values are shuffled over the non-null regions.  Output depends only on
    the inputs and ``rng``; ``threads`` changes scheduling, not results.
    """
    if n_perm < 2:
        raise DomainError(f"need at least 2 permutations, got {n_perm}")
    rng = rng if rng is not None else RngStream(0, "moran")
    z, src, dst, w, s0 = _prepare(values, weights)
    n = z.size
    denom = float((z * z).sum())
    i_obs = float(_moran_rows(z[None, :], src, dst, w, s0, denom)[0])

    def run(bounds):
        lo, hi = bounds
        perms = permutation_indices(rng, n, lo, hi)
        return _moran_rows(z[perms], src, dst, w, s0, denom)

    spans = [(lo, min(lo + chunk, n_perm)) for lo in range(0, n_perm, chunk)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    i_perm = np.concatenate(parts)
    mean = float(i_perm.mean())
    sd = float(i_perm.std(ddof=1))
    if sd == 0:
        raise DegenerateError("permutation distribution has zero spread")
    hits = int(np.count_nonzero(i_perm >= i_obs - TIE_TOL))
    return MoranResult(
        i_obs=i_obs,
        e_null=-1.0 / (n - 1),
        pseudo_p=(1 + hits) / (n_perm + 1),
        z_sim=(i_obs - mean) / sd,
        n_perm=n_perm,
        n_used=n,
        kind=weights.kind,
        seed=rng.seed,
        perm_mean=mean,
        perm_sd=sd,
    )
