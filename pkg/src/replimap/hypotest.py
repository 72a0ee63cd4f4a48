"""Paired t-test, Levene's test and Pearson correlation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import (InsufficientDataError, LengthMismatchError, ZeroDeviationError,
                     ZeroVarianceError)
from .special import betainc_pair, f_sf, normal_cdf, t_cdf, t_two_sided_p, f_cdf  # noqa: F401


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_two_sided: float
    mean_diff: float
    sd_diff: float
    n: int

    def report(self) -> dict:
        return {"test": "paired_t", "n": self.n, "t": self.t, "df": self.df, "p": self.p_two_sided,
                "mean_diff": self.mean_diff, "sd_diff": self.sd_diff}


@dataclass(frozen=True)
class LeveneResult:
    w: float
    df1: int
    df2: int
    p: float

    def report(self) -> dict:
        return {"test": "levene", **asdict(self)}


@dataclass(frozen=True)
class PearsonResult:
    r: float
    t: float
    df: int
    p_two_sided: float
    n: int

    def report(self) -> dict:
        t = self.t if math.isfinite(self.t) else None
        return {"test": "pearson", "n": self.n, "r": self.r, "t": t, "df": self.df, "p": self.p_two_sided}


def _floats(xs, what) -> list[float]:
    out = [float(v) for v in xs]
    if any(not math.isfinite(v) for v in out):
        raise InsufficientDataError(f"{what} contains non-finite values")
    return out


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def _scaled_norm(xs: Sequence[float]) -> float:
    """sqrt(sum x^2) without underflow for tiny x."""
    s = max(abs(v) for v in xs)
    if s == 0:
        return 0.0
    return s * math.sqrt(math.fsum((v / s) ** 2 for v in xs))


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on the differences ``b - a``."""
    a, b = _floats(a, "a"), _floats(b, "b")
    if len(a) != len(b):
        raise LengthMismatchError(f"series lengths differ ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise InsufficientDataError(f"paired t-test needs at least 2 pairs, got {n}")
    d = [y - x for x, y in zip(a, b)]
    if max(d) == min(d):
        if d[0] == 0:
            raise ZeroVarianceError("all replicates identical")
        raise ZeroVarianceError("differences are constant")
    mean = _mean(d)
    sd = _scaled_norm([v - mean for v in d]) / math.sqrt(n - 1)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, t_two_sided_p(t, n - 1), mean, sd, n)


def levene_test(groups: Sequence[Sequence[float]], center: str = "mean") -> LeveneResult:
    """Levene's test for equal variances on absolute deviations from group centers.

    ``center="mean"`` is the original statistic; ``"median"`` gives the
    Brown-Forsythe variant.
    """
    groups = [_floats(g, f"group {i}") for i, g in enumerate(groups)]
    k = len(groups)
    if k < 2:
        raise InsufficientDataError(f"Levene's test needs at least 2 groups, got {k}")
    for i, g in enumerate(groups):
        if len(g) < 2:
            raise InsufficientDataError(f"group {i} has {len(g)} value(s); need at least 2")
    if center == "mean":
        centers = [_mean(g) for g in groups]
    elif center == "median":
        centers = [_median(g) for g in groups]
    else:
        raise ValueError(f"center must be 'mean' or 'median', got {center!r}")
    zs = [[abs(v - c) for v in g] for g, c in zip(groups, centers)]
    n_total = sum(len(z) for z in zs)
    zbar_i = [_mean(z) for z in zs]
    zbar = math.fsum(v for z in zs for v in z) / n_total

    within_constant = all(max(z) == min(z) for z in zs)
    if within_constant:
        # 0/0 unless every group shares one deviation magnitude
        all_zero = all(v == 0 for z in zs for v in z)
        same_spread = max(z[0] for z in zs) == min(z[0] for z in zs)
        if all_zero or not same_spread:
            raise ZeroDeviationError("absolute deviations are constant within every group")
        return LeveneResult(0.0, k - 1, n_total - k, 1.0)

    # W is scale free; rescale so tiny deviations do not underflow
    m = max(max(z) for z in zs)
    zs = [[v / m for v in z] for z in zs]
    zbar_i = [zb / m for zb in zbar_i]
    zbar /= m
    between = math.fsum(len(z) * (zb - zbar) ** 2 for z, zb in zip(zs, zbar_i))
    within = math.fsum((v - zb) ** 2 for z, zb in zip(zs, zbar_i) for v in z)
    w = (n_total - k) / (k - 1) * between / within
    return LeveneResult(w, k - 1, n_total - k, f_sf(w, k - 1, n_total - k))


def _median(xs):
    s = sorted(xs)
    m = len(s) // 2
    return s[m] if len(s) % 2 else (s[m - 1] + s[m]) / 2.0


def pearson(x, y) -> PearsonResult:
    x, y = _floats(x, "x"), _floats(y, "y")
    if len(x) != len(y):
        raise LengthMismatchError(f"series lengths differ ({len(x)} vs {len(y)})")
    n = len(x)
    if n < 3:
        raise InsufficientDataError(f"Pearson correlation needs at least 3 pairs, got {n}")
    if max(x) == min(x) or max(y) == min(y):
        raise ZeroVarianceError("constant input series")
    mx, my = _mean(x), _mean(y)
    zx = [v - mx for v in x]
    zy = [v - my for v in y]
    # r is scale free; rescale so tiny spreads do not underflow
    sx, sy = max(map(abs, zx)), max(map(abs, zy))
    zx = [v / sx for v in zx]
    zy = [v / sy for v in zy]
    sxy = math.fsum(a * b for a, b in zip(zx, zy))
    sxx = math.fsum(a * a for a in zx)
    syy = math.fsum(b * b for b in zy)
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    df = n - 2
    if abs(r) == 1.0:
        return PearsonResult(r, math.copysign(math.inf, r), df, 0.0, n)
    t = r * math.sqrt(df / (1.0 - r * r))
    # two-sided p = I_{1-r^2}(df/2, 1/2)
    p = betainc_pair(df / 2.0, 0.5, 1.0 - r * r, r * r)[0]
    return PearsonResult(r, t, df, p, n)
