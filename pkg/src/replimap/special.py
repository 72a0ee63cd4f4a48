"""Regularised incomplete beta/gamma functions and the CDFs built on them.

Continued fractions use the modified Lentz method.  Each function returns a
(lower, upper) pair computed without cancellation so that small upper tails
(p-values) keep full relative precision.
"""
from __future__ import annotations

import math

from .errors import DomainError

_EPS = 1e-16
_TINY = 1e-300
_MAXIT = 10000


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_pair(a: float, b: float, x: float, y: float | None = None) -> tuple[float, float]:
    """``(I_x(a, b), 1 - I_x(a, b))``; pass ``y = 1 - x`` when it is known exactly."""
    if y is None:
        y = 1.0 - x
    if not (a > 0 and b > 0):
        raise DomainError(f"incomplete beta needs a, b > 0 (got {a}, {b})")
    if x <= 0.0:
        return 0.0, 1.0
    if y <= 0.0:
        return 1.0, 0.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        lower = front * _betacf(a, b, x) / a
        return lower, 1.0 - lower
    upper = front * _betacf(b, a, y) / b
    return 1.0 - upper, upper


def gammainc_pair(a: float, x: float) -> tuple[float, float]:
    """``(P(a, x), Q(a, x))`` regularised lower/upper incomplete gamma."""
    if not a > 0:
        raise DomainError(f"incomplete gamma needs a > 0 (got {a})")
    if x <= 0.0:
        return 0.0, 1.0
    log_front = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        ap, term = a, 1.0 / a
        total = term
        for _ in range(_MAXIT):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                lower = total * math.exp(log_front)
                return lower, 1.0 - lower
        raise ArithmeticError("incomplete gamma series did not converge")
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXIT + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            upper = math.exp(log_front) * h
            return 1.0 - upper, upper
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def _check_df(*dfs):
    for df in dfs:
        if not (isinstance(df, (int, float)) and math.isfinite(df) and df >= 1):
            raise DomainError(f"degrees of freedom must be finite and >= 1, got {df!r}")


def normal_cdf(z: float) -> float:
    if math.isnan(z):
        raise DomainError("normal_cdf of NaN")
    if math.isinf(z):
        return 1.0 if z > 0 else 0.0
    lower, upper = gammainc_pair(0.5, 0.5 * z * z)
    return 0.5 * upper if z < 0 else 0.5 + 0.5 * lower


def normal_sf(z: float) -> float:
    return normal_cdf(-z)


def _t_tails(t: float, df: float) -> tuple[float, float]:
    """(P(|T| >= |t|), P(|T| < |t|)) for Student's t."""
    t2 = t * t
    return betainc_pair(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


def t_cdf(t: float, df: float) -> float:
    _check_df(df)
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    two_tail, _ = _t_tails(t, df)
    return 1.0 - 0.5 * two_tail if t > 0 else 0.5 * two_tail


def t_sf(t: float, df: float) -> float:
    return t_cdf(-t, df)


def t_two_sided_p(t: float, df: float) -> float:
    _check_df(df)
    if math.isinf(t):
        return 0.0
    return _t_tails(t, df)[0]


def f_cdf(f: float, df1: float, df2: float) -> float:
    return _f_pair(f, df1, df2)[0]


def f_sf(f: float, df1: float, df2: float) -> float:
    return _f_pair(f, df1, df2)[1]


def _f_pair(f: float, df1: float, df2: float) -> tuple[float, float]:
    _check_df(df1, df2)
    if math.isnan(f) or f < 0:
        raise DomainError(f"F statistic must be >= 0, got {f}")
    if math.isinf(f):
        return 1.0, 0.0
    denom = df1 * f + df2
    return betainc_pair(df1 / 2.0, df2 / 2.0, df1 * f / denom, df2 / denom)
