"""Welch's one-tailed t-test with a self-contained t CDF.

The CDF goes through the regularized incomplete beta function evaluated by
the standard continued-fraction expansion, so the test has no dependency on
a stats library and the test suite can check it against direct numerical
integration of the t density.
"""
from __future__ import annotations

import math

import numpy as np

_MAX_CF_ITER = 300
_CF_EPS = 3e-15


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's algorithm)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log(1.0 - x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    x = df / (df + t * t)
    tail = 0.5 * _betainc_reg(0.5 * df, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def welch_statistic(a, b) -> tuple[float, float]:
    """Welch's t statistic for mean(a) - mean(b) and its degrees of freedom."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    va = np.var(a, ddof=1) / na
    vb = np.var(b, ddof=1) / nb
    pooled = va + vb
    t = (np.mean(a) - np.mean(b)) / math.sqrt(pooled)
    df = pooled**2 / (va**2 / (na - 1) + vb**2 / (nb - 1))
    return float(t), float(df)


def t_test_one_tailed(a, b, direction: str = "a<b") -> float:
    """One-tailed Welch p-value for the alternative mean(a) < mean(b) or >.

    Degenerate samples (zero variance on both sides) give p = 0.5 for equal
    means and 0 or 1 depending on the direction otherwise.
    """
    if direction not in ("a<b", "a>b"):
        raise ValueError("direction must be 'a<b' or 'a>b'")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least 2 samples per group")
    if np.var(a, ddof=1) == 0.0 and np.var(b, ddof=1) == 0.0:
        diff = float(np.mean(a) - np.mean(b))
        if diff == 0.0:
            return 0.5
        observed_matches = diff < 0 if direction == "a<b" else diff > 0
        return 0.0 if observed_matches else 1.0
    t, df = welch_statistic(a, b)
    # Small p supports the alternative: under "a<b" that is a very negative t.
    return t_cdf(t, df) if direction == "a<b" else 1.0 - t_cdf(t, df)


def confidence_half_width(samples, level: float = 0.95) -> float:
    """Half-width of the t-based confidence interval for the mean."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        return 0.0
    s = float(np.std(x, ddof=1))
    if s == 0.0:
        return 0.0
    # Invert the t CDF by bisection; good to ~1e-10, plenty for reporting.
    target = 0.5 + level / 2.0
    lo, hi = 0.0, 1e3
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, n - 1) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * s / math.sqrt(n)
