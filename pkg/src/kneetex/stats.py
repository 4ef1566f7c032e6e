"""Univariate screening: two-sample t-tests and a moment-based normality test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InsufficientDataError, KneeTexError, SingleClassError

CF_RTOL = 1e-12
CF_MAX_ITER = 10000
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAX_ITER + 1):
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
        if abs(delta - 1.0) < CF_RTOL:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc(0.5 * df, 0.5, x)))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf_two_sided(t, df)
    return 1.0 - tail if t > 0 else tail


@dataclass(frozen=True)
class TTestResult:
    feature_name: str
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    group_means: Tuple[float, float]
    group_sizes: Tuple[int, int]


def welch_t_test(a, b, equal_var: bool = False, feature_name: str = "") -> TTestResult:
    """Two-sided two-sample t-test, Welch's unequal-variance form by default.

    Two zero-variance samples with equal means give ``t = 0, p = 1``; with
    different means ``t = +-inf, p = 0``.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise InsufficientDataError(f"t-test needs at least 2 values per group, got {na} and {nb}")
    ma, mb = float(a.mean()), float(b.mean())
    va, vb = float(a.var(ddof=1)), float(b.var(ddof=1))
    diff = ma - mb
    if equal_var:
        df = float(na + nb - 2)
        pooled = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = pooled * (1.0 / na + 1.0 / nb)
    else:
        qa, qb = va / na, vb / nb
        se2 = qa + qb
        denom = qa * qa / (na - 1) + qb * qb / (nb - 1)
        df = se2 * se2 / denom if denom > 0 else float(na + nb - 2)
    if se2 == 0.0:
        if diff == 0.0:
            t, p = 0.0, 1.0
        else:
            t, p = math.copysign(math.inf, diff), 0.0
    else:
        t = diff / math.sqrt(se2)
        p = t_sf_two_sided(t, df)
    return TTestResult(feature_name, t, df, p, (ma, mb), (na, nb))


def normality_check(sample) -> Tuple[float, float]:
    """D'Agostino-Pearson omnibus K^2 statistic and its chi-square(2) p-value."""
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if n < 8:
        raise InsufficientDataError(f"normality test needs at least 8 values, got {n}")
    d = x - x.mean()
    m2 = np.mean(d ** 2)
    if m2 == 0:
        raise KneeTexError("normality test on a constant sample")
    b1 = np.mean(d ** 3) / m2 ** 1.5
    b2 = np.mean(d ** 4) / m2 ** 2

    # skewness (D'Agostino 1970)
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = (3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3)
             / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9)))
    w2 = -1 + math.sqrt(2 * (beta2 - 1))
    delta = 1 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1))
    y = y if y != 0 else 1.0
    z_skew = delta * math.log(y / alpha + math.sqrt((y / alpha) ** 2 + 1))

    # kurtosis (Anscombe & Glynn 1983)
    e = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    xk = (b2 - e) / math.sqrt(var_b2)
    sqrt_beta1 = (6.0 * (n * n - 5 * n + 2) / ((n + 7) * (n + 9))
                  * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2) * (n - 3))))
    a_k = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1 + 4.0 / sqrt_beta1 ** 2))
    term1 = 1 - 2 / (9.0 * a_k)
    denom = 1 + xk * math.sqrt(2 / (a_k - 4.0))
    term2 = math.copysign(((1 - 2.0 / a_k) / abs(denom)) ** (1 / 3.0), denom) if denom != 0 \
        else -math.inf
    z_kurt = (term1 - term2) / math.sqrt(2 / (9.0 * a_k))

    k2 = z_skew ** 2 + z_kurt ** 2
    return float(k2), float(math.exp(-0.5 * k2))


@dataclass(frozen=True)
class ScreenRow:
    test: TTestResult
    normality_p: float

    @property
    def normal(self) -> bool:
        return self.normality_p >= 0.05


def screen_features(matrix, equal_var: bool = False) -> List[ScreenRow]:
    """t-test case vs control for every feature column, in column order.

    ``normality_p`` is the smaller of the per-class normality p-values.
    """
    X = np.asarray(matrix.X, dtype=float)
    y = np.asarray(matrix.labels)
    case, control = y == 1, y == 0
    if not case.any() or not control.any():
        raise SingleClassError("screening needs both cases and controls")
    rows = []
    for j, name in enumerate(matrix.feature_names):
        res = welch_t_test(X[case, j], X[control, j], equal_var=equal_var, feature_name=name)
        ps = []
        for group in (X[case, j], X[control, j]):
            try:
                ps.append(normality_check(group)[1])
            except KneeTexError:
                ps.append(float("nan"))
        rows.append(ScreenRow(res, float(np.nanmin(ps)) if not np.all(np.isnan(ps)) else float("nan")))
    return rows


def _fmt_p(p: float) -> str:
    return "<0.01" if p < 0.01 else f"{p:.2f}"


def table_grid(rows: Sequence[ScreenRow]) -> str:
    """Two-row text table (H, E) by ROI with p-values truncated like ``<0.01``."""
    by_name = {r.test.feature_name: r.test.p_value for r in rows}
    rois = []
    for name in by_name:
        roi = name.split("_", 1)[1]
        if roi not in rois:
            rois.append(roi)
    lines = ["    | " + " ".join(f"{r:>6}" for r in rois)]
    lines.append("-" * len(lines[0]))
    for desc in ("H", "E"):
        cells = [_fmt_p(by_name[f"{desc}_{r}"]) if f"{desc}_{r}" in by_name else "-" for r in rois]
        lines.append(f"{desc:>3} | " + " ".join(f"{c:>6}" for c in cells))
    return "\n".join(lines)
