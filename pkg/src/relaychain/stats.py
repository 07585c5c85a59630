"""Welch's unequal-variance t-test and small descriptive helpers.

The Student-t tail probability comes from the regularized incomplete beta
function, evaluated with the modified Lentz continued fraction.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass
from typing import Sequence

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
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
    raise ArithmeticError(f"incomplete beta failed to converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """Upper tail P(T > t) of Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t > 0 else 1.0 - tail


@dataclass(frozen=True)
class WelchResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float
    mean_x: float
    mean_y: float
    n_x: int
    n_y: int
    alternative: str = "two-sided"
    degenerate: bool = False  # both samples had zero variance

    def to_dict(self) -> dict:
        return asdict(self)


def welch_t_test(xs: Sequence[float], ys: Sequence[float], alternative: str = "two-sided") -> WelchResult:
    """Two-sample t-test without assuming equal variances.

    ``alternative`` is ``"two-sided"``, ``"less"`` (mean of xs below ys) or
    ``"greater"``. When both samples have zero variance the statistic is 0
    (p = 1) for equal means and +-inf (p = 0) otherwise; the result is flagged
    ``degenerate``.
    """
    if alternative not in ("two-sided", "less", "greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    n, m = len(xs), len(ys)
    if n < 2 or m < 2:
        raise ValueError("each sample needs at least two observations")
    mx, my = statistics.fmean(xs), statistics.fmean(ys)
    vx, vy = statistics.variance(xs, mx), statistics.variance(ys, my)
    sx, sy = vx / n, vy / m
    se2 = sx + sy
    if se2 == 0.0:
        diff = mx - my
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        df = float(n + m - 2)
        degenerate = True
    else:
        t = (mx - my) / math.sqrt(se2)
        # Welch-Satterthwaite on variance shares; squaring se2 itself can underflow
        wx, wy = sx / se2, sy / se2
        df = 1.0 / (wx * wx / (n - 1) + wy * wy / (m - 1))
        degenerate = False
    if t == 0.0:
        p = 1.0 if alternative == "two-sided" else 0.5
    elif alternative == "two-sided":
        p = min(1.0, 2.0 * t_sf(abs(t), df))
    elif alternative == "greater":
        p = t_sf(t, df)
    else:
        p = t_sf(-t, df)
    return WelchResult(t, df, p, mx, my, n, m, alternative, degenerate)


def describe(values: Sequence[float]) -> dict[str, float]:
    """Min, quartiles (linear interpolation between order statistics), mean, max."""
    if not values:
        raise ValueError("describe() needs at least one value")
    data = sorted(values)
    if len(data) == 1:
        q1 = med = q3 = float(data[0])
    else:
        q1, med, q3 = statistics.quantiles(data, n=4, method="inclusive")
    return {
        "min": float(data[0]),
        "q1": float(q1),
        "median": float(med),
        "mean": statistics.fmean(data),
        "q3": float(q3),
        "max": float(data[-1]),
    }
