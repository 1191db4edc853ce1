"""Paired TOST equivalence testing with Bonferroni correction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc


@dataclass(frozen=True)
class EquivalenceResult:
    mean_diff: float
    p_lower: float
    p_upper: float
    p_tost: float
    equivalent: bool
    n: int
    epsilon_L: float
    alpha: float


def t_cdf(t: float, df: float) -> float:
    """Student-t CDF through the regularized incomplete beta function.

    ``P(|T| > |t|) = I_x(df/2, 1/2)`` with ``x = df / (df + t^2)``.
    """
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    return t_cdf(-t, df)


def paired_tost(x: Sequence[float], y: Sequence[float], epsilon_L: float = 0.05,
                alpha: float = 0.05) -> EquivalenceResult:
    """Two one-sided paired t tests of ``|mean(x - y)| < epsilon_L``.

    The lower test rejects ``mean <= -epsilon_L``, the upper one
    ``mean >= +epsilon_L``; the pair is equivalent when the larger p-value
    is below ``alpha``. Zero-variance differences are decided by
    ``|mean| < epsilon_L`` alone (p = 0 if so, p = 1 otherwise).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"paired samples must be aligned vectors, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 2:
        raise ValueError("paired TOST needs at least 2 pairs")
    if epsilon_L <= 0:
        raise ValueError("epsilon_L must be positive")
    d = x - y
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if abs(mean) < epsilon_L:
            p_lower = p_upper = 0.0
        else:
            p_lower = 1.0 if mean <= -epsilon_L else 0.0
            p_upper = 1.0 if mean >= epsilon_L else 0.0
    else:
        se = sd / math.sqrt(n)
        p_lower = t_sf((mean + epsilon_L) / se, n - 1)
        p_upper = t_cdf((mean - epsilon_L) / se, n - 1)
    p_tost = max(p_lower, p_upper)
    return EquivalenceResult(mean, p_lower, p_upper, p_tost, p_tost < alpha, n, epsilon_L, alpha)


def bonferroni(p_values: Sequence[float], m: int) -> list[float]:
    """Multiply by the declared family size ``m`` and clip at 1."""
    p_values = list(p_values)
    if not p_values:
        raise ValueError("no p-values to correct")
    if m < len(p_values):
        raise ValueError(f"family size {m} is smaller than the {len(p_values)} p-values given")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    return [min(1.0, p * m) for p in p_values]
