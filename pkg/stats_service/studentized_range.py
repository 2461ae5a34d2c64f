"""
Critical values of the studentized range distribution q(alpha; k, df).

Values for alpha in {0.05, 0.01}, k = 2..10 and df >= 10 come from the
standard published table and are interpolated linearly in 1/df (df = inf
corresponds to 1/df = 0). Anything outside the table falls back to
scipy.stats.studentized_range.
"""

from __future__ import annotations

import math
from typing import Dict, Tuple

import numpy as np
from scipy import stats

from utils.errors import DomainError

TABLE_DFS: Tuple[float, ...] = (10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 24, 30, 40, 60, 120, math.inf)
TABLE_KS: Tuple[int, ...] = tuple(range(2, 11))

# rows follow TABLE_DFS, columns k = 2..10
_Q_TABLE: Dict[float, Tuple[Tuple[float, ...], ...]] = {
    0.05: (
        (3.15, 3.88, 4.33, 4.65, 4.91, 5.12, 5.30, 5.46, 5.60),
        (3.11, 3.82, 4.26, 4.57, 4.82, 5.03, 5.20, 5.35, 5.49),
        (3.08, 3.77, 4.20, 4.51, 4.75, 4.95, 5.12, 5.27, 5.39),
        (3.06, 3.73, 4.15, 4.45, 4.69, 4.88, 5.05, 5.19, 5.32),
        (3.03, 3.70, 4.11, 4.41, 4.64, 4.83, 4.99, 5.13, 5.25),
        (3.01, 3.67, 4.08, 4.37, 4.59, 4.78, 4.94, 5.08, 5.20),
        (3.00, 3.65, 4.05, 4.33, 4.56, 4.74, 4.90, 5.03, 5.15),
        (2.98, 3.63, 4.02, 4.30, 4.52, 4.70, 4.86, 4.99, 5.11),
        (2.97, 3.61, 4.00, 4.28, 4.49, 4.67, 4.82, 4.96, 5.07),
        (2.96, 3.59, 3.98, 4.25, 4.47, 4.65, 4.79, 4.92, 5.04),
        (2.95, 3.58, 3.96, 4.23, 4.45, 4.62, 4.77, 4.90, 5.01),
        (2.92, 3.53, 3.90, 4.17, 4.37, 4.54, 4.68, 4.81, 4.92),
        (2.89, 3.49, 3.85, 4.10, 4.30, 4.46, 4.60, 4.72, 4.82),
        (2.86, 3.44, 3.79, 4.04, 4.23, 4.39, 4.52, 4.63, 4.73),
        (2.83, 3.40, 3.74, 3.98, 4.16, 4.31, 4.44, 4.55, 4.65),
        (2.80, 3.36, 3.68, 3.92, 4.10, 4.24, 4.36, 4.47, 4.56),
        (2.77, 3.31, 3.63, 3.86, 4.03, 4.17, 4.29, 4.39, 4.47),
    ),
    0.01: (
        (4.48, 5.27, 5.77, 6.14, 6.43, 6.67, 6.87, 7.05, 7.21),
        (4.39, 5.15, 5.62, 5.97, 6.25, 6.48, 6.67, 6.84, 6.99),
        (4.32, 5.05, 5.50, 5.84, 6.10, 6.32, 6.51, 6.67, 6.81),
        (4.26, 4.96, 5.40, 5.73, 5.98, 6.19, 6.37, 6.53, 6.67),
        (4.21, 4.89, 5.32, 5.63, 5.88, 6.08, 6.26, 6.41, 6.54),
        (4.17, 4.84, 5.25, 5.56, 5.80, 5.99, 6.16, 6.31, 6.44),
        (4.13, 4.79, 5.19, 5.49, 5.72, 5.92, 6.08, 6.22, 6.35),
        (4.10, 4.74, 5.14, 5.43, 5.66, 5.85, 6.01, 6.15, 6.27),
        (4.07, 4.70, 5.09, 5.38, 5.60, 5.79, 5.94, 6.08, 6.20),
        (4.05, 4.67, 5.05, 5.33, 5.55, 5.73, 5.89, 6.02, 6.14),
        (4.02, 4.64, 5.02, 5.29, 5.51, 5.69, 5.84, 5.97, 6.09),
        (3.96, 4.55, 4.91, 5.17, 5.37, 5.54, 5.69, 5.81, 5.92),
        (3.89, 4.45, 4.80, 5.05, 5.24, 5.40, 5.54, 5.65, 5.76),
        (3.82, 4.37, 4.70, 4.93, 5.11, 5.26, 5.39, 5.50, 5.60),
        (3.76, 4.28, 4.59, 4.82, 4.99, 5.13, 5.25, 5.36, 5.45),
        (3.70, 4.20, 4.50, 4.71, 4.87, 5.01, 5.12, 5.21, 5.30),
        (3.64, 4.12, 4.40, 4.60, 4.76, 4.88, 4.99, 5.08, 5.16),
    ),
}

# interpolation abscissa: 1/df, increasing
_INV_DF = np.array([0.0 if math.isinf(d) else 1.0 / d for d in TABLE_DFS])[::-1]


def _table_alpha(alpha: float):
    for key in _Q_TABLE:
        if math.isclose(alpha, key, rel_tol=0.0, abs_tol=1e-12):
            return key
    return None


def in_table(alpha: float, k: int, df: float) -> bool:
    return _table_alpha(alpha) is not None and k in TABLE_KS and df >= TABLE_DFS[0]


def table_critical_value(alpha: float, k: int, df: float) -> float:
    key = _table_alpha(alpha)
    if key is None or k not in TABLE_KS or df < TABLE_DFS[0]:
        raise DomainError(f"[STATS] No tabulated q for alpha={alpha}, k={k}, df={df}.")
    column = np.array([row[k - 2] for row in _Q_TABLE[key]])[::-1]
    x = 0.0 if math.isinf(df) else 1.0 / df
    return float(np.interp(x, _INV_DF, column))


def critical_value(alpha: float, k: int, df: float) -> float:
    """Upper-alpha critical value of the studentized range for k groups and df error dof."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"[STATS] alpha must lie in (0, 1), got {alpha}.")
    if k < 2 or df < 1:
        raise DomainError(f"[STATS] Studentized range needs k >= 2 and df >= 1, got k={k}, df={df}.")
    if in_table(alpha, k, df):
        return table_critical_value(alpha, k, df)
    return float(stats.studentized_range.ppf(1.0 - alpha, k, df))


def upper_tail(q: float, k: int, df: float) -> float:
    """P(Q > q) for the studentized range with k groups and df error dof."""
    if q <= 0:
        return 1.0
    if math.isinf(q):
        return 0.0
    return float(min(1.0, max(0.0, stats.studentized_range.sf(q, k, df))))
