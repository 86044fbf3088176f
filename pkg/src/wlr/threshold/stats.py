from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import stats

from ..errors import DegenerateVariance


class TTestResult(NamedTuple):
    t: float
    df: int
    p: float


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test of ``a - b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    d = a - b
    sd = d.std(ddof=1)
    if sd == 0.0 or sd < 1e-14 * max(1.0, np.abs(d).max()):
        raise DegenerateVariance("differences have zero variance")
    df = d.size - 1
    t = d.mean() / (sd / np.sqrt(d.size))
    p = 2.0 * stats.t.sf(abs(t), df)
    return TTestResult(float(t), int(df), float(p))
