"""Paired non-parametric testing: Wilcoxon signed-rank with Bonferroni correction."""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgumentError, UndefinedTestError

EXACT_MAX_N = 25
MIN_N = 5


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    pvalue: float
    n: int
    method: str  # "exact" or "normal"


def _signed_ranks(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgumentError("paired samples must be 1D arrays of equal length")
    d = x - y
    d = d[d != 0]
    if d.size == 0:
        raise UndefinedTestError("all paired differences are zero")
    return d, rankdata(np.abs(d))


def exact_null_counts(doubled_ranks):
    """Number of sign assignments giving each value of the (doubled) positive rank sum.

    Ranks are doubled so midranks become integers; counts are exact Python ints.
    """
    total = int(sum(doubled_ranks))
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    return counts


def wilcoxon_signed_rank(x, y, exact_max_n=EXACT_MAX_N):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes get midranks. The
    statistic is the smaller of the positive and negative rank sums. For at
    most ``exact_max_n`` nonzero differences the p-value is exact (full
    null distribution over sign flips); otherwise a normal approximation with
    tie and continuity corrections is used.
    """
    d, ranks = _signed_ranks(x, y)
    n = d.size
    if n < MIN_N:
        raise UndefinedTestError(f"need at least {MIN_N} nonzero differences, got {n}")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_max_n:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = exact_null_counts(doubled)
        k = int(round(2 * w))
        tail = sum(counts[: k + 1])
        p = min(1.0, 2 * tail / 2 ** n)
        return WilcoxonResult(w, p, n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts ** 3 - tie_counts).sum()) / 48.0
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(var)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return WilcoxonResult(w, p, n, "normal")


def bonferroni(p_values):
    """Multiply each p-value by the number of tests, capped at 1."""
    p = list(p_values)
    m = len(p)
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise InvalidArgumentError(f"p-value {v} outside [0, 1]")
    return [min(1.0, v * m) for v in p]


PAIRWISE_COLUMNS = ("group_a", "group_b", "n", "statistic", "p_value", "p_bonferroni", "reason")


def pairwise_wilcoxon(table):
    """All pairwise tests between groups of a ``{group: {pair_id: value}}`` table.

    Values are paired on the pair ids both groups share. Undefined tests keep
    a ``reason`` and count toward the Bonferroni family, with empty p-values.
    """
    rows = []
    for a, b in itertools.combinations(sorted(table), 2):
        common = sorted(set(table[a]) & set(table[b]))
        row = {"group_a": a, "group_b": b, "n": len(common), "statistic": None,
               "p_value": None, "p_bonferroni": None, "reason": None}
        try:
            res = wilcoxon_signed_rank([table[a][k] for k in common], [table[b][k] for k in common])
            row.update(statistic=res.statistic, p_value=res.pvalue)
        except (UndefinedTestError, InvalidArgumentError) as exc:
            row["reason"] = str(exc)
        rows.append(row)
    m = len(rows)
    for r in rows:
        if r["p_value"] is not None:
            r["p_bonferroni"] = min(1.0, r["p_value"] * m)
    return rows
