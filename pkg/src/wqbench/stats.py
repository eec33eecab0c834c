"""Hypothesis tests and effect sizes used in result annotations.

Implements the Wilcoxon signed-rank test (exact for small samples, normal
approximation with tie and continuity corrections otherwise), the
Mann-Whitney U test, the common-language effect size, Spearman/Pearson
correlations with a t-distribution p-value, and Benjamini-Hochberg FDR
adjustment.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    ContractError,
    DegenerateTestError,
    DimensionError,
    DomainError,
    MetricUndefinedError,
)

# sample size up to which the signed-rank null distribution is enumerated
EXACT_WILCOXON_LIMIT = 25

_ALTERNATIVES = ("two-sided", "greater", "less")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str


def significance_stars(p):
    """Render a p-value with the conventional star legend."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("p-value outside [0, 1]")
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


def average_ranks(values):
    """Ranks starting at 1; tied values receive their average rank."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _check_alternative(alternative):
    if alternative not in _ALTERNATIVES:
        raise ContractError(
            "alternative must be one of %s" % (_ALTERNATIVES,)
        )


def wilcoxon_signed_rank(a, b=None, alternative="two-sided"):
    """Wilcoxon signed-rank test on paired samples or precomputed diffs.

    Zero differences are dropped (Wilcoxon convention).  For
    ``n_effective <= 25`` the p-value is exact, computed from the full
    null distribution of the positive rank sum (ties handled through
    average ranks); larger samples use the normal approximation with tie
    and continuity corrections.  ``alternative="greater"`` tests whether
    the differences are shifted above zero.
    """
    _check_alternative(alternative)
    d = np.asarray(a, dtype=np.float64).reshape(-1)
    if b is not None:
        bb = np.asarray(b, dtype=np.float64).reshape(-1)
        if bb.size != d.size:
            raise DimensionError("paired samples must have equal length")
        d = d - bb
    d = d[np.isfinite(d)]
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise DegenerateTestError("all differences are zero")
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0.0].sum())
    if n <= EXACT_WILCOXON_LIMIT:
        p = _wilcoxon_exact_p(ranks, w_plus, alternative)
        method = "exact"
    else:
        p = _wilcoxon_approx_p(d, ranks, w_plus, alternative)
        method = "normal approximation"
    return TestResult(statistic=w_plus, p_value=p, n_effective=n,
                      method=method)


def _wilcoxon_exact_p(ranks, w_obs, alternative):
    # Average ranks are multiples of 1/2, so doubling them gives integers
    # and the distribution of 2*W can be tabulated by dynamic programming
    # over sign assignments; this equals full 2^n enumeration.
    doubled = np.rint(ranks * 2.0).astype(np.int64)
    total = int(doubled.sum())
    dist = np.zeros(total + 1, dtype=np.float64)
    dist[0] = 1.0
    for r in doubled:
        nxt = dist.copy()
        nxt[r:] += dist[: total + 1 - r]
        dist = nxt
    dist /= dist.sum()
    w2 = int(round(w_obs * 2.0))
    p_ge = float(dist[w2:].sum())
    p_le = float(dist[: w2 + 1].sum())
    if alternative == "greater":
        return min(1.0, p_ge)
    if alternative == "less":
        return min(1.0, p_le)
    return min(1.0, 2.0 * min(p_ge, p_le))


def _wilcoxon_approx_p(d, ranks, w_plus, alternative):
    n = d.size
    mean_w = n * (n + 1) / 4.0
    var_w = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction over groups of tied |d|
    _, counts = np.unique(np.abs(d), return_counts=True)
    var_w -= float(((counts**3 - counts) / 48.0).sum())
    if var_w <= 0.0:
        raise DegenerateTestError("zero variance in signed-rank statistic")
    sd = math.sqrt(var_w)
    if alternative == "greater":
        z = (w_plus - mean_w - 0.5) / sd
        return _norm_sf(z)
    if alternative == "less":
        z = (w_plus - mean_w + 0.5) / sd
        return _norm_cdf(z)
    z = (w_plus - mean_w - math.copysign(0.5, w_plus - mean_w)) / sd
    return min(1.0, 2.0 * _norm_sf(abs(z)))


def mann_whitney_u(a, b, alternative="two-sided"):
    """Mann-Whitney U test with tie-corrected normal approximation.

    The reported statistic is U for sample ``a``.
    """
    _check_alternative(alternative)
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    av = av[np.isfinite(av)]
    bv = bv[np.isfinite(bv)]
    if av.size == 0 or bv.size == 0:
        raise ContractError("both samples must be non-empty")
    na, nb = av.size, bv.size
    ranks = average_ranks(np.concatenate([av, bv]))
    r_a = float(ranks[:na].sum())
    u_a = r_a - na * (na + 1) / 2.0
    mean_u = na * nb / 2.0
    n = na + nb
    _, counts = np.unique(np.concatenate([av, bv]), return_counts=True)
    tie_term = float(((counts**3 - counts)).sum()) / (n * (n - 1.0))
    var_u = na * nb / 12.0 * ((n + 1.0) - tie_term)
    if var_u <= 0.0:
        raise DegenerateTestError("all pooled values identical")
    sd = math.sqrt(var_u)
    if alternative == "greater":
        z = (u_a - mean_u - 0.5) / sd
        p = _norm_sf(z)
    elif alternative == "less":
        z = (u_a - mean_u + 0.5) / sd
        p = _norm_cdf(z)
    else:
        z = (u_a - mean_u - math.copysign(0.5, u_a - mean_u)) / sd
        p = min(1.0, 2.0 * _norm_sf(abs(z)))
    return TestResult(statistic=float(u_a), p_value=p,
                      n_effective=n, method="normal approximation")


def cles(a, b):
    """Common-language effect size P(a > b) with ties split evenly.

    Computed through the rank-sum identity, which equals
    (#{a_i > b_j} + 0.5 * #{a_i = b_j}) / (n_a * n_b) exactly.
    """
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.size == 0 or bv.size == 0:
        raise ContractError("both samples must be non-empty")
    na, nb = av.size, bv.size
    ranks = average_ranks(np.concatenate([av, bv]))
    u_a = float(ranks[:na].sum()) - na * (na + 1) / 2.0
    return u_a / (na * nb)


def bh_fdr(p_values):
    """Benjamini-Hochberg step-up adjustment, order preserving.

    Returns adjusted p-values aligned with the input order: sort
    ascending, take m*p/rank, enforce monotonicity with a cumulative
    minimum from the largest rank down, cap at 1.
    """
    p = np.asarray(p_values, dtype=np.float64).reshape(-1)
    if p.size == 0:
        return np.array([])
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted_sorted = np.minimum(adjusted_sorted, 1.0)
    out = np.empty(m)
    out[order] = adjusted_sorted
    return out


def pearson(x, y):
    """Pearson correlation with a Student-t p-value (two-sided).

    p is computed from t = r*sqrt((n-2)/(1-r^2)) with n-2 degrees of
    freedom; this is the standard approximation and is the documented,
    swappable choice here.
    """
    xv, yv = _paired_finite(x, y)
    n = xv.size
    if n < 3:
        raise MetricUndefinedError("correlation needs at least 3 pairs")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise MetricUndefinedError("zero variance in correlation input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(special.stdtr(n - 2, -abs(t)))
    return r, min(1.0, p)


def spearman(x, y):
    """Spearman rank correlation: Pearson on average ranks."""
    xv, yv = _paired_finite(x, y)
    if xv.size < 3:
        raise MetricUndefinedError("correlation needs at least 3 pairs")
    return pearson(average_ranks(xv), average_ranks(yv))


def _paired_finite(x, y):
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.size != yv.size:
        raise DimensionError("x and y lengths differ")
    keep = np.isfinite(xv) & np.isfinite(yv)
    return xv[keep], yv[keep]


def _norm_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _norm_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))
