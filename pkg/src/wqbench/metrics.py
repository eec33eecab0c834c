"""Evaluation metrics for observed/predicted series and basin behaviour.

All metrics operate on plain numpy arrays.  Pairs where either series is
non-finite are removed before any statistic is computed, so masked
observations can be passed through as NaN.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    InsufficientDataError,
    MetricUndefinedError,
)

SEASONAL_PERIOD_DAYS = 365.25


@dataclass(frozen=True)
class KgeBreakdown:
    """Kling-Gupta efficiency with its three components."""

    kge: float
    r: float
    beta: float
    gamma: float
    n: int


@dataclass(frozen=True)
class SimplicityScore:
    simplicity: float
    linearity: float
    n: int


@dataclass(frozen=True)
class LowessFit:
    fitted: np.ndarray
    residuals: np.ndarray
    endpoint_slope: float


def _paired(observed, predicted):
    o = np.asarray(observed, dtype=np.float64).reshape(-1)
    p = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if o.size != p.size:
        raise DimensionError(
            "observed and predicted lengths differ (%d vs %d)"
            % (o.size, p.size)
        )
    keep = np.isfinite(o) & np.isfinite(p)
    return o[keep], p[keep]


def kge(observed, predicted):
    """Kling-Gupta efficiency on the original value scale.

    Parameters
    ----------
    observed : array_like
        Observed values; non-finite entries drop the pair.
    predicted : array_like
        Predicted values, same length as ``observed``.

    Returns
    -------
    KgeBreakdown
        KGE together with the correlation ``r``, the mean ratio ``beta``
        and the variability ratio ``gamma``.

    Notes
    -----
    KGE = 1 - sqrt((r-1)^2 + (beta-1)^2 + (gamma-1)^2) with
    beta = mean(P)/mean(O) and gamma = std(P)/std(O) (population
    standard deviations).  A constant prediction has zero variance; the
    correlation is undefined there and is taken to be 0 by convention,
    so predicting the observed mean scores 1 - sqrt(2).
    """
    o, p = _paired(observed, predicted)
    n = o.size
    if n < 2:
        raise InsufficientDataError(
            "KGE needs at least 2 paired values, got %d" % n
        )
    mean_o = o.mean()
    mean_p = p.mean()
    if mean_o == 0.0:
        raise MetricUndefinedError("KGE undefined: observed mean is zero")
    do = o - mean_o
    dp = p - mean_p
    sxx = float(do @ do)
    syy = float(dp @ dp)
    if sxx == 0.0:
        raise MetricUndefinedError(
            "KGE undefined: observed values are constant"
        )
    if syy == 0.0:
        # constant prediction: correlation undefined, set to 0
        r = 0.0
        gamma = 0.0
    else:
        r = float(do @ dp) / np.sqrt(sxx * syy)
        gamma = np.sqrt(syy) / np.sqrt(sxx)
    beta = mean_p / mean_o
    value = 1.0 - np.sqrt(
        (r - 1.0) ** 2 + (beta - 1.0) ** 2 + (gamma - 1.0) ** 2
    )
    return KgeBreakdown(
        kge=float(value), r=float(r), beta=float(beta), gamma=float(gamma),
        n=int(n),
    )


def pbias(observed, predicted):
    """Percent bias, 100 * sum(O - P) / sum(O).

    Negative values indicate overestimation.
    """
    o, p = _paired(observed, predicted)
    if o.size < 1:
        raise InsufficientDataError("PBIAS needs at least one pair")
    denom = float(o.sum())
    if denom == 0.0:
        raise MetricUndefinedError("PBIAS undefined: observed sum is zero")
    return 100.0 * float((o - p).sum()) / denom


def percent_change(base, new):
    """Percent change of ``new`` relative to ``base`` (sign-preserving)."""
    if base == 0.0:
        raise MetricUndefinedError("percent change undefined for base 0")
    return 100.0 * (new - base) / abs(base)


def simplicity(runoff, concentration, t_days, min_obs=10):
    """Fraction of concentration variance explained by runoff + season.

    Parameters
    ----------
    runoff : array_like
        Runoff series on the same (normalized) scale used for modelling.
    concentration : array_like
        Concentration series, NaN where unobserved.
    t_days : array_like
        Time axis in days; the seasonal harmonics use a period of
        365.25 days.
    min_obs : int
        Minimum number of paired observations.

    Returns
    -------
    SimplicityScore
        ``simplicity`` is the R^2 of an ordinary least squares fit on
        [runoff, sin, cos, intercept]; ``linearity`` drops the harmonics.
        Both are clipped to [0, 1].
    """
    q = np.asarray(runoff, dtype=np.float64).reshape(-1)
    y = np.asarray(concentration, dtype=np.float64).reshape(-1)
    t = np.asarray(t_days, dtype=np.float64).reshape(-1)
    if not (q.size == y.size == t.size):
        raise DimensionError("runoff, concentration and time lengths differ")
    keep = np.isfinite(q) & np.isfinite(y)
    q, y, t = q[keep], y[keep], t[keep]
    n = q.size
    if n < min_obs:
        raise InsufficientDataError(
            "simplicity needs >= %d paired observations, got %d"
            % (min_obs, n)
        )
    phase = 2.0 * np.pi * t / SEASONAL_PERIOD_DAYS
    design = np.column_stack([q, np.sin(phase), np.cos(phase), np.ones(n)])
    return SimplicityScore(
        simplicity=_r_squared(design, y),
        linearity=_r_squared(design[:, [0, 3]], y),
        n=int(n),
    )


def _r_squared(design, y):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise MetricUndefinedError("simplicity design matrix is rank deficient")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise MetricUndefinedError("concentration series is constant")
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return float(min(1.0, max(0.0, r2)))


def theil_sen(x, y):
    """Theil-Sen slope: the median of all pairwise slopes.

    Pairs with identical x are skipped.  Robust up to ~29% arbitrary
    corruption of the responses.
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.size != yv.size:
        raise DimensionError("x and y lengths differ")
    keep = np.isfinite(xv) & np.isfinite(yv)
    xv, yv = xv[keep], yv[keep]
    if xv.size < 2:
        raise InsufficientDataError("Theil-Sen needs at least 2 points")
    dx = xv[:, None] - xv[None, :]
    dy = yv[:, None] - yv[None, :]
    iu = np.triu_indices(xv.size, k=1)
    dx, dy = dx[iu], dy[iu]
    ok = dx != 0.0
    if not np.any(ok):
        raise MetricUndefinedError("Theil-Sen undefined: all x identical")
    return float(np.median(dy[ok] / dx[ok]))


def lowess(x, y, frac=2.0 / 3.0):
    """Locally weighted linear regression with tricube weights.

    Parameters
    ----------
    x, y : array_like
        Scatter to smooth.
    frac : float
        Fraction of points used in each local fit; each fit uses the
        ``floor(frac * n)`` nearest neighbours.  No robustifying
        iterations are applied.

    Returns
    -------
    LowessFit
        Fitted values aligned with the input order, residuals
        (observed - fitted) and the local slope at max(x).
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.size != yv.size:
        raise DimensionError("x and y lengths differ")
    n = xv.size
    if n < 5:
        raise InsufficientDataError("LOWESS needs at least 5 points")
    if not 0.0 < frac <= 1.0:
        raise ConfigurationError("frac must lie in (0, 1]")
    k = int(np.floor(frac * n))
    if k < 2:
        raise ConfigurationError(
            "frac * n = %d is too small for a local linear fit" % k
        )
    fitted = np.empty(n)
    slopes = np.empty(n)
    for i in range(n):
        d = np.abs(xv - xv[i])
        neighbours = np.argsort(d, kind="stable")[:k]
        dmax = d[neighbours].max()
        if dmax == 0.0:
            fitted[i] = yv[neighbours].mean()
            slopes[i] = 0.0
            continue
        u = d[neighbours] / dmax
        w = (1.0 - u**3) ** 3
        xs, ys = xv[neighbours], yv[neighbours]
        sw = w.sum()
        swx = float(w @ xs)
        swy = float(w @ ys)
        swxx = float(w @ (xs * xs))
        swxy = float(w @ (xs * ys))
        det = sw * swxx - swx * swx
        if det <= 0.0 or not np.isfinite(det):
            fitted[i] = swy / sw
            slopes[i] = 0.0
            continue
        b = (sw * swxy - swx * swy) / det
        a = (swy - b * swx) / sw
        fitted[i] = a + b * xv[i]
        slopes[i] = b
    return LowessFit(
        fitted=fitted,
        residuals=yv - fitted,
        endpoint_slope=float(slopes[int(np.argmax(xv))]),
    )
