"""Synthetic basin generator with analytically known structure.

Each target variable follows
``y = c + alpha*q + beta1*sin(2*pi*t/365.25) + beta2*cos(...) + noise``
where the noise is a stationary AR(1) process.  Because the signal and
noise components are generated separately, the fraction of variance
carried by the linear+seasonal part is known exactly for every
(basin, variable) pair, which gives the simplicity metric an oracle.

The generator reproduces the structural quirks of the real corpus:
rainfall-chemistry features are weekly values held constant within each
week, vegetation indices are 8-day values cubic-spline interpolated to
daily resolution, and the calendar features datenum/sinT/cosT are always
present.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import ConfigurationError
from .schema import BasinDataset, BasinRecord, classify_land_use, time_feature_matrix

_M_COLUMNS = ("pr", "tmmx", "tmmn", "srad")
_RC_COLUMNS = ("rc_no3", "rc_so4", "rc_cl")
_V_COLUMNS = ("lai", "npp")

# archetype (urban_pct, ag_pct) cycled over basins so strata are covered
_LAND_USE_ARCHETYPES = ((2.0, 70.0), (3.0, 10.0), (40.0, 10.0), (10.0, 40.0))


@dataclass(frozen=True)
class SynthVariable:
    """Generative recipe for one target variable."""

    name: str
    alpha: float = 1.0
    beta1: float = 0.5
    beta2: float = 0.3
    gamma: float = 0.3
    p_obs: float = 1.0
    rho: float = 0.7
    # when set, the AR(1) noise is orthogonalized against the
    # runoff+harmonics design and rescaled so the in-sample fraction of
    # target variance carried by the signal equals this value exactly
    target_simplicity: float | None = None


def default_variables():
    return (
        SynthVariable("conc_a", alpha=1.2, beta1=0.6, beta2=-0.4, gamma=0.4),
        SynthVariable("conc_b", alpha=0.0, beta1=1.0, beta2=0.5, gamma=0.5),
        SynthVariable("conc_c", alpha=0.8, beta1=0.0, beta2=0.0, gamma=0.8),
    )


@dataclass(frozen=True)
class SynthConfig:
    n_basins: int = 4
    start_year: int = 2000
    n_years: int = 4
    variables: tuple = field(default_factory=default_variables)
    n_statics: int = 6
    duplicate_m_into_q: bool = False
    coefficient_jitter: float = 0.15
    relaxed_land_use: bool = False


def _validate(config):
    if config.n_basins < 1:
        raise ConfigurationError("n_basins must be >= 1")
    if config.n_years < 1:
        raise ConfigurationError("n_years must be >= 1")
    if not config.variables:
        raise ConfigurationError("at least one target variable is required")
    names = [v.name for v in config.variables]
    if len(set(names)) != len(names):
        raise ConfigurationError("duplicate target variable names")
    for v in config.variables:
        if not 0.0 < v.p_obs <= 1.0:
            raise ConfigurationError(
                "p_obs must lie in (0, 1], got %s for %r" % (v.p_obs, v.name)
            )
        if v.target_simplicity is not None and not (
            0.0 < v.target_simplicity <= 1.0
        ):
            raise ConfigurationError(
                "target_simplicity must lie in (0, 1] when set; use a "
                "zero-coefficient recipe for a pure-noise variable"
            )


def _ar1(rng, n, rho):
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + scale * e[t]
    return x


def _weekly_constant(rng, n):
    weeks = (n + 6) // 7
    values = 1.0 + 0.4 * _ar1(rng, weeks, 0.5)
    return np.repeat(values, 7)[:n]


def _eight_day_spline(rng, n, phase):
    knots = np.arange(0, n, 8)
    if knots[-1] != n - 1:
        knots = np.append(knots, n - 1)
    values = (
        2.0
        + 0.8 * np.sin(phase[knots] + 0.4)
        + 0.3 * _ar1(rng, knots.size, 0.6)
    )
    return CubicSpline(knots, values)(np.arange(n))


def synthesize_with_truth(config, seed):
    """Generate a dataset plus the analytic simplicity per pair.

    Returns ``(dataset, truth)`` where ``truth`` maps
    ``(basin_id, variable_name)`` to the sampled fraction of target
    variance carried by the linear+seasonal signal.
    """
    _validate(config)
    start = np.datetime64("%04d-01-01" % config.start_year, "D")
    end = np.datetime64("%04d-01-01" % (config.start_year + config.n_years),
                        "D")
    dates = np.arange(start, end)
    n = dates.size
    time_features = time_feature_matrix(dates)
    phase = 2.0 * np.pi * time_features[:, 0] / 365.25

    dynamic_names = (
        _M_COLUMNS + ("runoff",) + _RC_COLUMNS + _V_COLUMNS
        + ("datenum", "sinT", "cosT")
    )
    feature_groups = {}
    for name in _M_COLUMNS:
        feature_groups[name] = "M"
    feature_groups["runoff"] = "Q"
    for name in _RC_COLUMNS:
        feature_groups[name] = "RC"
    for name in _V_COLUMNS:
        feature_groups[name] = "V"
    for name in ("datenum", "sinT", "cosT"):
        feature_groups[name] = "Time"

    static_names = tuple("attr_%02d" % j for j in range(config.n_statics))
    target_names = tuple(v.name for v in config.variables)

    basins = []
    truth = {}
    for b in range(config.n_basins):
        rng = np.random.default_rng([int(seed), b])
        basin_id = "basin%03d" % b

        pr = 2.0 + 1.0 * np.sin(phase + 0.3) + 0.8 * _ar1(rng, n, 0.6)
        tmmx = 20.0 + 10.0 * np.sin(phase - 1.2) + 2.0 * _ar1(rng, n, 0.8)
        tmmn = 10.0 + 8.0 * np.sin(phase - 1.0) + 2.0 * _ar1(rng, n, 0.8)
        srad = 15.0 + 5.0 * np.sin(phase - 0.8) + 1.0 * _ar1(rng, n, 0.7)
        if config.duplicate_m_into_q:
            runoff = pr.copy()
        else:
            runoff = (
                1.5
                + 0.5 * np.sin(phase + rng.uniform(0.0, 0.5))
                + 0.4 * _ar1(rng, n, 0.8)
            )
        rc = [_weekly_constant(rng, n) for _ in _RC_COLUMNS]
        veg = [_eight_day_spline(rng, n, phase) for _ in _V_COLUMNS]
        dynamics = np.column_stack(
            [pr, tmmx, tmmn, srad, runoff] + rc + veg + [time_features]
        )

        jit = config.coefficient_jitter
        targets = np.full((n, len(config.variables)), np.nan)
        mask = np.zeros((n, len(config.variables)), dtype=bool)
        for k, var in enumerate(config.variables):
            alpha = var.alpha * (1.0 + jit * rng.uniform(-1.0, 1.0))
            beta1 = var.beta1 * (1.0 + jit * rng.uniform(-1.0, 1.0))
            beta2 = var.beta2 * (1.0 + jit * rng.uniform(-1.0, 1.0))
            intercept = 5.0 + rng.uniform(-0.5, 0.5)
            signal = alpha * runoff + beta1 * np.sin(phase) + beta2 * np.cos(phase)
            raw_noise = _ar1(rng, n, var.rho)
            var_sig = float(signal.var())
            if var.target_simplicity is not None:
                s = var.target_simplicity
                if var_sig == 0.0:
                    raise ConfigurationError(
                        "target_simplicity needs a nonzero signal "
                        "(variable %r)" % var.name
                    )
                # project the noise off the signal's regression span so
                # the variance split is exact, not just in expectation
                design = np.column_stack(
                    [runoff, np.sin(phase), np.cos(phase), np.ones(n)]
                )
                coef, *_ = np.linalg.lstsq(design, raw_noise, rcond=None)
                orth = raw_noise - design @ coef
                want = var_sig * (1.0 - s) / s
                if want == 0.0:
                    noise = np.zeros(n)
                else:
                    noise = orth * np.sqrt(want / float(orth.var()))
            else:
                noise = var.gamma * raw_noise
            var_noise = float(noise.var())
            denom = var_sig + var_noise
            truth[(basin_id, var.name)] = (
                var_sig / denom if denom > 0.0 else 0.0
            )
            y = intercept + signal + noise
            observed = rng.random(n) < var.p_obs
            targets[observed, k] = y[observed]
            mask[:, k] = observed

        statics = rng.uniform(0.5, 2.0, size=config.n_statics)
        lon = rng.uniform(-120.0, -70.0)
        lat = rng.uniform(30.0, 48.0)
        urban0, ag0 = _LAND_USE_ARCHETYPES[b % len(_LAND_USE_ARCHETYPES)]
        urban = float(np.clip(urban0 + rng.uniform(-1.0, 1.0), 0.0, 100.0))
        ag = float(np.clip(ag0 + rng.uniform(-2.0, 2.0), 0.0, 100.0))
        basins.append(
            BasinRecord(
                id=basin_id,
                coords=(lon, lat),
                statics=statics,
                dynamics=dynamics,
                targets=targets,
                target_mask=mask,
                urban_pct=urban,
                ag_pct=ag,
                land_use=classify_land_use(
                    urban, ag, relaxed=config.relaxed_land_use
                ),
            )
        )

    dataset = BasinDataset(
        basins=tuple(basins),
        dynamic_names=dynamic_names,
        feature_groups=feature_groups,
        static_names=static_names,
        target_names=target_names,
        dates=dates,
        synth_truth=truth,
    )
    return dataset, truth


def synthesize(config, seed):
    """Generate a synthetic dataset (see :func:`synthesize_with_truth`)."""
    dataset, _ = synthesize_with_truth(config, seed)
    return dataset
