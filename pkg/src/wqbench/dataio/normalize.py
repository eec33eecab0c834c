"""Min-max and log-min-max normalization with train-only statistics.

Statistics are fitted on training rows only and reused verbatim for test
rows, so no information leaks across the split.  The log transform uses
the natural log with an offset of max(0, -min_train) + 1e-6 so that
non-positive training values stay representable.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, NormalizationError
from .schema import FILL_VALUE

MINMAX = "minmax"
LOGMINMAX = "logminmax"

_LOG_EPS = 1e-6
_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ColumnStats:
    method: str
    vmin: float
    vmax: float
    offset: float = 0.0

    def apply(self, values):
        x = np.asarray(values, dtype=np.float64)
        if self.method == LOGMINMAX:
            x = np.log(np.maximum(x + self.offset, _LOG_FLOOR))
        return (x - self.vmin) / (self.vmax - self.vmin)

    def invert(self, values):
        z = np.asarray(values, dtype=np.float64)
        x = z * (self.vmax - self.vmin) + self.vmin
        if self.method == LOGMINMAX:
            x = np.exp(x) - self.offset
        return x


@dataclass(frozen=True)
class NormStats:
    dynamics: dict  # name -> ColumnStats
    targets: dict
    statics: dict
    coords: dict  # {"longitude": ..., "latitude": ...}

    def to_dict(self):
        def section(d):
            return {
                k: {
                    "method": s.method,
                    "min": s.vmin,
                    "max": s.vmax,
                    "offset": s.offset,
                }
                for k, s in d.items()
            }

        return {
            "dynamics": section(self.dynamics),
            "targets": section(self.targets),
            "statics": section(self.statics),
            "coords": section(self.coords),
        }

    @classmethod
    def from_dict(cls, payload):
        def section(d):
            return {
                k: ColumnStats(
                    method=v["method"],
                    vmin=v["min"],
                    vmax=v["max"],
                    offset=v["offset"],
                )
                for k, v in d.items()
            }

        return cls(
            dynamics=section(payload["dynamics"]),
            targets=section(payload["targets"]),
            statics=section(payload["statics"]),
            coords=section(payload["coords"]),
        )


def default_norm_methods(dataset):
    """Per-column methods following the published convention.

    Meteorological, runoff and rainfall-chemistry features are
    log-min-max; vegetation and calendar features are min-max.
    Temperature, dissolved oxygen and pH targets are min-max, the other
    concentrations log-min-max.  Coordinates are min-max.
    """
    minmax_targets = {"Temp", "DO", "pH"}
    methods = {"dynamics": {}, "targets": {}, "statics": {}, "coords": {}}
    for name in dataset.dynamic_names:
        group = dataset.feature_groups[name]
        methods["dynamics"][name] = (
            MINMAX if group in ("V", "Time") else LOGMINMAX
        )
    for name in dataset.target_names:
        methods["targets"][name] = (
            MINMAX if name in minmax_targets else LOGMINMAX
        )
    for name in dataset.static_names:
        methods["statics"][name] = (
            MINMAX if name in ("LAT_GAGE", "LNG_GAGE") else LOGMINMAX
        )
    methods["coords"] = {"longitude": MINMAX, "latitude": MINMAX}
    return methods


def _fit_column(values, method, column_name):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise NormalizationError(
            "no training values for column %r" % column_name
        )
    offset = 0.0
    if method == LOGMINMAX:
        offset = max(0.0, -float(v.min())) + _LOG_EPS
        v = np.log(v + offset)
    elif method != MINMAX:
        raise ContractError("unknown normalization method %r" % method)
    vmin, vmax = float(v.min()), float(v.max())
    if vmax <= vmin:
        raise NormalizationError(
            "column %r is constant on the training rows" % column_name
        )
    return ColumnStats(method=method, vmin=vmin, vmax=vmax, offset=offset)


def fit_normalizer(dataset, train_masks, methods=None):
    """Fit per-column statistics on the training rows only.

    Parameters
    ----------
    dataset : BasinDataset
    train_masks : dict
        Basin id -> boolean mask over the calendar marking training rows.
        Basins absent from the mapping contribute nothing (spatial test
        basins).
    methods : dict, optional
        Nested mapping section -> column -> method; defaults to
        :func:`default_norm_methods`.
    """
    if methods is None:
        methods = default_norm_methods(dataset)
    train_records = [
        r for r in dataset.basins
        if r.id in train_masks and np.any(train_masks[r.id])
    ]
    if not train_records:
        raise NormalizationError("no training rows in any basin")

    dynamics = {}
    for j, name in enumerate(dataset.dynamic_names):
        pooled = np.concatenate(
            [r.dynamics[train_masks[r.id], j] for r in train_records]
        )
        dynamics[name] = _fit_column(pooled, methods["dynamics"][name], name)

    targets = {}
    for k, name in enumerate(dataset.target_names):
        pooled = np.concatenate(
            [
                r.targets[train_masks[r.id] & r.target_mask[:, k], k]
                for r in train_records
            ]
        )
        targets[name] = _fit_column(pooled, methods["targets"][name], name)

    statics = {}
    for j, name in enumerate(dataset.static_names):
        pooled = np.array([r.statics[j] for r in train_records])
        statics[name] = _fit_column(pooled, methods["statics"][name], name)

    lons = np.array([r.coords[0] for r in train_records])
    lats = np.array([r.coords[1] for r in train_records])
    coords = {
        "longitude": _fit_column(lons, methods["coords"]["longitude"],
                                 "longitude"),
        "latitude": _fit_column(lats, methods["coords"]["latitude"],
                                "latitude"),
    }
    return NormStats(dynamics=dynamics, targets=targets, statics=statics,
                     coords=coords)


@dataclass(frozen=True)
class PreparedBasin:
    """Normalized arrays for one basin, ready for model consumption."""

    dynamics: np.ndarray  # [T, F_d] normalized, missing filled with -1
    fill_mask: np.ndarray  # [T, F_d] bool, True where a fill was applied
    targets: np.ndarray  # [T, K] normalized, NaN where unobserved
    target_mask: np.ndarray  # [T, K] bool
    statics: np.ndarray  # [F_s] normalized
    coords: np.ndarray  # [2] normalized (lon, lat)


@dataclass(frozen=True)
class PreparedData:
    basins: dict  # basin id -> PreparedBasin
    stats: NormStats
    dynamic_names: tuple
    target_names: tuple
    feature_groups: dict
    dates: np.ndarray

    def runoff_columns(self):
        return [
            i
            for i, n in enumerate(self.dynamic_names)
            if self.feature_groups[n] == "Q"
        ]

    def denormalize_target(self, variable_index, values):
        name = self.target_names[variable_index]
        return self.stats.targets[name].invert(values)


def apply_normalizer(dataset, stats):
    """Normalize every basin with fitted stats; fill missing with -1."""
    basins = {}
    for record in dataset.basins:
        dyn = np.empty_like(record.dynamics)
        for j, name in enumerate(dataset.dynamic_names):
            dyn[:, j] = stats.dynamics[name].apply(record.dynamics[:, j])
        fill_mask = ~np.isfinite(dyn)
        dyn[fill_mask] = FILL_VALUE

        tgt = np.full(record.targets.shape, np.nan)
        for k, name in enumerate(dataset.target_names):
            obs = record.target_mask[:, k]
            tgt[obs, k] = stats.targets[name].apply(record.targets[obs, k])

        sta = np.array(
            [
                float(stats.statics[name].apply(record.statics[j]))
                for j, name in enumerate(dataset.static_names)
            ]
        )
        coords = np.array(
            [
                float(stats.coords["longitude"].apply(record.coords[0])),
                float(stats.coords["latitude"].apply(record.coords[1])),
            ]
        )
        basins[record.id] = PreparedBasin(
            dynamics=dyn,
            fill_mask=fill_mask,
            targets=tgt,
            target_mask=record.target_mask.copy(),
            statics=sta,
            coords=coords,
        )
    return PreparedData(
        basins=basins,
        stats=stats,
        dynamic_names=dataset.dynamic_names,
        target_names=dataset.target_names,
        feature_groups=dict(dataset.feature_groups),
        dates=dataset.dates,
    )


def prepare(dataset, train_masks, methods=None):
    """Fit on training rows and normalize the whole dataset."""
    stats = fit_normalizer(dataset, train_masks, methods=methods)
    return apply_normalizer(dataset, stats)
