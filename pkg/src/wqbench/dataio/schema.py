"""Dataset schema: basin records, land-use classes, coverage.

Dynamic features belong to one of five groups: meteorological forcings
(M), runoff (Q), rainfall chemistry (RC), vegetation indices (V) and the
calendar features (Time).  Static basin attributes form the BA group.
The Time features and the basin coordinates are spatiotemporal covariates
that stay in every model regardless of which groups are selected.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DomainError

EPOCH = np.datetime64("2000-01-01")
FILL_VALUE = -1.0

TIME_FEATURES = ("datenum", "sinT", "cosT")

# groups eligible for attribution; Time is a covariate, not a group
ATTRIBUTION_GROUPS = ("M", "Q", "RC", "V", "BA")

DYNAMIC_GROUPS = ("M", "Q", "RC", "V", "Time")

LAND_USE_CLASSES = ("AG", "UD", "UR", "MX")


@dataclass(frozen=True)
class BasinRecord:
    """One basin: coordinates, static attributes, daily series."""

    id: str
    coords: tuple  # (longitude, latitude) decimal degrees
    statics: np.ndarray  # [F_s]
    dynamics: np.ndarray  # [T, F_d], NaN where missing
    targets: np.ndarray  # [T, K], NaN where unobserved
    target_mask: np.ndarray  # [T, K] bool
    urban_pct: float
    ag_pct: float
    land_use: str


@dataclass(frozen=True)
class BasinDataset:
    """A collection of basins sharing one daily calendar."""

    basins: tuple
    dynamic_names: tuple
    feature_groups: dict  # dynamic feature name -> group
    static_names: tuple
    target_names: tuple
    dates: np.ndarray  # datetime64[D], strictly increasing, daily
    synth_truth: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in self.dynamic_names:
            group = self.feature_groups.get(name)
            if group not in DYNAMIC_GROUPS:
                raise ContractError(
                    "dynamic feature %r has no valid group (got %r)"
                    % (name, group)
                )
        if self.dates.size >= 2:
            deltas = np.diff(self.dates).astype("timedelta64[D]")
            if not np.all(deltas == np.timedelta64(1, "D")):
                raise ContractError("calendar must be strictly daily")

    def basin(self, basin_id):
        for record in self.basins:
            if record.id == basin_id:
                return record
        raise ContractError("unknown basin id %r" % (basin_id,))

    @property
    def basin_ids(self):
        return tuple(r.id for r in self.basins)

    def columns_in_group(self, group):
        return [
            i
            for i, name in enumerate(self.dynamic_names)
            if self.feature_groups[name] == group
        ]


def classify_land_use(urban_pct, ag_pct, relaxed=False):
    """Classify a basin by its urban and agricultural land percentages.

    Rules are checked in the order AG, UD, UR, MX:
    AG if ag > 50 and urban <= (7 if relaxed else 5);
    UD if urban <= 5 and ag <= 25;
    UR if urban > 25 and ag <= 25;
    MX otherwise.
    """
    urban = float(urban_pct)
    ag = float(ag_pct)
    if not (0.0 <= urban <= 100.0 and 0.0 <= ag <= 100.0):
        raise DomainError(
            "land-use percentages must lie in [0, 100], got urban=%s ag=%s"
            % (urban_pct, ag_pct)
        )
    urban_cap = 7.0 if relaxed else 5.0
    if ag > 50.0 and urban <= urban_cap:
        return "AG"
    if urban <= 5.0 and ag <= 25.0:
        return "UD"
    if urban > 25.0 and ag <= 25.0:
        return "UR"
    return "MX"


def coverage(record, variable_index):
    """Percent of days with an observation for one target variable."""
    mask = record.target_mask[:, variable_index]
    total = mask.shape[0]
    if total == 0:
        return 0.0
    return 100.0 * float(mask.sum()) / float(total)


def datenum_days(dates):
    """Days since 2000-01-01 (negative before); float array."""
    return (
        np.asarray(dates, dtype="datetime64[D]") - EPOCH
    ).astype(np.float64)


def time_feature_matrix(dates):
    """The three calendar features: datenum, sinT, cosT (period 365.25)."""
    dn = datenum_days(dates)
    phase = 2.0 * np.pi * dn / 365.25
    return np.column_stack([dn, np.sin(phase), np.cos(phase)])


def select_feature_columns(dataset, groups):
    """Dynamic column indices for a subset of attribution groups.

    Time columns are always included (always-on covariates).  Returns
    (column_indices, include_statics); statics are included when "BA"
    is in ``groups``.
    """
    groups = set(groups)
    unknown = groups - set(ATTRIBUTION_GROUPS)
    if unknown:
        raise ContractError("unknown attribution groups: %s" % sorted(unknown))
    columns = [
        i
        for i, name in enumerate(dataset.dynamic_names)
        if dataset.feature_groups[name] == "Time"
        or dataset.feature_groups[name] in groups
    ]
    return columns, "BA" in groups
