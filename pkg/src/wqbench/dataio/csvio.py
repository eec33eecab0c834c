"""CSV corpus reader and writer.

Layout of a corpus directory::

    statics.csv            one row per basin: basin_id, longitude,
                           latitude, urban_pct, ag_pct, <attributes...>
    feature_groups.csv     two columns: column, group
    <basin>_dynamics.csv   date, <dynamic feature columns...>
    <basin>_targets.csv    date, <target columns...>

Dates are ISO ``YYYY-MM-DD`` and must be strictly increasing within a
file.  On ingest every basin is reindexed onto the union daily calendar;
rainfall-chemistry columns are forward/back filled (they are weekly
values), vegetation columns are cubic-spline interpolated (they are
8-day values), and the calendar features datenum/sinT/cosT are always
recomputed rather than trusted from disk.
"""

import csv
import datetime
import math
import os

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import IngestionError
from .schema import (
    TIME_FEATURES,
    BasinDataset,
    BasinRecord,
    classify_land_use,
    time_feature_matrix,
)

_STATIC_KEY_COLUMNS = ("basin_id", "longitude", "latitude", "urban_pct",
                       "ag_pct")


def _format_value(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return "%.17g" % x


def _parse_value(text):
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def _parse_date(text, path):
    try:
        return datetime.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestionError("unparseable date %r in %s" % (text, path))


def _read_table(path):
    """Read one dated CSV, returning (dates, header, matrix)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file %s" % path)
        if not header or header[0] != "date":
            raise IngestionError("first column of %s must be 'date'" % path)
        names = header[1:]
        dates = []
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    "row width mismatch in %s at line %d"
                    % (path, reader.line_num)
                )
            dates.append(_parse_date(row[0], path))
            rows.append([_parse_value(cell) for cell in row[1:]])
    if not dates:
        raise IngestionError("no data rows in %s" % path)
    for prev, cur in zip(dates, dates[1:]):
        if cur <= prev:
            raise IngestionError(
                "dates in %s must be strictly increasing (%s then %s)"
                % (path, prev, cur)
            )
    return dates, names, np.asarray(rows, dtype=float)


def _reindex(dates, matrix, calendar, date_index):
    out = np.full((calendar.size, matrix.shape[1]), np.nan)
    rows = [date_index[d] for d in dates]
    out[rows, :] = matrix
    return out


def _fill_weekly(column):
    idx = np.flatnonzero(np.isfinite(column))
    if idx.size == 0:
        return column
    out = column.copy()
    # forward fill, then back fill the leading gap
    last = np.nan
    for i in range(out.size):
        if np.isfinite(out[i]):
            last = out[i]
        elif np.isfinite(last):
            out[i] = last
    out[: idx[0]] = column[idx[0]]
    return out


def _fill_spline(column):
    idx = np.flatnonzero(np.isfinite(column))
    if idx.size == 0:
        return column
    if idx.size == 1:
        return np.full_like(column, column[idx[0]])
    spline = CubicSpline(idx.astype(float), column[idx])
    return spline(np.arange(column.size, dtype=float))


def write_csv(dataset, path):
    """Write ``dataset`` as a corpus directory at ``path``."""
    os.makedirs(path, exist_ok=True)
    iso = np.datetime_as_string(dataset.dates, unit="D")

    with open(os.path.join(path, "feature_groups.csv"), "w",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "group"])
        for name in dataset.dynamic_names:
            writer.writerow([name, dataset.feature_groups[name]])

    with open(os.path.join(path, "statics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_STATIC_KEY_COLUMNS) + list(dataset.static_names))
        for basin in dataset.basins:
            row = [
                basin.id,
                _format_value(basin.coords[0]),
                _format_value(basin.coords[1]),
                _format_value(basin.urban_pct),
                _format_value(basin.ag_pct),
            ]
            row.extend(_format_value(v) for v in basin.statics)
            writer.writerow(row)

    for basin in dataset.basins:
        with open(os.path.join(path, "%s_dynamics.csv" % basin.id), "w",
                  newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date"] + list(dataset.dynamic_names))
            for i in range(dataset.dates.size):
                writer.writerow(
                    [iso[i]]
                    + [_format_value(v) for v in basin.dynamics[i]]
                )
        with open(os.path.join(path, "%s_targets.csv" % basin.id), "w",
                  newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date"] + list(dataset.target_names))
            for i in range(dataset.dates.size):
                row = [iso[i]]
                for k in range(len(dataset.target_names)):
                    if basin.target_mask[i, k]:
                        row.append(_format_value(basin.targets[i, k]))
                    else:
                        row.append("")
                writer.writerow(row)


def _read_statics(path):
    statics_path = os.path.join(path, "statics.csv")
    if not os.path.exists(statics_path):
        raise IngestionError("missing %s" % statics_path)
    with open(statics_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty file %s" % statics_path)
        for required in _STATIC_KEY_COLUMNS:
            if required not in header:
                raise IngestionError(
                    "%s lacks required column %r" % (statics_path, required)
                )
        attr_names = tuple(
            name for name in header if name not in _STATIC_KEY_COLUMNS
        )
        index = {name: header.index(name) for name in header}
        rows = {}
        for row in reader:
            if not row:
                continue
            basin_id = row[index["basin_id"]].strip()
            if basin_id in rows:
                raise IngestionError(
                    "duplicate basin %r in %s" % (basin_id, statics_path)
                )
            values = {}
            for name in header:
                if name == "basin_id":
                    continue
                value = _parse_value(row[index[name]])
                if not math.isfinite(value):
                    raise IngestionError(
                        "non-numeric static %r for basin %r"
                        % (name, basin_id)
                    )
                values[name] = value
            rows[basin_id] = values
    if not rows:
        raise IngestionError("no basins listed in %s" % statics_path)
    return attr_names, rows


def _read_groups(path, dynamic_names):
    groups_path = os.path.join(path, "feature_groups.csv")
    if not os.path.exists(groups_path):
        raise IngestionError("missing %s" % groups_path)
    mapping = {}
    with open(groups_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["column", "group"]:
            raise IngestionError(
                "%s must have header column,group" % groups_path
            )
        for row in reader:
            if not row:
                continue
            mapping[row[0].strip()] = row[1].strip()
    for name in TIME_FEATURES:
        mapping[name] = "Time"
    for name in dynamic_names:
        if name not in mapping:
            raise IngestionError(
                "dynamic column %r has no feature group" % name
            )
    return mapping


def ingest_csv(path, relaxed_land_use=False, min_observations=0):
    """Load a corpus directory into a :class:`BasinDataset`.

    ``min_observations`` screens sparse (basin, variable) pairs: when a
    basin has fewer observed values of a target than this threshold, the
    pair is treated as unobserved.
    """
    attr_names, static_rows = _read_statics(path)
    basin_ids = sorted(static_rows)

    per_basin = {}
    dynamic_names = None
    target_names = None
    all_dates = set()
    for basin_id in basin_ids:
        dyn_path = os.path.join(path, "%s_dynamics.csv" % basin_id)
        tgt_path = os.path.join(path, "%s_targets.csv" % basin_id)
        for p in (dyn_path, tgt_path):
            if not os.path.exists(p):
                raise IngestionError("missing %s" % p)
        dyn_dates, raw_names, dyn = _read_table(dyn_path)
        tgt_dates, tgt_names, tgt = _read_table(tgt_path)
        keep = [i for i, n in enumerate(raw_names) if n not in TIME_FEATURES]
        dyn_names = [raw_names[i] for i in keep]
        dyn = dyn[:, keep]
        if dynamic_names is None:
            dynamic_names = dyn_names
            target_names = tgt_names
        else:
            if dyn_names != dynamic_names:
                raise IngestionError(
                    "dynamic columns of %r differ from %r"
                    % (basin_id, basin_ids[0])
                )
            if tgt_names != target_names:
                raise IngestionError(
                    "target columns of %r differ from %r"
                    % (basin_id, basin_ids[0])
                )
        all_dates.update(dyn_dates)
        all_dates.update(tgt_dates)
        per_basin[basin_id] = (dyn_dates, dyn, tgt_dates, tgt)

    first = min(all_dates)
    last = max(all_dates)
    calendar = np.arange(
        np.datetime64(first.isoformat(), "D"),
        np.datetime64(last.isoformat(), "D") + 1,
    )
    date_index = {
        first + datetime.timedelta(days=i): i for i in range(calendar.size)
    }
    time_features = time_feature_matrix(calendar)

    groups = _read_groups(path, dynamic_names)
    full_dynamic_names = tuple(dynamic_names) + TIME_FEATURES
    feature_groups = {name: groups[name] for name in full_dynamic_names}

    basins = []
    for basin_id in basin_ids:
        dyn_dates, dyn, tgt_dates, tgt = per_basin[basin_id]
        dyn = _reindex(dyn_dates, dyn, calendar, date_index)
        tgt = _reindex(tgt_dates, tgt, calendar, date_index)
        for j, name in enumerate(dynamic_names):
            if groups[name] == "RC":
                dyn[:, j] = _fill_weekly(dyn[:, j])
            elif groups[name] == "V":
                dyn[:, j] = _fill_spline(dyn[:, j])
        dynamics = np.hstack([dyn, time_features])
        mask = np.isfinite(tgt)
        if min_observations > 0:
            for k in range(mask.shape[1]):
                if 0 < mask[:, k].sum() < min_observations:
                    mask[:, k] = False
        tgt = np.where(mask, tgt, np.nan)

        values = static_rows[basin_id]
        statics = np.array([values[name] for name in attr_names])
        urban = values["urban_pct"]
        ag = values["ag_pct"]
        basins.append(
            BasinRecord(
                id=basin_id,
                coords=(values["longitude"], values["latitude"]),
                statics=statics,
                dynamics=dynamics,
                targets=tgt,
                target_mask=mask,
                urban_pct=urban,
                ag_pct=ag,
                land_use=classify_land_use(urban, ag,
                                           relaxed=relaxed_land_use),
            )
        )

    observed_any = np.zeros(len(target_names), dtype=bool)
    for basin in basins:
        observed_any |= basin.target_mask.any(axis=0)
    if not observed_any.all():
        missing = [
            target_names[k] for k in np.flatnonzero(~observed_any)
        ]
        raise IngestionError(
            "target column(s) with no observations: %s" % ", ".join(missing)
        )

    return BasinDataset(
        basins=tuple(basins),
        dynamic_names=full_dynamic_names,
        feature_groups=feature_groups,
        static_names=attr_names,
        target_names=tuple(target_names),
        dates=calendar,
    )
