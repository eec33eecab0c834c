"""Temporal held-out and spatially stratified train/test splits."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, SplitError

TEMPORAL = "temporal"
SPATIAL = "spatial"

# every fifth year of the study window is withheld
PAPER_TEST_YEARS = (1985, 1990, 1995, 2000, 2005, 2010, 2015)


@dataclass(frozen=True)
class SplitPlan:
    kind: str
    test_years: tuple = ()
    test_fraction: float = 0.2
    seed: int = 0


@dataclass(frozen=True)
class SplitResult:
    """Per-basin boolean row masks; disjoint by construction."""

    train: dict  # basin id -> bool mask over the calendar
    test: dict
    train_basins: tuple
    test_basins: tuple

    def n_train_rows(self):
        return int(sum(m.sum() for m in self.train.values()))

    def n_test_rows(self):
        return int(sum(m.sum() for m in self.test.values()))


def split(dataset, plan):
    if plan.kind == TEMPORAL:
        return _temporal(dataset, plan)
    if plan.kind == SPATIAL:
        return _spatial(dataset, plan)
    raise ConfigurationError("unknown split kind %r" % (plan.kind,))


def _temporal(dataset, plan):
    if not plan.test_years:
        raise ConfigurationError("temporal plan requires test_years")
    years = dataset.dates.astype("datetime64[Y]").astype(int) + 1970
    present = set(np.unique(years).tolist())
    missing = [y for y in plan.test_years if y not in present]
    if missing:
        raise SplitError(
            "test years %s not present in the calendar" % (missing,)
        )
    test_mask = np.isin(years, list(plan.test_years))
    train_mask = ~test_mask
    ids = dataset.basin_ids
    return SplitResult(
        train={b: train_mask.copy() for b in ids},
        test={b: test_mask.copy() for b in ids},
        train_basins=ids,
        test_basins=ids,
    )


def _spatial(dataset, plan):
    if not 0.0 < plan.test_fraction < 1.0:
        raise ConfigurationError("test_fraction must lie in (0, 1)")
    strata = {}
    for record in dataset.basins:
        strata.setdefault(record.land_use, []).append(record.id)
    rng = np.random.default_rng(plan.seed)
    test_basins = []
    # iterate classes in sorted order so the draw is reproducible
    for land_use in sorted(strata):
        members = sorted(strata[land_use])
        n = len(members)
        if n == 1:
            raise SplitError(
                "land-use stratum %r has a single basin; cannot take a "
                "test basin and keep training data" % land_use
            )
        k = max(1, int(np.floor(plan.test_fraction * n)))
        if k >= n:
            raise SplitError(
                "stratum %r would send all %d basins to test" % (land_use, n)
            )
        order = rng.permutation(n)
        test_basins.extend(members[i] for i in order[:k])
    test_set = set(test_basins)
    train_basins = tuple(
        b for b in dataset.basin_ids if b not in test_set
    )
    test_basins = tuple(b for b in dataset.basin_ids if b in test_set)
    t = dataset.dates.size
    all_rows = np.ones(t, dtype=bool)
    return SplitResult(
        train={b: all_rows.copy() for b in train_basins},
        test={b: all_rows.copy() for b in test_basins},
        train_basins=train_basins,
        test_basins=test_basins,
    )
