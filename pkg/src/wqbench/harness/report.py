"""Evaluation reports: canonical JSON body plus flat CSV tables.

The JSON body is the artifact of record.  It is rendered with sorted
keys, two-space indentation, and no timestamps, so re-running the same
configuration with the same seed produces a byte-identical file.  CSV
emission flattens each table with a pinned column order and prints
floats with 17 significant digits for round-trip fidelity; figure data
(one CSV per figure family) is emitted alongside for plotting tools.
"""

import csv
import dataclasses
import json
import os
import platform

import numpy as np

from .. import __version__
from ..errors import ConfigurationError

TABLE_COLUMNS = {
    "baseline": ("model", "basin", "variable", "condition", "kge", "r",
                 "beta", "gamma", "pbias"),
    "robustness": ("model", "kind", "side", "level",
                   "median_pct_change", "theil_sen_beta", "n_pairs"),
    "uncertainty": ("model", "method", "basin", "variable", "runs",
                    "mean_kge", "sd_kge"),
    "attribution": ("model", "method", "variable", "group",
                    "importance", "share"),
    "stats": ("comparison", "variable", "method", "statistic",
              "p_value", "p_adjusted", "n", "cles", "stars"),
}

FIGURE_COLUMNS = {
    "fig1_performance_box": ("model", "variable", "basin", "kge"),
    "fig2_simplicity_scatter": ("model", "basin", "variable",
                                "simplicity", "kge"),
    "fig3_robustness_curves": ("model", "kind", "side", "level",
                               "median_pct_change"),
    "fig4_uncertainty_sd": ("model", "method", "basin", "variable",
                            "sd_kge"),
    "fig5_attribution_shares": ("model", "method", "variable", "group",
                                "share"),
}


def package_versions():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wqbench": __version__,
    }


@dataclasses.dataclass
class EvaluationReport:
    """Results of one experiment run, ready for serialization."""

    config_hash: str
    seed: int
    versions: dict = dataclasses.field(default_factory=package_versions)
    tables: dict = dataclasses.field(
        default_factory=lambda: {name: [] for name in TABLE_COLUMNS})
    figures: dict = dataclasses.field(default_factory=dict)
    failures: list = dataclasses.field(default_factory=list)
    completed: list = dataclasses.field(default_factory=list)

    @property
    def failed(self):
        return bool(self.failures)

    def body(self):
        """Plain-data form of the report, canonical and timestamp-free."""
        return {
            "metadata": {
                "config_hash": self.config_hash,
                "seed": self.seed,
                "versions": self.versions,
                "failed": self.failed,
            },
            "tables": self.tables,
            "figures": self.figures,
            "failures": self.failures,
            "completed": self.completed,
        }


def render_json(report):
    """Canonical JSON text for the report body."""
    return json.dumps(report.body(), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def load_report(path):
    """Rebuild an EvaluationReport from its JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        body = json.load(fh)
    try:
        meta = body["metadata"]
        return EvaluationReport(
            config_hash=meta["config_hash"],
            seed=meta["seed"],
            versions=meta["versions"],
            tables=body["tables"],
            figures=body.get("figures", {}),
            failures=body.get("failures", []),
            completed=body.get("completed", []),
        )
    except KeyError as exc:
        raise ConfigurationError(
            "%s is not an evaluation report (missing %s)" % (path, exc))


def build_figures(tables, scatter_rows=()):
    """Per-figure plot data derived from the report tables."""
    figures = {
        "fig1_performance_box": [
            {"model": r["model"], "variable": r["variable"],
             "basin": r["basin"], "kge": r["kge"]}
            for r in tables["baseline"] if r["condition"] == "baseline"],
        "fig2_simplicity_scatter": list(scatter_rows),
        "fig3_robustness_curves": [
            {"model": r["model"], "kind": r["kind"], "side": r["side"],
             "level": r["level"],
             "median_pct_change": r["median_pct_change"]}
            for r in tables["robustness"]],
        "fig4_uncertainty_sd": [
            {"model": r["model"], "method": r["method"],
             "basin": r["basin"], "variable": r["variable"],
             "sd_kge": r["sd_kge"]}
            for r in tables["uncertainty"]],
        "fig5_attribution_shares": [
            {"model": r["model"], "method": r["method"],
             "variable": r["variable"], "group": r["group"],
             "share": r["share"]}
            for r in tables["attribution"]],
    }
    return figures


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _write_table(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def emit(report, out_dir, formats=("json", "csv")):
    """Write the report under out_dir; returns the written paths."""
    unknown = sorted(set(formats) - {"json", "csv"})
    if unknown:
        raise ConfigurationError(
            "unknown report format(s): %s" % ", ".join(unknown))
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in formats:
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_json(report))
        written.append(path)
    if "csv" in formats:
        for name, columns in TABLE_COLUMNS.items():
            path = os.path.join(out_dir, name + ".csv")
            _write_table(path, columns, report.tables.get(name, []))
            written.append(path)
        fig_dir = os.path.join(out_dir, "figures")
        os.makedirs(fig_dir, exist_ok=True)
        for name, columns in FIGURE_COLUMNS.items():
            path = os.path.join(fig_dir, name + ".csv")
            _write_table(path, columns, report.figures.get(name, []))
            written.append(path)
    return written
