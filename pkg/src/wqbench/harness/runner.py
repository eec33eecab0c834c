"""Staged experiment execution.

Stages run in dependency order: data, split, prepare, train, baseline,
then the requested protocols, each broken into independent jobs (model
by corruption by protocol).  Jobs may run on a thread pool; every job
draws its own seed from the master seed and the job's label path, so
results are identical whatever the completion order.  The first failure
aborts the run: the failure manifest records the stage and job, plus a
not-run marker for every requested protocol that never started, and the
partially filled report is returned for flushing.
"""

import concurrent.futures
import itertools

import numpy as np

from ..corrupt import CorruptionSpec
from ..dataio import ingest_csv, prepare, split, synthesize
from ..errors import (
    DegenerateTestError,
    InsufficientDataError,
    MetricUndefinedError,
)
from ..metrics import kge, pbias, simplicity
from ..stats import bh_fdr, cles, significance_stars, wilcoxon_signed_rank
from ..trust import (
    ablation_importance,
    ig_group_aggregate,
    mc_dropout_uncertainty,
    prediction_pairs,
    robustness_sweep,
    traverse_importance,
    tta_uncertainty,
)
from .report import EvaluationReport, build_figures
from .seeding import seed_stream

_TABLE_SORT_KEYS = {
    "baseline": ("model", "basin", "variable", "condition"),
    "robustness": ("model", "kind", "side", "level"),
    "uncertainty": ("model", "method", "basin", "variable"),
    "attribution": ("model", "method", "variable", "group"),
    "stats": ("comparison", "variable"),
}


class _Abort(Exception):
    """Raised after a failure has been recorded; unwinds the run."""


def _record_failure(report, stage, job, exc):
    report.failures.append({
        "stage": stage,
        "job": job,
        "error": "%s: %s" % (type(exc).__name__, exc),
    })


def _run_jobs(report, stage, named_jobs, jobs):
    """Run (name, thunk) pairs, serially or on a pool; abort on failure.

    Results and errors are handled in sorted job-name order so the
    outcome does not depend on scheduling.
    """
    results = {}
    if jobs <= 1 or len(named_jobs) <= 1:
        for name, thunk in named_jobs:
            try:
                results[name] = thunk()
            except Exception as exc:
                _record_failure(report, stage, name, exc)
                raise _Abort()
        return results
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {name: pool.submit(thunk) for name, thunk in named_jobs}
    for name in sorted(futures):
        exc = futures[name].exception()
        if exc is not None:
            _record_failure(report, stage, name, exc)
            raise _Abort()
        results[name] = futures[name].result()
    return results


def _load_data(config):
    src = config.source
    if src["kind"] == "synth":
        return synthesize(config.synth_config(),
                          seed=seed_stream(config.seed, ["data", "synth"]))
    return ingest_csv(src["path"], relaxed_land_use=src["relaxed_land_use"],
                      min_observations=src["min_observations"])


def _baseline_rows(name, model, prepared, dataset, test_masks):
    rows, scores = [], {}
    for basin_id, var, obs, pred in prediction_pairs(
            model, prepared, dataset, test_masks):
        try:
            breakdown = kge(obs, pred)
        except (MetricUndefinedError, InsufficientDataError):
            continue
        try:
            bias = float(pbias(obs, pred))
        except (MetricUndefinedError, InsufficientDataError):
            bias = None
        scores[(basin_id, var)] = breakdown.kge
        rows.append({
            "model": name, "basin": basin_id, "variable": var,
            "condition": "baseline", "kge": float(breakdown.kge),
            "r": float(breakdown.r), "beta": float(breakdown.beta),
            "gamma": float(breakdown.gamma), "pbias": bias,
        })
    return rows, scores


def _simplicity_rows(dataset, prepared, baseline_rows):
    """Simplicity index joined onto baseline KGE for scatter plots."""
    runoff_cols = prepared.runoff_columns()
    if not runoff_cols:
        return []
    col = runoff_cols[0]
    day_col = list(dataset.dynamic_names).index("datenum")
    indices = {}
    for record in dataset.basins:
        basin = prepared.basins[record.id]
        for k, var in enumerate(prepared.target_names):
            conc = np.where(record.target_mask[:, k],
                            record.targets[:, k], np.nan)
            try:
                score = simplicity(basin.dynamics[:, col], conc,
                                   record.dynamics[:, day_col])
            except (InsufficientDataError, MetricUndefinedError):
                continue
            indices[(record.id, var)] = float(score.simplicity)
    rows = []
    for row in baseline_rows:
        key = (row["basin"], row["variable"])
        if key in indices:
            rows.append({"model": row["model"], "basin": row["basin"],
                         "variable": row["variable"],
                         "simplicity": indices[key], "kge": row["kge"]})
    return rows


def _stats_rows(model_scores):
    """Pairwise model comparisons on per-(basin, variable) KGE."""
    rows = []
    names = sorted(model_scores)
    for a, b in itertools.combinations(names, 2):
        shared = sorted(set(model_scores[a]) & set(model_scores[b]))
        if not shared:
            continue
        variables = sorted({var for _, var in shared})
        slices = [("all", shared)] if len(variables) > 1 else []
        slices += [(var, [k for k in shared if k[1] == var])
                   for var in variables]
        for label, keys in slices:
            xs = np.array([model_scores[a][k] for k in keys])
            ys = np.array([model_scores[b][k] for k in keys])
            try:
                test = wilcoxon_signed_rank(xs, ys)
                effect = float(cles(xs, ys))
            except (DegenerateTestError, InsufficientDataError):
                continue
            rows.append({
                "comparison": "%s_vs_%s" % (a, b), "variable": label,
                "method": test.method, "statistic": float(test.statistic),
                "p_value": float(test.p_value),
                "p_adjusted": None, "n": int(test.n_effective),
                "cles": effect, "stars": None,
            })
    if rows:
        adjusted = bh_fdr([row["p_value"] for row in rows])
        for row, p_adj in zip(rows, adjusted):
            row["p_adjusted"] = float(p_adj)
            row["stars"] = significance_stars(float(p_adj))
    return rows


def run(config, jobs=1):
    """Execute an experiment plan; returns the (possibly partial) report."""
    report = EvaluationReport(config_hash=config.config_hash,
                              seed=config.seed)
    options = config.options
    train_config = config.train_config()
    plans = config.model_plans()
    state = {}

    def stage_data():
        state["dataset"] = _load_data(config)

    def stage_split():
        state["split"] = split(state["dataset"], config.split_plan())

    def stage_prepare():
        state["prepared"] = prepare(state["dataset"],
                                    state["split"].train)

    def stage_train():
        from ..trust import train_family

        def job(name, family, kw):
            return lambda: train_family(
                family, state["prepared"], state["split"].train,
                train_config=train_config,
                seed=seed_stream(config.seed, ["train", name]), **kw)

        named = [(name, job(name, family, kw))
                 for name, family, kw in plans]
        state["models"] = _run_jobs(report, "train", named, jobs)

    def stage_baseline():
        state["scores"] = {}
        scatter = []
        for name, _, _ in plans:
            rows, scores = _baseline_rows(
                name, state["models"][name], state["prepared"],
                state["dataset"], state["split"].test)
            report.tables["baseline"].extend(rows)
            state["scores"][name] = scores
            scatter.extend(_simplicity_rows(state["dataset"],
                                            state["prepared"], rows))
        state["scatter"] = scatter

    def stage_robustness():
        named = []
        for name, family, kw in plans:
            for group in config.corruptions:
                job_name = "%s/%s/%s" % (name, group["kind"],
                                         group["side"])

                def job(name=name, family=family, kw=kw, group=group,
                        job_name=job_name):
                    specs = [CorruptionSpec(
                        kind=group["kind"], side=group["side"],
                        fraction=level, noise_sigma=group["noise_sigma"],
                        seed=seed_stream(config.seed,
                                         ["corrupt", job_name,
                                          "%.17g" % level]))
                        for level in group["levels"]]
                    return robustness_sweep(
                        family, state["dataset"], specs,
                        config.split_plan(), train_config=train_config,
                        seed=seed_stream(config.seed,
                                         ["robustness", job_name]),
                        min_base_kge=options["min_kge"], **kw)

                named.append((job_name, job))
        curves = _run_jobs(report, "robustness", named, jobs)
        for job_name in sorted(curves):
            name, kind, side = job_name.split("/")
            curve = curves[job_name]
            for level, change in zip(curve.levels,
                                     curve.median_pct_change):
                report.tables["robustness"].append({
                    "model": name, "kind": kind, "side": side,
                    "level": float(level),
                    "median_pct_change": float(change),
                    "theil_sen_beta": float(curve.theil_sen_beta),
                    "n_pairs": int(curve.n_pairs),
                })

    def _uncertainty_stage(method, runner):
        named = [(name, runner(name)) for name, _, _ in plans]
        outputs = _run_jobs(report, method, named, jobs)
        for name in sorted(outputs):
            out = outputs[name]
            for basin_id, var in sorted(out.sd):
                report.tables["uncertainty"].append({
                    "model": name, "method": method, "basin": basin_id,
                    "variable": var, "runs": int(out.runs),
                    "mean_kge": float(out.mean_kge[(basin_id, var)]),
                    "sd_kge": float(out.sd[(basin_id, var)]),
                })

    def stage_tta():
        def runner(name):
            return lambda: tta_uncertainty(
                state["models"][name], state["prepared"],
                state["dataset"], state["split"].test,
                noise_sigma=options["noise_sigma"],
                n_runs=options["n_runs"], scope=options["tta_scope"],
                seed=seed_stream(config.seed, ["tta", name]))
        _uncertainty_stage("tta", runner)

    def stage_mc_dropout():
        def runner(name):
            return lambda: mc_dropout_uncertainty(
                state["models"][name], state["prepared"],
                state["dataset"], state["split"].test,
                p=options["dropout_p"], n_runs=options["n_runs"],
                seed=seed_stream(config.seed, ["mc_dropout", name]))
        _uncertainty_stage("mc_dropout", runner)

    def _attribution_stage(method, runner):
        named = [(name, runner(name)) for name, _, _ in plans]
        outputs = _run_jobs(report, method, named, jobs)
        for name in sorted(outputs):
            out = outputs[name]
            for var in sorted(out.raw):
                for group in sorted(out.raw[var]):
                    report.tables["attribution"].append({
                        "model": name, "method": method,
                        "variable": var, "group": group,
                        "importance": float(out.raw[var][group]),
                        "share": float(out.shares[var][group]),
                    })

    def stage_ablation():
        def runner(name):
            plan = next(p for p in plans if p[0] == name)
            return lambda: ablation_importance(
                plan[1], state["dataset"], config.split_plan(),
                groups=tuple(options["attribution_groups"]),
                train_config=train_config,
                seed=seed_stream(config.seed, ["ablation", name]),
                min_kge=options["min_kge"], **plan[2])
        _attribution_stage("ablation", runner)

    def stage_traverse():
        def runner(name):
            plan = next(p for p in plans if p[0] == name)
            return lambda: traverse_importance(
                plan[1], state["dataset"], config.split_plan(),
                groups=tuple(options["attribution_groups"]),
                train_config=train_config,
                seed=seed_stream(config.seed, ["traverse", name]),
                min_kge=options["min_kge"], **plan[2])
        _attribution_stage("traverse", runner)

    def stage_integrated_gradients():
        def runner(name):
            return lambda: ig_group_aggregate(
                state["models"][name], state["prepared"],
                state["dataset"], state["split"].test,
                n_steps=options["ig_steps"],
                max_samples=options["ig_samples"],
                seed=seed_stream(config.seed,
                                 ["integrated_gradients", name]))
        _attribution_stage("integrated_gradients", runner)

    def stage_stats():
        report.tables["stats"].extend(_stats_rows(state["scores"]))

    core = [("data", stage_data), ("split", stage_split),
            ("prepare", stage_prepare), ("train", stage_train),
            ("baseline", stage_baseline)]
    protocol_stages = {
        "robustness": stage_robustness,
        "tta": stage_tta,
        "mc_dropout": stage_mc_dropout,
        "ablation": stage_ablation,
        "traverse": stage_traverse,
        "integrated_gradients": stage_integrated_gradients,
        "stats": stage_stats,
    }
    pipeline = core + [(p, protocol_stages[p]) for p in config.protocols]

    for index, (stage, fn) in enumerate(pipeline):
        try:
            fn()
        except _Abort:
            pass
        except Exception as exc:
            _record_failure(report, stage, stage, exc)
        if report.failed:
            for pending, _ in pipeline[index + 1:]:
                if pending in config.protocols:
                    report.failures.append({
                        "stage": pending, "job": "*",
                        "error": "not run: aborted after failure in "
                                 + stage,
                    })
            break
        report.completed.append(stage)

    for name, keys in _TABLE_SORT_KEYS.items():
        report.tables[name].sort(
            key=lambda row: tuple(row[k] for k in keys))
    report.figures = build_figures(report.tables,
                                   state.get("scatter", []))
    return report
