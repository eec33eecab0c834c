"""Acceptance suite: twelve release criteria, one test each.

Every test prints a single [PASS]/[FAIL] line with its measured runtime
and budget, so the suite output doubles as the acceptance record.  The
runtime budget is part of each criterion and is asserted.
"""

import itertools
import time
from contextlib import contextmanager

import numpy as np

import wqbench.corrupt as cr
import wqbench.ndcore as nd
import wqbench.stats as st
from wqbench.dataio import (
    PAPER_TEST_YEARS,
    SplitPlan,
    SynthConfig,
    SynthVariable,
    prepare,
    split,
    synthesize,
    synthesize_with_truth,
)
from wqbench.dataio.schema import datenum_days
from wqbench.harness import render_json, run, validate_config
from wqbench.metrics import kge, simplicity, theil_sen
from wqbench.models import (
    ATTENTION,
    OPERATOR,
    RECURRENT,
    CosineSchedule,
    ModelSpec,
    SampleBatch,
    StepSchedule,
    TrainConfig,
    assemble_batch,
    build,
    forward_batch,
    sample_index,
)
from wqbench.trust import (
    ablation_importance,
    ig_completeness,
    integrated_gradients,
    mc_dropout_uncertainty,
    robustness_sweep,
    train_family,
    traverse_importance,
    tta_uncertainty,
)

from oracles import (
    assert_close_grad,
    bh_adjust_by_hand,
    cles_brute_force,
    fd_gradient,
    kge_reference,
    theil_sen_enumeration,
    wilcoxon_exact_enumeration,
)


@contextmanager
def criterion(capsys, number, budget_seconds, description):
    """Time a criterion body and print one pass/fail line for it."""
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        elapsed = time.perf_counter() - t0
        assert elapsed < budget_seconds, (
            "criterion %d finished in %.1fs, over its %gs budget"
            % (number, elapsed, budget_seconds)
        )
        ok = True
    finally:
        elapsed = time.perf_counter() - t0
        with capsys.disabled():
            print(
                "\n[%s] criterion %2d (%7.2fs / %5gs): %s"
                % ("PASS" if ok else "FAIL", number, elapsed,
                   budget_seconds, description)
            )


def smoke_problem(variables, seed=11, n_basins=2, n_years=2):
    cfg = SynthConfig(n_basins=n_basins, n_years=n_years,
                      variables=variables)
    ds = synthesize(cfg, seed=seed)
    plan = SplitPlan(kind="temporal", test_years=(2000 + n_years - 1,))
    result = split(ds, plan)
    return ds, plan, result, prepare(ds, result.train)


FAST = TrainConfig(epochs=4, batch_size=64, lr=5e-3,
                   schedule=StepSchedule(decay=1.0, every=10**6))


# ---------------------------------------------------------------------------
# criterion 1: KGE oracle equivalence


def test_kge_matches_independent_oracle(capsys):
    with criterion(capsys, 1, 5.0,
                   "KGE equals an independent oracle on 1000 random pairs;"
                   " perfect and constant-mean cases are exact"):
        rng = np.random.default_rng(101)
        for _ in range(1000):
            mu = float(rng.uniform(0.5, 8.0) * rng.choice([-1.0, 1.0]))
            obs = rng.normal(mu, rng.uniform(0.2, 3.0), size=50)
            pred = obs * rng.uniform(0.5, 1.5) + rng.normal(
                0.0, rng.uniform(0.1, 2.0), size=50)
            assert abs(kge(obs, pred).kge - kge_reference(obs, pred)) < 1e-12

        for seed in range(5):
            obs = np.random.default_rng(seed).normal(3.0, 1.0, size=50)
            assert kge(obs, obs.copy()).kge == 1.0
            flat = kge(obs, np.full(50, obs.mean()))
            assert abs(flat.kge - (1.0 - np.sqrt(2.0))) < 1e-9

        # a mean that is exact in floating point takes the r := 0 branch
        obs = np.arange(1.0, 51.0)
        flat = kge(obs, np.full(50, obs.mean()))
        assert flat.r == 0.0 and flat.gamma == 0.0 and flat.beta == 1.0
        assert abs(flat.kge - (1.0 - np.sqrt(2.0))) < 1e-9


# ---------------------------------------------------------------------------
# criterion 2: gradient correctness everywhere


def _fd_check(build, arrays):
    tensors = [nd.Tensor(a, requires_grad=True) for a in arrays]

    def forward():
        return build([nd.Tensor(t.data) for t in tensors]).item()

    with nd.Tape() as tape:
        tape.backward(build(tensors))
    expected = fd_gradient(forward, [t.data for t in tensors])
    for t, e in zip(tensors, expected):
        grad = t.grad if t.grad is not None else np.zeros_like(e)
        assert_close_grad(grad, e)


# one randomly shaped scalar-valued embedding per differentiable op
ALL_OPS = (
    "add", "sub", "mul", "div", "neg", "exp", "log", "sqrt", "pow_const",
    "tanh", "sigmoid", "gelu", "leaky_relu", "softmax", "matmul", "tsum",
    "tmean", "broadcast_to", "reshape", "transpose", "concat", "narrow",
    "take_rows", "dropout", "stop_gradient",
)


def _op_cases(rng):
    m = int(rng.integers(2, 5))
    n = int(rng.integers(2, 5))
    k = int(rng.integers(2, 4))
    a = rng.normal(size=(m, n))
    b = rng.normal(size=(m, n))
    safe_b = np.sign(b) * (np.abs(b) + 0.5)
    pos = rng.uniform(0.2, 2.5, size=(m, n))
    w = rng.normal(size=(m, n))
    away = np.where(np.abs(a) < 0.1, 0.2, a)  # clear of the relu kink
    small = np.clip(a, -1.5, 1.5)
    am = rng.normal(size=(m, k))
    bm = rng.normal(size=(k, n))
    vec = rng.normal(size=(n,))
    wt = rng.normal(size=(n, m))
    idx = [int(i) for i in rng.integers(0, m, size=m + 1)]
    w_rows = rng.normal(size=(m + 1, n))
    exponent = float(rng.choice([1.5, 2.0, 3.0, -1.0]))
    axis = int(rng.integers(0, 2))
    red_axis = [None, 0, 1][int(rng.integers(0, 3))]
    keep = bool(rng.integers(0, 2))
    start = int(rng.integers(0, m - 1))
    length = int(rng.integers(1, m - start + 1))
    p_drop = float(rng.uniform(0.1, 0.6))
    drop_seed = int(rng.integers(0, 2**32))

    def reduced(op, ts):
        out = op(ts[0], axis=red_axis, keepdims=keep)
        return nd.tsum(nd.mul(out, out))

    return {
        "add": (lambda ts: nd.tsum(nd.mul(nd.add(ts[0], ts[1]), ts[0])),
                [a, b]),
        "sub": (lambda ts: nd.tsum(nd.mul(nd.sub(ts[0], ts[1]), ts[1])),
                [a, b]),
        "mul": (lambda ts: nd.tsum(nd.mul(nd.mul(ts[0], ts[1]), ts[0])),
                [a, b]),
        "div": (lambda ts: nd.tsum(nd.div(ts[0], ts[1])), [a, safe_b]),
        "neg": (lambda ts: nd.tsum(nd.tanh(nd.neg(ts[0]))), [a]),
        "exp": (lambda ts: nd.tsum(nd.exp(ts[0])), [small]),
        "log": (lambda ts: nd.tsum(nd.mul(nd.log(ts[0]), ts[0])), [pos]),
        "sqrt": (lambda ts: nd.tsum(nd.sqrt(ts[0])), [pos]),
        "pow_const": (lambda ts: nd.tsum(nd.pow_const(ts[0], exponent)),
                      [pos]),
        "tanh": (lambda ts: nd.tsum(nd.tanh(ts[0])), [a]),
        "sigmoid": (lambda ts: nd.tsum(nd.sigmoid(ts[0])), [a]),
        "gelu": (lambda ts: nd.tsum(nd.gelu(ts[0])), [a]),
        "leaky_relu": (lambda ts: nd.tsum(nd.leaky_relu(ts[0])), [away]),
        "softmax": (
            lambda ts: nd.tsum(nd.mul(nd.softmax(ts[0], axis=axis),
                                      nd.Tensor(w))),
            [a],
        ),
        "matmul": (lambda ts: nd.tsum(nd.tanh(nd.matmul(ts[0], ts[1]))),
                   [am, bm]),
        "tsum": (lambda ts: reduced(nd.tsum, ts), [a]),
        "tmean": (lambda ts: reduced(nd.tmean, ts), [a]),
        "broadcast_to": (
            lambda ts: nd.tsum(nd.mul(nd.broadcast_to(ts[0], (m, n)),
                                      nd.tanh(ts[1]))),
            [vec, a],
        ),
        "reshape": (
            lambda ts: nd.tsum(nd.pow_const(nd.reshape(ts[0], (m * n,)),
                                            2.0)),
            [a],
        ),
        "transpose": (
            lambda ts: nd.tsum(nd.mul(nd.transpose(ts[0]), nd.Tensor(wt))),
            [a],
        ),
        "concat": (
            lambda ts: nd.tsum(nd.tanh(nd.concat([ts[0], ts[1]],
                                                 axis=axis))),
            [a, b],
        ),
        "narrow": (
            lambda ts: nd.tsum(nd.tanh(nd.narrow(ts[0], 0, start, length))),
            [a],
        ),
        "take_rows": (
            lambda ts: nd.tsum(nd.mul(nd.take_rows(ts[0], idx),
                                      nd.Tensor(w_rows))),
            [a],
        ),
        "dropout": (
            lambda ts: nd.tsum(
                nd.mul(nd.dropout(ts[0], p_drop,
                                  np.random.default_rng(drop_seed)),
                       nd.Tensor(w))
            ),
            [a],
        ),
        "stop_gradient": (
            lambda ts: nd.tsum(nd.mul(ts[0], nd.stop_gradient(nd.Tensor(w)))),
            [a],
        ),
    }


def _random_family_spec(family, rng):
    nf = int(rng.integers(2, 4))
    ns = int(rng.integers(1, 3))
    nt = int(rng.integers(1, 3))
    if family == RECURRENT:
        return ModelSpec(family=RECURRENT, n_dynamic_features=nf,
                         n_static_features=ns, n_targets=nt,
                         seq_len=int(rng.integers(2, 5)),
                         hidden=int(rng.integers(2, 5)),
                         layers=int(rng.integers(1, 3)))
    if family == OPERATOR:
        return ModelSpec(family=OPERATOR, n_dynamic_features=nf,
                         n_static_features=ns, n_targets=nt,
                         hidden=int(rng.integers(2, 7)))
    return ModelSpec(family=ATTENTION, n_dynamic_features=nf,
                     n_static_features=ns, n_targets=nt,
                     seq_len=int(rng.integers(3, 5)), decoder_window=2,
                     hidden=2, heads=1, ff_dim=int(rng.integers(4, 7)))


def _random_family_inputs(spec, batch, rng):
    inputs = {"static": rng.normal(size=(batch, spec.n_static_features))}
    if spec.family == RECURRENT:
        inputs["dynamic"] = rng.normal(
            size=(batch, spec.seq_len, spec.n_dynamic_features))
    elif spec.family == OPERATOR:
        inputs["dynamic"] = rng.normal(
            size=(batch, spec.n_dynamic_features))
        inputs["coords"] = rng.normal(size=(batch, 2))
    else:
        inputs["history"] = rng.normal(
            size=(batch, spec.seq_len, spec.n_dynamic_features))
        inputs["recent"] = rng.normal(
            size=(batch, spec.decoder_window, spec.n_dynamic_features))
        inputs["now"] = rng.normal(size=(batch, spec.n_dynamic_features))
    return inputs


def _check_family_fd(family, trial):
    rng = np.random.default_rng(5000 + trial)
    spec = _random_family_spec(family, rng)
    model = build(spec, seed=int(rng.integers(0, 1000)))
    batch = 1 if family == ATTENTION else int(rng.integers(1, 3))
    arrays = _random_family_inputs(spec, batch, rng)
    tensors = {k: nd.Tensor(v, requires_grad=True)
               for k, v in arrays.items()}

    with nd.Tape() as tape:
        out = forward_batch(model, tensors)
        tape.backward(nd.tsum(nd.mul(out, out)))

    def scalar():
        value = forward_batch(
            model, {k: nd.Tensor(v) for k, v in arrays.items()})
        return float(np.sum(value.data * value.data))

    names = sorted(model.parameters)
    for name, e in zip(names, fd_gradient(
            scalar, [model.parameters[n].data for n in names])):
        actual = model.parameters[name].grad
        if actual is None:
            actual = np.zeros_like(e)
        assert_close_grad(actual, e)
    keys = sorted(arrays)
    for key, e in zip(keys, fd_gradient(scalar,
                                        [arrays[k] for k in keys])):
        assert_close_grad(tensors[key].grad, e)


def test_gradients_match_finite_differences(capsys):
    with criterion(capsys, 2, 60.0,
                   "reverse-mode gradients match central differences for"
                   " every tensor op and every model family forward"):
        for trial in range(20):
            cases = _op_cases(np.random.default_rng(1000 + trial))
            assert set(cases) == set(ALL_OPS)
            for name in ALL_OPS:
                build_fn, arrays = cases[name]
                _fd_check(build_fn, arrays)
        for family in (RECURRENT, OPERATOR, ATTENTION):
            for trial in range(20):
                _check_family_fd(family, trial)


# ---------------------------------------------------------------------------
# criterion 3: integrated-gradients completeness


def test_integrated_gradients_completeness(capsys):
    with criterion(capsys, 3, 30.0,
                   "attributions sum to the prediction gap at 256 steps;"
                   " linear attribution is closed-form"):
        ds, plan, result, prepared = smoke_problem(
            (SynthVariable("conc", gamma=0.05),))
        for family, kw in (
                (RECURRENT, dict(seq_len=6, hidden=8, layers=1)),
                (OPERATOR, dict(hidden=8)),
                (ATTENTION, dict(seq_len=6, decoder_window=3, hidden=8,
                                 heads=2, ff_dim=16))):
            model = train_family(family, prepared, result.train,
                                 train_config=FAST, seed=1, **kw)
            sample = sample_index(prepared, result.test)[:1]
            batch = assemble_batch(model.spec, prepared, sample)
            assert ig_completeness(model, batch.inputs, n_steps=256) <= 1e-3

        w = np.array([[1.25], [-0.5], [2.0]])

        class Linear:
            class spec:
                family = "linear"

        def forward(model, tensors):
            return nd.matmul(tensors["x"], nd.Tensor(w))

        x = np.array([[3.0, -4.0, 1.5]])
        ig = integrated_gradients(Linear(), {"x": x},
                                  baseline={"x": np.zeros((1, 3))},
                                  n_steps=64, forward=forward)
        assert np.max(np.abs(ig["x"] - w[:, 0] * x[0])) < 1e-6


# ---------------------------------------------------------------------------
# criterion 4: projected-gradient attack contract


def test_pgd_attack_contract(capsys):
    with criterion(capsys, 4, 30.0,
                   "PGD deltas respect the L-inf budget machine-exactly,"
                   " the attacked loss never decreases, and the linear"
                   " one-step direction is step*sign(w)"):
        ds, plan, result, prepared = smoke_problem(
            (SynthVariable("conc", gamma=0.05),))
        model = train_family(OPERATOR, prepared, result.train,
                             train_config=TrainConfig(epochs=2,
                                                      batch_size=64,
                                                      lr=3e-3),
                             seed=4, hidden=8)
        samples = sample_index(prepared, result.train)[:64]
        batch = assemble_batch(model.spec, prepared, samples)
        spec = cr.CorruptionSpec(kind=cr.ADVERSARIAL, fraction=0.5,
                                 epsilon=0.1, step=0.025, iters=10, seed=3)
        attack = cr.pgd_attack(model, batch, spec)
        delta = attack.inputs["dynamic"] - batch.inputs["dynamic"]
        assert np.max(np.abs(delta)) <= spec.epsilon
        assert len(attack.losses) == spec.iters + 1
        assert all(b >= a for a, b in zip(attack.losses,
                                          attack.losses[1:]))

        w = np.array([[1.5], [-2.0], [0.7], [-0.1]])

        class LinearModel:
            class spec:
                family = "linear"

        def forward(model, tensors):
            return nd.matmul(tensors["dynamic"], nd.Tensor(w))

        rng = np.random.default_rng(17)
        x = rng.normal(size=(8, 4))
        linear_batch = SampleBatch(
            inputs={"dynamic": x},
            fill={"dynamic": np.zeros((8, 4), dtype=bool)},
            targets=x @ w - 5.0,  # positive residual on every row
            mask=np.ones((8, 1), dtype=bool),
            samples=[("b", i) for i in range(8)],
        )
        one = cr.CorruptionSpec(kind=cr.ADVERSARIAL, fraction=0.5,
                                epsilon=1.0, step=0.025, iters=1, seed=2)
        hit = cr.pgd_attack(LinearModel(), linear_batch, one,
                            forward=forward)
        expected = one.step * np.sign(w[:, 0])
        for row in hit.rows:
            assert np.array_equal(hit.inputs["dynamic"][row],
                                  x[row] + expected)


# ---------------------------------------------------------------------------
# criterion 5: corruption preset exactness


def test_corruption_presets_touch_exact_row_counts(capsys):
    with criterion(capsys, 5, 10.0,
                   "every corruption preset modifies exactly"
                   " round(fraction*N) rows and leaves the rest"
                   " bit-identical"):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(100, 3))
        for kind in (cr.OUTLIER, cr.NOISE):
            for fraction in cr.CORRUPTION_PRESETS[kind]:
                spec = cr.CorruptionSpec(kind=kind, fraction=fraction,
                                         seed=7)
                if kind == cr.OUTLIER:
                    result = cr.inject_outliers(data, None, spec)
                else:
                    result = cr.inject_noise(data, spec)
                expected = int(np.floor(fraction * 100 + 0.5))
                changed = np.flatnonzero(np.any(result.data != data, axis=1))
                assert result.rows.size == expected
                assert np.array_equal(np.sort(result.rows), changed)
                untouched = np.setdiff1d(np.arange(100), result.rows)
                assert np.array_equal(result.data[untouched],
                                      data[untouched])

        ds, plan, result, prepared = smoke_problem(
            (SynthVariable("conc", gamma=0.05),))
        model = train_family(OPERATOR, prepared, result.train,
                             train_config=FAST, seed=4, hidden=8)
        samples = sample_index(prepared, result.train)[:64]
        batch = assemble_batch(model.spec, prepared, samples)
        for fraction in cr.CORRUPTION_PRESETS[cr.ADVERSARIAL]:
            spec = cr.CorruptionSpec(kind=cr.ADVERSARIAL, fraction=fraction,
                                     epsilon=0.1, step=0.025, iters=10,
                                     seed=9)
            attack = cr.pgd_attack(model, batch, spec)
            expected = int(np.floor(fraction * 64 + 0.5))
            diff = np.any(
                attack.inputs["dynamic"] != batch.inputs["dynamic"],
                axis=tuple(range(1, batch.inputs["dynamic"].ndim)))
            assert attack.rows.size == expected
            assert np.array_equal(np.flatnonzero(diff),
                                  np.sort(attack.rows))


# ---------------------------------------------------------------------------
# criterion 6: uncertainty degenerate cases


def test_uncertainty_degenerate_cases(capsys):
    with criterion(capsys, 6, 120.0,
                   "zero augmentation noise and zero dropout give SD of"
                   " KGE exactly 0 over 50 runs; sigma=0.1 gives SD > 0"):
        ds, plan, result, prepared = smoke_problem(
            (SynthVariable("conc", alpha=1.5, beta1=0.0, beta2=0.0,
                           gamma=0.05),))
        model = train_family(
            RECURRENT, prepared, result.train,
            train_config=TrainConfig(epochs=8, batch_size=64, lr=7e-3,
                                     schedule=CosineSchedule()),
            seed=2, seq_len=8, hidden=8, layers=1)

        silent = tta_uncertainty(model, prepared, ds, result.test,
                                 noise_sigma=0.0, n_runs=50, seed=5)
        assert silent.runs == 50
        assert all(v == 0.0 for v in silent.sd.values())

        frozen = mc_dropout_uncertainty(model, prepared, ds, result.test,
                                        p=0.0, n_runs=50, seed=5)
        assert frozen.runs == 50
        assert all(v == 0.0 for v in frozen.sd.values())

        noisy = tta_uncertainty(model, prepared, ds, result.test,
                                noise_sigma=0.1, n_runs=50, seed=5)
        assert noisy.sd
        assert all(v > 0.0 for v in noisy.sd.values())


# ---------------------------------------------------------------------------
# criterion 7: statistics enumeration oracles


def test_statistics_match_enumeration_oracles(capsys):
    with criterion(capsys, 7, 10.0,
                   "Wilcoxon, CLES, BH adjustment and Theil-Sen agree"
                   " with brute-force enumeration"):
        rng = np.random.default_rng(33)
        for n in range(5, 13):
            for rep in range(3):
                diffs = rng.normal(0.3, 1.0, size=n)
                diffs[1] = -diffs[0]  # force a tie in |d|
                for alt in ("two-sided", "greater", "less"):
                    got = st.wilcoxon_signed_rank(diffs, alternative=alt)
                    w_ref, p_ref = wilcoxon_exact_enumeration(diffs, alt)
                    assert got.method == "exact"
                    assert got.statistic == w_ref
                    assert abs(got.p_value - p_ref) < 1e-12

        for rep in range(10):
            a = np.round(rng.normal(size=rng.integers(3, 15)), 1)
            b = np.round(rng.normal(size=rng.integers(3, 15)), 1)
            assert abs(st.cles(a, b) - cles_brute_force(a, b)) < 1e-12

        # dyadic values keep the hand arithmetic float-exact
        assert np.array_equal(st.bh_fdr([0.125, 0.25, 0.5]),
                              [0.375, 0.375, 0.5])
        assert np.array_equal(st.bh_fdr([0.5, 0.125, 0.25]),
                              [0.5, 0.375, 0.375])
        for rep in range(10):
            p = rng.uniform(0.0, 1.0, size=rng.integers(1, 12))
            assert np.array_equal(st.bh_fdr(p), bh_adjust_by_hand(p))

        for rep in range(10):
            n = int(rng.integers(3, 13))
            x = rng.permutation(np.arange(n, dtype=float))
            y = 0.7 * x + rng.normal(0.0, 0.5, size=n)
            assert theil_sen(x, y) == theil_sen_enumeration(x, y)


# ---------------------------------------------------------------------------
# criterion 8: simplicity index on calibrated generators


def test_simplicity_recovers_known_variance_fractions(capsys):
    with criterion(capsys, 8, 10.0,
                   "the simplicity index lands within 0.05 of analytic"
                   " variance fractions 0, 0.5 and 1"):
        variables = (
            SynthVariable("half", alpha=1.0, beta1=0.6, beta2=0.4,
                          target_simplicity=0.5),
            SynthVariable("one", alpha=1.0, beta1=0.6, beta2=0.4,
                          target_simplicity=1.0),
            SynthVariable("zero", alpha=0.0, beta1=0.0, beta2=0.0,
                          gamma=1.0),
        )
        dataset, truth = synthesize_with_truth(
            SynthConfig(n_basins=3, n_years=4, variables=variables),
            seed=13)
        target = {"half": 0.5, "one": 1.0, "zero": 0.0}
        t = datenum_days(dataset.dates)
        q_col = dataset.dynamic_names.index("runoff")
        for record in dataset.basins:
            q = record.dynamics[:, q_col]
            for k, name in enumerate(dataset.target_names):
                est = simplicity(q, record.targets[:, k], t).simplicity
                assert abs(est - target[name]) <= 0.05


# ---------------------------------------------------------------------------
# criterion 9: target outliers hurt more than feature outliers


def test_target_outliers_degrade_more_than_feature_outliers(capsys):
    with criterion(capsys, 9, 900.0,
                   "median KGE drop from 30% target outliers exceeds the"
                   " drop from 30% feature outliers (recurrent family)"):
        variables = tuple(
            SynthVariable(name, gamma=0.15)
            for name in ("no3", "so4", "cl", "temp", "doc"))
        ds = synthesize(SynthConfig(n_basins=8, n_years=2,
                                    variables=variables), seed=21)
        plan = SplitPlan(kind="temporal", test_years=(2001,))
        tc = TrainConfig(epochs=12, batch_size=64, lr=7e-3,
                         schedule=CosineSchedule())
        kw = dict(seq_len=10, hidden=16, layers=1)

        curves = {}
        for side in (cr.TARGETS, cr.FEATURES):
            spec = cr.CorruptionSpec(kind=cr.OUTLIER, side=side,
                                     fraction=0.3, seed=17)
            curves[side] = robustness_sweep(
                RECURRENT, ds, [spec], plan, train_config=tc, seed=3, **kw)
        target_change = curves[cr.TARGETS].median_pct_change[1]
        feature_change = curves[cr.FEATURES].median_pct_change[1]
        assert curves[cr.TARGETS].n_pairs >= 20
        assert target_change < feature_change


# ---------------------------------------------------------------------------
# criterion 10: redundant twin signals mask ablation importance


def test_duplicated_signal_traverse_exceeds_ablation(capsys):
    with criterion(capsys, 10, 900.0,
                   "with the meteorology signal duplicated into runoff,"
                   " traverse importance of M strictly exceeds its"
                   " ablation importance"):
        cfg = SynthConfig(
            n_basins=2, n_years=3, start_year=2000,
            duplicate_m_into_q=True,
            variables=(SynthVariable("conc", alpha=1.5, beta1=0.0,
                                     beta2=0.0, gamma=0.05),))
        ds = synthesize(cfg, seed=11)
        plan = SplitPlan(kind="temporal", test_years=(2002,))
        tc = TrainConfig(epochs=300, batch_size=64, lr=8e-3,
                         schedule=CosineSchedule())
        kw = dict(seq_len=8, hidden=16, layers=1)
        groups = ("M", "Q", "RC")

        abl = ablation_importance(RECURRENT, ds, plan, groups=groups,
                                  train_config=tc, seed=4, **kw)
        trav = traverse_importance(RECURRENT, ds, plan, groups=groups,
                                   train_config=tc, seed=4, **kw)
        assert trav.raw["conc"]["M"] > abl.raw["conc"]["M"]


# ---------------------------------------------------------------------------
# criterion 11: byte-identical reports from identical runs


def test_identical_runs_produce_byte_identical_reports(capsys):
    with criterion(capsys, 11, 1200.0,
                   "two pipeline runs with the same config and seed emit"
                   " byte-identical report bodies"):
        raw = {
            "seed": 7,
            "source": {"kind": "synth", "n_basins": 2, "n_years": 2,
                       "variables": [{"name": "conc", "gamma": 0.05}]},
            "split": {"kind": "temporal", "test_years": [2001]},
            "models": [
                {"family": "operator", "hidden": 8},
                {"family": "recurrent", "seq_len": 8, "hidden": 8,
                 "layers": 2, "dropout": 0.3},
            ],
            "train": {"epochs": 2, "batch_size": 64, "lr": 5e-3,
                      "schedule": {"kind": "step", "decay": 1.0,
                                   "every": 1000}},
            "corruptions": [{"kind": "noise", "side": "features",
                             "levels": [0.3], "noise_sigma": 0.3}],
            "protocols": ["robustness", "tta", "mc_dropout", "ablation",
                          "traverse", "integrated_gradients", "stats"],
            "options": {"n_runs": 3, "ig_steps": 8, "ig_samples": 4,
                        "attribution_groups": ["Q", "M"],
                        "min_kge": -100.0},
        }
        cfg = validate_config(raw)
        first = run(cfg, jobs=2)
        second = run(cfg, jobs=2)
        assert not first.failures
        assert set(cfg.protocols) <= set(first.completed)
        body_one = render_json(first)
        body_two = render_json(second)
        assert body_one == body_two


# ---------------------------------------------------------------------------
# criterion 12: split placement contracts


def test_split_plans_place_rows_and_basins_exactly(capsys):
    with criterion(capsys, 12, 5.0,
                   "temporal splits isolate exactly the requested years;"
                   " spatial splits are disjoint with 80/20 strata"):
        ds = synthesize(SynthConfig(n_basins=2, start_year=1979,
                                    n_years=37), seed=0)
        plan = SplitPlan(kind="temporal", test_years=PAPER_TEST_YEARS)
        result = split(ds, plan)
        years = ds.dates.astype("datetime64[Y]").astype(int) + 1970
        wanted = set(PAPER_TEST_YEARS)
        for basin_id in ds.basin_ids:
            test_mask = result.test[basin_id]
            assert set(np.unique(years[test_mask]).tolist()) == wanted
            assert not np.any(np.isin(years[~test_mask], list(wanted)))
            assert not np.any(result.train[basin_id] & test_mask)
            assert np.all(result.train[basin_id] | test_mask)

        wide = synthesize(SynthConfig(n_basins=20, n_years=1), seed=0)
        spatial = split(wide, SplitPlan(kind="spatial", test_fraction=0.2,
                                        seed=7))
        assert not set(spatial.test_basins) & set(spatial.train_basins)
        assert (sorted(spatial.test_basins + spatial.train_basins)
                == sorted(wide.basin_ids))
        strata = {}
        for record in wide.basins:
            strata.setdefault(record.land_use, []).append(record.id)
        for land_use, members in strata.items():
            picked = sum(1 for b in spatial.test_basins if b in members)
            assert picked == max(1, int(np.floor(0.2 * len(members))))
