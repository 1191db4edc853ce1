import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relmargin.data import SyntheticSpec, TripletDataset, generate_synthetic
from relmargin.embeddings import init_table
from relmargin.errors import DataFormatError, DivergenceError, ShapeError
from relmargin.loss import LossSpec, batch_loss, make_batch
from relmargin.trainer import (
    AdamState,
    TelemetryRecord,
    TrainConfig,
    adam_step,
    early_stop,
    lr_at,
    read_telemetry,
    rolling_mean,
    telemetry_csv,
    train,
    write_telemetry,
)


def small_setup(n=40, seed=0):
    rng = np.random.default_rng(seed)
    qs = [f"q{k}" for k in range(5)]
    ds = [f"d{k}" for k in range(12)]
    triples = []
    for _ in range(n):
        q = qs[rng.integers(5)]
        p, d = rng.choice(12, 2, replace=False)
        triples.append((q, ds[p], ds[d]))
    return TripletDataset(triples), init_table(qs + ds, 6, seed)


# -- config ------------------------------------------------------------------


def test_config_default_lr():
    assert TrainConfig(batch_size=32).base_lr == 5e-6 / 32
    assert TrainConfig(base_lr=0.1).base_lr == 0.1


@pytest.mark.parametrize("kwargs", [dict(batch_size=0), dict(lr_gamma=0.0), dict(lr_gamma=1.5),
                                    dict(patience=0), dict(eval_every=0), dict(base_lr=-1.0),
                                    dict(max_steps=0), dict(max_epochs=0)])
def test_config_invalid(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


# -- adam ---------------------------------------------------------------------


def test_adam_zero_grad_from_zero_state_keeps_params():
    p = np.array([[1.0, -2.0]])
    st_ = AdamState.zeros(p.shape)
    adam_step(p, np.zeros_like(p), st_, lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(p, [[1.0, -2.0]])
    np.testing.assert_array_equal(st_.m, 0.0)
    assert st_.t[0] == 1


def test_adam_zero_grad_decays_moments():
    p = np.array([[1.0, -2.0]])
    st_ = AdamState.zeros(p.shape)
    st_.m[...] = 0.5
    st_.v[...] = 0.25
    adam_step(p, np.zeros_like(p), st_, lr=0.1, weight_decay=0.0)
    np.testing.assert_allclose(st_.m, 0.45)
    np.testing.assert_allclose(st_.v, 0.25 * 0.999)


def test_adam_first_step_is_signed_lr():
    g = np.array([[3.0, -1e-3, 250.0]])
    p = np.zeros_like(g)
    adam_step(p, g, AdamState.zeros(g.shape), lr=0.01, weight_decay=0.0)
    # m_hat = g, v_hat = g^2 so the step is -lr * g / (|g| + eps)
    np.testing.assert_allclose(p, -0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)
    np.testing.assert_allclose(p, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_weight_decay_isolation():
    p = np.array([[2.0, -4.0]])
    adam_step(p, np.zeros_like(p), AdamState.zeros(p.shape), lr=1.0, weight_decay=0.5)
    np.testing.assert_array_equal(p, [[1.0, -2.0]])


def test_adam_rows_are_lazy():
    p = np.ones((3, 2))
    st_ = AdamState.zeros(p.shape)
    adam_step(p, np.ones((1, 2)), st_, lr=0.1, weight_decay=0.0, rows=np.array([1]))
    np.testing.assert_array_equal(p[[0, 2]], 1.0)
    assert list(st_.t) == [0, 1, 0]
    assert np.all(p[1] < 1.0)


def test_adam_shape_mismatch():
    p = np.ones((3, 2))
    with pytest.raises(ShapeError):
        adam_step(p, np.ones((2, 2)), AdamState.zeros(p.shape), 0.1, 0.0)
    with pytest.raises(ShapeError):
        adam_step(p, np.ones((2, 2)), AdamState.zeros(p.shape), 0.1, 0.0, rows=np.array([0]))


# -- schedule and stopping -----------------------------------------------------


def test_lr_at_examples():
    assert lr_at(0, 3e-4, 0.5) == 3e-4
    assert lr_at(1234, 3e-4, 1.0) == 3e-4
    assert lr_at(100000, 1e-4, 0.99999) == pytest.approx(1e-4 * math.exp(100000 * math.log(0.99999)), rel=1e-12)
    assert lr_at(100000, 1e-4, 0.99999) == pytest.approx(3.6788e-5, abs=5e-10)
    with pytest.raises(ValueError):
        lr_at(-1, 1.0, 0.5)


def test_early_stop_examples():
    assert not early_stop(list(range(40)), 1)
    assert not early_stop(list(range(40)), 16)
    assert early_stop([0.9] + [0.5] * 16, 16)
    assert not early_stop([0.9] + [0.5] * 15, 16)
    assert not early_stop([0.9] + [0.5] * 15 + [0.95], 16)
    # the counter restarts after an improvement
    assert not early_stop([0.9] + [0.5] * 15 + [0.95] + [0.5] * 15, 16)
    assert early_stop([0.9] + [0.5] * 15 + [0.95] + [0.5] * 16, 16)
    with pytest.raises(ValueError):
        early_stop([1.0], 0)


def _simulate_counter(history, patience):
    best, since = -math.inf, 0
    for h in history:
        if h > best:
            best, since = h, 0
        else:
            since += 1
    return since >= patience


@given(st.lists(st.integers(0, 5), max_size=40), st.integers(1, 8))
def test_early_stop_matches_counter(history, patience):
    assert early_stop(history, patience) == _simulate_counter(history, patience)


def test_rolling_mean_examples():
    assert rolling_mean([]) == []
    assert rolling_mean([3.0, 1.0, 2.0], 1) == [3.0, 1.0, 2.0]
    assert rolling_mean([0.7] * 50) == pytest.approx([0.7] * 50, abs=1e-15)
    assert rolling_mean(list(range(1, 65)), 32)[63] == 48.5
    assert rolling_mean([2.0, 4.0, 9.0], 2) == [2.0, 3.0, 6.5]
    with pytest.raises(ValueError):
        rolling_mean([1.0], 0)


# -- training loop ----------------------------------------------------------------


def test_empty_and_missing_ids():
    _, table = small_setup()
    with pytest.raises(DataFormatError):
        train(TrainConfig(), LossSpec("static"), TripletDataset([]), table)
    with pytest.raises(DataFormatError):
        train(TrainConfig(), LossSpec("static"), TripletDataset([("zz", "d0", "d1")]), table)


def test_lr_zero_keeps_table():
    ds, table = small_setup()
    res = train(TrainConfig(batch_size=8, base_lr=0.0, weight_decay=0.0), LossSpec("adaptive"), ds, table)
    assert res.table == table
    assert res.table is not table


def test_telemetry_per_step_and_ordering():
    ds, table = small_setup(n=43)
    res = train(TrainConfig(batch_size=8, base_lr=1e-2, max_epochs=2), LossSpec("distributed"), ds, table)
    assert res.steps == 12 and len(res.telemetry) == 12
    assert [r.step for r in res.telemetry] == list(range(1, 13))
    for r in res.telemetry:
        assert -1.0 - 1e-12 <= r.target_min <= r.target_mean <= r.target_max <= 1.0 + 1e-12
    assert res.telemetry[1].lr == pytest.approx(1e-2 * 0.99999)


def test_only_batch_rows_change():
    ds, table = small_setup()
    first = TripletDataset(ds.triples[:4])
    res = train(TrainConfig(batch_size=4, base_lr=1e-2), LossSpec("adaptive"), first, table)
    touched = set(table.rows(first.ids()))
    for row in range(len(table)):
        same = np.array_equal(res.table.vectors[row], table.vectors[row])
        assert same == (row not in touched)


def test_fixed_queries_option():
    ds, table = small_setup()
    res = train(TrainConfig(batch_size=8, base_lr=1e-2, update_queries=False), LossSpec("adaptive"), ds, table)
    qrows = table.rows({t[0] for t in ds})
    np.testing.assert_array_equal(res.table.vectors[qrows], table.vectors[qrows])
    assert not res.table == table


def test_determinism():
    ds, table = small_setup()
    cfg = TrainConfig(batch_size=8, base_lr=1e-2, max_epochs=3)
    a = train(cfg, LossSpec("distributed"), ds, table)
    b = train(cfg, LossSpec("distributed"), ds, table)
    assert a.table == b.table
    assert telemetry_csv(a.telemetry) == telemetry_csv(b.telemetry)


def test_repeated_triplet_loss_non_increasing():
    _, table = small_setup()
    ds = TripletDataset([("q0", "d0", "d1")] * 100)
    res = train(TrainConfig(batch_size=1, base_lr=1e-4, weight_decay=0.0), LossSpec("adaptive"), ds, table)
    losses = [r.loss for r in res.telemetry]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_first_step_first_order_change():
    # the first ADAM step moves every entry by about -lr * sign(g), so the
    # loss drops by lr * |g|_1 to first order
    _, table = small_setup()
    ds = TripletDataset([("q0", "d0", "d1"), ("q1", "d2", "d3")])
    spec = LossSpec("adaptive")
    rows = [table.rows(c) for c in zip(*ds.triples)]
    batch = make_batch(*(table.vectors[r] for r in rows))
    from relmargin.loss import batch_loss_grad
    g = batch_loss_grad(spec, batch)
    l1 = sum(float(np.abs(x).sum()) for x in (g.queries, g.positives, g.negatives))
    lr = 1e-7
    res = train(TrainConfig(batch_size=2, base_lr=lr, weight_decay=0.0), spec, ds, table)
    after = batch_loss(spec, make_batch(*(res.table.vectors[r] for r in rows))).total
    assert after - g.total == pytest.approx(-lr * l1, rel=1e-3)


def test_eval_hook_early_stop_and_restore():
    ds, table = small_setup(n=400)
    scores = iter([0.5, 0.9, 0.3, 0.2, 0.1, 0.0] + [0.0] * 100)
    seen = []

    def hook(t):
        seen.append(t.vectors.copy())
        return next(scores)

    cfg = TrainConfig(batch_size=4, base_lr=1e-2, eval_every=5, patience=3, max_epochs=1)
    res = train(cfg, LossSpec("static"), ds, table, hook)
    assert res.stopped_early
    assert res.steps == 25
    assert res.best_step == 10 and res.best_metric == 0.9
    np.testing.assert_array_equal(res.table.vectors, seen[1])
    assert [r.eval_metric for r in res.telemetry if r.eval_metric is not None] == [0.5, 0.9, 0.3, 0.2, 0.1]


def test_final_check_after_last_step():
    ds, table = small_setup(n=30)
    calls = []
    cfg = TrainConfig(batch_size=4, base_lr=1e-2, eval_every=5)
    res = train(cfg, LossSpec("static"), ds, table, lambda t: calls.append(1) or float(len(calls)))
    assert res.steps == 8 and len(calls) == 2
    assert res.telemetry[-1].eval_metric == 2.0


def test_max_steps():
    ds, table = small_setup(n=40)
    res = train(TrainConfig(batch_size=4, base_lr=1e-2, max_epochs=10, max_steps=13), LossSpec("static"), ds, table)
    assert res.steps == 13


def test_divergence_reports_record():
    ds, table = small_setup()
    with pytest.raises(DivergenceError) as exc:
        train(TrainConfig(batch_size=8, base_lr=1e300, weight_decay=0.0, max_epochs=3), LossSpec("static"), ds, table)
    assert exc.value.record is None or not math.isfinite(exc.value.record.loss)


def test_telemetry_round_trip(tmp_path):
    recs = [TelemetryRecord(1, 0.5, 1e-3, 0.1, -0.2, 0.3), TelemetryRecord(2, 0.25, 9e-4, 0.0, -0.1, 0.1, 0.75)]
    write_telemetry(recs, tmp_path / "t.csv")
    text = (tmp_path / "t.csv").read_text()
    assert text.splitlines()[0] == "step,loss,lr,target_mean,target_min,target_max,eval_metric"
    assert text.splitlines()[1].endswith(",")
    assert read_telemetry(tmp_path / "t.csv") == recs


def test_read_telemetry_bad_header(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DataFormatError):
        read_telemetry(tmp_path / "t.csv")


@pytest.mark.slow
def test_target_mean_shrinks_from_high_start():
    corpus = generate_synthetic(SyntheticSpec(anisotropy=3.0))
    cfg = TrainConfig(batch_size=64, base_lr=3e-3, max_epochs=10 ** 6, max_steps=1500)
    res = train(cfg, LossSpec("distributed"), corpus.triplets, corpus.features)
    smooth = rolling_mean([r.target_mean for r in res.telemetry], 32)
    assert abs(smooth[31]) > 0.2
    assert abs(smooth[-1]) < abs(smooth[31])
