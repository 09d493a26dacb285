import copy
import json
import math
import pickle

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import random_stream
from oracle import ReplayOracle

from enhash.learner import (
    BucketState,
    ConfigError,
    EnhashConfig,
    EnhashModel,
    ProjectionEstimator,
    class_mean,
    decay_factor,
    hash_code,
    init_model,
    make_variant,
    model_footprint,
)
from enhash.stream import LabeledInstance, StreamDescriptor


def single_estimator(weights, bias=0.0, bin_width=0.1, **cfg):
    model = EnhashModel(len(weights), EnhashConfig(num_estimators=1, bin_width=bin_width, **cfg))
    model._set_projection(np.array([weights], dtype=float), [bias])
    return model


# --- configuration and initialisation -------------------------------------------

def test_init_is_deterministic_per_seed():
    a = init_model(StreamDescriptor(3), EnhashConfig(seed=7))
    b = init_model(StreamDescriptor(3), EnhashConfig(seed=7))
    c = init_model(StreamDescriptor(3), EnhashConfig(seed=8))
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.biases.tobytes() == b.biases.tobytes()
    assert a.weights.tobytes() != c.weights.tobytes()


def test_init_shapes_and_bias_range():
    model = init_model(StreamDescriptor(2), EnhashConfig(num_estimators=10, bin_width=0.1))
    assert model.weights.shape == (10, 2)
    assert len(model.estimators) == 10
    assert np.all(np.abs(model.biases) <= 0.1)
    assert model.step == 0
    assert all(store == {} for store in model.buckets)


def test_estimator_substreams_are_independent_of_L():
    # estimator l draws from its own substream, so growing L keeps the first ones
    small = EnhashModel(4, EnhashConfig(num_estimators=3, seed=5))
    large = EnhashModel(4, EnhashConfig(num_estimators=9, seed=5))
    assert np.array_equal(small.weights, large.weights[:3])


def test_weights_look_standard_normal():
    model = EnhashModel(50, EnhashConfig(num_estimators=200, seed=1))
    w = model.weights.ravel()
    assert abs(w.mean()) < 0.02
    assert abs(w.std() - 1) < 0.02


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"bin_width": 0}, "bin_width"),
        ({"bin_width": -1.0}, "bin_width"),
        ({"num_estimators": 0}, "num_estimators"),
        ({"decay_rate": -0.1}, "decay_rate"),
        ({"distance_epsilon": 0.0}, "distance_epsilon"),
        ({"variant": "bogus"}, "variant"),
    ],
)
def test_invalid_config(kwargs, field):
    with pytest.raises(ConfigError, match=field):
        EnhashConfig(**kwargs)


def test_config_reports_every_problem():
    with pytest.raises(ConfigError) as info:
        EnhashConfig(bin_width=0, num_estimators=0)
    assert "bin_width" in str(info.value) and "num_estimators" in str(info.value)


def test_make_variant():
    c = EnhashConfig(decay_rate=0.015)
    assert make_variant(c, "full") == c
    assert make_variant(c, "lambda0").effective_decay == 0.0
    assert make_variant(c, "lambda0").decay_rate == 0.015
    assert not make_variant(c, "no_weights").uses_distance
    with pytest.raises(ConfigError):
        make_variant(c, "other")


# --- hashing ------------------------------------------------------------------------

def test_hash_code_examples():
    est = ProjectionEstimator(np.array([1.0, 0.0]), 0.0, 0.1)
    assert hash_code(est, [0.25, 7.0]) == 2
    assert hash_code(est, [-0.05, 3.0]) == -1
    assert hash_code(est, [0.0, 0.0]) == 0


def test_hash_code_overflow():
    est = ProjectionEstimator(np.array([1.0]), 0.0, 1e-300)
    with pytest.raises(OverflowError):
        hash_code(est, [1.0])
    model = single_estimator([1.0], bin_width=1e-300)
    with pytest.raises(OverflowError, match="instance 2"):
        model.hash_codes_batch(np.array([[0.0], [1.0]]))


def test_hash_code_dimension_mismatch():
    est = ProjectionEstimator(np.array([1.0, 0.0]), 0.0, 0.1)
    with pytest.raises(ValueError):
        hash_code(est, [1.0])


@settings(max_examples=300, deadline=None)
@given(
    d=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
    scale=st.sampled_from([0.01, 1.0, 100.0]),
    bin_width=st.sampled_from([0.001, 0.1, 2.0]),
)
def test_hash_shift_moves_exactly_one_bucket(d, seed, scale, bin_width):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    bias = rng.uniform(-bin_width, bin_width)
    x = scale * rng.standard_normal(d)
    frac = ((w @ x + bias) / bin_width) % 1.0
    assume(0.01 < frac < 0.99)
    est = ProjectionEstimator(w, bias, bin_width)
    shifted = x + (bin_width / (w @ w)) * w
    assert hash_code(est, shifted) == hash_code(est, x) + 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 12), n=st.integers(1, 50))
def test_batch_codes_match_single_codes(seed, d, n):
    rng = np.random.default_rng(seed)
    model = EnhashModel(d, EnhashConfig(num_estimators=7, seed=seed % 1000, bin_width=0.05))
    X = rng.standard_normal((n, d))
    batch = model.hash_codes_batch(X)
    for i in range(n):
        single = model.hash_codes(X[i])
        assert batch[i] == single
        assert single == [hash_code(e, X[i]) for e in model.estimators]


# --- decay and class means -------------------------------------------------------------

def test_decay_factor():
    assert decay_factor(0.3, 0) == 1.0
    assert decay_factor(0.0, 12345) == 1.0
    assert decay_factor(0.015, 200) == 0.125


def test_class_mean():
    b = BucketState(sample_counts={0: 1}, sample_sums={0: np.array([1.0, 2.0])})
    assert np.array_equal(class_mean(b, 0), [1.0, 2.0])
    b = BucketState(sample_counts={0: 2}, sample_sums={0: np.array([0.0, 0.0]) + np.array([2.0, 2.0])})
    assert np.array_equal(class_mean(b, 0), [1.0, 1.0])
    with pytest.raises(KeyError):
        class_mean(b, 5)


def test_class_mean_matches_batch_mean(rng):
    model = EnhashModel(3, EnhashConfig(num_estimators=1, bin_width=1e6))
    X = rng.random((100, 3))
    for x in X:
        model.update(x, 0)
    (bucket,) = model.buckets[0].values()
    assert np.allclose(class_mean(bucket, 0), X.mean(axis=0), rtol=0, atol=1e-12)


# --- update ---------------------------------------------------------------------------

def test_update_examples():
    model = single_estimator([0.0], decay_rate=0.0)
    model.update([0.5], 0)
    (bucket,) = model.buckets[0].values()
    assert bucket.counts == {0: 1.0}
    model.update([0.5], 1)
    assert bucket.counts == {0: 0.5, 1: 0.5}

    model = single_estimator([0.0], decay_rate=0.0)
    model.update([0.5], 0)
    model.update([0.5], 0)
    (bucket,) = model.buckets[0].values()
    assert bucket.counts == {0: 1.0}
    assert bucket.sample_counts == {0: 2}
    assert bucket.tstamp == {0: 2}


def test_update_decays_stale_class():
    # lambda = 0.015: A seen at t=1, B at t=2, A again at t=201 -> A's prior decays by 2^-3
    model = single_estimator([0.0], decay_rate=0.015)
    model.update([0.0], 0)
    model.update([0.0], 1)
    (bucket,) = model.buckets[0].values()
    assert bucket.counts[0] == pytest.approx(0.5)
    model.step = 200
    model.update([0.0], 0)
    raw = {0: 1 + 0.125 * 0.5, 1: 0.5}
    total = sum(raw.values())
    assert bucket.counts[0] == pytest.approx(raw[0] / total, abs=1e-15)
    assert bucket.counts[1] == pytest.approx(raw[1] / total, abs=1e-15)


def test_update_registers_class_and_fallback():
    model = single_estimator([1.0])
    for y in [3, 1, 1, 3]:
        model.update([0.2], y)
    assert model.classes_seen == {1, 3}
    assert model.fallback_class == 1  # tie on counts -> smallest id
    model.update([0.2], 3)
    assert model.fallback_class == 3
    assert model.step == 5


def test_update_rejects_bad_input():
    model = single_estimator([1.0, 0.0])
    with pytest.raises(ValueError):
        model.update([1.0], 0)
    with pytest.raises(ValueError):
        model.update([1.0, float("nan")], 0)
    with pytest.raises(ValueError):
        model.update([1.0, 0.0], -1)


# --- predict ------------------------------------------------------------------------------

def test_predict_cold_start():
    model = EnhashModel(2, EnhashConfig())
    pred = model.predict([0.3, 0.4])
    assert pred.label == 0
    assert pred.class_weights == {}


def test_predict_single_class_bucket():
    model = single_estimator([1.0])
    model.update([0.51], 4)
    assert model.predict([0.52]).label == 4


def test_predict_empty_bucket_uses_fallback():
    model = single_estimator([1.0], bin_width=0.1)
    model.update([0.05], 2)
    model.update([0.06], 2)
    model.update([0.07], 5)
    pred = model.predict([10.0])
    assert pred.class_weights == {}
    assert pred.label == 2


def test_predict_distance_tie_break():
    # equal counts, x on A's mean and 1.0 away from B's mean
    model = single_estimator([0.0, 0.0], decay_rate=0.0, bin_width=1.0)
    model.update([0.0, 0.0], 1)   # class A = 1
    model.update([1.0, 0.0], 0)   # class B = 0
    (bucket,) = model.buckets[0].values()
    assert bucket.counts == {1: 0.5, 0: 0.5}
    pred = model.predict([0.0, 0.0])
    eps = model.config.distance_epsilon
    assert pred.class_weights[1] == pytest.approx(math.log1p(0.5 / eps))
    assert pred.class_weights[0] == pytest.approx(math.log1p(0.5 / 1.0))
    assert pred.label == 1
    # without distance weighting the tie falls to the smaller id
    nw = single_estimator([0.0, 0.0], decay_rate=0.0, bin_width=1.0, variant="no_weights")
    nw.update([0.0, 0.0], 1)
    nw.update([1.0, 0.0], 0)
    assert nw.predict([0.0, 0.0]).label == 0


def test_predict_uses_bucket_age():
    model = single_estimator([0.0], decay_rate=0.1, bin_width=1.0)
    model.update([0.0], 0)
    model.update([1.0], 1)
    # t+1 = 3, newest stamp 2 -> dt = 1
    pred = model.predict([0.0])
    (bucket,) = model.buckets[0].values()
    decay = 2.0 ** -0.1
    mean1 = 1.0
    assert pred.class_weights[0] == pytest.approx(math.log1p(decay * bucket.counts[0] / 1e-9))
    assert pred.class_weights[1] == pytest.approx(math.log1p(decay * bucket.counts[1] / mean1))


def test_predict_is_pure(rng):
    model = EnhashModel(3, EnhashConfig(num_estimators=5, seed=3))
    for inst in random_stream(rng, 300, 3, 4):
        model.process(inst)
    before = pickle.dumps(model.to_snapshot())
    for x in rng.random((50, 3)):
        model.predict(x)
    assert pickle.dumps(model.to_snapshot()) == before


def test_argmax_invariant_under_weight_scaling(rng):
    model = EnhashModel(2, EnhashConfig(seed=2))
    for inst in random_stream(rng, 500, 2, 3):
        model.process(inst)
    for x in rng.random((100, 2)):
        pred = model.predict(x)
        if not pred.class_weights:
            continue
        scaled = {c: 7.5 * w for c, w in pred.class_weights.items()}
        assert model._argmax(scaled) == pred.label


# --- process ---------------------------------------------------------------------------------

def test_process_single_instance():
    model = EnhashModel(2, EnhashConfig())
    pred = model.process(LabeledInstance(np.array([0.1, 0.2]), 3, 1))
    assert pred.label == 0 and pred.class_weights == {}
    assert model.step == 1
    assert model.footprint().total_buckets == 10
    assert all(len(store) == 1 for store in model.buckets)


def test_process_rejects_out_of_order():
    model = EnhashModel(1, EnhashConfig())
    with pytest.raises(ValueError, match="out-of-order"):
        model.process(LabeledInstance(np.array([0.1]), 0, 2))


def test_process_matches_predict_then_update(rng):
    stream = random_stream(rng, 400, 2, 3)
    a = EnhashModel(2, EnhashConfig(seed=4))
    b = EnhashModel(2, EnhashConfig(seed=4))
    for inst in stream:
        pa = a.process(inst)
        pb = b.predict(inst.features)
        b.update(inst.features, inst.label)
        assert pa == pb
    assert a.dumps() == b.dumps()


def test_process_batch_matches_process(rng):
    stream = random_stream(rng, 600, 3, 4)
    a = EnhashModel(3, EnhashConfig(seed=9))
    b = EnhashModel(3, EnhashConfig(seed=9))
    seq = [a.process(inst).label for inst in stream]
    X = np.vstack([i.features for i in stream])
    y = [i.label for i in stream]
    assert b.process_batch(X, y).tolist() == seq
    assert a.dumps() == b.dumps()


def test_seed_determinism(rng):
    stream = random_stream(rng, 500, 2, 3)
    runs = []
    for _ in range(2):
        m = EnhashModel(2, EnhashConfig(seed=11))
        runs.append(([m.process(i).label for i in stream], m.dumps()))
    assert runs[0] == runs[1]


@pytest.mark.parametrize("variant", ["full", "lambda0", "no_weights"])
@pytest.mark.parametrize("rate", [0.0, 0.015, 0.1])
def test_replay_oracle_small(variant, rate):
    rng = np.random.default_rng(hash((variant, rate)) % 2**32)
    stream = random_stream(rng, 250, 2, 3, grid=0.05, drift_at=120)
    model = EnhashModel(2, EnhashConfig(num_estimators=4, bin_width=0.2, decay_rate=rate, variant=variant, seed=1))
    oracle = ReplayOracle.like(model)
    for inst in stream:
        expected, weights = oracle.predict(inst.features, inst.step)
        got = model.process(inst)
        assert got.label == expected
        assert got.class_weights == weights
        oracle.learn(inst.features, inst.label, inst.step)


# --- lambda = 0 recurrence ----------------------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(labels=st.lists(st.integers(0, 5), min_size=1, max_size=40))
def test_lambda0_recurrence(labels):
    model = single_estimator([0.0], decay_rate=0.0)
    p = np.zeros(6)
    for y in labels:
        model.update([0.0], y)
        e = np.zeros(6)
        e[y] = 1.0
        p = (p + e) / (1.0 + p.sum())
        (bucket,) = model.buckets[0].values()
        got = np.array([bucket.counts.get(c, 0.0) for c in range(6)])
        assert np.max(np.abs(got - p)) <= 1e-12


# --- footprint and snapshots ---------------------------------------------------------------------

def test_footprint_counts(rng):
    model = EnhashModel(2, EnhashConfig(num_estimators=10))
    assert model_footprint(model).total_buckets == 0
    model.update([0.3, 0.3], 1)
    fp = model_footprint(model)
    assert fp.total_buckets == 10
    assert fp.buckets_per_estimator == [1] * 10


def test_footprint_bytes_monotone(rng):
    model = EnhashModel(2, EnhashConfig(bin_width=0.01))
    last = (model.footprint().total_buckets, model.footprint().bytes)
    for inst in random_stream(rng, 300, 2, 2):
        model.process(inst)
        fp = model.footprint()
        assert fp.bytes >= last[1]
        if fp.total_buckets > last[0]:
            assert fp.bytes > last[1]
        last = (fp.total_buckets, fp.bytes)


def test_granularity_increases_buckets(rng):
    stream = random_stream(rng, 10_000, 2, 3)
    X = np.vstack([i.features for i in stream])
    y = [i.label for i in stream]
    counts = {}
    for bw in (0.0001, 0.1):
        m = EnhashModel(2, EnhashConfig(bin_width=bw))
        m.process_batch(X, y)
        counts[bw] = m.footprint().total_buckets
    assert counts[0.0001] > counts[0.1]


def test_snapshot_round_trip(rng):
    model = EnhashModel(3, EnhashConfig(num_estimators=6, decay_rate=0.1, seed=21))
    stream = random_stream(rng, 800, 3, 5)
    for inst in stream[:500]:
        model.process(inst)
    text = model.dumps()
    json.loads(text)
    clone = EnhashModel.loads(text)
    assert clone.dumps() == text
    assert clone.weights.tobytes() == model.weights.tobytes()
    for a, b in zip(model.buckets, clone.buckets):
        assert a.keys() == b.keys()
        for code in a:
            assert a[code].counts == b[code].counts
            assert a[code].tstamp == b[code].tstamp
            assert a[code].sample_counts == b[code].sample_counts
            for c in a[code].sample_sums:
                assert a[code].sample_sums[c].tobytes() == b[code].sample_sums[c].tobytes()
    # resumption continues identically
    for inst in stream[500:]:
        assert model.process(inst) == clone.process(inst)


def test_snapshot_rejects_unknown_format():
    with pytest.raises(ValueError):
        EnhashModel.from_snapshot({"format": "other"})


def test_copy_is_independent(rng):
    model = EnhashModel(2, EnhashConfig())
    for inst in random_stream(rng, 50, 2, 2):
        model.process(inst)
    clone = copy.deepcopy(model)
    clone.update([0.5, 0.5], 1)
    assert clone.step == model.step + 1
