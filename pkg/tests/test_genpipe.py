"""Training loop and sampling pipeline tests."""

import numpy as np
import pytest

from smilesgen.genpipe import (
    GenerationStats,
    SampleConfig,
    TrainConfig,
    dedup,
    generate_batch,
    learning_rate_schedule,
    sample_one,
    temperature_reweight,
    train,
    worker_rng,
)
from smilesgen.lexicon import Vocabulary
from smilesgen.toydata import toy_corpus

TINY = TrainConfig(
    seq_len=12,
    stride=4,
    epochs=2,
    batch_size=64,
    lr_start=0.01,
    lr_end=0.005,
    seed=5,
    dropout_rate=0.1,
    units1=12,
    units2=10,
)


@pytest.fixture(scope="module")
def small_model():
    return train(toy_corpus(count=80, seed=3), TINY)


# --- schedule and config ----------------------------------------------------


def test_schedule_hits_both_endpoints():
    cfg = TrainConfig(epochs=5, lr_start=0.01, lr_end=0.0002)
    schedule = learning_rate_schedule(cfg)
    assert len(schedule) == 5
    assert schedule[0] == pytest.approx(0.01)
    assert schedule[-1] == pytest.approx(0.0002)


def test_schedule_decays_geometrically():
    cfg = TrainConfig(epochs=6, lr_start=0.02, lr_end=0.00064)
    schedule = learning_rate_schedule(cfg)
    ratios = [b / a for a, b in zip(schedule, schedule[1:])]
    np.testing.assert_allclose(ratios, ratios[0])
    assert ratios[0] < 1.0


def test_schedule_degenerate_epochs():
    assert learning_rate_schedule(TrainConfig(epochs=1)) == [0.01]
    assert learning_rate_schedule(TrainConfig(epochs=0)) == []


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lr_start": 0.001, "lr_end": 0.01},
        {"lr_end": 0.0},
        {"seq_len": 0},
        {"stride": 0},
        {"epochs": -1},
        {"batch_size": 0},
    ],
)
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [{"temperature": 0.0}, {"temperature": float("nan")}, {"max_len": 0}, {"count": -1}],
)
def test_sample_config_validation(kwargs):
    with pytest.raises(ValueError):
        SampleConfig(**kwargs)


# --- training ---------------------------------------------------------------


def test_train_rejects_empty_corpus():
    with pytest.raises(ValueError):
        train([], TINY)


def test_train_records_history_and_schedule(small_model):
    assert len(small_model.loss_history) == TINY.epochs
    assert all(np.isfinite(v) for v in small_model.loss_history)
    assert small_model.learning_rates == learning_rate_schedule(TINY)


def test_train_is_deterministic_per_seed():
    corpus = toy_corpus(count=30, seed=3)
    cfg = TrainConfig(
        seq_len=10, stride=5, epochs=1, batch_size=32, units1=8, units2=6, seed=9
    )
    a = train(corpus, cfg)
    b = train(corpus, cfg)
    assert a.loss_history == b.loss_history
    for (name, arr_a), (_, arr_b) in zip(
        a.params.named_arrays(), b.params.named_arrays()
    ):
        assert np.array_equal(arr_a, arr_b), name
    c = train(corpus, TrainConfig(**{**cfg.__dict__, "seed": 10}))
    assert any(
        not np.array_equal(arr_a, arr_c)
        for (_, arr_a), (_, arr_c) in zip(
            a.params.named_arrays(), c.params.named_arrays()
        )
    )


# --- temperature ------------------------------------------------------------


def test_temperature_one_is_identity():
    probs = np.array([0.6, 0.3, 0.1])
    np.testing.assert_allclose(temperature_reweight(probs, 1.0), probs, atol=1e-12)


def test_low_temperature_sharpens_to_argmax():
    probs = np.array([0.5, 0.3, 0.2])
    cold = temperature_reweight(probs, 0.01)
    assert cold[0] > 0.999
    np.testing.assert_allclose(cold.sum(), 1.0, atol=1e-12)


def test_high_temperature_flattens():
    probs = np.array([0.7, 0.2, 0.1])
    hot = temperature_reweight(probs, 4.0)
    assert hot.max() < probs.max()
    assert hot.min() > probs.min()
    np.testing.assert_allclose(hot.sum(), 1.0, atol=1e-12)


# --- sampling ---------------------------------------------------------------


def test_sample_one_deterministic(small_model):
    cfg = SampleConfig(seed=0, max_len=40)
    a = sample_one(small_model.params, small_model.vocab, cfg, np.random.default_rng(4))
    b = sample_one(small_model.params, small_model.vocab, cfg, np.random.default_rng(4))
    assert a == b


def test_sample_one_keeps_prompt_prefix(small_model):
    cfg = SampleConfig(max_len=30, prompt="CC")
    out = sample_one(small_model.params, small_model.vocab, cfg, np.random.default_rng(1))
    assert out.text.startswith("CC")


def test_sample_one_rejects_foreign_prompt(small_model):
    cfg = SampleConfig(prompt="Z")
    with pytest.raises(ValueError, match="prompt"):
        sample_one(small_model.params, small_model.vocab, cfg, np.random.default_rng(0))


def test_sample_one_truncates_at_max_len(small_model):
    cfg = SampleConfig(max_len=3)
    out = sample_one(small_model.params, small_model.vocab, cfg, np.random.default_rng(2))
    assert len(out.text) <= 3
    if len(out.text) == 3:
        assert out.truncated


def test_sample_one_vocab_mismatch(small_model):
    wrong = Vocabulary(["\n", "C", "O"])
    with pytest.raises(ValueError, match="vocabulary"):
        sample_one(small_model.params, wrong, SampleConfig(), np.random.default_rng(0))


def test_worker_rng_streams_are_stable_and_distinct():
    a = worker_rng(7, 0).random(4)
    b = worker_rng(7, 0).random(4)
    c = worker_rng(7, 1).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


# --- batch generation -------------------------------------------------------


def test_generate_batch_stats_partition(small_model):
    cfg = SampleConfig(seed=3, count=60, max_len=60)
    valid, stats = generate_batch(small_model.params, small_model.vocab, cfg)
    assert stats.requested == 60
    assert stats.syntactic_rejects + stats.parse_rejects + stats.valid == 60
    assert stats.valid == len(valid)
    assert stats.unique_canonical == len(set(valid))
    assert stats.wall_time > 0.0


def test_generate_batch_rerun_is_identical(small_model):
    cfg = SampleConfig(seed=11, count=40, max_len=60)
    first, stats_first = generate_batch(small_model.params, small_model.vocab, cfg, workers=2)
    second, stats_second = generate_batch(small_model.params, small_model.vocab, cfg, workers=2)
    assert first == second
    assert stats_first.to_dict() | {"wall_time": 0} == stats_second.to_dict() | {
        "wall_time": 0
    }


def test_adding_workers_leaves_existing_streams_alone(small_model):
    # Worker 0 draws the same samples whether it is alone or one of two,
    # so its half of a two-worker run prefixes the one-worker output.
    half = SampleConfig(seed=11, count=20, max_len=60)
    full = SampleConfig(seed=11, count=40, max_len=60)
    w0, _ = generate_batch(small_model.params, small_model.vocab, half, workers=1)
    solo, _ = generate_batch(small_model.params, small_model.vocab, full, workers=1)
    duo, _ = generate_batch(small_model.params, small_model.vocab, full, workers=2)
    assert solo[: len(w0)] == w0
    assert duo[: len(w0)] == w0


def test_generate_batch_counts_training_duplicates(small_model):
    cfg = SampleConfig(seed=3, count=30, max_len=60)
    valid, _ = generate_batch(small_model.params, small_model.vocab, cfg)
    if not valid:
        pytest.skip("tiny model produced no valid molecule at this seed")
    _, stats = generate_batch(
        small_model.params,
        small_model.vocab,
        cfg,
        training_canonicals=frozenset(valid),
    )
    assert stats.duplicates_of_training == stats.valid


def test_generate_batch_zero_count(small_model):
    valid, stats = generate_batch(
        small_model.params, small_model.vocab, SampleConfig(count=0)
    )
    assert valid == []
    assert stats.requested == 0
    with pytest.raises(ValueError):
        generate_batch(small_model.params, small_model.vocab, SampleConfig(), workers=0)


def test_generation_stats_to_dict_round_trip():
    stats = GenerationStats(5, 1, 2, 2, 1, 2, 0.25)
    data = stats.to_dict()
    assert data["requested"] == 5
    assert data["valid"] == 2
    assert set(data) == {
        "requested",
        "syntactic_rejects",
        "parse_rejects",
        "valid",
        "duplicates_of_training",
        "unique_canonical",
        "wall_time",
    }


def test_dedup_orders_and_counts():
    novel, duplicates = dedup(
        ["CCO", "CCN", "CCO", "CCC", "CCN"], training_canonicals={"CCC"}
    )
    assert novel == ["CCO", "CCN"]
    assert duplicates == 1
