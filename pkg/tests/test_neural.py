"""Network math tests: parameter counts, gradients, optimizer, checkpoints."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smilesgen.lexicon import Vocabulary, one_hot
from smilesgen.neural import (
    CHECKPOINT_VERSION,
    backward,
    batch_cross_entropy,
    clip_global_norm,
    cross_entropy,
    init_params,
    load_checkpoint,
    lstm_cell_step,
    lstm_forward,
    param_count,
    rmsprop_init,
    rmsprop_step,
    save_checkpoint,
    sigmoid,
    softmax,
)


def tiny_params(vocab=5, units1=4, units2=3, seed=0, dropout=0.0):
    rng = np.random.default_rng(seed)
    return init_params(vocab, units1, units2, dropout_rate=dropout, rng=rng)


def random_batch(vocab, batch, steps, seed=1):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, vocab, size=(batch, steps))
    targets = rng.integers(0, vocab, size=batch)
    return one_hot(idx, vocab), targets


# --- parameter counts -------------------------------------------------------


def test_param_count_minimal_model():
    counts = param_count(1, 1, 1)
    assert counts == (12, 12, 2, 26)


def test_param_count_reference_architecture():
    counts = param_count(23, 128, 64)
    assert counts.layer1 == 77_824
    assert counts.layer2 == 49_408
    assert counts.dense == 1_495
    assert counts.total == 128_727


@given(
    vocab=st.integers(min_value=1, max_value=40),
    units1=st.integers(min_value=1, max_value=40),
    units2=st.integers(min_value=1, max_value=40),
)
@settings(max_examples=60, deadline=None)
def test_param_count_matches_allocated_arrays(vocab, units1, units2):
    counts = param_count(vocab, units1, units2)
    params = init_params(vocab, units1, units2, rng=np.random.default_rng(0))
    assert params.layer1.element_count() == counts.layer1
    assert params.layer2.element_count() == counts.layer2
    assert params.dense_w.size + params.dense_b.size == counts.dense
    assert params.element_count() == counts.total


def test_param_count_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        param_count(0, 1, 1)


def test_forget_gate_bias_starts_at_one():
    params = tiny_params()
    for layer in (params.layer1, params.layer2):
        units = layer.units
        assert np.all(layer.b[units : 2 * units] == 1.0)
        assert np.all(layer.b[:units] == 0.0)


def test_init_params_deterministic_under_seed():
    a = tiny_params(seed=7)
    b = tiny_params(seed=7)
    for (_, arr_a), (_, arr_b) in zip(a.named_arrays(), b.named_arrays()):
        assert np.array_equal(arr_a, arr_b)


# --- activations ------------------------------------------------------------


def test_sigmoid_matches_definition_and_is_stable():
    x = np.array([-800.0, -3.0, 0.0, 3.0, 800.0])
    out = sigmoid(x)
    assert np.all((out >= 0.0) & (out <= 1.0))
    assert out[2] == 0.5
    np.testing.assert_allclose(out[1] + out[3], 1.0, atol=1e-12)


def test_softmax_rows_sum_to_one_and_shift_invariant():
    logits = np.array([[1.0, 2.0, 3.0], [1000.0, 1001.0, 999.0]])
    probs = softmax(logits, axis=1)
    np.testing.assert_allclose(probs.sum(axis=1), [1.0, 1.0], atol=1e-12)
    shifted = softmax(logits - 123.0, axis=1)
    np.testing.assert_allclose(probs, shifted, atol=1e-12)


def test_cross_entropy_values_and_guards():
    probs = np.array([0.5, 0.25, 0.25])
    assert cross_entropy(probs, 0) == pytest.approx(np.log(2.0))
    assert cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-np.log(1e-12))
    with pytest.raises(ValueError):
        cross_entropy(probs, 3)
    with pytest.raises(ValueError):
        cross_entropy(np.ones((2, 2)) / 2, 0)


def test_batch_cross_entropy_is_mean_of_rows():
    probs = np.array([[0.7, 0.3], [0.2, 0.8]])
    targets = np.array([0, 1])
    want = (cross_entropy(probs[0], 0) + cross_entropy(probs[1], 1)) / 2
    assert batch_cross_entropy(probs, targets) == pytest.approx(want)


# --- forward pass -----------------------------------------------------------


def test_forward_shapes_and_distributions():
    params = tiny_params()
    x, _ = random_batch(5, batch=4, steps=6)
    trace = lstm_forward(params, x)
    assert trace.layer1.h.shape == (4, 6, 4)
    assert trace.layer2.h.shape == (4, 6, 3)
    assert trace.probs.shape == (4, 5)
    np.testing.assert_allclose(trace.probs.sum(axis=1), np.ones(4), atol=1e-12)
    assert trace.dropout_mask is None


def test_forward_promotes_single_sequence():
    params = tiny_params()
    x, _ = random_batch(5, batch=1, steps=3)
    trace = lstm_forward(params, x[0])
    assert trace.probs.shape == (1, 5)


def test_forward_rejects_wrong_width():
    params = tiny_params(vocab=5)
    with pytest.raises(ValueError, match="vocabulary"):
        lstm_forward(params, np.zeros((2, 3, 7)))


def test_training_dropout_needs_rng_and_scales_kept_units():
    params = tiny_params(dropout=0.5)
    x, _ = random_batch(5, batch=6, steps=4)
    with pytest.raises(ValueError, match="rng"):
        lstm_forward(params, x, training=True)
    trace = lstm_forward(params, x, training=True, rng=np.random.default_rng(0))
    mask = trace.dropout_mask
    assert mask is not None
    assert set(np.unique(mask)) <= {0.0, 2.0}  # 1/keep with keep = 0.5
    np.testing.assert_allclose(trace.h_drop, trace.layer2.h[:, -1] * mask)
    # Evaluation runs the unmasked hidden state.
    eval_trace = lstm_forward(params, x, training=False)
    assert eval_trace.dropout_mask is None


def test_dropped_units_contribute_no_gradient():
    params = tiny_params(dropout=0.5)
    x, targets = random_batch(5, batch=3, steps=4)
    trace = lstm_forward(params, x, training=True, rng=np.random.default_rng(2))
    grads = backward(params, trace, targets)
    dead = np.all(trace.dropout_mask == 0.0, axis=0)
    assert np.all(grads["dense.W"][dead] == 0.0)


def test_sampling_step_matches_training_forward():
    params = tiny_params()
    x, _ = random_batch(5, batch=2, steps=5)
    trace = lstm_forward(params, x)
    h = np.zeros((2, params.layer1.units))
    c = np.zeros_like(h)
    for t in range(5):
        h, c = lstm_cell_step(params.layer1, x[:, t], h, c)
    np.testing.assert_allclose(h, trace.layer1.h[:, -1], atol=1e-12)


# --- gradients --------------------------------------------------------------


def numeric_gradient(params, x, targets, name, arr, eps=5e-6):
    grad = np.zeros_like(arr)
    flat = arr.ravel()
    gflat = grad.ravel()
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        up = batch_cross_entropy(lstm_forward(params, x).probs, targets)
        flat[k] = orig - eps
        down = batch_cross_entropy(lstm_forward(params, x).probs, targets)
        flat[k] = orig
        gflat[k] = (up - down) / (2 * eps)
    return grad


@pytest.mark.parametrize("seed", [0, 1])
def test_backward_matches_finite_differences(seed):
    params = tiny_params(vocab=5, units1=4, units2=3, seed=seed)
    x, targets = random_batch(5, batch=2, steps=6, seed=seed + 10)
    trace = lstm_forward(params, x)
    grads = backward(params, trace, targets)
    worst = 0.0
    for name, arr in params.named_arrays():
        numeric = numeric_gradient(params, x, targets, name, arr)
        diff = np.linalg.norm(grads[name] - numeric)
        scale = max(np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(diff / scale))
    assert worst < 1e-4


def test_backward_rejects_target_count_mismatch():
    params = tiny_params()
    x, _ = random_batch(5, batch=2, steps=3)
    trace = lstm_forward(params, x)
    with pytest.raises(ValueError):
        backward(params, trace, np.array([0, 1, 2]))


# --- optimizer --------------------------------------------------------------


def test_clip_global_norm_scales_in_place():
    grads = {"a": np.array([3.0, 4.0])}
    norm = clip_global_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(grads["a"], [0.6, 0.8])
    small = {"a": np.array([0.3, 0.4])}
    assert clip_global_norm(small, 1.0) == pytest.approx(0.5)
    np.testing.assert_allclose(small["a"], [0.3, 0.4])


def test_rmsprop_single_step_closed_form():
    params = tiny_params(seed=3)
    state = rmsprop_init(params, learning_rate=0.01, rho=0.9, eps=1e-7)
    grads = {name: np.ones_like(arr) for name, arr in params.named_arrays()}
    before = {name: arr.copy() for name, arr in params.named_arrays()}
    rmsprop_step(params, grads, state)
    # v = 0.1 * g^2, update = lr * g / (sqrt(v) + eps)
    step = 0.01 * 1.0 / (np.sqrt(0.1) + 1e-7)
    for name, arr in params.named_arrays():
        np.testing.assert_allclose(arr, before[name] - step, atol=1e-12)
        np.testing.assert_allclose(state.v[name], 0.1, atol=1e-15)


def test_rmsprop_rejects_bad_gradients():
    params = tiny_params()
    state = rmsprop_init(params, learning_rate=0.01)
    grads = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    grads["dense.b"] = np.zeros(3)
    with pytest.raises(ValueError, match="shape"):
        rmsprop_step(params, grads, state)
    grads = {name: np.zeros_like(arr) for name, arr in params.named_arrays()}
    grads["dense.b"][0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        rmsprop_step(params, grads, state)


# --- checkpoints ------------------------------------------------------------


def checkpoint_vocab(size):
    return Vocabulary([chr(ord("a") + i) for i in range(size)])


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    params = tiny_params(seed=11, dropout=0.2)
    vocab = checkpoint_vocab(5)
    path = tmp_path / "model.json"
    save_checkpoint(params, vocab, str(path))
    loaded, loaded_vocab = load_checkpoint(str(path))
    assert loaded_vocab == vocab
    assert loaded.dropout_rate == params.dropout_rate
    for (name, arr), (_, arr2) in zip(params.named_arrays(), loaded.named_arrays()):
        assert np.array_equal(arr, arr2), name


def test_checkpoint_save_twice_is_byte_identical(tmp_path):
    params = tiny_params(seed=4)
    vocab = checkpoint_vocab(5)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(params, vocab, str(p1))
    save_checkpoint(params, vocab, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_rejects_vocab_size_mismatch(tmp_path):
    params = tiny_params(vocab=5)
    with pytest.raises(ValueError, match="vocabulary size"):
        save_checkpoint(params, checkpoint_vocab(4), str(tmp_path / "x.json"))


def test_checkpoint_rejects_foreign_version(tmp_path):
    params = tiny_params()
    vocab = checkpoint_vocab(5)
    path = tmp_path / "model.json"
    save_checkpoint(params, vocab, str(path))
    payload = json.loads(path.read_text())
    payload["format_version"] = CHECKPOINT_VERSION + 1
    path.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(str(path))


def test_checkpoint_rejects_damage(tmp_path):
    params = tiny_params()
    vocab = checkpoint_vocab(5)
    path = tmp_path / "model.json"
    save_checkpoint(params, vocab, str(path))

    truncated = tmp_path / "cut.json"
    truncated.write_text(path.read_text()[:50])
    with pytest.raises(ValueError, match="corrupt"):
        load_checkpoint(str(truncated))

    payload = json.loads(path.read_text())
    del payload["dense"]
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="corrupt"):
        load_checkpoint(str(broken))

    payload = json.loads(path.read_text())
    payload["layers"][0]["W"] = payload["layers"][0]["W"][:-3]
    lopsided = tmp_path / "lopsided.json"
    lopsided.write_text(json.dumps(payload))
    with pytest.raises(ValueError, match="inconsistent"):
        load_checkpoint(str(lopsided))
