import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aopath.errors import DimensionError, EmptySequenceError, InvariantError, NonFiniteError
from aopath.gradcheck import check_gradients
from aopath.numerics import (
    AdamState,
    LSTMParams,
    Tensor,
    adam_step,
    affine,
    bilstm,
    concat,
    cosine_similarity,
    lstm_cell,
    no_grad,
    softmax_cross_entropy,
    stack,
    take_rows,
)

N_INSTANCES = 20


def leaf(rng, *shape, scale=1.0):
    return Tensor(scale * rng.standard_normal(shape), requires_grad=True)


def lstm_params(rng, n_in, hidden, scale=0.5):
    return LSTMParams(
        leaf(rng, 4 * hidden, n_in, scale=scale),
        leaf(rng, 4 * hidden, hidden, scale=scale),
        leaf(rng, 4 * hidden, scale=scale),
        leaf(rng, 4 * hidden, scale=scale),
    )


def assert_grads(build_loss, tensors, tol):
    errors = check_gradients(build_loss, tensors)
    assert max(errors.values()) < tol, errors


# --- tensor basics -----------------------------------------------------------


def test_tensor_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        Tensor([1.0, np.nan])
    with pytest.raises(NonFiniteError):
        Tensor([np.inf])


def test_grad_absent_until_backward_and_same_shape():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    assert x.grad is None
    (x * x).sum().backward()
    assert x.grad.shape == x.shape
    np.testing.assert_array_equal(x.grad, 2 * np.ones((2, 3)))


def test_leaf_gradients_accumulate_across_backward_calls():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])


def test_no_grad_builds_no_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert not y.requires_grad


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_elementwise_ops_and_gathers_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    a, b, c = leaf(rng, 3, 4), leaf(rng, 4), leaf(rng, 5, 4)
    ids = rng.integers(0, 5, size=(2, 3))

    def loss():
        x = (a * b - a + b)[1:]  # broadcasting and a basic slice
        y = take_rows(c, ids).sum(axis=0)  # repeated ids accumulate
        z = concat([x, y[:1]], axis=0)
        w = stack([z, z * z], axis=0)
        return (w * w).sum() + (-a)[[0, 2, 2]].sum()

    assert_grads(loss, {"a": a, "b": b, "c": c}, 1e-6)


# --- affine ------------------------------------------------------------------


def test_affine_identity_and_hand_sum():
    np.testing.assert_array_equal(
        affine(Tensor([1.0, 0.0]), Tensor(np.eye(2)), Tensor([0.0, 0.0])).data, [1.0, 0.0]
    )
    np.testing.assert_array_equal(affine(Tensor([2.0, 3.0]), Tensor([[1.0, 1.0]]), Tensor([-5.0])).data, [0.0])


def test_affine_shape_mismatch():
    with pytest.raises(DimensionError):
        affine(Tensor(np.ones(3)), Tensor(np.ones((2, 4))), Tensor(np.ones(2)))
    with pytest.raises(DimensionError):
        affine(Tensor(np.ones(4)), Tensor(np.ones((2, 4))), Tensor(np.ones(3)))


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_affine_gradients(seed):
    rng = np.random.default_rng(seed)
    x, W, b = leaf(rng, 7), leaf(rng, 3, 7), leaf(rng, 3)
    target = rng.standard_normal(3)
    assert_grads(lambda: ((affine(x, W, b) - target) * (affine(x, W, b) - target)).sum(), {"x": x, "W": W, "b": b}, 1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_batched_affine_gradients(seed):
    rng = np.random.default_rng(seed)
    x, W, b = leaf(rng, 2, 3, 6), leaf(rng, 4, 6), leaf(rng, 4)
    weights = rng.standard_normal((2, 3, 4))
    assert_grads(lambda: (affine(x, W, b) * weights).sum(), {"x": x, "W": W, "b": b}, 1e-6)


# --- cosine similarity -------------------------------------------------------


@pytest.mark.parametrize(
    "a, b, expected",
    [([3.0, 4.0], [3.0, 4.0], 1.0), ([1.0, 0.0], [0.0, 1.0], 0.0), ([1.0, 2.0, 3.0], [-1.0, -2.0, -3.0], -1.0)],
)
def test_cosine_examples(a, b, expected):
    assert cosine_similarity(Tensor(a), Tensor(b)).item() == pytest.approx(expected, abs=1e-15)


def test_cosine_zero_norm_is_zero_with_zero_gradient():
    a = Tensor(np.zeros(4), requires_grad=True)
    b = Tensor(np.arange(4.0), requires_grad=True)
    out = cosine_similarity(a, b)
    assert out.item() == 0.0
    out.backward()
    np.testing.assert_array_equal(a.grad, 0.0)
    np.testing.assert_array_equal(b.grad, 0.0)


finite_vectors = arrays(np.float64, 6, elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False))


@settings(max_examples=200, deadline=None)
@given(finite_vectors, finite_vectors)
def test_cosine_bounded(a, b):
    c = cosine_similarity(Tensor(a), Tensor(b)).item()
    assert -1 - 1e-12 <= c <= 1 + 1e-12


@settings(max_examples=200, deadline=None)
@given(finite_vectors, finite_vectors, st.floats(1e-3, 1e3))
def test_cosine_positive_scale_invariant(a, b, alpha):
    c1 = cosine_similarity(Tensor(a), Tensor(b)).item()
    c2 = cosine_similarity(Tensor(alpha * a), Tensor(b)).item()
    assert c2 == pytest.approx(c1, abs=1e-12)


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_cosine_gradients(seed):
    rng = np.random.default_rng(seed)
    a, b = leaf(rng, 3, 5), leaf(rng, 5)
    w = rng.standard_normal(3)
    assert_grads(lambda: (cosine_similarity(a, b) * w).sum(), {"a": a, "b": b}, 1e-6)


# --- LSTM --------------------------------------------------------------------


def test_lstm_zero_params_give_zero_state():
    H, n_in = 3, 5
    zeros = LSTMParams(*(Tensor(np.zeros(s)) for s in [(4 * H, n_in), (4 * H, H), (4 * H,), (4 * H,)]))
    h, c = lstm_cell(Tensor(np.random.default_rng(0).standard_normal(n_in)), Tensor(np.zeros(H)), Tensor(np.zeros(H)), zeros)
    np.testing.assert_array_equal(h.data, 0.0)
    np.testing.assert_array_equal(c.data, 0.0)


def test_lstm_saturated_gates_keep_cell_state():
    rng = np.random.default_rng(1)
    H, n_in = 2, 3
    b = np.zeros(4 * H)
    b[:H] = -10.0  # input gate shut
    b[H : 2 * H] = 10.0  # forget gate open
    p = LSTMParams(Tensor(np.zeros((4 * H, n_in))), Tensor(np.zeros((4 * H, H))), Tensor(b), Tensor(np.zeros(4 * H)))
    c0 = rng.standard_normal(H)
    _, c1 = lstm_cell(Tensor(rng.standard_normal(n_in)), Tensor(rng.standard_normal(H)), Tensor(c0), p)
    np.testing.assert_allclose(c1.data, c0, atol=1e-4)


def test_lstm_gate_order_is_input_forget_cell_output():
    # only the cell-candidate block is driven; i = f = o = sigmoid(0) = 0.5
    b_ih = np.array([0.0, 0.0, 2.0, 0.0])
    p = LSTMParams(Tensor(np.zeros((4, 1))), Tensor(np.zeros((4, 1))), Tensor(b_ih), Tensor(np.zeros(4)))
    h, c = lstm_cell(Tensor([0.0]), Tensor([0.0]), Tensor([1.0]), p)
    assert c.item() == pytest.approx(0.5 * 1.0 + 0.5 * math.tanh(2.0))
    assert h.item() == pytest.approx(0.5 * math.tanh(c.item()))


def test_lstm_shape_mismatch():
    rng = np.random.default_rng(0)
    p = lstm_params(rng, 3, 2)
    with pytest.raises(DimensionError):
        lstm_cell(Tensor(np.ones(4)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), p)


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_lstm_cell_gradients(seed):
    rng = np.random.default_rng(seed)
    p = lstm_params(rng, 3, 2)
    x, h, c = leaf(rng, 3), leaf(rng, 2), leaf(rng, 2)

    def loss():
        h1, c1 = lstm_cell(x, h, c, p)
        return h1.sum() + (c1 * c1).sum()

    names = dict(zip(("w_ih", "w_hh", "b_ih", "b_hh"), p.tensors()))
    assert_grads(loss, {"x": x, "h": h, "c": c, **names}, 1e-5)


def test_bilstm_length_one_is_one_step_each_way():
    rng = np.random.default_rng(3)
    fwd, bwd = lstm_params(rng, 4, 3), lstm_params(rng, 4, 3)
    x = Tensor(rng.standard_normal(4))
    zero = Tensor(np.zeros(3))
    expected = np.concatenate([lstm_cell(x, zero, zero, fwd)[0].data, lstm_cell(x, zero, zero, bwd)[0].data])
    np.testing.assert_array_equal(bilstm([x], fwd, bwd).data, expected)


def test_bilstm_reversal_swaps_halves_with_tied_directions():
    rng = np.random.default_rng(4)
    p = lstm_params(rng, 4, 3)
    seq = [Tensor(rng.standard_normal(4)) for _ in range(5)]
    out = bilstm(seq, p, p).data
    rev = bilstm(seq[::-1], p, p).data
    np.testing.assert_allclose(rev[:3], out[3:], rtol=0, atol=1e-15)
    np.testing.assert_allclose(rev[3:], out[:3], rtol=0, atol=1e-15)


def test_bilstm_empty_sequence():
    rng = np.random.default_rng(0)
    p = lstm_params(rng, 2, 2)
    with pytest.raises(EmptySequenceError):
        bilstm([], p, p)


def test_masked_batch_equals_unpadded_sequences():
    rng = np.random.default_rng(5)
    fwd, bwd = lstm_params(rng, 4, 3), lstm_params(rng, 4, 3)
    lengths = [5, 2, 1]
    padded = np.zeros((5, 3, 4))
    mask = np.zeros((5, 3))
    seqs = []
    for j, n in enumerate(lengths):
        s = rng.standard_normal((n, 4))
        seqs.append(s)
        padded[:n, j] = s
        mask[:n, j] = 1
    batched = bilstm(Tensor(padded), fwd, bwd, mask).data
    for j, s in enumerate(seqs):
        alone = bilstm([Tensor(row) for row in s], fwd, bwd).data
        np.testing.assert_allclose(batched[j], alone, rtol=0, atol=1e-14)


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_bilstm_gradients(seed):
    rng = np.random.default_rng(seed)
    fwd, bwd = lstm_params(rng, 8, 4), lstm_params(rng, 8, 4)
    seq = leaf(rng, 5, 8)
    w = rng.standard_normal(8)
    tensors = {"seq": seq}
    for tag, p in (("fwd", fwd), ("bwd", bwd)):
        tensors.update({f"{tag}.{n}": t for n, t in zip(("w_ih", "w_hh", "b_ih", "b_hh"), p.tensors())})
    assert_grads(lambda: (bilstm(seq, fwd, bwd) * w).sum(), tensors, 1e-5)


@pytest.mark.parametrize("seed", range(5))
def test_masked_bilstm_gradients(seed):
    rng = np.random.default_rng(seed)
    fwd, bwd = lstm_params(rng, 3, 2), lstm_params(rng, 3, 2)
    seq = leaf(rng, 4, 3, 3)
    mask = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 0], [1, 0, 0]], dtype=float)
    w = rng.standard_normal((3, 4))
    assert_grads(lambda: (bilstm(seq, fwd, bwd, mask) * w).sum(), {"seq": seq, **dict(zip("abcd", fwd.tensors()))}, 1e-5)


# --- softmax cross-entropy ---------------------------------------------------


def test_uniform_logits_give_log5():
    assert softmax_cross_entropy(Tensor(np.zeros(5)), 0).item() == pytest.approx(math.log(5), abs=1e-12)


def test_saturated_logit_gives_near_zero_loss():
    assert softmax_cross_entropy(Tensor([30.0, 0, 0, 0, 0]), 0).item() < 1e-9


def test_cross_entropy_gold_out_of_range():
    with pytest.raises(IndexError):
        softmax_cross_entropy(Tensor(np.zeros(5)), 5)
    with pytest.raises(IndexError):
        softmax_cross_entropy(Tensor(np.zeros(5)), -1)


@pytest.mark.parametrize("seed", range(N_INSTANCES))
def test_cross_entropy_gradient_is_softmax_minus_onehot(seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(5) * 3
    gold = int(rng.integers(5))
    logits = Tensor(z, requires_grad=True)
    softmax_cross_entropy(logits, gold).backward()
    p = np.exp(z - z.max())
    p /= p.sum()
    np.testing.assert_allclose(logits.grad, p - np.eye(5)[gold], rtol=0, atol=1e-10)


def test_batched_cross_entropy_is_mean_over_records():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((4, 5))
    gold = [0, 3, 1, 4]
    each = [softmax_cross_entropy(Tensor(z[i]), gold[i]).item() for i in range(4)]
    assert softmax_cross_entropy(Tensor(z), gold).item() == pytest.approx(np.mean(each), abs=1e-14)


# --- Adam ----------------------------------------------------------------------


def test_adam_first_step_moves_by_lr():
    w = Tensor(np.array([2.0]), requires_grad=True)
    w.grad = np.array([0.37])
    adam_step({"w": w}, AdamState(lr=1e-3))
    assert 2.0 - w.data[0] == pytest.approx(1e-3, rel=1e-6)
    assert w.grad is None


def test_adam_zero_gradient_leaves_parameter():
    w = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    w.grad = np.zeros(2)
    adam_step({"w": w}, AdamState())
    np.testing.assert_array_equal(w.data, [1.5, -2.0])


def test_adam_missing_gradient_is_invariant_error():
    w = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(InvariantError, match="w"):
        adam_step({"w": w}, AdamState())


def test_adam_minimises_square():
    w = Tensor(np.array([1.0]), requires_grad=True)
    state = AdamState(lr=0.1)
    losses = []
    for _ in range(100):
        loss = (w * w).sum()
        losses.append(loss.item())
        loss.backward()
        adam_step({"w": w}, state)
    assert abs(w.data[0]) < 0.5
    assert losses[-1] < losses[0]
    # monotone while the iterate approaches zero from one side
    first_cross = next((i for i in range(1, 100) if losses[i] >= losses[i - 1]), 100)
    assert first_cross >= 10
