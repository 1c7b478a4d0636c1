import math

import numpy as np
import pytest

import covdec.autodiff as ad
from covdec.autodiff import Node
from covdec.errors import ConfigError, DataError, ShapeError


def test_matmul_identity():
    out = ad.matmul(Node([[1.0, 0.0], [0.0, 1.0]]), Node([[3.0], [4.0]]))
    assert np.array_equal(out.value, [[3.0], [4.0]])


def test_matmul_hand_computed():
    out = ad.matmul(Node([[1.0, 2.0]]), Node([[3.0], [4.0]]))
    assert np.array_equal(out.value, [[11.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        ad.matmul(Node(np.zeros((2, 3))), Node(np.zeros((2, 2))))


def test_matmul_backward_formulas():
    rng = np.random.default_rng(0)
    a, b = Node(rng.normal(size=(3, 4))), Node(rng.normal(size=(4, 2)))
    out = ad.matmul(a, b)
    g = rng.normal(size=(3, 2))
    out.grad += g - np.ones_like(g)  # so the seeded ones make the total g
    out.backward()
    assert np.allclose(a.grad, g @ b.value.T)
    assert np.allclose(b.grad, a.value.T @ g)


def test_relu_values_and_subgradient_at_zero():
    x = Node([-1.0, 0.0, 2.0])
    out = ad.relu(x)
    assert np.array_equal(out.value, [0.0, 0.0, 2.0])
    out.backward()
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_sigmoid_tanh_at_zero():
    assert ad.sigmoid(Node([0.0])).value[0] == pytest.approx(0.5)
    assert ad.tanh(Node([0.0])).value[0] == 0.0


def test_activations_stable_for_huge_inputs():
    x = Node([-1e6, 1e6])
    for op in (ad.relu, ad.sigmoid, ad.tanh):
        out = op(x)
        assert np.all(np.isfinite(out.value))


def test_conv1d_identity_kernel():
    out = ad.conv1d(Node([[1.0, 2.0, 3.0]]), Node([[[1.0]]]), Node([0.0]))
    assert np.array_equal(out.value, [[1.0, 2.0, 3.0]])


def test_conv1d_sliding_sum():
    out = ad.conv1d(Node([[1.0, 2.0, 3.0]]), Node([[[1.0, 1.0]]]), Node([0.0]))
    assert np.array_equal(out.value, [[3.0, 5.0]])


def test_conv1d_kernel_longer_than_input():
    with pytest.raises(ConfigError, match="kernel 4"):
        ad.conv1d(Node(np.zeros((1, 3))), Node(np.zeros((1, 1, 4))), Node(np.zeros(1)))


def test_conv1d_batched_matches_per_sample():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 2, 9))
    w = rng.normal(size=(4, 2, 3))
    b = rng.normal(size=4)
    batched = ad.conv1d(Node(x), Node(w), Node(b))
    for i in range(3):
        single = ad.conv1d(Node(x[i]), Node(w), Node(b))
        assert np.allclose(batched.value[i], single.value, atol=1e-12)


def test_softmax_xent_uniform_logits_is_ln_k():
    loss = ad.softmax_xent(Node(np.zeros((2, 3))), [0, 2])
    assert float(loss.value) == pytest.approx(math.log(3.0), abs=1e-12)


def test_softmax_xent_saturated_correct_logit():
    logits = np.zeros((1, 3))
    logits[0, 1] = 1e6
    loss = ad.softmax_xent(Node(logits), [1])
    assert float(loss.value) == pytest.approx(0.0, abs=1e-12)


def test_softmax_xent_label_out_of_range_names_index():
    with pytest.raises(DataError, match=r"label 5 out of range \[0, 3\) at index 1"):
        ad.softmax_xent(Node(np.zeros((2, 3))), [0, 5])


def test_softmax_probabilities_normalized():
    rng = np.random.default_rng(2)
    probs = ad.softmax(rng.normal(size=(50, 7)) * 100.0)
    assert np.all(probs >= 0.0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_mse_trivial_cases():
    x = Node([1.0, 2.0])
    assert float(ad.mse(x, [1.0, 2.0]).value) == 0.0
    assert float(ad.mse(Node([0.0, 0.0]), [1.0, 1.0]).value) == 1.0


def test_mse_gradient_formula():
    rng = np.random.default_rng(3)
    pred = Node(rng.normal(size=8))
    target = rng.normal(size=8)
    ad.mse(pred, target).backward()
    assert np.allclose(pred.grad, 2.0 * (pred.value - target) / 8.0)


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        ad.mse(Node([1.0, 2.0]), [1.0, 2.0, 3.0])


def test_add_mul_shape_errors():
    with pytest.raises(ShapeError):
        ad.add(Node([1.0]), Node([1.0, 2.0]))
    with pytest.raises(ShapeError):
        ad.mul(Node([1.0]), Node([1.0, 2.0]))


def test_linear_vector_and_batch_agree():
    rng = np.random.default_rng(4)
    w, b = Node(rng.normal(size=(5, 3))), Node(rng.normal(size=3))
    x = rng.normal(size=(2, 5))
    batched = ad.linear(Node(x), w, b)
    # gemm vs gemv may differ in the last ulp; equality is numerical here
    assert np.allclose(batched.value[0], ad.linear(Node(x[0]), w, b).value, atol=1e-12)


def test_concat_gradient_routes_to_segments():
    a, b = Node([1.0, 2.0]), Node([3.0, 4.0, 5.0])
    out = ad.concat([a, b])
    assert np.array_equal(out.value, [1.0, 2.0, 3.0, 4.0, 5.0])
    out.backward()
    assert np.array_equal(a.grad, [1.0, 1.0])
    assert np.array_equal(b.grad, [1.0, 1.0, 1.0])


def test_reshape_roundtrips_gradient():
    x = Node(np.arange(6.0).reshape(2, 3))
    out = ad.reshape(x, (6,))
    out.backward()
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_lstm_cell_zero_params_fixed_point():
    d, h = 3, 4
    params = {}
    for gate in ad.LSTM_GATES:
        params[f"wx_{gate}"] = Node(np.zeros((d, h)))
        params[f"wh_{gate}"] = Node(np.zeros((h, h)))
        params[f"b_{gate}"] = Node(np.zeros(h))
    h_t, c_t = ad.lstm_cell(Node([5.0, -2.0, 9.0]), Node(np.zeros(h)), Node(np.zeros(h)), params)
    assert np.array_equal(h_t.value, np.zeros(h))
    assert np.array_equal(c_t.value, np.zeros(h))


def test_lstm_cell_saturated_gates_carry_cell_state():
    d, h = 2, 3
    rng = np.random.default_rng(5)
    params = {}
    for gate in ad.LSTM_GATES:
        params[f"wx_{gate}"] = Node(np.zeros((d, h)))
        params[f"wh_{gate}"] = Node(np.zeros((h, h)))
        bias = np.full(h, 50.0) if gate == "f" else np.full(h, -50.0)
        params[f"b_{gate}"] = Node(bias)
    c_prev = Node(rng.normal(size=h))
    _, c_t = ad.lstm_cell(Node(rng.normal(size=d)), Node(rng.normal(size=h)), c_prev, params)
    assert np.allclose(c_t.value, c_prev.value, atol=1e-3)


def test_backward_visits_shared_node_once():
    # y = x*x + x: dy/dx = 2x + 1; double-counting would give more
    x = Node([3.0])
    y = ad.add(ad.mul(x, x), x)
    y.backward()
    assert np.array_equal(x.grad, [7.0])


def test_backward_deterministic_bit_identical():
    rng = np.random.default_rng(6)
    a_val = rng.normal(size=(4, 4))
    b_val = rng.normal(size=(4, 4))

    def one_pass():
        a, b = Node(a_val), Node(b_val)
        loss = ad.mse(ad.tanh(ad.matmul(a, b)), np.zeros((4, 4)))
        loss.backward()
        return a.grad.tobytes(), b.grad.tobytes()

    assert one_pass() == one_pass()


def test_gradients_accumulate_additively():
    x = Node([2.0])
    y1, y2 = ad.mul(x, x), ad.mul(x, x)
    y1.backward()
    y2.backward()
    assert np.array_equal(x.grad, [8.0])  # 4.0 from each pass
    x.zero_grad()
    assert np.array_equal(x.grad, [0.0])


def test_no_nonfinite_from_bounded_inputs():
    rng = np.random.default_rng(7)
    x = Node(rng.uniform(-1e3, 1e3, size=(4, 6)))
    w = Node(rng.uniform(-1e3, 1e3, size=(6, 3)))
    logits = ad.linear(ad.sigmoid(x), w)
    loss = ad.softmax_xent(logits, [0, 1, 2, 0])
    loss.backward()
    assert np.isfinite(float(loss.value))
    assert np.all(np.isfinite(x.grad)) and np.all(np.isfinite(w.grad))
