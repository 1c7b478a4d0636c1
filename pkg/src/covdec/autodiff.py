"""Reverse-mode automatic differentiation over float64 numpy arrays.

A Node pairs a value tensor with a same-shaped gradient buffer. Operations
build a graph of Nodes; calling backward() on a scalar result walks the graph
exactly once in reverse topological order, accumulating (+=) into each .grad.
Everything is float64 and deterministic: two identical backward passes over
freshly zeroed gradients produce bit-identical results.

Vector arguments may be 1-D ([n]) or batched 2-D ([B, n]); conv1d accepts
[Cin, L] or [B, Cin, L]. No broadcasting beyond what the layer types need.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError


def as_tensor(x) -> np.ndarray:
    """Coerce to a C-contiguous float64 array (no copy when already one).

    0-d inputs stay 0-d; ascontiguousarray alone would promote them to 1-d.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)
    return arr


class Node:
    """One vertex of the computation graph."""

    __slots__ = ("value", "grad", "op", "parents", "_backward")

    def __init__(
        self,
        value,
        op: str = "leaf",
        parents: tuple = (),
        backward: Callable[[np.ndarray], None] | None = None,
    ):
        self.value = as_tensor(value)
        self.grad = np.zeros_like(self.value)
        self.op = op
        self.parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    def backward(self) -> None:
        """Seed d(self)/d(self) = 1 and propagate to every ancestor once."""
        order = _toposort(self)
        self.grad = self.grad + np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def _toposort(root: Node) -> list[Node]:
    # Iterative DFS; recursion would be fragile on long unrolled LSTM chains.
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


# ---------------------------------------------------------------------------
# elementwise and affine primitives
# ---------------------------------------------------------------------------


def add(a: Node, b: Node) -> Node:
    """Elementwise sum of two same-shaped nodes."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add: shapes {a.value.shape} vs {b.value.shape}")

    def backward(g):
        a.grad += g
        b.grad += g

    return Node(a.value + b.value, "add", (a, b), backward)


def mul(a: Node, b: Node) -> Node:
    """Elementwise (Hadamard) product of two same-shaped nodes."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul: shapes {a.value.shape} vs {b.value.shape}")

    def backward(g):
        a.grad += g * b.value
        b.grad += g * a.value

    return Node(a.value * b.value, "mul", (a, b), backward)


def matmul(a: Node, b: Node) -> Node:
    """Strict 2-D product: [m, k] @ [k, n] -> [m, n]."""
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: incompatible shapes {a.value.shape} x {b.value.shape}"
        )

    def backward(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    return Node(a.value @ b.value, "matmul", (a, b), backward)


def linear(x: Node, w: Node, b: Node | None = None) -> Node:
    """Affine map x @ w (+ b). x is [n] or [B, n], w is [n, m], b is [m]."""
    if w.value.ndim != 2:
        raise ShapeError(f"linear: weight must be 2-D, got {w.value.shape}")
    if x.value.ndim not in (1, 2) or x.value.shape[-1] != w.value.shape[0]:
        raise ShapeError(f"linear: input {x.value.shape} vs weight {w.value.shape}")
    if b is not None and b.value.shape != (w.value.shape[1],):
        raise ShapeError(f"linear: bias {b.value.shape} vs weight {w.value.shape}")

    out = x.value @ w.value
    if b is not None:
        out = out + b.value
    batched = x.value.ndim == 2

    def backward(g):
        x.grad += g @ w.value.T
        if batched:
            w.grad += x.value.T @ g
        else:
            w.grad += np.outer(x.value, g)
        if b is not None:
            b.grad += g.sum(axis=0) if batched else g

    parents = (x, w) if b is None else (x, w, b)
    return Node(out, "linear", parents, backward)


def reshape(x: Node, shape: Sequence[int]) -> Node:
    """View x with a new shape of the same total size."""

    def backward(g):
        x.grad += g.reshape(x.value.shape)

    return Node(x.value.reshape(shape), "reshape", (x,), backward)


def concat(nodes: Sequence[Node]) -> Node:
    """Concatenate along the last axis; leading axes must agree."""
    values = [n.value for n in nodes]
    offsets = np.cumsum([0] + [v.shape[-1] for v in values])

    def backward(g):
        for node, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            node.grad += g[..., lo:hi]

    return Node(np.concatenate(values, axis=-1), "concat", tuple(nodes), backward)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu(x: Node) -> Node:
    """max(x, 0); subgradient at 0 is 0."""
    mask = x.value > 0

    def backward(g):
        x.grad += g * mask

    return Node(np.maximum(x.value, 0.0), "relu", (x,), backward)


def sigmoid(x: Node) -> Node:
    """Logistic function, computed via tanh so large |x| cannot overflow."""
    s = 0.5 * (1.0 + np.tanh(0.5 * x.value))

    def backward(g):
        x.grad += g * s * (1.0 - s)

    return Node(s, "sigmoid", (x,), backward)


def tanh(x: Node) -> Node:
    t = np.tanh(x.value)

    def backward(g):
        x.grad += g * (1.0 - t * t)

    return Node(t, "tanh", (x,), backward)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def conv1d(x: Node, w: Node, b: Node) -> Node:
    """Valid 1-D cross-correlation, stride 1.

    x: [Cin, L] or [B, Cin, L]; w: [Cout, Cin, K]; b: [Cout].
    out[..., o, t] = b[o] + sum_{i,k} w[o, i, k] * x[..., i, t + k]
    """
    if w.value.ndim != 3:
        raise ShapeError(f"conv1d: weight must be [Cout, Cin, K], got {w.value.shape}")
    if x.value.ndim not in (2, 3):
        raise ShapeError(f"conv1d: input must be 2-D or 3-D, got {x.value.shape}")
    cout, cin, k = w.value.shape
    if x.value.shape[-2] != cin:
        raise ShapeError(
            f"conv1d: input channels {x.value.shape[-2]} vs weight Cin {cin}"
        )
    if b.value.shape != (cout,):
        raise ShapeError(f"conv1d: bias {b.value.shape} vs Cout {cout}")
    length = x.value.shape[-1]
    if k > length:
        raise ConfigError(f"conv1d: kernel {k} longer than input length {length}")

    batched = x.value.ndim == 3
    # windows[..., i, t, k] = x[..., i, t + k]
    windows = np.lib.stride_tricks.sliding_window_view(x.value, k, axis=-1)
    if batched:
        out = np.einsum("oik,bitk->bot", w.value, windows) + b.value[:, None]
    else:
        out = np.einsum("oik,itk->ot", w.value, windows) + b.value[:, None]

    def backward(g):
        if batched:
            b.grad += g.sum(axis=(0, 2))
            w.grad += np.einsum("bot,bitk->oik", g, windows)
        else:
            b.grad += g.sum(axis=1)
            w.grad += np.einsum("ot,itk->oik", g, windows)
        # dx[..., i, s] = sum_{o,k} g[..., o, s - k] * w[o, i, k]: a full
        # correlation of g with the flipped kernel.
        pad = [(0, 0)] * (g.ndim - 1) + [(k - 1, k - 1)]
        gpad = np.pad(g, pad)
        gwin = np.lib.stride_tricks.sliding_window_view(gpad, k, axis=-1)
        wflip = w.value[:, :, ::-1]
        if batched:
            x.grad += np.einsum("bosj,oij->bis", gwin, wflip)
        else:
            x.grad += np.einsum("osj,oij->is", gwin, wflip)

    return Node(out, "conv1d", (x, w, b), backward)


# ---------------------------------------------------------------------------
# recurrent cell
# ---------------------------------------------------------------------------

LSTM_GATES = ("i", "f", "g", "o")


def lstm_cell(
    x_t: Node, h_prev: Node, c_prev: Node, params: Mapping[str, Node]
) -> tuple[Node, Node]:
    """One LSTM step over [d]/[H] vectors or [B, d]/[B, H] batches.

    Gates i, f, o = sigmoid(x@wx_* + h@wh_* + b_*), candidate g = tanh(same);
    c_t = f*c_prev + i*g; h_t = o*tanh(c_t). `params` maps "wx_i", "wh_i",
    "b_i", ... for the four gates.
    """
    pre = {}
    for gate in LSTM_GATES:
        pre[gate] = add(
            linear(x_t, params[f"wx_{gate}"], params[f"b_{gate}"]),
            linear(h_prev, params[f"wh_{gate}"]),
        )
    gate_i = sigmoid(pre["i"])
    gate_f = sigmoid(pre["f"])
    gate_o = sigmoid(pre["o"])
    cand = tanh(pre["g"])
    c_t = add(mul(gate_f, c_prev), mul(gate_i, cand))
    h_t = mul(gate_o, tanh(c_t))
    return h_t, c_t


# ---------------------------------------------------------------------------
# losses and inference softmax
# ---------------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a plain array (inference path, no graph)."""
    z = np.asarray(logits, dtype=np.float64)
    zmax = z.max(axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits: Node, labels) -> Node:
    """Mean cross-entropy of softmax(logits) against integer labels.

    logits: [B, K]; labels: int array [B]. Backward is (softmax - onehot)/B.
    """
    if logits.value.ndim != 2:
        raise ShapeError(f"softmax_xent: logits must be [B, K], got {logits.value.shape}")
    batch, k = logits.value.shape
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lab.shape[0] != batch:
        raise ShapeError(f"softmax_xent: {batch} rows vs {lab.shape[0]} labels")
    for i, v in enumerate(lab):
        if not 0 <= v < k:
            raise DataError(f"label {int(v)} out of range [0, {k}) at index {i}")

    z = logits.value
    zmax = z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    logp = z - logsum
    rows = np.arange(batch)
    loss = -logp[rows, lab].mean()
    probs = np.exp(logp)

    def backward(g):
        d = probs.copy()
        d[rows, lab] -= 1.0
        logits.grad += g * d / batch

    return Node(loss, "softmax_xent", (logits,), backward)


def mse(pred: Node, target) -> Node:
    """Mean squared error of pred against a constant same-shaped target."""
    t = as_tensor(target)
    if t.shape != pred.value.shape:
        raise ShapeError(f"mse: pred {pred.value.shape} vs target {t.shape}")
    diff = pred.value - t
    n = diff.size

    def backward(g):
        pred.grad += g * (2.0 / n) * diff

    return Node(np.mean(diff * diff), "mse", (pred,), backward)
