"""Dense float64 tensors with a small reverse-mode tape, plus Adam.

Only the operations the model needs are differentiable: affine maps,
cosine similarity, a fused LSTM cell (and the bidirectional wrapper built on
it), softmax cross-entropy, and a handful of shape/arithmetic glue ops.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, EmptySequenceError, InvariantError, NonFiniteError

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no tape inside the block (evaluation only)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values in {what}")


class Tensor:
    """A float64 array that optionally records how it was computed.

    ``grad`` is ``None`` until a backward pass reaches the tensor; after that
    it always has the same shape as ``data``.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        _check_finite(self.data, name or "tensor")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate ``grad`` (default 1 for scalars) through the tape.

        Leaf gradients accumulate across calls; interior nodes get the
        gradient of this pass only.
        """
        if not self.requires_grad:
            raise InvariantError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"implicit backward needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=DTYPE)
        if grad.shape != self.shape:
            raise DimensionError(f"seed gradient shape {grad.shape} != {self.shape}")

        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in _topological_order(self):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            _check_finite(g, f"gradient of {node.name or 'tensor'}")
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            node.grad = g
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # glue arithmetic ---------------------------------------------------

    def __add__(self, other) -> Tensor:
        other = _as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return _result(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __sub__(self, other) -> Tensor:
        other = _as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return _result(
            self.data - other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)),
        )

    def __neg__(self) -> Tensor:
        return _result(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other) -> Tensor:
        other = _as_tensor(other)
        a, b = self.data, other.data
        return _result(
            a * b,
            (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __getitem__(self, index) -> Tensor:
        shape = self.shape

        fancy = _is_fancy(index)

        def backward(g):
            full = np.zeros(shape, dtype=DTYPE)
            if fancy:
                np.add.at(full, index, g)
            else:
                full[index] = g
            return (full,)

        return _result(self.data[index], (self,), backward)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return _result(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),))

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return _result(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _is_fancy(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return any(isinstance(p, (list, np.ndarray, Tensor)) for p in parts)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    """Nodes reachable from ``root`` ordered so each precedes its parents."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _result(data, tuple(tensors), lambda g: np.split(g, cuts, axis=axis))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)
    n = len(tensors)
    return _result(
        data,
        tuple(tensors),
        lambda g: [np.take(g, i, axis=axis) for i in range(n)],
    )


def take_rows(table: Tensor, ids) -> Tensor:
    """Gather ``table[ids]`` along axis 0; repeated ids accumulate gradient."""
    ids = np.asarray(ids, dtype=np.intp)
    shape = table.shape

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, ids, g)
        return (full,)

    return _result(table.data[ids], (table,), backward)


# model primitives -------------------------------------------------------


def affine(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ W.T + b`` over the last axis of ``x`` (leading axes are batch)."""
    if W.ndim != 2 or x.ndim < 1 or x.shape[-1] != W.shape[1]:
        raise DimensionError(f"affine: x{x.shape} does not match W{W.shape}")
    if b is not None and b.shape != (W.shape[0],):
        raise DimensionError(f"affine: bias {b.shape} does not match W{W.shape}")
    xd, Wd = x.data, W.data
    y = xd @ Wd.T
    if b is not None:
        y = y + b.data

    def backward(g):
        g2 = g.reshape(-1, g.shape[-1])
        x2 = xd.reshape(-1, xd.shape[-1])
        grads = [g @ Wd, g2.T @ x2]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return grads

    parents = (x, W) if b is None else (x, W, b)
    return _result(y, parents, backward)


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine of the angle between ``a`` and ``b`` along the last axis.

    Leading axes broadcast. Where either vector has zero norm the result is
    0 and no gradient flows to either side.
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"cosine_similarity: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    na = np.sqrt(np.sum(ad * ad, axis=-1, keepdims=True))
    nb = np.sqrt(np.sum(bd * bd, axis=-1, keepdims=True))
    dot = np.sum(ad * bd, axis=-1, keepdims=True)
    denom = na * nb
    ok = denom > 0.0
    safe_denom = np.where(ok, denom, 1.0)
    cos = np.where(ok, dot / safe_denom, 0.0)

    def backward(g):
        g = g[..., None]
        safe_na2 = np.where(na > 0, na * na, 1.0)
        safe_nb2 = np.where(nb > 0, nb * nb, 1.0)
        da = np.where(ok, g * (bd / safe_denom - cos * ad / safe_na2), 0.0)
        db = np.where(ok, g * (ad / safe_denom - cos * bd / safe_nb2), 0.0)
        return _unbroadcast(da, a.shape), _unbroadcast(db, b.shape)

    return _result(cos[..., 0], (a, b), backward)


def softmax_cross_entropy(logits: Tensor, gold) -> Tensor:
    """Mean of ``-log softmax(logits)[gold]`` over the leading axes."""
    gold = np.asarray(gold, dtype=np.intp)
    n_classes = logits.shape[-1]
    if gold.shape != logits.shape[:-1]:
        raise DimensionError(f"gold shape {gold.shape} does not match logits {logits.shape}")
    if gold.size and (gold.min() < 0 or gold.max() >= n_classes):
        raise IndexError(f"gold index out of range [0, {n_classes})")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_p = z - log_norm
    picked = np.take_along_axis(log_p, gold[..., None], axis=-1)[..., 0]
    count = max(gold.size, 1)

    def backward(g):
        d = np.exp(log_p)
        np.put_along_axis(d, gold[..., None], np.take_along_axis(d, gold[..., None], -1) - 1.0, -1)
        return (d * (g / count),)

    return _result(np.asarray(-picked.sum() / count), (logits,), backward)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LSTMParams:
    """One direction of an LSTM. Gate blocks are stacked as [i, f, g, o]."""

    w_ih: Tensor
    w_hh: Tensor
    b_ih: Tensor
    b_hh: Tensor

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_ih.shape[1]

    def tensors(self) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        return self.w_ih, self.w_hh, self.b_ih, self.b_hh


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, params: LSTMParams, mask=None) -> tuple[Tensor, Tensor]:
    """One LSTM step. Returns ``(h', c')``.

    ``mask`` (broadcastable to the batch shape, values 0/1) freezes the state
    wherever it is 0, which is how padded positions are skipped.
    """
    H = params.hidden
    w_ih, w_hh, b_ih, b_hh = params.tensors()
    if w_ih.shape != (4 * H, x.shape[-1]) or w_hh.shape != (4 * H, H):
        raise DimensionError(f"lstm_cell: x{x.shape} vs W_ih{w_ih.shape}, W_hh{w_hh.shape}")
    if b_ih.shape != (4 * H,) or b_hh.shape != (4 * H,):
        raise DimensionError("lstm_cell: bias vectors must have length 4*hidden")
    if h.shape[-1] != H or c.shape != h.shape or h.shape[:-1] != x.shape[:-1]:
        raise DimensionError(f"lstm_cell: state shapes h{h.shape} c{c.shape} vs x{x.shape}")

    xd, hd, cd = x.data, h.data, c.data
    gates = xd @ w_ih.data.T + b_ih.data + hd @ w_hh.data.T + b_hh.data
    i = _sigmoid(gates[..., :H])
    f = _sigmoid(gates[..., H : 2 * H])
    g = np.tanh(gates[..., 2 * H : 3 * H])
    o = _sigmoid(gates[..., 3 * H :])
    c_new = f * cd + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    if mask is not None:
        m = np.asarray(mask, dtype=DTYPE)[..., None] if np.ndim(mask) == x.ndim - 1 else np.asarray(mask, dtype=DTYPE)
        h_new = m * h_new + (1.0 - m) * hd
        c_new = m * c_new + (1.0 - m) * cd

    def backward(grad):
        gh, gc = grad[..., :H], grad[..., H:]
        if mask is not None:
            keep_h, keep_c = (1.0 - m) * gh, (1.0 - m) * gc
            gh, gc = m * gh, m * gc
        dc = gc + gh * o * (1.0 - tc * tc)
        d_gates = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * cd * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                gh * tc * o * (1.0 - o),
            ],
            axis=-1,
        )
        dg2 = d_gates.reshape(-1, 4 * H)
        dx = d_gates @ w_ih.data
        dh = d_gates @ w_hh.data
        dc_prev = dc * f
        if mask is not None:
            dh = dh + keep_h
            dc_prev = dc_prev + keep_c
        db = dg2.sum(axis=0)
        return (
            dx,
            dh,
            dc_prev,
            dg2.T @ xd.reshape(-1, xd.shape[-1]),
            dg2.T @ hd.reshape(-1, H),
            db,
            db.copy(),
        )

    hc = _result(np.concatenate([h_new, c_new], axis=-1), (x, h, c, w_ih, w_hh, b_ih, b_hh), backward)
    return hc[..., :H], hc[..., H:]


def bilstm(seq, fwd: LSTMParams, bwd: LSTMParams, mask=None) -> Tensor:
    """Bidirectional LSTM from zero states; returns ``[h_fwd_last ; h_bwd_last]``.

    ``seq`` is a list of ``[..., in]`` tensors, or a time-major tensor
    ``[L, ..., in]``. ``mask`` has shape ``[L, ...]``; masked steps must form
    a suffix of each sequence (right padding).
    """
    steps = [seq[t] for t in range(seq.shape[0])] if isinstance(seq, Tensor) else list(seq)
    if not steps:
        raise EmptySequenceError("bilstm needs at least one step")
    if fwd.hidden != bwd.hidden:
        raise DimensionError("forward and backward hidden sizes differ")
    masks = [None] * len(steps) if mask is None else [np.asarray(mask[t]) for t in range(len(steps))]
    if len(masks) != len(steps):
        raise DimensionError("mask length does not match sequence length")
    batch = steps[0].shape[:-1]

    def run(params, order):
        h = Tensor(np.zeros(batch + (params.hidden,)))
        c = Tensor(np.zeros(batch + (params.hidden,)))
        for t in order:
            h, c = lstm_cell(steps[t], h, c, params, masks[t])
        return h

    n = len(steps)
    return concat([run(fwd, range(n)), run(bwd, range(n - 1, -1, -1))], axis=-1)


# optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, Tensor], state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place, then clear gradients."""
    missing = [name for name, p in params.items() if p.requires_grad and p.grad is None]
    if missing:
        raise InvariantError(f"no gradient for parameter(s): {', '.join(missing)}")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        if not p.requires_grad:
            continue
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        _check_finite(p.data, name)
        p.grad = None


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None
