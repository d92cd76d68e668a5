"""Reverse-mode automatic differentiation over dense numpy arrays.

A ``Tensor`` wraps an ndarray and remembers how it was produced; calling
``backward()`` on a scalar walks the recorded graph once in reverse
topological order.  The op set is deliberately small: exactly what recurrent
encoders, attention-style pooling, and the two loss heads need.  A fused GRU
cell and a fused cross-entropy keep graphs shallow enough that per-example
training stays cheap in pure Python.

Training runs in 32-bit by default; wrap gradient checks in
``using_dtype(np.float64)`` for 64-bit accuracy.

Checkpoint layout (all integers little-endian):
  magic ``GTX1`` (4 bytes);
  vocabulary block: uint32 token count, then per token uint16 byte length +
  UTF-8 bytes;
  parameter block: uint32 record count, then per record uint16 name length +
  name bytes, uint8 rank, rank * uint32 dims, float32 payload (C order);
  config block: uint32 entry count, then per entry uint16 key length + key
  bytes, uint32 value length + value bytes.
"""

from __future__ import annotations

import contextlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError, UninitializedGradient

# -- global modes ---------------------------------------------------------------

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


def default_dtype():
    return _DEFAULT_DTYPE


def set_default_dtype(dtype) -> None:
    global _DEFAULT_DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _DEFAULT_DTYPE = dtype


@contextlib.contextmanager
def using_dtype(dtype):
    global _DEFAULT_DTYPE
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _DEFAULT_DTYPE = previous


@contextlib.contextmanager
def no_grad():
    """Skip graph recording inside the block; forward values only."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


# -- tensors ---------------------------------------------------------------------


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None
        self._op = "leaf"

    # construction of derived tensors --------------------------------------

    @staticmethod
    def _result(data, parents: tuple["Tensor", ...], op: str) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._op = op
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
        else:
            out.requires_grad = False
            out._parents = ()
        out._backward = None
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # bookkeeping ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(op={self._op}, shape={self.shape}, grad={self.requires_grad})"

    def backward(self) -> None:
        if self.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()

    # operator sugar -----------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return narrow(self, key)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(a: Tensor, b: Tensor, op: str, fwd, da, db) -> Tensor:
    try:
        data = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape}: {exc}") from None
    out = Tensor._result(data, (a, b), op)

    if out.requires_grad:
        def backward():
            g = out.grad
            if a.requires_grad:
                a._accumulate(_unbroadcast(da(g, a.data, b.data), a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(db(g, a.data, b.data), b.shape))

        out._backward = backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "add", lambda x, y: x + y,
                   lambda g, x, y: g, lambda g, x, y: g)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "sub", lambda x, y: x - y,
                   lambda g, x, y: g, lambda g, x, y: -g)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "mul", lambda x, y: x * y,
                   lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a: Tensor, b: Tensor) -> Tensor:
    return _binary(a, b, "div", lambda x, y: x / y,
                   lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y))


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties send the gradient to the first argument."""
    return _binary(a, b, "maximum", np.maximum,
                   lambda g, x, y: g * (x >= y), lambda g, x, y: g * (x < y))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim == 0 or b.data.ndim == 0 or a.data.ndim > 2 or b.data.ndim > 2:
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ: {a.shape} @ {b.shape}")
    out = Tensor._result(a.data @ b.data, (a, b), "matmul")

    if out.requires_grad:
        def backward():
            g = out.grad
            x, y = a.data, b.data
            if a.data.ndim == 2 and b.data.ndim == 2:
                ga, gb = g @ y.T, x.T @ g
            elif a.data.ndim == 2 and b.data.ndim == 1:
                ga, gb = np.outer(g, y), x.T @ g
            elif a.data.ndim == 1 and b.data.ndim == 2:
                ga, gb = y @ g, np.outer(x, g)
            else:  # 1-D dot
                ga, gb = g * y, g * x
            if a.requires_grad:
                a._accumulate(ga)
            if b.requires_grad:
                b._accumulate(gb)

        out._backward = backward
    return out


def _unary(a: Tensor, op: str, fwd, dfn) -> Tensor:
    data = fwd(a.data)
    out = Tensor._result(data, (a,), op)
    if out.requires_grad:
        def backward():
            a._accumulate(dfn(out.grad, a.data, out.data))

        out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    return _unary(a, "tanh", np.tanh, lambda g, x, y: g * (1.0 - y * y))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    return _unary(a, "sigmoid", _stable_sigmoid, lambda g, x, y: g * y * (1.0 - y))


def exp(a: Tensor) -> Tensor:
    return _unary(a, "exp", np.exp, lambda g, x, y: g * y)


def log(a: Tensor) -> Tensor:
    return _unary(a, "log", np.log, lambda g, x, y: g / x)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    return _unary(
        a,
        "leaky_relu",
        lambda x: np.where(x > 0, x, slope * x),
        lambda g, x, y: g * np.where(x > 0, 1.0, slope),
    )


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through unclamped entries."""
    return _unary(
        a,
        "clip",
        lambda x: np.clip(x, lo, hi),
        lambda g, x, y: g * ((x > lo) & (x < hi)),
    )


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    data = a.data.sum(axis=axis)
    out = Tensor._result(np.asarray(data), (a,), "sum")
    if out.requires_grad:
        def backward():
            g = out.grad
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.shape).copy())
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

        out._backward = backward
    return out


def tmean(a: Tensor, axis: int | None = None) -> Tensor:
    n = a.size if axis is None else a.shape[axis]
    return tsum(a, axis) * (1.0 / n)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: need at least one tensor")
    data = np.concatenate([p.data for p in parts], axis=axis)
    out = Tensor._result(data, tuple(parts), "concat")
    if out.requires_grad:
        sizes = [p.shape[axis] for p in parts]
        offsets = np.cumsum([0] + sizes)

        def backward():
            g = out.grad
            for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if p.requires_grad:
                    index = [slice(None)] * g.ndim
                    index[axis] = slice(lo, hi)
                    p._accumulate(g[tuple(index)])

        out._backward = backward
    return out


def stack(parts: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    data = np.stack([p.data for p in parts])
    out = Tensor._result(data, tuple(parts), "stack")
    if out.requires_grad:
        def backward():
            for i, p in enumerate(parts):
                if p.requires_grad:
                    p._accumulate(out.grad[i])

        out._backward = backward
    return out


def narrow(a: Tensor, key) -> Tensor:
    data = a.data[key]
    out = Tensor._result(np.asarray(data), (a,), "narrow")
    if out.requires_grad:
        def backward():
            full = np.zeros_like(a.data)
            full[key] = out.grad
            a._accumulate(full)

        out._backward = backward
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    data = a.data.reshape(shape)
    out = Tensor._result(data, (a,), "reshape")
    if out.requires_grad:
        def backward():
            a._accumulate(out.grad.reshape(a.shape))

        out._backward = backward
    return out


def rows(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup)."""
    idx = np.asarray(indices, dtype=np.int64)
    out = Tensor._result(table.data[idx], (table,), "rows")
    if out.requires_grad:
        def backward():
            full = np.zeros_like(table.data)
            np.add.at(full, idx, out.grad)
            table._accumulate(full)

        out._backward = backward
    return out


def softmax(a: Tensor) -> Tensor:
    """1-D softmax; ``-inf`` entries get probability exactly zero."""
    x = a.data
    finite = np.isfinite(x)
    if not finite.any():
        raise ShapeError("softmax: all entries are masked")
    shifted = x - x[finite].max()
    e = np.exp(shifted, where=np.isfinite(shifted), out=np.zeros_like(x))
    s = e / e.sum()
    out = Tensor._result(s, (a,), "softmax")
    if out.requires_grad:
        def backward():
            g = out.grad
            inner = float((g * s).sum())
            grad = s * (g - inner)
            a._accumulate(np.where(finite, grad, 0.0))

        out._backward = backward
    return out


def dropout(a: Tensor, rate: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Zero each element with probability ``rate`` during training, scaling
    survivors by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.data.dtype) / (1.0 - rate)
    return mul(a, Tensor(keep))


def cross_entropy(logits: Tensor, target: int, blocked: Sequence[int] = ()) -> Tensor:
    """Fused negative log-softmax likelihood over a 1-D logit vector.

    ``blocked`` indices are excluded from the distribution entirely (their
    probability is structurally zero, and they receive no gradient).
    """
    x = logits.data.astype(np.float64, copy=True)
    mask = np.zeros(x.shape, dtype=bool)
    mask[list(blocked)] = True
    if mask[target]:
        raise ShapeError(f"cross_entropy: target {target} is blocked")
    x[mask] = -np.inf
    m = x[~mask].max()
    logsumexp = m + math.log(np.exp(x[~mask] - m).sum())
    nll = logsumexp - x[target]
    out = Tensor._result(
        np.asarray(nll, dtype=logits.data.dtype), (logits,), "cross_entropy"
    )
    if out.requires_grad:
        def backward():
            g = float(out.grad)
            probs = np.exp(x - logsumexp, where=~mask,
                           out=np.zeros_like(x)).astype(logits.data.dtype)
            probs[target] -= 1.0
            logits._accumulate(g * probs)

        out._backward = backward
    return out


def gru_cell(x: Tensor, h: Tensor, w: Tensor, u: Tensor, b_i: Tensor, b_h: Tensor) -> Tensor:
    """One gated recurrent step (gates ordered reset, update, candidate):

        gi = W x + b_i          gh = U h + b_h
        r = sigmoid(gi_r + gh_r)
        z = sigmoid(gi_z + gh_z)
        n = tanh(gi_n + r * gh_n)
        h' = (1 - z) * n + z * h

    Fused into a single graph node with a hand-derived backward pass.
    """
    d = h.shape[0]
    if w.shape != (3 * d, x.shape[0]) or u.shape != (3 * d, d):
        raise ShapeError(
            f"gru_cell: weights {w.shape}/{u.shape} do not match x {x.shape}, h {h.shape}"
        )
    gi = w.data @ x.data + b_i.data
    gh = u.data @ h.data + b_h.data
    i_r, i_z, i_n = gi[:d], gi[d : 2 * d], gi[2 * d :]
    h_r, h_z, h_n = gh[:d], gh[d : 2 * d], gh[2 * d :]
    r = _stable_sigmoid(i_r + h_r)
    z = _stable_sigmoid(i_z + h_z)
    n = np.tanh(i_n + r * h_n)
    new_h = (1.0 - z) * n + z * h.data
    out = Tensor._result(new_h, (x, h, w, u, b_i, b_h), "gru_cell")

    if out.requires_grad:
        def backward():
            g = out.grad
            dz = g * (h.data - n) * z * (1.0 - z)
            dn_pre = g * (1.0 - z) * (1.0 - n * n)
            dr = dn_pre * h_n * r * (1.0 - r)
            dgi = np.concatenate([dr, dz, dn_pre])
            dgh = np.concatenate([dr, dz, dn_pre * r])
            if x.requires_grad:
                x._accumulate(w.data.T @ dgi)
            if h.requires_grad:
                h._accumulate(u.data.T @ dgh + g * z)
            if w.requires_grad:
                w._accumulate(np.outer(dgi, x.data))
            if u.requires_grad:
                u._accumulate(np.outer(dgh, h.data))
            if b_i.requires_grad:
                b_i._accumulate(dgi)
            if b_h.requires_grad:
                b_h._accumulate(dgh)

        out._backward = backward
    return out


def linear(w: Tensor, x: Tensor, b: Tensor | None = None) -> Tensor:
    out = matmul(w, x)
    return out if b is None else add(out, b)


# -- parameters and optimization ---------------------------------------------------


class ParameterStore:
    """Named trainable tensors plus their momentum buffers."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._momentum: dict[str, np.ndarray] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"parameter {name!r} already registered")
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return ((name, self._params[name]) for name in self.names())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, value in arrays.items():
            target = self._params[name]
            if target.data.shape != value.shape:
                raise ShapeError(
                    f"parameter {name!r}: stored shape {value.shape} "
                    f"!= declared {target.data.shape}"
                )
            target.data = value.astype(target.data.dtype)

    def clone(self) -> "ParameterStore":
        twin = ParameterStore()
        for name, t in self.items():
            twin.add(name, t.data.copy())
        return twin


@dataclass
class OptimizerConfig:
    base_lr: float = 0.25
    min_lr: float = 0.05
    cycle_epochs: int = 5
    momentum: float = 0.9
    dropout_rate: float = 0.3
    epochs: int = 50

    def __post_init__(self):
        if not 0 < self.min_lr <= self.base_lr:
            raise ValueError("need 0 < min_lr <= base_lr")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.cycle_epochs < 1:
            raise ValueError("cycle_epochs must be >= 1")


def learning_rate(cfg: OptimizerConfig, epoch: float) -> float:
    """Cosine decay from base_lr to min_lr, restarting every cycle."""
    phase = (epoch % cfg.cycle_epochs) / cfg.cycle_epochs
    return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * (1.0 + math.cos(math.pi * phase)) / 2.0


def sgd_step(store: ParameterStore, cfg: OptimizerConfig, epoch: float) -> None:
    """Momentum update in place at the scheduled learning rate."""
    lr = learning_rate(cfg, epoch)
    for name, t in store.items():
        if t.grad is None:
            raise UninitializedGradient(f"parameter {name!r} has no gradient")
        buf = store._momentum.get(name)
        if buf is None:
            buf = np.zeros_like(t.data)
        buf = cfg.momentum * buf + t.grad
        store._momentum[name] = buf
        t.data = t.data - lr * buf


# -- checkpoint I/O -----------------------------------------------------------------

MAGIC = b"GTX1"


def save_checkpoint(
    path: str | Path,
    vocab_tokens: Sequence[str],
    arrays: dict[str, np.ndarray],
    config: dict[str, str],
) -> None:
    """Serialize vocabulary, parameters, and config (layout in module docstring)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(vocab_tokens)))
        for token in vocab_tokens:
            raw = token.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())
        fh.write(struct.pack("<I", len(config)))
        for key in sorted(config):
            kraw = key.encode("utf-8")
            vraw = config[key].encode("utf-8")
            fh.write(struct.pack("<H", len(kraw)))
            fh.write(kraw)
            fh.write(struct.pack("<I", len(vraw)))
            fh.write(vraw)


def load_checkpoint(
    path: str | Path,
) -> tuple[list[str], dict[str, np.ndarray], dict[str, str]]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    offset = 4

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values[0] if len(values) == 1 else values

    def take_bytes(n: int) -> bytes:
        nonlocal offset
        raw = blob[offset : offset + n]
        offset += n
        return raw

    vocab = []
    for _ in range(take("<I")):
        vocab.append(take_bytes(take("<H")).decode("utf-8"))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(take("<I")):
        name = take_bytes(take("<H")).decode("utf-8")
        rank = take("<B")
        shape = tuple(take("<I") for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        flat = np.frombuffer(take_bytes(4 * count), dtype="<f4")
        arrays[name] = flat.reshape(shape).astype(_DEFAULT_DTYPE)
    config: dict[str, str] = {}
    for _ in range(take("<I")):
        key = take_bytes(take("<H")).decode("utf-8")
        config[key] = take_bytes(take("<I")).decode("utf-8")
    return vocab, arrays, config
