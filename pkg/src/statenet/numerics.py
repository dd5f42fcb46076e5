"""Dense float64 kernels and a minimal reverse-mode gradient tape.

Forward values are numpy arrays wrapped in :class:`Tensor`. Every public
operation checks its result for NaN/Inf and raises :class:`NumericsError`
naming the operation and the operand shapes, so a numeric fault points at
its origin instead of surfacing later as a corrupted loss.

Gradients: create a :class:`Tape`, register leaves with :meth:`Tape.leaf`,
run ops, then call :meth:`Tape.backward` on a scalar. The backward pass
replays the recorded operations in exact reverse order; a tensor that does
not lie on any path to the loss keeps a gradient of exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NumericsError",
    "Tensor",
    "Tape",
    "constant",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "repeat_row",
    "sigmoid",
    "tanh",
    "exp",
    "logsumexp",
    "softmax",
    "softmax_row",
    "stack_rows",
    "gather_elements",
    "gather_rows",
    "take_row",
    "take_col",
    "take",
    "narrow",
    "narrow_cols",
    "total",
    "mean",
    "detach",
    "straight_through",
    "grad_check",
    "GradCheckReport",
]


class NumericsError(ValueError):
    """Non-finite value or malformed operand inside a numeric kernel."""


def _as_f64(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if not a.flags.c_contiguous:
        a = np.ascontiguousarray(a)
    return a


class Tensor:
    """Immutable float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "name")

    def __init__(self, data, tape: "Tape | None" = None, name: str = ""):
        self.data = _as_f64(data)
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    @property
    def grad(self) -> np.ndarray:
        """Gradient accumulated by the owning tape (zeros if off-path)."""
        if self.tape is None:
            raise NumericsError("grad: tensor is not tracked on any tape")
        return self.tape.grad(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, tracked={self.tape is not None})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of primitive ops plus per-tensor gradient accumulators.

    One tape serves one backward pass (define-by-run); training rebuilds a
    fresh tape every step. Single-threaded by design: run independent tapes
    on disjoint sentences for parallelism.
    """

    def __init__(self):
        # each entry: (op name, output tensor, ((input tensor, vjp), ...))
        self._ops: list[tuple[str, Tensor, tuple]] = []
        self._grads: dict[int, np.ndarray] = {}

    def leaf(self, data, name: str = "") -> Tensor:
        return Tensor(data, tape=self, name=name)

    def n_ops(self) -> int:
        return len(self._ops)

    def backward(self, loss: Tensor) -> None:
        if loss.tape is not self:
            raise NumericsError("backward: loss tensor does not belong to this tape")
        if loss.data.shape != ():
            raise NumericsError(f"backward: loss must be scalar, got shape {loss.data.shape}")
        grads = self._grads
        grads.clear()
        grads[id(loss)] = np.ones((), dtype=np.float64)
        for name, out, edges in reversed(self._ops):
            g = grads.get(id(out))
            if g is None:
                continue
            for tensor, vjp in edges:
                contrib = vjp(g)
                tid = id(tensor)
                prev = grads.get(tid)
                grads[tid] = contrib if prev is None else prev + contrib

    def grad(self, t: Tensor) -> np.ndarray:
        if t.tape is not self:
            raise NumericsError("grad: tensor does not belong to this tape")
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros_like(t.data)
        return np.asarray(g, dtype=np.float64).reshape(t.data.shape)


def constant(x) -> Tensor:
    """Wrap a value as an untracked tensor (tensors pass through)."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _apply(name: str, out_data: np.ndarray, edges: Sequence[tuple[Tensor, Callable]]) -> Tensor:
    tape = None
    for t, _ in edges:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise NumericsError(f"{name}: operands recorded on different tapes")
    # cheap probe first (NaN/Inf propagate through the sum); the exact check
    # only runs when the probe trips, so huge-but-finite sums cannot misfire
    if not math.isfinite(out_data.sum()) and not np.isfinite(out_data).all():
        shapes = ", ".join(str(t.data.shape) for t, _ in edges)
        raise NumericsError(f"{name}: non-finite result (operand shapes: {shapes})")
    out = Tensor(out_data, tape=tape)
    if tape is not None:
        tracked = tuple((t, vjp) for t, vjp in edges if t.tape is not None)
        tape._ops.append((name, out, tracked))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = a.data + b.data
    return _apply(
        "add",
        out,
        (
            (a, lambda g, sa=a.data.shape: _unbroadcast(g, sa)),
            (b, lambda g, sb=b.data.shape: _unbroadcast(g, sb)),
        ),
    )


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = a.data - b.data
    return _apply(
        "sub",
        out,
        (
            (a, lambda g, sa=a.data.shape: _unbroadcast(g, sa)),
            (b, lambda g, sb=b.data.shape: _unbroadcast(-g, sb)),
        ),
    )


def mul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = a.data * b.data
    return _apply(
        "mul",
        out,
        (
            (a, lambda g, bd=b.data, sa=a.data.shape: _unbroadcast(g * bd, sa)),
            (b, lambda g, ad=a.data, sb=b.data.shape: _unbroadcast(g * ad, sb)),
        ),
    )


def neg(a) -> Tensor:
    a = constant(a)
    return _apply("neg", -a.data, ((a, lambda g: -g),))


def matmul(a, b) -> Tensor:
    """Matrix/vector product for the 1-D/2-D combinations the model needs."""
    a, b = constant(a), constant(b)
    ad, bd = a.data, b.data
    if ad.ndim > 2 or bd.ndim > 2 or ad.ndim == 0 or bd.ndim == 0:
        raise NumericsError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    try:
        out = ad @ bd
    except ValueError as e:
        raise NumericsError(f"matmul: shape mismatch {ad.shape} @ {bd.shape}") from e

    def grad_a(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T
        if ad.ndim == 1 and bd.ndim == 2:
            return bd @ g
        if ad.ndim == 2 and bd.ndim == 1:
            return np.outer(g, bd)
        return g * bd  # 1-D dot

    def grad_b(g):
        if ad.ndim == 2 and bd.ndim == 2:
            return ad.T @ g
        if ad.ndim == 1 and bd.ndim == 2:
            return np.outer(ad, g)
        if ad.ndim == 2 and bd.ndim == 1:
            return ad.T @ g
        return g * ad

    return _apply("matmul", out, ((a, grad_a), (b, grad_b)))


def transpose(a) -> Tensor:
    a = constant(a)
    if a.data.ndim != 2:
        raise NumericsError(f"transpose: expected 2-D, got shape {a.data.shape}")
    return _apply("transpose", a.data.T, ((a, lambda g: g.T),))


def reshape(a, shape) -> Tensor:
    a = constant(a)
    old = a.data.shape
    return _apply("reshape", a.data.reshape(shape), ((a, lambda g: g.reshape(old)),))


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [constant(p) for p in parts]
    if not parts:
        raise NumericsError("concat: empty input list")
    out = np.concatenate([p.data for p in parts], axis=axis)
    edges = []
    offset = 0
    for p in parts:
        n = p.data.shape[axis]
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(offset, offset + n)
        edges.append((p, lambda g, s=tuple(sl): g[s].copy()))
        offset += n
    return _apply("concat", out, tuple(edges))


def repeat_row(v, n: int) -> Tensor:
    """Tile a vector into n identical rows; backward sums over rows."""
    v = constant(v)
    if v.data.ndim != 1:
        raise NumericsError(f"repeat_row: expected vector, got shape {v.data.shape}")
    out = np.broadcast_to(v.data, (n, v.data.shape[0]))
    return _apply("repeat_row", out, ((v, lambda g: g.sum(axis=0)),))


def sigmoid(a) -> Tensor:
    a = constant(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _apply("sigmoid", out, ((a, lambda g, y=out: g * y * (1.0 - y)),))


def tanh(a) -> Tensor:
    a = constant(a)
    out = np.tanh(a.data)
    return _apply("tanh", out, ((a, lambda g, y=out: g * (1.0 - y * y)),))


def exp(a) -> Tensor:
    a = constant(a)
    with np.errstate(over="ignore"):  # overflow -> inf, caught by _apply
        out = np.exp(a.data)
    return _apply("exp", out, ((a, lambda g, y=out: g * y),))


def logsumexp(a, axis: int | None = None) -> Tensor:
    """log sum exp, computed with a max shift; exact on constant vectors."""
    a = constant(a)
    x = a.data
    if x.size == 0:
        raise NumericsError(f"logsumexp: empty operand (shape {x.shape})")
    if not np.isfinite(x).all():
        raise NumericsError(f"logsumexp: non-finite operand (shape {x.shape})")
    if axis is None:
        m = x.max()
        out = np.asarray(m + np.log(np.exp(x - m).sum()))

        def vjp(g, y=out):
            return g * np.exp(x - y)

    else:
        m = x.max(axis=axis, keepdims=True)
        outk = m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))
        out = np.squeeze(outk, axis=axis)

        def vjp(g, yk=outk):
            return np.expand_dims(g, axis) * np.exp(x - yk)

    return _apply("logsumexp", out, ((a, vjp),))


def softmax(a, axis: int = -1) -> Tensor:
    a = constant(a)
    x = a.data
    if x.size == 0:
        raise NumericsError(f"softmax: empty operand (shape {x.shape})")
    if not np.isfinite(x).all():
        raise NumericsError(f"softmax: non-finite operand (shape {x.shape})")
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, y=out):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return y * (g - dot)

    return _apply("softmax", out, ((a, vjp),))


def softmax_row(v) -> Tensor:
    """Softmax of a single vector (order-preserving, shift-invariant)."""
    v = constant(v)
    if v.data.ndim != 1:
        raise NumericsError(f"softmax_row: expected vector, got shape {v.data.shape}")
    return softmax(v, axis=-1)


def stack_rows(vectors: Sequence) -> Tensor:
    """Stack equal-length vectors into a matrix; backward splits the rows."""
    vectors = [constant(v) for v in vectors]
    if not vectors:
        raise NumericsError("stack_rows: empty input list")
    if any(v.data.ndim != 1 for v in vectors):
        raise NumericsError("stack_rows: all inputs must be vectors")
    out = np.stack([v.data for v in vectors])
    edges = tuple((v, lambda g, i=i: g[i].copy()) for i, v in enumerate(vectors))
    return _apply("stack_rows", out, edges)


def gather_elements(m, idx) -> Tensor:
    """Pick one element per row: out[i] = m[i, idx[i]]; backward scatters."""
    m = constant(m)
    idx = np.asarray(idx, dtype=np.intp)
    if m.data.ndim != 2 or idx.shape != (m.data.shape[0],):
        raise NumericsError(
            f"gather_elements: need matrix and one index per row, got {m.data.shape} and {idx.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= m.data.shape[1]):
        raise NumericsError(f"gather_elements: index out of range for {m.data.shape[1]} columns")
    rows = np.arange(m.data.shape[0])
    out = m.data[rows, idx]

    def vjp(g, shape=m.data.shape, rows=rows, ix=idx):
        z = np.zeros(shape, dtype=np.float64)
        z[rows, ix] = g
        return z

    return _apply("gather_elements", out, ((m, vjp),))


def gather_rows(m, idx) -> Tensor:
    """Select rows of a matrix by integer index; backward scatters."""
    m = constant(m)
    idx = np.asarray(idx, dtype=np.intp)
    if m.data.ndim != 2:
        raise NumericsError(f"gather_rows: expected matrix, got shape {m.data.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= m.data.shape[0]):
        raise NumericsError(f"gather_rows: index out of range for {m.data.shape[0]} rows")
    out = m.data[idx]

    def vjp(g, shape=m.data.shape, ix=idx):
        z = np.zeros(shape, dtype=np.float64)
        np.add.at(z, ix, g)
        return z

    return _apply("gather_rows", out, ((m, vjp),))


def take_row(m, i: int) -> Tensor:
    m = constant(m)
    if m.data.ndim != 2 or not (0 <= i < m.data.shape[0]):
        raise NumericsError(f"take_row: bad row {i} for shape {m.data.shape}")
    out = m.data[i].copy()

    def vjp(g, shape=m.data.shape, i=i):
        z = np.zeros(shape, dtype=np.float64)
        z[i] = g
        return z

    return _apply("take_row", out, ((m, vjp),))


def take_col(m, j: int) -> Tensor:
    m = constant(m)
    if m.data.ndim != 2 or not (0 <= j < m.data.shape[1]):
        raise NumericsError(f"take_col: bad column {j} for shape {m.data.shape}")
    out = m.data[:, j].copy()

    def vjp(g, shape=m.data.shape, j=j):
        z = np.zeros(shape, dtype=np.float64)
        z[:, j] = g
        return z

    return _apply("take_col", out, ((m, vjp),))


def take(a, index) -> Tensor:
    """Pick a single scalar element; backward scatters into its slot."""
    a = constant(a)
    index = tuple(int(i) for i in np.atleast_1d(index))
    out = np.asarray(a.data[index])
    if out.shape != ():
        raise NumericsError(f"take: index {index} does not select a scalar from {a.data.shape}")

    def vjp(g, shape=a.data.shape, ix=index):
        z = np.zeros(shape, dtype=np.float64)
        z[ix] = g
        return z

    return _apply("take", out, ((a, vjp),))


def narrow(v, start: int, length: int) -> Tensor:
    """Contiguous slice of a vector; backward scatters into the slice."""
    v = constant(v)
    if v.data.ndim != 1 or start < 0 or start + length > v.data.shape[0]:
        raise NumericsError(f"narrow: bad slice [{start}:{start + length}] of shape {v.data.shape}")
    out = v.data[start : start + length].copy()

    def vjp(g, n=v.data.shape[0], s=start, ln=length):
        z = np.zeros(n, dtype=np.float64)
        z[s : s + ln] = g
        return z

    return _apply("narrow", out, ((v, vjp),))


def narrow_cols(m, start: int, length: int) -> Tensor:
    """Contiguous column slice of a matrix; backward scatters columns."""
    m = constant(m)
    if m.data.ndim != 2 or start < 0 or start + length > m.data.shape[1]:
        raise NumericsError(
            f"narrow_cols: bad slice [{start}:{start + length}] of shape {m.data.shape}"
        )
    out = m.data[:, start : start + length].copy()

    def vjp(g, shape=m.data.shape, s=start, ln=length):
        z = np.zeros(shape, dtype=np.float64)
        z[:, s : s + ln] = g
        return z

    return _apply("narrow_cols", out, ((m, vjp),))


def total(a, axis: int | None = None) -> Tensor:
    a = constant(a)
    if axis is None:
        out = np.asarray(a.data.sum())
        vjp = lambda g, shape=a.data.shape: np.broadcast_to(g, shape).copy()
    else:
        out = a.data.sum(axis=axis)

        def vjp(g, shape=a.data.shape, ax=axis):
            return np.broadcast_to(np.expand_dims(g, ax), shape).copy()

    return _apply("sum", out, ((a, vjp),))


def mean(a) -> Tensor:
    a = constant(a)
    n = a.data.size
    if n == 0:
        raise NumericsError("mean: empty operand")
    return mul(total(a), 1.0 / n)


def detach(a) -> Tensor:
    """Copy a tensor's value off the tape (no gradient flows through)."""
    a = constant(a)
    return Tensor(a.data)


def straight_through(hard, soft: Tensor) -> Tensor:
    """Forward the hard value, route the gradient to the soft relaxation."""
    hard = np.asarray(hard, dtype=np.float64)
    if hard.shape != soft.data.shape:
        raise NumericsError(
            f"straight_through: shape mismatch {hard.shape} vs {soft.data.shape}"
        )
    return _apply("straight_through", hard.copy(), ((soft, lambda g: g),))


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: tuple[int, ...]
    n_coords: int


def grad_check(
    loss_fn: Callable[[dict[str, Tensor]], Tensor],
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
) -> GradCheckReport:
    """Compare tape gradients of a scalar loss against central differences.

    ``loss_fn`` receives a dict of tensors (tracked or constant) and must
    return a scalar tensor; it has to be deterministic. The relative error
    per coordinate is |a - b| / max(1, |a|, |b|).
    """
    if not (1e-7 <= eps <= 1e-3):
        raise NumericsError(f"grad_check: eps {eps} outside [1e-7, 1e-3]")
    tape = Tape()
    leaves = {k: tape.leaf(v, name=k) for k, v in params.items()}
    loss = loss_fn(leaves)
    tape.backward(loss)
    analytic = {k: tape.grad(t) for k, t in leaves.items()}

    worst = 0.0
    worst_param = ""
    worst_index: tuple[int, ...] = ()
    n_coords = 0
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    for k, v in base.items():
        flat = v.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn({kk: Tensor(vv) for kk, vv in base.items()}).item()
            flat[i] = orig - eps
            lo = loss_fn({kk: Tensor(vv) for kk, vv in base.items()}).item()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            a = analytic[k].reshape(-1)[i]
            rel = abs(a - fd) / max(1.0, abs(a), abs(fd))
            n_coords += 1
            if rel > worst:
                worst = rel
                worst_param = k
                worst_index = tuple(int(x) for x in np.unravel_index(i, v.shape))
    return GradCheckReport(worst, worst_param, worst_index, n_coords)
