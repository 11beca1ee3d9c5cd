"""Minimal dense-tensor engine with reverse-mode differentiation.

Dynamic tape over float64 numpy arrays. Each op validates shapes, builds the
output tensor and registers a backward closure; :func:`backward` runs the
reverse pass from a scalar loss. Only the ops needed by the forecasting
architectures are provided; there is no generic broadcasting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import ShapeError

# When True, every op asserts its output is finite. Off by default: the
# training loop checks losses each epoch and Adam checks gradients.
CHECK_FINITE = False


class Tensor:
    """A node in the computation tape."""

    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[], None] | None = None,
        name: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad
        self.name = name
        if CHECK_FINITE and not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"non-finite values in tensor {name or '<unnamed>'}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def _result(data, parents, backward, name) -> Tensor:
    grad_needed = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=grad_needed, parents=parents, backward=backward, name=name)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Reverse pass from a scalar loss; populates ``.grad`` on the tape."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward()


def gradients(loss: Tensor, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Run backward and return a fresh gradient array per parameter.

    Parameter ``.grad`` slots are cleared afterwards so parameters can be
    reused across tapes without stale accumulation. The tape below ``loss``
    is released: backward closures hold their own output node, so without
    severing, every graph is a reference cycle that waits for the cyclic
    collector while pinning large activation arrays.
    """
    backward(loss)
    out = {
        k: (p.grad if p.grad is not None else np.zeros_like(p.data))
        for k, p in params.items()
    }
    for p in params.values():
        p.grad = None
    release(loss)
    return out


def release(root: Tensor) -> None:
    """Sever a consumed tape so reference counting frees it immediately.

    The root's ``data`` stays readable; parents, closures, and grads are
    dropped for every node under it. After this the tape cannot be
    backward()ed again.
    """
    stack = [root]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(node.parents)
        node._backward = None
        node.parents = ()
        node.grad = None


# ---------------------------------------------------------------------------
# elementwise and linear ops


def add(a: Tensor, b: Tensor, name: str = "add") -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data + b.data, (a, b), None, name)

    def _bw():
        _accumulate(a, out.grad)
        _accumulate(b, out.grad)

    out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor, name: str = "mul") -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data * b.data, (a, b), None, name)

    def _bw():
        _accumulate(a, out.grad * b.data)
        _accumulate(b, out.grad * a.data)

    out._backward = _bw
    return out


def scale(a: Tensor, factor: float, name: str = "scale") -> Tensor:
    out = _result(a.data * factor, (a,), None, name)

    def _bw():
        _accumulate(a, out.grad * factor)

    out._backward = _bw
    return out


def matmul(a: Tensor, b: Tensor, name: str = "matmul") -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"{name}: cannot multiply {a.shape} @ {b.shape}")
    out = _result(a.data @ b.data, (a, b), None, name)

    def _bw():
        _accumulate(a, out.grad @ b.data.T)
        _accumulate(b, a.data.T @ out.grad)

    out._backward = _bw
    return out


def affine(x: Tensor, w: Tensor, b: Tensor, name: str = "affine") -> Tensor:
    """Dense layer ``x @ w + b`` for 2-D ``x``."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"{name}: cannot apply weights {w.shape} to input {x.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"{name}: bias {b.shape} does not match output width {w.shape[1]}")
    out = _result(x.data @ w.data + b.data, (x, w, b), None, name)

    def _bw():
        _accumulate(x, out.grad @ w.data.T)
        _accumulate(w, x.data.T @ out.grad)
        _accumulate(b, out.grad.sum(axis=0))

    out._backward = _bw
    return out


def relu(a: Tensor, name: str = "relu") -> Tensor:
    mask = a.data > 0
    out = _result(np.where(mask, a.data, 0.0), (a,), None, name)

    def _bw():
        _accumulate(a, out.grad * mask)

    out._backward = _bw
    return out


def sigmoid(a: Tensor, name: str = "sigmoid") -> Tensor:
    s = _sigmoid(a.data)
    out = _result(s, (a,), None, name)

    def _bw():
        _accumulate(a, out.grad * s * (1.0 - s))

    out._backward = _bw
    return out


def tanh(a: Tensor, name: str = "tanh") -> Tensor:
    t = np.tanh(a.data)
    out = _result(t, (a,), None, name)

    def _bw():
        _accumulate(a, out.grad * (1.0 - t * t))

    out._backward = _bw
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# structural ops


def concat(parts: list[Tensor], axis: int = -1, name: str = "concat") -> Tensor:
    if not parts:
        raise ShapeError(f"{name}: nothing to concatenate")
    ndim = parts[0].data.ndim
    axis = axis % ndim
    ref = list(parts[0].shape)
    for p in parts[1:]:
        other = list(p.shape)
        if len(other) != ndim or other[:axis] != ref[:axis] or other[axis + 1 :] != ref[axis + 1 :]:
            raise ShapeError(f"{name}: incompatible part shapes {[q.shape for q in parts]}")
    out = _result(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), None, name)
    sizes = [p.shape[axis] for p in parts]

    def _bw():
        offset = 0
        for p, size in zip(parts, sizes):
            idx = [slice(None)] * ndim
            idx[axis] = slice(offset, offset + size)
            _accumulate(p, out.grad[tuple(idx)])
            offset += size

    out._backward = _bw
    return out


def slice_axis(a: Tensor, axis: int, start: int, stop: int, name: str = "slice") -> Tensor:
    ndim = a.data.ndim
    axis = axis % ndim
    size = a.shape[axis]
    if not 0 <= start < stop <= size:
        raise ShapeError(f"{name}: [{start}:{stop}] out of range for axis {axis} of {a.shape}")
    idx = [slice(None)] * ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = _result(a.data[idx], (a,), None, name)

    def _bw():
        g = np.zeros_like(a.data)
        g[idx] = out.grad
        _accumulate(a, g)

    out._backward = _bw
    return out


def reshape(a: Tensor, shape: tuple[int, ...], name: str = "reshape") -> Tensor:
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"{name}: cannot reshape {a.shape} to {shape}")
    out = _result(a.data.reshape(shape), (a,), None, name)

    def _bw():
        _accumulate(a, out.grad.reshape(a.shape))

    out._backward = _bw
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None = None, name: str = "dropout") -> Tensor:
    """Inverted dropout. ``rate == 0`` is the identity map, bit-exact."""
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"{name}: rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        out = _result(a.data, (a,), None, name)

        def _bw_id():
            _accumulate(a, out.grad)

        out._backward = _bw_id
        return out
    if rng is None:
        raise ValueError(f"{name}: a Generator is required when rate > 0")
    keep = rng.random(a.shape) >= rate
    scale_ = 1.0 / (1.0 - rate)
    out = _result(np.where(keep, a.data * scale_, 0.0), (a,), None, name)

    def _bw():
        _accumulate(a, np.where(keep, out.grad * scale_, 0.0))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# sequence ops


def conv1d_causal(x: Tensor, w: Tensor, b: Tensor, dilation: int, name: str = "conv1d") -> Tensor:
    """Causal dilated 1-D convolution.

    ``x`` is (batch, time, in_channels), ``w`` is (kernel, in_channels,
    out_channels), ``b`` is (out_channels,). The input is left-padded with
    ``(kernel - 1) * dilation`` zeros so output t sees inputs at or before t.
    """
    if x.data.ndim != 3 or w.data.ndim != 3:
        raise ShapeError(f"{name}: need 3-D input and kernel, got {x.shape} and {w.shape}")
    k, c_in, c_out = w.shape
    if x.shape[2] != c_in:
        raise ShapeError(f"{name}: input channels {x.shape[2]} != kernel channels {c_in}")
    if b.shape != (c_out,):
        raise ShapeError(f"{name}: bias {b.shape} does not match {c_out} output channels")
    if dilation < 1:
        raise ShapeError(f"{name}: dilation must be >= 1, got {dilation}")
    batch, t_len, _ = x.shape
    pad = (k - 1) * dilation
    xpad = np.zeros((batch, t_len + pad, c_in), dtype=np.float64)
    xpad[:, pad:, :] = x.data
    data = np.empty((batch, t_len, c_out), dtype=np.float64)
    data[:] = b.data
    for j in range(k):
        data += xpad[:, j * dilation : j * dilation + t_len, :] @ w.data[j]
    out = _result(data, (x, w, b), None, name)

    def _bw():
        g = out.grad
        gx_pad = np.zeros_like(xpad)
        g2 = g.reshape(batch * t_len, c_out)
        for j in range(k):
            sl = xpad[:, j * dilation : j * dilation + t_len, :]
            gx_pad[:, j * dilation : j * dilation + t_len, :] += g @ w.data[j].T
            if w.requires_grad:
                _accumulate_kernel(w, j, sl.reshape(batch * t_len, c_in).T @ g2)
        _accumulate(x, gx_pad[:, pad:, :])
        _accumulate(b, g.sum(axis=(0, 1)))

    out._backward = _bw
    return out


def _accumulate_kernel(w: Tensor, j: int, g: np.ndarray) -> None:
    if w.grad is None:
        w.grad = np.zeros_like(w.data)
    w.grad[j] += g


def lstm_cell(
    x: Tensor,
    h: Tensor,
    c: Tensor,
    wx: Tensor,
    wh: Tensor,
    b: Tensor,
    name: str = "lstm_cell",
) -> tuple[Tensor, Tensor]:
    """Standard 4-gate LSTM cell, fused into one tape node.

    ``x`` is (batch, input), ``h``/``c`` are (batch, hidden); ``wx`` is
    (input, 4*hidden), ``wh`` is (hidden, 4*hidden), ``b`` is (4*hidden,)
    with gate order input, forget, cell, output. Returns (h', c').
    """
    if x.data.ndim != 2 or h.data.ndim != 2 or c.data.ndim != 2:
        raise ShapeError(f"{name}: x, h, c must be 2-D")
    batch, d_in = x.shape
    hid4 = wx.shape[1]
    hid = hid4 // 4
    if hid4 != 4 * hid or wx.shape != (d_in, hid4) or wh.shape != (hid, hid4):
        raise ShapeError(f"{name}: weight shapes {wx.shape}, {wh.shape} inconsistent with input {x.shape}")
    if h.shape != (batch, hid) or c.shape != (batch, hid) or b.shape != (hid4,):
        raise ShapeError(f"{name}: state shapes {h.shape}, {c.shape}, bias {b.shape} inconsistent")

    z = x.data @ wx.data + h.data @ wh.data + b.data
    gi = _sigmoid(z[:, :hid])
    gf = _sigmoid(z[:, hid : 2 * hid])
    gg = np.tanh(z[:, 2 * hid : 3 * hid])
    go = _sigmoid(z[:, 3 * hid :])
    c_new = gf * c.data + gi * gg
    t_new = np.tanh(c_new)
    hc = _result(
        np.concatenate([go * t_new, c_new], axis=1), (x, h, c, wx, wh, b), None, name
    )

    def _bw():
        dh_new = hc.grad[:, :hid]
        dc_out = hc.grad[:, hid:]
        dc_total = dc_out + dh_new * go * (1.0 - t_new * t_new)
        dz = np.empty_like(z)
        dz[:, :hid] = dc_total * gg * gi * (1.0 - gi)
        dz[:, hid : 2 * hid] = dc_total * c.data * gf * (1.0 - gf)
        dz[:, 2 * hid : 3 * hid] = dc_total * gi * (1.0 - gg * gg)
        dz[:, 3 * hid :] = dh_new * t_new * go * (1.0 - go)
        _accumulate(x, dz @ wx.data.T)
        _accumulate(h, dz @ wh.data.T)
        _accumulate(c, dc_total * gf)
        _accumulate(wx, x.data.T @ dz)
        _accumulate(wh, h.data.T @ dz)
        _accumulate(b, dz.sum(axis=0))

    hc._backward = _bw
    h_out = slice_axis(hc, 1, 0, hid, name=f"{name}.h")
    c_out = slice_axis(hc, 1, hid, 2 * hid, name=f"{name}.c")
    return h_out, c_out


# ---------------------------------------------------------------------------
# loss


def mse(pred: Tensor, target: np.ndarray, name: str = "mse") -> Tensor:
    """Mean squared error against a constant target; returns a scalar."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"{name}: prediction {pred.shape} vs target {target.shape}")
    diff = pred.data - target
    out = _result(np.mean(diff * diff), (pred,), None, name)

    def _bw():
        _accumulate(pred, out.grad * 2.0 * diff / diff.size)

    out._backward = _bw
    return out


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------------------
# finite-difference oracle


@dataclass
class GradientCheckReport:
    max_rel_err: float
    per_param: dict[str, float]


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = 1e-5,
) -> GradientCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values;
    the finite-difference side only ever evaluates it forward.
    """
    grads = gradients(loss_fn(), params)
    per_param: dict[str, float] = {}
    worst = 0.0
    for pname, p in params.items():
        g_ad = grads[pname]
        g_fd = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        fd_flat = g_fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = float(loss_fn().data)
            flat[i] = orig - step
            down = float(loss_fn().data)
            flat[i] = orig
            fd_flat[i] = (up - down) / (2.0 * step)
        denom = np.maximum(np.maximum(np.abs(g_ad), np.abs(g_fd)), 1e-8)
        err = float(np.max(np.abs(g_ad - g_fd) / denom)) if flat.size else 0.0
        per_param[pname] = err
        worst = max(worst, err)
    return GradientCheckReport(max_rel_err=worst, per_param=per_param)
