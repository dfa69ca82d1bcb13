"""Layer primitives on batched 1-D channelized signals.

Signals are numpy arrays shaped ``(batch, channels, length)``. Every forward
function is pure: it returns its output plus whatever the matching backward
needs, and never touches shared state. Stored tensors are float32; the
kernels preserve the input dtype so the same code can be run in float64 for
gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DataError, NumericError, ShapeError

DTYPE = np.float32


@dataclass
class ParamTensor:
    """A trainable tensor with its gradient and adaptive-moment state."""

    values: np.ndarray
    grad: np.ndarray = field(default=None, repr=False)
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)
    step_count: int = 0

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values)
        for name in ("grad", "m", "v"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(self.values))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def zero_grad(self) -> None:
        self.grad.fill(0)

    def copy(self) -> "ParamTensor":
        return ParamTensor(
            self.values.copy(), self.grad.copy(), self.m.copy(), self.v.copy(), self.step_count
        )

    def astype(self, dtype) -> "ParamTensor":
        return ParamTensor(
            self.values.astype(dtype),
            self.grad.astype(dtype),
            self.m.astype(dtype),
            self.v.astype(dtype),
            self.step_count,
        )


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.isfinite(x).all():
        raise NumericError(f"non-finite values in {what}")


def as_batch(x: np.ndarray) -> np.ndarray:
    """Promote a single ``(channels, length)`` signal to a batch of one."""
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None]
    if x.ndim != 3:
        raise ShapeError(f"expected (channels, length) or (batch, channels, length), got {x.shape}")
    return x


# -- conv1d ---------------------------------------------------------------


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Stride-1, zero same-padded cross-correlation.

    ``x`` is ``(N, C, L)``, ``w`` is ``(O, C, k)`` with odd ``k``, ``b`` is
    ``(O,)``. Returns ``(out, cache)`` with ``out`` shaped ``(N, O, L)``.
    """
    if x.ndim != 3:
        raise ShapeError(f"conv1d input must be (N, C, L), got {x.shape}")
    n, c, length = x.shape
    out_ch, in_ch, k = w.shape
    if in_ch != c:
        raise ShapeError(f"conv1d expects {in_ch} input channels, got {c}")
    if k % 2 != 1:
        raise ShapeError(f"conv1d kernel size must be odd, got {k}")
    if b.shape != (out_ch,):
        raise ShapeError(f"conv1d bias must be ({out_ch},), got {b.shape}")
    _check_finite(x, "conv1d input")

    pad = k // 2
    if pad:
        xp = np.zeros((n, c, length + 2 * pad), dtype=x.dtype)
        xp[:, :, pad:pad + length] = x
    else:
        xp = x
    # (N, C, L, k) -> (N, L, C, k) -> (N*L, C*k)
    cols = sliding_window_view(xp, k, axis=2).transpose(0, 2, 1, 3).reshape(n * length, c * k)
    wmat = w.reshape(out_ch, c * k)
    out = cols @ wmat.T
    out += b
    out = out.reshape(n, length, out_ch).transpose(0, 2, 1)
    return np.ascontiguousarray(out), (cols, w, x.shape)


def conv1d_backward(dout: np.ndarray, cache):
    """Return ``(dx, dw, db)`` for :func:`conv1d_forward`."""
    cols, w, (n, c, length) = cache
    out_ch, _, k = w.shape
    pad = k // 2
    dflat = dout.transpose(0, 2, 1).reshape(n * length, out_ch)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dout.sum(axis=(0, 2))
    dcols = (dflat @ w.reshape(out_ch, c * k)).reshape(n, length, c, k)
    dxp = np.zeros((n, c, length + 2 * pad), dtype=dout.dtype)
    for j in range(k):
        dxp[:, :, j:j + length] += dcols[:, :, :, j].transpose(0, 2, 1)
    return dxp[:, :, pad:pad + length], dw, db


def conv1d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Convolve a single ``(C, L)`` signal or a ``(N, C, L)`` batch."""
    single = np.ndim(x) == 2
    out, _ = conv1d_forward(as_batch(x), w, b)
    return out[0] if single else out


# -- maxpool1d ------------------------------------------------------------


def maxpool1d_forward(x: np.ndarray, window: int = 2, stride: int = 2):
    """Max over windows; the incomplete trailing window is dropped.

    Returns ``(out, argmax)`` where ``argmax`` holds absolute input positions.
    Ties go to the first index in the window.
    """
    if x.ndim != 3:
        raise ShapeError(f"maxpool1d input must be (N, C, L), got {x.shape}")
    length = x.shape[2]
    if length < window:
        raise ShapeError(f"maxpool1d needs length >= {window}, got {length}")
    windows = sliding_window_view(x, window, axis=2)[:, :, ::stride]
    local = windows.argmax(axis=3)
    out = np.take_along_axis(windows, local[..., None], axis=3)[..., 0]
    argmax = local + (np.arange(local.shape[2]) * stride)
    return np.ascontiguousarray(out), (argmax, length, window, stride)


def maxpool1d_backward(dout: np.ndarray, cache) -> np.ndarray:
    argmax, length, window, stride = cache
    n, c, _ = dout.shape
    dx = np.zeros((n, c, length), dtype=dout.dtype)
    if window <= stride:
        # windows are disjoint, so every argmax position is unique
        np.put_along_axis(dx, argmax, dout, axis=2)
    else:
        rows = np.arange(n)[:, None, None]
        chans = np.arange(c)[None, :, None]
        np.add.at(dx, (rows, chans, argmax), dout)
    return dx


def maxpool1d(x: np.ndarray, window: int = 2, stride: int = 2):
    single = np.ndim(x) == 2
    out, cache = maxpool1d_forward(as_batch(x), window, stride)
    argmax = cache[0]
    return (out[0], argmax[0]) if single else (out, argmax)


# -- relu -----------------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is 0
    return dout * (x > 0)


# -- dense ----------------------------------------------------------------


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``x @ w.T + b`` for ``x`` of shape ``(N, n)`` or ``(n,)``, ``w`` of shape ``(m, n)``."""
    if w.ndim != 2 or x.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"dense shape mismatch: x {x.shape}, w {w.shape}, b {b.shape}")
    return x @ w.T + b


def dense_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    """Return ``(dx, dw, db)`` for a batched :func:`dense_forward`."""
    return dout @ w, dout.T @ x, dout.sum(axis=0)


dense = dense_forward


# -- loss -----------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels):
    """Per-sample softmax cross-entropy.

    Accepts a single logit vector with an integer label, or an ``(N, c)``
    matrix with ``N`` labels. Returns ``(probs, loss, grad)`` where ``loss`` is
    a float (single) or a length-``N`` array, and ``grad = probs - onehot``.
    """
    logits = np.asarray(logits)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(labels))
    n_classes = z.shape[1]
    if labels.shape != (z.shape[0],):
        raise ShapeError(f"expected {z.shape[0]} labels, got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError("labels must be integers")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"label out of range for {n_classes} classes")

    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    total = e.sum(axis=1, keepdims=True)
    probs = e / total
    rows = np.arange(z.shape[0])
    loss = np.log(total[:, 0]) - shifted[rows, labels]
    grad = probs.copy()
    grad[rows, labels] -= 1
    if single:
        return probs[0], float(loss[0]), grad[0]
    return probs, loss, grad


# -- optimizer ------------------------------------------------------------


def adam_step(param: ParamTensor, cfg: OptimizerConfig, lr: float | None = None) -> ParamTensor:
    """In-place bias-corrected adaptive-moment update; clears the gradient.

    ``lr`` overrides ``cfg.learning_rate`` (the plateau schedule changes it).
    """
    g = param.grad
    _check_finite(g, "gradient")
    lr = cfg.learning_rate if lr is None else lr
    param.step_count += 1
    t = param.step_count
    param.m *= cfg.beta1
    param.m += (1 - cfg.beta1) * g
    param.v *= cfg.beta2
    param.v += (1 - cfg.beta2) * (g * g)
    m_hat = param.m / (1 - cfg.beta1 ** t)
    v_hat = param.v / (1 - cfg.beta2 ** t)
    update = (lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)).astype(param.values.dtype)
    param.values -= update
    param.zero_grad()
    return param
