"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (explicit loops, float64) and shares no
code with the package under test.
"""

import math

import numpy as np


def naive_conv1d(x, w, b):
    """Zero same-padded, stride-1 cross-correlation by explicit loops. x: (C, L)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    out_ch, in_ch, k = w.shape
    length = x.shape[1]
    pad = k // 2
    out = np.zeros((out_ch, length))
    for o in range(out_ch):
        for t in range(length):
            acc = float(b[o])
            for c in range(in_ch):
                for j in range(k):
                    src = t + j - pad
                    if 0 <= src < length:
                        acc += w[o, c, j] * x[c, src]
            out[o, t] = acc
    return out


def naive_maxpool1d(x, window=2, stride=2):
    x = np.asarray(x, dtype=np.float64)
    channels, length = x.shape
    n_out = (length - window) // stride + 1
    out = np.zeros((channels, n_out))
    arg = np.zeros((channels, n_out), dtype=int)
    for c in range(channels):
        for i in range(n_out):
            best, where = -math.inf, -1
            for j in range(window):
                v = x[c, i * stride + j]
                if v > best:  # strict: first index wins ties
                    best, where = v, i * stride + j
            out[c, i] = best
            arg[c, i] = where
    return out, arg


def naive_dense(x, w, b):
    m, n = len(w), len(w[0])
    return np.array([sum(float(w[i][j]) * float(x[j]) for j in range(n)) + float(b[i])
                     for i in range(m)])


def central_difference(f, x, h=1e-3, index=None):
    """d f / d x by central differences; ``x`` is perturbed in place and restored."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    positions = range(flat.size) if index is None else index
    for i in positions:
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def rel_error(analytic, numeric, index=None):
    """Largest absolute discrepancy, normalized by the tensor's gradient scale."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if index is not None:
        a, n = a[index], n[index]
    scale = max(np.abs(a).max(initial=0), np.abs(n).max(initial=0), 1e-8)
    return float(np.abs(a - n).max(initial=0) / scale)


def simulate_early_stop(metrics, patience):
    """Return (stop_epoch or None, best_epoch), 1-based.

    An epoch improves when its metric beats every earlier metric. Training
    stops at the first epoch closing a run of ``patience`` non-improving
    epochs.
    """
    improved = [i == 0 or m > max(metrics[:i]) for i, m in enumerate(metrics)]
    for e in range(patience, len(metrics) + 1):
        if not any(improved[e - patience:e]):
            best = max(i + 1 for i in range(e) if improved[i])
            return e, best
    best = max(i + 1 for i, ok in enumerate(improved) if ok) if metrics else 0
    return None, best


def simulate_plateau(metrics, lr, patience, factor, min_lr):
    """Learning rate in force after each epoch.

    Non-improving epochs form runs between improvements; inside a run the
    rate drops on every ``patience``-th epoch.
    """
    out = []
    run = 0
    lr = max(lr, min_lr)
    for i, m in enumerate(metrics):
        if i == 0 or m > max(metrics[:i]):
            run = 0
        else:
            run += 1
            if run % patience == 0:
                lr = max(lr * factor, min_lr)
        out.append(lr)
    return out
