"""Synthetic single-beat corpora shaped like the public preprocessed beat releases.

Each beat is a 125 Hz window that starts at an R peak, runs for 1.2 RR
intervals, is min-max normalized to [0, 1] and is zero-padded to 187
samples. Waveforms are sums of Gaussian P/Q/R/S/T components with
per-beat jitter, baseline wander and noise; class differences follow the
textbook morphology of each beat type. These corpora exist so the pipeline
can be exercised end to end without the real recordings; they are not a
substitute for them when judging clinical accuracy.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset, _largest_remainder
from .model import DEFAULT_INPUT_LENGTH, MITBIH_LABELS, PTB_LABELS

# whole-database class totals of the public releases (train + test files)
MITBIH_CLASS_TOTALS = (90589, 2779, 7236, 803, 8039)
PTB_CLASS_TOTALS = (4046, 10506)


def _g(t, center, width, amp):
    return amp[:, None] * np.exp(-0.5 * ((t - center[:, None]) / width[:, None]) ** 2)


def _finish(wave, rr, rng, noise, wander, length):
    """Add noise and wander, normalize over the 1.2 RR window, zero-pad the rest."""
    n = len(wave)
    t = np.arange(length)[None, :]
    phase = rng.uniform(0, 2 * np.pi, n)[:, None]
    freq = rng.uniform(0.002, 0.01, n)[:, None]
    wave = wave + wander[:, None] * np.sin(2 * np.pi * freq * t + phase)
    wave = wave + noise[:, None] * rng.standard_normal(wave.shape)
    seg = np.minimum(np.round(1.2 * rr).astype(int), length)
    inside = t < seg[:, None]
    lo = np.where(inside, wave, np.inf).min(axis=1, keepdims=True)
    hi = np.where(inside, wave, -np.inf).max(axis=1, keepdims=True)
    out = (wave - lo) / (hi - lo)
    return np.where(inside, out, 0.0).astype(np.float32)


def _beats(rng, n, length, *, rr, qrs, r_amp, s_amp, t_amp, t_width, p_amp,
           st=None, q_amp=None, spike=None, noise=(0.01, 0.04), wander=(0.0, 0.1)):
    """Vectorized generator; every keyword is a (low, high) uniform range."""
    u = lambda lohi: rng.uniform(lohi[0], lohi[1], n)
    t = np.arange(length, dtype=np.float64)[None, :]
    rr_ = u(rr)
    qrs_ = u(qrs)
    r = u(r_amp)
    wave = _g(t, np.zeros(n), qrs_, r)
    wave += _g(t, 2.2 * qrs_, 0.9 * qrs_, -u(s_amp))
    t_center = rr_ * rng.uniform(0.28, 0.38, n) + 2 * qrs_
    wave += _g(t, t_center, u(t_width), u(t_amp))
    if st is not None:
        # elevated plateau joining S and T
        lift = u(st)
        lo = (3 * qrs_)[:, None]
        hi = t_center[:, None]
        wave += lift[:, None] * (1 / (1 + np.exp(-(t - lo))) - 1 / (1 + np.exp(-(t - hi))))
    # next beat: P then Q/R, visible when the window reaches it
    wave += _g(t, rr_ - rng.uniform(14, 20, n), rng.uniform(2.5, 4.0, n), u(p_amp))
    if q_amp is not None:
        wave += _g(t, rr_ - 2.5 * qrs_, 0.8 * qrs_, -u(q_amp))
    wave += _g(t, rr_, qrs_, r * rng.uniform(0.9, 1.1, n))
    if spike is not None:
        pace = u(spike)
        wave += _g(t, np.full(n, 0.0), np.full(n, 0.6), pace)
        wave += _g(t, rr_ - 1.5 * qrs_, np.full(n, 0.6), pace)
    return _finish(wave, rr_, rng, u(noise), u(wander), length)


_MITBIH_CLASSES = (
    # Normal
    dict(rr=(75, 125), qrs=(1.4, 2.4), r_amp=(0.8, 1.2), s_amp=(0.1, 0.3),
         t_amp=(0.15, 0.4), t_width=(5, 9), p_amp=(0.08, 0.18)),
    # Supraventricular: premature, narrow QRS, abnormal P
    dict(rr=(55, 95), qrs=(1.4, 2.4), r_amp=(0.8, 1.2), s_amp=(0.1, 0.3),
         t_amp=(0.1, 0.35), t_width=(4, 8), p_amp=(-0.1, 0.1)),
    # Ventricular: wide bizarre QRS, discordant T, no P
    dict(rr=(60, 140), qrs=(3.5, 6.5), r_amp=(0.9, 1.6), s_amp=(0.3, 0.8),
         t_amp=(-0.5, -0.15), t_width=(7, 12), p_amp=(-0.02, 0.04)),
    # Fusion: between normal and ventricular
    dict(rr=(65, 120), qrs=(2.2, 3.8), r_amp=(0.8, 1.3), s_amp=(0.15, 0.5),
         t_amp=(-0.2, 0.2), t_width=(6, 10), p_amp=(0.0, 0.12)),
    # Unknown (paced): pacemaker spike ahead of a wide QRS
    dict(rr=(80, 105), qrs=(3.5, 5.5), r_amp=(0.8, 1.2), s_amp=(0.2, 0.6),
         t_amp=(-0.4, -0.05), t_width=(7, 11), p_amp=(-0.02, 0.04), spike=(0.4, 0.9)),
)

_PTB_CLASSES = (
    # Normal
    dict(rr=(65, 135), qrs=(1.6, 2.6), r_amp=(0.8, 1.2), s_amp=(0.1, 0.35),
         t_amp=(0.15, 0.45), t_width=(6, 10), p_amp=(0.06, 0.16),
         noise=(0.01, 0.04), wander=(0.0, 0.12)),
    # Abnormal (infarction pattern): ST elevation, pathological Q, flattened/inverted T
    dict(rr=(60, 135), qrs=(1.8, 3.2), r_amp=(0.6, 1.2), s_amp=(0.1, 0.45),
         t_amp=(-0.4, 0.15), t_width=(6, 11), p_amp=(0.04, 0.16),
         st=(0.0, 0.3), q_amp=(0.05, 0.4), noise=(0.01, 0.04), wander=(0.0, 0.12)),
)


def _corpus(classes, totals, labels, n, seed, length, source) -> Dataset:
    rng = np.random.default_rng(seed)
    counts = _largest_remainder(n, [c / sum(totals) for c in totals])
    xs, ys = [], []
    for label, (count, params) in enumerate(zip(counts, classes)):
        if count:
            xs.append(_beats(rng, count, length, **params))
            ys.append(np.full(count, label))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(y))
    return Dataset(x[order], y[order], labels, source, {"synthetic": True, "seed": seed})


def mitbih_like(n: int = 10_000, seed: int = 0, length: int = DEFAULT_INPUT_LENGTH) -> Dataset:
    """Five-class corpus with the arrhythmia database's class proportions."""
    return _corpus(_MITBIH_CLASSES, MITBIH_CLASS_TOTALS, MITBIH_LABELS, n, seed, length, "MIT-BIH")


def ptb_like(n: int = 14_552, seed: int = 0, length: int = DEFAULT_INPUT_LENGTH) -> Dataset:
    """Normal/abnormal corpus with the diagnostic database's class proportions."""
    return _corpus(_PTB_CLASSES, PTB_CLASS_TOTALS, PTB_LABELS, n, seed, length, "PTB")
