"""Excitation inputs and noise processes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng

PRBS_REGISTER = 31
PRBS_TAP = 28  # x^31 + x^28 + 1


def _lfsr_bits(length: int, seed: int) -> np.ndarray:
    """Bits of the maximal-length sequence s[m] = s[m-28] xor s[m-31].

    The 31-bit starting register is drawn from the seed's input stream and is
    never all-zero.
    """
    g = rng.generator(seed, rng.INPUT)
    init = g.integers(0, 2, PRBS_REGISTER, dtype=np.uint8)
    if not init.any():
        init[0] = 1
    total = PRBS_REGISTER + length
    s = np.empty(total, dtype=np.uint8)
    s[:PRBS_REGISTER] = init
    m = PRBS_REGISTER
    # a block of up to 28 new bits only reads bits at least 28 positions back
    step = PRBS_TAP
    while m < total:
        j = min(m + step, total)
        s[m:j] = s[m - PRBS_TAP:j - PRBS_TAP] ^ s[m - PRBS_REGISTER:j - PRBS_REGISTER]
        m = j
    return s[PRBS_REGISTER:]


def prbs(length: int, seed: int, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    if length < 1:
        raise ValueError("length must be >= 1")
    if not low < high:
        raise ValueError("need low < high")
    bits = _lfsr_bits(length, seed)
    return np.where(bits == 1, float(high), float(low))


def amplitude_schedule(length: int, amplitudes) -> np.ndarray:
    amps = np.asarray(amplitudes, dtype=float).reshape(-1)
    if amps.size == 0:
        raise ValueError("amplitude sequence is empty")
    seg = length // amps.size
    counts = np.full(amps.size, seg)
    counts[-1] = length - seg * (amps.size - 1)
    return np.repeat(amps, counts)


def prbs_amplitude_modulated(length: int, seed: int, base_levels=(-1.0, 1.0), amplitudes=(1.0,)) -> np.ndarray:
    """PRBS times a piecewise-constant amplitude schedule.

    Segments have length ``length // len(amplitudes)``; the last one takes the
    remainder.
    """
    sched = amplitude_schedule(length, amplitudes)
    return prbs(length, seed, *base_levels) * sched


def ma_filter(v, k) -> np.ndarray:
    """e(t) = v(t) + sum_i k_i v(t-i), with v = 0 before t = 0."""
    v = np.asarray(v, dtype=float).reshape(-1)
    e = v.copy()
    for i, ki in enumerate(np.atleast_1d(np.asarray(k, dtype=float)), start=1):
        if i < v.size:
            e[i:] += ki * v[:-i]
    return e


def gaussian_noise(shape, variance, seed: int, stream: int) -> np.ndarray:
    """Zero-mean Gaussian samples; ``variance`` broadcasts over the last axis."""
    z = rng.generator(seed, stream).standard_normal(shape)
    return z * np.sqrt(np.asarray(variance, dtype=float))


@dataclass
class NoiseStreams:
    v: np.ndarray
    w: np.ndarray
    seed: int
    generator_id: str = rng.GENERATOR_ID


def noise_streams(length: int, R: float, Q, seed: int) -> NoiseStreams:
    """Measurement noise v ~ N(0, R) and process noise w ~ N(0, diag Q).

    The standard normals depend only on the seed, so runs at different noise
    levels with the same seed share their random numbers.
    """
    q = np.asarray(Q, dtype=float)
    if q.ndim == 2:
        q = np.diag(q)
    if R < 0 or np.any(q < 0):
        raise ValueError("variances must be non-negative")
    v = gaussian_noise(length, R, seed, rng.MEAS_NOISE)
    w = gaussian_noise((length, q.size), q, seed, rng.PROC_NOISE)
    return NoiseStreams(v=v, w=w, seed=seed)
