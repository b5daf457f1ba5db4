"""Particle filter for the bilinear model.

Two ways to weight particles against a measurement are provided: the
Gaussian likelihood (needs the measurement noise variance R) and the direct
weight optimisation ("dwo"), which only uses the absolute output errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .model import BilinearModel, SystemMatrices


@dataclass
class ParticleSet:
    states: np.ndarray   # N x n
    weights: np.ndarray  # N
    seed: int = 0

    @property
    def N(self) -> int:
        return self.states.shape[0]

    def with_weights(self, weights) -> "ParticleSet":
        return ParticleSet(self.states, np.asarray(weights, dtype=float), self.seed)


def _qdiag(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    return np.diag(Q) if Q.ndim == 2 else Q.reshape(-1)


def init_particles(N: int, n: int, init_spread: float = 0.0, seed: int = 0) -> ParticleSet:
    if N < 1:
        raise ValueError("need at least one particle")
    if init_spread > 0:
        states = init_spread * rng.generator(seed, rng.PF_INIT).standard_normal((N, n))
    else:
        states = np.zeros((N, n))
    return ParticleSet(states, np.full(N, 1.0 / N), seed)


def propagate(particles: ParticleSet, system: SystemMatrices, u_t: float, Q, step: int = 0) -> ParticleSet:
    """x_i <- A x_i + B x_i u + f u + w_i with w_i ~ N(0, Q).

    The noise for step ``step`` is one counter block of the filter's noise
    stream; particle i always reads row i of it.
    """
    A, B, f = system[0], system[1], system[2]
    X = particles.states
    out = X @ A.T + (X @ B.T) * u_t + f * u_t
    q = _qdiag(Q)
    if np.any(q > 0):
        z = rng.generator(particles.seed, rng.PF_NOISE, block=step).standard_normal(X.shape)
        out += z * np.sqrt(q)
    return ParticleSet(out, particles.weights, particles.seed)


def output_errors(particles: ParticleSet, y_t: float, k, v_lags) -> np.ndarray:
    """eps_i = y - x_i1 - sum_j k_j v(t-j)"""
    colored = float(np.dot(k, v_lags)) if len(k) else 0.0
    return y_t - particles.states[:, 0] - colored


def gaussian_weights(particles: ParticleSet, y_t: float, k, v_lags, R: float) -> np.ndarray:
    """Prior weights times exp(-eps^2 / (2R)), normalised (computed in logs)."""
    if not R > 0:
        raise ValueError("R must be positive for Gaussian weighting")
    eps = output_errors(particles, y_t, k, v_lags)
    with np.errstate(divide="ignore"):
        logw = np.log(particles.weights) - eps * eps / (2.0 * R)
    logw -= np.max(logw)
    w = np.exp(logw)
    return w / w.sum()


def dwo_psi(gamma) -> np.ndarray:
    """Psi_j = (g - g_j) / (N g - sum g_j) with g = max_j g_j + 1."""
    gamma = np.asarray(gamma, dtype=float)
    g = gamma.max() + 1.0
    c = g - gamma
    return c / c.sum()


def dwo_weights(particles: ParticleSet, y_t: float, k, v_lags, multiply_prior: bool = False) -> np.ndarray:
    """Variance-free weights from gamma_j = |eps_j|.

    By default the returned weights are Psi itself, which is what the joint
    loop needs because it resamples every step.  With ``multiply_prior`` the
    prior weights are multiplied in and the result renormalised.
    """
    psi = dwo_psi(np.abs(output_errors(particles, y_t, k, v_lags)))
    if multiply_prior:
        psi = psi * particles.weights
        psi = psi / psi.sum()
    return psi


def ess(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights, offset: float) -> np.ndarray:
    """Indices picked by N evenly spaced points (offset + i) / N on the
    cumulative weights."""
    w = np.asarray(weights, dtype=float)
    N = w.size
    cum = np.cumsum(w)
    cum[-1] = 1.0
    points = (offset + np.arange(N)) / N
    return np.searchsorted(cum, points, side="right")


def resample(particles: ParticleSet, threshold: float, step: int = 0) -> ParticleSet:
    """Systematic resampling when ESS < threshold; otherwise a no-op."""
    if ess(particles.weights) >= threshold:
        return particles
    offset = rng.generator(particles.seed, rng.PF_RESAMPLE, block=step).random()
    idx = systematic_indices(particles.weights, offset)
    N = particles.N
    return ParticleSet(particles.states[idx], np.full(N, 1.0 / N), particles.seed)


def estimate_state(particles: ParticleSet, mode: str = "weighted") -> np.ndarray:
    if mode == "weighted":
        return particles.weights @ particles.states
    if mode == "resampled-mean":
        return particles.states.mean(axis=0)
    raise ValueError(f"unknown state estimate mode {mode!r}")


def run_filter(model: BilinearModel, u, y, N: int, seed: int = 0, weight_mode: str = "known-r",
               threshold: float | None = None, init_spread: float = 0.0, Q=None) -> np.ndarray:
    """Standalone filter with known model; returns x_hat(t), t = 0..L-1.

    Resamples when ESS drops below ``threshold`` (default N/2).
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    L, n = u.size, model.n
    Q = model.Q if Q is None else Q
    threshold = N / 2 if threshold is None else threshold
    system = model.matrices
    ps = init_particles(N, n, init_spread, seed)
    v_hat = np.zeros(L)
    xh = np.zeros((L, n))
    for t in range(L):
        if t > 0:
            ps = propagate(ps, system, u[t - 1], Q, step=t)
        v_lags = np.array([v_hat[t - i] if t - i >= 0 else 0.0 for i in range(1, model.n_k + 1)])
        if weight_mode == "known-r":
            w = gaussian_weights(ps, y[t], system.k, v_lags, model.R)
        else:
            w = dwo_weights(ps, y[t], system.k, v_lags, multiply_prior=True)
        ps = ps.with_weights(w)
        xh[t] = estimate_state(ps)
        v_hat[t] = y[t] - xh[t, 0] - (float(np.dot(system.k, v_lags)) if model.n_k else 0.0)
        ps = resample(ps, threshold, step=t)
    return xh
