"""Bilinear state observer: a Kalman-style predictor with the input-dependent
transition M = A + B u(t) and unit measurement noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemMatrices


@dataclass
class ObserverState:
    x: np.ndarray
    P: np.ndarray


def observer_init(n: int, p_scale: float = 1.0, x0=None) -> ObserverState:
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    return ObserverState(x=x, P=p_scale * np.eye(n))


def bso_step(state: ObserverState, system: SystemMatrices, u_t: float, y_t: float, v_lags=()):
    """Advance the observer one step; returns (state at t+1, gain G)."""
    A, B, f, k = system
    x, P = state.x, state.P
    M = A + B * u_t
    PH = P[:, 0]
    G = M @ PH / (1.0 + P[0, 0])
    colored = float(np.dot(k, v_lags)) if len(k) else 0.0
    innov = y_t - x[0] - colored
    x_next = A @ x + (B @ x) * u_t + f * u_t + G * innov
    P_next = M @ P @ M.T - np.outer(G, PH @ M.T)
    P_next = 0.5 * (P_next + P_next.T)
    return ObserverState(x_next, P_next), G
