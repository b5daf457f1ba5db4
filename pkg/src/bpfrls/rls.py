"""Recursive least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_P0 = 1e6
DEFAULT_THETA0 = 1e-6


@dataclass
class RlsState:
    theta: np.ndarray
    P: np.ndarray
    p0: float = DEFAULT_P0
    gain: np.ndarray | None = None


def rls_init(d: int, p0: float = DEFAULT_P0, theta0=None) -> RlsState:
    if d < 1:
        raise ValueError("d must be >= 1")
    if not p0 > 0:
        raise ValueError("p0 must be positive")
    if theta0 is None:
        theta = np.full(d, DEFAULT_THETA0)
    else:
        theta = np.array(theta0, dtype=float).reshape(d)
    return RlsState(theta=theta, P=p0 * np.eye(d), p0=float(p0))


def rls_update(state: RlsState, phi, y: float, beta: float = 0.0) -> RlsState:
    """One rank-one update.

    L = P phi / (1 + phi' P phi)
    theta <- theta + L (y - beta - phi' theta)
    P <- P - L (P phi)'
    """
    phi = np.asarray(phi, dtype=float)
    if not (np.all(np.isfinite(phi)) and np.isfinite(y) and np.isfinite(beta)):
        raise FloatingPointError("non-finite RLS input")
    P = state.P
    Pphi = P @ phi
    gain = Pphi / (1.0 + phi @ Pphi)
    theta = state.theta + gain * (y - beta - phi @ state.theta)
    P = P - np.outer(gain, Pphi)
    P = 0.5 * (P + P.T)
    return RlsState(theta=theta, P=P, p0=state.p0, gain=gain)
