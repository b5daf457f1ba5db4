"""Information vector, offset term and noise back-estimation.

With the model in observer canonical form the output obeys

    y(t) = phi(t)' theta + beta(t) + v(t)

where phi(t) stacks -x_1(t-i), x(t-i) u(t-i), u(t-i) for i = 1..n and
v(t-i) for i = 1..n_k, and beta(t) = sum_i w_i(t-i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import unpack_parameters


class EstimHistory:
    """Ring buffers of the lagged signals the regressor needs.

    Each signal keeps its own time stamps, so a value that has not been
    written for time ``t`` (or has been overwritten) reads as zero.
    """

    def __init__(self, n: int, n_k: int, depth: int | None = None):
        self.n, self.n_k = n, n_k
        self.depth = depth or max(n, n_k) + 2
        if self.depth < max(n, n_k) + 1:
            raise ValueError("history depth too small")
        D = self.depth
        self._vec = {"x": np.zeros((D, n)), "w": np.zeros((D, n))}
        self._sca = {"u": np.zeros(D), "y": np.zeros(D), "v": np.zeros(D), "e": np.zeros(D)}
        self._stamp = {name: np.full(D, -1, dtype=np.int64) for name in ("x", "w", "u", "y", "v", "e")}

    def _store(self, name):
        return self._vec[name] if name in self._vec else self._sca[name]

    def set(self, name: str, t: int, value) -> None:
        slot = t % self.depth
        self._store(name)[slot] = value
        self._stamp[name][slot] = t

    def get(self, name: str, t: int):
        store = self._store(name)
        if t < 0:
            return store[0] * 0.0
        slot = t % self.depth
        if self._stamp[name][slot] != t:
            return store[0] * 0.0
        return store[slot].copy() if store.ndim == 2 else float(store[slot])

    def push(self, t: int, **values) -> None:
        for name, val in values.items():
            self.set(name, t, val)

    def v_lags(self, t: int) -> np.ndarray:
        """[v(t-1), ..., v(t-n_k)]"""
        return np.array([self.get("v", t - i) for i in range(1, self.n_k + 1)])


@dataclass
class InformationVector:
    phi_a: np.ndarray
    phi_xu: np.ndarray
    phi_u: np.ndarray
    phi_v: np.ndarray
    beta: float

    @property
    def phi(self) -> np.ndarray:
        return np.concatenate([self.phi_a, self.phi_xu, self.phi_u, self.phi_v])


def build_phi(history: EstimHistory, t: int) -> InformationVector:
    n, n_k = history.n, history.n_k
    phi_a = np.zeros(n)
    phi_xu = np.zeros(n * n)
    phi_u = np.zeros(n)
    beta = 0.0
    for i in range(1, n + 1):
        x = history.get("x", t - i)
        u = history.get("u", t - i)
        phi_a[i - 1] = -x[0]
        phi_xu[(i - 1) * n:i * n] = x * u
        phi_u[i - 1] = u
        beta += history.get("w", t - i)[i - 1]
    return InformationVector(phi_a, phi_xu, phi_u, history.v_lags(t), float(beta))


def output_residuals(y_t: float, x_t, k, v_lags) -> tuple[float, float]:
    """e(t) = y(t) - x_1(t) and v(t) = e(t) - sum_i k_i v(t-i)."""
    e = float(y_t - x_t[0])
    v = e - float(np.dot(k, v_lags)) if len(k) else e
    return e, v


def process_residual(x_t, x_next, u_t: float, A, B, f) -> np.ndarray:
    """w(t) = x(t+1) - A x(t) - B x(t) u(t) - f u(t)."""
    return x_next - A @ x_t - (B @ x_t) * u_t - f * u_t


def estimate_noises(x_t, x_next, y_t, u_t, theta, history: EstimHistory, t: int):
    """Back-estimate (e(t), v(t), w(t)) and write them into the history."""
    A, B, f, k = unpack_parameters(theta, history.n, history.n_k)
    x_t = np.asarray(x_t, dtype=float)
    e, v = output_residuals(y_t, x_t, k, history.v_lags(t))
    w = process_residual(x_t, np.asarray(x_next, dtype=float), u_t, A, B, f)
    history.push(t, e=e, v=v, w=w)
    return e, v, w
