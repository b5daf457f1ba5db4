"""Bilinear state-space model in observer canonical form.

    x(t+1) = A x(t) + B x(t) u(t) + f u(t) + w(t)
    y(t)   = x_1(t) + e(t),   e(t) = v(t) + sum_i k_i v(t-i)

A is the companion matrix with first column -a and ones on the
superdiagonal.  The parameter vector packs ``[a | B row-major | f | k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class SystemMatrices(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    k: np.ndarray


def companion(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.size
    A = np.zeros((n, n))
    A[:, 0] = -a
    A[np.arange(n - 1), np.arange(1, n)] = 1.0
    return A


def n_params(n: int, n_k: int) -> int:
    return n + n * n + n + n_k


@dataclass
class BilinearModel:
    a: np.ndarray
    B: np.ndarray
    f: np.ndarray
    k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    Q: np.ndarray | None = None
    R: float | None = None

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        n = self.a.size
        self.B = np.asarray(self.B, dtype=float).reshape(n, n)
        self.f = np.asarray(self.f, dtype=float).reshape(n)
        self.k = np.atleast_1d(np.asarray(self.k, dtype=float)).reshape(-1)
        if self.Q is None:
            self.Q = np.zeros((n, n))
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim == 1:
            Q = np.diag(Q)
        if Q.shape != (n, n):
            raise ValueError(f"Q must be {n}x{n}")
        if np.any(Q != np.diag(np.diag(Q))):
            raise ValueError("Q must be diagonal")
        if np.any(np.diag(Q) < 0):
            raise ValueError("Q diagonal entries must be non-negative")
        self.Q = Q
        if self.R is not None:
            self.R = float(self.R)
            if self.R < 0:
                raise ValueError("R must be non-negative")

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def n_k(self) -> int:
        return self.k.size

    @property
    def A(self) -> np.ndarray:
        return companion(self.a)

    @property
    def H(self) -> np.ndarray:
        h = np.zeros(self.n)
        h[0] = 1.0
        return h

    @property
    def matrices(self) -> SystemMatrices:
        return SystemMatrices(self.A, self.B.copy(), self.f.copy(), self.k.copy())

    @classmethod
    def from_theta(cls, theta, n: int, n_k: int, Q=None, R=None) -> "BilinearModel":
        A, B, f, k = unpack_parameters(theta, n, n_k)
        return cls(a=-A[:, 0], B=B, f=f, k=k, Q=Q, R=R)


def pack_parameters(model: BilinearModel) -> np.ndarray:
    return np.concatenate([model.a, model.B.ravel(), model.f, model.k])


def unpack_parameters(theta, n: int, n_k: int) -> SystemMatrices:
    theta = np.asarray(theta, dtype=float)
    d = n_params(n, n_k)
    if theta.shape != (d,):
        raise ValueError(f"theta has length {theta.size}, expected {d} for n={n}, n_k={n_k}")
    a = theta[:n]
    B = theta[n:n + n * n].reshape(n, n).copy()
    f = theta[n + n * n:2 * n + n * n].copy()
    k = theta[2 * n + n * n:].copy()
    return SystemMatrices(companion(a), B, f, k)


@dataclass
class Trajectory:
    """Simulated signals.  ``x`` has L+1 rows, everything else L."""
    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray
    e: np.ndarray

    @property
    def L(self) -> int:
        return self.u.size


def simulate(model: BilinearModel, u, noise=None, x0=None) -> Trajectory:
    """Run the model forward from rest (or from ``x0``).

    ``noise`` is anything with ``v`` (length L) and ``w`` (L x n) attributes,
    e.g. :class:`bpfrls.signals.NoiseStreams`; ``None`` means noise-free.
    """
    from .signals import ma_filter

    u = np.asarray(u, dtype=float).reshape(-1)
    L, n = u.size, model.n
    if L < 1:
        raise ValueError("input must have at least one sample")
    if noise is None:
        v, w = np.zeros(L), np.zeros((L, n))
    else:
        v = np.asarray(noise.v, dtype=float).reshape(-1)
        w = np.asarray(noise.w, dtype=float).reshape(L, n)
        if v.size != L:
            raise ValueError("noise length does not match input length")
    for name, arr in (("u", u), ("v", v), ("w", w)):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in {name}")

    A, B, f = model.A, model.B, model.f
    x = np.zeros((L + 1, n))
    if x0 is not None:
        x[0] = x0
    for t in range(L):
        xt = x[t]
        x[t + 1] = A @ xt + (B @ xt) * u[t] + f * u[t] + w[t]
    e = ma_filter(v, model.k)
    y = x[:L, 0] + e
    return Trajectory(u=u, x=x, y=y, v=v.copy(), w=w.copy(), e=e)


def regression_identity_check(model: BilinearModel, traj: Trajectory) -> float:
    """Largest |y(t) - phi(t)'theta - beta(t) - v(t)| over t >= max(n, n_k).

    phi and beta are built from the true states and noises.  The trajectory
    must start from rest.
    """
    from .regressor import EstimHistory, build_phi

    n, n_k = model.n, model.n_k
    theta = pack_parameters(model)
    hist = EstimHistory(n, n_k)
    worst = 0.0
    for t in range(traj.L):
        info = build_phi(hist, t)
        if t >= max(n, n_k):
            r = traj.y[t] - info.phi @ theta - info.beta - traj.v[t]
            worst = max(worst, abs(r))
        hist.push(t, x=traj.x[t], u=traj.u[t], y=traj.y[t], v=traj.v[t], w=traj.w[t])
    return worst


def mean_square_radius(A, B, m1: float, m2: float) -> float:
    """Spectral radius of E[(A + B u) kron (A + B u)] for an i.i.d. input
    with moments E[u] = m1, E[u^2] = m2.  Below one means the second moment of
    the state stays bounded."""
    M = np.kron(A, A) + m1 * (np.kron(A, B) + np.kron(B, A)) + m2 * np.kron(B, B)
    return float(np.max(np.abs(np.linalg.eigvals(M))))
