"""Joint state and parameter estimation: B-PF-RLS and the BSO-RLS baseline.

Each time step t runs:

1. build phi(t), beta(t) from the estimated history;
2. RLS update of theta;
3. unpack theta into the filter model (see ``filter_model``);
4. weight the particle prior for x(t) against y(t) (Gaussian or dwo);
5. take x_hat(t) and resample;
6. back-estimate e(t), v(t) and w(t-1), and store them;
7. propagate the particles with u(t) to form the prior for x(t+1).

The prior for x(t+1) is formed with theta(t).  Waiting for theta(t+1) would
let y(t+1) enter twice (once through the RLS update, once through the
weights), which pulls measurement noise into the state estimate.

The process-noise estimate w(t-1) needs x_hat(t), so when phi(t+1) is built
the newest available one is w(t-1): the i = 1 term of beta(t+1), w_1(t),
is still missing and reads as zero.

Two start-up measures keep the closed loop away from self-reinforcing bad
estimates.  While RLS is underdetermined its estimate interpolates the data
and can reach absurd values, so for the first ``warmup`` steps (default
1.5 d) the state estimator keeps the initial model.  For the particle filter
the process noise is also inflated at start-up by
``q_boost * mean(y^2) * exp(-t / q_boost_tau)`` so that the cloud can follow
the output while the model is still poor.  Both are settings; zero turns
them off.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng
from .bso import bso_step, observer_init
from .metrics import delta_theta
from .model import mean_square_radius, n_params, unpack_parameters
from .pf import dwo_weights, estimate_state, gaussian_weights, init_particles, propagate, resample
from .regressor import EstimHistory, build_phi, output_residuals, process_residual
from .rls import DEFAULT_P0, rls_init, rls_update

WEIGHT_MODES = ("known-r", "dwo")
ESTIMATORS = ("bpfrls", "bsorls")


@dataclass
class JointConfig:
    n: int
    n_k: int
    Q_hat: list | np.ndarray            # diagonal process-noise variances used by the filter
    N: int = 1002
    weight_mode: str = "known-r"
    R: float | None = None
    p0: float = DEFAULT_P0
    theta0: list | None = None
    init_spread: float = 0.0
    resample: str = "every-step"        # or "ess-threshold"
    ess_fraction: float = 0.5
    state_estimate: str = "weighted"    # or "resampled-mean"
    estimator: str = "bpfrls"
    stability_margin: float | None = 0.98
    warmup: int | None = None           # default ceil(1.5 d)
    q_boost: float = 0.25               # start-up inflation, as a fraction of mean y^2
    q_boost_tau: float = 30.0
    bso_p0: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1 or self.n_k < 0:
            raise ValueError("need n >= 1 and n_k >= 0")
        if np.asarray(self.Q_hat).reshape(-1).size != self.n:
            raise ValueError("Q_hat must hold n diagonal variances")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.weight_mode == "known-r" and not (self.R is not None and self.R > 0):
            raise ValueError("known-r weighting needs R > 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.resample not in ("every-step", "ess-threshold"):
            raise ValueError("resample must be 'every-step' or 'ess-threshold'")
        if self.state_estimate not in ("weighted", "resampled-mean"):
            raise ValueError("state_estimate must be 'weighted' or 'resampled-mean'")
        if self.N < 1:
            raise ValueError("need at least one particle")
        if self.p0 <= 0:
            raise ValueError("p0 must be positive")
        if self.q_boost < 0 or self.q_boost_tau <= 0:
            raise ValueError("need q_boost >= 0 and q_boost_tau > 0")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError("warmup must be non-negative")

    def resolved_warmup(self) -> int:
        if self.warmup is None:
            return int(np.ceil(1.5 * n_params(self.n, self.n_k)))
        return int(self.warmup)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["Q_hat"] = [float(q) for q in np.asarray(self.Q_hat).reshape(-1)]
        return d


@dataclass
class IdentificationResult:
    theta_history: np.ndarray   # L x d
    x_history: np.ndarray       # L x n
    v_history: np.ndarray       # L
    w_history: np.ndarray       # L x n; last row is the one-step model residual (zero)
    e_history: np.ndarray       # L
    scale_history: np.ndarray   # L, factor applied to a and B for the filter model (0 in warm-up)
    x_next: np.ndarray          # model prediction of x(L)
    delta_history: np.ndarray | None = None
    config: dict = field(default_factory=dict)
    seed: int = 0
    generator_id: str = rng.GENERATOR_ID

    @property
    def theta(self) -> np.ndarray:
        return self.theta_history[-1]

    @property
    def L(self) -> int:
        return self.theta_history.shape[0]


def filter_model(theta, n: int, n_k: int, m1: float, m2: float, margin: float | None):
    """Matrices handed to the state estimator.

    If the estimated (A, B) would make the state's second moment grow for the
    input seen so far (mean-square radius above ``margin``), a and B are
    shrunk by the largest common factor that brings the radius to the margin.
    Returns (matrices, factor).
    """
    system = unpack_parameters(theta, n, n_k)
    if margin is None or mean_square_radius(system.A, system.B, m1, m2) <= margin:
        return system, 1.0
    d_ab = n + n * n
    lo, hi = 0.0, 1.0
    for _ in range(30):
        s = 0.5 * (lo + hi)
        A = system.A.copy()
        A[:, 0] *= s
        if mean_square_radius(A, system.B * s, m1, m2) <= margin:
            lo = s
        else:
            hi = s
    scaled = np.array(theta, dtype=float)
    scaled[:d_ab] *= lo
    return unpack_parameters(scaled, n, n_k), lo


def _check_inputs(config: JointConfig, u, y):
    config.validate()
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if u.size != y.size:
        raise ValueError("u and y must have the same length")
    if u.size < 1:
        raise ValueError("need at least one sample")
    return u, y


def _run(config: JointConfig, u, y, true_theta=None) -> IdentificationResult:
    u, y = _check_inputs(config, u, y)
    n, n_k, L = config.n, config.n_k, u.size
    d = n_params(n, n_k)
    Q_hat = np.asarray(config.Q_hat, dtype=float).reshape(-1)
    use_pf = config.estimator == "bpfrls"

    hist = EstimHistory(n, n_k)
    state = rls_init(d, config.p0, config.theta0)
    initial_system = unpack_parameters(state.theta, n, n_k)
    if use_pf:
        ps = init_particles(config.N, n, config.init_spread, config.seed)
        threshold = np.inf if config.resample == "every-step" else config.ess_fraction * config.N
    else:
        obs = observer_init(n, config.bso_p0)

    th_hist = np.zeros((L, d))
    x_hist = np.zeros((L, n))
    v_hist = np.zeros(L)
    e_hist = np.zeros(L)
    w_hist = np.zeros((L, n))
    s_hist = np.zeros(L)
    m1 = m2 = y2 = 0.0
    warmup = config.resolved_warmup()

    for t in range(L):
        info = build_phi(hist, t)
        state = rls_update(state, info.phi, y[t], info.beta)
        m1 += (u[t] - m1) / (t + 1)
        m2 += (u[t] * u[t] - m2) / (t + 1)
        y2 += (y[t] * y[t] - y2) / (t + 1)
        if t < warmup:
            system, scale = initial_system, 0.0
        else:
            system, scale = filter_model(state.theta, n, n_k, m1, m2, config.stability_margin)
        v_lags = hist.v_lags(t)

        if use_pf:
            if config.weight_mode == "known-r":
                w = gaussian_weights(ps, y[t], system.k, v_lags, config.R)
            else:
                w = dwo_weights(ps, y[t], system.k, v_lags, multiply_prior=config.resample != "every-step")
            ps = ps.with_weights(w)
            if config.state_estimate == "weighted":
                x_t = estimate_state(ps, "weighted")
            ps = resample(ps, threshold, step=t)
            if config.state_estimate == "resampled-mean":
                x_t = estimate_state(ps, "resampled-mean")
        else:
            x_t = obs.x.copy()
            obs, _ = bso_step(obs, system, u[t], y[t], v_lags)

        e, v = output_residuals(y[t], x_t, system.k, v_lags)
        hist.push(t, x=x_t, u=u[t], y=y[t], e=e, v=v)
        if t > 0:
            w_prev = process_residual(x_hist[t - 1], x_t, u[t - 1], system.A, system.B, system.f)
            hist.set("w", t - 1, w_prev)
            w_hist[t - 1] = w_prev

        if use_pf and t < L - 1:
            # prior for x(t+1); built from theta(t) so it has not seen y(t+1)
            q_t = Q_hat + config.q_boost * y2 * np.exp(-t / config.q_boost_tau) if config.q_boost else Q_hat
            ps = propagate(ps, system, u[t], q_t, step=t + 1)

        th_hist[t] = state.theta
        x_hist[t] = x_t
        v_hist[t] = v
        e_hist[t] = e
        s_hist[t] = scale

    if not np.all(np.isfinite(th_hist)) or not np.all(np.isfinite(x_hist)):
        raise FloatingPointError("estimation produced non-finite values")

    A, B, f, _ = unpack_parameters(state.theta, n, n_k)
    x_last = x_hist[-1]
    x_next = A @ x_last + (B @ x_last) * u[-1] + f * u[-1]

    delta = None
    if true_theta is not None:
        true_theta = np.asarray(true_theta, dtype=float)
        delta = np.array([delta_theta(th, true_theta) for th in th_hist])
    return IdentificationResult(
        theta_history=th_hist, x_history=x_hist, v_history=v_hist, w_history=w_hist,
        e_history=e_hist, scale_history=s_hist, x_next=x_next, delta_history=delta,
        config=config.to_dict(), seed=config.seed,
    )


def bpfrls_run(config: JointConfig, u, y, true_theta=None) -> IdentificationResult:
    """B-PF-RLS: particle-filter states feeding recursive least squares."""
    if config.estimator != "bpfrls":
        config = replace(config, estimator="bpfrls")
    return _run(config, u, y, true_theta)


def bsorls_run(config: JointConfig, u, y, true_theta=None) -> IdentificationResult:
    """BSO-RLS: the same loop with the bilinear state observer in place of the PF."""
    if config.estimator != "bsorls":
        config = replace(config, estimator="bsorls")
    return _run(config, u, y, true_theta)


def identify(config: JointConfig, u, y, true_theta=None) -> IdentificationResult:
    return _run(config, u, y, true_theta)


def predict_outputs(theta, u, x0, n: int, n_k: int) -> np.ndarray:
    """Noise-free simulation of the estimated model from x0; y_hat(t) = x_1(t)."""
    A, B, f, _ = unpack_parameters(theta, n, n_k)
    u = np.asarray(u, dtype=float).reshape(-1)
    x = np.array(x0, dtype=float).reshape(n)
    y_hat = np.zeros(u.size)
    for t in range(u.size):
        y_hat[t] = x[0]
        x = A @ x + (B @ x) * u[t] + f * u[t]
    return y_hat
