"""Joint state and parameter estimation for bilinear state-space systems
with coloured measurement noise (B-PF-RLS) plus a batch experiment CLI."""

from .joint import IdentificationResult, JointConfig, bpfrls_run, bsorls_run, identify, predict_outputs
from .metrics import delta_theta, monte_carlo_summary, state_rmse
from .model import BilinearModel, pack_parameters, simulate, unpack_parameters
from .rng import GENERATOR_ID

__all__ = [
    "BilinearModel", "pack_parameters", "unpack_parameters", "simulate",
    "JointConfig", "IdentificationResult", "bpfrls_run", "bsorls_run", "identify", "predict_outputs",
    "delta_theta", "state_rmse", "monte_carlo_summary", "GENERATOR_ID",
]
