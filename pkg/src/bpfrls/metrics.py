"""Evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def delta_theta(theta_hat, theta) -> float:
    """Relative parameter error ||theta_hat - theta|| / ||theta||."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if theta_hat.shape != theta.shape:
        raise ValueError("parameter vectors differ in length")
    norm = np.linalg.norm(theta)
    if norm == 0:
        raise ValueError("true parameter vector is zero")
    return float(np.linalg.norm(theta_hat - theta) / norm)


def state_rmse(x_hat, x, component: int = 0, running: bool = False):
    """RMSE of one state component; ``running`` gives the cumulative curve."""
    x_hat = np.asarray(x_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_hat.shape[0] != x.shape[0]:
        raise ValueError("histories differ in length")
    err2 = (x_hat[:, component] - x[:, component]) ** 2 if x.ndim == 2 else (x_hat - x) ** 2
    if running:
        return np.sqrt(np.cumsum(err2) / np.arange(1, err2.size + 1))
    return float(np.sqrt(err2.mean()))


@dataclass
class RunSummary:
    mean: np.ndarray
    mad: np.ndarray
    rmsd: np.ndarray
    final_delta: np.ndarray
    mad_about: str = "mean"


def monte_carlo_summary(results, theta_true, mad_about: str = "mean") -> RunSummary:
    """Per-parameter mean, MAD and RMSD of the final estimates.

    ``results`` holds IdentificationResult objects or final theta vectors.
    MAD is the mean absolute deviation around the cross-run mean (or around
    the truth with ``mad_about="truth"``); RMSD is always around the truth.
    """
    finals = np.array([getattr(r, "theta", r) for r in results], dtype=float)
    if finals.ndim != 2 or finals.shape[0] < 2:
        raise ValueError("need at least two runs")
    theta_true = np.asarray(theta_true, dtype=float)
    if finals.shape[1] != theta_true.size:
        raise ValueError("runs and truth differ in length")
    # shifted mean: exact when all runs agree
    mean = finals[0] + (finals - finals[0]).mean(axis=0)
    if mad_about == "mean":
        centre = mean
    elif mad_about == "truth":
        centre = theta_true
    else:
        raise ValueError("mad_about must be 'mean' or 'truth'")
    mad = np.abs(finals - centre).mean(axis=0)
    rmsd = np.sqrt(((finals - theta_true) ** 2).mean(axis=0))
    final_delta = np.array([delta_theta(th, theta_true) for th in finals])
    return RunSummary(mean=mean, mad=mad, rmsd=rmsd, final_delta=final_delta, mad_about=mad_about)
