"""Experiment execution: data generation, estimator runs and result files.

One run is fully determined by the config and one integer seed.  The seed
keys the input, measurement-noise and process-noise streams of the data and
the particle streams of the filter; runs at different noise levels with the
same seed share their random numbers.

Sweep cells (noise levels) and Monte Carlo runs are independent and can be
spread over worker processes with ``jobs``; results are gathered and written
by the parent in a fixed order, so the output does not depend on ``jobs``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import rng
from ..joint import IdentificationResult, identify, predict_outputs
from ..metrics import delta_theta, monte_carlo_summary
from ..model import Trajectory, pack_parameters, simulate
from ..signals import noise_streams, prbs_amplitude_modulated
from . import io
from .config import (DEFAULTS, ConfigError, build_model, joint_config, selected_variant,
                     true_theta)


@dataclass
class Dataset:
    traj: Trajectory        # identification and hold-out samples together
    length: int             # identification samples
    holdout: int
    sigma_v: float
    seed: int

    @property
    def u(self) -> np.ndarray:
        return self.traj.u[:self.length]

    @property
    def y(self) -> np.ndarray:
        return self.traj.y[:self.length]


@dataclass
class CellResult:
    sigma_v: float
    seed: int
    label: str
    result: IdentificationResult
    theta_true: np.ndarray
    holdout_rel_rmse: float | None = None
    y_clean: np.ndarray | None = None
    y_hat: np.ndarray | None = None


def make_dataset(cfg: dict, sigma_v: float, seed: int) -> Dataset:
    data = cfg["data"]
    L, Lr = int(data["length"]), int(data.get("holdout", 0))
    total = L + Lr
    inp = data["input"]
    u = prbs_amplitude_modulated(total, seed, (float(inp["low"]), float(inp["high"])), inp["amplitudes"])
    model = build_model(cfg, sigma_v)
    noise = noise_streams(total, model.R, model.Q, seed)
    return Dataset(simulate(model, u, noise), L, Lr, float(sigma_v), int(seed))


def cell_name(sigma_v: float) -> str:
    return f"sigma_v_{float(sigma_v):g}"


def estimator_label(entry) -> str:
    if isinstance(entry, str):
        return entry
    label = entry.get("label")
    if label:
        return str(label)
    kind = entry.get("kind", DEFAULTS["estimator"]["kind"])
    mode = entry.get("weight_mode")
    return f"{kind}-{mode}" if mode and kind == "bpfrls" else kind


def compare_entries(cfg: dict) -> list[tuple[str, dict]]:
    """(label, estimator overrides) for each compared estimator.

    Entries may only change estimator settings; anything touching the data
    would break the same-data guarantee and is rejected.
    """
    entries = cfg["compare"]["estimators"]
    if not isinstance(entries, list) or len(entries) < 2:
        raise ConfigError("compare needs at least two estimators")
    allowed = set(DEFAULTS["estimator"]) | {"label"}
    out = []
    for entry in entries:
        if isinstance(entry, str):
            over = {"kind": entry}
        elif isinstance(entry, dict):
            extra = set(entry) - allowed
            if extra:
                raise ConfigError(f"mismatched data specs: compare entries may only set estimator fields, got {sorted(extra)}")
            over = {k: v for k, v in entry.items() if k != "label"}
        else:
            raise ConfigError("compare entries must be names or mappings")
        out.append((estimator_label(entry), over))
    labels = [lab for lab, _ in out]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"compare labels must be unique, got {labels}")
    for _, over in out:
        for sv in cfg["data"]["sigma_v"]:
            try:
                joint_config(cfg, float(sv), cfg["seed"], over).validate()
            except ValueError as exc:
                raise ConfigError(f"compare entry {over}: {exc}") from exc
    return out


def run_cell(cfg: dict, sigma_v: float, seed: int, estimator: dict | None = None,
             label: str | None = None, dataset: Dataset | None = None) -> CellResult:
    ds = dataset if dataset is not None else make_dataset(cfg, sigma_v, seed)
    jc = joint_config(cfg, sigma_v, seed, estimator)
    theta = true_theta(cfg)
    res = identify(jc, ds.u, ds.y, theta)
    cell = CellResult(float(sigma_v), int(seed), label or jc.estimator, res, theta)
    if ds.holdout:
        L = ds.length
        u_hold = ds.traj.u[L:]
        cell.y_clean = predict_outputs(theta, u_hold, ds.traj.x[L], jc.n, jc.n_k)
        cell.y_hat = predict_outputs(res.theta, u_hold, res.x_next, jc.n, jc.n_k)
        scale = np.std(cell.y_clean)
        err = np.sqrt(np.mean((cell.y_hat - cell.y_clean) ** 2))
        cell.holdout_rel_rmse = float(err / scale) if scale > 0 else float("inf")
    return cell


def _pool_map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        futures = [pool.submit(fn, *t) for t in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------- writing

def _provenance(cfg: dict, seeds: dict) -> dict:
    return {"generator_id": rng.GENERATOR_ID, "seeds": seeds, "config": cfg}


def _dims(cfg: dict) -> tuple[int, int]:
    m = build_model(cfg)
    return m.n, m.n_k


def _write_dataset(path: Path, cfg: dict, ds: Dataset, prov: dict) -> Path:
    n, _ = _dims(cfg)
    tr = ds.traj
    rows = ([t, tr.u[t], tr.y[t], tr.v[t], tr.e[t], *tr.x[t], *tr.w[t]] for t in range(tr.L))
    return io.write_csv(path, "dataset", io.columns("dataset", n, 0), rows, prov)


def _checkpoint_rows(cfg: dict, theta_hist: np.ndarray, theta: np.ndarray, L: int):
    rows = [["", *theta, 0.0]]
    for T in cfg["report"]["checkpoints"]:
        T = int(T)
        if T <= L:
            est = theta_hist[T - 1]
            rows.append([T, *est, 100.0 * delta_theta(est, theta)])
    if not any(int(T) == L for T in cfg["report"]["checkpoints"]):
        est = theta_hist[L - 1]
        rows.append([L, *est, 100.0 * delta_theta(est, theta)])
    return rows


def write_cell(out: Path, cfg: dict, cell: CellResult, ds: Dataset, command: str, extra_meta=None) -> list[Path]:
    n, n_k = _dims(cfg)
    seeds = {"data": ds.seed, "filter": cell.result.seed}
    prov = _provenance(cfg, seeds)
    res = cell.result
    L = res.L
    tr = ds.traj
    files = [_write_dataset(out / "dataset.csv", cfg, ds, prov)]

    rows = ([t, *res.theta_history[t], res.delta_history[t], res.scale_history[t]] for t in range(L))
    files.append(io.write_csv(out / "theta.csv", "theta", io.columns("theta", n, n_k), rows, prov))

    rows = ([t, *res.x_history[t], *tr.x[t]] for t in range(L))
    files.append(io.write_csv(out / "states.csv", "states", io.columns("states", n, n_k), rows, prov))

    rows = ([t, res.v_history[t], res.e_history[t], *res.w_history[t], tr.v[t], tr.e[t], *tr.w[t]]
            for t in range(L))
    files.append(io.write_csv(out / "noises.csv", "noises", io.columns("noises", n, n_k), rows, prov))

    rows = _checkpoint_rows(cfg, res.theta_history, cell.theta_true, L)
    files.append(io.write_csv(out / "summary.csv", "summary", io.columns("summary", n, n_k), rows, prov))

    if cell.y_hat is not None:
        rows = ([L + i, tr.u[L + i], tr.y[L + i], cell.y_clean[i], cell.y_hat[i]] for i in range(ds.holdout))
        files.append(io.write_csv(out / "prediction.csv", "prediction", io.columns("prediction", n, n_k), rows, prov))

    meta = {
        "command": command,
        "config": cfg,
        "model_variant": selected_variant(cfg),
        "sigma_v": cell.sigma_v,
        "seeds": seeds,
        "estimator": res.config,
        "theta_true": cell.theta_true,
        "parameter_names": io.parameter_names(n, n_k),
        "final_delta_theta": float(res.delta_history[-1]),
        "holdout_rel_rmse": cell.holdout_rel_rmse,
        "files": [p.name for p in files],
    }
    meta.update(extra_meta or {})
    files.append(io.write_metadata(out / "metadata.json", meta))
    return files


# ---------------------------------------------------------------- commands

def simulate_experiment(cfg: dict, out_dir) -> list[Path]:
    out = io.ensure_dir(out_dir)
    files = []
    for sv in cfg["data"]["sigma_v"]:
        ds = make_dataset(cfg, float(sv), cfg["seed"])
        d = io.ensure_dir(out / cell_name(sv))
        prov = _provenance(cfg, {"data": ds.seed})
        files.append(_write_dataset(d / "dataset.csv", cfg, ds, prov))
        files.append(io.write_metadata(d / "metadata.json", {
            "command": "simulate", "config": cfg, "model_variant": selected_variant(cfg),
            "sigma_v": float(sv), "seeds": {"data": ds.seed},
            "theta_true": pack_parameters(build_model(cfg)), "files": ["dataset.csv"],
        }))
    return files


def _identify_task(cfg, sv, seed):
    ds = make_dataset(cfg, sv, seed)
    return run_cell(cfg, sv, seed, dataset=ds), ds


def run_experiment(cfg: dict, out_dir, jobs: int | None = None) -> list[Path]:
    """Identify at every configured noise level; one sub-directory per level."""
    out = io.ensure_dir(out_dir)
    jobs = int(cfg.get("jobs", 1) if jobs is None else jobs)
    levels = [float(s) for s in cfg["data"]["sigma_v"]]
    results = _pool_map(_identify_task, [(cfg, sv, cfg["seed"]) for sv in levels], jobs)
    files, rows = [], []
    est = cfg["estimator"]
    for sv, (cell, ds) in zip(levels, results):
        files += write_cell(io.ensure_dir(out / cell_name(sv)), cfg, cell, ds, "identify")
        rows.append([cell_name(sv), sv, est["kind"], est["weight_mode"],
                     100.0 * float(cell.result.delta_history[-1]), cell.holdout_rel_rmse])
    n, n_k = _dims(cfg)
    prov = _provenance(cfg, {"data": cfg["seed"], "filter": cfg["seed"]})
    files.append(io.write_csv(out / "sweep.csv", "sweep", io.columns("sweep", n, n_k), rows, prov))
    return files


def _compare_task(cfg, sv, seed, entries):
    ds = make_dataset(cfg, sv, seed)
    return [run_cell(cfg, sv, seed, over, label, ds) for label, over in entries], ds


def compare(cfg: dict, out_dir, jobs: int | None = None) -> list[Path]:
    """Run every compared estimator on the same simulated data."""
    entries = compare_entries(cfg)
    out = io.ensure_dir(out_dir)
    jobs = int(cfg.get("jobs", 1) if jobs is None else jobs)
    labels = [lab for lab, _ in entries]
    n, n_k = _dims(cfg)
    levels = [float(s) for s in cfg["data"]["sigma_v"]]
    results = _pool_map(_compare_task, [(cfg, sv, cfg["seed"], entries) for sv in levels], jobs)
    files = []
    for sv, (cells, ds) in zip(levels, results):
        d = io.ensure_dir(out / cell_name(sv))
        seeds = {"data": ds.seed, "filter": cfg["seed"]}
        prov = _provenance(cfg, seeds)
        L = ds.length
        hist = [c.result.delta_history for c in cells]
        rows = ([t, *(h[t] for h in hist)] for t in range(L))
        files.append(io.write_csv(d / "compare.csv", "compare", io.columns("compare", n, n_k, labels), rows, prov))
        checkpoints = sorted({int(T) for T in cfg["report"]["checkpoints"] if int(T) <= L} | {L})
        rows = [[T, *(100.0 * h[T - 1] for h in hist)] for T in checkpoints]
        files.append(io.write_csv(d / "compare_summary.csv", "compare_summary",
                                  io.columns("compare_summary", n, n_k, labels), rows, prov))
        for label, cell in zip(labels, cells):
            files += write_cell(io.ensure_dir(d / label), cfg, cell, ds, "compare",
                                {"compare_label": label, "shared_data_seed": ds.seed})
        files.append(io.write_metadata(d / "metadata.json", {
            "command": "compare", "config": cfg, "model_variant": selected_variant(cfg),
            "sigma_v": sv, "seeds": seeds, "labels": labels, "same_data": True,
            "final_delta_theta": {lab: float(h[-1]) for lab, h in zip(labels, hist)},
        }))
    return files


def _mc_task(cfg, sv, seed):
    cell = run_cell(cfg, sv, seed)
    return cell.result.theta


def montecarlo(cfg: dict, out_dir, runs: int | None = None, jobs: int | None = None) -> list[Path]:
    """M runs with seeds seed + m * seed_stride, m = 0..M-1, at each noise level."""
    mc = cfg["montecarlo"]
    M = int(mc["runs"] if runs is None else runs)
    if M < 2:
        raise ConfigError("montecarlo needs at least two runs")
    stride = int(mc.get("seed_stride", 1))
    seeds = [cfg["seed"] + m * stride for m in range(M)]
    out = io.ensure_dir(out_dir)
    jobs = int(cfg.get("jobs", 1) if jobs is None else jobs)
    n, n_k = _dims(cfg)
    names = io.parameter_names(n, n_k)
    theta = true_theta(cfg)
    files = []
    for sv in (float(s) for s in cfg["data"]["sigma_v"]):
        finals = _pool_map(_mc_task, [(cfg, sv, s) for s in seeds], jobs)
        summary = monte_carlo_summary(finals, theta, mc.get("mad_about", "mean"))
        d = io.ensure_dir(out / cell_name(sv))
        seed_info = {"data": seeds, "filter": seeds}
        prov = _provenance(cfg, seed_info)
        rows = ([m, s, *th, 100.0 * fd] for m, (s, th, fd) in enumerate(zip(seeds, finals, summary.final_delta)))
        files.append(io.write_csv(d / "mc_runs.csv", "mc_runs", io.columns("mc_runs", n, n_k), rows, prov))
        rows = ([name, theta[i], summary.mean[i], summary.mad[i], summary.rmsd[i]] for i, name in enumerate(names))
        files.append(io.write_csv(d / "mc_summary.csv", "mc_summary", io.columns("mc_summary", n, n_k), rows, prov))
        files.append(io.write_metadata(d / "metadata.json", {
            "command": "montecarlo", "config": cfg, "model_variant": selected_variant(cfg),
            "sigma_v": sv, "runs": M, "seeds": seed_info, "mad_about": summary.mad_about,
            "theta_true": theta, "median_final_delta_theta": float(np.median(summary.final_delta)),
        }))
    return files

