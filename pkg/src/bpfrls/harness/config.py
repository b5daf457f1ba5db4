"""Experiment configuration.

A config is a nested mapping (written as YAML) with the sections ``model``,
``data``, ``estimator``, ``compare``, ``montecarlo`` and ``report`` plus a
top-level ``seed``.  Everything except the model has a default; see
``DEFAULTS`` and the bundled presets.
"""

from __future__ import annotations

import copy
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..joint import ESTIMATORS, WEIGHT_MODES, JointConfig
from ..model import BilinearModel, pack_parameters

DEFAULTS: dict = {
    "name": "custom",
    "description": "",
    "seed": 0,
    "model": {
        "variant": None,
        "variants": {},
        "sigma_w": None,
    },
    "data": {
        "length": 3000,
        "sigma_v": [1.0],
        "input": {"low": -1.0, "high": 1.0, "amplitudes": [1.0]},
        "holdout": 0,
    },
    "estimator": {
        "kind": "bpfrls",
        "particles": 1002,
        "weight_mode": "known-r",
        "R": None,
        "q_hat": None,
        "p0": 1.0e6,
        "theta0": None,
        "init_spread": 0.0,
        "resample": "every-step",
        "ess_fraction": 0.5,
        "state_estimate": "weighted",
        "stability_margin": 0.98,
        "warmup": None,
        "q_boost": 0.25,
        "q_boost_tau": 30.0,
        "bso_p0": 1.0,
    },
    "compare": {"estimators": ["bpfrls", "bsorls"]},
    "montecarlo": {"runs": 50, "seed_stride": 1, "mad_about": "mean"},
    "report": {"checkpoints": [100, 1000, 3000]},
    "jobs": 1,
}

MODEL_KEYS = ("a", "B", "f", "k")


class ConfigError(ValueError):
    pass


def deep_merge(base: dict, override: dict | None) -> dict:
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def preset_names() -> list[str]:
    root = resources.files("bpfrls.harness") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    path = resources.files("bpfrls.harness") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return yaml.safe_load(path.read_text())


def load_config(path: str | Path | None = None, preset: str | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- preset <- config file <- overrides, then validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        cfg = deep_merge(cfg, load_preset(preset))
    if path:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a mapping")
        cfg = deep_merge(cfg, user)
    cfg = deep_merge(cfg, overrides)
    validate(cfg)
    return cfg


def model_spec(cfg: dict) -> dict:
    """The (a, B, f, k) mapping of the selected model variant."""
    m = cfg["model"]
    if all(key in m for key in ("a", "B", "f")):
        return {key: m.get(key, []) for key in MODEL_KEYS}
    variants = m.get("variants") or {}
    if not variants:
        raise ConfigError("model needs a, B, f (and optionally k) or a set of variants")
    variant = m.get("variant") or next(iter(variants))
    if variant not in variants:
        raise ConfigError(f"model variant {variant!r} not among {sorted(variants)}")
    return {key: variants[variant].get(key, []) for key in MODEL_KEYS}


def selected_variant(cfg: dict) -> str | None:
    m = cfg["model"]
    if all(key in m for key in ("a", "B", "f")):
        return None
    return m.get("variant") or next(iter(m["variants"]))


def build_model(cfg: dict, sigma_v: float | None = None) -> BilinearModel:
    spec = model_spec(cfg)
    n = len(spec["a"])
    sigma_w = cfg["model"].get("sigma_w")
    q = np.zeros(n) if sigma_w is None else np.asarray(sigma_w, dtype=float) ** 2
    R = None if sigma_v is None else float(sigma_v) ** 2
    return BilinearModel(a=spec["a"], B=spec["B"], f=spec["f"], k=spec["k"] or [], Q=q, R=R)


def true_theta(cfg: dict) -> np.ndarray:
    return pack_parameters(build_model(cfg))


def joint_config(cfg: dict, sigma_v: float, seed: int, estimator: dict | None = None) -> JointConfig:
    """Estimator settings for one run.  ``estimator`` overrides the
    ``estimator`` section (used by ``compare``)."""
    est = deep_merge(cfg["estimator"], estimator)
    model = build_model(cfg, sigma_v)
    q_hat = est["q_hat"] if est["q_hat"] is not None else np.diag(model.Q)
    R = est["R"] if est["R"] is not None else model.R
    return JointConfig(
        n=model.n, n_k=model.n_k, Q_hat=[float(q) for q in np.asarray(q_hat, dtype=float).reshape(-1)],
        N=int(est["particles"]), weight_mode=est["weight_mode"], R=R, p0=float(est["p0"]),
        theta0=est["theta0"], init_spread=float(est["init_spread"]), resample=est["resample"],
        ess_fraction=float(est["ess_fraction"]), state_estimate=est["state_estimate"],
        estimator=est["kind"],
        stability_margin=None if est["stability_margin"] is None else float(est["stability_margin"]),
        warmup=None if est["warmup"] is None else int(est["warmup"]),
        q_boost=float(est["q_boost"]), q_boost_tau=float(est["q_boost_tau"]),
        bso_p0=float(est["bso_p0"]), seed=int(seed),
    )


def validate(cfg: dict) -> None:
    try:
        model = build_model(cfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
    sigma_w = cfg["model"].get("sigma_w")
    if sigma_w is not None and len(sigma_w) != model.n:
        raise ConfigError("model.sigma_w must have one entry per state")

    data = cfg["data"]
    if not isinstance(data["length"], int) or data["length"] < 1:
        raise ConfigError("data.length must be a positive integer")
    sv = data["sigma_v"]
    if not isinstance(sv, list) or not sv or any(float(s) < 0 for s in sv):
        raise ConfigError("data.sigma_v must be a non-empty list of non-negative numbers")
    if int(data.get("holdout", 0)) < 0:
        raise ConfigError("data.holdout must be non-negative")
    inp = data["input"]
    if not float(inp["low"]) < float(inp["high"]):
        raise ConfigError("data.input needs low < high")
    if not inp["amplitudes"]:
        raise ConfigError("data.input.amplitudes must not be empty")

    est = cfg["estimator"]
    if est["kind"] not in ESTIMATORS:
        raise ConfigError(f"estimator.kind must be one of {ESTIMATORS}")
    if est["weight_mode"] not in WEIGHT_MODES:
        raise ConfigError(f"estimator.weight_mode must be one of {WEIGHT_MODES}")
    if int(est["particles"]) < 1:
        raise ConfigError("estimator.particles must be >= 1")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    for s in sv:
        try:
            joint_config(cfg, float(s), cfg["seed"]).validate()
        except ValueError as exc:
            raise ConfigError(f"estimator: {exc}") from exc
    for t in cfg["report"]["checkpoints"]:
        if int(t) < 1:
            raise ConfigError("report.checkpoints are 1-based sample counts")
