"""Run configuration (JSON, versioned schema), manifests, and run-directory
locking. Shipped defaults follow the reference hyperparameter set; a config
file only needs the keys it overrides."""

import copy
import json
import os
import time

SCHEMA_VERSION = 1

STRATEGIES = ("bo-ei", "bo-ucb", "mcmc")

DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "out_dir": "runs/out",
    "performance": "mass",
    "dataset": {
        "count": 60,
        "resolution": 36,
        "density": 1.0,
        "ranges": {},
        "manifest": None,
    },
    "mesh_size": {"k": 1, "l": 300},
    "bounds": {"k": [2, 4], "l": [3000, 5000]},
    "model": {"latent_dim": 512, "dense_dims": [500, 200, 25]},
    "train": {
        "learning_rate": 0.0002,
        "batch_size": 1,
        "max_epochs": 10000,
        "patience": 50,
        "adjacency": "weighted-l2",
    },
    "split": {"train_fraction": 0.8, "validation_fraction": 0.1},
    "search": {
        "strategy": "bo-ei",
        "t_max": 25,
        "p_max": 10,
        "ucb_kappa": 2.0,
        "noise": 1e-6,
        "objective": "pipeline",
        "toy": {"k_center": 3, "l_center": 50, "l_scale": 10.0},
        "mcmc": {"temperature": None, "sigma_l": None, "k_step_prob": 0.3},
    },
    "study": {"samples": 12, "include_optimum": None},
}


class ConfigError(ValueError):
    """Configuration or input validation failure (CLI exit code 2)."""


def default_config():
    return copy.deepcopy(DEFAULT_CONFIG)


def _deep_merge(base, override, path="config"):
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key {path}.{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _deep_merge(base[key], value, f"{path}.{key}")
        else:
            base[key] = value
    return base


def load_config(path=None, overrides=None):
    """Defaults, overlaid with the JSON file (if given), then CLI overrides."""
    cfg = default_config()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        _deep_merge(cfg, user)
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                cfg[key] = value
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.get('schema_version')!r}")
    if cfg["performance"] not in ("mass", "rim_stiffness", "disk_stiffness"):
        raise ConfigError(f"unknown performance kind {cfg['performance']!r}")
    if cfg["search"]["strategy"] not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}")
    if cfg["search"]["objective"] not in ("pipeline", "toy"):
        raise ConfigError("search.objective must be 'pipeline' or 'toy'")
    for name in ("k", "l"):
        rng = cfg["bounds"][name]
        if len(rng) != 2 or int(rng[0]) > int(rng[1]):
            raise ConfigError(f"bounds.{name} must be [lo, hi] with lo <= hi")
    tr = cfg["train"]
    if tr["learning_rate"] <= 0 or tr["max_epochs"] < 1 or tr["patience"] < 1:
        raise ConfigError("train values must be positive")
    if tr["patience"] > tr["max_epochs"]:
        raise ConfigError("train.patience cannot exceed train.max_epochs")
    if tr["batch_size"] != 1:
        raise ConfigError("train.batch_size must be 1 (per-sample updates)")
    if cfg["dataset"]["count"] < 1:
        raise ConfigError("dataset.count must be positive")
    manifest = cfg["dataset"]["manifest"]
    if manifest is not None and not os.path.exists(manifest):
        raise ConfigError(f"dataset.manifest path does not exist: {manifest}")
    sp = cfg["split"]
    if not 0 < sp["train_fraction"] < 1 or not 0 < sp["validation_fraction"] < 1:
        raise ConfigError("split fractions must be in (0, 1)")
    return cfg


class RunLock:
    """One process owns a run directory at a time (lock file)."""

    def __init__(self, out_dir):
        self.path = os.path.join(out_dir, ".lock")

    def __enter__(self):
        os.makedirs(os.path.dirname(self.path), exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"run directory is locked by another process ({self.path}); "
                "remove the lock file if that process is gone"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.path)
        except FileNotFoundError:
            pass
        return False


def write_manifest(out_dir, stage, cfg, outputs, elapsed_seconds, extras=None):
    """Stage manifest: resolved config, software version, timestamps, outputs.

    Contains everything needed to re-run the stage bit-identically (the
    timestamps are informational and excluded from data artifacts).
    """
    from . import __version__
    from ._kernels import kernel_backend

    payload = {
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "version": __version__,
        "kernel_backend": kernel_backend(),
        "rng": "numpy PCG64 (default_rng) + BLAKE2b stage-seed derivation",
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "elapsed_seconds": elapsed_seconds,
        "config": cfg,
        "outputs": outputs,
    }
    if extras:
        payload.update(extras)
    path = os.path.join(out_dir, f"manifest_{stage}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    return path
