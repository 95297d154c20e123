"""Flat ``key = value`` run configuration.

Keys are dotted (``model.n``, ``algo.eta``); ``#`` starts a comment.  Every
key is declared in ``SCHEMA`` with a type and default, unknown keys are
rejected and ``seed`` has no default.  ``format_config`` writes the fully
resolved configuration, which parses back to the same values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrate import DEFAULT_EPSILON, EquilParams
from .errors import ConfigError
from .genmodel import (
    InitSpec,
    Marginal,
    ModelSpec,
    NoiseModel,
    WeightDist,
    gen_ground_truth,
    gen_init,
    moments,
)
from .matcore import load_matrix_csv
from .purify import AlgoParams, Pairing, default_params
from .rng import Streams

AUTO = "auto"

# key -> (kind, default); kind is int, float, str, bool or "auto_float"
SCHEMA: dict[str, tuple[str, object]] = {
    "seed": ("int", None),
    "model.m": ("int", 60),
    "model.n": ("int", 30),
    "model.ground_truth": ("str", "random_nonneg_unit_l1"),
    "model.corr": ("float", 0.0),
    "model.concentration": ("float", 0.1),
    "model.a_star_path": ("str", ""),
    "weights.kind": ("str", "bernoulli_uniform"),
    "weights.s": ("float", 3.0),
    "weights.high_moment": ("float", 0.5),
    "weights.low_moment": ("float", 0.05),
    "weights.high_count": ("int", -1),
    "noise.kind": ("str", "none"),
    "noise.level": ("float", 0.0),
    "noise.strategy": ("str", "sign_aligned"),
    "noise.dist": ("str", "rademacher"),
    "init.ell": ("float", 0.1),
    "init.e_sign": ("str", "mixed"),
    "init.n0_level": ("float", 0.0),
    "init.sigma_lo": ("float", 1.0),
    "init.sigma_hi": ("float", 1.0),
    "init.a0_path": ("str", ""),
    "algo.alpha": ("auto_float", AUTO),
    "algo.eta": ("auto_float", AUTO),
    "algo.r": ("auto_float", AUTO),
    "algo.T": ("int", 50),
    "algo.N": ("int", 20000),
    "algo.pairing": ("str", "all_pairs"),
    "algo.pairs": ("int", 0),
    "equil.alpha": ("auto_float", AUTO),
    "equil.eta": ("auto_float", AUTO),
    "equil.T_inner": ("int", 5),
    "equil.epsilon": ("float", DEFAULT_EPSILON),
    "equil.lambda0": ("auto_float", AUTO),
    "equil.N": ("int", 20000),
    "equil.max_outer": ("auto_float", AUTO),
    "equil.lambda_power": ("int", 2),
    "run.diagnostics": ("bool", True),
    "sweep.axis": ("str", "noise_level"),
    "sweep.values": ("str", ""),
    "sweep.replicates": ("int", 1),
    "verify.draws": ("int", 100),
}

SWEEP_AXES = {"noise_level": "noise.level", "batch_size": "algo.N", "warm_start_ell": "init.ell"}


def _coerce(key: str, raw):
    kind, _ = SCHEMA[key]
    if not isinstance(raw, str):
        raw = format_value(raw)
    text = raw.strip()
    try:
        if kind == "int":
            value = int(text)
            if key == "seed" and not 0 <= value < 2**64:
                raise ValueError("seed must be an unsigned 64-bit integer")
            return value
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError("must be finite")
            return value
        if kind == "auto_float":
            return AUTO if text == AUTO else float(text)
        if kind == "bool":
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError("expected true or false")
        return text
    except ValueError as exc:
        raise ConfigError(key, f"bad value {text!r}: {exc}") from exc


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        raw[key] = value
    return raw


def resolve(raw: dict[str, object]) -> dict[str, object]:
    """Fill defaults, coerce types and check the required seed."""
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
    cfg = {}
    for key, (_, default) in SCHEMA.items():
        if key in raw:
            cfg[key] = _coerce(key, raw[key])
        elif default is None:
            raise ConfigError(key, "is required")
        else:
            cfg[key] = default
    return cfg


def load_config(path: str | None, overrides: dict[str, object] | None = None) -> dict[str, object]:
    raw: dict[str, object] = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from exc
    raw.update(overrides or {})
    return resolve(raw)


def format_config(cfg: dict[str, object]) -> str:
    return "".join(f"{key} = {format_value(cfg[key])}\n" for key in SCHEMA)


# -- building runtime objects -------------------------------------------------


def _wrap(key: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (OSError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from exc


def build_weights(cfg) -> WeightDist:
    n = cfg["model.n"]
    kind = cfg["weights.kind"]
    if kind == "bernoulli_uniform":
        return _wrap("weights.s", WeightDist.bernoulli_uniform, n, cfg["weights.s"])
    if kind == "two_group":
        p = cfg["weights.s"] / n
        high = cfg["weights.high_count"] if cfg["weights.high_count"] >= 0 else n // 2
        if high > n:
            raise ConfigError("weights.high_count", f"{high} exceeds n = {n}")
        hi, lo = cfg["weights.high_moment"], cfg["weights.low_moment"]
        if not (0.0 < lo <= 1.0 and 0.0 < hi <= 1.0):
            raise ConfigError("weights.high_moment", "group moments must lie in (0, 1]")
        margs = [Marginal("bernoulli", p=p, scale=math.sqrt(hi if j < high else lo)) for j in range(n)]
        return _wrap("weights.s", WeightDist.independent, margs)
    raise ConfigError("weights.kind", f"unknown kind {kind!r}")


def build_noise(cfg) -> NoiseModel:
    return _wrap("noise.kind", NoiseModel, kind=cfg["noise.kind"], level=cfg["noise.level"],
                 strategy=cfg["noise.strategy"], dist=cfg["noise.dist"])


def build_init(cfg) -> InitSpec:
    return _wrap("init.ell", InitSpec, ell=cfg["init.ell"], e_sign=cfg["init.e_sign"],
                 n0_level=cfg["init.n0_level"],
                 sigma_range=(cfg["init.sigma_lo"], cfg["init.sigma_hi"]))


def build_ground_truth(cfg, streams: Streams) -> np.ndarray:
    if cfg["model.a_star_path"]:
        A = _wrap("model.a_star_path", load_matrix_csv, cfg["model.a_star_path"])
        if A.shape != (cfg["model.m"], cfg["model.n"]):
            raise ConfigError("model.a_star_path",
                              f"matrix is {A.shape}, config says m={cfg['model.m']}, n={cfg['model.n']}")
        return A
    return _wrap("model.m", gen_ground_truth, cfg["model.ground_truth"], cfg["model.m"],
                 cfg["model.n"], streams.generator("ground_truth"), corr=cfg["model.corr"],
                 concentration=cfg["model.concentration"])


def build_spec(cfg, streams: Streams) -> ModelSpec:
    A_star = build_ground_truth(cfg, streams)
    return _wrap("model.n", ModelSpec, ground_truth=A_star, weights=build_weights(cfg),
                 noise=build_noise(cfg), init=build_init(cfg))


def build_a0(cfg, spec: ModelSpec, streams: Streams) -> np.ndarray:
    if cfg["init.a0_path"]:
        A = _wrap("init.a0_path", load_matrix_csv, cfg["init.a0_path"])
        if A.shape != spec.ground_truth.shape:
            raise ConfigError("init.a0_path", f"matrix is {A.shape}, expected {spec.ground_truth.shape}")
        return A
    # same stream as run_purification's own warm start
    return gen_init(spec.ground_truth, spec.init, streams.generator("init"))


def build_algo(cfg, weights: WeightDist | None = None) -> AlgoParams:
    weights = weights if weights is not None else build_weights(cfg)
    n = weights.n
    pairing = _wrap("algo.pairing", Pairing, cfg["algo.pairing"], cfg["algo.pairs"])
    rest = dict(T=cfg["algo.T"], N=cfg["algo.N"], seed=cfg["seed"], pairing=pairing)
    values = {k: cfg[f"algo.{k}"] for k in ("alpha", "eta", "r")}
    if AUTO in values.values():
        ell = cfg["init.ell"]
        if not 0.0 < ell < 0.5:
            raise ConfigError("algo.eta", "automatic parameters need 0 < init.ell < 1/2")
        base = default_params(moments(weights), ell, n, **rest)
        values = {k: getattr(base, k) if v == AUTO else v for k, v in values.items()}
    return _wrap("algo.eta", AlgoParams, **values, **rest)


def build_equil(cfg, weights: WeightDist | None = None) -> EquilParams:
    weights = weights if weights is not None else build_weights(cfg)
    alpha, eta = cfg["equil.alpha"], cfg["equil.eta"]
    if AUTO in (alpha, eta):
        ell = cfg["init.ell"]
        if not 0.0 < ell < 0.5:
            raise ConfigError("equil.eta", "automatic parameters need 0 < init.ell < 1/2")
        base = default_params(moments(weights), ell, weights.n)
        alpha = base.alpha if alpha == AUTO else alpha
        eta = base.eta if eta == AUTO else eta
    max_outer = None if cfg["equil.max_outer"] == AUTO else int(cfg["equil.max_outer"])
    lambda0 = None if cfg["equil.lambda0"] == AUTO else cfg["equil.lambda0"]
    return _wrap("equil.epsilon", EquilParams, alpha=alpha, eta=eta, T_inner=cfg["equil.T_inner"],
                 epsilon=cfg["equil.epsilon"], lambda0=lambda0, N=cfg["equil.N"],
                 seed=cfg["seed"], max_outer=max_outer, lambda_power=cfg["equil.lambda_power"])


@dataclass(frozen=True)
class RunSummary:
    final_col_err: float
    iterations: int
    wall_time_s: float
    params_echo: str
    git_describe: str

    def as_dict(self) -> dict:
        return {
            "final_col_err": self.final_col_err,
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "params_echo": self.params_echo,
            "git_describe": self.git_describe,
        }
