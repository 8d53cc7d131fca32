"""Two-hidden-layer scorer: (affine -> batch-norm -> ReLU) x 2 -> affine -> sigmoid.

Parameters live in a flat dict keyed ``W1, b1, gamma1, beta1, W2, b2, gamma2,
beta2, W3, b3``. Arithmetic is float64 throughout.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
PARAM_KEYS = ("W1", "b1", "gamma1", "beta1", "W2", "b2", "gamma2", "beta2", "W3", "b3")
STAT_KEYS = ("running_mean1", "running_var1", "running_mean2", "running_var2")


@dataclass
class ModelParams:
    layer_dims: tuple[int, int, int, int]
    params: dict[str, np.ndarray]
    stats: dict[str, np.ndarray]
    mode: str = "train"
    seed: int | None = None

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def check(self) -> None:
        d, h1, h2, _ = self.layer_dims
        shapes = {
            "W1": (d, h1), "b1": (h1,), "gamma1": (h1,), "beta1": (h1,),
            "W2": (h1, h2), "b2": (h2,), "gamma2": (h2,), "beta2": (h2,),
            "W3": (h2, 1), "b3": (1,),
        }
        for k, shape in shapes.items():
            if self.params[k].shape != shape:
                raise ValueError(f"{k} has shape {self.params[k].shape}, expected {shape}")
            if not np.all(np.isfinite(self.params[k])):
                raise ValueError(f"{k} contains non-finite values")
        for k in ("running_var1", "running_var2"):
            if np.any(self.stats[k] < 0):
                raise ValueError(f"{k}: negative running variance")


@dataclass
class ForwardCache:
    mode: str
    X: np.ndarray
    layers: list[tuple]  # per hidden block: (input, xhat, inv_std, y, batch_mean, batch_var)
    a2: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    model_id: int = 0


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: ModelParams, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "OptimizerState":
        zeros = {k: np.zeros_like(v) for k, v in model.params.items()}
        return cls({k: z.copy() for k, z in zeros.items()}, zeros, 0, lr, beta1, beta2, eps)


def init_model(d_in: int, h1: int = 64, h2: int = 32, seed: int = 0) -> ModelParams:
    """Glorot-uniform weights, zero biases, identity batch-norm.

    Running means start at 0 and running variances at 1 so that an untrained
    eval-mode block is the identity on its pre-activations.
    """
    for name, v in (("d_in", d_in), ("h1", h1), ("h2", h2)):
        if int(v) < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    params = {
        "W1": glorot(d_in, h1), "b1": np.zeros(h1), "gamma1": np.ones(h1), "beta1": np.zeros(h1),
        "W2": glorot(h1, h2), "b2": np.zeros(h2), "gamma2": np.ones(h2), "beta2": np.zeros(h2),
        "W3": glorot(h2, 1), "b3": np.zeros(1),
    }
    stats = {
        "running_mean1": np.zeros(h1), "running_var1": np.ones(h1),
        "running_mean2": np.zeros(h2), "running_var2": np.ones(h2),
    }
    return ModelParams((d_in, h1, h2, 1), params, stats, "train", seed)


def forward(model: ModelParams, X: np.ndarray, mode: str | None = None,
            update_stats: bool = True) -> tuple[np.ndarray, ForwardCache]:
    """Score rows of ``X``.

    Train mode normalizes with batch statistics and, unless ``update_stats``
    is false, folds them into the running statistics (unbiased variance).
    Eval mode reads the running statistics and mutates nothing.
    """
    mode = mode or model.mode
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.layer_dims[0]:
        raise ValueError(f"expected {model.layer_dims[0]} feature columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input features")
    train = mode == "train"
    p, s = model.params, model.stats
    layers = []
    h = X
    for i in (1, 2):
        out = kernels.hidden_forward(
            h, p[f"W{i}"], p[f"b{i}"], p[f"gamma{i}"], p[f"beta{i}"],
            s[f"running_mean{i}"], s[f"running_var{i}"], train, BN_EPS,
        )
        a, xhat, inv_std, y, mu, var = out
        layers.append((h, xhat, inv_std, y, mu, var))
        h = a
    logits, probs = kernels.output_forward(h, p["W3"], p["b3"])

    if train and update_stats:
        n = X.shape[0]
        unbias = n / (n - 1) if n > 1 else 1.0
        for i, (_, _, _, _, mu, var) in zip((1, 2), layers):
            s[f"running_mean{i}"] = (1 - BN_MOMENTUM) * s[f"running_mean{i}"] + BN_MOMENTUM * mu
            s[f"running_var{i}"] = (1 - BN_MOMENTUM) * s[f"running_var{i}"] + BN_MOMENTUM * var * unbias
    return probs, ForwardCache(mode, X, layers, h, logits, probs, id(model))


def backward(model: ModelParams, cache: ForwardCache, dL_dy: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every parameter given dL/d(probabilities)."""
    if cache.mode != "train":
        raise ValueError("backward needs a cache from a train-mode forward pass")
    if cache.model_id != id(model) or cache.X.shape[1] != model.layer_dims[0]:
        raise ValueError("forward cache was produced by a different model")
    dL_dy = np.asarray(dL_dy, dtype=np.float64)
    if dL_dy.shape != cache.probs.shape:
        raise ValueError(f"gradient has shape {dL_dy.shape}, expected {cache.probs.shape}")
    p = model.params
    grads: dict[str, np.ndarray] = {}
    da, grads["W3"], grads["b3"] = kernels.output_backward(dL_dy, cache.a2, p["W3"], cache.probs)
    for i in (2, 1):
        h_in, xhat, inv_std, y, _, _ = cache.layers[i - 1]
        da, grads[f"W{i}"], grads[f"b{i}"], grads[f"gamma{i}"], grads[f"beta{i}"] = kernels.hidden_backward(
            da, h_in, p[f"W{i}"], p[f"gamma{i}"], xhat, inv_std, y
        )
    return {k: grads[k] for k in PARAM_KEYS}


def adam_step(model: ModelParams, state: OptimizerState, grads: dict[str, np.ndarray]):
    for k in PARAM_KEYS:
        g = grads[k]
        if g.shape != model.params[k].shape:
            raise ValueError(f"gradient {k} has shape {g.shape}, expected {model.params[k].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {k}")
    state.step += 1
    for k in PARAM_KEYS:
        kernels.adam_update(model.params[k], grads[k], state.m[k], state.v[k],
                            state.lr, state.beta1, state.beta2, state.eps, state.step)
    return model, state


# ------------------------------------------------------------------ checkpoints


def _arr(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}


def _unarr(d: dict) -> np.ndarray:
    return np.array(d["data"], dtype=np.float64).reshape(d["shape"])


def checkpoint_dict(model: ModelParams, state: OptimizerState | None = None, config_hash: str = "") -> dict:
    doc = {
        "format": "fairselect-checkpoint/1",
        "layer_dims": list(model.layer_dims),
        "mode": model.mode,
        "seed": model.seed,
        "config_hash": config_hash,
        "params": {k: _arr(model.params[k]) for k in PARAM_KEYS},
        "running_stats": {k: _arr(model.stats[k]) for k in STAT_KEYS},
        "optimizer": None,
    }
    if state is not None:
        doc["optimizer"] = {
            "step": state.step, "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps,
            "m": {k: _arr(state.m[k]) for k in PARAM_KEYS},
            "v": {k: _arr(state.v[k]) for k in PARAM_KEYS},
        }
    return doc


def save_checkpoint(path, model: ModelParams, state: OptimizerState | None = None, config_hash: str = "") -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(model, state, config_hash), indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[ModelParams, OptimizerState | None]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    model = ModelParams(
        tuple(doc["layer_dims"]),
        {k: _unarr(doc["params"][k]) for k in PARAM_KEYS},
        {k: _unarr(doc["running_stats"][k]) for k in STAT_KEYS},
        doc["mode"],
        doc["seed"],
    )
    model.check()
    opt = doc.get("optimizer")
    state = None
    if opt:
        state = OptimizerState(
            {k: _unarr(opt["m"][k]) for k in PARAM_KEYS},
            {k: _unarr(opt["v"][k]) for k in PARAM_KEYS},
            opt["step"], opt["lr"], opt["beta1"], opt["beta2"], opt["eps"],
        )
    return model, state
