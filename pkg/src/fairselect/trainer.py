"""Mini-batch training of the scorer under a lambda-weighted parity penalty."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import FeatureMatrix
from .losses import DegenerateBatchError, FairnessConfig, LossValue, bce_loss, fairness_loss, total_loss
from .neural_net import ModelParams, OptimizerState, adam_step, backward, forward, init_model

log = logging.getLogger(__name__)

IMPROVEMENT_TOL = 1e-6
DEGENERATE_POLICIES = ("skip_fairness_term", "merge_with_next")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 10
    fairness: FairnessConfig = field(default_factory=FairnessConfig)
    seed: int = 0
    degenerate_batch_policy: str = "skip_fairness_term"
    h1: int = 64
    h2: int = 32

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.degenerate_batch_policy not in DEGENERATE_POLICIES:
            raise ValueError(f"unknown degenerate_batch_policy {self.degenerate_batch_policy!r}")


@dataclass
class EpochRecord:
    epoch: int
    train_prediction: float
    train_fairness: float
    train_total: float
    val_total: float
    # lambda-free fairness decomposition summed over batches
    fairness_race: float = 0.0
    fairness_country: float = 0.0
    steps: int = 0
    degenerate_batches: int = 0


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val: float = math.inf
    total_steps: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(e), sort_keys=True) for e in self.epochs]
        lines.append(json.dumps({"stopped_epoch": self.stopped_epoch, "best_epoch": self.best_epoch,
                                 "best_val": self.best_val, "total_steps": self.total_steps}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def _fairness(config: FairnessConfig, probs, race, country) -> LossValue:
    """Fairness term; a zero lambda short-circuits to an exact zero."""
    if config.lam == 0:
        return LossValue(0.0, np.zeros_like(probs), {"race": 0.0, "country": 0.0})
    return fairness_loss(config, probs, race, country)


def validation_loss(model: ModelParams, fm: FeatureMatrix, fairness: FairnessConfig) -> float:
    """Eval-mode total loss on the whole of ``fm``; a degenerate group drops the fairness term."""
    probs, _ = forward(model, fm.X, "eval")
    pred = bce_loss(probs, fm.labels)
    try:
        fair = _fairness(fairness, probs, fm.race_mask, fm.country_mask)
    except DegenerateBatchError:
        fair = LossValue(0.0, np.zeros_like(probs))
    return total_loss(pred, fair, fairness.lam).value


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    return [order[i:i + size] for i in range(0, len(order), size)]


def _is_degenerate(config: FairnessConfig, race, country) -> bool:
    if config.lam == 0:
        return False
    try:
        fairness_loss(config, np.full(len(race), 0.5), race, country)
    except DegenerateBatchError:
        return True
    return False


def train(train_fm: FeatureMatrix, val_fm: FeatureMatrix, config: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Train with early stopping; returns the weights of the best validation epoch.

    Epoch ``e`` shuffles with ``default_rng([seed, e])`` so each epoch has its
    own stream derived from the run seed.
    """
    if len(train_fm) == 0:
        raise TrainingError("empty training set")
    if train_fm.columns != val_fm.columns:
        raise TrainingError("train and validation matrices have different column schemas")
    if config.batch_size > len(train_fm):
        raise ValueError(f"batch_size {config.batch_size} exceeds training-set size {len(train_fm)}")
    fair_cfg = config.fairness
    model = init_model(train_fm.n_features, config.h1, config.h2, config.seed)
    state = OptimizerState.for_model(model, lr=config.learning_rate)
    history = TrainHistory()
    best = model.copy()
    stale = 0

    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, epoch])
        batches = _batches(rng.permutation(len(train_fm)), config.batch_size)
        rec = EpochRecord(epoch, 0.0, 0.0, 0.0, math.nan)
        pending = None
        executed = 0
        for b, idx in enumerate(batches):
            if pending is not None:
                idx = np.concatenate([pending, idx])
                pending = None
            race, country = train_fm.race_mask[idx], train_fm.country_mask[idx]
            degenerate = _is_degenerate(fair_cfg, race, country)
            if degenerate and config.degenerate_batch_policy == "merge_with_next" and b + 1 < len(batches):
                pending = idx
                continue

            probs, cache = forward(model, train_fm.X[idx], "train")
            pred = bce_loss(probs, train_fm.labels[idx])
            if degenerate:
                rec.degenerate_batches += 1
                fair = LossValue(0.0, np.zeros_like(probs), {"race": 0.0, "country": 0.0})
            else:
                fair = _fairness(fair_cfg, probs, race, country)
            tot = total_loss(pred, fair, fair_cfg.lam)
            if not math.isfinite(tot.value):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = backward(model, cache, tot.grad)
            adam_step(model, state, grads)

            executed += 1
            rec.train_prediction += pred.value
            rec.train_fairness += fair.value
            rec.train_total += tot.value
            rec.fairness_race += fair.components.get("race", 0.0)
            rec.fairness_country += fair.components.get("country", 0.0)
        rec.steps = executed
        for name in ("train_prediction", "train_fairness", "train_total"):
            setattr(rec, name, getattr(rec, name) / max(executed, 1))
        history.total_steps += executed

        rec.val_total = validation_loss(model, val_fm, fair_cfg)
        if not math.isfinite(rec.val_total):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.epochs.append(rec)
        history.stopped_epoch = epoch
        if rec.val_total < history.best_val - IMPROVEMENT_TOL:
            history.best_val = rec.val_total
            history.best_epoch = epoch
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                log.debug("early stop at epoch %d (best %d)", epoch, history.best_epoch)
                break

    best.mode = "eval"
    return best, history


def _train_one(args):
    train_fm, val_fm, config = args
    return train(train_fm, val_fm, config)


def run_repeated(train_fm: FeatureMatrix, val_fm: FeatureMatrix, config: TrainConfig, n_runs: int,
                 jobs: int = 1) -> list[tuple[ModelParams, TrainHistory]]:
    """Run ``n_runs`` trainings; run ``i`` uses seed ``config.seed + i``."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    tasks = [(train_fm, val_fm, replace(config, seed=config.seed + i)) for i in range(n_runs)]
    if jobs <= 1 or n_runs == 1:
        return [_train_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, n_runs)) as pool:
        return list(pool.map(_train_one, tasks))
