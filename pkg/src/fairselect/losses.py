"""Prediction and demographic-parity losses with gradients w.r.t. predictions.

Parity terms work on soft group means of predicted probabilities:

* pairwise:  ``(mean_protected - mean_rest) ** 2``
* combined:  ``w_race * (mean_race - mean_all) ** 2 + w_country * (mean_country - mean_all) ** 2``
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("race_only", "country_only", "combined")
SINGLE_LOSSES = ("pairwise", "combined_term")


class DegenerateBatchError(ValueError):
    """A group needed by a parity term has no members in the batch."""


@dataclass(frozen=True)
class FairnessConfig:
    lam: float = 0.0
    w_race: float = 0.32
    w_country: float = 0.68
    mode: str = "combined"
    # loss used by race_only / country_only modes
    single_loss: str = "pairwise"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.mode not in MODES:
            raise ValueError(f"unknown fairness mode {self.mode!r}")
        if self.single_loss not in SINGLE_LOSSES:
            raise ValueError(f"unknown single-attribute loss {self.single_loss!r}")
        if self.w_race < 0 or self.w_country < 0:
            raise ValueError("fairness weights must be >= 0")
        if self.mode == "combined" and self.w_race == 0 and self.w_country == 0:
            raise ValueError("combined mode needs a positive weight")


@dataclass
class LossValue:
    value: float
    grad: np.ndarray
    components: dict[str, float] = field(default_factory=dict)


def _check(probs, *masks):
    probs = np.asarray(probs, dtype=np.float64)
    out = [probs]
    for m in masks:
        m = np.asarray(m, dtype=bool)
        if m.shape != probs.shape:
            raise ValueError(f"length mismatch: {m.shape} vs {probs.shape}")
        out.append(m)
    return out


def bce_loss(probs, labels) -> LossValue:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ValueError(f"length mismatch: {probs.shape} vs {labels.shape}")
    if np.any(probs <= 0) or np.any(probs >= 1):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    n = probs.size
    value = -np.mean(labels * np.log(probs) + (1 - labels) * np.log1p(-probs))
    grad = (probs - labels) / (probs * (1 - probs) * n)
    return LossValue(float(value), grad)


def parity_loss_pairwise(probs, protected_mask) -> LossValue:
    probs, mask = _check(probs, protected_mask)
    n_p = int(mask.sum())
    n_n = mask.size - n_p
    if n_p == 0 or n_n == 0:
        raise DegenerateBatchError("degenerate batch: protected or non-protected group is empty")
    d = probs[mask].mean() - probs[~mask].mean()
    grad = np.where(mask, 2 * d / n_p, -2 * d / n_n)
    return LossValue(float(d * d), grad)


def _group_term(probs, mask, weight):
    n_g = int(mask.sum())
    if n_g == 0:
        raise DegenerateBatchError("degenerate batch: group is empty")
    d = probs[mask].mean() - probs.mean()
    grad = 2 * weight * d * (mask / n_g - 1.0 / probs.size)
    return weight * d * d, grad


def parity_loss_combined(probs, race_mask, country_mask, w_race: float, w_country: float) -> LossValue:
    """Weighted gap of each group's mean to the global mean.

    A term with zero weight is skipped, so its group may be empty.
    """
    probs, race_mask, country_mask = _check(probs, race_mask, country_mask)
    value = 0.0
    grad = np.zeros_like(probs)
    comps = {"race": 0.0, "country": 0.0}
    for name, mask, w in (("race", race_mask, w_race), ("country", country_mask, w_country)):
        if w == 0:
            continue
        v, g = _group_term(probs, mask, w)
        comps[name] = v
        value += v
        grad += g
    return LossValue(float(value), grad, comps)


def fairness_loss(config: FairnessConfig, probs, race_mask, country_mask) -> LossValue:
    """Unweighted-by-lambda fairness term selected by ``config.mode``."""
    if config.mode == "combined":
        return parity_loss_combined(probs, race_mask, country_mask, config.w_race, config.w_country)
    attr = "race" if config.mode == "race_only" else "country"
    mask = race_mask if attr == "race" else country_mask
    if config.single_loss == "pairwise":
        lv = parity_loss_pairwise(probs, mask)
    else:
        lv = parity_loss_combined(probs, mask, mask, 1.0, 0.0)
    lv.components = {"race": 0.0, "country": 0.0, attr: lv.value}
    return lv


def total_loss(pred: LossValue, fair: LossValue, lam: float) -> LossValue:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if pred.grad.shape != fair.grad.shape:
        raise ValueError("gradient length mismatch")
    return LossValue(pred.value + lam * fair.value, pred.grad + lam * fair.grad)
