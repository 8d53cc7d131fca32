"""Line-oriented ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Lists are comma separated; maps
are ``name:value`` items separated by commas. Unknown keys are errors.

Keys (defaults in brackets)::

    data.source                synthetic | csv                       (required)
    data.papers, data.authors  CSV paths, required when source = csv
    synth.n_papers             [530]
    synth.counts               [SIGCHI:351, DIS:115, IUI:64]
    synth.female_pct           per-conference % female author slots
    synth.race_pct             per-conference % race-protected papers
    synth.country_pct          per-conference % country-protected papers
    synth.n_accepted           [351]
    synth.bias_strength        [2.0]
    synth.quality_slope        [4.0]
    synth.conference_effect    [SIGCHI:0, DIS:0, IUI:0]
    synth.authors_per_paper    [1, 5]
    synth.stage_probs          per-career-stage sampling weights
    synth.h_means              per-career-stage mean h-index
    synth.h_shape              [4.0]
    synth.seed                 [experiment.seed]
    split.ratio                [0.8]
    train.epochs               [50]
    train.batch_size           [32]
    train.learning_rate        [0.001]
    train.patience             [10]
    train.h1, train.h2         [64], [32]
    train.degenerate_batch_policy  [skip_fairness_term]
    fairness.mode              race_only | country_only | combined   (required by run)
    fairness.lambda            >= 0                                  (required by run)
    fairness.w_race            [0.32]
    fairness.w_country         [0.68]
    fairness.single_loss       pairwise | combined_term [pairwise]
    experiment.n_accept        [351]
    experiment.n_runs          [5]
    experiment.seed            [0]
    experiment.lambda_grid     [1, 2, 2.5, 3, 5, 10]
    experiment.weight_grid     [0.32:0.68, 0.32:1.36, 0.64:0.68]  (w_race:w_country)
    experiment.career_weights  dataset_distribution | explicit stage map
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .dataset import SyntheticSpec
from .losses import FairnessConfig
from .metrics import CareerWeights
from .schema import CAREER_STAGES, CONFERENCES, ValidationError
from .trainer import TrainConfig


class ConfigError(ValidationError):
    pass


KNOWN_KEYS = frozenset(
    [
        "data.source", "data.papers", "data.authors",
        "synth.n_papers", "synth.counts", "synth.female_pct", "synth.race_pct", "synth.country_pct",
        "synth.n_accepted", "synth.bias_strength", "synth.quality_slope", "synth.conference_effect",
        "synth.authors_per_paper", "synth.stage_probs", "synth.h_means", "synth.h_shape", "synth.seed",
        "split.ratio",
        "train.epochs", "train.batch_size", "train.learning_rate", "train.patience", "train.h1", "train.h2",
        "train.degenerate_batch_policy",
        "fairness.mode", "fairness.lambda", "fairness.w_race", "fairness.w_country", "fairness.single_loss",
        "experiment.n_accept", "experiment.n_runs", "experiment.seed", "experiment.lambda_grid",
        "experiment.weight_grid", "experiment.career_weights",
    ]
)


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_text(path.read_text(encoding="utf-8"), str(path))


def config_hash(raw: dict[str, str]) -> str:
    canon = "\n".join(f"{k}={raw[k]}" for k in sorted(raw))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _num(key, value, kind=float):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def _list(key, value, kind=float):
    items = [s.strip() for s in value.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return [_num(key, s, kind) for s in items]


def _map(key, value, names, kind=float):
    out = {}
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(f"{key}: expected name:value items, got {item!r}")
        name, v = (s.strip() for s in item.split(":", 1))
        if name not in names:
            raise ConfigError(f"{key}: unknown name {name!r}; expected {', '.join(names)}")
        out[name] = _num(key, v, kind)
    if set(out) != set(names):
        raise ConfigError(f"{key}: must list every one of {', '.join(names)}")
    return out


def synthetic_spec(raw: dict[str, str]) -> SyntheticSpec:
    spec = SyntheticSpec()
    kw = {}
    scalars = {"n_papers": int, "n_accepted": int, "bias_strength": float, "quality_slope": float, "h_shape": float}
    for name, kind in scalars.items():
        if f"synth.{name}" in raw:
            kw[name] = _num(f"synth.{name}", raw[f"synth.{name}"], kind)
    maps = {
        "counts": (CONFERENCES, int), "female_pct": (CONFERENCES, float), "race_pct": (CONFERENCES, float),
        "country_pct": (CONFERENCES, float), "conference_effect": (CONFERENCES, float),
        "stage_probs": (CAREER_STAGES, float), "h_means": (CAREER_STAGES, float),
    }
    for name, (names, kind) in maps.items():
        if f"synth.{name}" in raw:
            kw[name] = _map(f"synth.{name}", raw[f"synth.{name}"], names, kind)
    if "synth.authors_per_paper" in raw:
        lo_hi = _list("synth.authors_per_paper", raw["synth.authors_per_paper"], int)
        if len(lo_hi) != 2:
            raise ConfigError("synth.authors_per_paper: expected 'min, max'")
        kw["authors_per_paper"] = tuple(lo_hi)
    if "counts" not in kw and "n_papers" in kw and kw["n_papers"] != spec.n_papers:
        raise ConfigError("synth.n_papers differs from the default; give synth.counts as well")
    spec = replace(spec, **kw)
    spec.validate()
    return spec


@dataclass
class ExperimentConfig:
    raw: dict[str, str]
    source: str
    papers_path: str | None
    authors_path: str | None
    synth: SyntheticSpec | None
    synth_seed: int
    split_ratio: float
    train: TrainConfig
    n_accept: int
    n_runs: int
    seed: int
    lambda_grid: list[float]
    weight_grid: list[tuple[float, float]]
    career_weights: CareerWeights | None = None

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _require(raw, key):
    if key not in raw:
        raise ConfigError(f"missing config key: {key}")
    return raw[key]


def build(raw: dict[str, str], require_fairness: bool = False, seed: int | None = None) -> ExperimentConfig:
    """Validate a parsed config. ``seed`` (from --seed) overrides experiment.seed."""
    raw = dict(raw)
    if seed is not None:
        raw["experiment.seed"] = str(seed)
    source = _require(raw, "data.source")
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {source!r}")
    papers = authors = None
    if source == "csv":
        papers, authors = _require(raw, "data.papers"), _require(raw, "data.authors")
    exp_seed = _num("experiment.seed", raw.get("experiment.seed", "0"), int)
    synth = synthetic_spec(raw) if source == "synthetic" else None
    synth_seed = _num("synth.seed", raw.get("synth.seed", str(exp_seed)), int)

    if require_fairness:
        _require(raw, "fairness.mode")
        _require(raw, "fairness.lambda")
    try:
        fairness = FairnessConfig(
            lam=_num("fairness.lambda", raw.get("fairness.lambda", "0")),
            w_race=_num("fairness.w_race", raw.get("fairness.w_race", "0.32")),
            w_country=_num("fairness.w_country", raw.get("fairness.w_country", "0.68")),
            mode=raw.get("fairness.mode", "combined"),
            single_loss=raw.get("fairness.single_loss", "pairwise"),
        )
        train = TrainConfig(
            epochs=_num("train.epochs", raw.get("train.epochs", "50"), int),
            batch_size=_num("train.batch_size", raw.get("train.batch_size", "32"), int),
            learning_rate=_num("train.learning_rate", raw.get("train.learning_rate", "0.001")),
            patience=_num("train.patience", raw.get("train.patience", "10"), int),
            fairness=fairness,
            seed=exp_seed,
            degenerate_batch_policy=raw.get("train.degenerate_batch_policy", "skip_fairness_term"),
            h1=_num("train.h1", raw.get("train.h1", "64"), int),
            h2=_num("train.h2", raw.get("train.h2", "32"), int),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    lambda_grid = _list("experiment.lambda_grid", raw.get("experiment.lambda_grid", "1, 2, 2.5, 3, 5, 10"))
    if any(v < 0 for v in lambda_grid):
        raise ConfigError("experiment.lambda_grid: lambda must be >= 0")
    weight_grid = []
    for item in raw.get("experiment.weight_grid", "0.32:0.68, 0.32:1.36, 0.64:0.68").split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ConfigError(f"experiment.weight_grid: expected w_race:w_country, got {item!r}")
        wr, wc = (_num("experiment.weight_grid", s.strip()) for s in parts)
        if wr < 0 or wc < 0 or wr == wc == 0:
            raise ConfigError(f"experiment.weight_grid: invalid pair {item!r}")
        weight_grid.append((wr, wc))
    if not weight_grid:
        raise ConfigError("experiment.weight_grid: empty list")

    cw = raw.get("experiment.career_weights", "dataset_distribution")
    career = None
    if cw != "dataset_distribution":
        try:
            career = CareerWeights(_map("experiment.career_weights", cw, CAREER_STAGES), "explicit")
        except ValueError as exc:
            raise ConfigError(f"experiment.career_weights: {exc}") from None

    ratio = _num("split.ratio", raw.get("split.ratio", "0.8"))
    if not 0 < ratio < 1:
        raise ConfigError("split.ratio must lie in (0, 1)")
    n_accept = _num("experiment.n_accept", raw.get("experiment.n_accept", "351"), int)
    n_runs = _num("experiment.n_runs", raw.get("experiment.n_runs", "5"), int)
    if n_accept < 1 or n_runs < 1:
        raise ConfigError("experiment.n_accept and experiment.n_runs must be positive")
    return ExperimentConfig(
        raw, source, papers, authors, synth, synth_seed, ratio, train, n_accept, n_runs, exp_seed,
        lambda_grid, weight_grid, career,
    )
