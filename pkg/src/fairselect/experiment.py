"""End-to-end pipeline: data -> repeated training -> selection -> gain reports.

Every run directory holds a ``manifest.json``; each grid cell writes only
inside its own subdirectory, and tables are assembled afterwards from the
stored ``gain_report.json`` files (which is also what ``report`` re-renders).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig
from .dataset import Dataset, FeatureMatrix, generate_synthetic, load_csv, preprocess, stratified_split
from .losses import FairnessConfig
from .metrics import CareerWeights, GainReport, build_report, f_measure
from .neural_net import save_checkpoint
from .selector import audit_parity, score_all, select_top
from .schema import ValidationError
from .trainer import run_repeated

log = logging.getLogger(__name__)

BASELINE_NAME = "lambda=0 demographic-blind model"
SWEEP_COLUMNS = ("lambda", "attr", "macro_gain", "macro_std", "micro_gain", "micro_std", "utility_gain", "utility_std")
ABLATION_COLUMNS = (
    "lambda", "w_race", "w_country",
    "country_macro_gain", "country_macro_std", "country_micro_gain", "country_micro_std",
    "race_macro_gain", "race_macro_std", "race_micro_gain", "race_micro_std",
    "utility_gain", "utility_std", "diversity_gain", "diversity_std", "f_measure",
)


def _clean(obj):
    """JSON-safe copy: NaN/inf become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.floating):
        return _clean(float(obj))
    return obj


def _unclean(obj):
    if obj is None:
        return math.nan
    if isinstance(obj, dict):
        return {k: _unclean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_unclean(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=1, sort_keys=False) + "\n", encoding="utf-8")


class StageFailure(RuntimeError):
    pass


@contextmanager
def stage(name: str):
    """Prefix any error escaping the block with the pipeline stage name."""
    try:
        yield
    except (ValidationError, StageFailure):
        raise
    except ValueError as exc:
        raise ValidationError(f"stage {name}: {exc}") from exc
    except Exception as exc:  # noqa: BLE001
        raise StageFailure(f"stage {name}: {type(exc).__name__}: {exc}") from exc


def manifest(kind: str, cfg: ExperimentConfig, **extra) -> dict:
    return {
        "kind": kind,
        "config_hash": cfg.hash,
        "config": dict(sorted(cfg.raw.items())),
        "seeds": {
            "experiment": cfg.seed,
            "synthetic": cfg.synth_seed if cfg.source == "synthetic" else None,
            "split": cfg.seed,
            "training": [cfg.seed + i for i in range(cfg.n_runs)],
        },
        "software": {"fairselect": __version__, "numpy": np.__version__, "kernel_backend": kernels.BACKEND},
        "baseline": BASELINE_NAME,
        **extra,
    }


@dataclass
class Context:
    cfg: ExperimentConfig
    dataset: Dataset
    fm: FeatureMatrix
    train_fm: FeatureMatrix
    val_fm: FeatureMatrix
    weights: CareerWeights


def prepare(cfg: ExperimentConfig) -> Context:
    if cfg.source == "csv":
        ds = load_csv(cfg.papers_path, cfg.authors_path)
    else:
        ds = generate_synthetic(cfg.synth, cfg.synth_seed)
    if cfg.n_accept > len(ds):
        raise ValueError(f"experiment.n_accept = {cfg.n_accept} exceeds dataset size {len(ds)}")
    fm = preprocess(ds, ("race", "country"))
    tr, va = stratified_split(fm, cfg.split_ratio, cfg.seed)
    weights = cfg.career_weights or ds.career_weights
    return Context(cfg, ds, fm, tr, va, weights)


def _train_and_select(ctx: Context, fairness: FairnessConfig, out_dir: Path | None) -> list[list[str]]:
    """Repeated training; returns each run's selected paper ids."""
    cfg = ctx.cfg
    train_cfg = replace(cfg.train, fairness=fairness, seed=cfg.seed)
    results = run_repeated(ctx.train_fm, ctx.val_fm, train_cfg, cfg.n_runs)
    selections = []
    for i, (model, history) in enumerate(results):
        sel = select_top(score_all(model, ctx.fm), cfg.n_accept)
        audit_parity(sel, ctx.dataset.papers)
        selections.append(sel.selected)
        if out_dir is not None:
            run_dir = out_dir / "runs" / f"run_{i}"
            run_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(run_dir / "model.json", model, config_hash=cfg.hash)
            history.save(run_dir / "history.jsonl")
            write_json(run_dir / "selection.json", sel.to_dict())
    return selections


def compute_baseline(ctx: Context, out_dir: Path | None = None) -> list[list[str]]:
    fairness = FairnessConfig(lam=0.0, mode="combined")
    base_dir = out_dir / "baseline" if out_dir is not None else None
    sels = _train_and_select(ctx, fairness, base_dir)
    if base_dir is not None:
        write_json(base_dir / "selections.json", sels)
    return sels


def _attrs_for(mode: str) -> tuple[str, ...]:
    return {"race_only": ("race",), "country_only": ("country",), "combined": ("race", "country")}[mode]


def run_cell(ctx: Context, fairness: FairnessConfig, baseline: list[list[str]], out_dir: Path) -> GainReport:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fairness.lam == 0:
        selections = baseline  # the lambda = 0 model is the baseline itself
    else:
        selections = _train_and_select(ctx, fairness, out_dir)
    byid = ctx.dataset.by_id()
    report = build_report(
        [[byid[i] for i in s] for s in selections],
        [[byid[i] for i in s] for s in baseline],
        ctx.weights,
        _attrs_for(fairness.mode),
        BASELINE_NAME,
    )
    doc = report.to_dict()
    doc["fairness"] = {"lambda": fairness.lam, "mode": fairness.mode, "w_race": fairness.w_race,
                       "w_country": fairness.w_country, "single_loss": fairness.single_loss}
    write_json(out_dir / "gain_report.json", doc)
    return report


def cmd_run(cfg: ExperimentConfig, out: Path) -> GainReport:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with stage("data"):
        ctx = prepare(cfg)
    write_json(out / "manifest.json", manifest("run", cfg))
    with stage("baseline"):
        baseline = compute_baseline(ctx, out)
    with stage("train/select/evaluate"):
        return run_cell(ctx, cfg.train.fairness, baseline, out)


# ------------------------------------------------------------------ grid cells


def _cell_worker(args):
    cfg, fairness, baseline, cell_dir = args
    try:
        ctx = prepare(cfg)
        run_cell(ctx, fairness, baseline, Path(cell_dir))
        return None
    except Exception as exc:  # noqa: BLE001 - recorded as an explicit error row
        write_json(Path(cell_dir) / "error.json", {"error": f"{type(exc).__name__}: {exc}",
                                                   "traceback": traceback.format_exc()})
        return str(exc)


def _run_cells(cfg: ExperimentConfig, cells: list[tuple[str, FairnessConfig]], out: Path, jobs: int):
    with stage("data"):
        ctx = prepare(cfg)
    with stage("baseline"):
        baseline = compute_baseline(ctx, out)
    tasks = []
    for name, fairness in cells:
        cell_dir = out / "cells" / name
        cell_dir.mkdir(parents=True, exist_ok=True)
        write_json(cell_dir / "cell.json", {"lambda": fairness.lam, "mode": fairness.mode,
                                            "w_race": fairness.w_race, "w_country": fairness.w_country})
        tasks.append((cfg, fairness, baseline, str(cell_dir)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_cell_worker, tasks))
    else:
        for t in tasks:
            _cell_worker(t)


def _fmt_lambda(lam: float) -> str:
    return f"{lam:g}"


def sweep_cells(cfg: ExperimentConfig) -> list[tuple[str, FairnessConfig]]:
    base = cfg.train.fairness
    cells = []
    for attr in ("race", "country"):
        for lam in cfg.lambda_grid:
            fc = FairnessConfig(lam=lam, w_race=base.w_race, w_country=base.w_country,
                                mode=f"{attr}_only", single_loss=base.single_loss)
            cells.append((f"{attr}_lambda{_fmt_lambda(lam)}", fc))
    return cells


def ablation_cells(cfg: ExperimentConfig) -> list[tuple[str, FairnessConfig]]:
    cells = []
    for lam in cfg.lambda_grid:
        for wr, wc in cfg.weight_grid:
            fc = FairnessConfig(lam=lam, w_race=wr, w_country=wc, mode="combined")
            cells.append((f"lambda{_fmt_lambda(lam)}_wr{wr:g}_wc{wc:g}", fc))
    return cells


def cmd_sweep(cfg: ExperimentConfig, out: Path, jobs: int = 1, fmt: str = "csv") -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(cfg)
    write_json(out / "manifest.json", manifest("sweep", cfg, cells=[c for c, _ in cells]))
    _run_cells(cfg, cells, out, jobs)
    return render(out, fmt)


def cmd_ablate(cfg: ExperimentConfig, out: Path, jobs: int = 1, fmt: str = "csv") -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cells = ablation_cells(cfg)
    write_json(out / "manifest.json", manifest("ablate", cfg, cells=[c for c, _ in cells]))
    _run_cells(cfg, cells, out, jobs)
    return render(out, fmt)


# ------------------------------------------------------------------- rendering


def _num(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.4f}"


def _load_cell(cell_dir: Path):
    meta = json.loads((cell_dir / "cell.json").read_text(encoding="utf-8"))
    err = cell_dir / "error.json"
    if err.exists():
        return meta, None, json.loads(err.read_text(encoding="utf-8"))["error"]
    rep = cell_dir / "gain_report.json"
    if not rep.exists():
        return meta, None, "missing gain_report.json"
    return meta, GainReport.from_dict(_unclean(json.loads(rep.read_text(encoding="utf-8")))), None


def sweep_rows(out: Path, cells: list[str]) -> list[dict]:
    rows = []
    for name in cells:
        meta, report, err = _load_cell(out / "cells" / name)
        attr = meta["mode"].replace("_only", "")
        row = {"lambda": _fmt_lambda(meta["lambda"]), "attr": attr}
        if report is None:
            log.error("cell %s failed: %s", name, err)
            row.update({c: "ERROR" for c in SWEEP_COLUMNS[2:]})
        else:
            row.update({
                "macro_gain": _num(report.mean(f"{attr}_macro_gain")), "macro_std": _num(report.std(f"{attr}_macro_gain")),
                "micro_gain": _num(report.mean(f"{attr}_micro_gain")), "micro_std": _num(report.std(f"{attr}_micro_gain")),
                "utility_gain": _num(report.mean("utility_gain")), "utility_std": _num(report.std("utility_gain")),
            })
        rows.append(row)
    return rows


def ablation_rows(out: Path, cells: list[str]) -> list[dict]:
    rows = []
    for name in cells:
        meta, report, err = _load_cell(out / "cells" / name)
        row = {"lambda": _fmt_lambda(meta["lambda"]), "w_race": f"{meta['w_race']:g}", "w_country": f"{meta['w_country']:g}"}
        if report is None:
            log.error("cell %s failed: %s", name, err)
            row.update({c: "ERROR" for c in ABLATION_COLUMNS[3:]})
        else:
            for attr in ("country", "race"):
                for kind in ("macro", "micro"):
                    key = f"{attr}_{kind}_gain"
                    row[key] = _num(report.mean(key))
                    row[f"{attr}_{kind}_std"] = _num(report.std(key))
            ug, dg = report.mean("utility_gain"), report.mean("diversity_gain")
            row["utility_gain"], row["utility_std"] = _num(ug), _num(report.std("utility_gain"))
            row["diversity_gain"], row["diversity_std"] = _num(dg), _num(report.std("diversity_gain"))
            # F from the row's own rounded D_G and UG so it is recomputable from the table
            row["f_measure"] = _num(_safe_f(float(row["diversity_gain"]), float(row["utility_gain"])))
        rows.append(row)
    return rows


def _safe_f(dg: float, ug: float) -> float:
    try:
        return f_measure(dg, ug)
    except ZeroDivisionError:
        return math.nan


def write_table(path_stem: Path, columns, rows, fmt: str) -> Path:
    if fmt == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
        return path
    path = path_stem.with_suffix(".csv")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def render(out: Path, fmt: str = "csv") -> Path:
    """(Re)build tables and plots of a stored sweep or ablation directory."""
    from . import plots

    out = Path(out)
    man = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    kind = man["kind"]
    if kind == "sweep":
        rows = sweep_rows(out, man["cells"])
        path = write_table(out / "sweep", SWEEP_COLUMNS, rows, fmt)
        plots.sweep_plots(rows, out)
    elif kind == "ablate":
        rows = ablation_rows(out, man["cells"])
        path = write_table(out / "ablation", ABLATION_COLUMNS, rows, fmt)
        plots.ablation_plot(rows, out)
    else:
        raise ValueError(f"{out}: nothing to render for a {kind!r} directory")
    return path
