"""Static SVG line plots for sweep and ablation tables.

SVG output is made byte-stable by fixing matplotlib's id salt and dropping
the date metadata.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_RC = {"svg.hashsalt": "fairselect", "svg.fonttype": "path"}


def _f(v: str) -> float:
    try:
        return float(v)
    except ValueError:
        return math.nan


def _save(fig, path: Path) -> None:
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def sweep_plots(rows: list[dict], out: Path) -> list[Path]:
    paths = []
    for attr in ("race", "country"):
        sub = [r for r in rows if r["attr"] == attr]
        if not sub:
            continue
        lam = [_f(r["lambda"]) for r in sub]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for kind in ("macro", "micro"):
            ax.errorbar(lam, [_f(r[f"{kind}_gain"]) for r in sub], yerr=[_f(r[f"{kind}_std"]) for r in sub],
                        marker="o", capsize=3, label=f"{kind} gain")
        ax.set_xlabel("lambda")
        ax.set_ylabel("gain (%)")
        ax.set_title(f"{attr}: diversity gain vs. lambda")
        ax.legend()
        fig.tight_layout()
        path = out / f"sweep_{attr}.svg"
        _save(fig, path)
        paths.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for attr in ("race", "country"):
        sub = [r for r in rows if r["attr"] == attr]
        if sub:
            ax.errorbar([_f(r["lambda"]) for r in sub], [_f(r["utility_gain"]) for r in sub],
                        yerr=[_f(r["utility_std"]) for r in sub], marker="o", capsize=3, label=attr)
    ax.axhline(0.0, color="grey", linewidth=0.8)
    ax.set_xlabel("lambda")
    ax.set_ylabel("utility gain (%)")
    ax.set_title("utility gain vs. lambda")
    ax.legend()
    fig.tight_layout()
    path = out / "sweep_utility.svg"
    _save(fig, path)
    paths.append(path)
    return paths


def ablation_plot(rows: list[dict], out: Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    pairs = sorted({(r["w_race"], r["w_country"]) for r in rows}, key=lambda p: (_f(p[0]), _f(p[1])))
    for wr, wc in pairs:
        sub = [r for r in rows if (r["w_race"], r["w_country"]) == (wr, wc)]
        lam = [_f(r["lambda"]) for r in sub]
        label = f"w_race={wr}, w_country={wc}"
        axes[0].plot(lam, [_f(r["diversity_gain"]) for r in sub], marker="o", label=label)
        axes[1].plot(lam, [_f(r["f_measure"]) for r in sub], marker="o", label=label)
    axes[0].set_ylabel("diversity gain (%)")
    axes[1].set_ylabel("F-measure (%)")
    for ax in axes:
        ax.set_xlabel("lambda")
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    path = out / "ablation.svg"
    _save(fig, path)
    return path
