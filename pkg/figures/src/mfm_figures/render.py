"""Grouped bar charts of the posterior over k, one series per N.

Input is the sweep harness's posterior_k.csv (columns dataset, seed, N,
prior_mode, k, probability; header-driven, column order free). Output is one
image with one panel per dataset: x-axis k, y-axis posterior probability,
one bar series per N in ascending order. Replicate seeds are shown as the
mean bar with min-max whiskers; a single seed renders plain bars.

Rendering is a pure function of (CSV bytes, FigureSpec): the rc parameters
that affect output bytes are pinned (svg.hashsalt, fonts, dpi) and the
date/software metadata stamps are stripped, so repeated renders are
byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

__all__ = [
    "REQUIRED_COLUMNS",
    "SchemaError",
    "FigureSpec",
    "Row",
    "Series",
    "Panel",
    "load_rows",
    "aggregate",
    "display_k_max",
    "render_posterior_bars",
]

REQUIRED_COLUMNS = ("dataset", "seed", "N", "prior_mode", "k", "probability")

# every rc value that can leak into the output bytes is pinned here
_RC = {
    "svg.hashsalt": "mfm-figures",
    "svg.fonttype": "none",
    "figure.dpi": 100.0,
    "savefig.dpi": 200.0,
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.titlesize": 10.0,
    "axes.labelsize": 9.0,
    "legend.fontsize": 8.0,
    "path.simplify": False,
}

_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


class SchemaError(ValueError):
    """Input CSV does not match the posterior_k.csv schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSV, output image, display range, title."""

    input: str
    output: str
    fmt: str = "svg"
    k_max: int | None = None  # None: [1, max k with mean p >= 0.005 in any series]
    title: str | None = None

    def __post_init__(self):
        if self.fmt not in ("svg", "png"):
            raise ValueError(f"fmt must be 'svg' or 'png', got {self.fmt!r}")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must leave a nonempty k range")


@dataclass(frozen=True)
class Row:
    dataset: str
    seed: int
    N: int
    prior_mode: str
    k: int
    probability: float


@dataclass(frozen=True)
class Series:
    """One N within a panel: per-k mean across seeds plus min-max envelope."""

    N: int
    mean: np.ndarray  # index i = k = i + 1
    lo: np.ndarray
    hi: np.ndarray
    n_seeds: int


@dataclass(frozen=True)
class Panel:
    dataset: str
    prior_mode: str
    series: tuple[Series, ...]  # ascending N
    warnings: tuple[str, ...]  # (seed, N) groups whose probabilities miss 1


def load_rows(path: str) -> list[Row]:
    """Parse posterior_k.csv by column name; column order is free."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            try:
                row = Row(
                    dataset=rec["dataset"],
                    seed=int(rec["seed"]),
                    N=int(rec["N"]),
                    prior_mode=rec["prior_mode"],
                    k=int(rec["k"]),
                    probability=float(rec["probability"]),
                )
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"line {i}: {exc}") from exc
            if row.k < 1:
                raise SchemaError(f"line {i}: k must be >= 1, got {row.k}")
            if not 0.0 <= row.probability <= 1.0 + 1e-9:
                raise SchemaError(
                    f"line {i}: probability outside [0, 1]: {row.probability}"
                )
            rows.append(row)
    if not rows:
        raise SchemaError("no data rows")
    return rows


def aggregate(rows: list[Row]) -> list[Panel]:
    """Group rows into panels by dataset, series by N, mean over seeds."""
    panels = []
    for dataset in sorted({r.dataset for r in rows}):
        sub = [r for r in rows if r.dataset == dataset]
        modes = sorted({r.prior_mode for r in sub})
        if len(modes) > 1:
            raise SchemaError(
                f"dataset {dataset!r} mixes prior_mode values: {', '.join(modes)}"
            )
        k_max = max(r.k for r in sub)
        warnings = []
        series = []
        for n in sorted({r.N for r in sub}):
            cell = [r for r in sub if r.N == n]
            seeds = sorted({r.seed for r in cell})
            per_seed = np.zeros((len(seeds), k_max))
            for r in cell:
                per_seed[seeds.index(r.seed), r.k - 1] += r.probability
            for j, seed in enumerate(seeds):
                total = per_seed[j].sum()
                if abs(total - 1.0) > 1e-6:
                    warnings.append(f"seed {seed}, N={n} sums to {total:.6f}")
            series.append(
                Series(
                    N=n,
                    mean=per_seed.mean(axis=0),
                    lo=per_seed.min(axis=0),
                    hi=per_seed.max(axis=0),
                    n_seeds=len(seeds),
                )
            )
        panels.append(
            Panel(
                dataset=dataset,
                prior_mode=modes[0],
                series=tuple(series),
                warnings=tuple(warnings),
            )
        )
    return panels


def display_k_max(panel: Panel, k_max: int | None) -> int:
    """Displayed range is [1, max k with mean p >= 0.005 in any series]."""
    if k_max is not None:
        return k_max
    best = 1
    for s in panel.series:
        idx = np.nonzero(s.mean >= 0.005)[0]
        if idx.size:
            best = max(best, int(idx[-1]) + 1)
    return best


def _draw_panel(ax, panel: Panel, k_max: int | None) -> None:
    k_disp = display_k_max(panel, k_max)
    ks = np.arange(1, k_disp + 1)
    n_series = len(panel.series)
    width = 0.8 / n_series
    notes = list(panel.warnings)
    for i, s in enumerate(panel.series):
        mean = np.zeros(k_disp)
        lo = np.zeros(k_disp)
        hi = np.zeros(k_disp)
        m = min(k_disp, s.mean.size)
        mean[:m], lo[:m], hi[:m] = s.mean[:m], s.lo[:m], s.hi[:m]
        tail = s.mean[k_disp:].sum()
        if tail > 1e-6:
            notes.append(f"N={s.N}: {tail:.3f} beyond k={k_disp}")
        x = ks - 0.4 + (i + 0.5) * width
        yerr = None
        if s.n_seeds > 1:
            yerr = np.vstack([mean - lo, hi - mean])
        ax.bar(
            x,
            mean,
            width,
            yerr=yerr,
            error_kw={"elinewidth": 0.8, "capsize": 1.5, "capthick": 0.8},
            color=_COLORS[i % len(_COLORS)],
            label=f"N = {s.N}",
        )
    if notes:
        ax.text(
            0.02,
            0.98,
            "warning: " + "; ".join(notes),
            transform=ax.transAxes,
            va="top",
            fontsize=6.0,
            color="#7f1d1d",
        )
    ax.set_xticks(ks)
    ax.set_xlabel("k")
    ax.set_ylabel("posterior probability")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(f"{panel.dataset} ({panel.prior_mode})")
    ax.legend(frameon=False)


def render_posterior_bars(spec: FigureSpec) -> str:
    """Render the figure described by spec; returns the written path."""
    panels = aggregate(load_rows(spec.input))
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(
            1,
            len(panels),
            figsize=(4.2 * len(panels), 3.2),
            squeeze=False,
        )
        for ax, panel in zip(axes[0], panels):
            _draw_panel(ax, panel, spec.k_max)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        # strip the volatile metadata stamps so output bytes depend on input only
        metadata = {"Date": None} if spec.fmt == "svg" else {"Software": None}
        fig.savefig(spec.output, format=spec.fmt, metadata=metadata)
        plt.close(fig)
    return spec.output
