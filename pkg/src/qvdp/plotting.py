"""Figure rendering for sweep datasets: tongue/measure heatmaps, line
plots grouped by a parameter, and phase-space maps.  Phases are drawn
with a cyclic colormap over (-pi, pi].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotError", "PlotSpec", "render_plot"]

_CYCLIC_COLUMNS = {"s_phase", "phases"}


class PlotError(ValueError):
    """Dataset and plot specification do not fit together."""


@dataclass(frozen=True)
class PlotSpec:
    """What to draw.

    kind "heatmap" pivots (x, y, value) onto a 2-d grid; "line" draws
    value against x, one curve per distinct ``group`` value; "wigner"
    renders a phase-space CSV written by the sweep engine.
    """

    kind: str
    out_path: str
    x: str = "delta"
    y: str = "zeta"
    value: str = "s_abs"
    group: str | None = None

    def __post_init__(self):
        if self.kind not in ("heatmap", "line", "wigner"):
            raise PlotError(f"unknown plot kind {self.kind!r}")


def _read_dataset(path: Path) -> list[dict]:
    if not path.exists():
        raise PlotError(f"dataset {path} does not exist")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise PlotError(f"dataset {path} is empty")
    return rows


def _column(rows: list[dict], name: str) -> np.ndarray:
    if name not in rows[0]:
        raise PlotError(f"column {name!r} missing; have {sorted(rows[0])}")
    out = []
    for rec in rows:
        raw = rec[name]
        if raw == "" or raw is None:
            out.append(np.nan)
        elif raw in ("true", "false"):
            out.append(1.0 if raw == "true" else 0.0)
        else:
            try:
                out.append(float(raw))
            except ValueError:
                # multi-valued cell (e.g. stable phase list): take the first
                out.append(float(raw.split(";")[0]) if raw else np.nan)
    return np.asarray(out)


def _cmap_for(column: str):
    if column in _CYCLIC_COLUMNS:
        return "twilight", (-np.pi, np.pi)
    return "viridis", (None, None)


def render_plot(dataset_path, spec: PlotSpec) -> Path:
    """Render one figure from a dataset file; returns the image path."""
    dataset_path = Path(dataset_path)
    out = Path(spec.out_path)

    if spec.kind == "wigner":
        try:
            grid = np.loadtxt(dataset_path, delimiter=",")
        except (OSError, ValueError) as err:
            raise PlotError(f"cannot read phase-space grid: {err}") from None
        if grid.ndim != 2 or grid.size == 0:
            raise PlotError("phase-space file does not hold a 2-d grid")
        fig, ax = plt.subplots(figsize=(5, 4.2))
        span = max(abs(grid.max()), abs(grid.min()), 1e-12)
        im = ax.imshow(grid, origin="lower", cmap="RdBu_r", vmin=-span, vmax=span)
        ax.set_xlabel("x (grid index)")
        ax.set_ylabel("p (grid index)")
        fig.colorbar(im, ax=ax, label="W")
        fig.tight_layout()
        fig.savefig(out, dpi=160)
        plt.close(fig)
        return out

    rows = _read_dataset(dataset_path)

    if spec.kind == "heatmap":
        xs = _column(rows, spec.x)
        ys = _column(rows, spec.y)
        vals = _column(rows, spec.value)
        ux, uy = np.unique(xs), np.unique(ys)
        pivot = np.full((len(uy), len(ux)), np.nan)
        ix = np.searchsorted(ux, xs)
        iy = np.searchsorted(uy, ys)
        pivot[iy, ix] = vals
        cmap, (vmin, vmax) = _cmap_for(spec.value)
        fig, ax = plt.subplots(figsize=(5.6, 4.2))
        im = ax.pcolormesh(ux, uy, pivot, cmap=cmap, vmin=vmin, vmax=vmax, shading="nearest")
        ax.set_xlabel(spec.x)
        ax.set_ylabel(spec.y)
        fig.colorbar(im, ax=ax, label=spec.value)
        fig.tight_layout()
        fig.savefig(out, dpi=160)
        plt.close(fig)
        return out

    # line plot
    xs = _column(rows, spec.x)
    vals = _column(rows, spec.value)
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    if spec.group:
        gs = _column(rows, spec.group)
        for g in np.unique(gs):
            sel = gs == g
            order = np.argsort(xs[sel])
            ax.plot(xs[sel][order], vals[sel][order], label=f"{spec.group}={g:g}")
        ax.legend(fontsize=8)
    else:
        order = np.argsort(xs)
        ax.plot(xs[order], vals[order])
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.value)
    fig.tight_layout()
    fig.savefig(out, dpi=160)
    plt.close(fig)
    return out
