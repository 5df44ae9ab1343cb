"""Declarative parameter sweeps: JSON configs in, CSV datasets out.

All rates in a config are read in units of the gain rate (gamma1 = 1
unless overridden).  Outputs are deterministic: rows are sorted by grid
index, floats are written with round-trip precision, and the metadata
sidecar carries no timestamps, so identical configs produce
byte-identical files.  Completed cells are appended to a partial file
as they finish; re-running against an interrupted output computes only
the missing cells (a cell is keyed by the config hash plus grid index).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .model import SystemParams, build_liouvillian
from .observables import (
    cross_g2,
    phonon_numbers,
    power_spectrum,
    sync_measure,
    wigner,
)
from .operators import partial_trace
from .perturbation import perturbative_sync
from .meanfield import arnold_tongue, fixed_points
from .solvers import SolveOptions, solve_steady_state, steady_state_residual

__all__ = [
    "ConfigError",
    "SweepGrid",
    "SweepResult",
    "load_config",
    "run_sweep",
]

AXIS_NAMES = ("delta", "zeta", "kerr", "gamma2")
QUANTUM_OBSERVABLES = ("sync", "g2", "phonons", "wigner", "spectrum")
ALL_OBSERVABLES = QUANTUM_OBSERVABLES + ("tongue", "perturbative_sync")

_SCHEMA = {
    "type": "object",
    "required": ["axes", "fixed", "observables", "output"],
    "additionalProperties": False,
    "properties": {
        "axes": {
            "type": "array",
            "minItems": 0,
            "maxItems": 2,
            "items": {
                "type": "object",
                "required": ["name", "start", "stop", "count"],
                "additionalProperties": False,
                "properties": {
                    "name": {"enum": list(AXIS_NAMES)},
                    "start": {"type": "number"},
                    "stop": {"type": "number"},
                    "count": {"type": "integer", "minimum": 1},
                    "scale": {"enum": ["linear", "log"]},
                },
            },
        },
        "fixed": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delta": {"type": "number"},
                "zeta": {"type": "number"},
                "kerr": {"type": "number"},
                "gamma1": {"type": "number", "exclusiveMinimum": 0},
                "gamma2": {"type": "number", "exclusiveMinimum": 0},
                "dims": {
                    "anyOf": [
                        {"type": "integer", "minimum": 4},
                        {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 4},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    ]
                },
            },
        },
        "observables": {
            "type": "array",
            "minItems": 1,
            "items": {"enum": list(ALL_OBSERVABLES)},
        },
        "output": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string", "minLength": 1},
                "format": {"enum": ["csv"]},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["direct", "iterative"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "tail_mass": {"type": "number", "exclusiveMinimum": 0},
                "adaptive_dims": {"type": "boolean"},
            },
        },
        "wigner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "extent": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 11},
                "modes": {"type": "array", "items": {"enum": [1, 2]}},
            },
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_max": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 11},
                "modes": {"type": "array", "items": {"enum": [1, 2]}},
                "method": {"enum": ["time", "resolvent"]},
            },
        },
        "perturbation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mode": {"enum": ["sector", "numerical", "printed"]}},
        },
    },
}


class ConfigError(ValueError):
    """Sweep configuration failed validation."""


def load_config(path) -> dict:
    """Read and validate a sweep config file."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, _SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"config rejected: {err.message}") from None

    names = [ax["name"] for ax in cfg["axes"]]
    if len(set(names)) != len(names):
        raise ConfigError("axis names must be distinct")
    for ax in cfg["axes"]:
        if not (np.isfinite(ax["start"]) and np.isfinite(ax["stop"])):
            raise ConfigError(f"axis {ax['name']} range must be finite")
        if ax.get("scale", "linear") == "log" and (ax["start"] <= 0 or ax["stop"] <= 0):
            raise ConfigError(f"log axis {ax['name']} needs positive endpoints")

    obs = cfg["observables"]
    if "tongue" in obs:
        if obs != ["tongue"]:
            raise ConfigError("'tongue' cannot be combined with other observables")
        if sorted(names) != ["delta", "zeta"]:
            raise ConfigError("'tongue' needs exactly a zeta axis and a delta axis")
    if "perturbative_sync" in obs and len(obs) > 1:
        raise ConfigError("'perturbative_sync' cannot be combined with other observables")
    if "gamma2" in names and "gamma2" in cfg["fixed"]:
        pass  # axis value overrides the fixed entry per cell


def _axis_values(ax: dict) -> np.ndarray:
    if ax.get("scale", "linear") == "log":
        return np.geomspace(ax["start"], ax["stop"], ax["count"])
    return np.linspace(ax["start"], ax["stop"], ax["count"])


def _normalize_dims(dims) -> tuple[int, int]:
    if isinstance(dims, int):
        return (dims, dims)
    return (int(dims[0]), int(dims[1]))


@dataclass(frozen=True)
class SweepGrid:
    """Parsed sweep: axis grids, per-cell parameters and observables."""

    config: dict
    axis_names: tuple[str, ...]
    axis_values: tuple[np.ndarray, ...]
    observables: tuple[str, ...]
    name: str

    @classmethod
    def from_config(cls, cfg: dict) -> "SweepGrid":
        validate_config(cfg)
        names = tuple(ax["name"] for ax in cfg["axes"])
        values = tuple(_axis_values(ax) for ax in cfg["axes"])
        return cls(
            config=cfg,
            axis_names=names,
            axis_values=values,
            observables=tuple(cfg["observables"]),
            name=cfg["output"]["name"],
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.axis_values) or (1,)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def cell_values(self, index: int) -> dict:
        """Axis-name to value mapping of one grid cell (row-major)."""
        out = {}
        if self.axis_values:
            multi = np.unravel_index(index, self.shape)
            for name, values, k in zip(self.axis_names, self.axis_values, multi):
                out[name] = float(values[k])
        return out

    def cell_params(self, index: int, dims_override=None) -> SystemParams:
        fixed = dict(self.config["fixed"])
        cell = self.cell_values(index)
        kerr = cell.get("kerr", fixed.get("kerr", 0.0))
        dims = _normalize_dims(dims_override or fixed.get("dims", 12))
        return SystemParams(
            delta=cell.get("delta", fixed.get("delta", 0.0)),
            zeta=cell.get("zeta", fixed.get("zeta", 0.0)),
            kerr1=kerr,
            kerr2=kerr,
            gamma1=fixed.get("gamma1", 1.0),
            gamma2=cell.get("gamma2", fixed.get("gamma2", 10.0)),
            dims=dims,
        )


@dataclass(frozen=True)
class SweepResult:
    dataset_path: Path
    meta_path: Path
    n_cells: int
    n_failed: int
    n_computed: int
    n_reused: int
    aux_files: tuple = ()


def _config_hash(cfg: dict, dims_override, seed) -> str:
    payload = {k: v for k, v in cfg.items() if k != "output"}
    payload["_dims_override"] = list(_normalize_dims(dims_override)) if dims_override else None
    payload["_seed"] = seed
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _columns(observables) -> list[str]:
    cols = ["index", "delta", "zeta", "kerr", "gamma2"]
    if "tongue" in observables:
        return cols + ["synchronized", "phases", "error"]
    if "perturbative_sync" in observables or "sync" in observables:
        cols += ["s_abs", "s_phase"]
    if "g2" in observables:
        cols += ["g2"]
    if "phonons" in observables:
        cols += ["n1", "n2"]
    return cols + ["error"]


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return repr(float(value))


def _solve_options(cfg: dict) -> SolveOptions:
    sv = cfg.get("solver", {})
    return SolveOptions(method=sv.get("method", "direct"), tol=sv.get("tol", 1e-10))


def _compute_cell(task: dict) -> dict:
    """One grid cell; never raises (errors are recorded in-band)."""
    grid = SweepGrid.from_config(task["config"])
    index = task["index"]
    params = grid.cell_params(index, task["dims_override"])
    cfg = grid.config
    row = {
        "index": index,
        "delta": params.delta,
        "zeta": params.zeta,
        "kerr": params.kerr1,
        "gamma2": params.gamma2,
        "error": "",
    }
    aux: list[tuple[str, np.ndarray, str]] = []
    meta = {"index": index, "dims": list(params.dims), "residual": None}
    obs = grid.observables
    try:
        if "tongue" in obs:
            fps = fixed_points(params)
            stable = sorted(fp.phi for fp in fps if fp.stable)
            row["synchronized"] = bool(stable)
            row["phases"] = ";".join(repr(float(p)) for p in stable)
            return {"row": row, "aux": aux, "meta": meta}

        if "perturbative_sync" in obs:
            pmode = cfg.get("perturbation", {}).get("mode", "sector")
            s = perturbative_sync(params, mode=pmode)
            row["s_abs"] = abs(s)
            phase = -np.angle(s)
            if phase <= -np.pi:
                phase += 2.0 * np.pi
            row["s_phase"] = phase
            return {"row": row, "aux": aux, "meta": meta}

        opts = _solve_options(cfg)
        sv = cfg.get("solver", {})
        if sv.get("adaptive_dims", True):
            rho, used, residual = solve_steady_state(
                params, opts, tail_mass=sv.get("tail_mass", 1e-6)
            )
        else:
            liouv = build_liouvillian(params)
            from .solvers import steady_state

            rho = steady_state(liouv, opts)
            used, residual = params, steady_state_residual(liouv, rho)
        meta["dims"] = list(used.dims)
        meta["residual"] = residual

        if "sync" in obs:
            s = sync_measure(rho)
            row["s_abs"] = s.magnitude
            row["s_phase"] = s.phase
        if "g2" in obs:
            row["g2"] = cross_g2(rho)
        if "phonons" in obs:
            n1, n2 = phonon_numbers(rho)
            row["n1"] = n1
            row["n2"] = n2
        if "wigner" in obs:
            wcfg = cfg.get("wigner", {})
            extent = wcfg.get("extent", 4.0)
            points = wcfg.get("points", 101)
            coords = np.linspace(-extent, extent, points)
            for mode in wcfg.get("modes", [1, 2]):
                reduced = partial_trace(rho, keep=mode - 1)
                w = wigner(reduced, coords)
                header = f"wigner mode {mode}; rows p, cols x, grid linspace(-{extent}, {extent}, {points})"
                aux.append((f"cell{index:05d}_wigner_mode{mode}", w, header))
        if "spectrum" in obs:
            scfg = cfg.get("spectrum", {})
            omega_max = scfg.get("omega_max", 20.0)
            points = scfg.get("points", 801)
            grid_w = np.linspace(-omega_max, omega_max, points)
            for mode in scfg.get("modes", [1, 2]):
                spec = power_spectrum(
                    used, mode - 1, grid_w, method=scfg.get("method", "time")
                )
                arr = np.column_stack([spec.freqs, spec.values])
                aux.append(
                    (f"cell{index:05d}_spectrum_mode{mode}", arr, "omega_tilde,power")
                )
    except Exception as err:
        row["error"] = f"{type(err).__name__}: {err}"
        meta["error"] = row["error"]
    return {"row": row, "aux": aux, "meta": meta}


def _read_rows(path: Path, columns) -> dict[int, dict]:
    if not path.exists():
        return {}
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != columns:
            return {}
        for rec in reader:
            try:
                out[int(rec["index"])] = rec
            except (KeyError, ValueError):
                continue
    return out


def run_sweep(
    cfg: dict,
    out_dir,
    workers: int = 1,
    dims_override=None,
    seed: int = 0,
) -> SweepResult:
    """Execute every grid cell and write the dataset, metadata sidecar
    and any per-cell auxiliary files into ``out_dir``.

    Per-cell failures are recorded in the dataset's error column and
    never abort the sweep.  Cells already present in a matching final or
    partial output are reused.
    """
    grid = SweepGrid.from_config(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = _columns(grid.observables)
    chash = _config_hash(cfg, dims_override, seed)

    dataset = out_dir / f"{grid.name}.csv"
    meta_path = out_dir / f"{grid.name}.meta.json"
    partial = out_dir / f"{grid.name}.partial.{chash}.csv"

    done: dict[int, dict] = {}
    meta_cells: dict[int, dict] = {}
    if dataset.exists() and meta_path.exists():
        try:
            with open(meta_path) as fh:
                old_meta = json.load(fh)
        except (OSError, json.JSONDecodeError):
            old_meta = {}
        if old_meta.get("config_hash") == chash:
            done.update(_read_rows(dataset, columns))
            meta_cells.update({c["index"]: c for c in old_meta.get("cells", [])})
    done.update(_read_rows(partial, columns))

    todo = [i for i in range(grid.n_cells) if i not in done]
    tasks = [
        {"config": cfg, "index": i, "dims_override": dims_override, "seed": seed}
        for i in todo
    ]

    aux_written: list[str] = []
    partial_fh = None
    if todo:
        partial_fh = open(partial, "a", newline="")
        writer = csv.writer(partial_fh, lineterminator="\n")
        if partial.stat().st_size == 0:
            writer.writerow(columns)

    def _absorb(result: dict):
        row = result["row"]
        rec = {c: _fmt(row.get(c, "")) for c in columns}
        done[row["index"]] = rec
        meta_cells[row["index"]] = result["meta"]
        for stem, arr, header in result["aux"]:
            path = out_dir / f"{grid.name}_{stem}.csv"
            np.savetxt(path, arr, delimiter=",", fmt="%.17g", header=header)
            aux_written.append(path.name)
        if partial_fh is not None:
            writer.writerow([rec[c] for c in columns])
            partial_fh.flush()

    try:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for result in pool.map(_compute_cell, tasks):
                    _absorb(result)
        else:
            for task in tasks:
                _absorb(_compute_cell(task))
    finally:
        if partial_fh is not None:
            partial_fh.close()

    with open(dataset, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for i in range(grid.n_cells):
            rec = done.get(i)
            if rec is None:
                continue
            writer.writerow([rec.get(c, "") for c in columns])

    cells_meta = [meta_cells[i] for i in sorted(meta_cells)]
    meta = {
        "config": cfg,
        "config_hash": chash,
        "tool_version": __version__,
        "dims_override": list(_normalize_dims(dims_override)) if dims_override else None,
        "seed": seed,
        "cells": cells_meta,
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if partial.exists():
        os.remove(partial)

    n_failed = sum(1 for rec in done.values() if rec.get("error"))
    return SweepResult(
        dataset_path=dataset,
        meta_path=meta_path,
        n_cells=grid.n_cells,
        n_failed=n_failed,
        n_computed=len(todo),
        n_reused=grid.n_cells - len(todo),
        aux_files=tuple(sorted(aux_written)),
    )
