"""Batch driver.

Subcommands dispatch sweep configs to the classical or quantum engines
and render figures from the resulting datasets.  Exit codes: 0 on full
success, 2 when individual cells failed (recorded in the dataset's
error column), 1 on configuration problems.

The default output directory comes from ``--out``, falling back to the
``QVDP_OUTPUT_DIR`` environment variable, then the working directory.
"""

from __future__ import annotations

import os
import sys

import click

from .plotting import PlotError, PlotSpec, render_plot
from .sweep import ConfigError, SweepResult, load_config, run_sweep

ENV_OUTPUT_DIR = "QVDP_OUTPUT_DIR"


class _Cli(click.Group):
    """Click group whose usage errors exit with code 1 (2 is reserved
    for partial per-cell failures)."""

    def main(self, *args, **kwargs):
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.exceptions.Exit as err:
            sys.exit(err.exit_code)
        except click.Abort:
            sys.exit(1)
        except (click.UsageError, click.ClickException) as err:
            err.show()
            sys.exit(1)


@click.group(cls=_Cli)
@click.version_option()
def main():
    """Coupled van der Pol oscillator synchronization toolkit."""


def _sweep_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="JSON sweep config.")(fn)
    fn = click.option("--out", "out_dir", default=None,
                      help=f"Output directory (default ${ENV_OUTPUT_DIR} or '.').")(fn)
    fn = click.option("--workers", default=1, show_default=True,
                      help="Concurrent cell workers.")(fn)
    fn = click.option("--dims", default=None, type=int,
                      help="Fock truncation override (both modes).")(fn)
    fn = click.option("--seed", default=0, show_default=True,
                      help="Seed for randomized classical initial conditions.")(fn)
    return fn


def _resolve_out(out_dir):
    return out_dir or os.environ.get(ENV_OUTPUT_DIR) or "."


def _run(config_path, out_dir, workers, dims, seed, required_observable):
    try:
        cfg = load_config(config_path)
        if required_observable and required_observable not in cfg["observables"]:
            raise ConfigError(
                f"this subcommand needs the {required_observable!r} observable; "
                f"config requests {cfg['observables']}"
            )
        result = run_sweep(
            cfg,
            _resolve_out(out_dir),
            workers=workers,
            dims_override=(dims, dims) if dims else None,
            seed=seed,
        )
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(1)
    _report(result)


def _report(result: SweepResult):
    click.echo(
        f"wrote {result.dataset_path} ({result.n_cells} cells, "
        f"{result.n_computed} computed, {result.n_reused} reused, "
        f"{result.n_failed} failed)"
    )
    if result.n_failed:
        sys.exit(2)
    sys.exit(0)


@main.command("classical-tongue")
@_sweep_options
def classical_tongue(config_path, out_dir, workers, dims, seed):
    """Stable locked states of the mean-field flow over a (zeta, delta) grid."""
    _run(config_path, out_dir, workers, dims, seed, "tongue")


@main.command("quantum-sync")
@_sweep_options
def quantum_sync(config_path, out_dir, workers, dims, seed):
    """Steady-state synchronization measure (full solver) over a sweep."""
    _run(config_path, out_dir, workers, dims, seed, "sync")


@main.command("g2-sweep")
@_sweep_options
def g2_sweep(config_path, out_dir, workers, dims, seed):
    """Cross second-order correlation over a sweep."""
    _run(config_path, out_dir, workers, dims, seed, "g2")


@main.command("spectrum")
@_sweep_options
def spectrum(config_path, out_dir, workers, dims, seed):
    """Emission power spectra, one file per cell and mode."""
    _run(config_path, out_dir, workers, dims, seed, "spectrum")


@main.command("wigner")
@_sweep_options
def wigner_cmd(config_path, out_dir, workers, dims, seed):
    """Single-oscillator Wigner functions, one file per cell and mode."""
    _run(config_path, out_dir, workers, dims, seed, "wigner")


@main.command("perturbative")
@_sweep_options
def perturbative(config_path, out_dir, workers, dims, seed):
    """Weak-coupling synchronization measure (no full solve)."""
    _run(config_path, out_dir, workers, dims, seed, "perturbative_sync")


@main.command("plot")
@click.argument("dataset", type=click.Path())
@click.option("--kind", type=click.Choice(["heatmap", "line", "wigner"]), required=True)
@click.option("--x", "x_col", default="delta", show_default=True)
@click.option("--y", "y_col", default="zeta", show_default=True)
@click.option("--value", default="s_abs", show_default=True)
@click.option("--group", default=None, help="Column giving one curve per value (line plots).")
@click.option("--out-file", required=True, help="Image file to write.")
def plot(dataset, kind, x_col, y_col, value, group, out_file):
    """Render a figure from a sweep dataset."""
    try:
        spec = PlotSpec(kind=kind, x=x_col, y=y_col, value=value, group=group,
                        out_path=out_file)
        path = render_plot(dataset, spec)
    except PlotError as err:
        click.echo(f"plot error: {err}", err=True)
        sys.exit(1)
    click.echo(f"wrote {path}")
    sys.exit(0)


if __name__ == "__main__":
    main()
