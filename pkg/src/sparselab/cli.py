"""Command line: ``sparselab <stage> --config run.yaml --out results/``.

Exit codes: 0 success, 1 validation failure, 2 compute failure.
"""

from __future__ import annotations

import sys

import click

from . import experiments as X
from . import plotting, records
from .config import from_dict, load_config
from .errors import SparseLabError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_COMPUTE = 0, 1, 2


def _common(fn):
    fn = click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
                      help="Worker processes; results do not depend on this.")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False), default="results", show_default=True,
                      help="Output directory for JSONL, CSV and figures.")(fn)
    fn = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None,
                      help="Override the config seed (unsigned 64-bit).")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                      help="YAML experiment config.")(fn)
    fn = click.option("--no-figures", is_flag=True, help="Skip PNG rendering.")(fn)
    return fn


def _load(config_path, seed):
    cfg = load_config(config_path) if config_path else from_dict({"model": {"p": 0.8, "beta": 2}})
    return cfg.with_seed(seed)


def _run(stages, config_path, seed, out, workers, no_figures, strict=True):
    try:
        cfg = _load(config_path, seed)
        record, _ = X.run_stages(cfg, stages, workers)
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    for name, st in record.stages.items():
        if st["status"] != "ok":
            click.echo(f"stage {name} failed: {st['error']}", err=True)
    try:
        paths = records.emit(record, out)
        if not no_figures:
            paths += plotting.render(record, out)
    except SparseLabError as exc:
        click.echo(f"output error: {exc}", err=True)
        sys.exit(EXIT_COMPUTE)
    for p in paths:
        click.echo(str(p))
    kinds = [st["kind"] for st in record.stages.values() if st["status"] != "ok"]
    if kinds and (strict or len(kinds) == len(record.stages)):
        sys.exit(EXIT_VALIDATION if all(k == "validation" for k in kinds) else EXIT_COMPUTE)
    sys.exit(EXIT_OK)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Random sparse Jacobi matrices: spectra, local dimensions, Kronecker sums."""


def _stage_command(name, stages, doc):
    @_common
    def cmd(config_path, seed, out, workers, no_figures):
        _run(stages, config_path, seed, out, workers, no_figures)

    cmd.__doc__ = doc
    main.command(name)(cmd)


_stage_command("phase-diagram", ["phase_diagram"], "Tabulate spectral regions over (energy, v/v_c).")
_stage_command("spectrum", ["spectrum"], "Site-0 spectral measure of one truncation (stream 0).")
_stage_command("dimension", ["dimension"], "Local-dimension fits from disorder-averaged window masses.")
_stage_command("decay", ["decay"], "Time-averaged return probability and its power-law slope.")
_stage_command("prufer", ["growth"], "Pruefer growth rates and angle discrepancies per energy.")
_stage_command("kronecker", ["kronecker"], "Kronecker-sum diagnostics over the theta policy.")
_stage_command("params", ["params"], "Admissibility checks and the window/epsilon chooser.")


@main.command("suite")
@_common
def suite(config_path, seed, out, workers, no_figures):
    """Run every stage; failing stages are recorded and the rest continue."""
    _run(list(X.STAGES), config_path, seed, out, workers, no_figures, strict=False)

