"""Command-line interface.

Each subcommand recomputes the pipeline deterministically up to its
stage, so deleted intermediate artifacts are reproduced bit-identically
from the dataset and config alone.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .errors import FlowscatError, StageError
from .pipeline import emit_projection, load_config, run_pipeline
from .synth import SyntheticSpec, generate_synthetic

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


def _overrides(seed, out, method, contamination, full_dataset):
    ov = {}
    if seed is not None:
        ov["seed"] = seed
    if out is not None:
        ov["output_dir"] = out
    if method is not None:
        ov["method"] = method
    if full_dataset:
        ov["full_dataset"] = True
    if contamination is not None:
        ov["scenario"] = {"contamination": contamination}
    return ov


def _merge_scenario(config_path, overrides):
    # CLI contamination overrides just that key, keeping the rest of the
    # scenario section from the file
    scenario_override = overrides.pop("scenario", None)
    cfg = load_config(config_path, **overrides)
    if scenario_override:
        cfg.scenario = {**cfg.scenario, **scenario_override}
    return cfg


def _run_stage(config_path, through, seed, out, method, contamination,
               full_dataset):
    cfg = _merge_scenario(
        config_path, _overrides(seed, out, method, contamination, full_dataset)
    )
    return run_pipeline(cfg, through=through)


common_options = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=True), help="Pipeline config YAML."),
    click.option("--seed", type=int, default=None, help="Master seed override."),
    click.option("--out", type=click.Path(), default=None,
                 help="Output directory override."),
    click.option("--method", type=click.Choice(["steg", "n2v-egs"]), default=None,
                 help="Embedding method override."),
    click.option("--contamination", type=float, default=None,
                 help="Training contamination scenario override (0 or 0.04)."),
    click.option("--full-dataset", is_flag=True, default=False,
                 help="Lift the desk-scale row guard for full benchmark runs."),
]


def _with_common(fn):
    for option in reversed(common_options):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="flowscat")
def main():
    """Self-supervised flow anomaly detection experiments."""


@main.command()
@click.option("--out", type=click.Path(), required=True,
              help="Directory for dataset.csv and schema.yaml.")
@click.option("--flows", type=int, default=5000, show_default=True)
@click.option("--hosts", type=int, default=40, show_default=True)
@click.option("--attack-fraction", type=float, default=0.04, show_default=True)
@click.option("--strength", type=float, default=4.0, show_default=True,
              help="Anomaly feature shift in standard deviations.")
@click.option("--seed", type=int, default=0, show_default=True)
def synth(out, flows, hosts, attack_fraction, strength, seed):
    """Generate a labelled synthetic flow dataset."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(n_flows=flows, n_hosts=hosts,
                         attack_fraction=attack_fraction,
                         anomaly_strength=strength, seed=seed)
    generate_synthetic(spec, out_dir / "dataset.csv", out_dir / "schema.yaml")
    click.echo(f"wrote {out_dir / 'dataset.csv'} and {out_dir / 'schema.yaml'}")


def _stage_command(name, through, help_text):
    @main.command(name=name, help=help_text)
    @_with_common
    def command(config_path, seed, out, method, contamination, full_dataset):
        result = _run_stage(config_path, through, seed, out, method,
                            contamination, full_dataset)
        click.echo(f"{name}: artifacts under {result.out_dir}")
    return command


_stage_command("ingest", "ingest",
               "Parse, downsample, split, encode and normalize the dataset.")
_stage_command("embed", "encode",
               "Run through graph building, feature augmentation and encoding.")
_stage_command("detect", "detect",
               "Grid-search the anomaly detectors over edge embeddings.")


@main.command()
@_with_common
def evaluate(config_path, seed, out, method, contamination, full_dataset):
    """Produce the final per-detector evaluation report."""
    result = _run_stage(config_path, "report", seed, out, method,
                        contamination, full_dataset)
    for row in result.report.rows:
        click.echo(
            f"{row.method} {row.detector:8s} acc={row.accuracy:.4f} "
            f"macro_f1={row.macro_f1:.4f} dr={row.detection_rate:.4f}"
        )
    click.echo(f"report: {result.report_csv}")


@main.command()
@_with_common
def run(config_path, seed, out, method, contamination, full_dataset):
    """Run the full pipeline: ingest through report."""
    result = _run_stage(config_path, "report", seed, out, method,
                        contamination, full_dataset)
    best = result.report.best()
    click.echo(
        f"best: {best.detector} macro_f1={best.macro_f1:.4f} "
        f"(hyperparameter={best.hyperparameter}, "
        f"contamination={best.contamination:g})"
    )
    click.echo(f"report: {result.report_csv}")


@main.command()
@_with_common
def project(config_path, seed, out, method, contamination, full_dataset):
    """Dump a 2-D principal-component projection of test edge embeddings."""
    result = _run_stage(config_path, "encode", seed, out, method,
                        contamination, full_dataset)
    path = result.out_dir / "projection" / "test_projection.csv"
    emit_projection(result.test_edges, result.test_table.labels, path)
    click.echo(f"projection: {path}")


def entry():
    """Console-script entry: nonzero exit with a stage-tagged message."""
    try:
        main(standalone_mode=False)
    except click.ClickException as err:
        err.show()
        sys.exit(err.exit_code)
    except click.Abort:
        sys.exit(1)
    except StageError as err:
        click.echo(f"error {err}", err=True)
        sys.exit(2)
    except FlowscatError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    entry()
