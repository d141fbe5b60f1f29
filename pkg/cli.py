# stdlib
import json
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

# third party
import click

# first party
from audit_logger import clear_audit_log, get_audit_stats
from exceptions import ConfigError
from helpers import get_logger, set_log_level
from pipeline import (
    EXIT_CONFIG,
    analyze_artifacts,
    phantom_eval_artifacts,
    phantom_gen_artifacts,
    pipeline_artifacts,
    report_artifacts,
    run_stage,
    segment_artifacts,
)
from schema import CandidateMode, EpsilonMode, LesionMode, ReportFormat
from settings import PipelineConfig, load_config

logger = get_logger(__name__)

PATH = click.Path(path_type=Path)


def _apply(func: Callable, options: List[Callable]) -> Callable:
    for option in reversed(options):
        func = option(func)
    return func


def common_options(func: Callable) -> Callable:
    """--config, --log-level and --audit, shared by every command."""
    return _apply(
        func,
        [
            click.option(
                "--config",
                "config_path",
                type=PATH,
                default=None,
                help="JSON (or .yaml/.yml) file of PipelineConfig fields; flags override it.",
            ),
            click.option(
                "--log-level",
                "log_level",
                type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
                default=None,
            ),
            click.option("--audit", is_flag=True, help="Print stage audit statistics on stderr."),
        ],
    )


def detection_options(func: Callable) -> Callable:
    """Clustering and focus-detection flags."""
    options = [
        click.option("--kmin", "k_min", type=int, default=None, help="Smallest K tried (>= 2)."),
        click.option("--kmax", "k_max", type=int, default=None, help="Largest K tried."),
        click.option("--seed", type=int, default=None, help="Seed of the k-means++ start."),
        click.option("--theta", type=float, default=None, help="Symmetry acceptance threshold."),
        click.option("--w-s", "w_s", type=float, default=None, help="Weight of row/col features."),
        click.option("--w-i", "w_i", type=float, default=None, help="Weight of the intensity feature."),
        click.option("--max-iter", "max_iter", type=int, default=None),
        click.option(
            "--epsilon-mode",
            "epsilon_mode",
            type=click.Choice([m.value for m in EpsilonMode]),
            default=None,
        ),
        click.option("--n-jobs", "n_jobs", type=int, default=None, help="Worker threads."),
        click.option("--tau-a", "tau_a", type=float, default=None, help="Focus asymmetry threshold."),
        click.option("--background", type=float, default=None, help="Brain mask threshold."),
        click.option(
            "--candidates",
            "candidate_mode",
            type=click.Choice([m.value for m in CandidateMode]),
            default=None,
            help="Which in-mask pixels are clustered.",
        ),
        click.option("--deficit-floor", "deficit_floor", type=float, default=None),
        click.option("--min-candidates", "min_candidates", type=int, default=None),
    ]
    return _apply(func, options)


def _configure(config_path: Optional[Path], overrides: Dict[str, Any]) -> Optional[PipelineConfig]:
    try:
        cfg = load_config(config_path, **overrides)
        set_log_level(cfg.log_level)
    except (ConfigError, ValueError) as e:
        logger.error("Invalid configuration error=%s", " ".join(str(e).split()))
        return None
    return cfg


def _finish(ctx: click.Context, code: int, audit: bool) -> None:
    if audit:
        click.echo(json.dumps(get_audit_stats(), sort_keys=True), err=True)
    ctx.exit(code)


def _run(
    ctx: click.Context,
    config_path: Optional[Path],
    audit: bool,
    build: Callable[[PipelineConfig], Dict[str, bytes]],
    overrides: Dict[str, Any],
) -> None:
    clear_audit_log()
    cfg = _configure(config_path, overrides)
    if cfg is None:
        _finish(ctx, EXIT_CONFIG, audit)
    _finish(ctx, run_stage(lambda: build(cfg), cfg.out), audit)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Symmetry clustering for epileptic focus localization on PET slices."""


@cli.command()
@click.option("--input", "input", type=PATH, default=None, help="Scan to segment (PGM, PNG or DICOM).")
@click.option("--out", type=PATH, default=None, help="Output directory.")
@click.option("--plot", type=PATH, default=None, help="Also write the Sym(K) chart as HTML.")
@detection_options
@common_options
@click.pass_context
def segment(ctx, config_path, log_level, audit, plot, **overrides):
    """Cluster a scan and write model.json and sym_index.csv."""
    _run(
        ctx,
        config_path,
        audit,
        lambda cfg: segment_artifacts(cfg, plot),
        dict(overrides, log_level=log_level),
    )


@cli.command()
@click.option("--input", "input", type=PATH, default=None, help="Scan to analyze.")
@click.option("--out", type=PATH, default=None, help="Output directory.")
@detection_options
@common_options
@click.pass_context
def analyze(ctx, config_path, log_level, audit, **overrides):
    """Locate the focus and write focus.json and asymmetry.pgm."""
    _run(ctx, config_path, audit, analyze_artifacts, dict(overrides, log_level=log_level))


@cli.command()
@click.option("--input", "inputs", type=PATH, multiple=True, help="Scan to report; repeatable.")
@click.option("--baseline", type=PATH, default=None, help="Normal scan every ratio is taken against.")
@click.option("--out", type=PATH, default=None, help="Output directory.")
@click.option(
    "--format",
    "report_format",
    type=click.Choice([f.value for f in ReportFormat], case_sensitive=False),
    default=None,
)
@click.option("--band-lo", "band_lo", type=float, default=None)
@click.option("--band-hi", "band_hi", type=float, default=None)
@click.option("--tau-b", "tau_b", type=float, default=None, help="Out-of-band fraction threshold.")
@click.option("--plot", type=PATH, default=None, help="Also write the comparison chart as HTML.")
@common_options
@click.pass_context
def report(ctx, config_path, log_level, audit, inputs, plot, **overrides):
    """Per-channel intensity sums, ratios against the baseline and band classification."""
    _run(
        ctx,
        config_path,
        audit,
        lambda cfg: report_artifacts(cfg, list(inputs), plot),
        dict(overrides, log_level=log_level),
    )


@cli.group()
def phantom():
    """Synthetic phantom batches with known lesions."""


@phantom.command("gen")
@click.option("--n", "n", type=int, required=True, help="Number of phantoms.")
@click.option("--seed", type=int, default=None)
@click.option("--radius", "lesion_radius", type=float, default=None)
@click.option("--contrast", "lesion_contrast", type=float, default=None)
@click.option("--noise", "noise_sigma", type=float, default=None)
@click.option(
    "--lesion-mode",
    "lesion_mode",
    type=click.Choice([m.value for m in LesionMode]),
    default=None,
)
@click.option("--out", type=PATH, default=None, help="Output directory.")
@common_options
@click.pass_context
def phantom_gen(ctx, config_path, log_level, audit, n, **overrides):
    """Write specs.json and phantom_NNNN.pgm files."""
    _run(
        ctx,
        config_path,
        audit,
        lambda cfg: phantom_gen_artifacts(cfg, n),
        dict(overrides, log_level=log_level),
    )


@phantom.command("eval")
@click.option("--dir", "directory", type=PATH, required=True, help="Directory written by phantom gen.")
@detection_options
@common_options
@click.pass_context
def phantom_eval(ctx, config_path, log_level, audit, directory, **overrides):
    """Detect on every phantom of a batch; writes and prints accuracy.json."""
    produced: Dict[str, bytes] = {}

    def build(cfg: PipelineConfig) -> Dict[str, bytes]:
        produced.update(phantom_eval_artifacts(cfg, directory))
        return produced

    clear_audit_log()
    cfg = _configure(config_path, dict(overrides, log_level=log_level))
    if cfg is None:
        _finish(ctx, EXIT_CONFIG, audit)
    code = run_stage(lambda: build(cfg), directory)
    if produced and code == 0:
        click.echo(next(iter(produced.values())).decode("utf-8"), nl=False)
    _finish(ctx, code, audit)


@cli.command("pipeline")
@click.option("--input", "input", type=PATH, default=None, help="Scan to process.")
@click.option("--baseline", type=PATH, default=None, help="Normal scan for the report ratios.")
@click.option("--out", type=PATH, default=None, help="Output directory.")
@detection_options
@common_options
@click.pass_context
def pipeline_command(ctx, config_path, log_level, audit, **overrides):
    """Run every stage; writes focus.json, report.csv, model.json and asymmetry.pgm."""
    _run(ctx, config_path, audit, pipeline_artifacts, dict(overrides, log_level=log_level))


if __name__ == "__main__":
    cli()
