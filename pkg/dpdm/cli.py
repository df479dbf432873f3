"""CLI interface for dpdm."""

from contextlib import contextmanager
from typing import Any, Callable, Iterator, Optional, Tuple

import click
from rich.console import Console
from rich.progress import Progress

from . import __version__
from .formatters.table_formatter import TableFormatter
from .processors.ablation_processor import AblationProcessor
from .processors.calibration_processor import CalibrationProcessor
from .processors.evaluation_processor import EvaluationProcessor
from .processors.run_config import RunConfig, resolve_config
from .processors.run_directory import RunDirectory
from .processors.sampling_processor import SamplingProcessor
from .processors.training_processor import TrainingProcessor
from .utils.errors import CheckpointError, ConfigError, DpdmError, ParseError, PrivacyError, ReportError
from .utils.logging import setup_logging

# Unknown `--key value` pairs are configuration overrides
COMMAND_SETTINGS = dict(ignore_unknown_options=True, allow_extra_args=True)


def common_options(f: Callable) -> Callable:
    f = click.option("--out", "-o", type=click.Path(file_okay=False), default=None, help="Run directory (default: runs)")(f)
    f = click.option("--seed", "-s", type=int, default=None, help="Seed for every random stream (default: 0)")(f)
    f = click.option("--config", "-c", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="key = value configuration file")(f)
    return click.pass_context(f)


def _prepare(
    ctx: click.Context, command: str, config_path: Optional[str], seed: Optional[int], out: Optional[str], **updates: Any
) -> Tuple[RunConfig, RunDirectory]:
    """Resolve the configuration, create the run directory and record config.resolved."""
    config = resolve_config(command, config_path, ctx.args, seed, out)
    explicit = {key: value for key, value in updates.items() if value is not None}
    if explicit:
        config = config.with_values(**explicit)
    run_dir = RunDirectory(config.out).create()
    run_dir.write_resolved(config)
    return config, run_dir


@contextmanager
def _reporting_errors(console: Console) -> Iterator[None]:
    try:
        yield
    except (ConfigError, ParseError) as e:
        console.print(f"[red bold]Configuration Error:[/red bold] {e}", style="red")
        raise click.Abort()
    except CheckpointError as e:
        console.print(f"[red bold]Checkpoint Error:[/red bold] {e}", style="red")
        raise click.Abort()
    except PrivacyError as e:
        console.print(f"[red bold]Privacy Error:[/red bold] {e}", style="red")
        raise click.Abort()
    except ReportError as e:
        console.print(f"[red bold]Report Error:[/red bold] {e}", style="red")
        raise click.Abort()
    except DpdmError as e:
        console.print(f"[red bold]Error:[/red bold] {e}", style="red")
        raise click.Abort()
    except click.Abort:
        raise
    except Exception as e:
        console.print(f"[red bold]Unexpected Error:[/red bold] {e}", style="red")
        raise click.Abort()


@contextmanager
def _training_progress(console: Console, steps: int, description: str):
    with Progress(console=console, transient=True) as progress:
        task = progress.add_task(description, total=steps)
        yield lambda stats: progress.update(task, completed=stats.step + 1)


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def cli(verbose: bool):
    """Differentially private diffusion models at desk scale."""
    setup_logging(verbose)


@cli.command(context_settings=COMMAND_SETTINGS)
@common_options
def pretrain(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out: Optional[str]):
    """
    Non-private pre-training on the pre-train domain.

    Example:
        dpdm pretrain --out runs/pre --pretrain_steps 500
    """
    console = Console()
    with _reporting_errors(console):
        config, run_dir = _prepare(ctx, "pretrain", config_path, seed, out)
        console.print(f"[cyan]Pre-training for {config['pretrain_steps']} steps into {run_dir.root}...[/cyan]")
        with _training_progress(console, config["pretrain_steps"], "Pre-training") as progress:
            result = TrainingProcessor(config, run_dir, progress=progress).pretrain()
        TableFormatter(console).print_train_result("Pre-training", result)


@cli.command(context_settings=COMMAND_SETTINGS)
@common_options
@click.option("--init", "-i", "init", type=click.Path(exists=True, dir_okay=False), default=None, help="Pre-trained checkpoint")
def finetune(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out: Optional[str], init: Optional[str]):
    """
    Private fine-tuning on the fine-tune domain.

    Example:
        dpdm finetune --init runs/pre/checkpoints/pretrain.dpdm --target_epsilon 10
    """
    console = Console()
    with _reporting_errors(console):
        config, run_dir = _prepare(ctx, "finetune", config_path, seed, out, init_checkpoint=init)
        console.print(f"[cyan]Fine-tuning for {config['steps']} steps into {run_dir.root}...[/cyan]")
        with _training_progress(console, config["steps"], "Fine-tuning") as progress:
            outcome = TrainingProcessor(config, run_dir, progress=progress).finetune()
        formatter = TableFormatter(console)
        formatter.print_train_result("Private fine-tuning", outcome.result)
        formatter.print_privacy(outcome.spend, outcome.noise_multiplier)
        console.print(f"[dim]Checkpoint written to {outcome.checkpoint_path}[/dim]")


@cli.command(context_settings=COMMAND_SETTINGS)
@common_options
@click.option("--checkpoint", "-k", type=click.Path(exists=True, dir_okay=False), default=None, help="Checkpoint to sample from")
@click.option("--num-samples", "-n", type=int, default=None, help="Number of images")
@click.option("--balanced/--no-balanced", default=None, help="Equal number of images per class")
def sample(
    ctx: click.Context,
    config_path: Optional[str],
    seed: Optional[int],
    out: Optional[str],
    checkpoint: Optional[str],
    num_samples: Optional[int],
    balanced: Optional[bool],
):
    """
    Draw synthetic images with ancestral sampling and write them as IDX files.

    Example:
        dpdm sample --checkpoint runs/ft/checkpoints/finetune.dpdm -n 1000
    """
    console = Console()
    with _reporting_errors(console):
        config, run_dir = _prepare(
            ctx, "sample", config_path, seed, out, checkpoint=checkpoint, num_samples=num_samples, balanced=balanced
        )
        if not config["checkpoint"]:
            raise ConfigError("checkpoint", "sampling needs --checkpoint")
        console.print(f"[cyan]Sampling {config['num_samples']} images...[/cyan]")
        synthetic, images_path, labels_path = SamplingProcessor(config, run_dir).sample(
            config["checkpoint"], config["num_samples"], config["balanced"]
        )
        console.print(f"Wrote {len(synthetic)} images to {images_path}")
        console.print(f"Wrote labels to {labels_path}")


@cli.command(context_settings=COMMAND_SETTINGS)
@common_options
def calibrate(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out: Optional[str]):
    """
    Find the noise multiplier that spends the target epsilon.

    Example:
        dpdm calibrate --target_epsilon 10 --batch_size 4096 --steps 4000
    """
    console = Console()
    with _reporting_errors(console):
        config, run_dir = _prepare(ctx, "calibrate", config_path, seed, out)
        processor = CalibrationProcessor(config, run_dir)
        report = processor.calibrate()
        path = processor.write(report)
        formatter = TableFormatter(console)
        formatter.print_key_values(
            "Noise Calibration",
            {
                "sampling rate q": report.sampling_rate,
                "steps": report.steps,
                "noise multiplier σ": report.noise_multiplier,
                "accounted ε": report.accounted_epsilon,
                "δ": f"{report.target.delta:.3g}",
                "optimal order α": f"{report.optimal_order:g}",
            },
        )
        for point in report.sweep:
            console.print(f"  ε = {point.epsilon:g}: {point.steps} steps, σ = {point.noise_multiplier:.4f}")
        console.print(f"[dim]Report written to {path}[/dim]")


def _evaluation_command(name: str, help_text: str):
    def decorator(run: Callable[[EvaluationProcessor, Any, TableFormatter, Console], None]):
        @cli.command(name, context_settings=COMMAND_SETTINGS, help=help_text)
        @common_options
        @click.option("--checkpoint", "-k", type=click.Path(exists=True, dir_okay=False), default=None, help="Generator checkpoint")
        def command(ctx, config_path, seed, out, checkpoint):
            console = Console()
            with _reporting_errors(console):
                config, run_dir = _prepare(ctx, name, config_path, seed, out, checkpoint=checkpoint)
                processor = EvaluationProcessor(config, run_dir)
                console.print("[cyan]Preparing synthetic data...[/cyan]")
                synthetic = processor.synthetic()
                run(processor, synthetic, TableFormatter(console), console)

        return command

    return decorator


@_evaluation_command("eval-fid", "Fréchet distance between real test data and synthetic samples.")
def eval_fid(processor: EvaluationProcessor, synthetic, formatter: TableFormatter, console: Console):
    result = processor.fid(synthetic)
    path = processor.write_fid(result)
    formatter.print_fid(result)
    console.print(f"[dim]Report written to {path}[/dim]")


@_evaluation_command("eval-downstream", "Downstream accuracy, ensembling and domain discrimination.")
def eval_downstream(processor: EvaluationProcessor, synthetic, formatter: TableFormatter, console: Console):
    report = processor.downstream(synthetic)
    path = processor.write_downstream(report)
    formatter.print_key_values(
        "Downstream Evaluation",
        {
            "accuracy": report.accuracy,
            f"ensemble of {report.ensemble_size}": report.ensemble_accuracy,
            "classified as fine-tune domain": report.discriminator.fraction_finetune,
            "discriminator accuracy": report.discriminator.test_accuracy,
        },
    )
    if not report.discriminator.reliable:
        console.print("[yellow]Discriminator accuracy below threshold: domain fraction is unreliable[/yellow]")
    console.print(f"[dim]Report written to {path}[/dim]")


@_evaluation_command("model-select", "Rank-correlation of classifier configs on synthetic vs real data.")
def model_select(processor: EvaluationProcessor, synthetic, formatter: TableFormatter, console: Console):
    study = processor.model_selection(synthetic)
    path = processor.write_selection(study)
    formatter.print_selection(study)
    console.print(f"[dim]Report written to {path}[/dim]")


@cli.command(context_settings=COMMAND_SETTINGS)
@common_options
def ablate(ctx: click.Context, config_path: Optional[str], seed: Optional[int], out: Optional[str]):
    """
    Repeated-seed ablations under one privacy budget.

    Example:
        dpdm ablate --repeats 5 --studies pretraining,timesteps
    """
    console = Console()
    with _reporting_errors(console):
        config, run_dir = _prepare(ctx, "ablate", config_path, seed, out)
        console.print(f"[cyan]Running ablations {', '.join(config['studies'])} over {config['repeats']} seeds...[/cyan]")
        processor = AblationProcessor(config, run_dir)
        rows = processor.run(config["studies"])
        path = processor.write(rows)
        TableFormatter(console).print_ablation(rows)
        console.print(f"[dim]Report written to {path}[/dim]")


if __name__ == "__main__":
    cli()
