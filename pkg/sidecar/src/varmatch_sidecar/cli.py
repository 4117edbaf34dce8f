"""Sidecar command line: finetune, serve, benchmark."""

from __future__ import annotations

import json
from pathlib import Path

import click

from .benchmark import run_benchmark
from .data import SidecarError
from .train import TrainConfig, finetune


@click.group()
def main():
    """Encoder fine-tuning and serving for the pair-scoring wire protocol."""


@main.command("finetune")
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), required=True,
              help="Exported pair file (from `varmatch pairs`).")
@click.option("--out", "checkpoint", type=click.Path(), required=True,
              help="Checkpoint directory to write.")
@click.option("--epochs", type=int, default=1, show_default=True)
@click.option("--lr", "learning_rate", type=float, default=5e-6, show_default=True)
@click.option("--weight-decay", type=float, default=0.0, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--base-model", default="scratch:tiny", show_default=True,
              help="scratch:tiny, scratch:small, or a pretrained checkpoint id/path.")
@click.option("--lr-schedule", type=click.Choice(["constant", "linear"]),
              default="constant", show_default=True)
@click.option("--grad-clip", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
def finetune_cmd(pairs_path, checkpoint, epochs, learning_rate, weight_decay,
                 batch_size, base_model, lr_schedule, grad_clip, seed):
    """Fine-tune the encoder on a pair file's train split."""
    config = TrainConfig(
        epochs=epochs, learning_rate=learning_rate, weight_decay=weight_decay,
        batch_size=batch_size, base_model=base_model, checkpoint=checkpoint,
        lr_schedule=lr_schedule, grad_clip=grad_clip, seed=seed)
    try:
        path = finetune(pairs_path, config)
    except SidecarError as error:
        raise click.ClickException(str(error))
    click.echo(f"checkpoint written to {path}")


@main.command("serve")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve_cmd(checkpoint, host, port):
    """Serve pair scores over the shared wire protocol."""
    from .server import serve

    serve(checkpoint, host=host, port=port)


@main.command("benchmark")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=str(Path(__file__).resolve().parents[2] / "benchmark.json"),
              show_default=True)
@click.option("--workdir", type=click.Path(), required=True)
@click.option("--skip-curve", is_flag=True, default=False)
def benchmark_cmd(config_path, workdir, skip_curve):
    """Run the committed synthetic benchmark end to end."""
    result = run_benchmark(config_path, workdir, with_curve=not skip_curve)
    click.echo(json.dumps(result.as_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
