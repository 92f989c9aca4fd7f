"""Command-line client: each subcommand marshals arguments into the shared
ops layer (the same functions the HTTP service wraps) and writes outputs."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from . import ops
from .annotations import load_dataset
from .evaluation import format_report_table
from .pipeline import export_report
from .review import ReviewStore

logger = logging.getLogger(__name__)

FORMAT_CHOICE = click.Choice(["aizoo", "moxa3k"])


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Two-step face mask detection pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--input", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
def detect(input_dir: str, config_path: str | None, out_path: str, workers: int) -> None:
    """Run detect/align/classify over an image directory, write JSONL."""
    outcome = ops.op_detect(input_dir, config_path, workers=workers, out_path=out_path)
    click.echo(
        f"{outcome.n_frames} frames, {len(outcome.predictions)} predictions -> {out_path}"
    )


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMAT_CHOICE, default="aizoo", show_default=True)
@click.option("--preds", "predictions_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--relabel", "relabel_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
@click.option("--iou", "iou_threshold", default=0.5, show_default=True)
def evaluate(dataset_dir, fmt, predictions_path, relabel_path, out_path, iou_threshold):
    """Score a predictions file against ground truth."""
    report, loaded = ops.op_evaluate(
        dataset_dir, fmt, predictions_path, relabel_path, iou_threshold
    )
    for warning in loaded.warnings[:10]:
        logger.warning("%s", warning)
    for error in loaded.errors:
        logger.error("%s", error)
    if out_path:
        Path(out_path).write_bytes(export_report(report, "json"))
        click.echo(f"report -> {out_path}")
    click.echo(format_report_table(report), nl=False)


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMAT_CHOICE, default="aizoo", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def stats(dataset_dir, fmt, out_path):
    """Dataset statistics as JSON (exact DatasetStats field names)."""
    result, loaded = ops.op_stats(dataset_dir, fmt)
    text = json.dumps(result.to_json_obj(), indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    click.echo(text)
    for warning in loaded.warnings[:10]:
        logger.warning("%s", warning)
    for error in loaded.errors:
        logger.error("%s", error)


@main.group()
def relabel() -> None:
    """Apply or compute relabel diffs."""


@relabel.command("apply")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMAT_CHOICE, default="aizoo", show_default=True)
@click.option("--diff", "diff_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def relabel_apply(dataset_dir, fmt, diff_path, out_dir):
    """Apply a diff, write relabeled VOC XML annotations to --out."""
    summary = ops.op_relabel_apply(dataset_dir, fmt, diff_path, out_dir)
    click.echo(
        f"set-mask {summary.n_set_mask}, set-no-mask {summary.n_set_no_mask}, "
        f"removed {summary.n_removed} -> {summary.out_dir}"
    )


@relabel.command("diff")
@click.option("--a", "dir_a", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--b", "dir_b", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMAT_CHOICE, default="aizoo", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def relabel_diff(dir_a, dir_b, fmt, out_path):
    """Diff two annotated directories into a relabel file."""
    diff = ops.op_relabel_diff(dir_a, dir_b, fmt, out_path)
    click.echo(f"{len(diff)} entries -> {out_path}")


@main.command()
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--window", "window_seconds", required=True, type=click.FloatRange(min_open=True, min=0))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
def monitor(frames_dir, window_seconds, config_path, out_path, workers):
    """Mask-wearing rate over tumbling windows, written as CSV."""
    points = ops.op_monitor(frames_dir, window_seconds, config_path, workers)
    Path(out_path).write_bytes(export_report(points, "csv"))
    click.echo(f"{len(points)} windows -> {out_path}")


@main.group()
def review() -> None:
    """Human relabeling workflow."""


@review.command("serve")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=FORMAT_CHOICE, default="aizoo", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--log", "log_path", type=click.Path(dir_okay=False),
              help="Decision log path [default: <dataset>/review_decisions.jsonl]")
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False),
              help="Built review UI bundle to host at /.")
def review_serve(dataset_dir, fmt, port, host, log_path, ui_dir):
    """Start the review service over a dataset."""
    import uvicorn

    from .service import create_app

    loaded = load_dataset(dataset_dir, fmt)
    for warning in loaded.warnings[:10]:
        logger.warning("%s", warning)
    if log_path is None:
        log_path = str(Path(dataset_dir) / "review_decisions.jsonl")
    store = ReviewStore(loaded.dataset, log_path, images=loaded.images)
    app = create_app(review_store=store, ui_dir=ui_dir)
    click.echo(f"serving {len(loaded.dataset.frames)} frames on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
