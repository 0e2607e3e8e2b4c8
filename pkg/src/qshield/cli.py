"""Command-line interface.

Exit codes: 0 success, 1 configuration/usage error, 2 data error,
3 numerical error.
"""
from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .errors import QShieldError
from .explain import (
    format_attribution,
    grad_attribution,
    score_attribution,
    write_attribution_csv,
)
from .pipeline import (
    PipelineConfig,
    load_model,
    preprocess_experiment,
    run_experiment,
    save_model,
    write_predictions_csv,
    _feature_map_spec,
    _train_model,
)
from .preprocess import apply_preprocess, load_csv, train_test_split
from .qkernel import kernel_matrix, write_kernel_csv
from .evalstats import bootstrap_ci, confusion, format_metrics_table, metrics


def _load_config(path: str | None, seed: int | None) -> PipelineConfig:
    config = PipelineConfig.from_json_file(path) if path else PipelineConfig()
    if seed is not None:
        config = replace(config, seed=seed)
    config.validate()
    return config


def _load_and_transform(config: PipelineConfig, data_path: str, preprocess_path: str | None):
    data = load_csv(data_path, config.data.label_column, config.data.positive_label)
    if preprocess_path:
        pre = load_model(preprocess_path, expected_type="preprocess")
        data = apply_preprocess(pre, data)
    return data


@click.group()
def cli() -> None:
    """Hybrid quantum-classical malware classification toolkit."""


@cli.command("run")
@click.option("--data", "data_path", required=True, type=click.Path(), help="Input CSV.")
@click.option("--config", "config_path", type=click.Path(), help="JSON config file.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out-dir", required=True, type=click.Path(), help="Artifact directory.")
def run_cmd(data_path: str, config_path: str | None, seed: int | None, out_dir: str) -> None:
    """Full experiment: preprocess, split, train, predict, evaluate."""
    config = _load_config(config_path, seed)
    report = run_experiment(config, data_path, out_dir)
    with open(Path(out_dir) / "report.txt", encoding="utf-8") as fh:
        click.echo(fh.read(), nl=False)
    click.echo(f"artifacts written to {out_dir}")
    acc = report["metrics"]["accuracy"]
    click.echo(f"test accuracy: {acc:.4f}")


@cli.command("preprocess")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
def preprocess_cmd(data_path: str, config_path: str | None, out_dir: str) -> None:
    """Fit the preprocessing chain; write processed.csv and preprocess.json."""
    config = _load_config(config_path, None)
    summary = preprocess_experiment(config, data_path, out_dir)
    click.echo(
        f"rows {summary['n_samples_in']} -> {summary['n_samples_out']}, "
        f"features {summary['n_features_in']} -> {summary['n_features_out']}"
    )


@cli.command("train")
@click.argument("model_type", required=False, type=click.Choice(["vqc", "qsvm", "ensemble"]))
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", required=True, type=click.Path())
def train_cmd(
    model_type: str | None,
    data_path: str,
    config_path: str | None,
    seed: int | None,
    out_dir: str,
) -> None:
    """Preprocess and train one model; write model.json and preprocess.json.

    MODEL_TYPE overrides the config's model.type.
    """
    config = _load_config(config_path, seed)
    if model_type:
        config = replace(config, model=replace(config.model, type=model_type))
        config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .pipeline import _resolved_preprocess_config, _stage
    from .preprocess import fit_preprocess

    with _stage("load"):
        data = load_csv(data_path, config.data.label_column, config.data.positive_label)
    with _stage("preprocess"):
        pre_model, processed = fit_preprocess(data, _resolved_preprocess_config(config))
    with _stage("train"):
        model, _extras = _train_model(config, processed)
    save_model(model, out / "model.json")
    save_model(pre_model, out / "preprocess.json")
    click.echo(f"trained {config.model.type} model on {processed.n_samples} rows")
    click.echo(f"artifacts written to {out_dir}")


@cli.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--preprocess-model", "preprocess_path", type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def predict_cmd(
    model_path: str,
    preprocess_path: str | None,
    data_path: str,
    config_path: str | None,
    out_path: str,
) -> None:
    """Score a CSV; write sample_index, probability, label."""
    config = _load_config(config_path, None)
    model = load_model(model_path)
    data = _load_and_transform(config, data_path, preprocess_path)
    predictions = [model.predict(row) for row in data.features]
    write_predictions_csv(predictions, out_path)
    click.echo(f"{len(predictions)} predictions written to {out_path}")


@cli.command("explain")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--preprocess-model", "preprocess_path", type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--method", type=click.Choice(["grad", "score"]), default="grad")
@click.option("--row", type=int, default=0, help="Data row to explain.")
@click.option("--out", "out_path", type=click.Path(), help="Optional CSV output.")
def explain_cmd(
    model_path: str,
    preprocess_path: str | None,
    data_path: str,
    config_path: str | None,
    method: str,
    row: int,
    out_path: str | None,
) -> None:
    """Per-feature attribution for one sample."""
    config = _load_config(config_path, None)
    model = load_model(model_path)
    data = _load_and_transform(config, data_path, preprocess_path)
    if not 0 <= row < data.n_samples:
        raise click.UsageError(f"row {row} outside 0..{data.n_samples - 1}")
    x = data.features[row]
    if method == "grad":
        report = grad_attribution(model, x)
    else:
        report = score_attribution(model, x)
    click.echo(format_attribution(report, data.feature_names), nl=False)
    if out_path:
        write_attribution_csv(report, out_path, data.feature_names)
        click.echo(f"attribution written to {out_path}")


@cli.command("evaluate")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--preprocess-model", "preprocess_path", type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--seed", type=int, default=None)
def evaluate_cmd(
    model_path: str,
    preprocess_path: str | None,
    data_path: str,
    config_path: str | None,
    seed: int | None,
) -> None:
    """Metrics plus bootstrap interval for a trained model on labeled data."""
    config = _load_config(config_path, seed)
    model = load_model(model_path)
    data = _load_and_transform(config, data_path, preprocess_path)
    predicted = np.array([model.predict(row).label for row in data.features])
    cm = confusion(predicted, data.labels)
    stats = bootstrap_ci(
        (predicted == data.labels).astype(int),
        config.evaluation.bootstrap_iterations,
        config.seed + 2,
    )
    click.echo(format_metrics_table(metrics(cm), stats), nl=False)


@cli.command("kernel")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path())
@click.option("--preprocess-model", "preprocess_path", type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def kernel_cmd(
    data_path: str, config_path: str | None, preprocess_path: str | None, out_path: str
) -> None:
    """Gram matrix of the dataset under the configured feature map."""
    config = _load_config(config_path, None)
    data = _load_and_transform(config, data_path, preprocess_path)
    gram = kernel_matrix(data, _feature_map_spec(config))
    gram.validate()
    write_kernel_csv(gram, out_path)
    click.echo(f"{gram.size}x{gram.size} kernel written to {out_path}")


def main(argv: list[str] | None = None) -> int:
    """Entry point with explicit exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except QShieldError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
