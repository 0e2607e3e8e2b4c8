"""End-to-end experiment orchestration, model persistence, ensembles.

All artifacts are JSON or CSV written with sorted keys and repr-precision
floats, so identical (data, config, seed) runs produce byte-identical
files.  Stage seeds derive from the single experiment seed: split uses
seed, training seed + 1, bootstrap seed + 2.
"""
from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .encoding import FeatureMapSpec
from .errors import (
    ConfigError,
    ModelFormatError,
    PipelineStageError,
    QShieldError,
)
from .evalstats import bootstrap_ci, confusion, format_metrics_table, metrics
from .preprocess import (
    Dataset,
    PreprocessConfig,
    PreprocessModel,
    apply_preprocess,
    fit_preprocess,
    load_csv,
    train_test_split,
    write_csv,
)
from .qkernel import KernelMatrix, SvmModel, kernel_matrix, train_qsvm
from .vqc import Prediction, TrainConfig, VqcModel, train_vqc

FORMAT_VERSION = 1
MODEL_TYPES = ("vqc", "qsvm", "ensemble")


@dataclass(frozen=True)
class DataConfig:
    label_column: str = "label"
    positive_label: str = "1"


@dataclass(frozen=True)
class ModelConfig:
    type: str = "vqc"
    n_qubits: int = 4
    n_layers: int = 2
    repetitions: int = 2
    encoding: str = "angle"
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 10000
    ensemble_weights: tuple[float, float] = (0.5, 0.5)


@dataclass(frozen=True)
class EvalConfig:
    test_fraction: float = 0.3
    bootstrap_iterations: int = 1000


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20))
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a JSON object, got {type(raw).__name__}")
        sections = {
            "data": DataConfig,
            "preprocess": PreprocessConfig,
            "model": ModelConfig,
            "evaluation": EvalConfig,
            "training": TrainConfig,
        }
        kwargs: dict = {}
        for key, value in raw.items():
            if key == "seed":
                if not isinstance(value, int):
                    raise ConfigError(f"seed must be an integer, got {value!r}")
                kwargs["seed"] = value
            elif key in sections:
                kwargs[key] = _build_section(sections[key], value, key)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            config = cls(**kwargs)
        except QShieldError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config {path} is not valid JSON (byte offset {exc.pos}): {exc.msg}"
            ) from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["model"]["ensemble_weights"] = list(self.model.ensemble_weights)
        # the experiment seed is the single source; drop the derived copy so
        # the emitted dict is accepted by from_dict again
        out["training"].pop("seed", None)
        return out

    def validate(self) -> None:
        """Reject bad field combinations before any compute starts."""
        m = self.model
        if m.type not in MODEL_TYPES:
            raise ConfigError(f"model type must be one of {MODEL_TYPES}, got {m.type!r}")
        # constructing a throwaway model runs the qubit/depth/encoding checks
        VqcModel.fresh(m.n_qubits, m.n_layers, m.repetitions, m.encoding)
        if not m.svm_c > 0:
            raise ConfigError(f"svm_c must be positive, got {m.svm_c!r}")
        if m.type == "ensemble":
            weights = m.ensemble_weights
            if len(weights) != 2 or any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ConfigError(
                    f"ensemble_weights must be two non-negative numbers with a "
                    f"positive sum, got {weights!r}"
                )
        e = self.evaluation
        if not 0.0 < e.test_fraction < 1.0:
            raise ConfigError(
                f"test_fraction must be strictly between 0 and 1, got {e.test_fraction!r}"
            )
        if e.bootstrap_iterations < 100:
            raise ConfigError(
                f"bootstrap_iterations must be at least 100, got {e.bootstrap_iterations!r}"
            )
        p = self.preprocess
        if not 0.0 < p.correlation_threshold <= 1.0:
            raise ConfigError(
                f"correlation_threshold must be in (0, 1], got {p.correlation_threshold!r}"
            )
        if not p.outlier_z_cap > 0:
            raise ConfigError(f"outlier_z_cap must be positive, got {p.outlier_z_cap!r}")
        if p.pca_components is not None and p.pca_components < 1:
            raise ConfigError(
                f"pca_components must be a positive integer, got {p.pca_components!r}"
            )


def _build_section(cls, value, name: str):
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be an object, got {value!r}")
    allowed = {f for f in cls.__dataclass_fields__}
    if name == "training":
        allowed.discard("seed")  # the experiment seed is the single source
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in config section {name!r}")
    fixed = dict(value)
    if name == "model" and "ensemble_weights" in fixed:
        fixed["ensemble_weights"] = tuple(fixed["ensemble_weights"])
    try:
        return cls(**fixed)
    except QShieldError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config section {name!r}: {exc}") from exc


@dataclass
class EnsembleModel:
    """Soft-voting mixture; weights normalize to sum 1 at construction."""

    members: list
    weights: np.ndarray

    def __post_init__(self) -> None:
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(self.members),):
            raise ConfigError(
                f"{weights.shape} weights for {len(self.members)} members"
            )
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ConfigError("weights must be non-negative with a positive sum")
        self.weights = weights / weights.sum()

    def predict_probability(self, x) -> float:
        return float(
            sum(w * m.predict_probability(x) for w, m in zip(self.weights, self.members))
        )

    def predict(self, x) -> Prediction:
        return Prediction.from_probability(self.predict_probability(x))


def ensemble_predict(model: EnsembleModel, x) -> Prediction:
    """Convex mix of member probabilities; ties at 0.5 go malicious."""
    return model.predict(x)


def _encode_feature_map(spec: FeatureMapSpec) -> dict:
    return {
        "n_qubits": spec.n_qubits,
        "repetitions": spec.repetitions,
        "entangling": spec.entangling,
    }


def _decode_feature_map(payload: dict) -> FeatureMapSpec:
    return FeatureMapSpec(
        n_qubits=payload["n_qubits"],
        repetitions=payload["repetitions"],
        entangling=payload.get("entangling", True),
    )


def _model_payload(model) -> dict:
    if isinstance(model, VqcModel):
        return {
            "model_type": "vqc",
            "n_qubits": model.n_qubits,
            "n_layers": model.n_layers,
            "params": [float(p) for p in model.params],
            "feature_map": _encode_feature_map(model.feature_map),
            "readout_qubit": model.readout.qubit,
            "rng_seed": model.rng_seed,
            "encoding": model.encoding,
            "entangling": model.entangling,
            "optimizer_meta": model.optimizer_meta,
        }
    if isinstance(model, SvmModel):
        return {
            "model_type": "qsvm",
            "dual_coeffs": [float(c) for c in model.dual_coeffs],
            "bias": float(model.bias),
            "support_indices": [int(i) for i in model.support_indices],
            "support_vectors": None
            if model.support_vectors is None
            else [[float(v) for v in row] for row in model.support_vectors],
            "C": float(model.C),
            "feature_map": None
            if model.feature_map is None
            else _encode_feature_map(model.feature_map),
            "converged": bool(model.converged),
            "n_updates": int(model.n_updates),
        }
    if isinstance(model, PreprocessModel):
        def listed(arr):
            return None if arr is None else np.asarray(arr).tolist()

        return {
            "model_type": "preprocess",
            "means": listed(model.means),
            "std_devs": listed(model.std_devs),
            "kept_columns": listed(model.kept_columns),
            "pca_basis": listed(model.pca_basis),
            "explained_variance": listed(model.explained_variance),
            "pca_center": listed(model.pca_center),
            "feature_names": list(model.feature_names),
            "std_ddof": 1,
        }
    if isinstance(model, EnsembleModel):
        return {
            "model_type": "ensemble",
            "members": [_model_payload(m) for m in model.members],
            "weights": [float(w) for w in model.weights],
        }
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path) -> None:
    """Write a versioned JSON model file (repr-precision floats)."""
    payload = {"format_version": FORMAT_VERSION}
    payload.update(_model_payload(model))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _decode_model(payload: dict):
    from .statevector import Observable

    model_type = payload.get("model_type")
    if model_type == "vqc":
        return VqcModel(
            n_qubits=payload["n_qubits"],
            n_layers=payload["n_layers"],
            params=np.array(payload["params"], dtype=float),
            feature_map=_decode_feature_map(payload["feature_map"]),
            readout=Observable(qubit=payload["readout_qubit"]),
            rng_seed=payload["rng_seed"],
            encoding=payload["encoding"],
            entangling=payload.get("entangling", True),
            optimizer_meta=payload.get("optimizer_meta", {}),
        )
    if model_type == "qsvm":
        vectors = payload["support_vectors"]
        fm = payload["feature_map"]
        return SvmModel(
            dual_coeffs=np.array(payload["dual_coeffs"], dtype=float),
            bias=payload["bias"],
            support_indices=np.array(payload["support_indices"], dtype=int),
            support_vectors=None if vectors is None else np.array(vectors, dtype=float),
            C=payload["C"],
            feature_map=None if fm is None else _decode_feature_map(fm),
            converged=payload.get("converged", True),
            n_updates=payload.get("n_updates", 0),
        )
    if model_type == "preprocess":
        def arr(key, dtype=float):
            value = payload[key]
            return None if value is None else np.array(value, dtype=dtype)

        return PreprocessModel(
            means=arr("means"),
            std_devs=arr("std_devs"),
            kept_columns=arr("kept_columns", dtype=int),
            pca_basis=arr("pca_basis"),
            explained_variance=arr("explained_variance"),
            pca_center=arr("pca_center"),
            feature_names=list(payload.get("feature_names", [])),
        )
    if model_type == "ensemble":
        members = [_decode_model(m) for m in payload["members"]]
        return EnsembleModel(members=members, weights=np.array(payload["weights"]))
    raise ModelFormatError(f"unknown model type {model_type!r}")


def load_model(path, expected_type: str | None = None):
    """Read a model file, checking version and (optionally) model type."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"model file {path} is not valid JSON (byte offset {exc.pos}): {exc.msg}"
        ) from exc
    if not isinstance(payload, dict):
        raise ModelFormatError(f"model file {path} does not contain an object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"model file {path} has unsupported format version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    if expected_type is not None and payload.get("model_type") != expected_type:
        raise ModelFormatError(
            f"model type mismatch in {path}: expected {expected_type!r}, "
            f"found {payload.get('model_type')!r}"
        )
    try:
        return _decode_model(payload)
    except KeyError as exc:
        raise ModelFormatError(f"model file {path} is missing field {exc}") from exc


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


@contextmanager
def _output_lock(out_dir: Path):
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run "
            f"(stale lock? remove {lock})"
        ) from None
    try:
        os.close(fd)
        yield
    finally:
        try:
            lock.unlink()
        except OSError:
            pass


def _resolved_preprocess_config(config: PipelineConfig) -> PreprocessConfig:
    p = config.preprocess
    if p.apply_pca and p.pca_components is None:
        p = replace(p, pca_components=config.model.n_qubits)
    return p


def _feature_map_spec(config: PipelineConfig) -> FeatureMapSpec:
    return FeatureMapSpec(config.model.n_qubits, config.model.repetitions)


def _train_model(config: PipelineConfig, train: Dataset):
    """Returns (model, extras-for-report)."""
    m = config.model
    extras: dict = {}
    training = replace(config.training, seed=config.seed + 1)
    if m.type in ("vqc", "ensemble"):
        arch = VqcModel.fresh(m.n_qubits, m.n_layers, m.repetitions, m.encoding)
        vqc_model, history = train_vqc(train, arch, training)
        extras["loss_history"] = [float(v) for v in history]
    if m.type in ("qsvm", "ensemble"):
        spec = _feature_map_spec(config)
        gram = kernel_matrix(train, spec)
        gram.validate()
        svm_model = train_qsvm(
            gram,
            2 * train.labels - 1,
            m.svm_c,
            tol=m.svm_tol,
            max_passes=m.svm_max_passes,
            vectors=train.features,
            feature_map=spec,
        )
        extras["svm"] = {
            "converged": bool(svm_model.converged),
            "n_support": int(len(svm_model.support_indices)),
            "n_updates": int(svm_model.n_updates),
        }
    if m.type == "vqc":
        return vqc_model, extras
    if m.type == "qsvm":
        return svm_model, extras
    return EnsembleModel([vqc_model, svm_model], np.asarray(m.ensemble_weights)), extras


def write_predictions_csv(predictions: list[Prediction], path) -> None:
    """Columns: sample_index, probability, label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("sample_index,probability,label\n")
        for i, pred in enumerate(predictions):
            fh.write(f"{i},{repr(pred.probability_malicious)},{pred.label}\n")


def run_experiment(config: PipelineConfig, data_path, out_dir) -> dict:
    """preprocess -> split -> train -> predict -> evaluate, writing artifacts.

    Writes model.json, preprocess.json, predictions.csv, report.json, and
    report.txt into ``out_dir`` and returns the report dictionary.
    """
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _output_lock(out):
        with _stage("load"):
            data = load_csv(data_path, config.data.label_column, config.data.positive_label)
        with _stage("preprocess"):
            pre_model, processed = fit_preprocess(data, _resolved_preprocess_config(config))
        with _stage("split"):
            train, test = train_test_split(
                processed, config.evaluation.test_fraction, config.seed
            )
        with _stage("train"):
            model, extras = _train_model(config, train)
        with _stage("predict"):
            predictions = [model.predict(row) for row in test.features]
        with _stage("evaluate"):
            predicted_labels = np.array([p.label for p in predictions])
            cm = confusion(predicted_labels, test.labels)
            metric_report = metrics(cm)
            correct = (predicted_labels == test.labels).astype(int)
            stats = bootstrap_ci(
                correct, config.evaluation.bootstrap_iterations, config.seed + 2
            )
        with _stage("report"):
            report = {
                "config": config.to_dict(),
                "data": {
                    "n_samples": int(data.n_samples),
                    "n_features": int(data.n_features),
                    "n_train": int(train.n_samples),
                    "n_test": int(test.n_samples),
                    "n_features_encoded": int(train.n_features),
                },
                "metrics": {
                    "accuracy": metric_report.accuracy,
                    "precision": metric_report.precision,
                    "recall": metric_report.recall,
                    "f1": metric_report.f1,
                    "fpr": metric_report.fpr,
                    "fnr": metric_report.fnr,
                },
                "confusion": {
                    "tp": cm.tp,
                    "fp": cm.fp,
                    "tn": cm.tn,
                    "fn": cm.fn,
                },
                "bootstrap": {
                    "mean": stats.mean,
                    "ci_low": stats.ci_low,
                    "ci_high": stats.ci_high,
                    "coeff_variation": stats.coeff_variation,
                },
            }
            report.update(extras)
            save_model(model, out / "model.json")
            save_model(pre_model, out / "preprocess.json")
            write_predictions_csv(predictions, out / "predictions.csv")
            with open(out / "report.json", "w", encoding="utf-8") as fh:
                json.dump(report, fh, sort_keys=True, indent=2)
                fh.write("\n")
            with open(out / "report.txt", "w", encoding="utf-8") as fh:
                fh.write(format_metrics_table(metric_report, stats))
    return report


def preprocess_experiment(config: PipelineConfig, data_path, out_dir) -> dict:
    """Standalone preprocessing: writes processed.csv and preprocess.json."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with _stage("load"):
        data = load_csv(data_path, config.data.label_column, config.data.positive_label)
    with _stage("preprocess"):
        pre_model, processed = fit_preprocess(data, _resolved_preprocess_config(config))
    save_model(pre_model, out / "preprocess.json")
    write_csv(processed, out / "processed.csv")
    return {
        "n_samples_in": int(data.n_samples),
        "n_samples_out": int(processed.n_samples),
        "n_features_in": int(data.n_features),
        "n_features_out": int(processed.n_features),
    }
