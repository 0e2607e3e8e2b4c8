"""Feature attribution for trained classifiers.

Two methods: GRAD differentiates the encoding angles of an
angle-encoded variational model with the parameter-shift rule; SCORE
occludes one feature at a time against a baseline and works with any
model exposing ``predict_probability``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .encoding import as_feature_array, circuit_from_angle_rows, _padded_angles
from .errors import InvalidInputError, ShapeError, UnsupportedMethodError
from .statevector import expectation_z, new_zero_state, run_circuit
from .vqc import VqcModel, build_ansatz

PARAM_SHIFT = math.pi / 2


@dataclass(frozen=True)
class AttributionReport:
    """Per-feature scores; ``weighted_scores`` is max(score, 0) * x_j for
    GRAD and a copy of ``scores`` for SCORE."""

    feature_indices: tuple[int, ...]
    scores: tuple[float, ...]
    weighted_scores: tuple[float, ...]
    method: str
    base_probability: float


def grad_attribution(model: VqcModel, x) -> AttributionReport:
    """d p / d x_j via parameter shifts, summed over encoding repetitions."""
    if getattr(model, "encoding", None) != "angle":
        raise UnsupportedMethodError(
            "gradient attribution needs an angle-encoded variational model; "
            "use score_attribution instead"
        )
    arr = as_feature_array(x)
    spec = model.feature_map
    base_rows = np.tile(_padded_angles(arr, spec.n_qubits), (spec.repetitions, 1))
    ansatz = build_ansatz(model)

    def probability(rows: np.ndarray) -> float:
        state = new_zero_state(spec.n_qubits)
        run_circuit(state, circuit_from_angle_rows(rows, spec.n_qubits, spec.entangling))
        run_circuit(state, ansatz)
        return (1.0 + expectation_z(state, model.readout)) / 2.0

    base_p = probability(base_rows)
    scores = []
    for j in range(arr.size):
        total = 0.0
        for rep in range(spec.repetitions):
            up = base_rows.copy()
            up[rep, j] += PARAM_SHIFT
            down = base_rows.copy()
            down[rep, j] -= PARAM_SHIFT
            total += 0.5 * (probability(up) - probability(down))
        scores.append(total)
    weighted = [max(s, 0.0) * float(arr[j]) for j, s in enumerate(scores)]
    return AttributionReport(
        feature_indices=tuple(range(arr.size)),
        scores=tuple(scores),
        weighted_scores=tuple(weighted),
        method="GRAD",
        base_probability=base_p,
    )


def score_attribution(model, x, baseline=None) -> AttributionReport:
    """Occlusion: score_j = p(x) - p(x with x_j replaced by the baseline).

    ``model`` may be any object with ``predict_probability`` or a plain
    callable mapping a feature vector to a probability.
    """
    predict = model if callable(model) else model.predict_probability
    arr = as_feature_array(x)
    if baseline is None:
        base_vec = np.zeros_like(arr)
    else:
        base_vec = as_feature_array(baseline)
        if base_vec.shape != arr.shape:
            raise ShapeError(
                f"baseline shape {base_vec.shape} does not match input {arr.shape}"
            )
    base_p = float(predict(arr))
    scores = []
    for j in range(arr.size):
        occluded = arr.copy()
        occluded[j] = base_vec[j]
        scores.append(base_p - float(predict(occluded)))
    return AttributionReport(
        feature_indices=tuple(range(arr.size)),
        scores=tuple(scores),
        weighted_scores=tuple(scores),
        method="SCORE",
        base_probability=base_p,
    )


def rank_features(report: AttributionReport, top_k: int) -> list[tuple[int, float]]:
    """Top features by |score| descending; ties break on the lower index."""
    n = len(report.scores)
    if not 1 <= top_k <= n:
        raise InvalidInputError(f"top_k must be in [1, {n}], got {top_k!r}")
    order = sorted(range(n), key=lambda i: (-abs(report.scores[i]), i))
    return [(i, report.scores[i]) for i in order[:top_k]]


def format_attribution(report: AttributionReport, feature_names=None) -> str:
    """Human-readable ranking table."""
    names = feature_names or [f"x{i}" for i in report.feature_indices]
    if len(names) != len(report.scores):
        raise ShapeError(f"{len(names)} names for {len(report.scores)} scores")
    ranked = rank_features(report, len(report.scores))
    lines = [
        f"method: {report.method}   base probability: {report.base_probability:.6f}",
        "rank  feature               score        weighted",
    ]
    for rank, (idx, score) in enumerate(ranked, start=1):
        lines.append(
            f"{rank:>4}  {names[idx]:<20}  {score:+.6f}    "
            f"{report.weighted_scores[idx]:+.6f}"
        )
    return "\n".join(lines) + "\n"


def write_attribution_csv(report: AttributionReport, path, feature_names=None) -> None:
    """CSV with columns feature_name, raw_score, weighted_score, rank."""
    names = feature_names or [f"x{i}" for i in report.feature_indices]
    if len(names) != len(report.scores):
        raise ShapeError(f"{len(names)} names for {len(report.scores)} scores")
    ranks = {idx: rank for rank, (idx, _) in enumerate(rank_features(report, len(report.scores)), start=1)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature_name", "raw_score", "weighted_score", "rank"])
        for i in report.feature_indices:
            writer.writerow(
                [names[i], repr(report.scores[i]), repr(report.weighted_scores[i]), ranks[i]]
            )
