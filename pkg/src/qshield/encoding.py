"""Classical-to-quantum data loading: amplitude encoding and the angle feature map."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError, InvalidInputError, ShapeError
from .statevector import (
    MAX_QUBITS,
    Circuit,
    GateOp,
    QuantumState,
    _check_qubit_count,
    cnot,
    new_zero_state,
    run_circuit,
    ry,
)

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureMapSpec:
    """Angle feature map: per repetition, one RY(x_j) layer plus a CNOT ring.

    ``entangling=False`` drops the ring; it exists so tests can isolate
    qubits from the readout.
    """

    n_qubits: int
    repetitions: int = 2
    entangling: bool = True

    def __post_init__(self) -> None:
        _check_qubit_count(self.n_qubits)
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError(f"repetitions must be a positive integer, got {self.repetitions!r}")


def as_feature_array(x) -> np.ndarray:
    """Validate and coerce a feature vector to a 1-D float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-D feature vector, got shape {arr.shape}")
    if arr.size == 0:
        raise DegenerateInputError("feature vector is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("feature vector contains NaN or infinite entries")
    return arr


def amplitude_encode(x) -> QuantumState:
    """L2-normalized features as amplitudes, zero-padded to a power of two.

    Uses the smallest register that fits (at least one qubit).
    """
    arr = as_feature_array(x)
    norm = float(np.linalg.norm(arr))
    if norm <= NORM_FLOOR:
        raise DegenerateInputError(
            f"cannot amplitude-encode a near-zero vector (norm {norm:.3e})"
        )
    n_qubits = max(1, math.ceil(math.log2(arr.size)))
    if n_qubits > MAX_QUBITS:
        raise ShapeError(f"{arr.size} features need more than {MAX_QUBITS} qubits")
    padded = np.zeros(2**n_qubits, dtype=complex)
    padded[: arr.size] = arr
    return QuantumState(n_qubits, padded / norm)


def _padded_angles(x, n_qubits: int) -> np.ndarray:
    arr = as_feature_array(x)
    if arr.size > n_qubits:
        raise ShapeError(f"{arr.size} features do not fit on {n_qubits} qubits")
    angles = np.zeros(n_qubits)
    angles[: arr.size] = arr
    return angles


def _ring(n_qubits: int) -> list[GateOp]:
    if n_qubits < 2:
        return []
    return [cnot(j, (j + 1) % n_qubits) for j in range(n_qubits)]


def circuit_from_angle_rows(rows: np.ndarray, n_qubits: int, entangling: bool = True) -> Circuit:
    """One RY layer plus optional CNOT ring per row of (repetitions, n_qubits) angles."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != n_qubits:
        raise ShapeError(f"angle rows have width {rows.shape[1]}, expected {n_qubits}")
    gates: list[GateOp] = []
    for row in rows:
        gates.extend(ry(q, float(angle)) for q, angle in enumerate(row))
        if entangling:
            gates.extend(_ring(n_qubits))
    return Circuit(n_qubits, tuple(gates))


def feature_map_circuit(x, spec: FeatureMapSpec) -> Circuit:
    """Encoding circuit for one sample; missing trailing features encode as RY(0)."""
    angles = _padded_angles(x, spec.n_qubits)
    rows = np.tile(angles, (spec.repetitions, 1))
    return circuit_from_angle_rows(rows, spec.n_qubits, spec.entangling)


def apply_feature_map(x, spec: FeatureMapSpec) -> QuantumState:
    """Encoded state U_phi(x)|0...0>."""
    return run_circuit(new_zero_state(spec.n_qubits), feature_map_circuit(x, spec))
