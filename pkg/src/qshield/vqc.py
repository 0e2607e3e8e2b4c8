"""Variational quantum classifier: ansatz, inference, parameter-shift training.

The ansatz stacks ``n_layers`` blocks of per-qubit RX, RY, RZ rotations
followed by a circular CNOT ring.  Readout is <Z> on one qubit, squashed
to a malicious-class probability p = (1 + <Z>) / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .encoding import FeatureMapSpec, amplitude_encode, apply_feature_map, as_feature_array
from .errors import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    ShapeError,
)
from .statevector import (
    Circuit,
    Observable,
    QuantumState,
    _apply_cnot,
    _apply_1q_matrix,
    _rotation_matrix,
    _z_marginal,
    cnot,
    expectation_z,
    new_zero_state,
    run_circuit,
    rx,
    ry,
    rz,
)

MAX_DEPTH_BLOCKS = 12
PARAM_SHIFT = math.pi / 2
PROB_CLAMP = 1e-9

ENCODINGS = ("angle", "amplitude")


@dataclass(frozen=True)
class Prediction:
    """Classifier output; label 1 means malicious, ties go to 1."""

    probability_malicious: float
    label: int

    @classmethod
    def from_probability(cls, p: float) -> "Prediction":
        p = min(max(float(p), 0.0), 1.0)
        return cls(p, 1 if p >= 0.5 else 0)


@dataclass
class VqcModel:
    """Trainable classifier: encoding spec plus ansatz parameters.

    ``params`` is flat with layout [layer][qubit][RX, RY, RZ], length
    3 * n_qubits * n_layers.  ``entangling=False`` drops the ansatz CNOT
    ring (diagnostic configurations only).
    """

    n_qubits: int
    n_layers: int
    params: np.ndarray
    feature_map: FeatureMapSpec
    readout: Observable = Observable(qubit=0)
    rng_seed: int = 0
    encoding: str = "angle"
    entangling: bool = True
    optimizer_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.n_layers, int) or self.n_layers < 1:
            raise ConfigError(f"n_layers must be a positive integer, got {self.n_layers!r}")
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}, got {self.encoding!r}")
        if self.feature_map.n_qubits != self.n_qubits:
            raise ConfigError(
                f"feature map is {self.feature_map.n_qubits}-qubit but the "
                f"model has {self.n_qubits} qubits"
            )
        if self.n_layers + self.feature_map.repetitions > MAX_DEPTH_BLOCKS:
            raise ConfigError(
                f"n_layers + repetitions = "
                f"{self.n_layers + self.feature_map.repetitions} exceeds the "
                f"depth cap {MAX_DEPTH_BLOCKS}"
            )
        if self.readout.qubit >= self.n_qubits:
            raise ConfigError(
                f"readout qubit {self.readout.qubit} outside a "
                f"{self.n_qubits}-qubit register"
            )
        params = np.asarray(self.params, dtype=float)
        if params.shape != (self.n_params,):
            raise ShapeError(
                f"expected {self.n_params} parameters, got shape {params.shape}"
            )
        self.params = params

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits * self.n_layers

    @classmethod
    def fresh(
        cls,
        n_qubits: int,
        n_layers: int,
        repetitions: int = 2,
        encoding: str = "angle",
        rng_seed: int = 0,
        entangling: bool = True,
    ) -> "VqcModel":
        """Architecture shell with zeroed parameters; training draws the real init."""
        spec = FeatureMapSpec(n_qubits, repetitions, entangling=entangling)
        return cls(
            n_qubits=n_qubits,
            n_layers=n_layers,
            params=np.zeros(3 * n_qubits * n_layers),
            feature_map=spec,
            rng_seed=rng_seed,
            encoding=encoding,
            entangling=entangling,
        )

    def predict_probability(self, x) -> float:
        return forward(self, x).probability_malicious

    def predict(self, x) -> Prediction:
        return forward(self, x)


def build_ansatz(model: VqcModel) -> Circuit:
    """Parameterized circuit over model.params (encoding not included)."""
    params = np.asarray(model.params, dtype=float)
    if params.shape != (model.n_params,):
        raise ShapeError(f"expected {model.n_params} parameters, got shape {params.shape}")
    gates = []
    idx = 0
    for _ in range(model.n_layers):
        for q in range(model.n_qubits):
            gates.append(rx(q, float(params[idx])))
            gates.append(ry(q, float(params[idx + 1])))
            gates.append(rz(q, float(params[idx + 2])))
            idx += 3
        if model.entangling and model.n_qubits >= 2:
            gates.extend(cnot(j, (j + 1) % model.n_qubits) for j in range(model.n_qubits))
    return Circuit(model.n_qubits, tuple(gates))


def encode_input(model: VqcModel, x) -> QuantumState:
    """Encoded input state per the model's encoding choice."""
    if model.encoding == "amplitude":
        arr = as_feature_array(x)
        dim = 2**model.n_qubits
        if arr.size > dim:
            raise ShapeError(f"{arr.size} features do not fit in {dim} amplitudes")
        padded = np.zeros(dim)
        padded[: arr.size] = arr
        return amplitude_encode(padded)
    return apply_feature_map(x, model.feature_map)


def forward(model: VqcModel, x) -> Prediction:
    """Encode, run the ansatz, read out p = (1 + <Z>) / 2."""
    state = encode_input(model, x)
    run_circuit(state, build_ansatz(model))
    z = expectation_z(state, model.readout)
    return Prediction.from_probability((1.0 + z) / 2.0)


def param_shift_grad(model: VqcModel, x) -> np.ndarray:
    """Exact gradient of <Z> w.r.t. each ansatz parameter.

    Entry i is (E(theta_i + pi/2) - E(theta_i - pi/2)) / 2.
    """
    encoded = encode_input(model, x)
    grad = np.empty(model.n_params)
    for i in range(model.n_params):
        grad[i] = 0.5 * (
            _shifted_expectation(model, encoded, i, +PARAM_SHIFT)
            - _shifted_expectation(model, encoded, i, -PARAM_SHIFT)
        )
    return grad


def _shifted_expectation(model: VqcModel, encoded: QuantumState, index: int, delta: float) -> float:
    shifted = model.params.copy()
    shifted[index] += delta
    state = encoded.copy()
    run_circuit(state, build_ansatz(replace(model, params=shifted)))
    return expectation_z(state, model.readout)


def bce_loss(model: VqcModel, dataset) -> float:
    """Mean binary cross-entropy over a dataset, probabilities clamped."""
    if dataset.n_samples == 0:
        raise DegenerateInputError("dataset is empty")
    probs = np.array([forward(model, row).probability_malicious for row in dataset.features])
    return _bce(probs, dataset.labels.astype(float))


def _bce(probs: np.ndarray, labels: np.ndarray) -> float:
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings; ``batch_size=None`` trains full-batch."""

    epochs: int
    learning_rate: float = 0.01
    batch_size: int | None = None
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise InvalidInputError(f"epochs must be a positive integer, got {self.epochs!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.batch_size is not None and (
            not isinstance(self.batch_size, int) or self.batch_size < 1
        ):
            raise ConfigError(f"batch_size must be a positive integer or None, got {self.batch_size!r}")
        if self.optimizer not in ("adam", "gd"):
            raise ConfigError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")


def train_vqc(dataset, arch: VqcModel, config: TrainConfig) -> tuple[VqcModel, list[float]]:
    """Minimize BCE with parameter-shift gradients.

    Returns the trained model and the loss history; history[0] is the
    loss at initialization and history[e] the loss after epoch e.
    """
    if dataset.n_samples == 0:
        raise DegenerateInputError("training dataset is empty")
    labels = np.asarray(dataset.labels)
    if not np.all(np.isin(labels, (0, 1))):
        raise InvalidInputError("training labels must be 0 or 1")
    rng = np.random.default_rng(config.seed)
    params = rng.uniform(-math.pi, math.pi, arch.n_params)
    states = _encode_dataset(arch, dataset.features)
    y = labels.astype(float)
    m = len(y)

    adam_m = np.zeros_like(params)
    adam_v = np.zeros_like(params)
    adam_t = 0

    def full_loss(theta: np.ndarray) -> float:
        z = _batch_expectations(states, theta, arch)
        return _bce((1.0 + z) / 2.0, y)

    history = [full_loss(params)]
    for _ in range(config.epochs):
        for batch in _batches(m, config.batch_size, rng):
            grad = _batch_loss_grad(states[batch], y[batch], params, arch)
            if config.optimizer == "adam":
                adam_t += 1
                adam_m = config.beta1 * adam_m + (1.0 - config.beta1) * grad
                adam_v = config.beta2 * adam_v + (1.0 - config.beta2) * grad**2
                m_hat = adam_m / (1.0 - config.beta1**adam_t)
                v_hat = adam_v / (1.0 - config.beta2**adam_t)
                params = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
            else:
                params = params - config.learning_rate * grad
        history.append(full_loss(params))

    meta = {
        "optimizer": config.optimizer,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "beta1": config.beta1,
        "beta2": config.beta2,
        "eps": config.eps,
        "seed": config.seed,
        "final_loss": history[-1],
    }
    model = replace(arch, params=params, rng_seed=config.seed, optimizer_meta=meta)
    return model, history


def _encode_dataset(arch: VqcModel, features: np.ndarray) -> np.ndarray:
    if features.ndim != 2:
        raise ShapeError(f"expected a 2-D feature matrix, got shape {features.shape}")
    return np.stack([encode_input(arch, row).amplitudes for row in features])


def _batches(m: int, batch_size: int | None, rng: np.random.Generator):
    if batch_size is None or batch_size >= m:
        yield np.arange(m)
        return
    order = rng.permutation(m)
    for start in range(0, m, batch_size):
        yield order[start : start + batch_size]


def _apply_ansatz_batch(amps: np.ndarray, params: np.ndarray, arch: VqcModel) -> np.ndarray:
    """Ansatz applied to an (batch, 2**n) amplitude matrix; input untouched."""
    amps = np.array(amps)
    n = arch.n_qubits
    idx = 0
    for _ in range(arch.n_layers):
        for q in range(n):
            for kind in ("RX", "RY", "RZ"):
                amps = _apply_1q_matrix(amps, _rotation_matrix(kind, params[idx]), q, n)
                idx += 1
        if arch.entangling and n >= 2:
            for j in range(n):
                amps = _apply_cnot(amps, j, (j + 1) % n, n)
    return amps


def _batch_expectations(states: np.ndarray, params: np.ndarray, arch: VqcModel) -> np.ndarray:
    out = _apply_ansatz_batch(states, params, arch)
    return _z_marginal(np.abs(out) ** 2, arch.readout.qubit, arch.n_qubits)


def _batch_loss_grad(states: np.ndarray, y: np.ndarray, params: np.ndarray, arch: VqcModel) -> np.ndarray:
    """Gradient of mean BCE: chain rule through p = (1 + <Z>) / 2."""
    z = _batch_expectations(states, params, arch)
    p = np.clip((1.0 + z) / 2.0, PROB_CLAMP, 1.0 - PROB_CLAMP)
    dloss_dp = (p - y) / (p * (1.0 - p)) / len(y)
    grad = np.empty_like(params)
    for i in range(params.size):
        up = params.copy()
        up[i] += PARAM_SHIFT
        down = params.copy()
        down[i] -= PARAM_SHIFT
        dz = 0.5 * (_batch_expectations(states, up, arch) - _batch_expectations(states, down, arch))
        grad[i] = float(dloss_dp @ (0.5 * dz))
    return grad
