"""Shared test utilities: random circuit generators, teacher datasets,
and independent numerical oracles."""
from __future__ import annotations

import math

import numpy as np

from qshield.encoding import FeatureMapSpec
from qshield.preprocess import Dataset
from qshield.statevector import Circuit, GateOp, cnot, cphase, h, rx, ry, rz, swap
from qshield.vqc import VqcModel

GATE_POOL = ("RX", "RY", "RZ", "H", "CNOT", "CPHASE", "SWAP")


def random_gate(n_qubits: int, rng: np.random.Generator) -> GateOp:
    kind = GATE_POOL[rng.integers(0, len(GATE_POOL))]
    target = int(rng.integers(0, n_qubits))
    angle = float(rng.uniform(-2 * math.pi, 2 * math.pi))
    if kind in ("RX", "RY", "RZ"):
        return GateOp(kind, target, angle=angle)
    if kind == "H":
        return GateOp(kind, target)
    other = int(rng.integers(0, n_qubits - 1))
    if other >= target:
        other += 1
    if kind == "CNOT":
        return cnot(other, target)
    if kind == "CPHASE":
        return cphase(other, target, angle)
    return swap(other, target)


def random_circuit(n_qubits: int, depth: int, rng: np.random.Generator) -> Circuit:
    if n_qubits == 1:
        pool = [lambda: rx(0, rng.uniform(-6, 6)), lambda: ry(0, rng.uniform(-6, 6)),
                lambda: rz(0, rng.uniform(-6, 6)), lambda: h(0)]
        return Circuit(1, tuple(pool[rng.integers(0, 4)]() for _ in range(depth)))
    return Circuit(n_qubits, tuple(random_gate(n_qubits, rng) for _ in range(depth)))


def random_vqc(rng: np.random.Generator, n_qubits: int, n_layers: int,
               repetitions: int = 2) -> VqcModel:
    n_params = 3 * n_qubits * n_layers
    return VqcModel(
        n_qubits=n_qubits,
        n_layers=n_layers,
        params=rng.uniform(-math.pi, math.pi, n_params),
        feature_map=FeatureMapSpec(n_qubits, repetitions),
    )


def teacher_vqc_dataset(seed: int, n_qubits: int, n_layers: int, n_samples: int,
                        margin: float = 0.12) -> tuple[Dataset, VqcModel]:
    """Labels drawn from a random circuit of the student's own shape.

    Samples with probabilities inside (0.5 - margin, 0.5 + margin) are
    rejected so the concept is cleanly realizable.
    """
    rng = np.random.default_rng(seed)
    teacher = random_vqc(rng, n_qubits, n_layers)
    rows, labels = [], []
    while len(rows) < n_samples:
        x = rng.uniform(-1.3, 1.3, n_qubits)
        p = teacher.predict_probability(x)
        if abs(p - 0.5) >= margin:
            rows.append(x)
            labels.append(1 if p >= 0.5 else 0)
    names = [f"f{i}" for i in range(n_qubits)]
    return Dataset(names, np.array(rows), np.array(labels)), teacher


def separable_kernel_labels(entries: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Labels +/-1 realizable in the kernel's span with margin exactly 1."""
    coeffs = rng.normal(size=entries.shape[0])
    decision = entries @ coeffs
    decision = decision - np.median(decision)
    margin = np.abs(decision).min()
    if margin < 1e-9:
        decision = decision + 0.5  # nudge off the median tie
        margin = np.abs(decision).min()
    return np.where(decision >= 0, 1.0, -1.0)


def kkt_violations(entries: np.ndarray, labels: np.ndarray, alpha: np.ndarray,
                   bias: float, C: float) -> dict:
    """Worst-case slack for each KKT regime, computed from the Gram matrix."""
    decision = entries @ (alpha * labels) + bias
    yf = labels * decision
    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    at_zero = alpha <= 1e-9
    at_cap = alpha >= C - 1e-9
    return {
        "zero": float(np.max(1.0 - yf[at_zero], initial=0.0)),
        "free": float(np.max(np.abs(yf[free] - 1.0), initial=0.0)),
        "cap": float(np.max(yf[at_cap] - 1.0, initial=0.0)),
    }


def t_pdf(x: float, dof: int) -> float:
    log_norm = math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2) - 0.5 * math.log(dof * math.pi)
    return math.exp(log_norm - (dof + 1) / 2 * math.log1p(x * x / dof))


def t_two_sided_p_quadrature(t_stat: float, dof: int, n_points: int = 200001) -> float:
    """Two-sided p by Simpson integration of the density over [0, |t|]."""
    t_abs = abs(t_stat)
    if t_abs == 0.0:
        return 1.0
    xs = np.linspace(0.0, t_abs, n_points)
    ys = np.array([t_pdf(x, dof) for x in xs])
    step = xs[1] - xs[0]
    integral = step / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum())
    return 1.0 - 2.0 * integral
