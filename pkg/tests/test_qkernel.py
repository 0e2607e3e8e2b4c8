"""Kernel matrix and dual SVM tests."""
import math

import numpy as np
import pytest
from helpers import kkt_violations, separable_kernel_labels

from qshield.encoding import FeatureMapSpec, apply_feature_map
from qshield.errors import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    NumericalError,
    ShapeError,
)
from qshield.preprocess import Dataset, jacobi_eigh
from qshield.qkernel import (
    KernelMatrix,
    SvmModel,
    kernel_entry,
    kernel_matrix,
    svm_decision,
    svm_predict,
    train_qsvm,
    write_kernel_csv,
)
from qshield.statevector import inner_product


def full_alpha(model: SvmModel, labels: np.ndarray, m: int) -> np.ndarray:
    alpha = np.zeros(m)
    alpha[model.support_indices] = model.dual_coeffs * labels[model.support_indices]
    return alpha


def dual_objective(alpha, labels, entries):
    q = np.outer(labels, labels) * entries
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


class TestKernelEntry:
    def test_self_overlap_is_one(self):
        spec = FeatureMapSpec(3, 2)
        x = np.array([0.3, -1.1, 2.0])
        assert kernel_entry(x, x, spec) == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_in_arguments(self):
        spec = FeatureMapSpec(2, 2)
        rng = np.random.default_rng(11)
        for _ in range(10):
            a, b = rng.uniform(-math.pi, math.pi, (2, 2))
            assert kernel_entry(a, b, spec) == pytest.approx(
                kernel_entry(b, a, spec), abs=1e-12
            )

    def test_matches_direct_state_overlap(self):
        # independent route: build both states, square the inner product
        spec = FeatureMapSpec(3, 2)
        rng = np.random.default_rng(13)
        for _ in range(10):
            a, b = rng.uniform(-math.pi, math.pi, (2, 3))
            sa = apply_feature_map(a, spec)
            sb = apply_feature_map(b, spec)
            oracle = abs(inner_product(sa, sb)) ** 2
            assert kernel_entry(a, b, spec) == pytest.approx(oracle, abs=1e-10)

    def test_single_qubit_closed_form(self):
        # one repetition, one qubit: K = cos^2((b - a) / 2)
        spec = FeatureMapSpec(1, 1)
        for a, b in [(0.0, math.pi), (0.2, 1.7), (-2.0, 0.5)]:
            expect = math.cos((b - a) / 2.0) ** 2
            assert kernel_entry([a], [b], spec) == pytest.approx(expect, abs=1e-12)

    def test_orthogonal_rows_score_zero(self):
        spec = FeatureMapSpec(1, 1)
        assert kernel_entry([0.0], [math.pi], spec) == pytest.approx(0.0, abs=1e-12)

    def test_entries_within_unit_interval(self):
        spec = FeatureMapSpec(2, 3)
        rng = np.random.default_rng(17)
        for _ in range(25):
            a, b = rng.uniform(-4, 4, (2, 2))
            v = kernel_entry(a, b, spec)
            assert -1e-12 <= v <= 1.0 + 1e-12


class TestKernelMatrix:
    def setup_method(self):
        rng = np.random.default_rng(19)
        self.spec = FeatureMapSpec(2, 2)
        self.features = rng.uniform(-math.pi, math.pi, (8, 2))
        self.gram = kernel_matrix(self.features, self.spec)

    def test_exact_mirror_symmetry(self):
        assert np.array_equal(self.gram.entries, self.gram.entries.T)

    def test_unit_diagonal(self):
        np.testing.assert_allclose(np.diag(self.gram.entries), 1.0, atol=1e-12)

    def test_validate_accepts_real_gram(self):
        self.gram.validate()

    def test_entries_match_pairwise_calls(self):
        for i in range(4):
            for j in range(4):
                direct = kernel_entry(self.features[i], self.features[j], self.spec)
                assert self.gram.entries[i, j] == pytest.approx(direct, abs=1e-10)

    def test_psd_by_independent_eigensolver(self):
        eigvals, _ = jacobi_eigh(self.gram.entries)
        assert eigvals.min() >= -1e-8

    def test_dataset_and_array_inputs_agree(self):
        data = Dataset(
            ["a", "b"], self.features, np.zeros(len(self.features), dtype=int)
        )
        via_dataset = kernel_matrix(data, self.spec)
        assert np.array_equal(via_dataset.entries, self.gram.entries)

    def test_zero_samples_rejected(self):
        with pytest.raises(DegenerateInputError):
            kernel_matrix(np.zeros((0, 2)), self.spec)

    def test_one_dimensional_input_rejected(self):
        with pytest.raises(ShapeError):
            kernel_matrix(np.zeros(4), self.spec)

    def test_non_square_matrix_rejected(self):
        with pytest.raises(ShapeError):
            KernelMatrix(np.zeros((2, 3)))

    def test_validate_flags_asymmetry(self):
        bad = self.gram.entries.copy()
        bad[0, 1] += 1e-6
        with pytest.raises(NumericalError):
            KernelMatrix(bad).validate()

    def test_validate_flags_bad_diagonal(self):
        bad = self.gram.entries.copy()
        bad[2, 2] = 0.5
        with pytest.raises(NumericalError):
            KernelMatrix(bad).validate()

    def test_validate_flags_out_of_range(self):
        bad = np.eye(3)
        bad[0, 1] = bad[1, 0] = 1.5
        with pytest.raises(NumericalError):
            KernelMatrix(bad).validate()

    def test_validate_flags_indefinite(self):
        # symmetric, unit diagonal, entries in range, yet min eig < 0
        bad = np.array([
            [1.0, 0.9, 0.0],
            [0.9, 1.0, 0.9],
            [0.0, 0.9, 1.0],
        ])
        assert np.linalg.eigvalsh(bad).min() < -0.2
        with pytest.raises(NumericalError):
            KernelMatrix(bad).validate()


class TestSvmTraining:
    def test_two_orthogonal_points_closed_form(self):
        # K = I: the dual optimum is alpha = (1, 1), bias 0
        spec = FeatureMapSpec(1, 1)
        vectors = np.array([[0.0], [math.pi]])
        gram = kernel_matrix(vectors, spec)
        labels = np.array([1.0, -1.0])
        model = train_qsvm(gram, labels, C=10.0, vectors=vectors, feature_map=spec)
        alpha = full_alpha(model, labels, 2)
        np.testing.assert_allclose(alpha, [1.0, 1.0], atol=1e-9)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        assert model.converged
        assert list(model.support_indices) == [0, 1]

    def test_two_point_closed_form_general_overlap(self):
        # for any kernel value k the paired optimum is alpha = 1 / (1 - k)
        spec = FeatureMapSpec(1, 1)
        vectors = np.array([[0.3], [1.9]])
        gram = kernel_matrix(vectors, spec)
        k = gram.entries[0, 1]
        labels = np.array([1.0, -1.0])
        model = train_qsvm(gram, labels, C=100.0, vectors=vectors, feature_map=spec)
        alpha = full_alpha(model, labels, 2)
        np.testing.assert_allclose(alpha, 1.0 / (1.0 - k), atol=1e-9)
        # both points sit exactly on the margin
        for idx, row in enumerate(vectors):
            assert labels[idx] * svm_decision(model, row) == pytest.approx(1.0, abs=1e-9)

    def test_kkt_conditions_on_separable_problem(self):
        rng = np.random.default_rng(23)
        spec = FeatureMapSpec(2, 2)
        features = rng.uniform(-math.pi, math.pi, (14, 2))
        gram = kernel_matrix(features, spec)
        labels = separable_kernel_labels(gram.entries, rng)
        model = train_qsvm(gram, labels, C=50.0, tol=1e-4)
        alpha = full_alpha(model, labels, 14)
        slack = kkt_violations(gram.entries, labels, alpha, model.bias, 50.0)
        assert slack["zero"] <= 1e-3
        assert slack["free"] <= 1e-2
        assert slack["cap"] <= 1e-3

    def test_objective_history_non_decreasing(self):
        rng = np.random.default_rng(29)
        spec = FeatureMapSpec(2, 2)
        features = rng.uniform(-math.pi, math.pi, (12, 2))
        gram = kernel_matrix(features, spec)
        labels = separable_kernel_labels(gram.entries, rng)
        model = train_qsvm(gram, labels, C=5.0, record_objective=True)
        history = np.array(model.objective_history)
        assert len(history) == model.n_updates + 1
        assert np.all(np.diff(history) >= -1e-12)

    def test_objective_history_matches_direct_evaluation(self):
        # incremental bookkeeping must agree with W(alpha) computed from scratch
        rng = np.random.default_rng(31)
        spec = FeatureMapSpec(2, 2)
        features = rng.uniform(-math.pi, math.pi, (10, 2))
        gram = kernel_matrix(features, spec)
        labels = separable_kernel_labels(gram.entries, rng)
        model = train_qsvm(gram, labels, C=3.0, record_objective=True)
        alpha = full_alpha(model, labels, 10)
        assert model.objective_history[-1] == pytest.approx(
            dual_objective(alpha, labels, gram.entries), abs=1e-9
        )

    def test_deterministic(self):
        rng = np.random.default_rng(37)
        spec = FeatureMapSpec(2, 1)
        features = rng.uniform(-math.pi, math.pi, (9, 2))
        gram = kernel_matrix(features, spec)
        labels = separable_kernel_labels(gram.entries, rng)
        a = train_qsvm(gram, labels, C=2.0)
        b = train_qsvm(gram, labels, C=2.0)
        assert np.array_equal(a.dual_coeffs, b.dual_coeffs)
        assert a.bias == b.bias
        assert a.n_updates == b.n_updates

    def test_capped_alphas_snap_exactly(self):
        rng = np.random.default_rng(41)
        spec = FeatureMapSpec(2, 2)
        features = rng.uniform(-math.pi, math.pi, (12, 2))
        gram = kernel_matrix(features, spec)
        labels = np.ones(12)
        labels[rng.permutation(12)[:6]] = -1.0
        model = train_qsvm(gram, labels, C=0.05)
        alpha = full_alpha(model, labels, 12)
        capped = alpha[np.isclose(alpha, 0.05, atol=1e-9)]
        assert capped.size > 0
        assert np.all(capped == 0.05)

    def test_update_limit_warns(self):
        rng = np.random.default_rng(43)
        spec = FeatureMapSpec(2, 2)
        features = rng.uniform(-math.pi, math.pi, (10, 2))
        gram = kernel_matrix(features, spec)
        labels = separable_kernel_labels(gram.entries, rng)
        with pytest.warns(RuntimeWarning):
            model = train_qsvm(gram, labels, C=50.0, max_passes=1)
        assert not model.converged
        assert model.n_updates == 1

    def test_zero_one_labels_rejected(self):
        gram = KernelMatrix(np.eye(2))
        with pytest.raises(InvalidInputError):
            train_qsvm(gram, [0.0, 1.0], C=1.0)

    def test_single_class_rejected(self):
        gram = KernelMatrix(np.eye(2))
        with pytest.raises(InvalidInputError):
            train_qsvm(gram, [1.0, 1.0], C=1.0)

    def test_label_count_mismatch_rejected(self):
        gram = KernelMatrix(np.eye(3))
        with pytest.raises(ShapeError):
            train_qsvm(gram, [1.0, -1.0], C=1.0)

    def test_nonpositive_c_rejected(self):
        gram = KernelMatrix(np.eye(2))
        with pytest.raises(ConfigError):
            train_qsvm(gram, [1.0, -1.0], C=0.0)

    def test_vector_count_mismatch_rejected(self):
        gram = KernelMatrix(np.eye(2))
        with pytest.raises(ShapeError):
            train_qsvm(gram, [1.0, -1.0], C=1.0, vectors=np.zeros((3, 2)))


class TestSvmPrediction:
    def setup_method(self):
        rng = np.random.default_rng(47)
        self.spec = FeatureMapSpec(2, 2)
        self.features = rng.uniform(-math.pi, math.pi, (12, 2))
        self.gram = kernel_matrix(self.features, self.spec)
        self.labels = separable_kernel_labels(self.gram.entries, rng)
        self.model = train_qsvm(
            self.gram, self.labels, C=50.0,
            vectors=self.features, feature_map=self.spec,
        )

    def test_training_rows_classified_by_decision_sign(self):
        for row, label in zip(self.features, self.labels):
            decision = svm_decision(self.model, row)
            assert math.copysign(1.0, decision) == label

    def test_probability_is_logistic_of_decision(self):
        row = self.features[0]
        decision = svm_decision(self.model, row)
        expect = 1.0 / (1.0 + math.exp(-decision))
        assert self.model.predict_probability(row) == pytest.approx(expect, abs=1e-12)

    def test_predict_agrees_with_module_function(self):
        row = self.features[3]
        assert self.model.predict(row).label == svm_predict(self.model, row).label

    def test_decision_needs_stored_vectors(self):
        stripped = SvmModel(
            dual_coeffs=self.model.dual_coeffs,
            bias=self.model.bias,
            support_indices=self.model.support_indices,
            support_vectors=None,
            C=self.model.C,
            feature_map=None,
        )
        with pytest.raises(ConfigError):
            svm_decision(stripped, self.features[0])

    def test_probability_bounds(self):
        rng = np.random.default_rng(53)
        for _ in range(10):
            p = self.model.predict_probability(rng.uniform(-math.pi, math.pi, 2))
            assert 0.0 < p < 1.0


class TestKernelCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(59)
        gram = kernel_matrix(rng.uniform(-1, 1, (5, 2)), FeatureMapSpec(2, 1))
        path = tmp_path / "kernel.csv"
        write_kernel_csv(gram, path)
        back = np.loadtxt(path, delimiter=",")
        assert np.array_equal(back, gram.entries)
