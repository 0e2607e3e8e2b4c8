"""Dataset ingestion and classical preprocessing.

The fitted transform is: standardize (dropping constant columns), remove
outlier rows, re-standardize, prune correlated columns, then optionally
project onto principal components found with a cyclic Jacobi eigensolver.
Fitted models replay the whole chain on new data as one affine map plus
an optional projection.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateInputError,
    DegenerateOutputError,
    IngestionError,
    InvalidInputError,
    ShapeError,
)

CONST_STD_FLOOR = 1e-12
JACOBI_TOL = 1e-10
# fp guard so exact duplicates register as |r| = 1 at threshold 1.0
CORR_EPS = 1e-12


@dataclass
class Dataset:
    """Feature matrix with binary labels (1 = malicious)."""

    feature_names: list[str]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise InvalidInputError("features contain NaN or infinite entries")
        labels = np.asarray(self.labels)
        if labels.shape != (features.shape[0],):
            raise ShapeError(
                f"{labels.shape} labels for {features.shape[0]} feature rows"
            )
        if labels.size and not np.all(np.isin(labels, (0, 1))):
            raise InvalidInputError("labels must be 0 or 1")
        if len(self.feature_names) != features.shape[1]:
            raise ShapeError(
                f"{len(self.feature_names)} feature names for "
                f"{features.shape[1]} columns"
            )
        self.features = features
        self.labels = labels.astype(int)
        self.feature_names = list(self.feature_names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take_rows(self, index) -> "Dataset":
        return Dataset(self.feature_names, self.features[index], self.labels[index])

    def take_columns(self, index) -> "Dataset":
        names = [self.feature_names[i] for i in index]
        return Dataset(names, self.features[:, index], self.labels)


def load_csv(path, label_column: str, positive_label: str) -> Dataset:
    """Read a header-first CSV; the label column maps positive_label to 1."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path}: file is empty")
    header = rows[0]
    if label_column not in header:
        raise IngestionError(
            f"{path}: label column {label_column!r} not found in header {header}"
        )
    label_idx = header.index(label_column)
    feature_names = [name for i, name in enumerate(header) if i != label_idx]
    if len(rows) == 1:
        raise DegenerateInputError(f"{path}: no data rows")
    features = []
    labels = []
    for row_num, row in enumerate(rows[1:], start=1):
        line_num = row_num + 1
        if len(row) != len(header):
            raise IngestionError(
                f"{path}: row {row_num} (line {line_num}): expected "
                f"{len(header)} fields, got {len(row)}"
            )
        sample = []
        for col, cell in enumerate(row):
            if col == label_idx:
                continue
            try:
                sample.append(float(cell.strip()))
            except ValueError:
                raise IngestionError(
                    f"{path}: row {row_num} (line {line_num}): column "
                    f"{header[col]!r}: cannot parse {cell.strip()!r} as a number"
                ) from None
        features.append(sample)
        labels.append(1 if row[label_idx].strip() == positive_label else 0)
    return Dataset(feature_names, np.array(features, dtype=float), np.array(labels))


def write_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Full-precision CSV dump with a trailing label column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(dataset.feature_names + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


@dataclass
class PreprocessModel:
    """Fitted transform: column subset, affine standardization, optional PCA."""

    means: np.ndarray | None = None
    std_devs: np.ndarray | None = None
    kept_columns: np.ndarray | None = None
    pca_basis: np.ndarray | None = None
    explained_variance: np.ndarray | None = None
    pca_center: np.ndarray | None = None
    feature_names: list[str] = field(default_factory=list)


def fit_standardize(data: Dataset) -> PreprocessModel:
    """Column means and sample (n-1) standard deviations; constants dropped."""
    if data.n_samples < 2:
        raise DegenerateInputError(
            f"standardization needs at least 2 samples, got {data.n_samples}"
        )
    means = data.features.mean(axis=0)
    stds = data.features.std(axis=0, ddof=1)
    kept = np.flatnonzero(stds >= CONST_STD_FLOOR)
    return PreprocessModel(
        means=means[kept],
        std_devs=stds[kept],
        kept_columns=kept,
        feature_names=data.feature_names,
    )


def apply_standardize(model: PreprocessModel, data: Dataset) -> Dataset:
    """(x - mean) / std over the model's kept columns."""
    kept = model.kept_columns
    if kept.size and kept.max() >= data.n_features:
        raise ShapeError(
            f"model expects column {kept.max()} but data has {data.n_features} columns"
        )
    feats = (data.features[:, kept] - model.means) / model.std_devs
    names = [data.feature_names[c] for c in kept]
    return Dataset(names, feats, data.labels)


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) unsorted; eigenvectors are the
    columns.  Sweeps stop when the off-diagonal Frobenius norm drops
    below ``tol``.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10, rtol=0.0):
        raise InvalidInputError("matrix is not symmetric")
    n = a.shape[0]
    vecs = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), vecs
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, k=1) ** 2)))
        if off < tol:
            return np.diag(a).copy(), vecs
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p, vec_q = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q
    raise ConvergenceError(
        f"Jacobi sweeps exhausted ({max_sweeps}) without reaching tolerance {tol}"
    )


def fit_pca(data: Dataset, n_components: int) -> PreprocessModel:
    """Top-k principal directions of the sample covariance.

    Each component's largest-magnitude entry is made positive so the
    basis is reproducible.
    """
    if not isinstance(n_components, int) or n_components < 1:
        raise InvalidInputError(f"n_components must be a positive integer, got {n_components!r}")
    if n_components > data.n_features:
        raise ShapeError(
            f"cannot extract {n_components} components from {data.n_features} columns"
        )
    if data.n_samples < 2:
        raise DegenerateInputError(
            f"covariance needs at least 2 samples, got {data.n_samples}"
        )
    center = data.features.mean(axis=0)
    centered = data.features - center
    cov = centered.T @ centered / (data.n_samples - 1)
    evals, evecs = jacobi_eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order][:n_components]
    basis = evecs[:, order][:, :n_components].copy()
    for col in range(basis.shape[1]):
        pivot = np.argmax(np.abs(basis[:, col]))
        if basis[pivot, col] < 0:
            basis[:, col] = -basis[:, col]
    return PreprocessModel(
        pca_basis=basis,
        explained_variance=evals,
        pca_center=center,
        feature_names=data.feature_names,
    )


def apply_pca(model: PreprocessModel, data: Dataset) -> Dataset:
    """Project centered features onto the fitted basis; names become pc1..pck."""
    basis = model.pca_basis
    if basis is None:
        raise ConfigError("model has no fitted PCA basis")
    if data.n_features != basis.shape[0]:
        raise ShapeError(
            f"model expects {basis.shape[0]} columns, data has {data.n_features}"
        )
    projected = (data.features - model.pca_center) @ basis
    names = [f"pc{i + 1}" for i in range(basis.shape[1])]
    return Dataset(names, projected, data.labels)


def prune_correlated(data: Dataset, threshold: float = 0.95) -> tuple[Dataset, list[int]]:
    """Greedy Pearson pruning: scanning left to right, drop the later column
    of any pair with |r| >= threshold."""
    if not 0.0 < threshold <= 1.0:
        raise InvalidInputError(f"threshold must be in (0, 1], got {threshold!r}")
    d = data.n_features
    if d < 2 or data.n_samples < 2:
        return data.take_columns(list(range(d))), []
    corr = np.corrcoef(data.features, rowvar=False)
    keep = np.ones(d, dtype=bool)
    dropped: list[int] = []
    for i in range(d):
        if not keep[i]:
            continue
        for j in range(i + 1, d):
            if keep[j] and abs(corr[i, j]) >= threshold - CORR_EPS:
                keep[j] = False
                dropped.append(j)
    return data.take_columns(np.flatnonzero(keep)), sorted(dropped)


def remove_outliers(data: Dataset, z_cap: float = 5.0) -> tuple[Dataset, list[int]]:
    """Drop rows with any |value| > z_cap; expects standardized input."""
    if not z_cap > 0:
        raise InvalidInputError(f"z_cap must be positive, got {z_cap!r}")
    bad = (np.abs(data.features) > z_cap).any(axis=1)
    if bad.all() and data.n_samples > 0:
        raise DegenerateOutputError("outlier removal would discard every row")
    removed = np.flatnonzero(bad)
    return data.take_rows(~bad), [int(i) for i in removed]


def train_test_split(data: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split; per class, round(fraction * count) rows go to test
    (at least one).  Singleton classes stay in train."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidInputError(
            f"test_fraction must be strictly between 0 and 1, got {test_fraction!r}"
        )
    if data.n_samples == 0:
        raise DegenerateInputError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    for cls in (0, 1):
        members = np.flatnonzero(data.labels == cls)
        count = len(members)
        if count == 0:
            continue
        if count == 1:
            continue  # singleton class stays in train
        n_test = max(1, int(math.floor(test_fraction * count + 0.5)))
        if n_test >= count:
            raise InvalidInputError(
                f"test_fraction {test_fraction} leaves no training rows for class {cls}"
            )
        picked = rng.permutation(members)[:n_test]
        test_idx.extend(int(i) for i in picked)
    if not test_idx or len(test_idx) == data.n_samples:
        raise InvalidInputError(
            f"test_fraction {test_fraction} produces an empty train or test part"
        )
    test_mask = np.zeros(data.n_samples, dtype=bool)
    test_mask[test_idx] = True
    return data.take_rows(~test_mask), data.take_rows(test_mask)


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the fitted chain."""

    correlation_threshold: float = 0.95
    outlier_z_cap: float = 5.0
    pca_components: int | None = None
    apply_pca: bool = True


def fit_preprocess(data: Dataset, config: PreprocessConfig) -> tuple[PreprocessModel, Dataset]:
    """Fit the full chain and return (model, processed training data).

    The two standardization passes and the column drops are folded into a
    single affine map over the surviving original columns.
    """
    first = fit_standardize(data)
    standardized = apply_standardize(first, data)
    cleaned, _removed = remove_outliers(standardized, config.outlier_z_cap)
    if cleaned.n_samples < 2:
        raise DegenerateInputError("fewer than 2 rows survive outlier removal")
    second = fit_standardize(cleaned)
    rescaled = apply_standardize(second, cleaned)
    pruned, dropped_local = prune_correlated(rescaled, config.correlation_threshold)
    if pruned.n_features == 0:
        raise DegenerateOutputError("no feature columns survive preprocessing")

    # compose the two affine passes over the surviving columns
    orig_after_second = first.kept_columns[second.kept_columns]
    mean_eff = first.means[second.kept_columns] + second.means * first.std_devs[second.kept_columns]
    std_eff = first.std_devs[second.kept_columns] * second.std_devs
    keep_local = np.array(
        [i for i in range(len(orig_after_second)) if i not in set(dropped_local)],
        dtype=int,
    )
    model = PreprocessModel(
        means=mean_eff[keep_local],
        std_devs=std_eff[keep_local],
        kept_columns=orig_after_second[keep_local],
        feature_names=data.feature_names,
    )

    processed = pruned
    if config.apply_pca:
        k = config.pca_components
        if k is None:
            raise ConfigError("pca_components must be set when apply_pca is true")
        k = min(k, pruned.n_features)
        pca = fit_pca(pruned, k)
        model = replace(
            model,
            pca_basis=pca.pca_basis,
            explained_variance=pca.explained_variance,
            pca_center=pca.pca_center,
        )
        processed = apply_pca(pca, pruned)
    return model, processed


def apply_preprocess(model: PreprocessModel, data: Dataset) -> Dataset:
    """Replay a fitted chain on new data."""
    kept = model.kept_columns
    if kept is None:
        raise ConfigError("model has no fitted standardization")
    if kept.size and kept.max() >= data.n_features:
        raise ShapeError(
            f"model expects column {kept.max()} but data has {data.n_features} columns"
        )
    feats = (data.features[:, kept] - model.means) / model.std_devs
    names = [data.feature_names[c] for c in kept]
    out = Dataset(names, feats, data.labels)
    if model.pca_basis is not None:
        out = apply_pca(model, out)
    return out
