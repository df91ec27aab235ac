"""
Shape classification: standardisation, PCA and a random-subspace KNN
ensemble, evaluated with stratified k-fold cross-validation.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis
from sklearn.metrics import confusion_matrix, pairwise_distances
from sklearn.model_selection import StratifiedKFold
from sklearn.neighbors import KNeighborsClassifier
from sklearn.preprocessing import StandardScaler

import config
from errors import DegeneratePCAError, InsufficientSamplesError


logger = logging.getLogger(__name__)

MODEL_VERSION = 1


@dataclass
class PCABasis:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def retained(self) -> int:
        return self.components.shape[0]

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z) @ self.components + self.mean

    @property
    def discarded_variance(self) -> float:
        return float(self.eigenvalues[self.retained:].sum())

    def reconstruction_error(self, X: np.ndarray) -> float:
        """Squared projection residual per sample, with the covariance's N - 1 normalisation."""
        X = np.asarray(X, dtype=float)
        residual = X - self.inverse_transform(self.transform(X))
        return float((residual ** 2).sum() / (len(X) - 1))


def fit_pca(X: np.ndarray, variance: float = config.PCA_VARIANCE) -> PCABasis:
    """
    Principal components by eigendecomposition of the sample covariance.

    Args:
        X: Samples x features matrix
        variance: Cumulative explained-variance fraction to retain

    Returns:
        PCABasis with the smallest number of components reaching `variance`
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 3:
        raise InsufficientSamplesError(f"PCA needs at least 3 samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)

    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order].T

    total = eigenvalues.sum()
    if total <= 0:
        raise DegeneratePCAError("All samples are identical")

    cumulative = np.cumsum(eigenvalues) / total
    retained = int(np.searchsorted(cumulative, variance - 1e-12) + 1)
    retained = min(retained, len(eigenvalues))

    # sign: largest-magnitude loading positive
    components = eigenvectors[:retained]
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(retained), pivots])
    components = components * signs[:, None]

    return PCABasis(mean, components, eigenvalues)


class SubspaceKNN:
    """
    Random-subspace ensemble of k-nearest-neighbour learners.

    Each learner sees a seeded random subset of the input dimensions and
    votes for one class; the class with most votes wins, ties going to
    the lowest class index. Equal distances favour the lower training index.
    """

    def __init__(self, learners: int = config.ENSEMBLE_LEARNERS,
                 neighbors: int = config.ENSEMBLE_NEIGHBORS,
                 seed: int = config.DEFAULT_SEED,
                 subset_size: Optional[int] = None):
        self.learners = learners
        self.neighbors = neighbors
        self.seed = seed
        self.subset_size = subset_size
        self.subsets: List[np.ndarray] = []
        self.classes = np.array([])
        self.train_points = np.zeros((0, 0))
        self.train_labels = np.array([], dtype=int)

    def fit(self, X: np.ndarray, y: Sequence) -> "SubspaceKNN":
        X = np.asarray(X, dtype=float)
        self.classes, self.train_labels = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes) < 2:
            raise InsufficientSamplesError("A dataset with at least two classes is required")

        d = X.shape[1]
        size = self.subset_size or math.ceil(d / 2)
        rng = np.random.default_rng(self.seed)
        self.subsets = [np.sort(rng.choice(d, size=size, replace=False)) for _ in range(self.learners)]
        self.train_points = X
        return self

    def learner_predictions(self, X: np.ndarray) -> np.ndarray:
        """Class index voted by each learner, shape (samples, learners)."""
        X = np.asarray(X, dtype=float)
        k = min(self.neighbors, len(self.train_points))
        n_classes = len(self.classes)
        out = np.empty((len(X), len(self.subsets)), dtype=int)
        for j, subset in enumerate(self.subsets):
            distances = pairwise_distances(X[:, subset], self.train_points[:, subset])
            nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
            labels = self.train_labels[nearest]
            counts = np.apply_along_axis(np.bincount, 1, labels, minlength=n_classes)
            out[:, j] = np.argmax(counts, axis=1)
        return out

    def votes(self, X: np.ndarray) -> np.ndarray:
        predictions = self.learner_predictions(X)
        n_classes = len(self.classes)
        return np.apply_along_axis(np.bincount, 1, predictions, minlength=n_classes)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'learners': self.learners,
            'neighbors': self.neighbors,
            'seed': self.seed,
            'subset_size': self.subset_size,
            'subsets': [s.tolist() for s in self.subsets],
            'classes': self.classes.tolist(),
            'train_points': self.train_points.tolist(),
            'train_labels': self.train_labels.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SubspaceKNN":
        model = cls(data['learners'], data['neighbors'], data['seed'], data['subset_size'])
        model.subsets = [np.asarray(s, dtype=int) for s in data['subsets']]
        model.classes = np.asarray(data['classes'])
        model.train_points = np.asarray(data['train_points'], dtype=float)
        model.train_labels = np.asarray(data['train_labels'], dtype=int)
        return model


def fit_subspace_knn(X: np.ndarray, y: Sequence, learners: int = config.ENSEMBLE_LEARNERS,
                     k: int = config.ENSEMBLE_NEIGHBORS, seed: int = config.DEFAULT_SEED) -> SubspaceKNN:
    return SubspaceKNN(learners, k, seed).fit(X, y)


@dataclass
class TrainedModel:
    """Scaler, PCA basis and classifier fitted on one training set."""
    scaler: StandardScaler
    pca: PCABasis
    classifier: Any

    @property
    def classes(self) -> np.ndarray:
        return self.classifier.classes if isinstance(self.classifier, SubspaceKNN) else self.classifier.classes_

    def project(self, X: np.ndarray) -> np.ndarray:
        return self.pca.transform(self.scaler.transform(np.asarray(X, dtype=float)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classifier.predict(self.project(X))

    def to_dict(self) -> Dict[str, Any]:
        if not isinstance(self.classifier, SubspaceKNN):
            raise TypeError("Only subspace KNN models are serialisable")
        return {
            'version': MODEL_VERSION,
            'scaler': {'mean': self.scaler.mean_.tolist(), 'scale': self.scaler.scale_.tolist()},
            'pca': {
                'mean': self.pca.mean.tolist(),
                'components': self.pca.components.tolist(),
                'eigenvalues': self.pca.eigenvalues.tolist(),
            },
            'ensemble': self.classifier.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainedModel":
        scaler = StandardScaler()
        scaler.mean_ = np.asarray(data['scaler']['mean'], dtype=float)
        scaler.scale_ = np.asarray(data['scaler']['scale'], dtype=float)
        scaler.var_ = scaler.scale_ ** 2
        scaler.n_features_in_ = len(scaler.mean_)
        pca = PCABasis(np.asarray(data['pca']['mean'], dtype=float),
                       np.asarray(data['pca']['components'], dtype=float),
                       np.asarray(data['pca']['eigenvalues'], dtype=float))
        return cls(scaler, pca, SubspaceKNN.from_dict(data['ensemble']))


ClassifierFactory = Callable[[int], Any]


def subspace_factory(settings: config.ClassificationSettings) -> ClassifierFactory:
    return lambda seed: SubspaceKNN(settings.learners, settings.neighbors, seed)


def train_model(
    X: np.ndarray,
    y: Sequence,
    seed: int = config.DEFAULT_SEED,
    settings: Optional[config.ClassificationSettings] = None,
    factory: Optional[ClassifierFactory] = None
) -> TrainedModel:
    """Standardise, project onto the retained components, fit the classifier."""
    settings = settings or config.ClassificationSettings()
    factory = factory or subspace_factory(settings)
    X = np.asarray(X, dtype=float)
    scaler = StandardScaler().fit(X)
    pca = fit_pca(scaler.transform(X), settings.variance)
    classifier = factory(seed).fit(pca.transform(scaler.transform(X)), np.asarray(y))
    return TrainedModel(scaler, pca, classifier)


@dataclass
class EvalReport:
    fold_accuracies: List[float]
    confusion: np.ndarray
    labels: List[str]
    retained_counts: List[int] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        return float(np.trace(self.confusion) / total) if total else 0.0

    @property
    def mean_fold_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'accuracy': self.accuracy,
            'fold_accuracies': list(self.fold_accuracies),
            'labels': list(self.labels),
            'confusion': self.confusion.tolist(),
            'retained_components': list(self.retained_counts),
        }

    def format(self) -> str:
        """Confusion matrix as text, rows are true classes."""
        width = max(len(label) for label in self.labels) + 2
        lines = [f"Accuracy: {100 * self.accuracy:.1f}%",
                 "Fold accuracies: " + ", ".join(f"{100 * a:.1f}%" for a in self.fold_accuracies)]
        if self.retained_counts:
            lines.append("Retained components per fold: " + ", ".join(str(c) for c in self.retained_counts))
        lines.append("")
        lines.append("True \\ Predicted".ljust(width + 6) + "".join(l.rjust(width) for l in self.labels))
        for label, row in zip(self.labels, self.confusion):
            lines.append(label.ljust(width + 6) + "".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(lines)


def _check_samples(y: np.ndarray, folds: int) -> None:
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise InsufficientSamplesError("Cross-validation needs at least two classes")
    if counts.min() < folds:
        raise InsufficientSamplesError(
            f"Class {classes[np.argmin(counts)]!r} has {counts.min()} samples, fewer than {folds} folds"
        )


def cross_validate(
    X: np.ndarray,
    y: Sequence,
    folds: int = config.CV_FOLDS,
    seed: int = config.DEFAULT_SEED,
    settings: Optional[config.ClassificationSettings] = None,
    factory: Optional[ClassifierFactory] = None
) -> EvalReport:
    """
    Stratified k-fold evaluation with per-fold preprocessing.

    Scaler and PCA are fitted on each training split only.

    Args:
        X: Samples x features matrix
        y: Class labels
        folds: Number of folds
        seed: Seed for fold shuffling and the classifier
        settings: PCA and ensemble settings
        factory: Builds a classifier for a seed; subspace KNN when None

    Returns:
        EvalReport aggregated over the held-out folds
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    _check_samples(y, folds)
    labels = sorted(np.unique(y).tolist())

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    accuracies, retained = [], []

    for fold, (train_idx, test_idx) in enumerate(splitter.split(X, y)):
        model = train_model(X[train_idx], y[train_idx], seed, settings, factory)
        predicted = model.predict(X[test_idx])
        fold_confusion = confusion_matrix(y[test_idx], predicted, labels=labels)
        confusion += fold_confusion
        accuracies.append(float(np.trace(fold_confusion) / len(test_idx)))
        retained.append(model.pca.retained)
        logger.debug(f"Fold {fold + 1}: accuracy {accuracies[-1]:.3f}, {model.pca.retained} components")

    return EvalReport(accuracies, confusion, labels, retained)


def baseline_models(
    X: np.ndarray,
    y: Sequence,
    folds: int = config.CV_FOLDS,
    seed: int = config.DEFAULT_SEED,
    settings: Optional[config.ClassificationSettings] = None
) -> Dict[str, EvalReport]:
    """
    Linear discriminant, plain KNN and the subspace ensemble under one protocol.

    Returns:
        Mapping of model name to EvalReport
    """
    settings = settings or config.ClassificationSettings()
    factories: Dict[str, ClassifierFactory] = {
        'Linear Discriminant': lambda _seed: LinearDiscriminantAnalysis(),
        'KNN': lambda _seed: KNeighborsClassifier(n_neighbors=settings.plain_neighbors),
        'Subspace KNN': subspace_factory(settings),
    }
    return {name: cross_validate(X, y, folds, seed, settings, factory)
            for name, factory in factories.items()}


def format_comparison(reports: Dict[str, EvalReport]) -> str:
    width = max(len(name) for name in reports) + 2
    lines = ["Model".ljust(width) + "Accuracy"]
    for name, report in reports.items():
        lines.append(name.ljust(width) + f"{100 * report.accuracy:.1f}%")
    return "\n".join(lines)
