"""Standardisation, clustering, PCA and correlation over moment features.

The estimators follow the scikit-learn contract (``fit`` returns ``self``,
learned state ends in ``_``, hyper-parameters are plain ``__init__``
arguments) so they compose with :class:`sklearn.pipeline.Pipeline`. The
module-level functions operate on :class:`FeatureMatrix` and mirror the
estimators for callers that want labelled results.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_open_unit
from .exceptions import DegenerateError, DomainError, InsufficientDataError
from .metrics import MomentTrajectory

DEFAULT_THRESHOLD = 0.8


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    columns: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DomainError(f"feature matrix must be 2-D and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("feature matrix contains non-finite entries")
        cols = tuple(self.columns)
        if len(cols) != v.shape[1]:
            raise DomainError(f"{len(cols)} column names for {v.shape[1]} columns")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_moments(cls, moments, columns=("mean", "std", "skewness", "excess_kurtosis")):
        rows = [[getattr(m, c) for c in columns] for m in moments if m.shape_defined]
        return cls(np.asarray(rows, dtype=float).reshape(len(rows), len(columns)), columns)

    @property
    def shape(self):
        return self.values.shape

    def column(self, name) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


def _names(X, n):
    names = getattr(X, "columns", None)
    return [str(c) for c in names] if names is not None else [f"column {i}" for i in range(n)]


class ZScoreScaler(TransformerMixin, BaseEstimator):
    """Standardise columns to zero mean and unit population std.

    Unlike :class:`sklearn.preprocessing.StandardScaler` a constant column is
    an error rather than being passed through, because a constant moment
    feature means the windowing upstream has gone wrong.
    """

    def fit(self, X, y=None):
        names = _names(X, np.shape(X)[1] if np.ndim(X) == 2 else 0)
        X = as_matrix(X, min_rows=2)
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        for i, s in enumerate(self.scale_):
            if s == 0.0 or np.all(X[:, i] == X[0, i]):
                raise DegenerateError(names[i], "constant column cannot be standardised")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = as_matrix(X)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self)
        return as_matrix(X) * self.scale_ + self.mean_


def zscore(fm: FeatureMatrix) -> FeatureMatrix:
    if fm.shape[0] < 2:
        raise InsufficientDataError("z-scoring needs at least 2 rows")
    for name in fm.columns:
        col = fm.column(name)
        if np.all(col == col[0]):
            raise DegenerateError(name, "constant column cannot be standardised")
    return FeatureMatrix(ZScoreScaler().fit_transform(fm.values), fm.columns)


# --- k-means ------------------------------------------------------------

def _sq_distances(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _assign(X, C):
    d2 = _sq_distances(X, C)
    # argmin returns the first minimum, i.e. the lowest centroid index on ties
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def kmeans_plusplus(X, k, rng) -> np.ndarray:
    """D²-weighted seeding; degenerate (all-zero) weights fall back to the farthest row."""
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    closest = _sq_distances(X, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(np.argmax(closest))
        centers.append(X[idx])
        closest = np.minimum(closest, _sq_distances(X, X[idx:idx + 1])[:, 0])
    return np.array(centers, dtype=float)


class MomentKMeans(ClusterMixin, BaseEstimator):
    """Lloyd's k-means with seeded k-means++ initialisation.

    Parameters
    ----------
    n_clusters : int
        Number of clusters ``k``.
    max_iter : int
        Upper bound on Lloyd iterations.
    random_state : int
        Seed for the initialisation; results are bit-identical for equal
        seeds and inputs.
    n_init : int
        Number of seeded k-means++ restarts drawn from one generator; the
        run with the lowest final inertia wins (earliest run on ties).

    Attributes
    ----------
    cluster_centers_, labels_, inertia_, n_iter_
        As in :class:`sklearn.cluster.KMeans`.
    inertia_history_ : list of float
        Inertia after every assignment step; never increases.
    n_reseeds_ : int
        How often an empty cluster was moved to the farthest point.

    Notes
    -----
    An empty cluster is re-seeded at the row farthest from its current
    centroid (rows already used for re-seeding in the same step are
    skipped). Nearest-centroid ties go to the lowest centroid index.
    """

    def __init__(self, n_clusters=3, max_iter=300, random_state=0, n_init=10):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_init = n_init

    def fit(self, X, y=None):
        X = as_matrix(X)
        k = int(self.n_clusters)
        if k < 1:
            raise DomainError(f"n_clusters must be at least 1, got {k}")
        if k > X.shape[0]:
            raise DomainError(f"n_clusters={k} exceeds the number of rows ({X.shape[0]})")
        if self.n_init < 1:
            raise DomainError(f"n_init must be at least 1, got {self.n_init}")
        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(int(self.n_init)):
            run = self._lloyd(X, kmeans_plusplus(X, k, rng))
            if best is None or run[2][-1] < best[2][-1]:
                best = run
        centers, labels, history, n_iter, reseeds = best
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = history[-1]
        self.inertia_history_ = history
        self.n_iter_ = n_iter
        self.n_reseeds_ = reseeds
        self.n_features_in_ = X.shape[1]
        return self

    def _lloyd(self, X, centers):
        labels, d2 = _assign(X, centers)
        history = [float(d2.sum())]
        reseeds = 0
        n_iter = 0
        for n_iter in range(1, int(self.max_iter) + 1):
            centers, used = self._update(X, labels, d2, centers)
            reseeds += used
            new_labels, d2 = _assign(X, centers)
            history.append(float(d2.sum()))
            stable = np.array_equal(new_labels, labels)
            labels = new_labels
            if stable:
                break
        return centers, labels, history, n_iter, reseeds

    @staticmethod
    def _update(X, labels, d2, centers):
        new = centers.copy()
        taken = set()
        reseeds = 0
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
                continue
            order = np.argsort(-d2, kind="stable")
            idx = next((int(i) for i in order if int(i) not in taken), int(order[0]))
            taken.add(idx)
            new[j] = X[idx]
            reseeds += 1
        return new, reseeds

    def predict(self, X):
        check_is_fitted(self)
        return _assign(as_matrix(X), self.cluster_centers_)[0]


@dataclass(frozen=True, eq=False)
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    seed: int
    inertia_history: tuple = ()
    columns: tuple = ()

    def as_dict(self) -> dict:
        return {
            "k": int(self.centroids.shape[0]),
            "seed": self.seed,
            "iterations": self.iterations,
            "inertia": self.inertia,
            "columns": list(self.columns),
            "centroids": self.centroids.tolist(),
            "sizes": np.bincount(self.assignments, minlength=self.centroids.shape[0]).tolist(),
            "assignments": self.assignments.tolist(),
        }


def kmeans(fm: FeatureMatrix, k=3, seed=0, max_iter=300, n_init=10) -> ClusterResult:
    est = MomentKMeans(n_clusters=k, max_iter=max_iter, random_state=seed,
                       n_init=n_init).fit(fm.values)
    return ClusterResult(est.labels_, est.cluster_centers_, est.inertia_, est.n_iter_,
                         seed, tuple(est.inertia_history_), fm.columns)


def cluster_purity(assignments, truth) -> float:
    """Fraction of rows whose label equals the majority label of their cluster."""
    assignments = np.asarray(assignments)
    truth = np.asarray(truth)
    hits = 0
    for c in np.unique(assignments):
        _, counts = np.unique(truth[assignments == c], return_counts=True)
        hits += counts.max()
    return hits / truth.size


# --- PCA ----------------------------------------------------------------

class MomentPCA(TransformerMixin, BaseEstimator):
    """Principal components from the eigendecomposition of the covariance.

    Components whose eigenvalue is numerically zero are dropped; when that
    leaves fewer than ``n_components`` the ``rank_deficient_`` flag is set.
    Component signs are fixed so the largest-magnitude loading is positive.
    """

    def __init__(self, n_components=2, tol=1e-10):
        self.n_components = n_components
        self.tol = tol

    def fit(self, X, y=None):
        X = as_matrix(X, min_rows=2)
        rows, cols = X.shape
        limit = min(rows - 1, cols)
        if not 1 <= self.n_components <= limit:
            raise DomainError(f"n_components must lie in [1, {limit}], got {self.n_components}")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = centered.T @ centered / rows
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        total = evals.sum()
        rank = int(np.sum(evals > self.tol * max(evals[0], np.finfo(float).tiny)))
        keep = min(self.n_components, max(rank, 1))
        comps = evecs[:, :keep].T
        pivots = np.argmax(np.abs(comps), axis=1)
        comps *= np.sign(comps[np.arange(keep), pivots])[:, None]
        self.components_ = comps
        self.explained_variance_ = evals[:keep]
        self.explained_variance_ratio_ = evals[:keep] / total if total > 0 else np.zeros(keep)
        self.rank_ = rank
        self.rank_deficient_ = keep < self.n_components
        self.n_features_in_ = cols
        return self

    def transform(self, X):
        check_is_fitted(self)
        return (as_matrix(X) - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return as_matrix(Z) @ self.components_ + self.mean_


@dataclass(frozen=True, eq=False)
class PCAResult:
    projected: FeatureMatrix
    explained_variance_ratio: np.ndarray
    rank_deficient: bool


def pca(fm: FeatureMatrix, n_components=2) -> PCAResult:
    est = MomentPCA(n_components=n_components).fit(fm.values)
    z = est.transform(fm.values)
    cols = tuple(f"PC{i + 1}" for i in range(z.shape[1]))
    return PCAResult(FeatureMatrix(z, cols), est.explained_variance_ratio_, est.rank_deficient_)


# --- correlation --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple
    matrix: np.ndarray

    def r(self, a, b) -> float:
        return float(self.matrix[self.labels.index(a), self.labels.index(b)])

    def as_dict(self) -> dict:
        return {"labels": list(self.labels), "matrix": self.matrix.tolist()}


def pearson(x, y, names=("x", "y")) -> float:
    return pearson_matrix({names[0]: x, names[1]: y}).matrix[0, 1]


def pearson_matrix(series) -> CorrelationMatrix:
    """Pearson r between every pair of equal-length named series.

    ``series`` is a mapping or a sequence of ``(name, values)`` pairs.
    """
    items = list(series.items()) if isinstance(series, Mapping) else list(series)
    if not items:
        raise DomainError("no series given")
    labels = tuple(str(name) for name, _ in items)
    data = [np.asarray(v, dtype=float) for _, v in items]
    n = data[0].size
    if any(d.ndim != 1 or d.size != n for d in data):
        raise DomainError("all series must be 1-D and of equal length")
    if n < 3:
        raise InsufficientDataError("correlation needs at least 3 aligned values")
    z = np.empty((len(data), n))
    for i, (name, d) in enumerate(zip(labels, data)):
        if not np.all(np.isfinite(d)):
            raise DomainError(f"{name}: non-finite values")
        c = d - d.mean()
        norm = np.sqrt(c @ c)
        if norm == 0.0 or np.all(d == d[0]):
            raise DegenerateError(name, "constant series has no correlation")
        z[i] = c / norm
    m = np.clip(z @ z.T, -1.0, 1.0)
    m = (m + m.T) / 2.0
    np.fill_diagonal(m, 1.0)
    return CorrelationMatrix(labels, m)


@dataclass(frozen=True)
class FatigueCorrelationReport:
    r: float
    n: int
    threshold: float
    pronounced: bool

    def as_dict(self) -> dict:
        return {"r": self.r, "n": self.n, "threshold": self.threshold,
                "pronounced": self.pronounced}


def fatigue_correlation(traj: MomentTrajectory, threshold=DEFAULT_THRESHOLD,
                        min_points=8, groups=None) -> FatigueCorrelationReport:
    """Skewness / excess-kurtosis correlation along a trajectory.

    A strong coupling of the two shape moments marks a fatigued state; the
    flag is raised when ``|r| >= threshold``. With ``groups`` (one label per
    point, e.g. the activity phase) both moments are centred on their group
    means first, so differences *between* activities do not count as
    coupling.
    """
    threshold = check_open_unit("threshold", threshold)
    if len(traj) < min_points:
        raise InsufficientDataError(f"need at least {min_points} trajectory points, got {len(traj)}")
    xy = traj.shape_array()
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape != (len(traj),):
            raise DomainError("groups must give one label per trajectory point")
        for g in np.unique(groups):
            rows = groups == g
            xy[rows] -= xy[rows].mean(axis=0)
    r = pearson(xy[:, 0], xy[:, 1], names=("skewness", "excess_kurtosis"))
    return FatigueCorrelationReport(float(r), len(traj), threshold, bool(abs(r) >= threshold))


def moment_feature_pipeline(k=3, seed=0, width_ms=5000, stride_ms=1000):
    """Windowed moments -> z-score -> k-means, as a scikit-learn pipeline."""
    from sklearn.pipeline import make_pipeline

    from .moments import WindowedMoments

    return make_pipeline(WindowedMoments(width_ms, stride_ms), ZScoreScaler(),
                         MomentKMeans(n_clusters=k, random_state=seed))
