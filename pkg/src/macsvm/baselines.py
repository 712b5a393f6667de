"""Reference methods and diagnostics: PCA, brute-force nearest neighbor, scatter."""

from dataclasses import dataclass

import numpy as np

from .data import Dataset


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # L x D, orthonormal rows
    explained_variance: np.ndarray  # length L, non-increasing


def pca_fit(X: np.ndarray, L: int) -> PcaModel:
    """Top-L principal directions of centered X.

    Eigendecomposition of the D x D covariance when D <= N, otherwise of the
    N x N Gram (dual form).  Variances use the 1/(N-1) convention; component
    signs are fixed so each row's largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    N, D = X.shape
    if not 1 <= L <= min(N, D):
        raise ValueError("need 1 <= L <= min(N, D)")
    mean = X.mean(axis=0)
    Xc = X - mean
    denom = max(N - 1, 1)
    if D <= N:
        cov = Xc.T @ Xc / denom
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:L]
        comps = evecs[:, order].T
        var = evals[order]
    else:
        gram = Xc @ Xc.T / denom
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1][:L]
        var = evals[order]
        comps = np.empty((L, D))
        for j, i in enumerate(order):
            v = Xc.T @ evecs[:, i]
            nv = np.linalg.norm(v)
            comps[j] = v / nv if nv > 0 else v
    var = np.maximum(var, 0.0)
    for j in range(L):
        i = int(np.argmax(np.abs(comps[j])))
        if comps[j, i] < 0:
            comps[j] = -comps[j]
    return PcaModel(mean=mean, components=comps, explained_variance=var)


def pca_project(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return (X - model.mean) @ model.components.T


def nn_classify(train: Dataset, queries: np.ndarray) -> np.ndarray:
    """Label of the Euclidean-nearest training point; ties go to the lowest index."""
    Q = np.asarray(queries, dtype=np.float64)
    d2 = (np.sum(Q * Q, axis=1)[:, None] + np.sum(train.X * train.X, axis=1)[None, :]
          - 2.0 * Q @ train.X.T)
    return train.y[np.argmin(d2, axis=1)]


def within_class_scatter(Z: np.ndarray, y) -> float:
    """(1/N) sum_n ||z_n - centroid of class y_n||^2."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y)
    total = 0.0
    for k in np.unique(y):
        zk = Z[y == k]
        total += float(np.sum((zk - zk.mean(axis=0)) ** 2))
    return total / len(Z)


def error_rate(pred, truth) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth lengths differ")
    return float(np.mean(pred != truth))
