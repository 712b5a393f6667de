"""RBF basis machinery: k-means center selection, Gaussian design matrix, map application.

The low-dimensional map is F(x) = W phi(x) with phi_m(x) = exp(-||x - c_m||^2 / (2 sigma^2)).
Centers come from a single k-means run on the training inputs and are never
updated afterwards.  Linear maps use the same code path with the identity
feature map (phi(x) = x), signalled by ``centers=None`` in RbfMapParams.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from . import rng


@dataclass
class RbfCenters:
    C: np.ndarray               # M x D
    sigma: Optional[float] = None

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=np.float64)
        if self.C.ndim != 2 or self.C.shape[0] < 1:
            raise ValueError("centers must be a non-empty M x D matrix")
        if not np.all(np.isfinite(self.C)):
            raise ValueError("centers contain non-finite values")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass
class RbfMapParams:
    """Parameters of the trained map: weights W (L x M), width/centers, ridge weight."""

    centers: Optional[RbfCenters]   # None means identity (linear) features
    W: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValueError("W must be L x M")
        if self.centers is not None and self.W.shape[1] != self.centers.m:
            raise ValueError("W column count must equal the number of centers")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")

    @property
    def latent_dim(self) -> int:
        return self.W.shape[0]


def _sq_dists(X, C):
    # (N, M) squared euclidean distances, clipped at 0 against rounding.
    d2 = (np.sum(X * X, axis=1)[:, None] + np.sum(C * C, axis=1)[None, :]
          - 2.0 * X @ C.T)
    return np.maximum(d2, 0.0)


def kmeans_centers(X: np.ndarray, M: int, max_iter: int = 100, seed: int = 0):
    """Lloyd's k-means, seeded by greedy farthest-point selection.

    The first center is a uniformly drawn row (k-means stream of ``seed``);
    each further center is the point with largest squared distance to the
    chosen set, ties to the lowest index.  Empty clusters are re-seeded to
    the point farthest from its assigned center.  Selection is without
    replacement, so M = N returns a permutation of the rows.

    Returns (RbfCenters with sigma unset, sse_trace), where sse_trace[i] is
    the objective after iteration i and is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    N = X.shape[0]
    if M < 1 or M > N:
        raise ValueError("need 1 <= M <= N")

    g = rng.stream(seed, rng.KMEANS_STREAM)
    chosen = np.zeros(N, dtype=bool)
    first = int(g.integers(N))
    order = [first]
    chosen[first] = True
    d2 = np.sum((X - X[first]) ** 2, axis=1)
    for _ in range(M - 1):
        i = int(np.argmax(np.where(chosen, -np.inf, d2)))
        order.append(i)
        chosen[i] = True
        d2 = np.minimum(d2, np.sum((X - X[i]) ** 2, axis=1))
    C = X[order].copy()

    trace = []
    prev_assign = None
    for _ in range(max_iter):
        D2 = _sq_dists(X, C)
        assign = np.argmin(D2, axis=1)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign
        d_own = D2[np.arange(N), assign]
        counts = np.bincount(assign, minlength=M)
        for m in np.flatnonzero(counts == 0):
            i = int(np.argmax(d_own))
            assign[i] = m
            d_own[i] = 0.0
        for m in range(M):
            pts = X[assign == m]
            if len(pts):
                C[m] = pts.mean(axis=0)
        trace.append(float(np.sum(np.min(_sq_dists(X, C), axis=1))))
    return RbfCenters(C, None), trace


def default_sigma(centers: RbfCenters) -> float:
    """Median pairwise distance among the centers (1.0 when there is a single center)."""
    if centers.m < 2:
        return 1.0
    return float(np.median(pdist(centers.C)))


def rbf_design_matrix(X: np.ndarray, centers: RbfCenters) -> np.ndarray:
    """Gaussian design matrix, phi[m, n] = exp(-||x_n - c_m||^2 / (2 sigma^2))."""
    if centers.sigma is None or centers.sigma <= 0:
        raise ValueError("sigma must be set and positive")
    X = np.asarray(X, dtype=np.float64)
    d2 = _sq_dists(X, centers.C)
    return np.exp(-d2 / (2.0 * centers.sigma ** 2)).T


def design_matrix(X: np.ndarray, centers: Optional[RbfCenters]) -> np.ndarray:
    """Feature columns for a batch: RBF responses, or X itself in linear mode."""
    if centers is None:
        return np.asarray(X, dtype=np.float64).T.copy()
    return rbf_design_matrix(X, centers)


def map_latent(params: RbfMapParams, phi: np.ndarray) -> np.ndarray:
    """Apply the map to precomputed feature columns: W @ phi, L x N."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[0] != params.W.shape[1]:
        raise ValueError("phi must be M x N with M matching W")
    return params.W @ phi


def map_points(params: RbfMapParams, X: np.ndarray) -> np.ndarray:
    """Convenience: design matrix + map in one call, L x N."""
    return map_latent(params, design_matrix(X, params.centers))
