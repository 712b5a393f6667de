"""Map refit: ridge-regularized least squares against latent targets.

Given feature columns phi (M x N) and targets Z (L x N), the weights solve

    (phi phi' + tau I) W' = phi Z',      tau = 2*lam/mu,

which minimizes lam*||W||_F^2 + (mu/2)*sum_n ||z_n - W phi_n||^2.  The Gram
matrix is built once per training run and its Cholesky factor is cached,
re-factorizing only when tau changes.
"""

import logging

import numpy as np
from scipy.linalg import cho_factor, cho_solve

log = logging.getLogger(__name__)

GRAM_SIZE_CAP = 10000


class NumericError(ArithmeticError):
    """Raised when a linear solve fails in a way more data or regularization must fix."""


class GramCache:
    """Holds G = phi phi' and the factorization of G + tau*I for the current tau.

    The (tau, factor) pair is stored in a single attribute and replaced
    atomically, so concurrent solves with an unchanged tau are safe.
    ``refactor_count`` counts factorizations, mainly for tests and traces.
    """

    def __init__(self, G: np.ndarray):
        self.G = G
        self._fac = None          # (tau, cho_factor result)
        self.refactor_count = 0

    @property
    def tau(self):
        return self._fac[0] if self._fac is not None else None

    def factorization(self, tau: float):
        fac = self._fac
        if fac is not None and fac[0] == tau:
            return fac[1]
        M = self.G.shape[0]
        A = self.G + tau * np.eye(M)
        try:
            f = cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            if tau <= 0:
                raise NumericError(
                    "Gram matrix is singular with lam = 0; use lam > 0") from None
            bump = 1e-10 * np.trace(self.G) / M
            log.warning("Cholesky failed at tau=%g; retrying with diagonal bump %g",
                        tau, bump)
            try:
                f = cho_factor(A + bump * np.eye(M), lower=True)
            except np.linalg.LinAlgError:
                raise NumericError(
                    f"shifted Gram not positive definite (tau={tau:g})") from None
        self._fac = (tau, f)
        self.refactor_count += 1
        return f


def build_gram(phi: np.ndarray) -> GramCache:
    """G = phi phi', M x M; computed once per training run."""
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("phi must be M x N")
    if phi.shape[0] > GRAM_SIZE_CAP:
        raise ValueError(f"M = {phi.shape[0]} exceeds the Gram size cap {GRAM_SIZE_CAP}")
    if not np.all(np.isfinite(phi)):
        raise NumericError("phi contains non-finite entries")
    G = phi @ phi.T
    G = 0.5 * (G + G.T)
    return GramCache(G)


def solve_weights(cache: GramCache, phi: np.ndarray, Z: np.ndarray,
                  lam: float, mu: float) -> np.ndarray:
    """Solve (G + (2*lam/mu) I) W' = phi Z' for W (L x M)."""
    if lam < 0 or mu <= 0:
        raise ValueError("need lam >= 0 and mu > 0")
    phi = np.asarray(phi, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if phi.shape[0] != cache.G.shape[0] or Z.shape[1] != phi.shape[1]:
        raise ValueError("shape mismatch between phi, Z, and the Gram cache")
    tau = 2.0 * lam / mu
    f = cache.factorization(tau)
    rhs = phi @ Z.T                       # M x L, all right-hand sides at once
    return cho_solve(f, rhs).T
