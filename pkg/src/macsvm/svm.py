"""Linear SVM on latent coordinates: dual coordinate descent, one-vs-all wrapper.

Solves min 1/2 ||w||^2 + C sum_n xi_n  s.t.  y_n (w'z_n + b) >= 1 - xi_n, xi_n >= 0
by coordinate descent on the box-constrained dual (alpha_n in [0, C]).  The bias
is an augmented constant feature of value 1 folded into w, so b is regularized;
that deviates slightly from the unregularized-bias form and is the convention
used throughout (including by the tests' QP oracle).

Points are visited in fixed sequential order with no shuffling, so training is
deterministic for a given input.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class BinarySvm:
    w: np.ndarray
    b: float
    C: float
    # solver metadata, not part of the model proper
    converged: bool = True
    epochs: int = 0
    gap_trace: list = field(default_factory=list, repr=False)
    dual_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if not np.all(np.isfinite(self.w)):
            raise ValueError("w contains non-finite values")
        if self.C <= 0:
            raise ValueError("C must be positive")


@dataclass
class OvaSvm:
    machines: list
    class_count: int

    def __post_init__(self):
        if len(self.machines) != self.class_count:
            raise ValueError("need one machine per class")
        dims = {len(m.w) for m in self.machines}
        if len(dims) > 1:
            raise ValueError("machines disagree on latent dimension")


def train_binary(Z: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-6,
                 max_epochs: int = 2000, alpha0: Optional[np.ndarray] = None):
    """Train one binary machine on latent columns Z (L x N), targets y in {-1, +1}.

    Returns (BinarySvm, xi, dual_gap).  Convergence means the duality gap of
    the augmented-bias problem fell to tol * (1 + primal); otherwise the
    machine is returned with ``converged`` False.  ``alpha0`` warm-starts the
    dual variables (clipped into the box).
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2:
        raise ValueError("Z must be L x N")
    y = np.asarray(y, dtype=np.float64)
    N = Z.shape[1]
    if y.shape != (N,) or not np.all(np.abs(y) == 1.0):
        raise ValueError("y must be a length-N vector of +-1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present")
    if C <= 0:
        raise ValueError("C must be positive")

    dims = Z.shape[0] + 1
    Xa = np.vstack([Z, np.ones((1, N))])          # augmented with the bias feature
    if alpha0 is None:
        alpha = np.zeros(N)
    else:
        alpha = np.clip(np.asarray(alpha0, dtype=np.float64), 0.0, C).copy()
        if alpha.shape != (N,):
            raise ValueError("alpha0 must have length N")
    wv = Xa @ (alpha * y)

    # Hot loop runs on plain python floats; numpy scalar ops are too slow here.
    pts = Xa.T.tolist()
    q = np.einsum("dn,dn->n", Xa, Xa).tolist()
    ys = y.tolist()
    al = alpha.tolist()
    w = wv.tolist()

    gap_trace, dual_trace = [], []
    converged = False
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        for i in range(N):
            x = pts[i]
            yi = ys[i]
            s = 0.0
            for d in range(dims):
                s += w[d] * x[d]
            grad = yi * s - 1.0
            a = al[i]
            if (a == 0.0 and grad >= 0.0) or (a == C and grad <= 0.0):
                continue
            anew = a - grad / q[i]
            if anew < 0.0:
                anew = 0.0
            elif anew > C:
                anew = C
            if anew != a:
                step = (anew - a) * yi
                for d in range(dims):
                    w[d] += step * x[d]
                al[i] = anew
        wv = np.array(w)
        scores = wv @ Xa
        xi = np.maximum(0.0, 1.0 - y * scores)
        wnorm2 = float(wv @ wv)
        primal = 0.5 * wnorm2 + C * float(np.sum(xi))
        dual = float(np.sum(al)) - 0.5 * wnorm2
        gap = primal - dual
        gap_trace.append(gap)
        dual_trace.append(dual)
        if gap <= tol * (1.0 + primal):
            converged = True
            break

    svm = BinarySvm(w=wv[:-1], b=float(wv[-1]), C=float(C), converged=converged,
                    epochs=epoch, gap_trace=gap_trace, dual_trace=dual_trace)
    svm.alpha = np.array(al)
    margins = y * (svm.w @ Z + svm.b)
    xi = np.maximum(0.0, 1.0 - margins)
    return svm, xi, gap_trace[-1]


def class_targets(y: np.ndarray, class_count: int) -> np.ndarray:
    """Per-class +-1 target matrix, shape (N, K): +1 where y == k else -1."""
    y = np.asarray(y)
    T = -np.ones((len(y), class_count))
    T[np.arange(len(y)), y] = 1.0
    return T


def train_ova(Z: np.ndarray, y: np.ndarray, C, tol: float = 1e-6,
              max_epochs: int = 2000, threads: int = 1, warm=None) -> OvaSvm:
    """One machine per class, targets +1 for the class and -1 for the rest.

    C may be a scalar (shared, the default) or a length-K sequence.  Machines
    are independent; ``threads`` > 1 trains them concurrently with results
    identical to the sequential order.  ``warm`` optionally carries per-class
    dual starts (list of alpha vectors or None entries).
    """
    y = np.asarray(y, dtype=np.int64)
    K = int(y.max()) + 1 if len(y) else 0
    if K < 2 or len(np.unique(y)) < K:
        raise ValueError("all classes 0..K-1 must be present with K >= 2")
    Cs = np.broadcast_to(np.asarray(C, dtype=np.float64), (K,))
    T = class_targets(y, K)

    def fit(k):
        a0 = warm[k] if warm is not None else None
        svm, _, _ = train_binary(Z, T[:, k], float(Cs[k]), tol, max_epochs, alpha0=a0)
        return svm

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            machines = list(ex.map(fit, range(K)))
    else:
        machines = [fit(k) for k in range(K)]
    return OvaSvm(machines=machines, class_count=K)


def decision_values(ova: OvaSvm, Z: np.ndarray) -> np.ndarray:
    """Stacked per-machine scores w_k'z + b_k, shape (K, N)."""
    Z = np.asarray(Z, dtype=np.float64)
    U = np.stack([m.w for m in ova.machines])
    b = np.array([m.b for m in ova.machines])
    return U @ Z + b[:, None]


def predict(ova: OvaSvm, z: np.ndarray) -> int:
    """Label of a single latent vector: argmax of the decision values, ties to the smaller index."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (len(ova.machines[0].w),):
        raise ValueError("latent dimension mismatch")
    return int(np.argmax(decision_values(ova, z[:, None])[:, 0]))


def predict_batch(ova: OvaSvm, Z: np.ndarray) -> np.ndarray:
    return np.argmax(decision_values(ova, Z), axis=0)
