"""Joint training of the latent map and the linear machines.

The nested problem (regularized SVM on F(x) = W phi(x)) is split by giving
every training point an auxiliary coordinate z_n constrained to equal F(x_n),
then relaxing the constraint with a quadratic penalty:

    lam ||W||^2 + sum_k (1/2 ||w_k||^2 + C sum_n xi_nk)
      + (mu/2) sum_n ||z_n - W phi(x_n)||^2.

At fixed mu the three blocks are each easy: the coordinate step decouples over
points (coords module), the machine step is K independent linear SVMs on Z
(svm module), and the map step is a ridge solve against Z (ridge module).
mu follows the schedule mu0 * mu_factor^stage; each stage runs the block
sweep to an inner tolerance, and a validation set (when given) picks the
stage to stop at, keeping the best snapshot.

Stopping the penalty schedule early is the intended regime: the path does
not need mu -> infinity to classify well.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import coords, ridge, rng, svm
from .data import Dataset
from .features import (RbfCenters, RbfMapParams, default_sigma, design_matrix,
                       kmeans_centers, map_latent)

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Hyperparameters and schedule knobs for train_mac / two_step_baseline.

    basis_count None means linear features (phi(x) = x); sigma "auto" takes
    the median pairwise distance among the fitted centers.  threads only
    distributes work (points for the coordinate step, classes for the machine
    step); results are bitwise identical for any thread count.
    """

    latent_dim: int
    basis_count: Optional[int] = None
    sigma: Union[float, str] = "auto"
    lam: float = 1e-3
    C: float = 10.0
    mu0: float = 2.0
    mu_factor: float = 1.5
    mu_max_stages: int = 20
    inner_tol: float = 1e-4
    inner_max_iters: int = 50
    init: str = "simplex"
    patience: int = 1
    seed: int = 0
    simplex_scale: float = 4.0
    svm_tol: float = 1e-6
    svm_max_epochs: int = 2000
    z_tol: float = 1e-10
    z_max_sweeps: int = 2000
    kmeans_max_iter: int = 100
    threads: int = 1
    record_steps: bool = True

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be at least 1")
        if self.basis_count is not None and self.basis_count < 1:
            raise ValueError("basis_count must be positive (or None for linear features)")
        if isinstance(self.sigma, str):
            if self.sigma != "auto":
                raise ValueError('sigma must be a positive number or "auto"')
        elif self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.mu0 <= 0 or self.mu_factor <= 1:
            raise ValueError("need mu0 > 0 and mu_factor > 1")
        if self.mu_max_stages < 1 or self.inner_max_iters < 1:
            raise ValueError("stage and iteration counts must be positive")
        if self.init not in ("simplex", "random"):
            raise ValueError('init must be "simplex" or "random"')
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class HistoryRecord:
    stage: int
    iteration: int
    mu: float
    penalty_obj: float
    nested_obj: float
    train_err: float
    val_err: float          # nan when no validation set
    residual: float         # (1/N) sum ||z_n - F(x_n)||^2


@dataclass
class StepRecord:
    stage: int
    iteration: int
    step: str               # "z", "g" or "f"
    penalty_obj: float
    solver_slack: float     # summed dual gaps for "g", 0 for exact steps


@dataclass
class TrainState:
    Z: np.ndarray
    Xi: np.ndarray
    mu: float
    history: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)


@dataclass
class TrainedModel:
    map: RbfMapParams
    svms: svm.OvaSvm
    collapsed: tuple        # (V: K x M with rows W'w_k, b: K)
    metadata: dict = field(default_factory=dict)


def simplex_vertices(K: int, L: int, scale: float) -> np.ndarray:
    """K points with equal pairwise distance ``scale`` (needs L >= K-1), centroid 0.

    Built from the Helmert basis of the hyperplane orthogonal to the all-ones
    vector, so the construction is exact and deterministic.  When L < K-1 the
    simplex is orthogonally projected onto the first L coordinates and the
    pairwise distances are no longer equal.
    """
    if K < 2 or L < 1 or scale <= 0:
        raise ValueError("need K >= 2, L >= 1, scale > 0")
    H = np.zeros((K - 1, K))
    for j in range(1, K):
        v = 1.0 / np.sqrt(j * (j + 1.0))
        H[j - 1, :j] = v
        H[j - 1, j] = -j * v
    verts = -(scale / np.sqrt(2.0)) * H.T        # K x (K-1)
    if L >= K - 1:
        out = np.zeros((K, L))
        out[:, :K - 1] = verts
        return out
    return verts[:, :L].copy()


def init_coords(cfg: TrainConfig, y: np.ndarray, K: int) -> np.ndarray:
    """Starting coordinates, N x L: class simplex vertices or seeded unit normals."""
    y = np.asarray(y, dtype=np.int64)
    if cfg.init == "simplex":
        verts = simplex_vertices(K, cfg.latent_dim, cfg.simplex_scale)
        return verts[y].copy()
    g = rng.stream(cfg.seed, rng.INIT_STREAM)
    return g.standard_normal((len(y), cfg.latent_dim))


def _costs(svms: svm.OvaSvm, C=None) -> np.ndarray:
    if C is None:
        return np.array([m.C for m in svms.machines])
    return np.broadcast_to(np.asarray(C, dtype=np.float64),
                           (svms.class_count,)).copy()


def penalty_objective(lam, W, svms: svm.OvaSvm, Z, Xi, mu, phi, C=None,
                      targets=None) -> float:
    """Penalized objective at the given state; Z is N x L, Xi N x K.

    Xi=None recomputes the slacks from (svms, Z) at their hinge optimum,
    which needs the +-1 ``targets`` matrix.
    """
    W = np.asarray(W, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    Cs = _costs(svms, C)
    if Xi is None:
        if targets is None:
            raise ValueError("recomputing Xi requires targets")
        scores = svm.decision_values(svms, Z.T)              # K x N
        Xi = np.maximum(0.0, 1.0 - np.asarray(targets) * scores.T)
    else:
        Xi = np.asarray(Xi, dtype=np.float64)
    val = lam * float(np.sum(W * W))
    for k, m in enumerate(svms.machines):
        val += 0.5 * float(m.w @ m.w) + Cs[k] * float(np.sum(Xi[:, k]))
    Rm = Z.T - W @ phi
    val += 0.5 * mu * float(np.sum(Rm * Rm))
    return val


def nested_objective(lam, W, svms: svm.OvaSvm, phi, targets, C=None) -> float:
    """Original objective with slacks at their hinge optimum; targets is N x K of +-1."""
    W = np.asarray(W, dtype=np.float64)
    T = np.asarray(targets, dtype=np.float64)
    Cs = _costs(svms, C)
    FX = W @ phi
    scores = svm.decision_values(svms, FX)      # K x N
    xi = np.maximum(0.0, 1.0 - T * scores.T)    # N x K
    val = lam * float(np.sum(W * W))
    for k, m in enumerate(svms.machines):
        val += 0.5 * float(m.w @ m.w) + Cs[k] * float(np.sum(xi[:, k]))
    return val


def collapse(model: TrainedModel):
    """Per-class direct weights on the basis outputs: v_k = W'w_k, with the same b_k."""
    W = model.map.W
    U = np.stack([m.w for m in model.svms.machines])
    V = U @ W
    b = np.array([m.b for m in model.svms.machines])
    return V, b


def predict_two_stage(model: TrainedModel, X) -> np.ndarray:
    phi = design_matrix(X, model.map.centers)
    return svm.predict_batch(model.svms, map_latent(model.map, phi))


def predict_collapsed(model: TrainedModel, X) -> np.ndarray:
    phi = design_matrix(X, model.map.centers)
    V, b = model.collapsed
    return np.argmax(V @ phi + b[:, None], axis=0)


def _fit_features(cfg: TrainConfig, X):
    if cfg.basis_count is None:
        return None
    if cfg.basis_count > X.shape[0]:
        raise ValueError("basis_count cannot exceed the number of training points")
    centers, _ = kmeans_centers(X, cfg.basis_count, cfg.kmeans_max_iter, cfg.seed)
    centers.sigma = default_sigma(centers) if cfg.sigma == "auto" else float(cfg.sigma)
    return centers


def _zstep(FX, T, U, b, c, cfg: TrainConfig):
    N = T.shape[0]
    if cfg.threads <= 1 or N < 2 * cfg.threads:
        return coords.solve_points(FX, T, U, b, c, cfg.z_tol, cfg.z_max_sweeps)
    blocks = np.array_split(np.arange(N), cfg.threads)
    Z = np.empty((N, FX.shape[0]))
    Xi = np.empty((N, T.shape[1]))
    Lam = np.empty_like(Xi)
    ok = np.empty(N, dtype=bool)

    def run(idx):
        return coords.solve_points(FX[:, idx], T[idx], U, b, c,
                                   cfg.z_tol, cfg.z_max_sweeps)

    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        for idx, (z, xi, lm, flags) in zip(blocks, ex.map(run, blocks)):
            Z[idx], Xi[idx], Lam[idx], ok[idx] = z, xi, lm, flags
    return Z, Xi, Lam, ok


def _snapshot(W, svms):
    machines = [svm.BinarySvm(w=m.w.copy(), b=m.b, C=m.C) for m in svms.machines]
    return W.copy(), svm.OvaSvm(machines=machines, class_count=svms.class_count)


def _assemble(cfg, centers, W, svms, metadata) -> TrainedModel:
    params = RbfMapParams(centers=centers, W=W, lam=cfg.lam)
    U = np.stack([m.w for m in svms.machines])
    V = U @ W
    b = np.array([m.b for m in svms.machines])
    check = np.stack([W.T @ m.w for m in svms.machines])
    assert np.max(np.abs(V - check)) <= 1e-12
    return TrainedModel(map=params, svms=svms, collapsed=(V, b), metadata=metadata)


def train_mac(cfg: TrainConfig, train: Dataset, val: Optional[Dataset] = None):
    """Alternating training under the penalty schedule; returns (model, state).

    Initialization follows the class-simplex (or random) coordinates, one
    machine fit and one map fit; then each mu stage sweeps {coordinate step,
    machine step, map step} until the penalized objective's relative change
    drops below inner_tol.  With a validation set, training keeps the best
    stage-end snapshot and stops after ``patience`` stages without
    improvement; otherwise all stages run.
    """
    X, y, K = train.X, train.y, train.class_count
    N = train.n
    centers = _fit_features(cfg, X)
    phi = design_matrix(X, centers)
    cache = ridge.build_gram(phi)
    T = svm.class_targets(y, K)
    Cs = np.full(K, cfg.C)

    phi_val = design_matrix(val.X, centers) if val is not None else None

    Z = init_coords(cfg, y, K)
    ova = svm.train_ova(Z.T, y, cfg.C, cfg.svm_tol, cfg.svm_max_epochs,
                        threads=cfg.threads)
    warm = [m.alpha for m in ova.machines]
    W = ridge.solve_weights(cache, phi, Z.T, cfg.lam, cfg.mu0)

    state = TrainState(Z=Z, Xi=np.zeros((N, K)), mu=cfg.mu0)
    best_err = np.inf
    best_snap = None
    best_stage = -1
    streak = 0
    stop_reason = "stages_exhausted"
    inner_total = 0
    unconverged_points = 0
    warned_stage = -1

    for stage in range(cfg.mu_max_stages):
        mu = cfg.mu0 * cfg.mu_factor ** stage
        state.mu = mu
        c = 2.0 * Cs / mu
        prev_J = None
        for it in range(cfg.inner_max_iters):
            inner_total += 1
            U = np.stack([m.w for m in ova.machines])
            bvec = np.array([m.b for m in ova.machines])
            FX = W @ phi
            Z, Xi, _, zok = _zstep(FX, T, U, bvec, c, cfg)
            state.Z, state.Xi = Z, Xi
            if not np.all(zok):
                unconverged_points += int(np.sum(~zok))
                if stage != warned_stage:        # one line per stage, not per step
                    log.warning("coordinate step left %d points unconverged at stage %d",
                                int(np.sum(~zok)), stage)
                    warned_stage = stage
            if cfg.record_steps:
                state.step_trace.append(StepRecord(
                    stage, it, "z",
                    penalty_objective(cfg.lam, W, ova, Z, Xi, mu, phi), 0.0))

            ova = svm.train_ova(Z.T, y, cfg.C, cfg.svm_tol, cfg.svm_max_epochs,
                                threads=cfg.threads, warm=warm)
            warm = [m.alpha for m in ova.machines]
            if cfg.record_steps:
                gaps = sum(m.gap_trace[-1] for m in ova.machines)
                state.step_trace.append(StepRecord(
                    stage, it, "g",
                    penalty_objective(cfg.lam, W, ova, Z, None, mu, phi,
                                      targets=T), gaps))

            W = ridge.solve_weights(cache, phi, Z.T, cfg.lam, mu)
            J = penalty_objective(cfg.lam, W, ova, Z, None, mu, phi, targets=T)
            if cfg.record_steps:
                state.step_trace.append(StepRecord(stage, it, "f", J, 0.0))
            if not np.isfinite(J):
                raise ridge.NumericError(
                    f"non-finite objective at stage {stage} iteration {it}")

            FX = W @ phi
            train_err = float(np.mean(svm.predict_batch(ova, FX) != y))
            resid = float(np.sum((Z.T - FX) ** 2)) / N
            nested = nested_objective(cfg.lam, W, ova, phi, T)
            val_err = np.nan
            if phi_val is not None:
                val_err = float(np.mean(
                    svm.predict_batch(ova, W @ phi_val) != val.y))
            state.history.append(HistoryRecord(
                stage, it, mu, J, nested, train_err, val_err, resid))

            if prev_J is not None and abs(prev_J - J) <= cfg.inner_tol * (1.0 + abs(prev_J)):
                break
            prev_J = J

        if val is not None:
            stage_err = state.history[-1].val_err
            if stage_err < best_err:
                best_err = stage_err
                best_snap = _snapshot(W, ova)
                best_stage = stage
                streak = 0
            else:
                streak += 1
                if streak >= cfg.patience:
                    stop_reason = "early_stop"
                    break

    if val is not None and best_snap is not None:
        W_final, ova_final = best_snap
    else:
        W_final, ova_final = W, ova
        best_stage = state.history[-1].stage if state.history else -1

    metadata = {
        "stop_reason": stop_reason,
        "stages_run": state.history[-1].stage + 1 if state.history else 0,
        "inner_iters_total": inner_total,
        "best_stage": best_stage,
        "best_val_err": None if val is None else best_err,
        "unconverged_points": unconverged_points,
        "seed": cfg.seed,
    }
    model = _assemble(cfg, centers, W_final, ova_final, metadata)
    return model, state


def map_subgrad_steps(W, phi, U, b, T, Cs, lam, steps: int, step0: float,
                      step_offset: int = 0):
    """Normalized subgradient descent on lam ||W||^2 + hinge terms, W only.

    Step t uses length step0 / sqrt(step_offset + t + 1).  Returns the new W
    and the advanced step counter.  With U = 0 the hinge part is constant in
    W, so the iterates just shrink W toward 0.
    """
    W = np.asarray(W, dtype=np.float64).copy()
    for t in range(steps):
        FX = W @ phi
        margins = T * (FX.T @ U.T + b)
        viol = (margins < 1.0).astype(np.float64) * T              # N x K
        grad = 2.0 * lam * W - (U.T * Cs) @ viol.T @ phi.T
        gn = float(np.sqrt(np.sum(grad * grad)))
        if gn > 0:
            W -= (step0 / np.sqrt(step_offset + t + 1.0)) * grad / gn
    return W, step_offset + steps


def two_step_baseline(cfg: TrainConfig, train: Dataset, wall_budget_seconds: float,
                      subgrad_steps: int = 25, step0: float = 0.5):
    """Alternation without auxiliary coordinates, for head-to-head comparisons.

    The machine step is the usual SVM fit on the current map outputs; the map
    step takes normalized subgradient steps on the nested objective's
    W-dependent part (lam ||W||^2 + hinge terms) with the fixed schedule
    step0 / sqrt(t+1).  Runs until the wall budget is spent and returns the
    model plus a [(seconds, nested objective)] trace.
    """
    if cfg.basis_count is None:
        raise ValueError("two_step_baseline needs RBF features")
    X, y, K = train.X, train.y, train.class_count
    centers = _fit_features(cfg, X)
    phi = design_matrix(X, centers)
    cache = ridge.build_gram(phi)
    T = svm.class_targets(y, K)
    Cs = np.full(K, cfg.C)

    Z = init_coords(cfg, y, K)
    W = ridge.solve_weights(cache, phi, Z.T, cfg.lam, cfg.mu0)

    t0 = time.perf_counter()
    trace = []
    ova = None
    step_counter = 0
    while True:
        ova = svm.train_ova(W @ phi, y, cfg.C, cfg.svm_tol, cfg.svm_max_epochs,
                            threads=cfg.threads)
        trace.append((time.perf_counter() - t0,
                      nested_objective(cfg.lam, W, ova, phi, T)))
        if trace[-1][0] >= wall_budget_seconds:
            break

        U = np.stack([m.w for m in ova.machines])
        b = np.array([m.b for m in ova.machines])
        W, step_counter = map_subgrad_steps(W, phi, U, b, T, Cs, cfg.lam,
                                            subgrad_steps, step0, step_counter)
        trace.append((time.perf_counter() - t0,
                      nested_objective(cfg.lam, W, ova, phi, T)))
        if trace[-1][0] >= wall_budget_seconds:
            break

    metadata = {"stop_reason": "budget", "seconds": trace[-1][0],
                "steps": step_counter, "seed": cfg.seed}
    model = _assemble(cfg, centers, W, ova, metadata)
    return model, trace
