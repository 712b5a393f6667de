"""Per-point auxiliary-coordinate updates.

Each training point owns a latent coordinate z that is pulled toward the
current map output Fx while respecting the margins of the K one-vs-all
machines.  The per-point problem is

    min ||z - Fx||^2 + sum_k c_k xi_k
    s.t. t_k (w_k'z + b_k) >= 1 - xi_k,  xi_k >= 0,

with t_k the +-1 target of machine k and c_k > 0 a penalty weight.  Its dual
is a K-variable box QP: maximize -1/4 l'Gl + r'l over l in prod [0, c_k],
with G_jk = t_j t_k w_j'w_k and r_k = 1 - t_k (w_k'Fx + b_k); the primal
solution is recovered as z = Fx + 1/2 sum_k l_k t_k w_k.

For one machine the dual is scalar and has a closed form (solve_point_binary);
for several machines cyclic coordinate ascent converges on the tiny box QP
(solve_point / solve_points).  solve_point_exhaustive enumerates bound
patterns and is the exactness oracle the iterative solvers are tested
against.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ON_CORRECT_SIDE = "on-correct-side"
ON_MARGIN = "projected-to-margin"
CAPPED = "capped"

_DEGENERATE_WNORM = 1e-30
MAX_ORACLE_MACHINES = 12


@dataclass
class CoordResult:
    """Solution of one per-point problem.

    xi and the multipliers have one entry per machine; lam is the margin
    multiplier (lam2 = c - lam is the slack-positivity multiplier).
    case_tag classifies each machine: on-correct-side (lam = 0),
    projected-to-margin (interior), capped (lam at its box cap).
    """

    z: np.ndarray
    xi: np.ndarray
    case_tag: list
    lam: np.ndarray
    lam2: np.ndarray
    gap: float = 0.0
    converged: bool = True
    dual_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if np.any(self.xi < 0):
            raise ValueError("xi must be nonnegative")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("z must be finite")


def _tag(lam_k: float, cap: float) -> str:
    if lam_k <= 0.0:
        return ON_CORRECT_SIDE
    if lam_k >= cap:
        return CAPPED
    return ON_MARGIN


def solve_point_binary(fx: np.ndarray, y: float, w: np.ndarray, b: float,
                       c: float) -> CoordResult:
    """Closed-form single-machine update.

    With margin m = y (w'Fx + b): if m >= 1 the point stays put; otherwise
    lam = min(2 (1 - m) / w'w, c) and z moves along y*w by lam/2.  A machine
    with w'w < 1e-30 cannot move z at all, so z = Fx and the slack is
    whatever the bias alone leaves.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    fx = np.asarray(fx, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    wn = float(w @ w)
    m = y * (float(w @ fx) + b)

    if wn < _DEGENERATE_WNORM:
        # Constraint is independent of z; dual is linear with slope 1 - m.
        lam = c if m < 1.0 else 0.0
        xi = max(0.0, 1.0 - y * b)
        return CoordResult(z=fx.copy(), xi=np.array([xi]),
                           case_tag=[_tag(lam, c)], lam=np.array([lam]),
                           lam2=np.array([c - lam]))

    if m >= 1.0:
        return CoordResult(z=fx.copy(), xi=np.array([0.0]),
                           case_tag=[ON_CORRECT_SIDE], lam=np.array([0.0]),
                           lam2=np.array([c]))

    lam = min(2.0 * (1.0 - m) / wn, c)
    z = fx + (lam / 2.0) * y * w
    xi = max(0.0, 1.0 - y * (float(w @ z) + b))
    tag = ON_MARGIN if lam < c else CAPPED
    return CoordResult(z=z, xi=np.array([xi]), case_tag=[tag],
                       lam=np.array([lam]), lam2=np.array([c - lam]))


def _machine_arrays(ova):
    U = np.stack([m.w for m in ova.machines])
    b = np.array([m.b for m in ova.machines])
    return U, b


def _finish(fx, U, b, T, c, lam, gap, converged, dual_trace=None):
    v = 0.5 * (lam * T) @ U
    z = fx + v
    margins = T * (U @ z + b)
    xi = np.maximum(0.0, 1.0 - margins)
    tags = [_tag(lam[k], c[k]) for k in range(len(c))]
    return CoordResult(z=z, xi=xi, case_tag=tags, lam=lam.copy(),
                       lam2=c - lam, gap=float(gap), converged=converged,
                       dual_trace=dual_trace or [])


def solve_point(fx: np.ndarray, ova, targets, c, tol: float = 1e-10,
                max_sweeps: int = 10000) -> CoordResult:
    """Multi-machine update by cyclic coordinate ascent on the dual.

    Sweeps run until both the largest coordinate update and the primal-dual
    gap fall under ``tol`` (gap relative to 1 + primal); a point that never
    gets there within ``max_sweeps`` comes back with ``converged`` False,
    never silently.  The per-sweep dual values are recorded in dual_trace.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    fx = np.asarray(fx, dtype=np.float64)
    U, b = _machine_arrays(ova)
    T = np.asarray(targets, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    K = U.shape[0]
    if T.shape != (K,) or c.shape != (K,):
        raise ValueError("targets and c must have one entry per machine")
    if np.any(c <= 0):
        raise ValueError("penalty constants must be positive")

    S = U @ U.T
    sdiag = np.diag(S).copy()
    r = 1.0 - T * (U @ fx + b)
    G = np.outer(T, T) * S

    lam = np.zeros(K)
    prev1 = lam.copy()
    prev2 = lam.copy()
    dual_trace = []
    converged = False
    gap = np.inf
    for _ in range(max_sweeps):
        prev2, prev1 = prev1, lam.copy()
        maxupd = 0.0
        for k in range(K):
            if sdiag[k] > 0.0:
                off = float(G[k] @ lam) - sdiag[k] * lam[k]
                new = (2.0 * r[k] - off) / sdiag[k]
                new = min(max(new, 0.0), c[k])
            else:
                new = c[k] if r[k] > 0.0 else 0.0
            maxupd = max(maxupd, abs(new - lam[k]))
            lam[k] = new
        v = 0.5 * (lam * T) @ U
        pen = float(v @ v)
        margins = T * (U @ (fx + v) + b)
        xi = np.maximum(0.0, 1.0 - margins)
        primal = pen + float(xi @ c)
        dual = -pen + float(r @ lam)
        gap = primal - dual
        dual_trace.append(dual)
        if maxupd < tol and gap <= tol * (1.0 + primal):
            converged = True
            break
        # Bitwise repeat of a state one or two sweeps back means the iteration
        # is exactly periodic from here on; more sweeps cannot close the gap.
        if np.array_equal(lam, prev1) or np.array_equal(lam, prev2):
            break
    return _finish(fx, U, b, T, c, lam, gap, converged, dual_trace)


def solve_points(FX: np.ndarray, T: np.ndarray, U: np.ndarray, b: np.ndarray,
                 c: np.ndarray, tol: float = 1e-10, max_sweeps: int = 10000):
    """Vectorized solve_point over a batch of points.

    FX is L x N (map outputs as columns), T is N x K targets.  Rows are
    independent: each point sweeps until its own update size and gap pass
    ``tol`` and is then frozen, so results do not depend on how a batch is
    partitioned.  Returns (Z: N x L, Xi: N x K, Lam: N x K, converged: N bool).
    """
    FXr = np.ascontiguousarray(FX.T, dtype=np.float64)      # N x L rows
    T = np.asarray(T, dtype=np.float64)
    N, K = T.shape
    L = U.shape[1]
    S = U @ U.T
    sdiag = np.diag(S).copy()

    # All per-row reductions below accumulate in a fixed scalar order over the
    # small K/L axes instead of calling into matmul: BLAS may pick a different
    # kernel (and summation order) per matrix shape, and the results here must
    # be bitwise independent of how a batch is partitioned across workers.
    def rows_dot(A, w):
        out = np.zeros(A.shape[0])
        for j in range(A.shape[1]):
            out += A[:, j] * w[j]
        return out

    def margins_of(Zrows, t):
        out = np.empty((Zrows.shape[0], K))
        for k in range(K):
            out[:, k] = t[:, k] * (rows_dot(Zrows, U[k]) + b[k])
        return out

    Z = np.empty_like(FXr)
    Xi = np.empty((N, K))
    Lam = np.zeros((N, K))
    done_flags = np.zeros(N, dtype=bool)

    act = np.arange(N)
    lam = np.zeros((N, K))
    prev1 = lam.copy()
    prev2 = lam.copy()
    r = 1.0 - margins_of(FXr, T)
    t = T
    for _ in range(max_sweeps):
        if len(act) == 0:
            break
        n_act = len(act)
        maxupd = np.zeros(n_act)
        prev2, prev1 = prev1, lam.copy()
        lt = lam * t
        for k in range(K):
            if sdiag[k] > 0.0:
                q = rows_dot(lt, S[:, k])
                off = t[:, k] * q - sdiag[k] * lam[:, k]
                new = np.clip((2.0 * r[:, k] - off) / sdiag[k], 0.0, c[k])
            else:
                new = np.where(r[:, k] > 0.0, c[k], 0.0)
            maxupd = np.maximum(maxupd, np.abs(new - lam[:, k]))
            lam[:, k] = new
            lt[:, k] = new * t[:, k]
        V = np.zeros((n_act, L))
        for j in range(K):
            V += lt[:, j:j + 1] * U[j]
        V *= 0.5
        pen = np.zeros(n_act)
        for l in range(L):
            pen += V[:, l] * V[:, l]
        zact = FXr[act] + V
        xi = np.maximum(0.0, 1.0 - margins_of(zact, t))
        primal = pen.copy()
        dual = -pen
        for k in range(K):
            primal = primal + xi[:, k] * c[k]
            dual = dual + r[:, k] * lam[:, k]
        done = (maxupd < tol) & (primal - dual <= tol * (1.0 + primal))
        # A row whose multipliers bitwise repeat a state one or two sweeps back
        # is exactly periodic; it can never pass the gap test, so freeze it
        # (flagged) instead of burning the remaining sweep budget.
        cyc = np.all(lam == prev1, axis=1) | np.all(lam == prev2, axis=1)
        out = done | cyc
        if np.any(out):
            rows = act[out]
            Z[rows] = zact[out]
            Xi[rows] = xi[out]
            Lam[rows] = lam[out]
            done_flags[rows] = done[out]
            keep = ~out
            act, lam, r, t = act[keep], lam[keep], r[keep], t[keep]
            prev1, prev2 = prev1[keep], prev2[keep]
    if len(act):
        # Ran out of sweeps; report the current iterates, flagged.
        V = np.zeros((len(act), L))
        for j in range(K):
            V += (lam * t)[:, j:j + 1] * U[j]
        V *= 0.5
        Z[act] = FXr[act] + V
        Xi[act] = np.maximum(0.0, 1.0 - margins_of(Z[act], t))
        Lam[act] = lam
    return Z, Xi, Lam, done_flags


def solve_point_exhaustive(fx: np.ndarray, ova, targets, c) -> CoordResult:
    """Exact solution by bound-pattern enumeration (oracle; K <= 12).

    Every machine's multiplier is either at 0, at its cap, or interior; for
    each of the 3^K patterns the interior block is solved from stationarity
    and the candidate's primal objective evaluated after clipping into the
    box.  Each candidate upper-bounds the optimum and the pattern of the true
    KKT point is always in the enumeration, so the best candidate is exact.
    """
    fx = np.asarray(fx, dtype=np.float64)
    U, b = _machine_arrays(ova)
    T = np.asarray(targets, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    K = U.shape[0]
    if K > MAX_ORACLE_MACHINES:
        raise ValueError(f"enumeration oracle limited to {MAX_ORACLE_MACHINES} machines")
    if np.any(c <= 0):
        raise ValueError("penalty constants must be positive")

    S = U @ U.T
    G = np.outer(T, T) * S
    r = 1.0 - T * (U @ fx + b)

    best_obj = np.inf
    best_lam = None
    for pattern in itertools.product((0, 1, 2), repeat=K):
        lam = np.zeros(K)
        interior = [k for k in range(K) if pattern[k] == 1]
        capped = [k for k in range(K) if pattern[k] == 2]
        lam[capped] = c[capped]
        if interior:
            A = G[np.ix_(interior, interior)]
            rhs = 2.0 * r[interior]
            if capped:
                rhs = rhs - G[np.ix_(interior, capped)] @ lam[capped]
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            lam[interior] = sol
        lam = np.clip(lam, 0.0, c)
        v = 0.5 * (lam * T) @ U
        margins = T * (U @ (fx + v) + b)
        xi = np.maximum(0.0, 1.0 - margins)
        obj = float(v @ v) + float(xi @ c)
        if obj < best_obj:
            best_obj = obj
            best_lam = lam
    return _finish(fx, U, b, T, c, best_lam, 0.0, True)


def objective(fx, U, b, T, c, z) -> float:
    """Primal value ||z - fx||^2 + sum_k c_k max(0, 1 - t_k(w_k'z + b_k))."""
    fx = np.asarray(fx, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    margins = np.asarray(T) * (U @ z + np.asarray(b))
    xi = np.maximum(0.0, 1.0 - margins)
    d = z - fx
    return float(d @ d) + float(xi @ np.asarray(c))
