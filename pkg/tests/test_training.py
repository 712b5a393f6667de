import numpy as np
import pytest

from macsvm.data import gen_spirals
from macsvm.features import design_matrix
from macsvm.ridge import NumericError
from macsvm.svm import BinarySvm, OvaSvm, class_targets, train_ova
from macsvm.training import (TrainConfig, init_coords, map_subgrad_steps,
                             nested_objective, penalty_objective,
                             predict_collapsed, predict_two_stage,
                             simplex_vertices, train_mac, two_step_baseline)
import macsvm.training as training


def make_ova(U, b):
    machines = [BinarySvm(w=np.asarray(w, dtype=float), b=float(bk), C=1.0)
                for w, bk in zip(U, b)]
    return OvaSvm(machines=machines, class_count=len(machines))


def test_simplex_triangle():
    V = simplex_vertices(3, 2, 1.0)
    assert np.allclose(V.mean(axis=0), 0.0, atol=1e-12)
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(np.linalg.norm(V[i] - V[j]) - 1.0) < 1e-12


def test_simplex_two_points_one_dim():
    V = simplex_vertices(2, 1, 3.0)
    assert abs(V[0, 0] + 1.5) < 1e-12           # class 0 on the negative side
    assert abs(V[1, 0] - 1.5) < 1e-12


def test_simplex_tetrahedron():
    V = simplex_vertices(4, 3, 2.0)
    d = [np.linalg.norm(V[i] - V[j]) for i in range(4) for j in range(i + 1, 4)]
    assert len(d) == 6
    assert max(abs(x - 2.0) for x in d) < 1e-10


def test_simplex_pads_extra_dims():
    V = simplex_vertices(3, 5, 1.0)
    assert V.shape == (3, 5)
    assert np.all(V[:, 2:] == 0)


def test_simplex_truncates_when_low_dim():
    V = simplex_vertices(4, 2, 1.0)
    assert V.shape == (4, 2)


def test_simplex_bad_args():
    with pytest.raises(ValueError):
        simplex_vertices(1, 2, 1.0)
    with pytest.raises(ValueError):
        simplex_vertices(3, 0, 1.0)
    with pytest.raises(ValueError):
        simplex_vertices(3, 2, 0.0)


def test_init_simplex_zero_scatter():
    from macsvm.baselines import within_class_scatter
    cfg = TrainConfig(latent_dim=2, init="simplex", simplex_scale=4.0)
    y = np.array([0, 1, 2, 0, 1, 2, 2])
    Z = init_coords(cfg, y, 3)
    assert within_class_scatter(Z, y) == 0.0
    verts = simplex_vertices(3, 2, 4.0)
    assert np.array_equal(Z[3], verts[0])


def test_init_random_deterministic():
    cfg = TrainConfig(latent_dim=3, init="random", seed=11)
    y = np.zeros(20, dtype=int)
    a = init_coords(cfg, y, 2)
    b = init_coords(cfg, y, 2)
    assert np.array_equal(a, b)
    cfg2 = TrainConfig(latent_dim=3, init="random", seed=12)
    assert not np.array_equal(a, init_coords(cfg2, y, 2))


def test_penalty_zero_slack_zero_penalty():
    # W = 0, Z = W phi = 0, margins from the biases alone exceed 1.
    ova = make_ova([[1.0, 0.0], [0.0, 1.0]], [1.5, 1.5])
    phi = np.random.default_rng(0).standard_normal((3, 4))
    W = np.zeros((2, 3))
    Z = np.zeros((4, 2))
    T = np.ones((4, 2))
    val = penalty_objective(0.7, W, ova, Z, None, 5.0, phi, targets=T)
    assert abs(val - 1.0) < 1e-12               # sum of 1/2 ||w_k||^2


def test_penalty_linear_in_mu():
    rng = np.random.default_rng(1)
    ova = make_ova(rng.standard_normal((2, 3)), rng.standard_normal(2))
    phi = rng.standard_normal((4, 6))
    W = rng.standard_normal((3, 4))
    Z = rng.standard_normal((6, 3))
    Xi = np.abs(rng.standard_normal((6, 2)))
    R = float(np.sum((Z.T - W @ phi) ** 2))
    a = penalty_objective(0.1, W, ova, Z, Xi, 2.0, phi)
    b = penalty_objective(0.1, W, ova, Z, Xi, 4.0, phi)
    assert abs((b - a) - 0.5 * 2.0 * R) < 1e-9 * (1.0 + abs(a))


def test_penalty_hand_two_point_instance():
    # One machine, L=1, M=1, N=2; every quantity small enough to do by hand.
    w, bias, lam, mu, cost = 2.0, -0.5, 0.25, 3.0, 1.5
    Wmat = np.array([[0.75]])
    phi = np.array([[1.0, -2.0]])
    Z = np.array([[0.5], [-1.0]])
    T = np.array([[1.0], [-1.0]])
    ova = make_ova([[w]], [bias])
    # slacks at the hinge optimum
    s1 = max(0.0, 1.0 - 1.0 * (w * 0.5 + bias))        # 1 - 0.5 = 0.5
    s2 = max(0.0, 1.0 - (-1.0) * (w * -1.0 + bias))    # 1 - 2.5 < 0 -> 0
    expect = (lam * 0.75 ** 2
              + 0.5 * w ** 2 + cost * (s1 + s2)
              + 0.5 * mu * ((0.5 - 0.75 * 1.0) ** 2 + (-1.0 - 0.75 * -2.0) ** 2))
    got = penalty_objective(lam, Wmat, ova, Z, None, mu, phi, C=cost, targets=T)
    assert abs(got - expect) < 1e-12


def test_penalty_requires_targets_when_xi_missing():
    ova = make_ova([[1.0]], [0.0])
    with pytest.raises(ValueError):
        penalty_objective(0.1, np.ones((1, 1)), ova, np.ones((1, 1)), None,
                          1.0, np.ones((1, 1)))


def test_nested_equals_penalty_on_constraint_manifold():
    rng = np.random.default_rng(2)
    ova = make_ova(rng.standard_normal((3, 2)), rng.standard_normal(3))
    phi = rng.standard_normal((5, 8))
    W = rng.standard_normal((2, 5))
    T = np.where(rng.random((8, 3)) < 0.5, 1.0, -1.0)
    Z = (W @ phi).T
    a = nested_objective(0.3, W, ova, phi, T)
    b = penalty_objective(0.3, W, ova, Z, None, 17.0, phi, targets=T)
    assert abs(a - b) < 1e-10


def test_nested_zero_slack_when_separated():
    verts = simplex_vertices(3, 2, 4.0)
    y = np.repeat(np.arange(3), 5)
    Z = verts[y].T
    ova = train_ova(Z, y, C=10.0, tol=1e-10, max_epochs=10000)
    phi = np.eye(15)
    W = Z.copy()
    T = class_targets(y, 3)
    got = nested_objective(0.0, W, ova, phi, T)
    base = sum(0.5 * float(m.w @ m.w) for m in ova.machines)
    assert abs(got - base) < 1e-6               # slack term vanishes


def test_nested_matches_duplicate_formula():
    rng = np.random.default_rng(3)
    for _ in range(20):
        K, L, M, N = 3, 2, 4, 7
        U = rng.standard_normal((K, L))
        bs = rng.standard_normal(K)
        ova = make_ova(U, bs)
        phi = rng.standard_normal((M, N))
        W = rng.standard_normal((L, M))
        T = np.where(rng.random((N, K)) < 0.5, 1.0, -1.0)
        lam, cost = 0.05, 2.0
        # independent re-derivation, scalar loops
        val = lam * sum(W[i, j] ** 2 for i in range(L) for j in range(M))
        for k in range(K):
            val += 0.5 * sum(U[k, l] ** 2 for l in range(L))
            for n in range(N):
                fx = [sum(W[l, m] * phi[m, n] for m in range(M)) for l in range(L)]
                sc = sum(U[k, l] * fx[l] for l in range(L)) + bs[k]
                val += cost * max(0.0, 1.0 - T[n, k] * sc)
        got = nested_objective(lam, W, ova, phi, T, C=cost)
        assert abs(got - val) <= 1e-9 * (1.0 + abs(val))


def test_collapse_identity_map():
    from macsvm.training import TrainedModel, collapse
    from macsvm.features import RbfMapParams
    U = np.array([[1.0, -2.0], [0.5, 3.0]])
    model = TrainedModel(map=RbfMapParams(centers=None, W=np.eye(2)),
                         svms=make_ova(U, [0.1, -0.2]),
                         collapsed=(None, None))
    V, b = collapse(model)
    assert np.array_equal(V, U)
    assert np.array_equal(b, [0.1, -0.2])


def test_collapsed_predictions_match_two_stage():
    ds = gen_spirals(3, 60, seed=4)
    cfg = TrainConfig(latent_dim=2, basis_count=30, sigma=0.3, lam=1e-3,
                      C=10.0, mu_max_stages=3, inner_max_iters=10, seed=1)
    model, _ = train_mac(cfg, ds)
    rng = np.random.default_rng(5)
    Xq = rng.uniform(-1.5, 1.5, size=(100, 2))
    assert np.array_equal(predict_two_stage(model, Xq), predict_collapsed(model, Xq))
    phi = design_matrix(Xq, model.map.centers)
    s1 = np.stack([m.w for m in model.svms.machines]) @ (model.map.W @ phi)
    V, _ = model.collapsed
    s2 = V @ phi
    assert np.max(np.abs(s1 - s2)) < 1e-12


def test_train_mu_schedule():
    ds = gen_spirals(2, 40, seed=0)
    cfg = TrainConfig(latent_dim=2, basis_count=10, sigma=0.4, mu_max_stages=4,
                      inner_max_iters=3, seed=0)
    _, state = train_mac(cfg, ds)
    mus = []
    for h in state.history:
        if not mus or h.mu != mus[-1]:
            mus.append(h.mu)
    assert mus[:4] == [2.0, 3.0, 4.5, 6.75]


def test_train_reaches_zero_error_small_spirals():
    ds = gen_spirals(2, 200, seed=0)
    cfg = TrainConfig(latent_dim=2, basis_count=60, sigma=0.25, lam=1e-4,
                      C=100.0, mu_max_stages=6, seed=0)
    model, state = train_mac(cfg, ds)
    assert state.history[-1].train_err == 0.0
    assert np.mean(predict_collapsed(model, ds.X) != ds.y) == 0.0


def test_train_threads_bitwise_identical():
    ds = gen_spirals(3, 70, seed=2)
    cfg1 = TrainConfig(latent_dim=2, basis_count=25, sigma=0.3, mu_max_stages=3,
                       inner_max_iters=8, seed=3, threads=1)
    cfg4 = TrainConfig(latent_dim=2, basis_count=25, sigma=0.3, mu_max_stages=3,
                       inner_max_iters=8, seed=3, threads=4)
    m1, s1 = train_mac(cfg1, ds)
    m4, s4 = train_mac(cfg4, ds)
    assert np.array_equal(m1.map.W, m4.map.W)
    for a, b in zip(m1.svms.machines, m4.svms.machines):
        assert np.array_equal(a.w, b.w) and a.b == b.b
    assert np.array_equal(s1.Z, s4.Z)


def test_train_step_trace_monotone_within_stage():
    ds = gen_spirals(2, 100, seed=5)
    cfg = TrainConfig(latent_dim=2, basis_count=20, sigma=0.3, mu_max_stages=3,
                      inner_max_iters=10, seed=0)
    _, state = train_mac(cfg, ds)
    recs = state.step_trace
    assert recs, "expected step records"
    for prev, cur in zip(recs, recs[1:]):
        if cur.stage != prev.stage:
            continue                             # mu changed between stages
        slack = 1e-9 * (1.0 + abs(prev.penalty_obj)) + cur.solver_slack
        assert cur.penalty_obj <= prev.penalty_obj + slack


def test_train_residual_shrinks():
    ds = gen_spirals(2, 150, seed=1)
    cfg = TrainConfig(latent_dim=2, basis_count=40, sigma=0.25, lam=1e-4,
                      C=50.0, mu_max_stages=8, seed=0)
    _, state = train_mac(cfg, ds)
    assert state.history[-1].residual < state.history[0].residual


def test_train_validation_early_stop():
    ds = gen_spirals(2, 150, seed=3)
    from macsvm.data import SplitSpec, split
    tr, va = split(ds, SplitSpec([0.8, 0.2], seed=0))
    cfg = TrainConfig(latent_dim=2, basis_count=40, sigma=0.25, lam=1e-4,
                      C=50.0, mu_max_stages=15, patience=1, seed=0)
    model, state = train_mac(cfg, tr, va)
    assert model.metadata["stop_reason"] in ("early_stop", "stages_exhausted")
    assert model.metadata["best_stage"] >= 0
    assert np.isfinite(model.metadata["best_val_err"])
    assert not np.isnan(state.history[-1].val_err)


def test_train_aborts_on_non_finite(monkeypatch):
    ds = gen_spirals(2, 40, seed=0)
    real = training.ridge.solve_weights
    calls = {"n": 0}

    def poisoned(cache, phi, Z, lam, mu):
        calls["n"] += 1
        W = real(cache, phi, Z, lam, mu)
        if calls["n"] >= 2:
            W = W.copy()
            W[0, 0] = np.inf
        return W

    monkeypatch.setattr(training.ridge, "solve_weights", poisoned)
    cfg = TrainConfig(latent_dim=2, basis_count=10, sigma=0.4, mu_max_stages=2,
                      inner_max_iters=3, seed=0)
    with pytest.raises(NumericError, match="stage"):
        train_mac(cfg, ds)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=0)
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=2, sigma=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=2, sigma="median")
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=2, mu_factor=1.0)
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=2, init="kmeans")
    with pytest.raises(ValueError):
        TrainConfig(latent_dim=2, C=0.0)


def test_subgrad_with_zero_machines_shrinks_W():
    rng = np.random.default_rng(6)
    phi = rng.standard_normal((5, 30))
    W0 = rng.standard_normal((2, 5))
    W0 *= 1.0 / np.linalg.norm(W0)
    U = np.zeros((3, 2))
    b = np.zeros(3)
    T = np.where(rng.random((30, 3)) < 0.5, 1.0, -1.0)
    Cs = np.ones(3)
    W, steps = map_subgrad_steps(W0, phi, U, b, T, Cs, lam=0.5, steps=200, step0=0.5)
    assert steps == 200
    assert np.linalg.norm(W) < 0.1


def test_two_step_zero_slack_on_collapsed_simplex():
    # Coordinates already at a well-separated simplex: one machine fit has no slack.
    verts = simplex_vertices(3, 2, 4.0)
    y = np.repeat(np.arange(3), 8)
    Z = verts[y].T
    ova = train_ova(Z, y, C=10.0, tol=1e-10, max_epochs=10000)
    T = class_targets(y, 3)
    scores = np.stack([m.w for m in ova.machines]) @ Z
    bvec = np.array([m.b for m in ova.machines])
    hinges = np.maximum(0.0, 1.0 - T * (scores + bvec[:, None]).T)
    assert np.sum(hinges) < 1e-6


def test_two_step_baseline_runs_and_traces():
    ds = gen_spirals(2, 100, seed=7)
    cfg = TrainConfig(latent_dim=2, basis_count=20, sigma=0.3, seed=0)
    model, trace = two_step_baseline(cfg, ds, wall_budget_seconds=1.0,
                                     subgrad_steps=5)
    assert len(trace) >= 2
    times = [t for t, _ in trace]
    assert all(b >= a for a, b in zip(times, times[1:]))
    assert trace[-1][0] >= 1.0
    assert model.metadata["stop_reason"] == "budget"
    objs = [o for _, o in trace]
    assert all(np.isfinite(o) for o in objs)


def test_two_step_requires_rbf():
    ds = gen_spirals(2, 30, seed=0)
    cfg = TrainConfig(latent_dim=2, basis_count=None)
    with pytest.raises(ValueError):
        two_step_baseline(cfg, ds, 0.1)
