import math

import numpy as np
import pytest

from bfcluster.hierarchy import build_hierarchy
from bfcluster.partition import organize, plan_partition
from bfcluster.regress import (
    ConvergenceError,
    Kernel,
    LinearModel,
    RegressionEnsemble,
    dual_objective,
    evaluate,
    fit_ensemble,
    load_ensemble,
    route,
    route_batch,
    save_ensemble,
    solve_svr_dual,
    train_krr,
    train_lr,
    train_svr,
    tune,
)


# -- linear regression ------------------------------------------------------


def test_lr_exact_line():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    m = train_lr(X, 2 * X[:, 0])
    np.testing.assert_allclose(m.w, [2.0, 0.0], atol=1e-10)


def test_lr_constant_target():
    X = np.random.default_rng(1).normal(size=(10, 3))
    m = train_lr(X, np.full(10, 4.0))
    np.testing.assert_allclose(m.predict(X), 4.0, atol=1e-9)


def test_lr_against_lstsq(rng):
    X = rng.normal(size=(50, 5))
    y = X @ rng.normal(size=5) + rng.normal(size=50)
    A = np.hstack([X, np.ones((50, 1))])
    w_ref = np.linalg.lstsq(A, y, rcond=None)[0]
    np.testing.assert_allclose(train_lr(X, y).w, w_ref, rtol=0, atol=1e-8)


def test_lr_gradient_vanishes(rng):
    X = rng.normal(size=(80, 4)) * [1, 10, 0.1, 3]
    y = rng.normal(size=80)
    w = train_lr(X, y).w
    A = np.hstack([X, np.ones((80, 1))])
    grad = A.T @ (A @ w - y)
    assert np.linalg.norm(grad) <= 1e-8 * np.linalg.norm(A.T @ y)


def test_lr_rank_deficient_still_solves():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    m = train_lr(X, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(m.predict(X), [1.0, 2.0, 3.0], atol=1e-6)


def test_lr_shape_errors():
    with pytest.raises(ValueError):
        train_lr(np.zeros((3, 2)), np.zeros(4))


# -- kernel ridge -----------------------------------------------------------


def test_krr_scalar():
    m = train_krr([[1.0]], [2.0], lam=1.0, kernel=Kernel("linear"))
    assert m.alpha.tolist() == pytest.approx([1.0], abs=1e-12)


def test_krr_large_lambda_shrinks(rng):
    X = rng.normal(size=(20, 2))
    y = rng.normal(size=20)
    lam = 1e6
    m = train_krr(X, y, lam=lam, kernel=Kernel("rbf", 1.0))
    assert np.linalg.norm(m.alpha) <= np.linalg.norm(y) / lam * (1 + 1e-9)


def test_krr_matches_dense_solve(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    k = Kernel("rbf", 1.3)
    K = np.array([[math.exp(-sum((a - b) ** 2 for a, b in zip(xi, xj)) / (2 * 1.3**2)) for xj in X] for xi in X])
    alpha_ref = np.linalg.solve(K + 0.1 * np.eye(30), y)
    np.testing.assert_allclose(train_krr(X, y, 0.1, k).alpha, alpha_ref, rtol=1e-8, atol=1e-10)


def test_krr_residual_invariant(rng):
    for _ in range(100):
        m, d = int(rng.integers(2, 40)), int(rng.integers(1, 5))
        X, y = rng.normal(size=(m, d)), rng.normal(size=m)
        lam = 10 ** rng.uniform(-4, 1)
        k = Kernel("rbf", float(rng.uniform(0.3, 3)))
        model = train_krr(X, y, lam, k)
        r = (k(X, X) + lam * np.eye(m)) @ model.alpha - y
        assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(y)


def test_krr_centering(rng):
    X = rng.normal(size=(15, 2))
    y = rng.normal(size=15) + 100.0
    m = train_krr(X, y, 1e-3, Kernel("rbf", 1.0), center=True)
    assert m.offset == pytest.approx(y.mean())
    plain = train_krr(X, y - y.mean(), 1e-3, Kernel("rbf", 1.0))
    np.testing.assert_allclose(m.predict(X), plain.predict(X) + y.mean(), rtol=1e-12)


def test_krr_rejects_bad_lambda():
    with pytest.raises(ValueError):
        train_krr([[0.0]], [1.0], lam=0.0)


# -- support vector regression ----------------------------------------------


def test_svr_zero_solution():
    X = np.array([[0.0], [1.0], [2.0]])
    m = train_svr(X, [0.05, -0.05, 0.0], epsilon=0.1, C=1.0)
    assert m.coef.size == 0
    np.testing.assert_allclose(m.predict(X), 0.0, atol=0.1)


def grid_oracle(K, y, epsilon, C, steps=400):
    # beta_3 = -beta_1 - beta_2 keeps the equality constraint
    b = np.linspace(-C, C, steps + 1)
    B1, B2 = np.meshgrid(b, b, indexing="ij")
    B3 = -B1 - B2
    ok = np.abs(B3) <= C + 1e-12
    beta = np.stack([B1[ok], B2[ok], B3[ok]], axis=1)
    quad = 0.5 * np.einsum("ni,ij,nj->n", beta, K, beta)
    obj = quad - beta @ y + epsilon * np.abs(beta).sum(axis=1)
    return float(obj.min())


def test_svr_three_point_grid_oracle():
    X = np.array([[0.0], [1.0], [2.5]])
    y = np.array([0.0, 1.0, 0.2])
    for eps, C in [(0.1, 1.0), (0.0, 0.5), (0.3, 2.0)]:
        K = Kernel("rbf", 1.0)(X, X)
        res = solve_svr_dual(K, y, eps, C, tol=1e-6)
        ours = dual_objective(K, y, res.coef, eps)
        assert ours == pytest.approx(res.objective, abs=1e-12)
        assert ours <= grid_oracle(K, y, eps, C) + 1e-3


def kkt_check(K, y, res, eps, C, tol):
    beta = res.coef
    f = K @ beta - res.rho
    r = f - y
    assert abs(beta.sum()) <= 1e-9 * max(1.0, C)
    assert np.all(res.alpha >= 0) and np.all(res.alpha <= C)
    assert np.all(res.alpha_star >= 0) and np.all(res.alpha_star <= C)
    assert np.all(res.alpha * res.alpha_star == 0)
    inner = beta == 0
    assert np.all(np.abs(r[inner]) <= eps + tol)
    free_pos = (res.alpha > 0) & (res.alpha < C)
    free_neg = (res.alpha_star > 0) & (res.alpha_star < C)
    np.testing.assert_allclose(r[free_pos], -eps, atol=tol)
    np.testing.assert_allclose(r[free_neg], eps, atol=tol)


def test_svr_kkt(rng):
    for _ in range(10):
        m = int(rng.integers(5, 60))
        X = rng.normal(size=(m, 2))
        y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=m)
        K = Kernel("rbf", 1.0)(X, X)
        eps, C = 0.1, float(rng.choice([0.1, 1.0, 10.0]))
        res = solve_svr_dual(K, y, eps, C, tol=1e-4)
        kkt_check(K, y, res, eps, C, tol=1e-3)


def test_svr_duplicate_of_training_point():
    X = np.linspace(0, 3, 12).reshape(-1, 1)
    y = np.sin(2 * X[:, 0])
    eps = 0.05
    m = train_svr(X, y, epsilon=eps, C=1000.0, kernel=Kernel("rbf", 0.4), tol=1e-6)
    assert abs(m.predict(X[4:5])[0] - y[4]) <= eps + 1e-3


def test_svr_agrees_with_krr_on_easy_data(rng):
    X = rng.uniform(-2, 2, size=(60, 1))
    y = X[:, 0] ** 2
    k = Kernel("rbf", 0.8)
    svr = train_svr(X, y, epsilon=0.01, C=100.0, kernel=k, center=True)
    krr = train_krr(X, y, 1e-4, k, center=True)
    Xt = np.linspace(-1.8, 1.8, 20).reshape(-1, 1)
    np.testing.assert_allclose(svr.predict(Xt), krr.predict(Xt), atol=0.05)


def test_svr_iteration_cap():
    X = np.random.default_rng(3).normal(size=(30, 2))
    y = np.random.default_rng(4).normal(size=30)
    with pytest.raises(ConvergenceError) as info:
        solve_svr_dual(Kernel("rbf", 1.0)(X, X), y, 0.01, 100.0, max_iter=2)
    assert info.value.iterations == 2 and info.value.gap > 1e-3


def test_svr_argument_errors():
    with pytest.raises(ValueError):
        solve_svr_dual(np.eye(2), [0.0, 1.0], -0.1, 1.0)
    with pytest.raises(ValueError):
        solve_svr_dual(np.eye(2), [0.0, 1.0], 0.1, 0.0)


# -- routing and evaluation -------------------------------------------------


def test_route_basics():
    centers = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 5.0]])
    assert route([0.0, 0.0], centers) == 0
    assert route([2.0, 0.0], centers) == 1
    assert route([1.0, 0.0], centers) == 0  # equidistant: lower index
    assert route([1.9, 4.0], centers) == 2


def test_route_batch_against_scan(rng):
    centers = rng.normal(size=(17, 3))
    X = rng.normal(size=(600, 3))
    ours = route_batch(X, centers, workers=4)
    for x, g in zip(X, ours):
        dists = [math.dist(x, c) for c in centers]
        assert g == dists.index(min(dists))


def test_route_scale_invariant(rng):
    centers = rng.normal(size=(9, 2))
    X = rng.normal(size=(100, 2))
    assert np.array_equal(route_batch(X, centers), route_batch(X * 8.0, centers * 8.0))


def toy_ensemble(p=2):
    # two groups, each predicting a constant
    return RegressionEnsemble(
        kind="lr", params={}, base_sigma=1.0,
        centers=np.array([[0.0], [10.0]]),
        process=np.array([0, p - 1]),
        models=[LinearModel(np.array([0.0, 1.0])), LinearModel(np.array([0.0, 5.0]))],
        p=p,
    )


def test_evaluate_mse():
    ens = toy_ensemble()
    # predictions 1, 1, 5 against truths 0, 2, 3 give errors 1, -1, 2
    rep = evaluate([[0.5], [1.0], [9.0]], [0.0, 2.0, 3.0], ens)
    assert rep.mse == pytest.approx(2.0, abs=1e-12)
    assert rep.process_counts == [2, 1]
    assert rep.process_errors == [2.0, 4.0]


def test_evaluate_perfect():
    rep = evaluate([[0.0], [10.0]], [1.0, 5.0], toy_ensemble())
    assert rep.mse == 0.0


def test_evaluate_errors():
    with pytest.raises(ValueError):
        evaluate([[0.0]], [1.0, 2.0], toy_ensemble())
    with pytest.raises(ValueError):
        evaluate(np.zeros((0, 1)), [], toy_ensemble())


@pytest.fixture(scope="module")
def small_problem():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 3))
    y = np.sin(X[:, 0]) + X[:, 1] ** 2 + 0.1 * rng.normal(size=400)
    h = build_hierarchy(X)
    return X, y, h, organize(X, h, y)


@pytest.mark.parametrize("kind,params", [("lr", {}), ("krr", {"lam": 0.01}), ("svr", {"C": 10.0, "epsilon": 0.1})])
def test_mse_independent_of_p(small_problem, kind, params):
    X, y, h, org = small_problem
    Xt = np.random.default_rng(8).normal(size=(200, 3))
    yt = np.sin(Xt[:, 0]) + Xt[:, 1] ** 2
    results = []
    for p in (1, 2, 4, 8):
        plan = plan_partition(org, h, p, group_size=50)
        ens = fit_ensemble(org, plan, kind, params, workers=p)
        results.append(evaluate(Xt, yt, ens, workers=p).mse)
    assert max(results) - min(results) <= 1e-12 * max(results)


def test_tune_picks_lowest_validation(small_problem):
    X, y, h, org = small_problem
    plan = plan_partition(org, h, 2, group_size=80)
    best, scores = tune(org, plan, "krr", {"lam": [1e-3, 1.0, 100.0]}, seed=0)
    assert best == min(scores, key=lambda s: s[1])[0]
    again, _ = tune(org, plan, "krr", {"lam": [1e-3, 1.0, 100.0]}, seed=0)
    assert again == best


@pytest.mark.parametrize("kind,params", [("lr", {}), ("krr", {"lam": 0.1}), ("svr", {"C": 1.0, "epsilon": 0.1})])
def test_roundtrip(tmp_path, small_problem, kind, params):
    X, y, h, org = small_problem
    plan = plan_partition(org, h, 3, group_size=60)
    ens = fit_ensemble(org, plan, kind, params)
    ens.feature_mean, ens.feature_scale = np.zeros(3), np.ones(3)
    path = tmp_path / "e.bin"
    save_ensemble(path, ens)
    back = load_ensemble(path)
    assert back.kind == kind and back.p == 3 and back.params == params
    np.testing.assert_array_equal(back.centers, ens.centers)
    np.testing.assert_array_equal(back.process, ens.process)
    Xt = np.random.default_rng(2).normal(size=(50, 3))
    assert back.predict(Xt).tobytes() == ens.predict(Xt).tobytes()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not an ensemble")
    with pytest.raises(ValueError):
        load_ensemble(path)
