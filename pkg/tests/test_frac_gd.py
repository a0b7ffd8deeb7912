import time

import numpy as np
import pytest

from fracop.frac_gd import DescentConfig, Objective, descend, fractional_gradient, random_problem


def _classical_gd(obj, x0, step, iters):
    x = np.array(x0, dtype=float)
    xs = [x.copy()]
    for _ in range(iters):
        x = x - step * (obj.A @ x - obj.b)
        xs.append(x.copy())
    return xs


def test_objective_validation():
    with pytest.raises(ValueError):
        Objective([[1, 2], [0, 1]], [0, 0])
    with pytest.raises(ValueError):
        Objective([[1, 0], [0, -1]], [0, 0])
    with pytest.raises(ValueError):
        Objective([[1.0]], [0.0], lam=-1)
    with pytest.raises(ValueError):
        Objective([[1.0]], [0.0, 1.0])


@pytest.mark.parametrize("kw", [{"alpha": 0.0}, {"alpha": 1.5}, {"step": 0.0}, {"base_offset": 0.0}, {"max_iters": -1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        DescentConfig(**kw)


def test_gradient_examples():
    obj = Objective([[2.0]], [0.0])
    g = fractional_gradient(obj, [1.0], DescentConfig(alpha=1.0))
    assert g[0] == pytest.approx(2.0, abs=1e-6)
    g = fractional_gradient(obj, [1.0], DescentConfig(alpha=0.5, base_offset=1.0))
    assert g[0] == pytest.approx(1.5045055561, rel=1e-4)
    lasso = Objective([[2.0]], [0.0], lam=1.0)
    g = fractional_gradient(lasso, [0.0], DescentConfig(alpha=0.5))
    assert np.isfinite(g[0])


def test_alpha_one_matches_analytic_gradient():
    obj = random_problem(3, seed=11, lam=0.3)
    rng = np.random.default_rng(5)
    cfg = DescentConfig(alpha=1.0)
    for _ in range(20):
        x = rng.uniform(-2, 2, 3)
        x[np.abs(x) < 1e-3] = 0.5
        np.testing.assert_allclose(fractional_gradient(obj, x, cfg), obj.gradient(x), atol=1e-6)


def test_gradient_rejects_bad_point():
    obj = random_problem(2, seed=1)
    with pytest.raises(ValueError):
        fractional_gradient(obj, [np.nan, 0.0], DescentConfig())
    with pytest.raises(ValueError):
        fractional_gradient(obj, [0.0], DescentConfig())


def test_converges_to_solution():
    obj = random_problem(2, seed=3)
    step = 1.0 / obj.max_eigenvalue()
    trace = descend(obj, np.zeros(2), DescentConfig(alpha=1.0, step=step, max_iters=2000, tolerance=1e-12))
    assert trace.status == "converged"
    np.testing.assert_allclose(trace.final, np.linalg.solve(obj.A, obj.b), atol=1e-9)


def test_alpha_one_matches_classical_trace():
    obj = random_problem(2, seed=7)
    step = 1.0 / obj.max_eigenvalue()
    start = time.perf_counter()
    trace = descend(obj, np.zeros(2), DescentConfig(alpha=1.0, step=step, max_iters=100, tolerance=0.0))
    elapsed = time.perf_counter() - start
    ref = _classical_gd(obj, np.zeros(2), step, 100)
    assert len(trace.iterates) == 101
    np.testing.assert_allclose(np.array(trace.iterates), np.array(ref), rtol=0, atol=1e-8)
    assert elapsed < 1.0


def test_monotone_descent():
    obj = random_problem(3, seed=2)
    trace = descend(obj, np.ones(3), DescentConfig(alpha=1.0, step=1.0 / obj.max_eigenvalue(), max_iters=50))
    assert np.all(np.diff(trace.values) <= 1e-15)


def test_near_one_order_close_to_classical():
    obj = random_problem(2, seed=7)
    step = 1.0 / obj.max_eigenvalue()
    a = descend(obj, np.zeros(2), DescentConfig(alpha=1.0, step=step, max_iters=100))
    b = descend(obj, np.zeros(2), DescentConfig(alpha=0.999, step=step, max_iters=100))
    assert abs(a.values[-1] - b.values[-1]) < 1e-2


def test_large_step_diverges():
    obj = random_problem(2, seed=7)
    trace = descend(obj, np.ones(2), DescentConfig(alpha=1.0, step=4.0 / obj.max_eigenvalue(), max_iters=200))
    assert trace.status == "diverged"
    assert len(trace.values) < 201


def test_fractional_run_with_l1_is_finite():
    obj = random_problem(2, seed=4, lam=0.2)
    trace = descend(obj, np.zeros(2), DescentConfig(alpha=0.7, step=0.5 / obj.max_eigenvalue(), max_iters=30))
    assert np.all(np.isfinite(trace.values))


def test_determinism_and_threads(monkeypatch):
    obj = random_problem(4, seed=9, lam=0.1)
    cfg = DescentConfig(alpha=0.6, step=0.1, max_iters=10)
    a = descend(obj, np.zeros(4), cfg).to_csv()
    monkeypatch.setenv("FRACOP_THREADS", "4")
    b = descend(obj, np.zeros(4), cfg).to_csv()
    assert a == b
    assert descend(random_problem(4, seed=9, lam=0.1), np.zeros(4), cfg).to_csv() == a


def test_trace_csv_layout():
    obj = random_problem(2, seed=7)
    text = descend(obj, np.zeros(2), DescentConfig(max_iters=2)).to_csv()
    lines = text.splitlines()
    assert lines[0] == "iter,objective,x0,x1"
    assert lines[1] == "0,0,0,0"
    assert len(lines) == 4


def test_random_problem_is_spd_and_seeded():
    a, b = random_problem(5, seed=1), random_problem(5, seed=1)
    np.testing.assert_array_equal(a.A, b.A)
    assert np.linalg.eigvalsh(a.A).min() > 0
    with pytest.raises(ValueError):
        random_problem(0, seed=1)
