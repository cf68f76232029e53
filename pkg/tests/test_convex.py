import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from dualprox import (
    BoxSet,
    PiecewiseQuadraticUtility,
    ProxFriendlyFunction,
    QuadraticFunction,
    SmoothConjugable,
    conjugate_argmax,
    conjugate_value,
    prox_conjugate_via_moreau,
    prox_l1,
    prox_via_inner_descent,
    project_box,
)
from dualprox.errors import (
    MaxIterExceededError,
    NonStronglyConvexError,
    UnboundedConjugateError,
)
from dualprox.repro import catalog_samples, conjugate_prox_oracle


def test_box_requires_ordered_bounds():
    with pytest.raises(ValueError):
        BoxSet([1.0], [0.0])


def test_box_membership_and_projection():
    box = BoxSet([0.0, 0.0], [3.0, 3.0])
    assert box.contains([1.0, 3.0])
    assert not box.contains([1.0, 3.1])
    np.testing.assert_array_equal(project_box([5.0], BoxSet([0.0], [3.0])), [3.0])
    np.testing.assert_array_equal(project_box([1.0], BoxSet([0.0], [3.0])), [1.0])
    np.testing.assert_array_equal(project_box([-2.0, 4.0], box), [0.0, 3.0])


def test_prox_l1_closed_form():
    np.testing.assert_allclose(prox_l1([2.0], 0.5, 1.0), [1.5])
    np.testing.assert_allclose(prox_l1([0.3], 0.5, 1.0), [0.0])
    np.testing.assert_allclose(prox_l1([-1.2, 0.0], 0.25, 2.0), [-0.7, 0.0])


def test_prox_l1_against_numeric_minimization():
    rng = np.random.default_rng(0)
    for _ in range(25):
        u = float(rng.uniform(-5, 5))
        alpha = float(rng.uniform(0.05, 3))
        w = float(rng.uniform(0, 2))
        res = minimize_scalar(lambda v: w * abs(v) + (v - u) ** 2 / (2 * alpha),
                              bounds=(-10, 10), method="bounded",
                              options={"xatol": 1e-12})
        assert abs(prox_l1([u], alpha, w)[0] - res.x) < 1e-7


def test_prox_l1_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        prox_l1([1.0], 0.0)


def test_prox_conjugate_via_moreau_examples():
    np.testing.assert_allclose(
        prox_conjugate_via_moreau(ProxFriendlyFunction.l1(1.0), [2.0], 1.0), [1.0])
    np.testing.assert_allclose(
        prox_conjugate_via_moreau(
            ProxFriendlyFunction.indicator_box(BoxSet([0.0], [3.0])), [-1.0], 1.0),
        [-1.0])
    # l1 weight 1: conjugate is the indicator of [-1, 1], v inside stays put
    g = ProxFriendlyFunction.l1(1.0)
    np.testing.assert_allclose(prox_conjugate_via_moreau(g, [0.4], 2.0), [0.4])
    res = minimize_scalar(lambda w: (w - 0.4) ** 2 / 4.0, bounds=(-1, 1),
                          method="bounded", options={"xatol": 1e-12})
    assert abs(prox_conjugate_via_moreau(g, [0.4], 2.0)[0] - res.x) < 1e-7


def test_moreau_identity_against_independent_oracle():
    rng = np.random.default_rng(3)
    for g, u, alpha in catalog_samples(rng, 200):
        left = alpha * conjugate_prox_oracle(g, u / alpha, 1.0 / alpha)
        right = g.prox(u, alpha)
        np.testing.assert_allclose(left + right, u, atol=1e-9)


def test_conjugate_prox_oracle_matches_numeric_minimization():
    # validates the closed-form oracle itself on scalar cases
    rng = np.random.default_rng(11)
    for g, u, alpha in catalog_samples(rng, 80):
        if (g.box.dim if g.box is not None else 1) != 1:
            continue
        c = 1.0 / alpha
        v = u[:1] / alpha
        lo, hi = -50.0, 50.0
        if g.kind == "zero" and g.box is None:
            continue  # conjugate is the indicator of the origin
        if g.kind == "l1" and g.box is None:
            lo, hi = -g.weight, g.weight
        res = minimize_scalar(
            lambda w: g.conjugate(np.array([w])) + (w - v[0]) ** 2 / (2 * c),
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        assert abs(conjugate_prox_oracle(g, v, c)[0] - res.x) < 1e-6


def test_prox_nonexpansive_across_catalog():
    rng = np.random.default_rng(5)
    for g, _, alpha in catalog_samples(rng, 150):
        dim = g.box.dim if g.box is not None else 1
        u, v = rng.uniform(-12, 12, (2, dim))
        du = np.linalg.norm(g.prox(u, alpha) - g.prox(v, alpha))
        assert du <= np.linalg.norm(u - v) + 1e-12


def test_quadratic_scalar_curvature_promotion():
    f = QuadraticFunction(2.0, [1.0], 0.5)
    assert f.value([2.0]) == pytest.approx(0.5 * 2 * 4 + 2 + 0.5)
    assert f.strong_convexity == pytest.approx(2.0)
    np.testing.assert_allclose(f.grad([3.0]), [7.0])


def test_quadratic_rejects_asymmetric_curvature():
    with pytest.raises(ValueError):
        QuadraticFunction([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])


def test_utility_threshold_and_smooth_join():
    f = PiecewiseQuadraticUtility(12.28, 0.0417)
    thr = 12.28 / (2 * 0.0417)
    assert f.threshold == pytest.approx(thr)
    # continuous with zero slope on both sides of the threshold
    eps = 1e-7
    assert f.value([thr - eps]) == pytest.approx(f.value([thr + eps]), abs=1e-10)
    left = (f.value([thr]) - f.value([thr - eps])) / eps
    right = (f.value([thr + eps]) - f.value([thr])) / eps
    assert abs(left) < 1e-5 and abs(right) < 1e-5


def test_utility_rejects_bad_parameters():
    with pytest.raises(ValueError):
        PiecewiseQuadraticUtility(-1.0, 0.1)
    with pytest.raises(ValueError):
        PiecewiseQuadraticUtility(1.0, 0.0)


def test_conjugate_argmax_quadratic_all_space():
    f = SmoothConjugable(QuadraticFunction(2.0, [1.0]))
    np.testing.assert_allclose(conjugate_argmax(f, [5.0]), [2.0])


def test_conjugate_argmax_clamps_at_bound():
    f = SmoothConjugable(QuadraticFunction(2 * 0.0074, [3.53]), BoxSet([0.0], [150.0]))
    np.testing.assert_allclose(conjugate_argmax(f, [3.53]), [0.0])


def test_conjugate_argmax_utility_vs_golden_section():
    base = PiecewiseQuadraticUtility(12.28, 0.0417)
    f = SmoothConjugable(base, BoxSet([0.0], [147.29]))
    for u in (0.1, -0.5, -6.0, -12.3, 2.0):
        lo, hi = 0.0, 147.29
        obj = lambda x: u * x - base.value([x])
        # golden-section search on the concave objective
        phi = (np.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c1, c2 = b - phi * (b - a), a + phi * (b - a)
        for _ in range(200):
            if obj(c1) < obj(c2):
                a, c1 = c1, c2
                c2 = a + phi * (b - a)
            else:
                b, c2 = c2, c1
                c1 = b - phi * (b - a)
        x_gold = 0.5 * (a + b)
        x_pkg = conjugate_argmax(f, [u])[0]
        assert obj(x_pkg) >= obj(x_gold) - 1e-10
        assert abs(x_pkg - x_gold) < 1e-5


def test_conjugate_argmax_unbounded_flat_branch():
    f = SmoothConjugable(PiecewiseQuadraticUtility(10.0, 0.1))
    with pytest.raises(UnboundedConjugateError):
        conjugate_argmax(f, [0.5])
    assert conjugate_value(f, [0.5]) == float("inf")


def test_conjugate_value_examples():
    assert conjugate_value(SmoothConjugable(QuadraticFunction(1.0, [0.0])), [0.0]) == 0.0
    assert conjugate_value(SmoothConjugable(QuadraticFunction(2.0, [1.0])), [5.0]) == pytest.approx(4.0)


def test_conjugate_value_utility_vs_dense_grid():
    base = PiecewiseQuadraticUtility(17.17, 0.0935)
    f = SmoothConjugable(base, BoxSet([0.0], [91.79]))
    u = -17.17
    xs = np.arange(0.0, 91.79 + 1e-4, 1e-4)
    vals = u * xs - (np.where(xs <= base.threshold,
                              base.curvature * xs**2 - base.price * xs,
                              -base.price**2 / (4 * base.curvature)))
    assert conjugate_value(f, [u]) == pytest.approx(float(vals.max()), abs=1e-6)


def test_conjugate_gradient_lipschitz_small_sample():
    f = SmoothConjugable(QuadraticFunction(2.0, [1.0]), BoxSet([-4.0], [4.0]))
    rng = np.random.default_rng(9)
    for _ in range(100):
        u, v = rng.uniform(-20, 20, 2)
        du = abs(conjugate_argmax(f, [u])[0] - conjugate_argmax(f, [v])[0])
        assert du <= abs(u - v) / f.strong_convexity + 1e-12


def test_prox_friendly_values_and_conjugates():
    g = ProxFriendlyFunction.l1_plus_box(1.5, BoxSet([-2.0], [3.0]))
    assert g.value([2.0]) == pytest.approx(3.0)
    assert g.value([4.0]) == float("inf")
    # conjugate of zero on all of space is the indicator of the origin
    z = ProxFriendlyFunction.zero()
    assert z.conjugate([0.0]) == 0.0
    assert z.conjugate([0.1]) == float("inf")
    l1 = ProxFriendlyFunction.l1(1.0)
    assert l1.conjugate([0.9]) == 0.0
    assert l1.conjugate([1.5]) == float("inf")


def test_argmax_tie_breaks_toward_reference():
    g = ProxFriendlyFunction.indicator_box(BoxSet([0.0], [5.0]))
    np.testing.assert_allclose(g.conjugate_argmax([0.0], ref=[2.5]), [2.5])
    np.testing.assert_allclose(g.conjugate_argmax([0.0], ref=[9.0]), [5.0])
    np.testing.assert_allclose(g.conjugate_argmax([1.0], ref=[2.5]), [5.0])


def test_with_box_intersects_existing_box():
    g = ProxFriendlyFunction.l1_plus_box(1.0, BoxSet([-2.0], [4.0]))
    gg = g.with_box(BoxSet([0.0], [10.0]))
    np.testing.assert_array_equal(gg.box.lower, [0.0])
    np.testing.assert_array_equal(gg.box.upper, [4.0])


def test_inner_descent_prox_examples():
    g = SmoothConjugable(QuadraticFunction(1.0, [0.0]))
    r0 = prox_via_inner_descent(g, [0.0], 1.0, tol=1e-10)
    assert abs(r0.point[0]) < 1e-10
    r1 = prox_via_inner_descent(g, [3.0], 1.0, tol=1e-10)
    # q(w) = w^2/2, so prox is v/(1 + c)
    assert r1.point[0] == pytest.approx(1.5, abs=1e-8)
    assert r1.iterations > 0 and r1.grad_norm <= 1e-10


def test_inner_descent_prox_vs_grid():
    g = SmoothConjugable(QuadraticFunction(4.0, [0.0]), BoxSet([0.0], [1.0]))
    res = prox_via_inner_descent(g, [1.0], 0.5, tol=1e-12)
    ws = np.arange(-2.0, 2.0, 1e-5)
    xh = np.clip(ws / 4.0, 0.0, 1.0)
    obj = ws * xh - 2.0 * xh**2 + (ws - 1.0) ** 2 / (2 * 0.5)
    assert res.point[0] == pytest.approx(ws[obj.argmin()], abs=1e-4)


def test_inner_descent_requires_strong_convexity():
    flat = SmoothConjugable(QuadraticFunction(0.0, [0.0]), strong_convexity=0.0)
    with pytest.raises(NonStronglyConvexError):
        prox_via_inner_descent(flat, [1.0], 1.0)


def test_inner_descent_iteration_cap():
    # box-clipped conjugate gradient makes the descent geometric, not one-shot
    g = SmoothConjugable(QuadraticFunction(4.0, [0.0]), BoxSet([0.0], [1.0]))
    with pytest.raises(MaxIterExceededError):
        prox_via_inner_descent(g, [5.0], 1.0, tol=1e-14, max_iter=2)
