import numpy as np
import pytest

from einstein_forge.catalog import get_entry
from einstein_forge.conformal import (
    ConformalPair,
    block_structure_check,
    conformal_ricci_delta,
    conformally_einstein_residual,
    direct_ricci_delta,
    main_theorem_constants,
    power_hessian_check,
    quasi_einstein_check,
)
from einstein_forge.curvature import curvature_batch, einstein_residual, hessian_batch, make_grid, random_points, traceless
from einstein_forge.dsl import parse_metric
from einstein_forge.errors import DomainError, PreconditionError
from oracles import FROZEN

LAW_CASES = [
    "mercator-n3",
    "mercator-n4",
    "hyperbolic-mercator",
    "poincare-halfspace",
    "example-sphere",
    "main-cos-cosh",
    "main-cos-sinh",
    "calabi-ricci-flat",
    "ppwave-case2",
    "non-standard-mercator",
]
# pairs that are not catalog entries, written directly
EXTRA_PAIRS = [
    ("sphere(3)", "2 + cos(r)*sin(th1)", {"r": [0.2, 1.3]}),
    ("flat(4)", "1 + x1^2 + x2*x3 + exp(x4)", {}),
    ("product(diag(t;-1;1), sphere(2))", "cosh(t) + r", {"r": [0.2, 1.3]}),
]


class TestTransformationLaw:
    @pytest.mark.parametrize("name", LAW_CASES)
    def test_catalog_pairs(self, name):
        pair = get_entry(name).conformal_pair()
        pts = random_points(pair.inner, 50, seed=11)
        law = conformal_ricci_delta(pair, pts)
        direct = direct_ricci_delta(pair, pts)
        assert np.max(np.abs(law - direct)) < 1e-8

    @pytest.mark.parametrize("inner, phi, domain", EXTRA_PAIRS)
    def test_generic_factors(self, inner, phi, domain):
        pair = ConformalPair.from_text(parse_metric(inner).with_domain(domain), phi)
        pts = random_points(pair.inner, 50, seed=5)
        assert np.max(np.abs(conformal_ricci_delta(pair, pts) - direct_ricci_delta(pair, pts))) < 1e-8

    @pytest.mark.parametrize("n", [3, 4])
    def test_sine_over_hyperbolic(self, n):
        inner = parse_metric(f"product(diag(t;+1;1), hyperbolic({n - 1}))").with_domain({"t": [0.3, 2.8]})
        pair = ConformalPair.from_text(inner, "sin(t)")
        rep = einstein_residual(pair.outer)
        assert rep.passed and rep.lambda_hat == pytest.approx(-(n - 1), abs=1e-8)

    def test_constant_factor_leaves_ricci(self):
        pair = ConformalPair.from_text(parse_metric("sphere(3)").with_domain({"r": [0.2, 1.3]}), "3")
        pts = random_points(pair.inner, 20, seed=1)
        assert np.max(np.abs(conformal_ricci_delta(pair, pts))) < 1e-13

    def test_nonpositive_factor_is_rejected(self):
        pair = ConformalPair.from_text(parse_metric("flat(2)"), "x1")
        with pytest.raises(DomainError) as info:
            conformal_ricci_delta(pair, np.array([[0.5, 0.0], [-0.2, 0.1]]))
        np.testing.assert_array_equal(info.value.point, [-0.2, 0.1])


class TestConformallyEinstein:
    @pytest.mark.parametrize("name", ["mercator-n3", "mercator-n4", "mercator-n5", "poincare-halfspace", "main-quadratic"])
    def test_einstein_pairs_pass(self, name):
        rep = conformally_einstein_residual(get_entry(name).conformal_pair())
        assert rep.passed, rep.to_dict()

    def test_trivial_factor_on_non_einstein_fails(self):
        inner = parse_metric("product(sphere(2), flat(1))").with_domain({"r": [0.2, 1.3]})
        rep = conformally_einstein_residual(ConformalPair.from_text(inner, "1"))
        assert not rep.passed
        assert rep.max_residual > 0.1

    def test_wrong_factor_fails(self):
        inner = parse_metric("product(diag(t;+1;1), sphere(3))").with_domain({"t": [-1.5, 1.5]})
        rep = conformally_einstein_residual(ConformalPair.from_text(inner, "cosh(2*t)"))
        assert not rep.passed

    def test_report_fields(self):
        rep = conformally_einstein_residual(get_entry("poincare-halfspace").conformal_pair(), n=32)
        d = rep.to_dict()
        assert set(d) == {"max_residual", "pass", "tol", "n_points", "worst_point"}
        assert d["n_points"] == 32 and len(d["worst_point"]) == 4


class TestBrinkmannCriterion:
    """Einstein g with trace-free hess(phi) = 0 gives an Einstein phi^-2 g."""

    CASES = [
        # the round sphere in the Mercator chart; its height function is tanh t
        ("conformal(1/cosh(t), product(diag(t;+1;1), sphere(2)))", "2 + tanh(t)", {"t": [-1.5, 1.5], "r": [0.2, 1.3]}),
        ("conformal(1/cosh(t), product(diag(t;+1;1), sphere(3)))", "2 + tanh(t)", {"t": [-1.5, 1.5], "r": [0.2, 1.3]}),
        # flat space with a linear factor is the Poincare halfspace
        ("product(diag(t;+1;1), flat(3))", "t", {"t": [0.5, 2.0]}),
        ("flat(3)", "1 + x1^2 + x2^2 + x3^2", {}),
    ]

    @pytest.mark.parametrize("metric, phi, domain", CASES)
    def test_criterion(self, metric, phi, domain):
        g = parse_metric(metric).with_domain(domain)
        grid = make_grid(g, 64)
        assert einstein_residual(g, grid).passed
        cb = curvature_batch(g, grid)
        h = hessian_batch(phi, g, grid, cb)
        assert np.max(np.abs(traceless(h.hessian, cb.g, cb.ginv))) < 1e-9
        pair = ConformalPair.from_text(g, phi)
        assert conformally_einstein_residual(pair, grid).passed
        assert einstein_residual(pair.outer, grid).passed

    def test_non_trace_free_factor_is_not_enough(self):
        g = parse_metric("product(diag(t;+1;1), flat(3))").with_domain({"t": [0.5, 2.0]})
        pair = ConformalPair.from_text(g, "1 + t^3")
        assert not einstein_residual(pair.outer).passed


class TestPowerHessian:
    @pytest.mark.parametrize(
        "metric, phi, domain",
        [
            ("sphere(3)", "2 + cos(r)", {"r": [0.2, 1.3]}),
            ("hyperbolic(2)", "cosh(r)*(2 + sin(th1))", {}),
            ("flat(3)", "1 + x1^2 + x2^2*x3^2", {}),
            ("ppwave(H=x^2 + y^2)", "2 + u*x + v^2", {}),
        ],
    )
    @pytest.mark.parametrize("c", [-1.5, 0.5, 2.0, 3.0])
    def test_identity(self, metric, phi, domain, c):
        spec = parse_metric(metric).with_domain(domain)
        assert power_hessian_check(phi, c, spec, random_points(spec, 20, seed=2)) < 1e-9

    def test_c_one_is_exact(self):
        spec = parse_metric("sphere(3)").with_domain({"r": [0.2, 1.3]})
        assert power_hessian_check("2 + cos(r)*sin(th1)", 1.0, spec, random_points(spec, 10)) < 1e-14

    def test_exponential_by_hand(self):
        # hess(e^(2x)) = 4 e^(2x) on the line
        spec = parse_metric("flat(1)")
        pts = np.array([[-0.5], [0.0], [0.7]])
        h = hessian_batch("exp(x1)^2", spec, pts)
        np.testing.assert_allclose(h.hessian[:, 0, 0], 4 * np.exp(2 * pts[:, 0]), rtol=1e-14)
        assert power_hessian_check("exp(x1)", 2.0, spec, pts) < 1e-12

    def test_requires_positive_phi(self):
        spec = parse_metric("flat(1)")
        with pytest.raises(DomainError):
            power_hessian_check("x1", 0.5, spec, np.array([[-1.0]]))


class TestQuasiEinstein:
    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_hyperbolic_cosh(self, n):
        base = parse_metric(f"hyperbolic({n})").with_domain({"r": [0.2, 2.0]})
        rep = quasi_einstein_check(n, "cosh(r)", base)
        assert rep.precondition_residual < 1e-10
        assert rep.passed, rep.to_dict()
        assert rep.c == pytest.approx((n - 1) / (n - 2))

    @pytest.mark.parametrize("n", [3, 4])
    def test_sphere_cos(self, n):
        base = parse_metric(f"sphere({n})").with_domain({"r": [0.2, 1.3]})
        assert quasi_einstein_check(n, "cos(r)", base).passed

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_phibar_closed_form(self, n):
        # with hess(cosh r) = cosh(r) g and Ric = -(n-1) g the trace gives phibar = n cosh^(2/(n-2)) r
        base = parse_metric(f"hyperbolic({n})").with_domain({"r": [0.2, 2.0]})
        grid = make_grid(base, 64)
        rep = quasi_einstein_check(n, "cosh(r)", base, grid)
        expected = n * np.cosh(grid[:, 0]) ** (2 / (n - 2))
        assert np.max(np.abs(rep.phibar - expected)) < 1e-7

    @pytest.mark.parametrize("n", [3, 4])
    def test_flat_trivial(self, n):
        rep = quasi_einstein_check(n, "1", parse_metric(f"flat({n})"))
        assert rep.passed and rep.max_residual == 0 and rep.precondition_residual == 0

    def test_failed_precondition(self):
        base = parse_metric("hyperbolic(3)").with_domain({"r": [0.2, 2.0]})
        rep = quasi_einstein_check(3, "cosh(2*r)", base)
        assert not rep.precondition_passed and not rep.passed

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            quasi_einstein_check(2, "cosh(r)", parse_metric("hyperbolic(2)"))
        with pytest.raises(ValueError):
            quasi_einstein_check(4, "cosh(r)", parse_metric("hyperbolic(3)"))


class TestMainTheoremConstants:
    @pytest.mark.parametrize(
        "a, b, k_tilde, kbar, name",
        [
            ("cos(t)", "cosh(s)", 1.0, 0.0, "main-cos-cosh"),
            ("cos(t)", "sinh(s)", 1.0, -2.0, "main-cos-sinh"),
            ("t^2 + 1", "s^2 + 1", 0.0, 8.0, "main-quadratic"),
        ],
    )
    def test_constants_match_catalog(self, a, b, k_tilde, kbar, name):
        consts = main_theorem_constants(a, b, k_tilde)
        assert consts.k_bar == pytest.approx(kbar, abs=1e-10)
        assert consts.lambda_bar == pytest.approx(5 * kbar, abs=1e-10)
        assert consts.k_bar == pytest.approx(FROZEN["main_kbar"][name], abs=1e-10)
        entry = get_entry(name)
        assert entry.expectation["lambda"] == pytest.approx(consts.lambda_bar, abs=1e-10)
        rep = einstein_residual(entry.spec())
        assert rep.passed and rep.lambda_hat == pytest.approx(consts.lambda_bar, abs=1e-7)

    def test_quadratic_constants(self):
        consts = main_theorem_constants("t^2 + 1", "s^2 + 1", 0.0)
        assert (consts.c, consts.d1, consts.d2, consts.c1, consts.c2) == pytest.approx((2, -4, -4, 4, 4))
        d = consts.to_dict()
        assert d["N"] == 5 and d["lambda_bar"] == pytest.approx(40)

    def test_timelike_factor(self):
        # eps1 = -1: a'' - k~ a = -c, so a = cosh t with k~ = 1 and c = 0
        consts = main_theorem_constants("cosh(t)", "cosh(s)", 1.0, eps1=-1)
        assert consts.c == pytest.approx(0.0, abs=1e-12)
        # d1 = -sinh^2 + cosh^2, d2 = sinh^2 - cosh^2
        assert (consts.d1, consts.d2) == pytest.approx((1.0, -1.0), abs=1e-10)
        assert consts.k_bar == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize(
        "a, b, k_tilde, match",
        [
            ("t + s", "s", 0.0, "single parameter"),
            ("t^3", "s^2", 0.0, "not constant"),
            ("t^2", "s^2/2", 0.0, "inconsistent constant"),
        ],
    )
    def test_rejections(self, a, b, k_tilde, match):
        with pytest.raises(PreconditionError, match=match):
            main_theorem_constants(a, b, k_tilde)


class TestBlockStructure:
    def test_sum_splits(self):
        spec = parse_metric("product(sphere(2), hyperbolic(2))").with_domain({"r": [0.2, 1.3]})
        rep = block_structure_check(spec, "cos(r) + cosh(r_2)")
        assert rep.passed and rep.split == 2

    def test_calabi_sum(self):
        spec = parse_metric(get_entry("calabi-ricci-flat").pair["inner"]).with_domain(get_entry("calabi-ricci-flat").domain)
        assert block_structure_check(spec, "-12*t^-2 - 12*s^-2").passed

    def test_product_does_not_split(self):
        spec = parse_metric("product(flat(2), flat(2))")
        rep = block_structure_check(spec, "x1*x1_2")
        assert not rep.passed and rep.max_mixed > 0.1

    def test_needs_product(self):
        with pytest.raises(PreconditionError):
            block_structure_check(parse_metric("flat(3)"), "x1")
