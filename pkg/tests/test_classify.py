import math

import numpy as np
import pytest

from einstein_forge.classify import (
    classify_warp,
    critical_second_derivatives,
    drop_instance,
    drop_polynomial,
    positive_roots,
)
from einstein_forge.errors import PreconditionError
from einstein_forge.odes import IteratedWarpProblem, solve_iterated_warp
from oracles import FROZEN


def type_one(n, kbar, u0):
    """Constants with a double zero of P at u0."""
    k = kbar * u0**2 * n / (n - 2)
    c = -2 * kbar * u0**n / (n - 2)
    return n, kbar, k, c


def poly(n, kbar, k, c, v):
    return c - kbar * v**n + k * v ** (n - 2)


class TestRoots:
    def test_ejiri(self):
        roots = positive_roots(4, 0.25, 1.0, -0.75)
        assert [o for _, o in roots] == [1, 1]
        np.testing.assert_allclose([r for r, _ in roots], FROZEN["ejiri_roots"], atol=1e-10)

    @pytest.mark.parametrize("n, kbar, u0", [(4, -1.0, 1.0), (5, -0.5, 1.5), (3, -2.0, 0.7), (6, -1.0, 2.0)])
    def test_double_root(self, n, kbar, u0):
        roots = positive_roots(*type_one(n, kbar, u0))
        assert len(roots) == 1 and roots[0][1] == 2
        assert roots[0][0] == pytest.approx(u0, rel=1e-9)

    CASES = [
        (4, 0.25, 1.0, -0.75),
        (4, 0.0, 1.0, -0.75),
        (4, -1.0, -1.0, -0.5),
        (3, -1.0, -3.0, 1.0),
        (5, 0.3, 2.0, -1.0),
        (4, -1.0, 1.0, 2.0),
        (6, 1.0, -1.0, -1.0),
        (3, 0.5, 1.0, -0.2),
        (7, -0.2, 1.5, -0.3),
    ]

    @pytest.mark.parametrize("n, kbar, k, c", CASES)
    def test_sign_changes_match_simple_roots(self, n, kbar, k, c):
        roots = positive_roots(n, kbar, k, c)
        # beyond v_max the leading term dominates the others tenfold
        v_max = 2.0
        while abs(kbar) * v_max**n < 10 * (abs(c) + abs(k) * v_max ** (n - 2)) and v_max < 1e6:
            v_max *= 2
        if kbar == 0:
            v_max = max(v_max, 10 * (abs(c) / max(abs(k), 1e-300)) ** (1 / (n - 2)))
        v = np.linspace(1e-9, v_max, 400001)
        s = np.sign(poly(n, kbar, k, c, v))
        changes = int(np.count_nonzero(s[:-1] * s[1:] < 0))
        assert changes == sum(1 for _, o in roots if o == 1)
        for r, _ in roots:
            assert abs(poly(n, kbar, k, c, r)) < 1e-9 * (abs(c) + abs(kbar) * r**n + abs(k) * r ** (n - 2))


class TestClassify:
    def test_periodic_ejiri(self):
        v = classify_warp(4, 0.25, 1.0, -0.75)
        assert v.type == "PeriodicEjiri" and v.case == "Case3"
        np.testing.assert_allclose(v.asymptote["range"], FROZEN["ejiri_roots"], atol=1e-10)

    @pytest.mark.parametrize("n, kbar, u0", [(4, -1.0, 1.0), (5, -0.5, 1.5), (3, -2.0, 0.7)])
    def test_type_one(self, n, kbar, u0):
        n, kbar, k, c = type_one(n, kbar, u0)
        v = classify_warp(n, kbar, k, c)
        assert v.type == "Type I" and v.case == "Case1"
        assert k < 0 and c > 0
        assert v.roots[0][0] == pytest.approx(u0, rel=1e-9) and v.roots[0][1] == 2
        assert v.asymptote["log_slope"] == pytest.approx(1 / math.sqrt(-kbar))

    def test_type_two(self):
        v = classify_warp(4, 0.0, 1.0, -0.75)
        assert v.type == "Type II" and v.case == "Case2"
        assert v.roots[0][0] == pytest.approx(FROZEN["type2_root"], abs=1e-10)
        assert v.asymptote["growth"] == "linear" and v.asymptote["slope"] == pytest.approx(1.0)

    def test_type_three(self):
        v = classify_warp(4, -1.0, -1.0, -0.5)
        assert v.type == "Type III" and v.asymptote["growth"] == "exponential"
        assert v.asymptote["log_slope"] == pytest.approx(1.0)

    def test_type_three_with_two_roots(self):
        v = classify_warp(3, -1.0, -3.0, 1.0)
        assert v.type == "Type III" and len(v.roots) == 2

    @pytest.mark.parametrize(
        "kbar, k, family", [(0.25, 1.0, "sin"), (-1.0, 1.0, "sinh"), (-1.0, -1.0, "cosh"), (0.0, 1.0, "linear")]
    )
    def test_classical(self, kbar, k, family):
        v = classify_warp(4, kbar, k, 0.0)
        assert v.type == "Classical" and v.asymptote["family"] == family

    @pytest.mark.parametrize("args", [(4, -1.0, 1.0, 2.0), (4, 1.0, -1.0, -1.0), (4, 0.0, -1.0, 1.0)])
    def test_degenerate(self, args):
        v = classify_warp(*args)
        assert v.type == "Degenerate" and v.explanation

    def test_json_shape(self):
        d = classify_warp(4, 0.25, 1.0, -0.75).to_dict()
        assert set(d) == {"type", "roots", "case", "asymptote", "explanation"}
        assert d["roots"][0] == {"value": pytest.approx(1.0, abs=1e-10), "order": 1}

    @pytest.mark.parametrize("args", [(2, 1.0, 1.0, 1.0), (4, 0.0, 0.0, 0.0)])
    def test_rejections(self, args):
        with pytest.raises(PreconditionError):
            classify_warp(*args)

    def test_periodic_orbit_stays_in_range(self):
        v = classify_warp(4, 0.25, 1.0, -0.75)
        lo, hi = v.asymptote["range"]
        p = IteratedWarpProblem.from_constants(4, 1.0, 0.25, -0.75, hi)
        # ten periods of u = sqrt(2 + cos x)
        sol = solve_iterated_warp(p, (0.0, 20 * math.pi), 1e-3)
        u = sol.trajectory.states[:, 0]
        assert u.min() >= lo - 1e-9 and u.max() <= hi + 1e-9


def reference_phi(m):
    """Coefficients of (x-1)^m (x+m) - (x+1)^m (x-m) by repeated integer convolution."""
    def power(a, k):
        # (x + a)^k, ascending coefficients
        out = [1]
        for _ in range(k):
            out = [a * x + y for x, y in zip(out + [0], [0] + out)]
        return out

    def times_linear(p, t):
        return [t * x + y for x, y in zip(p + [0], [0] + p)]

    lhs = times_linear(power(-1, m), m)
    rhs = times_linear(power(1, m), -m)
    co = [a - b for a, b in zip(lhs, rhs)]
    while len(co) > 1 and co[-1] == 0:
        co.pop()
    return co


class TestDropPolynomial:
    def test_phi3(self):
        assert drop_polynomial(3).coefficients == FROZEN["phi3"]

    def test_phi2(self):
        assert drop_polynomial(2).coefficients == FROZEN["phi2"]

    @pytest.mark.parametrize("m", range(2, 21))
    def test_against_reference(self, m):
        rep = drop_polynomial(m)
        assert rep.coefficients == reference_phi(m)
        assert all(isinstance(a, int) for a in rep.coefficients)
        assert rep.parity_positive and rep.no_positive_zero and rep.recursion_ok
        assert all(a >= 0 for a in rep.coefficients)
        for j in range(m - 1):
            a = rep.coefficients[j] if j < len(rep.coefficients) else 0
            assert (a > 0) if (j - m) % 2 == 0 else (a == 0)

    @pytest.mark.parametrize("m", range(3, 21))
    def test_derivative_recursion(self, m):
        co, prev = reference_phi(m), reference_phi(m - 1)
        deriv = [j * co[j] for j in range(1, len(co))]
        prev = prev + [0] * (len(deriv) - len(prev))
        assert deriv == [(m + 1) * a for a in prev]

    @pytest.mark.parametrize("m", [2, 4, 6, 10])
    def test_value_at_zero_even(self, m):
        assert drop_polynomial(m).coefficients[0] == 2 * m

    def test_large_degree_is_exact(self):
        rep = drop_polynomial(60)
        assert rep.coefficients == reference_phi(60)
        assert max(rep.coefficients) > 2**63

    @pytest.mark.parametrize("m", [1, 61])
    def test_range(self, m):
        with pytest.raises(PreconditionError):
            drop_polynomial(m)


class TestDropInstance:
    def test_reference_instance(self):
        d = drop_instance(4, 1.0, 0.25)
        assert d.y == pytest.approx(FROZEN["drop_y"], abs=1e-14)
        assert d.A == pytest.approx(FROZEN["drop_A"], abs=1e-14)
        assert d.B == pytest.approx(FROZEN["drop_B"], abs=1e-14)
        assert d.gamma_A == pytest.approx(FROZEN["drop_gamma_A"], abs=1e-12)
        assert abs(d.g_A_at_A) < 1e-10 and abs(d.g_B_at_B) < 1e-10
        assert d.consistent
        assert not d.gammas_equal

    @pytest.mark.parametrize("n, alpha, beta", [(3, 1.0, 1.0), (5, 2.0, 0.1), (6, -1.0, -0.5), (10, 0.3, 3.0)])
    def test_never_equal(self, n, alpha, beta):
        d = drop_instance(n, alpha, beta)
        assert d.consistent and not d.gammas_equal
        assert set(d.to_dict()) >= {"y", "A", "B", "gamma_A", "gamma_B", "consistent", "gammas_equal"}

    @pytest.mark.parametrize("args", [(4, 1.0, -1.0), (4, 1.0, 0.0), (2, 1.0, 1.0)])
    def test_rejections(self, args):
        with pytest.raises(PreconditionError):
            drop_instance(*args)


class TestScaledEjiri:
    def test_second_derivatives(self):
        d = critical_second_derivatives("2*(2 + cos(x))^(1/2)", math.pi, 0.0)
        assert d["ddu_min"] == pytest.approx(FROZEN["ejiri_scaled_ddu_min"], abs=1e-9)
        assert d["ddu_max"] == pytest.approx(FROZEN["ejiri_scaled_ddu_max"], abs=1e-9)
        assert d["ddu_max"] != pytest.approx(-1.0, abs=0.1)
        assert abs(d["du_min"]) < 1e-12 and abs(d["du_max"]) < 1e-12
