import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from einstein_forge.errors import DomainError
from einstein_forge.jets import ELEMENTARY, Jet2, jet_apply, lift_coordinate, lift_point

finite = st.floats(-2.0, 2.0, allow_nan=False)


def jet_of(f, x, h):
    """Central differences of a scalar function of one variable."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    return d1, d2


def random_jet(rng, d=3):
    a = rng.normal(size=(d, d))
    return Jet2(rng.normal(), rng.normal(size=d), a + a.T)


class TestLift:
    def test_seed_jets(self):
        x = lift_coordinate(0, (2.0, 3.0), 2)
        y = lift_coordinate(1, (2.0, 3.0), 2)
        assert x.value == 2 and y.value == 3
        np.testing.assert_array_equal(x.gradient, [1, 0])
        np.testing.assert_array_equal(y.gradient, [0, 1])
        s = x + y
        assert s.value == 5
        np.testing.assert_array_equal(s.gradient, [1, 1])
        np.testing.assert_array_equal(s.hessian, np.zeros((2, 2)))

    @pytest.mark.parametrize("i", [-1, 2, 5])
    def test_index_out_of_range(self, i):
        with pytest.raises(IndexError):
            lift_coordinate(i, (2.0, 3.0), 2)

    def test_batched_points(self):
        pts = np.arange(12.0).reshape(4, 3)
        x, y, z = lift_point(pts)
        assert x.value.shape == (4,)
        assert z.gradient.shape == (4, 3)
        np.testing.assert_array_equal(y.value, pts[:, 1])


class TestChainRule:
    def test_cosh_at_zero(self):
        j = jet_apply("cosh", lift_coordinate(0, (0.0,), 1))
        assert (j.value, j.gradient[0], j.hessian[0, 0]) == (1.0, 0.0, 1.0)

    def test_exp_at_zero(self):
        j = jet_apply("exp", lift_coordinate(0, (0.0,), 1))
        assert (j.value, j.gradient[0], j.hessian[0, 0]) == (1.0, 1.0, 1.0)

    def test_sqrt_of_two_plus_cos(self):
        x = lift_coordinate(0, (math.pi,), 1)
        u = jet_apply("pow", 2 + jet_apply("cos", x), 2 / 4)
        assert u.value == pytest.approx(1.0, abs=1e-15)
        assert u.gradient[0] == pytest.approx(0.0, abs=1e-15)
        assert u.hessian[0, 0] == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("fn", sorted(set(ELEMENTARY) - {"abs"}))
    def test_against_finite_differences(self, fn):
        rng = np.random.default_rng(7)
        xs = rng.uniform(0.2, 2.0, 1000)
        j = jet_apply(fn, lift_coordinate(0, xs[:, None], 1))
        f = ELEMENTARY[fn][0]
        for h in (1e-5, 1e-4):
            d1, d2 = jet_of(f, xs, h)
            scale1 = np.maximum(1.0, np.abs(j.gradient[:, 0]))
            np.testing.assert_array_less(np.abs(j.gradient[:, 0] - d1) / scale1, 1e-6)
        d1, d2 = jet_of(f, xs, 1e-4)
        scale2 = np.maximum(1.0, np.abs(j.hessian[:, 0, 0]))
        np.testing.assert_array_less(np.abs(j.hessian[:, 0, 0] - d2) / scale2, 1e-6)

    @pytest.mark.parametrize("c", [2.0, 0.5, -1.0, 2 / 3, -1 / 3])
    def test_power(self, c):
        x = 1.7
        j = jet_apply("pow", lift_coordinate(0, (x,), 1), c)
        assert j.gradient[0] == pytest.approx(c * x ** (c - 1), rel=1e-14)
        assert j.hessian[0, 0] == pytest.approx(c * (c - 1) * x ** (c - 2), rel=1e-14)

    def test_hessian_formula_in_two_variables(self):
        x, y = lift_point(np.array([0.3, 0.8]))
        j = jet_apply("sin", x * y)
        # d^2/dx dy sin(xy) = cos(xy) - xy sin(xy)
        assert j.hessian[0, 1] == pytest.approx(math.cos(0.24) - 0.24 * math.sin(0.24), rel=1e-14)
        np.testing.assert_array_equal(j.hessian, j.hessian.T)


class TestDomainErrors:
    @pytest.mark.parametrize(
        "fn, value",
        [("log", 0.0), ("log", -1.0), ("sqrt", 0.0), ("sqrt", -2.0), ("recip", 0.0)],
    )
    def test_guarded(self, fn, value):
        with pytest.raises(DomainError) as info:
            jet_apply(fn, lift_coordinate(0, (value,), 1))
        assert info.value.function == fn
        assert info.value.value == value

    def test_fractional_power_of_negative(self):
        with pytest.raises(DomainError):
            jet_apply("pow", lift_coordinate(0, (-1.0,), 1), 0.5)

    def test_division_by_zero_jet(self):
        x = lift_coordinate(0, (0.0,), 1)
        with pytest.raises(DomainError):
            1.0 / x

    def test_unknown_function(self):
        with pytest.raises(ValueError):
            jet_apply("gamma", lift_coordinate(0, (1.0,), 1))


class TestRingAxioms:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_associative_distributive(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_jet(rng) for _ in range(3))
        for lhs, rhs in (((a * b) * c, a * (b * c)), (a * (b + c), a * b + a * c), ((a + b) + c, a + (b + c))):
            for part in ("value", "gradient", "hessian"):
                l, r = getattr(lhs, part), getattr(rhs, part)
                scale = max(1.0, float(np.max(np.abs(l))))
                assert np.max(np.abs(l - r)) / scale < 1e-13

    @settings(max_examples=60, deadline=None)
    @given(finite, finite)
    def test_leibniz(self, p, q):
        x, y = lift_point(np.array([p, q]))
        a, b = jet_apply("sin", x) + y, x * y + 1
        prod = a * b
        np.testing.assert_allclose(prod.gradient, a.value * b.gradient + b.value * a.gradient, atol=1e-14)
        np.testing.assert_array_equal(prod.hessian, prod.hessian.T)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
    def test_quotient_and_power_agree(self, p, q):
        x, y = lift_point(np.array([p, q]))
        a = x / y
        b = x * jet_apply("recip", y)
        c = x * y**-1
        for other in (b, c):
            np.testing.assert_allclose(a.hessian, other.hessian, rtol=1e-12, atol=1e-13)

    def test_ndarray_on_the_left_defers(self):
        x = lift_coordinate(0, np.array([[1.0], [2.0]]), 1)
        out = np.array([3.0, 4.0]) * x
        assert isinstance(out, Jet2)
        np.testing.assert_array_equal(out.value, [3.0, 8.0])
