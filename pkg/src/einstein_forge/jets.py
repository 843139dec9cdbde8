"""Second-order truncated Taylor arithmetic.

A :class:`Jet2` carries the value, gradient and Hessian of a scalar with
respect to ``d`` chart coordinates.  Arithmetic propagates all three exactly
(up to rounding), so evaluating a metric coefficient expression on lifted
coordinates yields the first and second partial derivatives needed for
curvature.

Jets may be batched: ``value`` then has a leading shape ``B`` and ``gradient``
and ``hessian`` have shapes ``B + (d,)`` and ``B + (d, d)``.  Every operation
broadcasts over the batch, which is how grids of points are evaluated in one
pass.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "Jet2",
    "lift_coordinate",
    "lift_point",
    "jet_apply",
    "ELEMENTARY",
]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _check_finite(value, gradient, hessian, what: str) -> None:
    if not (
        np.all(np.isfinite(value))
        and np.all(np.isfinite(gradient))
        and np.all(np.isfinite(hessian))
    ):
        raise DomainError(f"non-finite jet component produced by {what}", function=what)


class Jet2:
    """Value, gradient and Hessian of a scalar field at one or many points."""

    __slots__ = ("value", "gradient", "hessian")
    __array_ufunc__ = None  # ndarray <op> Jet2 defers to the reflected Jet2 method

    def __init__(self, value, gradient, hessian):
        self.value = np.asarray(value, dtype=float)
        self.gradient = np.asarray(gradient, dtype=float)
        self.hessian = np.asarray(hessian, dtype=float)

    @property
    def dim(self) -> int:
        return self.gradient.shape[-1]

    @classmethod
    def constant(cls, c, d: int, batch: tuple = ()) -> "Jet2":
        value = np.broadcast_to(np.asarray(c, dtype=float), batch).copy()
        return cls(value, np.zeros(batch + (d,)), np.zeros(batch + (d, d)))

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.gradient, self.hessian)
        return Jet2(
            self.value + other.value,
            self.gradient + other.gradient,
            self.hessian + other.hessian,
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            return Jet2(
                self.value * c,
                self.gradient * c[..., None],
                self.hessian * c[..., None, None],
            )
        a, b = self, other
        av, bv = a.value[..., None], b.value[..., None]
        cross = _outer(a.gradient, b.gradient)
        # x + y == y + x in floating point, so the sum below stays exactly symmetric
        cross = cross + np.swapaxes(cross, -1, -2)
        return Jet2(
            a.value * b.value,
            av * b.gradient + bv * a.gradient,
            av[..., None] * b.hessian + bv[..., None] * a.hessian + cross,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0):
                raise DomainError("division by zero constant", function="recip", value=0.0)
            return self * (1.0 / c)
        return self * jet_apply("recip", other)

    def __rtruediv__(self, other):
        return jet_apply("recip", self) * other

    def __pow__(self, other):
        if isinstance(other, Jet2):
            if not (np.any(other.gradient) or np.any(other.hessian)):
                const = np.unique(other.value)
                if const.size == 1:
                    return jet_apply("pow", self, float(const[0]))
            return jet_apply("exp", other * jet_apply("log", self))
        return jet_apply("pow", self, float(other))

    def __rpow__(self, other):
        base = float(other)
        if base <= 0:
            raise DomainError("non-positive base with variable exponent", function="pow", value=base)
        return jet_apply("exp", self * math.log(base))

    # -- helpers -----------------------------------------------------------

    def __getitem__(self, idx) -> "Jet2":
        """Select batch entries."""
        return Jet2(self.value[idx], self.gradient[idx], self.hessian[idx])

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r}, hessian={self.hessian!r})"


def lift_coordinate(i: int, point, d: int | None = None) -> Jet2:
    """Seed jet of coordinate ``i`` at ``point`` (value x_i, gradient e_i, zero Hessian).

    ``point`` may carry a leading batch shape; its last axis is the chart.
    """
    point = np.asarray(point, dtype=float)
    if d is None:
        d = point.shape[-1]
    if point.shape[-1] != d:
        raise ValueError(f"point has {point.shape[-1]} coordinates, expected {d}")
    if not 0 <= i < d:
        raise IndexError(f"coordinate index {i} out of range for dimension {d}")
    batch = point.shape[:-1]
    gradient = np.zeros(batch + (d,))
    gradient[..., i] = 1.0
    return Jet2(point[..., i].copy(), gradient, np.zeros(batch + (d, d)))


def lift_point(point) -> list[Jet2]:
    point = np.asarray(point, dtype=float)
    d = point.shape[-1]
    return [lift_coordinate(i, point, d) for i in range(d)]


# f, f', f'' as functions of the value; the guard returns an offending mask.
def _pow_table(c: float):
    if c == 0:
        return (lambda x: np.ones_like(x), lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))
    if float(c).is_integer():
        n = int(c)
        d1 = (lambda x: np.ones_like(x)) if n == 1 else (lambda x: n * x ** (n - 1))
        if n in (1,):
            d2 = lambda x: np.zeros_like(x)  # noqa: E731
        elif n == 2:
            d2 = lambda x: np.full_like(x, 2.0)  # noqa: E731
        else:
            d2 = lambda x: n * (n - 1) * x ** (n - 2)  # noqa: E731
        return (lambda x: x**n, d1, d2)
    return (
        lambda x: np.exp(c * np.log(x)),
        lambda x: c * np.exp((c - 1) * np.log(x)),
        lambda x: c * (c - 1) * np.exp((c - 2) * np.log(x)),
    )


def _pow_guard(c: float) -> Callable:
    if c == 0:
        return lambda x: np.zeros(np.shape(x), dtype=bool)
    if float(c).is_integer():
        if c > 0:
            return lambda x: np.zeros(np.shape(x), dtype=bool)
        return lambda x: x == 0
    return lambda x: x <= 0


def _sech2(x):
    return 1.0 / np.cosh(x) ** 2


ELEMENTARY: dict[str, tuple] = {
    "sin": (np.sin, np.cos, lambda x: -np.sin(x)),
    "cos": (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    "sinh": (np.sinh, np.cosh, np.sinh),
    "cosh": (np.cosh, np.sinh, np.cosh),
    "tanh": (np.tanh, _sech2, lambda x: -2.0 * np.tanh(x) * _sech2(x)),
    "exp": (np.exp, np.exp, np.exp),
    "log": (np.log, lambda x: 1.0 / x, lambda x: -1.0 / x**2),
    "sqrt": (np.sqrt, lambda x: 0.5 / np.sqrt(x), lambda x: -0.25 / (x * np.sqrt(x))),
    "neg": (np.negative, lambda x: -np.ones_like(x), lambda x: np.zeros_like(x)),
    "recip": (lambda x: 1.0 / x, lambda x: -1.0 / x**2, lambda x: 2.0 / x**3),
    "abs": (np.abs, np.sign, lambda x: np.zeros_like(x)),
}

_GUARDS: dict[str, Callable] = {
    "log": lambda x: x <= 0,
    "sqrt": lambda x: x <= 0,
    "recip": lambda x: x == 0,
    "abs": lambda x: x == 0,
}


def jet_apply(fn: str, x: Jet2, param: float | None = None) -> Jet2:
    """Apply an elementary function to a jet by the second-order chain rule.

    ``fn`` is one of the keys of :data:`ELEMENTARY` or ``"pow"`` (with
    ``param`` the constant exponent).  Raises :class:`DomainError` when the
    function is not twice differentiable at ``x.value``.
    """
    if fn == "pow":
        if param is None:
            raise ValueError("pow requires an exponent")
        table, guard = _pow_table(param), _pow_guard(param)
    else:
        try:
            table = ELEMENTARY[fn]
        except KeyError:
            raise ValueError(f"unknown elementary function {fn!r}") from None
        guard = _GUARDS.get(fn)
    v = x.value
    if guard is not None:
        bad = guard(v)
        if np.any(bad):
            offending = float(np.asarray(v)[bad].flat[0]) if np.ndim(v) else float(v)
            raise DomainError(
                f"{fn} is not twice differentiable at {offending!r}",
                function=fn,
                value=offending,
            )
    with np.errstate(all="ignore"):
        f0, f1, f2 = (np.asarray(t(v), dtype=float) for t in table)
    f1e = f1[..., None]
    value = f0
    gradient = f1e * x.gradient
    hessian = f2[..., None, None] * _outer(x.gradient, x.gradient) + f1e[..., None] * x.hessian
    _check_finite(value, gradient, hessian, fn)
    return Jet2(value, gradient, hessian)


def jet_apply_derivs(derivs: Callable, x: Jet2, name: str = "user") -> Jet2:
    """Chain rule for a univariate function given as ``derivs(v) -> (f, f', f'')``."""
    f0, f1, f2 = (np.asarray(t, dtype=float) for t in derivs(x.value))
    f1e = f1[..., None]
    gradient = f1e * x.gradient
    hessian = f2[..., None, None] * _outer(x.gradient, x.gradient) + f1e[..., None] * x.hessian
    _check_finite(f0, gradient, hessian, name)
    return Jet2(f0, gradient, hessian)
