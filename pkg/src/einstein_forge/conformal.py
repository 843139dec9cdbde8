"""Conformal changes of metrics and the checks built on them.

For ``gbar = phi^-2 g`` on an n-manifold::

    Ric(gbar) - Ric(g) = phi^-2 [ (n-2) phi hess(phi) + (phi lap(phi) - (n-1) |grad phi|^2) g ]

and ``gbar`` is Einstein exactly when the trace-free part of
``phi Ric + (n-2) hess(phi)`` vanishes.  This module also covers the power
rule for Hessians, the quasi-Einstein identity for ``phi^(-2c) g`` with
``c = (n-1)/(n-2)``, and the bookkeeping of integration constants for
conformally Einstein products ``(a(t) + b(s))^-2 (g~ + g*)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .curvature import (
    DEFAULT_GRID,
    as_expr,
    curvature_batch,
    einstein_residual,
    hessian_batch,
    make_grid,
    traceless,
)
from .dsl import (
    BinOp,
    Conformal,
    Expr,
    MetricSpec,
    Num,
    Product,
    UnivariateFunction,
    evaluate_expr,
    expr_symbols,
    parse_expr,
    print_expr,
)
from .errors import DomainError, PreconditionError
from .jets import lift_coordinate

__all__ = [
    "ConformalPair",
    "ConformalReport",
    "conformal_ricci_delta",
    "direct_ricci_delta",
    "conformally_einstein_residual",
    "power_hessian_check",
    "QuasiEinsteinReport",
    "quasi_einstein_check",
    "MainTheoremConstants",
    "main_theorem_constants",
    "BlockReport",
    "block_structure_check",
]

# |phi| below this is treated as a zero of the conformal factor
PHI_FLOOR = 1e-6


@dataclass(frozen=True)
class ConformalPair:
    """An inner metric ``g`` with a positive function ``phi``; the outer metric is ``phi^-2 g``."""

    inner: MetricSpec
    phi: Expr
    functions: Mapping[str, UnivariateFunction] | None = field(default=None, compare=False)

    @classmethod
    def from_text(cls, inner: MetricSpec, phi: str, functions=None) -> "ConformalPair":
        return cls(inner, parse_expr(phi, inner.coords, functions), functions)

    @property
    def n(self) -> int:
        return self.inner.dim

    @property
    def outer(self) -> MetricSpec:
        scale = BinOp("/", Num(1.0), self.phi)
        return MetricSpec(Conformal(scale, self.inner.root), self.inner.domain)

    def phi_values(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        env = {c: points[:, i] for i, c in enumerate(self.inner.coords)}
        return np.broadcast_to(np.asarray(evaluate_expr(self.phi, env), dtype=float), points.shape[:1])

    def check_positive(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        phi = self.phi_values(points)
        bad = phi <= PHI_FLOOR
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(
                f"conformal factor phi = {float(phi[i]):.6g} is not positive", function="phi", value=float(phi[i])
            ).with_point(points[i])
        return phi

    def __str__(self) -> str:
        return f"phi = {print_expr(self.phi)} over {self.inner.text()}"


def conformal_ricci_delta(pair: ConformalPair, points) -> np.ndarray:
    """Ricci(phi^-2 g) - Ricci(g) from the transformation law (batched over ``points``)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phi = pair.check_positive(points)
    cb = curvature_batch(pair.inner, points)
    h = hessian_batch(pair.phi, pair.inner, points, cb, pair.functions)
    n = pair.n
    coeff = phi * h.laplacian - (n - 1) * h.grad_norm2
    out = (n - 2) * phi[:, None, None] * h.hessian + coeff[:, None, None] * cb.g
    return out / (phi**2)[:, None, None]


def direct_ricci_delta(pair: ConformalPair, points) -> np.ndarray:
    """Ricci(phi^-2 g) - Ricci(g) from two independent curvature evaluations."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    pair.check_positive(points)
    return curvature_batch(pair.outer, points).ricci - curvature_batch(pair.inner, points).ricci


@dataclass
class ConformalReport:
    max_residual: float
    passed: bool
    tol: float
    n_points: int
    worst_point: list

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "pass": self.passed,
            "tol": self.tol,
            "n_points": self.n_points,
            "worst_point": self.worst_point,
        }


def _grid(spec: MetricSpec, grid, n: int) -> np.ndarray:
    return make_grid(spec, n) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))


def _report(res: np.ndarray, grid: np.ndarray, tol: float) -> ConformalReport:
    per_point = np.max(np.abs(res), axis=(-2, -1))
    worst = int(np.argmax(per_point))
    m = float(per_point[worst])
    return ConformalReport(m, bool(m < tol), tol, int(grid.shape[0]), [float(x) for x in grid[worst]])


def conformally_einstein_residual(
    pair: ConformalPair, grid=None, tol: float = 1e-7, n: int = DEFAULT_GRID
) -> ConformalReport:
    """Largest entry of ``phi Ric° + (n-2) hess(phi)°`` (trace-free parts w.r.t. g)."""
    grid = _grid(pair.inner, grid, n)
    phi = pair.check_positive(grid)
    cb = curvature_batch(pair.inner, grid)
    h = hessian_batch(pair.phi, pair.inner, grid, cb, pair.functions)
    res = phi[:, None, None] * cb.traceless_ricci + (pair.n - 2) * traceless(h.hessian, cb.g, cb.ginv)
    return _report(res, grid, tol)


def power_hessian_check(phi, c: float, spec: MetricSpec, points) -> float:
    """Largest entry of ``hess(phi^c) - c phi^(c-1) hess(phi) - c(c-1) phi^(c-2) dphi dphi``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phi = as_expr(phi, spec.coords)
    cb = curvature_batch(spec, points)
    h1 = hessian_batch(phi, spec, points, cb)
    if np.any(h1.value <= 0):
        raise DomainError("power_hessian_check needs phi > 0", function="phi")
    hc = hessian_batch(BinOp("^", phi, Num(float(c))), spec, points, cb)
    v = h1.value[:, None, None]
    rhs = c * v ** (c - 1) * h1.hessian + c * (c - 1) * v ** (c - 2) * np.einsum(
        "...i,...j->...ij", h1.differential, h1.differential
    )
    return float(np.max(np.abs(hc.hessian - rhs)))


@dataclass
class QuasiEinsteinReport:
    precondition_residual: float
    precondition_passed: bool
    max_residual: float
    passed: bool
    phibar: np.ndarray
    c: float
    tol: float

    def to_dict(self) -> dict:
        return {
            "precondition_residual": self.precondition_residual,
            "precondition_pass": self.precondition_passed,
            "max_residual": self.max_residual,
            "pass": self.passed,
            "c": self.c,
            "phibar_range": [float(np.min(self.phibar)), float(np.max(self.phibar))],
        }


def quasi_einstein_check(
    n: int, phi, base: MetricSpec, grid=None, tol: float = 1e-7, npts: int = DEFAULT_GRID
) -> QuasiEinsteinReport:
    """Check the quasi-Einstein identity for ``gbar = phi^(-2c) g``, ``c = (n-1)/(n-2)``.

    The base must satisfy ``phi Ric + (n-1) hess(phi) = 0``; its residual is
    reported separately.  The main residual is the largest entry of
    ``(n-2)/(n-1) Ric(gbar) - phi^-2 dphi dphi - phibar gbar``, where the
    scalar ``phibar`` is solved pointwise from the gbar-trace.
    """
    if n < 3:
        raise ValueError("quasi_einstein_check needs n >= 3")
    if base.dim != n:
        raise ValueError(f"base has dimension {base.dim}, expected {n}")
    phi = as_expr(phi, base.coords)
    grid = _grid(base, grid, npts)
    cb = curvature_batch(base, grid)
    h = hessian_batch(phi, base, grid, cb)
    if np.any(h.value <= PHI_FLOOR):
        raise DomainError("quasi_einstein_check needs phi > 0", function="phi")
    pre = h.value[:, None, None] * cb.ricci + (n - 1) * h.hessian
    pre_res = float(np.max(np.abs(pre)))
    c = (n - 1) / (n - 2)
    outer = MetricSpec(Conformal(BinOp("^", phi, Num(-c)), base.root), base.domain)
    ob = curvature_batch(outer, grid)
    dphi = h.differential
    m = (n - 2) / (n - 1) * ob.ricci - np.einsum("...i,...j->...ij", dphi, dphi) / (h.value**2)[:, None, None]
    phibar = np.einsum("...ij,...ij->...", ob.ginv, m) / n
    res = float(np.max(np.abs(m - phibar[:, None, None] * ob.g)))
    return QuasiEinsteinReport(pre_res, bool(pre_res < tol), res, bool(pre_res < tol and res < tol), phibar, c, tol)


# ---------------------------------------------------------------------------
# Constants for (a(t) + b(s))^-2 (g~ + g*)
# ---------------------------------------------------------------------------


@dataclass
class MainTheoremConstants:
    """Integration constants of a conformally Einstein product.

    ``a`` solves ``a'' + eps1 k~ a = eps1 c`` on the first factor and ``b``
    solves ``b'' + eps2 k* b = eps2 c`` on the second, with ``k* = -k~``.
    Then ``c1 = k~ d1 + c^2``, ``c2 = k* d2 + c^2`` and the conformal metric
    has Einstein constant ``lambda_bar = N (-d1 - d2)``, ``N = n + n* - 1``.
    """

    n: int
    n_star: int
    k_tilde: float
    k_star: float
    eps1: int
    eps2: int
    c: float
    c1: float
    c2: float
    d1: float
    d2: float

    @property
    def N(self) -> int:
        return self.n + self.n_star - 1

    @property
    def k_bar(self) -> float:
        return -(self.d1 + self.d2)

    @property
    def lambda_bar(self) -> float:
        return self.N * self.k_bar

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_star": self.n_star,
            "k_tilde": self.k_tilde,
            "k_star": self.k_star,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "c": self.c,
            "c1": self.c1,
            "c2": self.c2,
            "d1": self.d1,
            "d2": self.d2,
            "N": self.N,
            "k_bar": self.k_bar,
            "lambda_bar": self.lambda_bar,
        }


def _univariate(f, name: str):
    """Parse a one-variable expression; returns (expr, variable name)."""
    e = parse_expr(f) if isinstance(f, str) else f
    syms = sorted(expr_symbols(e))
    if len(syms) > 1:
        raise PreconditionError(f"{name} must depend on a single parameter, got {syms}")
    return e, (syms[0] if syms else "t")


def _derivatives(e: Expr, var: str, samples: np.ndarray):
    jet = evaluate_expr(e, {var: lift_coordinate(0, samples[:, None])})
    if not hasattr(jet, "gradient"):
        z = np.zeros_like(samples)
        return np.full_like(samples, float(jet)), z, z
    return jet.value, jet.gradient[:, 0], jet.hessian[:, 0, 0]


def _constant(values: np.ndarray, what: str, tol: float) -> float:
    mean = float(np.mean(values))
    spread = float(np.max(np.abs(values - mean)))
    if spread > tol * max(1.0, abs(mean)):
        raise PreconditionError(f"{what} is not constant along the samples (spread {spread:.3g})")
    return mean


def main_theorem_constants(
    a,
    b,
    k_tilde: float,
    eps1: int = 1,
    eps2: int = 1,
    n: int = 3,
    n_star: int = 3,
    t_range=(0.1, 1.3),
    s_range=(0.1, 1.3),
    tol: float = 1e-8,
    samples: int = 8,
) -> MainTheoremConstants:
    """Extract ``c, c1, c2, d1, d2`` by sampling ``a`` and ``b`` at ``samples`` parameter values."""
    ea, va = _univariate(a, "a")
    eb, vb = _univariate(b, "b")
    k_star = -k_tilde
    ts = np.linspace(*t_range, samples)
    ss = np.linspace(*s_range, samples)
    a0, a1, a2 = _derivatives(ea, va, ts)
    b0, b1, b2 = _derivatives(eb, vb, ss)
    ca = _constant(eps1 * (a2 + eps1 * k_tilde * a0), "a'' + eps1 k~ a", tol)
    cb = _constant(eps2 * (b2 + eps2 * k_star * b0), "b'' + eps2 k* b", tol)
    if abs(ca - cb) > tol * max(1.0, abs(ca)):
        raise PreconditionError(f"inconsistent constant c: {ca!r} from a, {cb!r} from b")
    c = 0.5 * (ca + cb)
    d1 = _constant(eps1 * a1**2 + k_tilde * a0**2 - 2 * a0 * c, "d1", tol)
    d2 = _constant(eps2 * b1**2 + k_star * b0**2 - 2 * b0 * c, "d2", tol)
    c1 = _constant(a2**2 + eps1 * k_tilde * a1**2, "c1", tol)
    c2 = _constant(b2**2 + eps2 * k_star * b1**2, "c2", tol)
    for name, lhs, rhs in (("c1", c1, k_tilde * d1 + c * c), ("c2", c2, k_star * d2 + c * c)):
        if abs(lhs - rhs) > tol * max(1.0, abs(lhs)):
            raise PreconditionError(f"coupling violated: {name} = {lhs!r} but k d + c^2 = {rhs!r}")
    return MainTheoremConstants(n, n_star, k_tilde, k_star, eps1, eps2, c, c1, c2, d1, d2)


@dataclass
class BlockReport:
    max_mixed: float
    passed: bool
    split: int
    tol: float

    def to_dict(self) -> dict:
        return {"max_mixed": self.max_mixed, "pass": self.passed, "split": self.split, "tol": self.tol}


def block_structure_check(spec: MetricSpec, f, grid=None, tol: float = 1e-7, n: int = DEFAULT_GRID) -> BlockReport:
    """Largest entry of the mixed block of hess(f) on a product metric.

    On a product the mixed block is ``d^2 f / dy dx``, so it vanishes exactly
    when ``f`` splits as ``a(y) + b(x)``.
    """
    if not isinstance(spec.root, Product):
        raise PreconditionError("block_structure_check needs a product metric")
    grid = _grid(spec, grid, n)
    p = spec.root.split
    h = hessian_batch(f, spec, grid)
    m = float(np.max(np.abs(h.hessian[:, :p, p:])))
    return BlockReport(m, bool(m < tol), p, tol)


def product_conformal_metric(f: str, g_tilde: str, g_star: str, domain=None) -> MetricSpec:
    """``f^-2 (g~ + g*)`` as a metric spec (used for the Einstein confirmation)."""
    from .dsl import parse_metric

    inner = parse_metric(f"product({g_tilde}, {g_star})")
    text = f"conformal(1/({f}), {inner.text()})"
    spec = parse_metric(text)
    return spec.with_domain(domain)


def confirm_main_theorem(consts: MainTheoremConstants, spec: MetricSpec, grid=None, n: int = DEFAULT_GRID):
    """einstein_residual of the conformal product, compared with ``lambda_bar``."""
    rep = einstein_residual(spec, grid, n=n)
    return rep, abs(rep.lambda_hat - consts.lambda_bar)
