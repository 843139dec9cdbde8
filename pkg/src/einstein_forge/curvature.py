"""Christoffel symbols, Riemann and Ricci tensors, Hessians of functions.

Sign conventions::

    Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    R^l_ijk    = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik
    R(d_i, d_j) d_k = R^l_ijk d_l,      Ric_jk = R^i_ijk

so the unit sphere has Ric = (n - 1) g.  The Hessian of a function is
``hess f_ij = d_i d_j f - Gamma^k_ij d_k f``.

Metric derivatives come from second-order jets, and the derivative of the
Christoffel symbols is assembled from them together with
``d g^kl = -g^ka (d g_ab) g^bl``; nothing is finite-differenced.  All
routines operate on batches of points at once.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import qmc

from .dsl import (
    Expr,
    MetricSpec,
    UnivariateFunction,
    check_nondegenerate,
    evaluate_expr,
    metric_arrays,
    parse_expr,
    signature,
)
from .errors import DomainError
from .jets import Jet2, lift_point

__all__ = [
    "CurvatureReport",
    "CurvatureBatch",
    "HessianField",
    "EinsteinReport",
    "curvature_at",
    "curvature_batch",
    "hessian_at",
    "hessian_batch",
    "einstein_residual",
    "constant_curvature_residual",
    "make_grid",
    "random_points",
    "traceless",
    "as_expr",
]

DEFAULT_GRID = 64
GRID_MARGIN = 1e-3


@dataclass
class CurvatureBatch:
    """Curvature quantities on a batch of points (leading axis = point index)."""

    points: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray  # [..., k, i, j]
    riemann: np.ndarray  # [..., l, i, j, k]
    ricci: np.ndarray
    scalar: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[-1]

    @property
    def traceless_ricci(self) -> np.ndarray:
        return self.ricci - (self.scalar / self.dim)[..., None, None] * self.g

    def __getitem__(self, i) -> "CurvatureReport":
        return CurvatureReport(
            point=self.points[i],
            christoffel=self.christoffel[i],
            riemann=self.riemann[i],
            ricci=self.ricci[i],
            scalar=float(self.scalar[i]),
            traceless_ricci=self.traceless_ricci[i],
            signature=signature(self.g[i]),
            g=self.g[i],
        )

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass
class CurvatureReport:
    """Curvature at a single point."""

    point: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    traceless_ricci: np.ndarray
    signature: tuple
    g: np.ndarray

    @property
    def riemann_lower(self) -> np.ndarray:
        """R_lijk with the first index lowered."""
        return np.einsum("lm,mijk->lijk", self.g, self.riemann)


def _curvature_arrays(g, dg, ddg):
    ginv = np.linalg.inv(g)
    # first kind: Gamma_lij = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    first = 0.5 * (
        np.einsum("...lji->...lij", dg) + dg - np.einsum("...ijl->...lij", dg)
    )
    gamma = np.einsum("...kl,...lij->...kij", ginv, first)
    d_first = 0.5 * (
        np.einsum("...ljim->...lijm", ddg)
        + ddg
        - np.einsum("...ijlm->...lijm", ddg)
    )
    d_ginv = -np.einsum("...ka,...abm,...bl->...klm", ginv, dg, ginv)
    d_gamma = np.einsum("...klm,...lij->...kijm", d_ginv, first) + np.einsum(
        "...kl,...lijm->...kijm", ginv, d_first
    )
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    riem = (
        np.einsum("...ljki->...lijk", d_gamma)
        - np.einsum("...likj->...lijk", d_gamma)
        + np.einsum("...lim,...mjk->...lijk", gamma, gamma)
        - np.einsum("...ljm,...mik->...lijk", gamma, gamma)
    )
    ricci = np.einsum("...iijk->...jk", riem)
    ricci = 0.5 * (ricci + np.swapaxes(ricci, -1, -2))
    scalar = np.einsum("...ij,...ij->...", ginv, ricci)
    return ginv, gamma, riem, ricci, scalar


def _chunks(points: np.ndarray, parallel: int | None):
    if not parallel or parallel <= 1 or points.shape[0] < 2 * parallel:
        return [points]
    return np.array_split(points, parallel)


def curvature_batch(spec: MetricSpec, points, parallel: int | None = None) -> CurvatureBatch:
    """Curvature at every row of ``points`` (shape ``(m, d)``)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))

    def work(chunk):
        g, dg, ddg = _metric_arrays_located(spec, chunk)
        check_nondegenerate(g, chunk)
        return (g,) + _curvature_arrays(g, dg, ddg)

    parts = _map(work, _chunks(points, parallel))
    g, ginv, gamma, riem, ricci, scalar = (np.concatenate(x) for x in zip(*parts))
    return CurvatureBatch(points, g, ginv, gamma, riem, ricci, scalar)


def _map(fn, chunks):
    if len(chunks) == 1:
        return [fn(chunks[0])]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        return list(pool.map(fn, chunks))


def _metric_arrays_located(spec, points):
    """metric_arrays, but a domain error names the first offending point."""
    try:
        return metric_arrays(spec, points)
    except DomainError as exc:
        if exc.point is None:
            for p in points:
                try:
                    metric_arrays(spec, p)
                except DomainError:
                    exc.with_point(p)
                    break
        raise


def curvature_at(spec: MetricSpec, point) -> CurvatureReport:
    """Christoffel, Riemann, Ricci and scalar curvature at one point."""
    point = np.asarray(point, dtype=float)
    return curvature_batch(spec, point[None, :])[0]


# ---------------------------------------------------------------------------
# Hessians
# ---------------------------------------------------------------------------


def as_expr(f, coords, functions: Mapping[str, UnivariateFunction] | None = None) -> Expr:
    if isinstance(f, str):
        return parse_expr(f, coords, functions)
    return f


@dataclass
class HessianField:
    """A scalar and its first and second covariant derivatives at one or more points."""

    value: np.ndarray
    differential: np.ndarray  # d_i f
    grad: np.ndarray  # g^ij d_j f
    hessian: np.ndarray
    laplacian: np.ndarray
    grad_norm2: np.ndarray


def _scalar_jet(f: Expr, coords, points) -> Jet2:
    xs = lift_point(points)
    v = evaluate_expr(f, dict(zip(coords, xs)))
    if not isinstance(v, Jet2):
        batch = points.shape[:-1]
        v = Jet2.constant(v, points.shape[-1], batch)
    return v


def hessian_batch(f, spec: MetricSpec, points, curv: CurvatureBatch | None = None, functions=None) -> HessianField:
    """Gradient, Hessian, Laplacian and squared gradient norm of ``f`` at many points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f = as_expr(f, spec.coords, functions)
    if curv is None:
        curv = curvature_batch(spec, points)
    try:
        jet = _scalar_jet(f, spec.coords, points)
    except DomainError as exc:
        raise exc.with_point(points[0] if len(points) == 1 else None) from None
    df = jet.gradient
    hess = jet.hessian - np.einsum("...kij,...k->...ij", curv.christoffel, df)
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    grad = np.einsum("...ij,...j->...i", curv.ginv, df)
    lap = np.einsum("...ij,...ij->...", curv.ginv, hess)
    norm2 = np.einsum("...i,...i->...", grad, df)
    return HessianField(jet.value, df, grad, hess, lap, norm2)


def hessian_at(f, spec: MetricSpec, point, functions=None) -> HessianField:
    """Snapshot of the Hessian field of ``f`` at a single point."""
    point = np.asarray(point, dtype=float)
    h = hessian_batch(f, spec, point[None, :], functions=functions)
    return HessianField(*(np.asarray(a)[0] for a in (h.value, h.differential, h.grad, h.hessian, h.laplacian, h.grad_norm2)))


def traceless(t: np.ndarray, g: np.ndarray, ginv: np.ndarray | None = None) -> np.ndarray:
    """Trace-free part ``t - (tr_g t / d) g`` of a symmetric 2-tensor (batched)."""
    if ginv is None:
        ginv = np.linalg.inv(g)
    tr = np.einsum("...ij,...ij->...", ginv, t)
    return t - (tr / g.shape[-1])[..., None, None] * g


# ---------------------------------------------------------------------------
# Grids and Einstein checks
# ---------------------------------------------------------------------------


def make_grid(spec_or_box, n: int = DEFAULT_GRID, margin: float = GRID_MARGIN) -> np.ndarray:
    """Deterministic low-discrepancy (Halton) points inside the coordinate box.

    The box is shrunk by ``margin`` on every side; the all-zeros first Halton
    point (a box corner) is skipped.
    """
    box = spec_or_box.box() if isinstance(spec_or_box, MetricSpec) else np.asarray(spec_or_box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    m = np.minimum(margin, 0.25 * (hi - lo))
    sampler = qmc.Halton(d=box.shape[0], scramble=False)
    sampler.fast_forward(1)
    u = sampler.random(n)
    return (lo + m) + u * ((hi - m) - (lo + m))


def random_points(spec: MetricSpec, n: int, seed: int = 0, margin: float = GRID_MARGIN) -> np.ndarray:
    box = spec.box()
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0] + margin, box[:, 1] - margin
    return lo + rng.random((n, box.shape[0])) * (hi - lo)


@dataclass
class EinsteinReport:
    lambda_hat: float
    max_residual: float
    scalar_std: float
    max_ricci: float
    passed: bool
    n_points: int
    tol: float
    worst_point: list

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "max_residual": self.max_residual,
            "scalar_std": self.scalar_std,
            "max_ricci": self.max_ricci,
            "pass": self.passed,
            "n_points": self.n_points,
            "tol": self.tol,
            "worst_point": self.worst_point,
        }


def einstein_residual(
    spec: MetricSpec,
    grid=None,
    tol: float = 1e-7,
    n: int = DEFAULT_GRID,
    parallel: int | None = None,
) -> EinsteinReport:
    """Test Ric = lambda g on a grid.

    ``lambda_hat`` is the grid mean of S/d.  Passes when the largest entry of
    ``Ric - lambda_hat g`` and the standard deviation of S/d are both below ``tol``.
    """
    grid = make_grid(spec, n) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] < 2:
        raise ValueError("einstein_residual needs at least two points")
    cb = curvature_batch(spec, grid, parallel=parallel)
    ratio = cb.scalar / cb.dim
    lam = float(np.mean(ratio))
    res = np.max(np.abs(cb.ricci - lam * cb.g), axis=(-2, -1))
    worst = int(np.argmax(res))
    max_res = float(res[worst])
    std = float(np.std(ratio))
    return EinsteinReport(
        lambda_hat=lam,
        max_residual=max_res,
        scalar_std=std,
        max_ricci=float(np.max(np.abs(cb.ricci))),
        passed=bool(max_res < tol and std < tol),
        n_points=int(grid.shape[0]),
        tol=tol,
        worst_point=[float(x) for x in grid[worst]],
    )


def constant_curvature_residual(spec: MetricSpec, grid=None, n: int = DEFAULT_GRID, kappa: float | None = None):
    """Largest entry of ``R^l_ijk - K (g_jk delta^l_i - g_ik delta^l_j)`` on a grid.

    ``K`` defaults to the grid mean of S / (d (d - 1)).  Returns ``(K, residual)``.
    """
    grid = make_grid(spec, n) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    cb = curvature_batch(spec, grid)
    d = cb.dim
    if kappa is None:
        kappa = float(np.mean(cb.scalar) / (d * (d - 1)))
    eye = np.eye(d)
    model = kappa * (
        np.einsum("li,...jk->...lijk", eye, cb.g) - np.einsum("lj,...ik->...lijk", eye, cb.g)
    )
    return kappa, float(np.max(np.abs(cb.riemann - model)))
