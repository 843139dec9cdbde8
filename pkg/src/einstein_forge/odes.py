"""ODE families behind conformally Einstein products, with first-integral monitoring.

Families and their conserved quantities (each problem type keeps its own
constants; the same letters mean different things in different families):

=================  ================================  =========================================
family             equation                          first integral(s)
=================  ================================  =========================================
Brinkmann          phi''' = -eps k phi'              (phi'')^2 + eps k (phi')^2 = eps k*
one-factor (ft)    f'' = eps k* f                    k* f^2 - eps (f')^2 = kbar
extremal surface   K''' = -K K'                      c = 2K'' + K^2,  d = K'^2 - cK + K^3/3
iterated warp      u u'' + (n-2)/2 u'^2 + d u^2      c = u^(n-2) (u'^2 + (2d/n) u^2 - k)
                     = k (n-2)/2                     e = ((u^(n/2))')^2 + (dn/2) u^n - k (n^2/4) u^(n-2)
=================  ================================  =========================================

All integrations use a fixed-step classical fourth-order Runge-Kutta scheme.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .curvature import DEFAULT_GRID, curvature_batch, hessian_batch, make_grid
from .dsl import MetricSpec, UnivariateFunction, parse_metric
from .errors import PreconditionError
from .jets import lift_point

__all__ = [
    "rk4",
    "Trajectory",
    "BrinkmannProblem",
    "solve_brinkmann",
    "FtProblem",
    "solve_ft",
    "ExtremalSurfaceParams",
    "ExtremalSolution",
    "solve_extremal",
    "extremal_product_metric",
    "IteratedWarpProblem",
    "WarpSolution",
    "solve_iterated_warp",
    "fiber_text",
    "warp_rhs_jet",
    "ResidualReport",
    "conf_product_residual",
    "corvino_residual",
    "QuadratureResult",
    "quadrature_x_of_u",
    "write_csv",
]


# ---------------------------------------------------------------------------
# Integrator
# ---------------------------------------------------------------------------


def _rk4_step(f, x, y, h):
    k1 = f(x, y)
    k2 = f(x + h / 2, y + (h / 2) * k1)
    k3 = f(x + h / 2, y + (h / 2) * k2)
    k4 = f(x + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4(f: Callable, y0, x0: float, x1: float, h: float, stop: Callable | None = None):
    """Classical RK4 from ``x0`` to ``x1`` with a uniform step close to ``h``.

    The step is adjusted to ``(x1 - x0) / N`` with ``N = ceil(|x1 - x0| / h)`` so
    the final node lands on ``x1``.  ``stop(y)`` may end the integration early;
    the state that triggered it is not kept.  Returns ``(xs, ys, stopped)``.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    y = np.asarray(y0, dtype=float)
    steps = max(1, int(math.ceil(abs(x1 - x0) / h - 1e-9)))
    hh = (x1 - x0) / steps
    xs = x0 + hh * np.arange(steps + 1)
    ys = np.empty((steps + 1,) + y.shape)
    ys[0] = y
    for i in range(steps):
        y = _rk4_step(f, xs[i], y, hh)
        if stop is not None and stop(y):
            return xs[: i + 1], ys[: i + 1], True
        ys[i + 1] = y
    return xs, ys, False


class _Interpolant:
    """State at arbitrary parameters: one RK4 step from the nearest node."""

    def __init__(self, f, xs, ys):
        self.f, self.xs, self.ys = f, xs, ys
        self.h = xs[1] - xs[0] if len(xs) > 1 else 1.0

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        flat = v.reshape(-1)
        idx = np.clip(np.rint((flat - self.xs[0]) / self.h).astype(int), 0, len(self.xs) - 1)
        dt = (flat - self.xs[idx])[:, None]
        y = self.ys[idx]
        k1 = self.f(None, y)
        k2 = self.f(None, y + dt / 2 * k1)
        k3 = self.f(None, y + dt / 2 * k2)
        k4 = self.f(None, y + dt * k3)
        out = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return out.reshape(v.shape + (self.ys.shape[-1],))


@dataclass
class Trajectory:
    """A sampled solution with its first integrals along the way."""

    family: str
    param: np.ndarray
    states: np.ndarray
    state_names: tuple
    invariants: dict
    tag: str | None = None
    flags: list = field(default_factory=list)
    truncated_at: float | None = None

    @property
    def drift(self) -> dict:
        return {k: float(np.max(np.abs(v - v[0]))) for k, v in self.invariants.items()}

    def summary(self) -> dict:
        return {
            "family": self.family,
            "tag": self.tag,
            "span": [float(self.param[0]), float(self.param[-1])],
            "steps": int(len(self.param) - 1),
            "invariants": {k: float(v[0]) for k, v in self.invariants.items()},
            "drift": self.drift,
            "flags": self.flags,
            "truncated_at": self.truncated_at,
        }

    def columns(self) -> tuple[list[str], np.ndarray]:
        names = ["param", *self.state_names, *self.invariants]
        data = np.column_stack([self.param, self.states, *self.invariants.values()])
        return names, data


def write_csv(traj: Trajectory, path=None) -> str:
    """CSV with the parameter, state components and each first integral; returns the text."""
    names, data = traj.columns()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in data:
        w.writerow([repr(float(x)) for x in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _sign_changes(x: np.ndarray, y: np.ndarray) -> list[float]:
    s = np.sign(y)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    out = [float(x[i] - y[i] * (x[i + 1] - x[i]) / (y[i + 1] - y[i])) for i in idx]
    out += [float(x[i]) for i in np.flatnonzero(s == 0)]
    return sorted(out)


# ---------------------------------------------------------------------------
# Brinkmann equation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BrinkmannProblem:
    """phi''' + eps k phi' = 0.  ``ddphi0`` defaults to ``-eps k phi0``."""

    eps: int
    k: float
    phi0: float
    dphi0: float
    ddphi0: float | None = None

    @property
    def initial(self) -> np.ndarray:
        dd = -self.eps * self.k * self.phi0 if self.ddphi0 is None else self.ddphi0
        return np.array([self.phi0, self.dphi0, dd], dtype=float)

    @property
    def k_star(self) -> float:
        p, dp, ddp = self.initial
        return (ddp**2 + self.eps * self.k * dp**2) / self.eps

    @property
    def tag(self) -> str:
        w2 = self.eps * self.k
        if w2 > 0:
            return "cos"
        if w2 < 0:
            return "cosh"
        return "linear" if self.initial[2] == 0 else "quadratic"

    def closed_form(self, t):
        """Exact phi(t) for the initial data."""
        t = np.asarray(t, dtype=float)
        p, dp, ddp = self.initial
        w2 = self.eps * self.k
        if w2 == 0:
            return p + dp * t + 0.5 * ddp * t**2
        if w2 > 0:
            w = math.sqrt(w2)
            c = (ddp + w2 * p) / w2
            return c + (p - c) * np.cos(w * t) + dp / w * np.sin(w * t)
        m = math.sqrt(-w2)
        c = (m * m * p - ddp) / (m * m)
        return c + (p - c) * np.cosh(m * t) + dp / m * np.sinh(m * t)


def solve_brinkmann(p: BrinkmannProblem, t_span=(0.0, 2 * math.pi), step: float = 1e-3) -> Trajectory:
    ek = p.eps * p.k

    def f(_, y):
        return np.stack([y[..., 1], y[..., 2], -ek * y[..., 1]], axis=-1)

    xs, ys, _ = rk4(f, p.initial, *t_span, step)
    inv = ys[:, 2] ** 2 + ek * ys[:, 1] ** 2
    return Trajectory("brinkmann", xs, ys, ("phi", "dphi", "ddphi"), {"eps_k_star": inv}, p.tag)


# ---------------------------------------------------------------------------
# One-factor conformal ODE
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FtProblem:
    """f'' = eps k* f with ``kbar = k* f^2 - eps f'^2``; ``kbar`` is checked if given."""

    eps: int
    k_star: float
    f0: float
    df0: float
    k_bar: float | None = None

    def __post_init__(self):
        kb = self.k_star * self.f0**2 - self.eps * self.df0**2
        if self.k_bar is not None and abs(kb - self.k_bar) > 1e-12 * max(1.0, abs(kb)):
            raise PreconditionError(f"initial data give kbar = {kb!r}, not {self.k_bar!r}")

    @property
    def kbar_value(self) -> float:
        return self.k_star * self.f0**2 - self.eps * self.df0**2

    @property
    def tag(self) -> str:
        mu = self.eps * self.k_star
        f0, df0 = self.f0, self.df0
        if mu == 0:
            if df0 == 0:
                return "const"
            return "t" if f0 == 0 else "linear"
        if mu > 0:
            r = math.sqrt(mu)
            if df0 == 0:
                return "cosh"
            if f0 == 0:
                return "sinh"
            if math.isclose(abs(df0), r * abs(f0), rel_tol=1e-12):
                return "exp"
            root = "√2" if math.isclose(mu, 2.0) else f"√{mu:g}"
            return f"mixed-exp({root})"
        if df0 == 0:
            return "cos"
        if f0 == 0:
            return "sin"
        return "numeric"

    def closed_form(self, t):
        t = np.asarray(t, dtype=float)
        mu = self.eps * self.k_star
        if mu == 0:
            return self.f0 + self.df0 * t
        if mu > 0:
            r = math.sqrt(mu)
            return self.f0 * np.cosh(r * t) + self.df0 / r * np.sinh(r * t)
        r = math.sqrt(-mu)
        return self.f0 * np.cos(r * t) + self.df0 / r * np.sin(r * t)


def solve_ft(p: FtProblem, t_span=(0.0, 1.0), step: float = 1e-3) -> Trajectory:
    mu = p.eps * p.k_star

    def f(_, y):
        return np.stack([y[..., 1], mu * y[..., 0]], axis=-1)

    xs, ys, _ = rk4(f, [p.f0, p.df0], *t_span, step)
    inv = p.k_star * ys[:, 0] ** 2 - p.eps * ys[:, 1] ** 2
    return Trajectory("ft", xs, ys, ("f", "df"), {"kbar": inv}, p.tag)


# ---------------------------------------------------------------------------
# Extremal surfaces K''' + K K' = 0
# ---------------------------------------------------------------------------


def _extremal_rhs(_, y):
    return np.stack([y[..., 1], y[..., 2], -y[..., 0] * y[..., 1]], axis=-1)


def _extremal_integrals(y):
    K, dK, ddK = y[..., 0], y[..., 1], y[..., 2]
    c = 2 * ddK + K**2
    return c, dK**2 - c * K + K**3 / 3


@dataclass(frozen=True)
class ExtremalSurfaceParams:
    """Integration constants ``c, d`` and initial ``K0`` (``dK0`` defaults to the non-negative root).

    With ``K0`` omitted the orbit starts at the largest turning point, the
    largest real zero of ``cK - K^3/3 + d``.
    """

    c: float
    d: float
    K0: float | None = None
    dK0: float | None = None

    @property
    def initial(self) -> np.ndarray:
        K0 = self.K0
        if K0 is None:
            roots = np.roots([-1 / 3, 0.0, self.c, self.d])
            real = roots[np.abs(roots.imag) < 1e-9].real
            if real.size == 0:
                raise PreconditionError("no turning point for these constants")
            K0 = float(np.max(real))
            q = 0.0
        else:
            q = self.c * K0 - K0**3 / 3 + self.d
            if abs(q) <= 1e-14 * max(1.0, abs(self.c * K0), abs(K0) ** 3 / 3, abs(self.d)):
                q = 0.0  # a turning point up to rounding; sqrt would amplify the residue
        if self.dK0 is None:
            if q < -1e-12 * max(1.0, abs(self.d)):
                raise PreconditionError(f"K0 = {K0!r} is outside the real orbit (K'^2 = {q!r})")
            dK0 = math.sqrt(max(q, 0.0))
        else:
            dK0 = self.dK0
            if abs(dK0**2 - q) > 1e-12 * max(1.0, abs(q), dK0**2):
                raise PreconditionError("initial data inconsistent with (c, d)")
        return np.array([K0, dK0, (self.c - K0**2) / 2])


@dataclass
class ExtremalSolution:
    params: ExtremalSurfaceParams
    trajectory: Trajectory

    def interpolant(self) -> _Interpolant:
        t = self.trajectory
        return _Interpolant(_extremal_rhs, t.param, t.states)

    def functions(self, name: str = "K") -> dict:
        """``name`` -> K and ``d<name>`` -> K' as functions with two derivatives each."""
        it = self.interpolant()

        def k_derivs(v):
            s = it(v)
            return s[..., 0], s[..., 1], s[..., 2]

        def dk_derivs(v):
            s = it(v)
            return s[..., 1], s[..., 2], -s[..., 0] * s[..., 1]

        return {name: UnivariateFunction(name, k_derivs), "d" + name: UnivariateFunction("d" + name, dk_derivs)}

    def metric(self, margin: float = 0.05) -> MetricSpec:
        """The surface metric dt^2 + K'(t)^2 dx^2."""
        fns = self.functions()
        t0, t1 = self.trajectory.param[0], self.trajectory.param[-1]
        spec = parse_metric("diag(t,x;+1,+1;1,dK(t)^2)", functions=fns)
        return spec.with_domain({"t": [min(t0, t1) + margin, max(t0, t1) - margin], "x": [-1.0, 1.0]})


def solve_extremal(p: ExtremalSurfaceParams, t_span=(0.0, 1.0), step: float = 1e-3) -> ExtremalSolution:
    xs, ys, _ = rk4(_extremal_rhs, p.initial, *t_span, step)
    c, d = _extremal_integrals(ys)
    flags = [{"kind": "dK-zero", "at": t} for t in _sign_changes(xs, ys[:, 1])]
    traj = Trajectory("extremal", xs, ys, ("K", "dK", "ddK"), {"c": c, "d": d}, None, flags)
    return ExtremalSolution(p, traj)


def extremal_product_metric(a: ExtremalSolution, b: ExtremalSolution, margin: float = 0.05) -> MetricSpec:
    """(K + K*)^-2 (dt^2 + K'^2 dx^2 + ds^2 + K*'^2 dy^2); Einstein with -3(d + d*) when c agrees."""
    fns = {**a.functions("K"), **b.functions("Ks")}
    text = "conformal(1/(K(t) + Ks(s)), product(diag(t,x;+1,+1;1,dK(t)^2), diag(s,y;+1,+1;1,dKs(s)^2)))"
    spec = parse_metric(text, functions=fns)
    ta, tb = a.trajectory.param, b.trajectory.param
    return spec.with_domain(
        {
            "t": [ta.min() + margin, ta.max() - margin],
            "s": [tb.min() + margin, tb.max() - margin],
            "x": [-1.0, 1.0],
            "y": [-1.0, 1.0],
        }
    )


# ---------------------------------------------------------------------------
# Iterated warped products
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IteratedWarpProblem:
    """u u'' + (n-2)/2 u'^2 + d u^2 - k (n-2)/2 = 0 with initial ``(u0, du0)`` at ``x0``.

    The exported metric ``+-u'^2 dt^2 + dx^2 + u^2 g_k`` has dimension ``n + 1``
    and Einstein constant ``2d``; ``kbar = 2d/n`` is its normalized scalar curvature.
    Declared ``c`` or ``e`` are checked against the initial data.
    """

    n: int
    k: float
    d: float
    u0: float
    du0: float
    x0: float = 0.0
    c: float | None = None
    e: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise PreconditionError("iterated warp needs n >= 3")
        if not self.u0 > 0:
            raise PreconditionError("u0 must be positive")
        for name, declared, actual in (("c", self.c, self.c_value), ("e", self.e, self.e_value)):
            if declared is not None and abs(declared - actual) > 1e-10 * max(1.0, abs(actual)):
                raise PreconditionError(f"initial data give {name} = {actual!r}, not {declared!r}")

    @classmethod
    def from_constants(cls, n: int, k: float, kbar: float, c: float, u0: float, x0: float = 0.0):
        """Start at a point with ``u = u0``; ``u'`` is chosen non-negative from the first integral."""
        q = u0 ** (2 - n) * (c - kbar * u0**n + k * u0 ** (n - 2))
        if q < -1e-12:
            raise PreconditionError(f"u0 = {u0!r} lies where the first integral has no real u'")
        return cls(n, k, kbar * n / 2, u0, math.sqrt(max(q, 0.0)), x0)

    @property
    def kbar(self) -> float:
        return 2 * self.d / self.n

    @property
    def c_value(self) -> float:
        return float(_first(self.n, self.k, self.d, np.array(self.u0), np.array(self.du0)))

    @property
    def e_value(self) -> float:
        return float(_oscillator(self.n, self.k, self.d, np.array(self.u0), np.array(self.du0)))

    def rhs(self):
        n, k, d = self.n, self.k, self.d
        a, b = k * (n - 2) / 2, (n - 2) / 2

        def f(_, y):
            u, p = y[..., 0], y[..., 1]
            return np.stack([p, (a - b * p * p - d * u * u) / u], axis=-1)

        return f


def _first(n, k, d, u, p):
    return u ** (n - 2) * (p**2 + (2 * d / n) * u**2 - k)


def _oscillator(n, k, d, u, p):
    return (n * n / 4) * u ** (n - 2) * p**2 + (d * n / 2) * u**n - k * (n * n / 4) * u ** (n - 2)


def warp_rhs_jet(problem: IteratedWarpProblem, u, p):
    """u'' and u''' along solutions, from a jet of the right-hand side F(u, u')."""
    n, k, d = problem.n, problem.k, problem.d
    uj, pj = lift_point(np.stack([np.asarray(u, float), np.asarray(p, float)], axis=-1))
    F = (k * (n - 2) / 2 - ((n - 2) / 2) * pj * pj - d * uj * uj) / uj
    u2 = F.value
    u3 = F.gradient[..., 0] * np.asarray(p) + F.gradient[..., 1] * u2
    return u2, u3


def fiber_text(dim: int, k: float) -> str:
    """An Einstein metric with normalized scalar curvature ``k`` in dimension ``dim``."""
    if k == 0:
        return f"flat({dim})"
    base = f"sphere({dim})" if k > 0 else f"hyperbolic({dim})"
    if abs(k) == 1:
        return base
    return f"conformal({1 / math.sqrt(abs(k))!r}, {base})"


@dataclass
class WarpSolution:
    problem: IteratedWarpProblem
    trajectory: Trajectory

    def interpolant(self) -> _Interpolant:
        return _Interpolant(self.problem.rhs(), self.trajectory.param, self.trajectory.states)

    def iterated_residual(self) -> np.ndarray:
        """Residual of u^2 u''' + (n-3) u u' u'' - (n-2) u'^3 + k (n-2) u' along the nodes."""
        n, k = self.problem.n, self.problem.k
        u, p = self.trajectory.states[:, 0], self.trajectory.states[:, 1]
        u2, u3 = warp_rhs_jet(self.problem, u, p)
        return u * u * u3 + (n - 3) * u * p * u2 - (n - 2) * p**3 + k * (n - 2) * p

    def functions(self) -> dict:
        it = self.interpolant()
        prob = self.problem

        def u_derivs(v):
            s = it(v)
            u2, _ = warp_rhs_jet(prob, s[..., 0], s[..., 1])
            return s[..., 0], s[..., 1], u2

        def du_derivs(v):
            s = it(v)
            u2, u3 = warp_rhs_jet(prob, s[..., 0], s[..., 1])
            return s[..., 1], u2, u3

        return {"u": UnivariateFunction("u", u_derivs), "du": UnivariateFunction("du", du_derivs)}

    def metric(self, time_sign: int = 1, margin: float = 0.05, x_range=None) -> MetricSpec:
        """The Einstein metric +-u'(x)^2 dt^2 + dx^2 + u(x)^2 g_k."""
        sign = "+1" if time_sign > 0 else "-1"
        fib = fiber_text(self.problem.n - 1, self.problem.k)
        text = f"warped(diag(x,t;+1,{sign};1,du(x)^2), u(x), {fib})"
        spec = parse_metric(text, functions=self.functions())
        xs = self.trajectory.param
        if x_range is None:
            x_range = [xs.min() + margin, xs.max() - margin]
        return spec.with_domain({"x": list(x_range), "t": [-1.0, 1.0]})


def solve_iterated_warp(p: IteratedWarpProblem, x_span=None, step: float = 1e-3) -> WarpSolution:
    """Integrate the order-two form from ``p.x0``; stops if u reaches 0."""
    if x_span is None:
        x_span = (p.x0, p.x0 + 1.0)
    if x_span[0] != p.x0:
        raise ValueError("x_span must start at the problem's x0")
    f = p.rhs()
    xs, ys, stopped = rk4(f, [p.u0, p.du0], *x_span, step, stop=lambda y: not y[0] > 0)
    u, du = ys[:, 0], ys[:, 1]
    inv = {"c": _first(p.n, p.k, p.d, u, du), "e": _oscillator(p.n, p.k, p.d, u, du)}
    flags = [{"kind": "du-zero", "at": x} for x in _sign_changes(xs, du)]
    truncated = float(xs[-1]) if stopped else None
    if stopped:
        flags.append({"kind": "u-nonpositive", "at": truncated})
    return WarpSolution(p, Trajectory("warp", xs, ys, ("u", "du"), inv, None, flags, truncated))


# ---------------------------------------------------------------------------
# Pointwise residuals of the one-factor equations
# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    residuals: dict
    passed: dict
    constants: dict
    tol: float
    n_points: int

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {
            "residuals": self.residuals,
            "pass": self.passed,
            "constants": self.constants,
            "tol": self.tol,
            "n_points": self.n_points,
        }


def conf_product_residual(
    phi, g_star: MetricSpec, n: int | None = None, k_bar: float | None = None, grid=None, tol: float = 1e-7,
    npts: int = DEFAULT_GRID,
) -> ResidualReport:
    """Residuals of ``phi Ric* + (n-1) hess* phi = 0`` and ``|grad phi|^2 + phi^2 k* + kbar = 0``.

    ``k*`` is estimated as the grid mean of ``S*/(n(n-1))``.  If ``k_bar`` is
    omitted it is estimated from the second equation and only its constancy is tested.
    """
    n = g_star.dim if n is None else n
    grid = make_grid(g_star, npts) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    cb = curvature_batch(g_star, grid)
    h = hessian_batch(phi, g_star, grid, cb)
    k_star = float(np.mean(cb.scalar)) / (n * (n - 1))
    eq1 = h.value[:, None, None] * cb.ricci + (n - 1) * h.hessian
    base = h.grad_norm2 + h.value**2 * k_star
    kb = float(-np.mean(base)) if k_bar is None else float(k_bar)
    eq2 = base + kb
    r1, r2 = float(np.max(np.abs(eq1))), float(np.max(np.abs(eq2)))
    return ResidualReport(
        {"einstein": r1, "trace": r2},
        {"einstein": r1 < tol, "trace": r2 < tol},
        {"k_star": k_star, "k_bar": kb},
        tol,
        int(grid.shape[0]),
    )


def corvino_residual(f, g_star: MetricSpec, grid=None, tol: float = 1e-7, npts: int = DEFAULT_GRID) -> ResidualReport:
    """Residuals of ``f Ric* - hess* f + lap* f g* = 0`` and its trace ``f S* + (n-1) lap* f = 0``."""
    n = g_star.dim
    grid = make_grid(g_star, npts) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    cb = curvature_batch(g_star, grid)
    h = hessian_batch(f, g_star, grid, cb)
    eq = h.value[:, None, None] * cb.ricci - h.hessian + h.laplacian[:, None, None] * cb.g
    tr = h.value * cb.scalar + (n - 1) * h.laplacian
    r1, r2 = float(np.max(np.abs(eq))), float(np.max(np.abs(tr)))
    s_spread = float(np.max(cb.scalar) - np.min(cb.scalar))
    return ResidualReport(
        {"corvino": r1, "trace": r2},
        {"corvino": r1 < tol, "trace": r2 < tol},
        {"scalar_mean": float(np.mean(cb.scalar)), "scalar_spread": s_spread},
        tol,
        int(grid.shape[0]),
    )


# ---------------------------------------------------------------------------
# Inverse function x(u) by quadrature
# ---------------------------------------------------------------------------


@dataclass
class QuadratureResult:
    """``x(u)`` from a zero ``u0`` of P.  A double zero makes the integral diverge.

    ``log_slope`` is the large-u asymptote of dx/d(log u), ``1/sqrt(-kbar)``,
    when ``kbar < 0``; ``linear_slope`` is ``1/sqrt(k)`` when ``kbar = 0``.
    """

    x: float
    diverges: bool
    root_order: int
    log_slope: float | None
    linear_slope: float | None

    def to_dict(self) -> dict:
        return {
            "x": None if self.diverges else self.x,
            "diverges": self.diverges,
            "root_order": self.root_order,
            "log_slope": self.log_slope,
            "linear_slope": self.linear_slope,
        }


def _poly(n, kbar, k, c):
    def P(v):
        return c - kbar * v**n + k * v ** (n - 2)

    def dP(v):
        return v ** (n - 3) * (k * (n - 2) - kbar * n * v * v)

    return P, dP


def quadrature_x_of_u(p: IteratedWarpProblem, u0: float, u: float) -> QuadratureResult:
    """x(u) = int_{u0}^{u} sqrt(v^(n-2) / P(v)) dv with P(v) = c - kbar v^n + k v^(n-2).

    Square-root endpoint singularities at simple zeros are removed by the
    substitutions ``v = u0 + s^2`` (lower end) and ``v = u2 - s^2`` (next zero
    ``u2`` above), then ``scipy.integrate.quad`` handles the smooth integrands.
    """
    from .classify import positive_roots

    n, kbar, k, c = p.n, p.kbar, p.k, p.c_value
    P, dP = _poly(n, kbar, k, c)
    scale = abs(c) + abs(kbar) * u0**n + abs(k) * u0 ** (n - 2)
    if abs(P(u0)) > 1e-9 * max(scale, 1e-300):
        raise PreconditionError(f"u0 = {u0!r} is not a zero of P (P(u0) = {P(u0)!r})")
    if not u > u0:
        raise PreconditionError("need u > u0")
    log_slope = 1 / math.sqrt(-kbar) if kbar < 0 else None
    linear_slope = 1 / math.sqrt(k) if kbar == 0 and k > 0 else None
    double = abs(dP(u0)) * u0 < 1e-7 * max(scale, 1e-300)
    if double:
        return QuadratureResult(math.inf, True, 2, log_slope, linear_slope)
    roots = [r for r, _ in positive_roots(n, kbar, k, c) if r > u0 * (1 + 1e-9)]
    u2 = roots[0] if roots else None
    if u2 is not None and u > u2 * (1 + 1e-12):
        raise PreconditionError(f"P changes sign at {u2!r} inside (u0, u]")
    if P(0.5 * (u0 + u)) <= 0:
        raise PreconditionError("P is not positive on (u0, u]")

    def integrand(v):
        return math.sqrt(v ** (n - 2) / P(v)) if P(v) > 0 else 0.0

    mid = 0.5 * (u0 + u)
    lower, _ = integrate.quad(
        lambda s: 2 * s * integrand(u0 + s * s), 0.0, math.sqrt(mid - u0), epsabs=1e-13, epsrel=1e-13, limit=200
    )
    if u2 is not None:
        upper, _ = integrate.quad(
            lambda s: 2 * s * integrand(u2 - s * s),
            math.sqrt(max(u2 - u, 0.0)),
            math.sqrt(u2 - mid),
            epsabs=1e-13,
            epsrel=1e-13,
            limit=200,
        )
    else:
        upper, _ = integrate.quad(integrand, mid, u, epsabs=1e-13, epsrel=1e-13, limit=200)
    return QuadratureResult(lower + upper, False, 1, log_slope, linear_slope)

