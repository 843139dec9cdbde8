"""Completeness classification for iterated warps and the drop-lemma polynomials.

Along a solution of the iterated-warp equation with constants ``(n, kbar, k, c)``
the first integral reads ``u^(n-2) u'^2 = P(u)`` with

    P(v) = c - kbar v^n + k v^(n-2),

so u moves only where ``P >= 0`` and turns around at simple zeros of P.  The
positive zeros of P decide the global shape:

============  ======================================  =============================
verdict       zeros of P                              behaviour of u
============  ======================================  =============================
Classical     c = 0                                   solves u'^2 + kbar u^2 = k
Type I        one double zero, kbar < 0               creeps off the zero, log-slope
                                                      ``1/sqrt(-kbar)`` at large u
Type II       one simple zero, kbar = 0               linear growth, slope ``sqrt(k)``
Type III      simple zero with P > 0 above, kbar < 0  exponential growth
PeriodicEjiri two simple zeros, P > 0 between         oscillates between them
Degenerate    anything else                           u reaches 0 or never moves
============  ======================================  =============================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import PreconditionError

__all__ = [
    "CompletenessVerdict",
    "positive_roots",
    "classify_warp",
    "DropLemmaReport",
    "drop_polynomial",
    "DropInstance",
    "drop_instance",
    "critical_second_derivatives",
]

ROOT_XTOL = 1e-12
DOUBLE_ROOT_TOL = 1e-9
MAX_DROP_DEGREE = 60


def _poly(n, kbar, k, c):
    def P(v):
        return c - kbar * v**n + k * v ** (n - 2)

    return P


def _scale(n, kbar, k, c, v):
    return max(abs(c), abs(kbar) * v**n, abs(k) * v ** (n - 2), 1e-300)


def _upper_bound(n, kbar, k, c) -> float:
    """A v beyond which the leading term fixes the sign of P."""
    v = 1.0
    for _ in range(400):
        if kbar != 0:
            if abs(kbar) * v**n > 10 * (abs(c) + abs(k) * v ** (n - 2)):
                return v
        elif k != 0:
            if abs(k) * v ** (n - 2) > 10 * abs(c):
                return v
        else:
            return v
        v *= 2
    raise PreconditionError("could not bound the zeros of P")


def positive_roots(n: int, kbar: float, k: float, c: float) -> list[tuple[float, int]]:
    """Positive zeros of P with multiplicity (1 or 2), ascending.

    P' = v^(n-3) (k(n-2) - kbar n v^2) vanishes at most at one positive
    ``v* = sqrt(k(n-2) / (kbar n))``, so P is monotone on (0, v*] and [v*, oo).
    Each monotone piece is bracketed and bisected to ``1e-12``.  A critical
    value ``|P(v*)| < 1e-9 * scale`` counts as a double zero.
    """
    P = _poly(n, kbar, k, c)
    vmax = _upper_bound(n, kbar, k, c)
    breaks = [0.0]
    vstar = None
    if kbar != 0 and k * kbar > 0:
        vstar = math.sqrt(k * (n - 2) / (kbar * n))
        if abs(P(vstar)) < DOUBLE_ROOT_TOL * _scale(n, kbar, k, c, vstar):
            others = [
                (r, m) for r, m in _bisect_pieces(P, [0.0, vstar, max(vmax, 2 * vstar)]) if abs(r - vstar) > 1e-6 * vstar
            ]
            return sorted(others + [(vstar, 2)])
        breaks.append(vstar)
    breaks.append(max(vmax, 2 * vstar) if vstar else vmax)
    return _bisect_pieces(P, breaks)


def _bisect_pieces(P, breaks) -> list[tuple[float, int]]:
    out = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        plo, phi = P(lo), P(hi)
        if plo == 0 and lo > 0:
            out.append((lo, 1))
        elif plo * phi < 0:
            r = optimize.bisect(P, lo, hi, xtol=ROOT_XTOL, maxiter=500)
            out.append((float(r), 1))
    if P(breaks[-1]) == 0:
        out.append((breaks[-1], 1))
    seen = []
    for r, m in sorted(out):
        if not seen or abs(r - seen[-1][0]) > 1e-10 * max(1.0, r):
            seen.append((r, m))
    return seen


@dataclass
class CompletenessVerdict:
    type: str
    roots: list
    case: str | None
    asymptote: dict | None
    explanation: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "type": self.type,
            "roots": [{"value": r, "order": m} for r, m in self.roots],
            "case": self.case,
            "asymptote": self.asymptote,
            "explanation": self.explanation,
        }


def _classical_family(kbar, k) -> str | None:
    if kbar > 0:
        return "sin" if k > 0 else None
    if kbar < 0:
        if k > 0:
            return "sinh"
        return "cosh" if k < 0 else "exp"
    return "linear" if k > 0 else ("const" if k == 0 else None)


def classify_warp(n: int, kbar: float, k: float, c: float) -> CompletenessVerdict:
    """Global behaviour of positive solutions with constants ``(n, kbar, k, c)``."""
    if n < 3:
        raise PreconditionError("classification needs n >= 3")
    if kbar == 0 and k == 0 and c == 0:
        raise PreconditionError("all constants vanish")
    params = {"n": n, "kbar": kbar, "k": k, "c": c}
    if c == 0:
        fam = _classical_family(kbar, k)
        if fam is None:
            return CompletenessVerdict("Degenerate", [], None, None, "u'^2 = k - kbar u^2 has no positive solution", params)
        return CompletenessVerdict(
            "Classical", [], None, {"family": fam}, f"c = 0 reduces to u'^2 + kbar u^2 = k ({fam})", params
        )
    roots = positive_roots(n, kbar, k, c)
    P = _poly(n, kbar, k, c)

    def above(r):
        return P(r * (1 + 1e-6) + 1e-12) > 0

    if len(roots) == 1 and roots[0][1] == 2:
        u0 = roots[0][0]
        if kbar < 0 and above(u0):
            return CompletenessVerdict(
                "Type I",
                roots,
                "Case1",
                {"growth": "exponential", "log_slope": 1 / math.sqrt(-kbar), "from": u0},
                "double zero: u leaves it only asymptotically, x(u) diverges at the zero",
                params,
            )
        return CompletenessVerdict("Degenerate", roots, None, None, "double zero without an admissible branch", params)
    simple = [r for r, m in roots if m == 1]
    if len(simple) == 1 and len(roots) == 1:
        u0 = simple[0]
        if above(u0):
            if kbar == 0:
                return CompletenessVerdict(
                    "Type II",
                    roots,
                    "Case2",
                    {"growth": "linear", "slope": math.sqrt(k), "from": u0},
                    "turns at the zero and grows linearly in both directions",
                    params,
                )
            if kbar < 0:
                return CompletenessVerdict(
                    "Type III",
                    roots,
                    "Case2",
                    {"growth": "exponential", "log_slope": 1 / math.sqrt(-kbar), "from": u0},
                    "turns at the zero and grows exponentially in both directions",
                    params,
                )
        return CompletenessVerdict("Degenerate", roots, None, None, "P > 0 only below the zero: u reaches 0", params)
    if len(roots) == 2 and all(m == 1 for _, m in roots):
        u1, u2 = roots[0][0], roots[1][0]
        if P(0.5 * (u1 + u2)) > 0 and kbar > 0:
            return CompletenessVerdict(
                "PeriodicEjiri",
                roots,
                "Case3",
                {"growth": "bounded", "range": [u1, u2]},
                "oscillates between the two zeros",
                params,
            )
        if kbar < 0 and above(u2):
            return CompletenessVerdict(
                "Type III",
                roots,
                "Case3",
                {"growth": "exponential", "log_slope": 1 / math.sqrt(-kbar), "from": u2},
                "the branch above the larger zero grows exponentially",
                params,
            )
    return CompletenessVerdict("Degenerate", roots, None, None, "no branch of P > 0 supports a complete solution", params)


# ---------------------------------------------------------------------------
# Drop lemma
# ---------------------------------------------------------------------------


@dataclass
class DropLemmaReport:
    """phi_m(x) = (x-1)^m (x+m) - (x+1)^m (x-m) with exact integer coefficients (ascending)."""

    m: int
    coefficients: list
    parity_positive: bool
    no_positive_zero: bool
    recursion_ok: bool

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "coefficients": self.coefficients,
            "parity_positive": self.parity_positive,
            "no_positive_zero": self.no_positive_zero,
            "recursion_ok": self.recursion_ok,
        }


def _phi_coeffs(m: int) -> list[int]:
    # (x + s)^m (x + t) expanded with binomials, for (s, t) = (-1, m) and (1, -m)
    def expand(s, t):
        a = [math.comb(m, j) * s ** (m - j) for j in range(m + 1)]  # coefficient of x^j
        out = [0] * (m + 2)
        for j, aj in enumerate(a):
            out[j + 1] += aj
            out[j] += t * aj
        return out

    p, q = expand(-1, m), expand(1, -m)
    coeffs = [x - y for x, y in zip(p, q)]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def drop_polynomial(m: int) -> DropLemmaReport:
    """Exact phi_m, the parity pattern of its coefficients and phi_m' = (m+1) phi_(m-1)."""
    if not 2 <= m <= MAX_DROP_DEGREE:
        raise PreconditionError(f"m must lie in [2, {MAX_DROP_DEGREE}]")
    co = _phi_coeffs(m)
    parity = all(
        (co[j] if j < len(co) else 0) > 0 if (j - m) % 2 == 0 else (co[j] if j < len(co) else 0) == 0
        for j in range(m - 1)
    )
    # non-negative coefficients with a positive one: no zero on x > 0
    no_zero = all(a >= 0 for a in co) and any(a > 0 for a in co)
    deriv = [j * co[j] for j in range(1, len(co))] or [0]
    if m > 2:
        prev = _phi_coeffs(m - 1)
        width = max(len(deriv), len(prev))
        pad = lambda a: a + [0] * (width - len(a))  # noqa: E731
        rec = pad(deriv) == [(m + 1) * a for a in pad(prev)]
    else:
        rec = deriv == [0]
    return DropLemmaReport(m, co, parity, no_zero, rec)


@dataclass
class DropInstance:
    n: int
    alpha: float
    beta: float
    y: float
    A: float
    B: float
    gamma_A: float
    gamma_B: float
    g_A_at_A: float
    g_B_at_B: float
    dg_A_at_A: float
    dg_B_at_B: float

    @property
    def consistent(self) -> bool:
        """Both zeros are where they should be, with slopes 2 and -2 (u'' = +-1)."""
        return (
            max(abs(self.g_A_at_A), abs(self.g_B_at_B), abs(self.dg_A_at_A - 2), abs(self.dg_B_at_B + 2)) < 1e-10
        )

    @property
    def gammas_equal(self) -> bool:
        return abs(self.gamma_A - self.gamma_B) < 1e-10 * max(1.0, abs(self.gamma_A))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "beta": self.beta,
            "y": self.y,
            "A": self.A,
            "B": self.B,
            "gamma_A": self.gamma_A,
            "gamma_B": self.gamma_B,
            "g_A_at_A": self.g_A_at_A,
            "g_B_at_B": self.g_B_at_B,
            "consistent": self.consistent,
            "gammas_equal": self.gammas_equal,
        }


def drop_instance(n: int, alpha: float, beta: float) -> DropInstance:
    """The two critical points of g(x) = alpha - beta x^2 + gamma x^(2-n) and the gammas they force.

    With ``u'^2 = g(u)`` one has ``u'' = g'(u)/2``.  A minimum ``A`` with
    ``u'' = 1`` and a maximum ``B`` with ``u'' = -1`` each fix gamma; a single
    solution with both would need ``gamma_A = gamma_B``, which fails.
    """
    if n < 3:
        raise PreconditionError("n must be at least 3")
    if beta == 0 or alpha * beta <= 0:
        raise PreconditionError("need alpha * beta > 0")
    y = math.sqrt(1 + (n - 2) * n * alpha * beta)
    A = (y - 1) / (n * beta)
    B = (y + 1) / (n * beta)
    gA = -(2 * A ** (n - 1) / (n - 2)) * (beta * A + 1)
    gB = (2 * B ** (n - 1) / (n - 2)) * (1 - beta * B)

    def g(x, gam):
        return alpha - beta * x * x + gam * x ** (2 - n)

    def dg(x, gam):
        return -2 * beta * x + (2 - n) * gam * x ** (1 - n)

    return DropInstance(n, alpha, beta, y, A, B, gA, gB, g(A, gA), g(B, gB), dg(A, gA), dg(B, gB))


def critical_second_derivatives(u, x_min: float, x_max: float) -> dict:
    """u'' at a minimum and a maximum of ``u`` (expression text in ``x`` or a callable)."""
    from .dsl import evaluate_expr, parse_expr
    from .jets import lift_coordinate

    e = parse_expr(u, ["x"]) if isinstance(u, str) else u
    x = lift_coordinate(0, np.array([[x_min], [x_max]]), 1)
    j = evaluate_expr(e, {"x": x})
    return {
        "u_min": float(j.value[0]),
        "u_max": float(j.value[1]),
        "du_min": float(j.gradient[0, 0]),
        "du_max": float(j.gradient[1, 0]),
        "ddu_min": float(j.hessian[0, 0, 0]),
        "ddu_max": float(j.hessian[1, 0, 0]),
    }
