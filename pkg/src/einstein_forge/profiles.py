"""Surface-of-revolution profiles for plotting.

A surface of revolution with radius ``r(t)`` and height ``h(t)`` and
``h' = sqrt(1 - r'^2)`` carries the metric ``dt^2 + r(t)^2 dx^2``.  Two profiles:

* ``figure1``: an extremal-surface orbit with ``r = |K'|`` and ``K`` the curvature
  column, so ``r' = +-K''``.
* ``beltrami``: ``r = 24 t^-3`` with curvature ``K = -12 t^-2``, starting where
  ``h'`` first vanishes, ``t0 = 72^(1/4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import PreconditionError
from .odes import ExtremalSurfaceParams, solve_extremal

__all__ = ["Profile", "figure1_profile", "beltrami_profile", "BELTRAMI_T0"]

BELTRAMI_T0 = 72 ** 0.25


@dataclass
class Profile:
    kind: str
    t: np.ndarray
    r: np.ndarray
    h: np.ndarray
    K: np.ndarray
    notes: dict = field(default_factory=dict)

    def csv(self, path=None) -> str:
        lines = ["t,r,h,K"]
        for row in zip(self.t, self.r, self.h, self.K):
            lines.append(",".join(repr(float(x)) for x in row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "points": int(self.t.size),
            "t_range": [float(self.t[0]), float(self.t[-1])],
            "r_range": [float(self.r.min()), float(self.r.max())],
            "h_end": float(self.h[-1]),
            "K_range": [float(self.K.min()), float(self.K.max())],
            **self.notes,
        }


def _cumulative_quad(f, t: np.ndarray) -> np.ndarray:
    """Running integral of ``f`` from ``t[0]``, adaptive quadrature per segment."""
    pieces = [integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-12, limit=100)[0] for a, b in zip(t[:-1], t[1:])]
    return np.concatenate([[0.0], np.cumsum(pieces)])


def beltrami_profile(t_max: float = 6.0, points: int = 201) -> Profile:
    """r = 24 t^-3, h = int_{t0}^t sqrt(1 - (72 tau^-4)^2) dtau, K = -12 t^-2."""
    t0 = BELTRAMI_T0
    if not t_max > t0:
        raise PreconditionError(f"empty domain: t_max must exceed t0 = {t0!r}")
    t = np.linspace(t0, t_max, points)
    h = _cumulative_quad(lambda s: math.sqrt(max(0.0, 1 - (72 * s**-4) ** 2)), t)
    return Profile("beltrami", t, 24 * t**-3, h, -12 * t**-2, {"t0": t0, "K_t0": -12 / t0**2})


def figure1_profile(c: float = 2.0, d: float = -4 / 3, K0: float | None = None, step: float = 1e-3) -> Profile:
    """Half an orbit of the extremal system, from a turning point to the next.

    The radius ``|K'|`` vanishes at both ends.  An end closes smoothly when
    ``|K''| = 1`` there; otherwise the surface has a conical singularity
    (reported as ``singular_ends``).  Points where ``K''^2 > 1`` are cut off.
    """
    p = ExtremalSurfaceParams(c, d, K0)
    roots = np.roots([-1 / 3, 0.0, c, d])
    real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    start = p.initial[0]
    below = real[real < start - 1e-9]
    if below.size == 0:
        raise PreconditionError("orbit is not bounded below")
    # extend the window until K' changes sign, then stop at that turning point
    span = 2.0
    while True:
        sol = solve_extremal(p, (0.0, span), step)
        later = [f["at"] for f in sol.trajectory.flags if f["at"] > 0]
        if later:
            break
        if span > 200:
            raise PreconditionError("orbit does not return within the integration window")
        span *= 2
    t_end = later[0]
    ts, states = sol.trajectory.param, sol.trajectory.states
    keep = ts < t_end
    last = sol.interpolant()(np.array([t_end]))[0]
    t = np.append(ts[keep], t_end)
    K = np.append(states[keep, 0], last[0])
    dK = np.append(states[keep, 1], 0.0)
    ddK = np.append(states[keep, 2], last[2])
    ok = ddK**2 <= 1 + 1e-12
    cut = int(np.argmin(ok)) if not ok.all() else t.size
    t, K, dK, ddK = t[:cut], K[:cut], dK[:cut], ddK[:cut]
    # h' = sqrt(1 - K''^2) is smooth along the nodes; composite Simpson is plenty for plotting
    h = integrate.cumulative_simpson(np.sqrt(np.clip(1 - ddK**2, 0.0, None)), x=t, initial=0.0)
    ends = []
    for label, k_end, dd in (("start", K[0], ddK[0]), ("end", K[-1], ddK[-1])):
        if abs(abs(dd) - 1) > 1e-6:
            ends.append({"at": label, "K": float(k_end), "cone_slope": float(abs(dd))})
    notes = {
        "c": c,
        "d": d,
        "K_bounds": [float(below[-1]), float(start)],
        "singular_ends": ends,
        "drift": sol.trajectory.drift,
    }
    return Profile("figure1", t, np.abs(dK), h, K, notes)
