"""Independent reference computations and hand-derived constants for the tests.

The curvature oracle differentiates plain metric values with fourth-order
central differences and contracts indices with explicit loops, so it shares
nothing with the jet-based engine except the metric coefficients.
"""

from __future__ import annotations

import math

import numpy as np

from einstein_forge.dsl import metric_values

FD_STEP = 2e-3

# hand-derived values, frozen before the solvers were written
SQRT3 = math.sqrt(3.0)
FROZEN = {
    "ejiri_c": -0.75,  # u = sqrt(2+cos x): u^2 (u'^2 + u^2/4 - 1) = -3/4
    "ejiri_roots": (1.0, SQRT3),  # w^2 - 4w + 3 = 0 with w = v^2
    "ejiri_scaled_ddu_min": 1.0,  # u = 2 sqrt(2+cos x) at x = pi
    "ejiri_scaled_ddu_max": -1.0 / SQRT3,  # at x = 0
    "type2_root": SQRT3 / 2,  # v^2 = 3/4
    "phi3": [0, 16],  # (x-1)^3 (x+3) - (x+1)^3 (x-3) = 16 x
    "phi2": [4],
    "drop_y": SQRT3,
    "drop_A": SQRT3 - 1,
    "drop_B": SQRT3 + 1,
    "drop_gamma_A": 3 - 2 * SQRT3,
    "figure1_bounds": (SQRT3 - 1, 2.0),  # a^3 - 6a + 4 = (a - 2)(a^2 + 2a - 2)
    "beltrami_t0": 72**0.25,
    "beltrami_K_t0": -math.sqrt(2.0),
    "main_kbar": {"main-cos-cosh": 0.0, "main-cos-sinh": -2.0, "main-quadratic": 8.0},
}

_D1 = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))
_D2 = ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))


def fd_metric_derivatives(spec, points, h: float = FD_STEP):
    """g, dg[..., i, j, a] and ddg[..., i, j, a, b] by fourth-order central differences."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1]
    eye = np.eye(d)

    def g_at(shift):
        return metric_values(spec, points + shift)

    g = g_at(0.0)
    dg = np.zeros(g.shape + (d,))
    ddg = np.zeros(g.shape + (d, d))
    for a in range(d):
        for s, w in _D1:
            dg[..., a] += w * g_at(s * h * eye[a])
        dg[..., a] /= h
        for s, w in _D2:
            ddg[..., a, a] += w * g_at(s * h * eye[a])
        ddg[..., a, a] /= h * h
        for b in range(a + 1, d):
            acc = np.zeros_like(g)
            for s, ws in _D1:
                for t, wt in _D1:
                    acc += ws * wt * g_at(s * h * eye[a] + t * h * eye[b])
            ddg[..., a, b] = ddg[..., b, a] = acc / (h * h)
    return g, dg, ddg


def fd_curvature(spec, points, h: float = FD_STEP):
    """Christoffel symbols, Riemann R^l_ijk and Ricci R_jk = R^i_ijk.

    Index contractions are written out as loops; only the batch of points is vectorised.
    """
    g, dg, ddg = fd_metric_derivatives(spec, points, h)
    d = g.shape[-1]
    gi = np.linalg.inv(g)
    dgi = np.zeros(g.shape + (d,))
    for m in range(d):
        dgi[..., m] = -gi @ dg[..., m] @ gi
    gam = np.zeros(g.shape[:1] + (d, d, d))
    dgam = np.zeros(g.shape[:1] + (d, d, d, d))  # d_m Gamma^k_ij
    for i in range(d):
        for j in range(d):
            for l in range(d):
                # first kind, then raised: Gamma^k_ij = g^kl [ij, l]
                first = 0.5 * (dg[:, l, j, i] + dg[:, l, i, j] - dg[:, i, j, l])
                dfirst = 0.5 * (ddg[:, l, j, i, :] + ddg[:, l, i, j, :] - ddg[:, i, j, l, :])
                for k in range(d):
                    gam[:, k, i, j] += gi[:, k, l] * first
                    dgam[:, k, i, j, :] += dgi[:, k, l, :] * first[:, None] + gi[:, k, l, None] * dfirst
    riem = np.zeros(g.shape[:1] + (d, d, d, d))
    for l in range(d):
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    val = dgam[:, l, j, k, i] - dgam[:, l, i, k, j]
                    for m in range(d):
                        val = val + gam[:, l, i, m] * gam[:, m, j, k] - gam[:, l, j, m] * gam[:, m, i, k]
                    riem[:, l, i, j, k] = val
    ric = np.zeros_like(g)
    for j in range(d):
        for k in range(d):
            for i in range(d):
                ric[:, j, k] += riem[:, i, i, j, k]
    return gam, riem, ric


def fd_derivative(f, x, h: float = 1e-3):
    """Fourth-order central first and second derivative of a scalar function."""
    d1 = sum(w * f(x + s * h) for s, w in _D1) / h
    d2 = sum(w * f(x + s * h) for s, w in _D2) / (h * h)
    return d1, d2
