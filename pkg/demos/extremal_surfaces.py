# Extremal surfaces dt^2 + K'(t)^2 dx^2 with K''' + K K' = 0, their products,
# and profile data for drawing them as surfaces of revolution.
import math

import numpy as np

from einstein_forge.curvature import curvature_batch, einstein_residual, make_grid
from einstein_forge.odes import ExtremalSurfaceParams, extremal_product_metric, solve_extremal
from einstein_forge.profiles import beltrami_profile, figure1_profile

# c = 2, d = -4/3: K oscillates between sqrt(3) - 1 and 2
p = ExtremalSurfaceParams(c=2.0, d=-4 / 3)
sol = solve_extremal(p, (0.0, 20.0), step=1e-3)
K = sol.trajectory.states[:, 0]
print("K range :", K.min(), K.max(), " expected", math.sqrt(3) - 1, 2.0)
print("drift   :", sol.trajectory.drift)

# The Gauss curvature of the surface is K itself
piece = solve_extremal(p, (0.2, 1.2), step=1e-3)
spec = piece.metric()
grid = make_grid(spec, 16)
gauss = curvature_batch(spec, grid).scalar / 2
print("Gauss - K:", np.max(np.abs(gauss - piece.interpolant()(grid[:, 0])[:, 0])))

# Two orbits with the same c give an Einstein 4-metric with lambda = -3(d + d*)
other = solve_extremal(ExtremalSurfaceParams(2.0, -4 / 3, 1.5, -math.sqrt(3 - 1.125 - 4 / 3)), (0.0, 0.8), 1e-3)
rep = einstein_residual(extremal_product_metric(piece, other))
print("product lambda:", rep.lambda_hat, " predicted", -3 * (-4 / 3 - 4 / 3))

# Profiles: radius |K'|, height with h'^2 + r'^2 = 1, and the curvature column
fig = figure1_profile()
print("figure1 :", {k: fig.summary()[k] for k in ("points", "t_range", "K_range", "singular_ends")})
bel = beltrami_profile()
print("beltrami: t0 =", bel.t[0], " K(t0) =", bel.K[0])
print(bel.csv().splitlines()[0], "...", bel.csv().splitlines()[1])
