# Conformal changes of metrics: the Mercator chart of the sphere, the
# transformation law for Ricci, and products that become Einstein after a
# conformal change.
import numpy as np

from einstein_forge import parse_metric
from einstein_forge.catalog import get_entry
from einstein_forge.conformal import (
    ConformalPair,
    conformal_ricci_delta,
    conformally_einstein_residual,
    direct_ricci_delta,
    main_theorem_constants,
)
from einstein_forge.curvature import einstein_residual, random_points

# dt^2 + g_sphere is not Einstein, but cosh(t)^-2 times it is the round sphere
inner = parse_metric("product(diag(t;+1;1), sphere(3))").with_domain({"t": [-1.5, 1.5]})
print("inner metric  :", inner.text())
print("inner Einstein:", einstein_residual(inner).passed)

pair = ConformalPair.from_text(inner, "cosh(t)")
rep = einstein_residual(pair.outer)
print("outer metric  :", pair.outer.text())
print("outer lambda  :", rep.lambda_hat, "residual", rep.max_residual)

# The criterion only needs curvature of the inner metric and the Hessian of phi
print("phi Ric° + (n-2) hess(phi)° :", conformally_einstein_residual(pair).max_residual)

# Ricci(phi^-2 g) - Ricci(g) by the transformation law and by two full evaluations
pts = random_points(inner, 5, seed=1)
law = conformal_ricci_delta(pair, pts)
direct = direct_ricci_delta(pair, pts)
print("law vs direct, max difference:", np.max(np.abs(law - direct)))

# Products (a(t) + b(s))^-2 (g~ + g*): the constants fix the Einstein constant
for a, b, k in [("cos(t)", "cosh(s)", 1.0), ("cos(t)", "sinh(s)", 1.0), ("t^2 + 1", "s^2 + 1", 0.0)]:
    c = main_theorem_constants(a, b, k)
    print(f"a = {a:8s} b = {b:8s} c = {c.c:+.3f} d1 = {c.d1:+.3f} d2 = {c.d2:+.3f} lambda = {c.lambda_bar + 0.0:+.3f}")

# and the engine confirms one of them directly
entry = get_entry("main-quadratic")
print(entry.name, "lambda_hat =", einstein_residual(entry.spec()).lambda_hat)
