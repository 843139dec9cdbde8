# Why no smooth compact profile has u'' = 1 at its minimum and u'' = -1 at its
# maximum: the polynomials phi_m and the two incompatible constants gamma.
from einstein_forge.classify import critical_second_derivatives, drop_instance, drop_polynomial

for m in range(2, 9):
    rep = drop_polynomial(m)
    print(f"phi_{m}: {rep.coefficients}  no positive zero: {rep.no_positive_zero}")

# A minimum at A and a maximum at B would need the same gamma
d = drop_instance(4, 1.0, 0.25)
print("y, A, B        :", d.y, d.A, d.B)
print("gamma_A, gamma_B:", d.gamma_A, d.gamma_B)

# The rescaled periodic solution has u'' = 1 at its minimum but not -1 at its maximum
print(critical_second_derivatives("2*(2 + cos(x))^(1/2)", 3.141592653589793, 0.0))
