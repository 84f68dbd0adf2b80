# Regularity exponents as exact fractions and as floats.
from fractions import Fraction

from degpar.exponents import proof_parameters, q_star, s_star, validate_exponent_identities

# Rational input keeps everything exact
print(q_star(Fraction(1), 2), s_star(Fraction(1), 2))  # 11/6 5/407
print(q_star(Fraction(1, 2), 3), s_star(Fraction(1, 2), 3))  # 25/13 9/2983

# The full parameter set at the largest admissible slack
p = proof_parameters(Fraction(1), 2)
for name in ("c_star", "r", "epsilon", "eta", "omega", "gamma", "theta_star"):
    print(f"{name:>10} = {getattr(p, name)}")
print("omega - gamma*eta =", p.omega - p.gamma * p.eta)

# A smaller slack is allowed; a larger one raises InvalidSlackError
print(proof_parameters(1.0, 2, c=p.c_star / 2).r)

# Floats: the identities hold to rounding over random slacks
rep = validate_exponent_identities(0.7, 4, trials=200, seed=1)
print(rep.passed, {k: f"{v:.1e}" for k, v in rep.worst.items()})
