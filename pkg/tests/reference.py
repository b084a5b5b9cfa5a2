"""Reference values frozen from 30-digit mpmath computations of closed forms.

test_reference_values.py recomputes every entry.
"""
import math

# 2 e^{1/2}: Omega(1) for Omega = 2 exp(x/2)
OMEGA_AT_ONE = 3.29744254140025629
# Omega(1) - Omega(0) = 2 (e^{1/2} - 1): J of 1 over [0, 1]
OMEGA_INCREMENT = 1.29744254140025629
SIN_ONE = 0.841470984807896507
EXP_HALF = 1.64872127070012815
# D_Omega x^2 at x = 1: 2 / e^{1/2}
D_OMEGA_X2_AT_ONE = 1.21306131942526685
# functional at (1 - e^x)/(1 - e): (2/3)(e^{3/2} - 1)/(e - 1)^2
CANDIDATE_VALUE = 0.786158167202573066
# functional at (e^{x/2} - 1)/(e^{1/2} - 1): 1/(2 (e^{1/2} - 1))
MINIMUM_VALUE = 0.770747041268399142
# both sides of the Leibniz rule for f = t x, x0 = 0.5: (4 - 2 e^{1/2}) / e^{1/4}
LEIBNIZ_VALUE = 0.547152298910136505
# first Omega-variation at y = x with eta = x (1 - x): int 2 (1 - 2x) e^{-x} dx
FIRST_VARIATION_AT_LINE = 0.207276647028653930
# min over x in [0,1], z in [-2,2], z1 in [-1,1] of z1^2 + 2 z z1 (1 - e^{-x/2})
CONVEXITY_GAP_MIN = -0.619272486984701898


def candidate(x):
    """Closed-form Omega-EL extremal (1 - e^x)/(1 - e) for the exponential weight."""
    return (1.0 - math.e ** x) / (1.0 - math.e)


def weighted_extremal(x):
    return (math.exp(x / 2) - 1.0) / (math.exp(0.5) - 1.0)
