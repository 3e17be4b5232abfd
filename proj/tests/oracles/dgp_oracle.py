"""Independent reference values for the logistic data generating process.

Evaluates the interaction polynomial symbolically (hand-expanded terms) and
prints frozen values consumed by the C++ unit tests.
"""
import math
from fractions import Fraction

import numpy as np

RANGES = [(-0.4, 0.6), (-0.2, 0.8), (-0.4, 1.0), (-0.1, 0.9), (0.0, 5.0),
          (0.0, 3.0), (1.0, 4.0), (1.0, 7.0), (1.0, 3.0), (0.0, 2.0)]


def poly(x):
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = x
    linear = x1 + x2 + x3 + x4 + x5 + x6 + x7 + x8 + x9 + x10
    pairs = x1 * x3 + x2 * x5 + x4 * x9 + x6 * x7 + x8 * x10
    quartic = x1 * x2 * x3 * x4 + x1 * x2 * x9 * x10
    return linear + pairs + quartic


def prob(x, k):
    z = math.log(99) / 40 * poly(x) - k * math.log(99)
    return 1 / (1 + math.exp(-z))


mid = [(Fraction(lo).limit_denominator(100) + Fraction(hi).limit_denominator(100)) / 2 for lo, hi in RANGES]
s_mid = poly(mid)
print("S(midpoints) =", s_mid, float(s_mid))
print("p(midpoints, 1.5) = %.17g" % prob([float(m) for m in mid], 1.5))
print("p(0, 1.5) = %.17g" % (1 / (1 + 99 * math.sqrt(99))))

rng = np.random.default_rng(12345)
n = 4_000_000
lo = np.array([r[0] for r in RANGES])
hi = np.array([r[1] for r in RANGES])
x = lo + (hi - lo) * rng.random((n, 10))
s = poly(x.T)
for k in (0.0, 0.6, 1.0, 1.5, 2.0):
    p = 1 / (1 + np.exp(-(math.log(99) / 40 * s - k * math.log(99))))
    print("k=%.2f mean p = %.6f  se = %.2e" % (k, p.mean(), p.std() / math.sqrt(n)))
