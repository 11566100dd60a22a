"""Upper incomplete gamma function for any real order and positive argument.

scipy's ``gammaincc`` is regularised and rejects nonpositive orders, which
are exactly the orders the tail integrals need (order 0 and below whenever
n(p-1)/2 >= 1). The evaluation here follows the classical split:

* Legendre continued fraction (modified Lentz) for x >= max(1, a + 1);
* power series for the lower function when 0 < a and x is small;
* for a <= 1/2 and small x, a cancellation-free series at an order in
  (-1/2, 1/2] followed by downward recurrence.
"""

from __future__ import annotations

import math

from scipy.special import zeta

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000
_EULER_GAMMA = 0.5772156649015329
_LGAMMA_TERMS = 60
# (-1)^k zeta(k) / k for the Taylor series of log Gamma(1 + a)
_LGAMMA_COEFFS = [(-1) ** k * float(zeta(k)) / k for k in range(2, _LGAMMA_TERMS)]


def _prefactor(a: float, x: float) -> float:
    return math.exp(-x + a * math.log(x))


def _continued_fraction(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return _prefactor(a, x) * h
    raise ArithmeticError(f"continued fraction for Gamma({a}, {x}) did not converge")


def _lower_series(a: float, x: float) -> float:
    """gamma(a, x) for a > 0."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * _prefactor(a, x)
    raise ArithmeticError(f"series for gamma({a}, {x}) did not converge")


def _gamma1pm1_over_a(a: float) -> float:
    """(Gamma(1 + a) - 1) / a for |a| <= 1/2 without cancellation."""
    log_g = -_EULER_GAMMA * a
    power = a
    for c in _LGAMMA_COEFFS:
        power *= a
        log_g += c * power
        if abs(power) < _EPS * 1e-2:
            break
    return math.expm1(log_g) / a


def _small_order(a: float, x: float) -> float:
    """Gamma(a, x) for |a| <= 1/2 and 0 < x < 1.

    Gamma(a, x) = (Gamma(1+a) - 1)/a - (x^a - 1)/a - x^a sum_{k>=1} (-x)^k / (k! (a+k)),
    with the a -> 0 limits -gamma_E and -log x for the first two terms.
    """
    log_x = math.log(x)
    if a == 0.0:
        head = -_EULER_GAMMA - log_x
    else:
        head = _gamma1pm1_over_a(a) - math.expm1(a * log_x) / a
    total = 0.0
    term = 1.0
    for k in range(1, _MAX_ITER):
        term *= -x / k
        add = term / (a + k)
        total += add
        if abs(add) < _EPS * abs(total):
            break
    return head - math.exp(a * log_x) * total


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Gamma(a, x) = integral_x^inf s^(a-1) e^(-s) ds for real ``a`` and ``x > 0``.

    ``x == 0`` is accepted for ``a > 0`` and returns Gamma(a).
    """
    a = float(a)
    x = float(x)
    if x < 0 or math.isnan(x):
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x == 0:
        if a <= 0:
            raise ValueError("Gamma(a, 0) diverges for a <= 0")
        return math.gamma(a)
    if math.isinf(x):
        return 0.0
    if x >= max(1.0, a + 1.0):
        return _continued_fraction(a, x)
    if a > 0.5:
        return math.gamma(a) - _lower_series(a, x)
    # climb to an order in (-1/2, 1/2], then recur downwards with
    # Gamma(b, x) = (Gamma(b + 1, x) - x^b e^-x) / b, where |b| >= 1/2.
    steps = max(0, math.ceil(-a - 0.5))
    b = a + steps
    g = _small_order(b, x)
    for _ in range(steps):
        b -= 1.0
        g = (g - _prefactor(b, x)) / b
    return g
