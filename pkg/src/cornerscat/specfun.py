"""Special functions used throughout the package.

Everything here is evaluated by explicit ascending series or stabilized
recurrences with a truncation control, so the numerical behaviour in the
regimes the asymptotic arguments care about (small and moderate argument,
order up to ~100) is fully under our control.  No external special-function
library is used in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "bessel_j",
    "bessel_j_all",
    "bessel_j_derivative",
    "bessel_j_second_derivative",
    "spherical_j",
    "legendre_p",
    "legendre_p_all",
    "lower_incomplete_gamma",
    "upper_incomplete_gamma",
    "gamma_fn",
]


@dataclass(frozen=True)
class SeriesControl:
    """Truncation control for series evaluation.

    Evaluation always terminates after ``max_terms`` terms, regardless of
    whether ``abs_tol`` was reached.
    """

    max_terms: int = 200
    abs_tol: float = 1e-14

    def __post_init__(self) -> None:
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be >= 0")


DEFAULT_CONTROL = SeriesControl()

# Ascending Bessel series below this threshold (as a function of order),
# stabilized backward recurrence above.  The series is well conditioned for
# t < max(12, 2n); beyond that alternating-term cancellation starts to eat
# into the 1e-12 budget.
def _bessel_crossover(n: int) -> float:
    return max(12.0, 2.0 * n)


def _bessel_j_series(n: int, t: float, control: SeriesControl) -> tuple[float, float]:
    # J_n(t) = sum_m (-1)^m (t/2)^(n+2m) / (m! (n+m)!)
    # Returns (value, cancellation) where cancellation = max |term| / |value|;
    # the alternating series loses log10(cancellation) digits.
    half = 0.5 * t
    if half == 0.0:
        return (1.0 if n == 0 else 0.0), 1.0
    log_lead = n * math.log(half) - math.lgamma(n + 1)
    if log_lead < -700.0:
        return 0.0, 1.0
    term = math.exp(log_lead)
    total = term
    peak = abs(term)
    x2 = half * half
    for m in range(1, control.max_terms + 1):
        term *= -x2 / (m * (n + m))
        total += term
        peak = max(peak, abs(term))
        if abs(term) <= control.abs_tol * max(abs(total), 1e-300):
            break
    return total, peak / max(abs(total), 1e-300)


def _bessel_j_miller(n: int, t: float) -> float:
    # Backward (Miller) recurrence normalized by J_0 + 2*sum J_{2k} = 1.
    # Stable for every order; used whenever the ascending series would
    # suffer cancellation.
    m_start = int(max(n, math.ceil(t))) + 42
    if m_start % 2 == 1:
        m_start += 1
    jp = 0.0          # ~ J_{m+1}
    jc = 1e-300       # ~ J_m
    target = 0.0
    norm = 0.0
    for m in range(m_start, 0, -1):
        jm = (2.0 * m / t) * jc - jp
        jp, jc = jc, jm
        # jc now plays J_{m-1}
        if m - 1 == n:
            target = jc
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * jc
        if abs(jc) > 1e250:
            jp *= 1e-250
            jc *= 1e-250
            target *= 1e-250
            norm *= 1e-250
    norm += jc  # J_0 contribution
    return target / norm


def bessel_j(n: int, t: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Bessel function of the first kind J_n(t), n >= 0, t >= 0."""
    if n < 0:
        raise ValueError("order must be nonnegative (use symmetry for n < 0)")
    if t < 0:
        raise ValueError("argument must be nonnegative")
    if t == 0.0:
        return 1.0 if n == 0 else 0.0
    if t < _bessel_crossover(n):
        val, cancel = _bessel_j_series(n, t, control)
        # cancellation guard: the alternating series can shed digits near the
        # top of its window (e.g. n = 21, t = 41); the backward recurrence is
        # uniformly stable, so switch rather than accept the loss
        if cancel < 1e3:
            return val
    return _bessel_j_miller(n, t)


def bessel_j_all(nmax: int, t: float, control: SeriesControl = DEFAULT_CONTROL) -> list[float]:
    """J_0(t) .. J_nmax(t) in one backward sweep (or series for tiny t)."""
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    if t < 0:
        raise ValueError("argument must be nonnegative")
    if t == 0.0:
        return [1.0] + [0.0] * nmax
    if t < 0.5:
        return [_bessel_j_series(n, t, control)[0] for n in range(nmax + 1)]
    m_start = int(max(nmax, math.ceil(t))) + 42
    if m_start % 2 == 1:
        m_start += 1
    jp = 0.0
    jc = 1e-300
    vals = [0.0] * (nmax + 1)
    norm = 0.0
    for m in range(m_start, 0, -1):
        jm = (2.0 * m / t) * jc - jp
        jp, jc = jc, jm
        if m - 1 <= nmax:
            vals[m - 1] = jc
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * jc
        if abs(jc) > 1e250:
            jp *= 1e-250
            jc *= 1e-250
            norm *= 1e-250
            vals = [v * 1e-250 for v in vals]
    norm += jc
    return [v / norm for v in vals]


def _bessel_j_signed(n: int, t: float) -> float:
    # J_{-n}(t) = (-1)^n J_n(t)
    if n >= 0:
        return bessel_j(n, t)
    return bessel_j(-n, t) if (-n) % 2 == 0 else -bessel_j(-n, t)


def bessel_j_derivative(n: int, t: float) -> float:
    """J_n'(t) via the reflection-safe recurrence (J_{n-1} - J_{n+1})/2."""
    if t == 0.0:
        return 0.5 if n == 1 else 0.0
    return 0.5 * (_bessel_j_signed(n - 1, t) - bessel_j(n + 1, t))


def bessel_j_second_derivative(n: int, t: float) -> float:
    """J_n''(t) from the Bessel ODE, t > 0."""
    if t <= 0.0:
        raise ValueError("second derivative evaluated for t > 0 only")
    return -bessel_j_derivative(n, t) / t + (n * n / (t * t) - 1.0) * bessel_j(n, t)


def _double_factorial_log(k: int) -> float:
    # log(k!!) for odd k = 2m+1:  (2m+1)!! = (2m+1)! / (2^m m!)
    m = (k - 1) // 2
    return math.lgamma(k + 1) - m * math.log(2.0) - math.lgamma(m + 1)


def _spherical_j_series(l: int, t: float, control: SeriesControl) -> float:
    # j_l(t) = sum_m (-1)^m t^(l+2m) / (2^m m! (2l+2m+1)!!)
    if t == 0.0:
        return 1.0 if l == 0 else 0.0
    log_lead = l * math.log(t) - _double_factorial_log(2 * l + 1)
    if log_lead < -700.0:
        return 0.0
    term = math.exp(log_lead)
    total = term
    t2 = t * t
    for m in range(1, control.max_terms + 1):
        term *= -t2 / (2.0 * m * (2 * l + 2 * m + 1))
        total += term
        if abs(term) <= control.abs_tol * max(abs(total), 1e-300):
            break
    return total


def spherical_j(l: int, t: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Spherical Bessel function j_l(t), l >= 0, t >= 0."""
    if l < 0:
        raise ValueError("order must be nonnegative")
    if t < 0:
        raise ValueError("argument must be nonnegative")
    if t == 0.0:
        return 1.0 if l == 0 else 0.0
    if t < max(10.0, float(l)):
        return _spherical_j_series(l, t, control)
    j0 = math.sin(t) / t
    if l == 0:
        return j0
    j1 = math.sin(t) / (t * t) - math.cos(t) / t
    if l == 1:
        return j1
    # Downward recurrence, normalized against whichever of j_0, j_1 is
    # better conditioned (j_0 vanishes near t = k*pi).
    l_start = int(max(l, math.ceil(t))) + 42
    jp = 0.0
    jc = 1e-300
    vals = {l: 0.0, 1: 0.0, 0: 0.0}
    for m in range(l_start, 0, -1):
        jm = ((2.0 * m + 1.0) / t) * jc - jp
        jp, jc = jc, jm
        if m - 1 in vals:
            vals[m - 1] = jc
        if abs(jc) > 1e250:
            jp *= 1e-250
            jc *= 1e-250
            vals = {k: v * 1e-250 for k, v in vals.items()}
    if abs(j0) >= abs(j1):
        scale = j0 / vals[0]
    else:
        scale = j1 / vals[1]
    return vals[l] * scale


def legendre_p(n: int, x: float) -> float:
    """Legendre polynomial P_n(x) by the three-term recurrence, |x| <= 1."""
    if abs(x) > 1.0 + 1e-14:
        raise ValueError("legendre_p defined on [-1, 1]")
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = min(1.0, max(-1.0, x))
    if n == 0:
        return 1.0
    pm, pc = 1.0, x
    for k in range(1, n):
        pm, pc = pc, ((2 * k + 1) * x * pc - k * pm) / (k + 1)
    return pc


def legendre_p_all(nmax: int, x: float) -> list[float]:
    """P_0(x) .. P_nmax(x)."""
    if abs(x) > 1.0 + 1e-14:
        raise ValueError("legendre_p defined on [-1, 1]")
    x = min(1.0, max(-1.0, x))
    out = [1.0]
    if nmax == 0:
        return out
    out.append(x)
    for k in range(1, nmax):
        out.append(((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1))
    return out


def _lower_gamma_series(a: float, x: float, control: SeriesControl) -> float:
    # gamma(a,x) = x^a e^{-x} sum_n x^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    for n in range(1, max(control.max_terms, 500) + 1):
        term *= x / (a + n)
        total += term
        if abs(term) <= control.abs_tol * abs(total):
            break
    return math.exp(a * math.log(x) - x) * total


def _upper_gamma_cf(a: float, x: float, control: SeriesControl) -> float:
    # Continued fraction for Gamma(a,x), modified Lentz.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for i in range(1, max(control.max_terms, 500) + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) <= control.abs_tol:
            break
    return math.exp(a * math.log(x) - x) * f


def lower_incomplete_gamma(a: float, x: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Lower incomplete gamma gamma(a, x) = int_0^x u^(a-1) e^(-u) du."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _lower_gamma_series(a, x, control)
    return gamma_fn(a) - _upper_gamma_cf(a, x, control)


def upper_incomplete_gamma(a: float, x: float, control: SeriesControl = DEFAULT_CONTROL) -> float:
    """Upper incomplete gamma Gamma(a, x) = Gamma(a) - gamma(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return gamma_fn(a)
    if x < a + 1.0:
        return gamma_fn(a) - _lower_gamma_series(a, x, control)
    return _upper_gamma_cf(a, x, control)


def gamma_fn(a: float) -> float:
    """Euler Gamma for positive real argument."""
    if a <= 0:
        raise ValueError("a must be positive")
    return math.gamma(a)
