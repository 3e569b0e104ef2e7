"""Complex-phase exponentially decaying test solution and its integrals.

The field is u(x) = (exp(-s sqrt(z)), i exp(-s sqrt(z))) with z = x1 + i x2
on the principal branch.  It kills both Lame-type operators exactly (each
component is harmonic and the field is divergence-free), decays like
exp(-s sqrt(r) cos(theta/2)) into the sector, and all of its sector/edge
integrals reduce to incomplete-gamma closed forms.  This module provides
the exact values, the matching quadrature routes, and certified decay
bounds used by the corner analysis.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import SectorGeometry, gauss_panels
from .specfun import gamma_fn, lower_incomplete_gamma, upper_incomplete_gamma

__all__ = [
    "CGOField",
    "BoundCertificate",
    "mu_theta",
    "cgo_eval",
    "cgo_gradient",
    "cgo_traction",
    "cgo_traction_classical",
    "sector_integral_exact",
    "sector_tail_exact",
    "sector_tail_bound",
    "edge_integral_exact",
    "weighted_decay_integral",
    "bound_certificates",
    "non_degeneracy_value",
    "geometric_s_grid",
    "loglog_slope",
]

_BRANCH_TOL = 1e-13


def _sqrt_principal(x1, x2):
    """Principal sqrt(x1 + i x2), argument in (-pi, pi]; Re >= 0."""
    r = np.hypot(x1, x2)
    th = np.arctan2(x2, x1)
    return np.sqrt(r) * (np.cos(0.5 * th) + 1j * np.sin(0.5 * th))


def _check_off_cut(x1, x2) -> None:
    x1a = np.atleast_1d(np.asarray(x1, dtype=float))
    x2a = np.atleast_1d(np.asarray(x2, dtype=float))
    on_cut = (x1a <= 0.0) & (np.abs(x2a) < _BRANCH_TOL)
    if np.any(on_cut):
        raise ValueError("evaluation point on the branch cut (-inf, 0] x {0}")


def mu_theta(theta: float) -> complex:
    """Half-angle phase mu(theta) = cos(theta/2) + i sin(theta/2)."""
    return complex(math.cos(0.5 * theta), math.sin(0.5 * theta))


def cgo_eval(x, s: float):
    """Field value at x (2-vector or arrays); second component is i x first."""
    if s <= 0:
        raise ValueError("s must be positive")
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    _check_off_cut(x1, x2)
    u1 = np.exp(-s * _sqrt_principal(x1, x2))
    return np.stack([u1, 1j * u1], axis=-1)


def cgo_gradient(x, s: float) -> np.ndarray:
    """Exact gradient, rows = grad of each component; singular at the vertex.

    d u1/d x1 = -(s / (2 sqrt(r))) exp(-s sqrt(r) mu(theta) - i theta/2),
    d u1/d x2 = i * that, and the second row is i times the first.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    x = np.asarray(x, dtype=float)
    x1, x2 = float(x[0]), float(x[1])
    _check_off_cut(x1, x2)
    r = math.hypot(x1, x2)
    if r == 0.0:
        raise ValueError("gradient singular at the vertex")
    th = math.atan2(x2, x1)
    mu = mu_theta(th)
    pref = -(s / (2.0 * math.sqrt(r))) * cmath.exp(-s * math.sqrt(r) * mu - 0.5j * th)
    row1 = np.array([pref, 1j * pref])
    return np.stack([row1, 1j * row1])


def cgo_traction(x, s: float, nu, mu_shear: float) -> np.ndarray:
    """Shear-scaled normal gradient mu * (grad u) nu.

    This is the traction-like quantity the decay certificates bound.  The
    classical boundary traction of this field is exactly twice this value:
    the gradient is symmetric and trace-free, so 2 mu eps(u) nu = 2 mu
    (grad u) nu while the divergence and rotation terms vanish identically.
    """
    g = cgo_gradient(x, s)
    return mu_shear * (g @ np.asarray(nu, dtype=float))


def cgo_traction_classical(x, s: float, nu, mu_shear: float) -> np.ndarray:
    """Classical traction of the field: exactly 2 x cgo_traction."""
    return 2.0 * cgo_traction(x, s, nu, mu_shear)


@dataclass(frozen=True)
class CGOField:
    """Bundled evaluators at a fixed asymptotic parameter s."""

    s: float

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError("s must be positive")

    def value(self, x) -> np.ndarray:
        return cgo_eval(x, self.s)

    def gradient(self, x) -> np.ndarray:
        return cgo_gradient(x, self.s)

    def navier(self, params, x) -> np.ndarray:
        """Both displacement operators kill this field exactly: each
        component is harmonic and the divergence vanishes identically."""
        return np.zeros(2, dtype=complex)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        return cgo_eval(np.asarray(X, dtype=float), self.s)

    def gradient_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        x1, x2 = X[:, 0], X[:, 1]
        _check_off_cut(x1, x2)
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        mu = np.cos(0.5 * th) + 1j * np.sin(0.5 * th)
        pref = -(self.s / (2.0 * np.sqrt(r))) * np.exp(-self.s * np.sqrt(r) * mu - 0.5j * th)
        out = np.empty((len(X), 2, 2), dtype=complex)
        out[:, 0, 0] = pref
        out[:, 0, 1] = 1j * pref
        out[:, 1, 0] = 1j * pref
        out[:, 1, 1] = -pref
        return out

    def modulus_first(self, x1, x2):
        """|u_1| = exp(-s sqrt(r) cos(theta/2)) without complex arithmetic."""
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        return np.exp(-self.s * np.sqrt(r) * np.cos(0.5 * th))


# ---------------------------------------------------------------------------
# exact integrals
# ---------------------------------------------------------------------------

def sector_integral_exact(theta_m: float, theta_M: float, s: float) -> complex:
    """Integral of the first component over the full infinite sector:
    6i (e^{-2 i theta_M} - e^{-2 i theta_m}) / s^4."""
    if s <= 0:
        raise ValueError("s must be positive")
    return 6j * (cmath.exp(-2j * theta_M) - cmath.exp(-2j * theta_m)) * s ** -4


def _gamma4_upper_complex(z: complex) -> complex:
    # Gamma(4, z) = e^{-z} (6 + 6z + 3z^2 + z^3), valid for complex z
    return cmath.exp(-z) * (6.0 + z * (6.0 + z * (3.0 + z)))


def sector_tail_exact(sector: SectorGeometry, s: float, n_panels: int = 64,
                      n_points: int = 16) -> complex:
    """Exact complex tail int_{W \\ S_h} u_1: radial part in closed form,
    angular part by quadrature of Gamma(4, s sqrt(h) mu(theta))."""
    th, wt = gauss_panels(sector.theta_m, sector.theta_M, n_panels, n_points)
    root_h = math.sqrt(sector.h)
    total = 0.0 + 0.0j
    for t, w in zip(th, wt):
        z = s * root_h * mu_theta(float(t))
        total += w * 2.0 * (s * mu_theta(float(t))) ** -4 * _gamma4_upper_complex(z)
    return total


def sector_tail_bound(sector: SectorGeometry, s: float) -> float:
    """Certified tail size: 6 (theta_M - theta_m) delta_W^{-4} s^{-4}
    e^{-delta_W s sqrt(h) / 2}."""
    d = sector.delta_w
    return (6.0 * sector.opening / d ** 4) * s ** -4 * math.exp(-d * s * math.sqrt(sector.h) / 2.0)


def edge_integral_exact(theta: float, h: float, s: float) -> complex:
    """Closed form of the edge integral of u_1 along the ray at ``theta``:

    2 s^{-2} (mu^{-2} - mu^{-2} e^{-s sqrt(h) mu} - mu^{-1} s sqrt(h)
    e^{-s sqrt(h) mu}),  mu = mu(theta).
    """
    if not (-math.pi < theta < math.pi):
        raise ValueError("theta must lie in (-pi, pi)")
    if h <= 0 or s <= 0:
        raise ValueError("h and s must be positive")
    mu = mu_theta(theta)
    x = s * math.sqrt(h) * mu
    e = cmath.exp(-x)
    return 2.0 * s ** -2 * (mu ** -2 - mu ** -2 * e - mu ** -1 * s * math.sqrt(h) * e)


def weighted_decay_integral(zeta: float, s: float, c: float, h: float) -> float:
    """Exact value of int_0^h r^zeta e^{-s sqrt(r) c} dr.

    Substituting u = s c sqrt(r) gives 2 (s c)^{-2 zeta - 2}
    gamma(2 zeta + 2, s c sqrt(h)); the large-s decay rate is s^{-2 zeta - 2}.
    """
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    if s <= 0 or c <= 0 or h <= 0:
        raise ValueError("s, c, h must be positive")
    a = 2.0 * zeta + 2.0
    return 2.0 * (s * c) ** (-a) * lower_incomplete_gamma(a, s * c * math.sqrt(h))


def non_degeneracy_value(theta_m: float, theta_M: float) -> complex:
    """mu^{-2}(theta_m) + mu^{-2}(theta_M) = e^{-i theta_m} + e^{-i theta_M}.

    Nonzero exactly when the opening differs from pi; this is the corner
    condition the vanishing theorems hinge on.
    """
    return cmath.exp(-1j * theta_m) + cmath.exp(-1j * theta_M)


# ---------------------------------------------------------------------------
# decay-bound certificates
# ---------------------------------------------------------------------------

_CERT_IDS = (
    "sector-weighted-upper",
    "sector-tail",
    "l2-norm",
    "l2-weighted",
    "arc-h1",
    "arc-traction",
)


@dataclass(frozen=True)
class BoundCertificate:
    cert_id: str
    computed_value: float
    bound_value: float
    params: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.computed_value <= self.bound_value * (1.0 + 1e-9)

    @property
    def ratio(self) -> float:
        return self.computed_value / self.bound_value if self.bound_value else math.inf

    def to_dict(self) -> dict:
        return {
            "cert_id": self.cert_id,
            "params": dict(self.params),
            "computed": self.computed_value,
            "bound": self.bound_value,
            "satisfied": self.satisfied,
        }


def _adaptive_theta_integral(sector: SectorGeometry, f: Callable[[np.ndarray], np.ndarray],
                             rel_tol: float = 1e-12) -> float:
    prev = None
    for level in range(9):
        n = 8 * (2 ** level)
        th, wt = gauss_panels(sector.theta_m, sector.theta_M, n, 12)
        cur = float(np.sum(wt * f(th)))
        if prev is not None and abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return prev


def bound_certificates(sector: SectorGeometry, s: float, alpha: float,
                       mu_shear: float = 1.0) -> list[BoundCertificate]:
    """All six decay certificates at (sector, s, alpha).

    Left sides are computed by quadrature (angular) on exact radial
    reductions; right sides are the closed-form bounds.  The mean-value
    parameter in the L2 bound is taken at its always-valid instantiation
    Theta = 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if s <= 0:
        raise ValueError("s must be positive")
    d = sector.delta_w
    op = sector.opening
    h = sector.h
    rh = math.sqrt(h)
    base = {"theta_m": sector.theta_m, "theta_M": sector.theta_M, "h": h,
            "s": s, "alpha": alpha, "delta_w": d}

    certs: list[BoundCertificate] = []

    # weighted modulus integral over the full sector
    a1 = 2.0 * alpha + 4.0
    comp = 2.0 * gamma_fn(a1) * s ** (-a1) * _adaptive_theta_integral(
        sector, lambda th: np.cos(0.5 * th) ** (-a1))
    bnd = 2.0 * op * gamma_fn(a1) / d ** a1 * s ** (-a1)
    certs.append(BoundCertificate("sector-weighted-upper", comp, bnd, base))

    # modulus integral over the tail W \ S_h
    def tail_f(th):
        c = np.cos(0.5 * th)
        return np.array([2.0 * (s * ci) ** -4 * upper_incomplete_gamma(4.0, s * ci * rh)
                         for ci in c])
    comp = _adaptive_theta_integral(sector, tail_f)
    certs.append(BoundCertificate("sector-tail", comp, sector_tail_bound(sector, s), base))

    # squared L2 norm of the full 2-component field over S_h (Theta = 0)
    def l2_f(th):
        c = np.cos(0.5 * th)
        return np.array([4.0 * (2.0 * s * ci) ** -4
                         * lower_incomplete_gamma(4.0, 2.0 * s * ci * rh) for ci in c])
    comp = _adaptive_theta_integral(sector, l2_f)
    certs.append(BoundCertificate("l2-norm", comp, op * h * h,
                                  {**base, "mean_value_theta": 0.0}))

    # squared weighted L2 norm |x|^alpha u over S_h
    a2 = 4.0 * alpha + 4.0

    def l2w_f(th):
        c = np.cos(0.5 * th)
        return np.array([4.0 * (2.0 * s * ci) ** (-a2)
                         * lower_incomplete_gamma(a2, 2.0 * s * ci * rh) for ci in c])
    comp = _adaptive_theta_integral(sector, l2w_f)
    bnd = s ** (-a2) * 4.0 * op / (4.0 * d * d) ** (2.0 * alpha + 2.0) * gamma_fn(a2)
    certs.append(BoundCertificate("l2-weighted", comp, bnd, base))

    # first-component H1 norm on the arc
    comp2 = (h + 0.5 * s * s) * _adaptive_theta_integral(
        sector, lambda th: np.exp(-2.0 * s * rh * np.cos(0.5 * th)))
    bnd = math.sqrt(h + 0.5 * s * s) * math.sqrt(op) * math.exp(-s * rh * d)
    certs.append(BoundCertificate("arc-h1", math.sqrt(comp2), bnd, base))

    # shear-scaled normal-gradient norm on the arc
    comp2 = (0.5 * mu_shear ** 2 * s * s) * _adaptive_theta_integral(
        sector, lambda th: np.exp(-2.0 * s * rh * np.cos(0.5 * th)))
    bnd = (s * mu_shear / math.sqrt(2.0)) * math.sqrt(op) * math.exp(-s * rh * d)
    certs.append(BoundCertificate("arc-traction", math.sqrt(comp2), bnd,
                                  {**base, "mu": mu_shear}))
    return certs


# ---------------------------------------------------------------------------
# slope fitting
# ---------------------------------------------------------------------------

def geometric_s_grid(s_min: float, n: int = 10, ratio: float = 1.3) -> np.ndarray:
    """Geometric grid of asymptotic parameters (default protocol for fits)."""
    if n < 8:
        raise ValueError("need at least 8 grid points for a slope fit")
    return s_min * ratio ** np.arange(n)


def loglog_slope(s_values, values, drop_smallest: int = 2) -> float:
    """Least-squares slope of log|value| against log s.

    The smallest ``drop_smallest`` s-points are discarded to suppress
    pre-asymptotic contamination.
    """
    s = np.asarray(s_values, dtype=float)[drop_smallest:]
    v = np.abs(np.asarray(values))[drop_smallest:]
    if np.any(v <= 0):
        raise ValueError("values must be nonzero for a log-log fit")
    coef = np.polyfit(np.log(s), np.log(v), 1)
    return float(coef[0])
