"""Elastic wave fields: material parameters, plane waves, traction,
Helmholtz splitting, Herglotz synthesis (direct and series form, 2D and 3D),
and regularized H1 Herglotz fitting.

Conventions fixed here for the whole package:
  * d_perp is d rotated by +pi/2;
  * the 2D Herglotz integral carries the printed normalization
    e^{-i pi/4} sqrt(k_beta / omega), the 3D one carries none;
  * the traction operator is the classical boundary stress
    2 mu dv/dnu + lambda nu (div v) + mu (d2 v1 - d1 v2) nu_perp  (2D)
    2 mu dv/dnu + lambda nu (div v) + mu nu x curl v              (3D).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lstsq

from .geometry import SectorGeometry, gauss_panels
from .specfun import bessel_j_all, legendre_p_all, spherical_j

__all__ = [
    "LameParameters",
    "MediumConfig",
    "BoundaryParam",
    "PlaneWave",
    "LinearField",
    "plane_wave_p",
    "plane_wave_s",
    "perp",
    "navier_apply",
    "traction",
    "helmholtz_split",
    "HerglotzKernel2D",
    "HerglotzKernel3D",
    "HerglotzField2D",
    "herglotz_eval_2d",
    "herglotz_eval_series_2d",
    "herglotz_eval_3d",
    "herglotz_eval_series_3d",
    "coefficient_moments_2d",
    "coefficient_bound_2d",
    "sphere_grid",
    "herglotz_fit",
    "FitReport",
    "ApproxSchedule",
    "schedule_check",
]


# ---------------------------------------------------------------------------
# parameters and materials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LameParameters:
    """Material constants and frequency with derived wavenumbers.

    ``operator_flag`` selects the displacement operator used by
    :func:`navier_apply`: 'standard-navier' is mu*Lap + (lambda+mu) grad div
    (the operator whose plane-wave dispersion matches k_p, k_s below);
    'paper-literal' replaces the leading mu by lambda and is kept for audit.
    """

    lam: float
    mu: float
    omega: float
    operator_flag: str = "standard-navier"
    dim: int = 2

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.dim * self.lam + 2.0 * self.mu <= 0:
            raise ValueError("strong convexity requires n*lambda + 2*mu > 0")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.operator_flag not in ("standard-navier", "paper-literal"):
            raise ValueError("unknown operator_flag")

    @property
    def k_p(self) -> float:
        return self.omega / math.sqrt(2.0 * self.mu + self.lam)

    @property
    def k_s(self) -> float:
        return self.omega / math.sqrt(self.mu)

    def with_omega(self, omega: float) -> "LameParameters":
        return LameParameters(self.lam, self.mu, omega, self.operator_flag, self.dim)

    @property
    def lead_coeff(self) -> float:
        """Coefficient of the vector Laplacian under the active flag."""
        return self.mu if self.operator_flag == "standard-navier" else self.lam


class MediumConfig:
    """Compactly supported contrast V (density perturbation), q = 1 + V."""

    def __init__(self, support, V):
        self.support = support           # PolygonDomain or ('disk', (cx, cy), R)
        self._V = V

    def V_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if callable(self._V):
            vals = np.array([self._V(p) for p in pts], dtype=float)
        else:
            vals = np.full(len(pts), float(self._V))
        return vals * self.indicator(pts)

    def indicator(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if isinstance(self.support, tuple) and self.support[0] == "disk":
            _, c, R = self.support
            return (np.linalg.norm(pts - np.asarray(c), axis=1) <= R).astype(float)
        return self.support.contains(pts).astype(float)


@dataclass(frozen=True)
class BoundaryParam:
    """Boundary coefficient eta on a boundary piece with Holder index alpha."""

    eta: float | Callable[[np.ndarray], float]
    alpha: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def at(self, x) -> float:
        if callable(self.eta):
            return float(self.eta(np.asarray(x, dtype=float)))
        return float(self.eta)


# ---------------------------------------------------------------------------
# basic fields
# ---------------------------------------------------------------------------

def perp(d) -> np.ndarray:
    """+pi/2 rotation (package-wide convention)."""
    d = np.asarray(d, dtype=float)
    return np.array([-d[1], d[0]])


class PlaneWave:
    """pol * exp(i k d.x); exact derivatives of every order."""

    def __init__(self, pol, k: float, d, amplitude: complex = 1.0):
        self.pol = np.asarray(pol, dtype=complex)
        self.k = float(k)
        self.d = np.asarray(d, dtype=float)
        self.amplitude = complex(amplitude)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * self.k * (x @ self.d if x.ndim > 1 else float(np.dot(x, self.d))))
        if np.ndim(phase) == 0:
            return self.amplitude * self.pol * phase
        return self.amplitude * phase[..., None] * self.pol

    def gradient(self, x) -> np.ndarray:
        v = self.value(x)
        return np.outer(v, 1j * self.k * self.d)

    def second_derivatives(self, x) -> np.ndarray:
        v = self.value(x)
        kk = np.einsum("a,b->ab", 1j * self.k * self.d, 1j * self.k * self.d)
        return np.einsum("i,ab->iab", v, kk)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * self.k * (np.asarray(X, dtype=float) @ self.d))
        return self.amplitude * phase[:, None] * self.pol

    def gradient_batch(self, X: np.ndarray) -> np.ndarray:
        v = self.value_batch(X)
        return np.einsum("mi,a->mia", v, 1j * self.k * self.d)


def plane_wave_p(d, params: LameParameters, amplitude: complex = 1.0,
                 wavenumber_scale: float = 1.0) -> PlaneWave:
    """Compressional plane wave (longitudinal polarization)."""
    d = np.asarray(d, dtype=float)
    return PlaneWave(d, wavenumber_scale * params.k_p, d, amplitude)


def plane_wave_s(d, params: LameParameters, amplitude: complex = 1.0,
                 wavenumber_scale: float = 1.0, pol3d=None) -> PlaneWave:
    """Shear plane wave; 2D polarization is d_perp, 3D must be supplied."""
    d = np.asarray(d, dtype=float)
    if len(d) == 2:
        pol = perp(d)
    else:
        if pol3d is None:
            raise ValueError("3D shear wave needs an explicit transverse polarization")
        pol = np.asarray(pol3d, dtype=float)
        if abs(float(np.dot(pol, d))) > 1e-12:
            raise ValueError("shear polarization must be transverse")
    return PlaneWave(pol, wavenumber_scale * params.k_s, d, amplitude)


class LinearField:
    """Affine displacement M x + b (rigid motions, patch tests)."""

    def __init__(self, M, b=None):
        self.M = np.asarray(M, dtype=complex)
        self.b = np.zeros(self.M.shape[0], dtype=complex) if b is None else np.asarray(b, dtype=complex)

    def value(self, x):
        return self.M @ np.asarray(x, dtype=float) + self.b

    def gradient(self, x):
        return self.M

    def second_derivatives(self, x):
        n = self.M.shape[0]
        return np.zeros((n, n, n), dtype=complex)

    def value_batch(self, X):
        return np.asarray(X, dtype=float) @ self.M.T + self.b

    def gradient_batch(self, X):
        return np.broadcast_to(self.M, (len(X),) + self.M.shape)


_C1_4 = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}
_C2_4 = {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0, 1: 16.0 / 12.0, 2: -1.0 / 12.0}


def _fd_second_derivatives(value: Callable, x, step: float, order: int = 2) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = len(x)
    v0 = np.asarray(value(x))
    m = len(v0)
    out = np.zeros((m, n, n), dtype=complex)
    if order == 2:
        for a in range(n):
            ea = np.zeros(n); ea[a] = step
            vp = np.asarray(value(x + ea)); vm = np.asarray(value(x - ea))
            out[:, a, a] = (vp - 2.0 * v0 + vm) / step ** 2
        for a in range(n):
            for b in range(a + 1, n):
                ea = np.zeros(n); ea[a] = step
                eb = np.zeros(n); eb[b] = step
                vpp = np.asarray(value(x + ea + eb)); vmm = np.asarray(value(x - ea - eb))
                vpm = np.asarray(value(x + ea - eb)); vmp = np.asarray(value(x - ea + eb))
                out[:, a, b] = out[:, b, a] = (vpp + vmm - vpm - vmp) / (4.0 * step ** 2)
        return out
    if order != 4:
        raise ValueError("order must be 2 or 4")
    for a in range(n):
        ea = np.zeros(n); ea[a] = step
        acc = np.zeros(m, dtype=complex)
        for off, c in _C2_4.items():
            acc += c * np.asarray(value(x + off * ea))
        out[:, a, a] = acc / step ** 2
    for a in range(n):
        for b in range(a + 1, n):
            ea = np.zeros(n); ea[a] = step
            eb = np.zeros(n); eb[b] = step
            acc = np.zeros(m, dtype=complex)
            for oa, ca in _C1_4.items():
                for ob, cb in _C1_4.items():
                    acc += ca * cb * np.asarray(value(x + oa * ea + ob * eb))
            out[:, a, b] = out[:, b, a] = acc / step ** 2
    return out


def navier_apply(fld, params: LameParameters, x, fd_step: float = 1e-5,
                 fd_order: int = 2) -> np.ndarray:
    """L v at x under the active operator flag.

    Uses exact second derivatives when the field provides them, otherwise
    central differences of the requested order.
    """
    if hasattr(fld, "second_derivatives"):
        D = fld.second_derivatives(x)
    else:
        D = _fd_second_derivatives(fld.value if hasattr(fld, "value") else fld, x,
                                   fd_step, fd_order)
    lap = np.einsum("iaa->i", D)
    grad_div = np.einsum("jij->i", D)
    return params.lead_coeff * lap + (params.lam + params.mu) * grad_div


def traction(fld, nu, x, params: LameParameters) -> np.ndarray:
    """Classical boundary traction at x with outward normal nu."""
    nu = np.asarray(nu, dtype=float)
    if hasattr(fld, "gradient"):
        G = np.asarray(fld.gradient(x))
    else:
        raise TypeError("field must provide a gradient for traction evaluation")
    n = len(nu)
    div = np.trace(G)
    t = 2.0 * params.mu * (G @ nu) + params.lam * nu.astype(complex) * div
    if n == 2:
        t = t + params.mu * (G[0, 1] - G[1, 0]) * np.array([-nu[1], nu[0]])
    else:
        curl = np.array([G[2, 1] - G[1, 2], G[0, 2] - G[2, 0], G[1, 0] - G[0, 1]])
        t = t + params.mu * np.cross(nu, curl)
    return t


# ---------------------------------------------------------------------------
# Helmholtz splitting on grids
# ---------------------------------------------------------------------------

_D1_6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


def _ddx(f: np.ndarray, dx: float, axis: int) -> np.ndarray:
    out = np.zeros_like(f)
    for k, c in enumerate(_D1_6):
        if c != 0.0:
            out += c * np.roll(f, 3 - k, axis=axis)
    return out / dx


def helmholtz_split(u: np.ndarray, dx: float, params: LameParameters,
                    tol: float = 1e-6):
    """Split a gridded 2D field into compressional and shear parts.

    u has shape (nx, ny, 2); sixth-order central differences; the outer
    3-cell frame of the returned arrays is invalid and masked to zero.
    Returns (u_p, u_s, report) where report flags a too-coarse grid when
    the interior reconstruction residual u_p + u_s - u exceeds ``tol``
    relative to the field scale.
    """
    if u.ndim != 3 or u.shape[2] != 2:
        raise ValueError("expected field of shape (nx, ny, 2)")
    div = _ddx(u[:, :, 0], dx, 0) + _ddx(u[:, :, 1], dx, 1)
    up = np.stack([_ddx(div, dx, 0), _ddx(div, dx, 1)], axis=-1) * (-1.0 / params.k_p ** 2)
    curl = _ddx(u[:, :, 1], dx, 0) - _ddx(u[:, :, 0], dx, 1)
    us = np.stack([_ddx(curl, dx, 1), -_ddx(curl, dx, 0)], axis=-1) * (1.0 / params.k_s ** 2)
    m = 6  # two stacked 3-point halos
    mask = np.zeros(u.shape[:2], dtype=bool)
    mask[m:-m, m:-m] = True
    up[~mask] = 0.0
    us[~mask] = 0.0
    scale = float(np.abs(u[mask]).max()) if mask.any() else 0.0
    if scale > 0:
        resid = float(np.abs((up + us - u)[mask]).max()) / scale
    else:
        resid = 0.0
    report = {"residual": resid, "too_coarse": bool(resid > tol), "interior_mask": mask}
    return up, us, report


# ---------------------------------------------------------------------------
# Herglotz kernels
# ---------------------------------------------------------------------------

@dataclass
class HerglotzKernel2D:
    """Densities g_p, g_s at N equispaced directions on the unit circle."""

    g_p: np.ndarray
    g_s: np.ndarray

    def __post_init__(self) -> None:
        self.g_p = np.asarray(self.g_p, dtype=complex)
        self.g_s = np.asarray(self.g_s, dtype=complex)
        if self.g_p.shape != self.g_s.shape or self.g_p.ndim != 1:
            raise ValueError("g_p and g_s must be 1D arrays of equal length")
        if len(self.g_p) < 8:
            raise ValueError("need at least 8 circle nodes")

    @property
    def n_nodes(self) -> int:
        return len(self.g_p)

    @property
    def angles(self) -> np.ndarray:
        n = self.n_nodes
        return 2.0 * math.pi * np.arange(n) / n

    @property
    def directions(self) -> np.ndarray:
        a = self.angles
        return np.stack([np.cos(a), np.sin(a)], axis=1)

    @property
    def weight(self) -> float:
        return 2.0 * math.pi / self.n_nodes

    def norm_p(self) -> float:
        return math.sqrt(self.weight * float(np.sum(np.abs(self.g_p) ** 2)))

    def norm_s(self) -> float:
        return math.sqrt(self.weight * float(np.sum(np.abs(self.g_s) ** 2)))

    def to_dict(self) -> dict:
        return {
            "angles": self.angles.tolist(),
            "g_p": [[z.real, z.imag] for z in self.g_p],
            "g_s": [[z.real, z.imag] for z in self.g_s],
        }

    @staticmethod
    def from_dict(d: dict) -> "HerglotzKernel2D":
        gp = np.array([complex(a, b) for a, b in d["g_p"]])
        gs = np.array([complex(a, b) for a, b in d["g_s"]])
        return HerglotzKernel2D(gp, gs)


class HerglotzField2D:
    """Field object for the superposition defined by a 2D kernel."""

    def __init__(self, kernel: HerglotzKernel2D, params: LameParameters):
        self.kernel = kernel
        self.params = params
        d = kernel.directions
        w = kernel.weight
        cp = cmath.exp(-0.25j * math.pi) * math.sqrt(params.k_p / params.omega)
        cs = cmath.exp(-0.25j * math.pi) * math.sqrt(params.k_s / params.omega)
        # stack both families into one list of (amplitude, k, direction, pol)
        pol_p = d
        pol_s = np.stack([-d[:, 1], d[:, 0]], axis=1)
        self._amp = np.concatenate([w * cp * kernel.g_p, w * cs * kernel.g_s])
        self._k = np.concatenate([np.full(len(d), params.k_p), np.full(len(d), params.k_s)])
        self._dir = np.vstack([d, d])
        self._pol = np.vstack([pol_p, pol_s]).astype(complex)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * self._k * (self._dir @ x))
        return (self._amp * phase) @ self._pol

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * self._k * (self._dir @ x))
        coeff = self._amp * phase
        ikd = 1j * self._k[:, None] * self._dir
        return np.einsum("m,mi,mj->ij", coeff, self._pol, ikd)

    def second_derivatives(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(1j * self._k * (self._dir @ x))
        coeff = self._amp * phase
        ikd = 1j * self._k[:, None] * self._dir
        return np.einsum("m,mi,ma,mb->iab", coeff, self._pol, ikd, ikd)

    def value_batch(self, X: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * self._k[None, :] * (np.asarray(X, dtype=float) @ self._dir.T))
        return (self._amp[None, :] * phase) @ self._pol

    def gradient_batch(self, X: np.ndarray) -> np.ndarray:
        phase = np.exp(1j * self._k[None, :] * (np.asarray(X, dtype=float) @ self._dir.T))
        coeff = self._amp[None, :] * phase
        ikd = 1j * self._k[:, None] * self._dir
        return np.einsum("qm,mi,ma->qia", coeff, self._pol, ikd)


def herglotz_eval_2d(kernel: HerglotzKernel2D, x, params: LameParameters) -> np.ndarray:
    """Trapezoid evaluation of the 2D Herglotz superposition at x."""
    return HerglotzField2D(kernel, params).value(x)


def herglotz_eval_series_2d(kernel: HerglotzKernel2D, x, params: LameParameters,
                            L_max: int) -> np.ndarray:
    """Bessel-series evaluation: plane waves expanded in J_n(k|x|) cos(n .)
    against the kernel's angular moments; agrees with the direct route up
    to the series tail beyond L_max."""
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    x = np.asarray(x, dtype=float)
    rx = float(np.hypot(x[0], x[1]))
    phix = math.atan2(x[1], x[0]) if rx > 0 else 0.0
    w = kernel.weight
    ang = kernel.angles
    out = np.zeros(2, dtype=complex)
    for g, kbeta, pol in (
        (kernel.g_p, params.k_p, kernel.directions),
        (kernel.g_s, params.k_s, np.stack([-np.sin(ang), np.cos(ang)], axis=1)),
    ):
        pref = cmath.exp(-0.25j * math.pi) * math.sqrt(kbeta / params.omega)
        jn = bessel_j_all(L_max, kbeta * rx)
        acc = np.zeros(2, dtype=complex)
        for n in range(L_max + 1):
            cn = w * np.sum((g * np.cos(n * ang))[:, None] * pol, axis=0)
            sn = w * np.sum((g * np.sin(n * ang))[:, None] * pol, axis=0)
            eps = 1.0 if n == 0 else 2.0
            moment = cn * math.cos(n * phix) + sn * math.sin(n * phix)
            acc += eps * (1j ** n) * jn[n] * moment
        out += pref * acc
    return out


def coefficient_moments_2d(kernel: HerglotzKernel2D, params: LameParameters,
                           ell: int, which: int, beta: str, x_angle: float) -> np.ndarray:
    """Angular coefficient vectors of the even/odd series split.

    which = 1: cos(2 ell .) against Re g + Im g
    which = 2: cos((2 ell - 1) .) against Im g - Re g
    which = 3: cos(2 ell .) against Re g - Im g
    The angle argument is measured between the direction node and the
    evaluation direction ``x_angle``.
    """
    if which not in (1, 2, 3):
        raise ValueError("which must be 1, 2, or 3")
    ang = kernel.angles
    if beta == "p":
        g, kbeta, pol = kernel.g_p, params.k_p, kernel.directions
    elif beta == "s":
        g, kbeta, pol = kernel.g_s, params.k_s, np.stack([-np.sin(ang), np.cos(ang)], axis=1)
    else:
        raise ValueError("beta must be 'p' or 's'")
    theta = ang - x_angle
    if which == 1:
        f = (g.real + g.imag) * np.cos(2 * ell * theta)
    elif which == 2:
        f = (g.imag - g.real) * np.cos((2 * ell - 1) * theta)
    else:
        f = (g.real - g.imag) * np.cos(2 * ell * theta)
    pref = math.sqrt(kbeta / params.omega) * kernel.weight
    return pref * np.sum(f[:, None] * pol, axis=0)


def coefficient_bound_2d(kernel: HerglotzKernel2D, params: LameParameters,
                         beta: str) -> float:
    """Right side of the coefficient bound: 2 sqrt(k_beta pi / omega) ||g||."""
    kbeta = params.k_p if beta == "p" else params.k_s
    norm = kernel.norm_p() if beta == "p" else kernel.norm_s()
    return 2.0 * math.sqrt(kbeta * math.pi / params.omega) * norm


# ---------------------------------------------------------------------------
# 3D Herglotz
# ---------------------------------------------------------------------------

def sphere_grid(n_polar: int, n_azim: int) -> tuple[np.ndarray, np.ndarray]:
    """Product quadrature on the unit sphere: Gauss-Legendre in cos(polar),
    equispaced azimuth.  Weights are positive and sum to 4 pi exactly."""
    xg, wg = np.polynomial.legendre.leggauss(n_polar)
    phis = 2.0 * math.pi * np.arange(n_azim) / n_azim
    wphi = 2.0 * math.pi / n_azim
    dirs, wts = [], []
    for ct, w in zip(xg, wg):
        st = math.sqrt(max(0.0, 1.0 - ct * ct))
        for ph in phis:
            dirs.append((st * math.cos(ph), st * math.sin(ph), ct))
            wts.append(w * wphi)
    return np.array(dirs), np.array(wts)


@dataclass
class HerglotzKernel3D:
    """Vector densities at product-quadrature directions on the sphere."""

    directions: np.ndarray      # (N, 3)
    weights: np.ndarray         # (N,)
    g_p: np.ndarray             # (N, 3) complex
    g_s: np.ndarray             # (N, 3) complex

    def __post_init__(self) -> None:
        self.directions = np.asarray(self.directions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.g_p = np.asarray(self.g_p, dtype=complex)
        self.g_s = np.asarray(self.g_s, dtype=complex)
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(float(self.weights.sum()) - 4.0 * math.pi) > 1e-12 * 4.0 * math.pi:
            raise ValueError("weights must sum to 4 pi")


def herglotz_eval_3d(kernel: HerglotzKernel3D, x, params: LameParameters) -> np.ndarray:
    """Direct quadrature of the 3D superposition (no extra normalization)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(3, dtype=complex)
    for g, k in ((kernel.g_p, params.k_p), (kernel.g_s, params.k_s)):
        phase = np.exp(1j * k * (kernel.directions @ x))
        out += (kernel.weights * phase) @ g
    return out


def herglotz_eval_series_3d(kernel: HerglotzKernel3D, x, params: LameParameters,
                            L_max: int) -> np.ndarray:
    """Spherical-Bessel/Legendre series evaluation of the 3D superposition."""
    if L_max < 1:
        raise ValueError("L_max must be >= 1")
    x = np.asarray(x, dtype=float)
    rx = float(np.linalg.norm(x))
    xhat = x / rx if rx > 0 else np.array([0.0, 0.0, 1.0])
    out = np.zeros(3, dtype=complex)
    for g, k in ((kernel.g_p, params.k_p), (kernel.g_s, params.k_s)):
        cosphi = np.clip(kernel.directions @ xhat, -1.0, 1.0)
        pl = np.array([legendre_p_all(L_max, float(c)) for c in cosphi])  # (N, L+1)
        for l in range(L_max + 1):
            jl = spherical_j(l, k * rx)
            moment = (kernel.weights * pl[:, l]) @ g
            out += (1j ** l) * (2 * l + 1) * jl * moment
    return out


# ---------------------------------------------------------------------------
# H1 fitting on a sector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    h1_error_abs: float
    h1_error_rel: float
    target_h1_norm: float
    norm_gp: float
    norm_gs: float
    reg: float
    n_nodes: int
    condition_number: float
    ill_conditioned: bool

    def to_dict(self) -> dict:
        return {
            "h1_error_abs": self.h1_error_abs,
            "h1_error_rel": self.h1_error_rel,
            "target_h1_norm": self.target_h1_norm,
            "norm_gp": self.norm_gp,
            "norm_gs": self.norm_gs,
            "reg": self.reg,
            "n_nodes": self.n_nodes,
            "condition_number": self.condition_number,
            "ill_conditioned": self.ill_conditioned,
        }


def _sector_samples(sector: SectorGeometry, n_r: int, n_t: int):
    u, wu = gauss_panels(0.0, 1.0, n_r, 8, grading=1.3)
    th, wt = gauss_panels(sector.theta_m, sector.theta_M, n_t, 8)
    r = sector.h * u * u
    wr = 2.0 * sector.h * sector.h * u ** 3 * wu      # r dr jacobian
    pts, wts = [], []
    for ri, wri in zip(r, wr):
        if ri == 0.0:
            continue
        for ti, wti in zip(th, wt):
            pts.append((ri * math.cos(ti), ri * math.sin(ti)))
            wts.append(wri * wti)
    return np.array(pts), np.array(wts)


def herglotz_fit(target, sector: SectorGeometry, params: LameParameters,
                 n_nodes: int = 64, reg: float = 1e-10,
                 n_r: int = 6, n_t: int = 6,
                 cond_threshold: float = 1e14,
                 navier_check_tol: float = 1e-6) -> tuple[HerglotzKernel2D, FitReport]:
    """Least-squares Herglotz kernel matching ``target`` in discrete H1(S_h).

    ``target`` must provide value(x) and gradient(x).  The misfit is the
    weighted sum of squared value and gradient mismatches on a graded polar
    grid over the sector, plus reg * ||g||^2_{L2(S1)}.  A warning flag is
    set when the interior residual of the target exceeds
    ``navier_check_tol`` (the density argument only covers solutions).
    """
    pts, wts = _sector_samples(sector, n_r, n_t)
    nq = len(pts)
    sw = np.sqrt(wts)

    # residual-of-target spot check at an interior point
    mid = pts[nq // 2]
    res = np.linalg.norm(navier_apply(target, params, mid)
                         + params.omega ** 2 * np.asarray(target.value(mid)))
    scale = np.linalg.norm(np.atleast_1d(target.value(mid))) + 1e-300
    if res > navier_check_tol * params.omega ** 2 * scale:
        import warnings
        warnings.warn("fit target does not satisfy the interior equation; "
                      "the density argument does not apply", stacklevel=2)

    angles = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pols = np.stack([-np.sin(angles), np.cos(angles)], axis=1)
    w_node = 2.0 * math.pi / n_nodes
    cp = cmath.exp(-0.25j * math.pi) * math.sqrt(params.k_p / params.omega) * w_node
    cs = cmath.exp(-0.25j * math.pi) * math.sqrt(params.k_s / params.omega) * w_node

    ncols = 2 * n_nodes
    nrows = 6 * nq
    A = np.zeros((nrows, ncols), dtype=complex)
    b = np.zeros(nrows, dtype=complex)

    phase_p = np.exp(1j * params.k_p * (pts @ dirs.T))   # (nq, n_nodes)
    phase_s = np.exp(1j * params.k_s * (pts @ dirs.T))
    for q in range(nq):
        tv = np.asarray(target.value(pts[q]))
        tg = np.asarray(target.gradient(pts[q]))
        r0 = 6 * q
        for i in range(2):
            A[r0 + i, :n_nodes] = sw[q] * cp * phase_p[q] * dirs[:, i]
            A[r0 + i, n_nodes:] = sw[q] * cs * phase_s[q] * pols[:, i]
            b[r0 + i] = sw[q] * tv[i]
        for i in range(2):
            for j in range(2):
                row = r0 + 2 + 2 * i + j
                A[row, :n_nodes] = sw[q] * cp * phase_p[q] * dirs[:, i] \
                    * (1j * params.k_p * dirs[:, j])
                A[row, n_nodes:] = sw[q] * cs * phase_s[q] * pols[:, i] \
                    * (1j * params.k_s * dirs[:, j])
                b[row] = sw[q] * tg[i, j]

    reg_rows = math.sqrt(max(reg, 0.0) * w_node) * np.eye(ncols, dtype=complex)
    A_full = np.vstack([A, reg_rows])
    b_full = np.concatenate([b, np.zeros(ncols, dtype=complex)])
    sol, _res, _rank, svals = lstsq(A_full, b_full, lapack_driver="gelsd")
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else math.inf

    kernel = HerglotzKernel2D(sol[:n_nodes], sol[n_nodes:])
    fitted = HerglotzField2D(kernel, params)
    err2 = 0.0
    norm2 = 0.0
    for q in range(nq):
        dv = np.asarray(fitted.value(pts[q])) - np.asarray(target.value(pts[q]))
        dg = np.asarray(fitted.gradient(pts[q])) - np.asarray(target.gradient(pts[q]))
        err2 += wts[q] * (np.sum(np.abs(dv) ** 2) + np.sum(np.abs(dg) ** 2))
        tv = np.asarray(target.value(pts[q]))
        tg = np.asarray(target.gradient(pts[q]))
        norm2 += wts[q] * (np.sum(np.abs(tv) ** 2) + np.sum(np.abs(tg) ** 2))
    h1_abs = math.sqrt(err2)
    h1_norm = math.sqrt(norm2)
    report = FitReport(
        h1_error_abs=h1_abs,
        h1_error_rel=h1_abs / h1_norm if h1_norm > 0 else 0.0,
        target_h1_norm=h1_norm,
        norm_gp=kernel.norm_p(),
        norm_gs=kernel.norm_s(),
        reg=reg,
        n_nodes=n_nodes,
        condition_number=cond,
        ill_conditioned=bool(cond > cond_threshold),
    )
    return kernel, report


@dataclass(frozen=True)
class ApproxSchedule:
    """Target rates for an approximating Herglotz sequence indexed by j."""

    gamma: float
    beta_1: float
    beta_2: float

    def __post_init__(self) -> None:
        if not (self.gamma > max(self.beta_1, self.beta_2) > 0):
            raise ValueError("need gamma > max(beta_1, beta_2) > 0")


def schedule_check(reports: Sequence[FitReport], schedule: ApproxSchedule) -> dict:
    """Per-index pass/fail table for the three rate inequalities."""
    rows = []
    for j, rep in enumerate(reports, start=1):
        rows.append({
            "j": j,
            "h1_error": rep.h1_error_abs,
            "norm_gp": rep.norm_gp,
            "norm_gs": rep.norm_gs,
            "error_ok": bool(rep.h1_error_abs <= j ** (-schedule.gamma) + 1e-300),
            "gp_ok": bool(rep.norm_gp <= j ** schedule.beta_1 * (1 + 1e-12)),
            "gs_ok": bool(rep.norm_gs <= j ** schedule.beta_2 * (1 + 1e-12)),
        })
    js = np.arange(1, len(reports) + 1, dtype=float)
    errs = np.array([r.h1_error_abs for r in reports])
    fitted_gamma = None
    if len(reports) >= 3 and np.all(errs > 0):
        fitted_gamma = -float(np.polyfit(np.log(js), np.log(errs), 1)[0])
    return {
        "rows": rows,
        "all_pass": all(r["error_ok"] and r["gp_ok"] and r["gs_ok"] for r in rows),
        "fitted_error_exponent": fitted_gamma,
    }
