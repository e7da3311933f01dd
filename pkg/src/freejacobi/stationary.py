"""Closed-form stationary law of the free Jacobi process.

The stationary spectral measure for parameters (lambda, theta) is

    mu = max(0, 1-l) delta_0 + max(0, 1-k) delta_1 + g(x) dx,
    g(x) = sqrt((x - x_minus)(x_plus - x)) / (2 lambda theta pi x (1-x)),
    x_pm = (sqrt(theta(1 - lambda theta)) +- sqrt(lambda theta(1 - theta)))^2,

with l = 1/lambda and k = (1-theta)/(lambda theta).  Its Cauchy transform,
R/K-transform pipeline, Gauss-hypergeometric moment ladder and log-potentials
are implemented here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BranchError, DomainError
from .measures import SpectralMeasure, quadrature

__all__ = [
    "JacobiParams",
    "support_edges",
    "stationary_density",
    "stationary_atoms",
    "stationary_cauchy",
    "stationary_measure",
    "projection_r_transform",
    "compressed_r_transform",
    "compressed_k_transform",
    "hyp2f1",
    "stationary_moment",
    "stationary_moments",
    "arcsine_moments_exact",
    "stationary_log_potentials",
    "log_potential_integral",
]


@dataclass(frozen=True)
class JacobiParams:
    """Parameter pair (lambda, theta) with derived constants and regime flags."""

    lam: float
    theta: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be positive and finite, got {self.lam}")
        if not (0.0 < self.theta < 1.0):
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        if self.lam * self.theta > 1.0 + 1e-15:
            raise DomainError(f"lambda*theta must be <= 1, got {self.lam * self.theta}")

    # derived constants -----------------------------------------------------

    @property
    def alpha(self):
        return self.lam * self.theta

    @property
    def r(self):
        return 1.0 / (self.lam * self.theta)

    @property
    def l(self):
        return 1.0 / self.lam

    @property
    def k(self):
        return (1.0 - self.theta) / (self.lam * self.theta)

    @property
    def A(self):
        return self.r ** 2

    @property
    def B(self):
        return 2.0 * (self.r + (self.r - 2.0) / self.lam)

    @property
    def C(self):
        return (1.0 - 1.0 / self.lam) ** 2

    # regime flags -----------------------------------------------------------

    @property
    def sde_valid(self):
        """Free-SDE regime: lambda <= 1 and 1/theta >= lambda + 1."""
        return self.lam <= 1.0 and 1.0 / self.theta >= self.lam + 1.0

    @property
    def strict_interior(self):
        """No atoms and support edges strictly inside (0, 1)."""
        return self.lam < 1.0 and 1.0 / self.theta > self.lam + 1.0


def support_edges(p: JacobiParams):
    """Edges x_minus <= x_plus of the absolutely continuous part.

    Both are roots of A x^2 - B x + C (checked to 1e-10 in the test suite; the
    printed coefficients are consistent with the closed-form edges).
    """
    s = math.sqrt(p.theta * (1.0 - p.alpha))
    t = math.sqrt(p.alpha * (1.0 - p.theta))
    return (s - t) ** 2, (s + t) ** 2


def stationary_atoms(p: JacobiParams):
    """Atom masses (a0, a1) = (max(0, 1 - 1/lambda), max(0, 1 - k))."""
    return max(0.0, 1.0 - p.l), max(0.0, 1.0 - p.k)


def stationary_density(p: JacobiParams, x):
    """Density g(x) on (x_minus, x_plus); 0 outside and at the exact edges.

    When an edge sits at 0 or 1 (lambda = 1, or theta(lambda+1) = 1) the
    density blows up integrably there and is defined on the open interval
    only.
    """
    xm, xp = support_edges(p)
    xa = np.asarray(x, dtype=float)
    out = np.zeros(xa.shape)
    inside = (xa > xm) & (xa < xp) & (xa > 0.0) & (xa < 1.0)
    if inside.any():
        xi = xa[inside]
        out[inside] = np.sqrt((xi - xm) * (xp - xi)) / (
            2.0 * p.alpha * np.pi * xi * (1.0 - xi)
        )
    return out if out.ndim else float(out)


def stationary_measure(p: JacobiParams, grid_size: int = 2048) -> SpectralMeasure:
    """Assemble the stationary law as a :class:`SpectralMeasure`."""
    xm, xp = support_edges(p)
    a0, a1 = stationary_atoms(p)
    return SpectralMeasure.from_density(
        lambda x: stationary_density(p, x), xm, xp, atom0=a0, atom1=a1, grid_size=grid_size
    )


# ---------------------------------------------------------------------------
# Cauchy transform and R/K pipeline
# ---------------------------------------------------------------------------

def _edge_sqrt(p: JacobiParams, z):
    # sqrt(A z^2 - B z + C) = r sqrt((z - x_minus)(z - x_plus)) on the branch
    # asymptotic to r*z at infinity: factor through the edge midpoint so the
    # principal square root applies off the cut [x_minus, x_plus].
    xm, xp = support_edges(p)
    c = 0.5 * (xm + xp)
    d = 0.5 * (xp - xm)
    zc = z - c
    return p.r * zc * np.sqrt(1.0 - (d / zc) ** 2)


def stationary_cauchy(p: JacobiParams, z):
    """G(z) = ((2-r) z + (1/lambda - 1) + sqrt(A z^2 - B z + C)) / (2 z (z-1)).

    The branch is fixed by z G(z) -> 1 at infinity, which also gives
    Im G(z) < 0 on the upper half-plane.
    """
    zarr = np.asarray(z, dtype=complex)
    scalar = zarr.ndim == 0
    zs = np.atleast_1d(zarr)
    if ((zs.imag == 0) & (zs.real >= 0.0) & (zs.real <= 1.0)).any():
        raise DomainError("stationary_cauchy is undefined on [0, 1]")
    w = _edge_sqrt(p, zs)
    out = ((2.0 - p.r) * zs + (p.l - 1.0) + w) / (2.0 * zs * (zs - 1.0))
    return out[0] if scalar else out


def projection_r_transform(theta: float, z, steps: int = 200):
    """R-transform of the two-atom law (1-theta) delta_0 + theta delta_1.

    R_a(z) = (z - 1 + sqrt((z-1)^2 + 4 theta z)) / (2z) with the square-root
    branch continued from the value +1 at z = 0 along the straight path to z,
    so R_a(0+) = theta.  Raises :class:`BranchError` if the radicand vanishes
    on the path.
    """
    z = complex(z)
    if z == 0:
        return complex(theta)
    w = 1.0 + 0.0j
    for j in range(1, steps + 1):
        u = z * (j / steps)
        q = (u - 1.0) ** 2 + 4.0 * theta * u
        if abs(q) < 1e-13 * (1.0 + abs(u)) ** 2:
            raise BranchError(f"radicand vanishes on the path at u={u}")
        s = np.sqrt(complex(q))
        w = s if abs(s - w) <= abs(-s - w) else -s
    return (z - 1.0 + w) / (2.0 * z)


def compressed_r_transform(p: JacobiParams, z, steps: int = 200):
    """R-transform of the stationary law: R(z) = R_a(lambda theta z)."""
    z = complex(z)
    if z == 0:
        return complex(p.theta)
    return projection_r_transform(p.theta, p.alpha * z, steps=steps)


def compressed_k_transform(p: JacobiParams, z, steps: int = 200):
    """K(z) = R(z) + 1/z, the functional inverse of the Cauchy transform."""
    z = complex(z)
    if z == 0:
        raise DomainError("K is singular at z = 0")
    return compressed_r_transform(p, z, steps=steps) + 1.0 / z


# ---------------------------------------------------------------------------
# Gauss hypergeometric series and the moment ladder
# ---------------------------------------------------------------------------

def _is_nonpositive_int(a):
    if isinstance(a, Fraction):
        return a.denominator == 1 and a <= 0
    return float(a) <= 0 and float(a) == int(a)


def hyp2f1(a, b, c, w):
    """Ascending-series 2F1(a, b; c; w).

    Terminating cases (``a`` a nonpositive integer) are summed exactly for any
    ``w`` and stay exact for Fraction inputs; otherwise the series requires
    |w| < 1 and stops at relative term size 1e-16.
    """
    terminating = _is_nonpositive_int(a)
    if not terminating and abs(w) >= 1.0:
        raise DomainError("non-terminating 2F1 series requires |w| < 1")
    exact = terminating and all(isinstance(v, (Fraction, int)) for v in (a, b, c, w))
    one = Fraction(1) if exact else 1.0
    s = one
    term = one
    k = 0
    while True:
        if terminating and a + k == 0:
            break
        num = (a + k) * (b + k)
        den = (c + k) * (k + 1)
        if den == 0:
            raise DomainError("2F1 series hit a nonpositive integer denominator parameter")
        term = term * num / den * w
        s = s + term
        k += 1
        if not terminating and abs(term) <= 1e-16 * abs(s):
            break
        if k > 100000:
            raise DomainError("2F1 series failed to converge")
    return s


def _ladder_moments(p: JacobiParams, N: int) -> np.ndarray:
    xm, xp = support_edges(p)
    m = np.empty(N + 1)
    m[0] = 1.0
    if N == 0:
        return m
    # 1 - m_1 = K * I(x_-, x_+) with K = 1/(2 pi lambda theta) and
    # I = (pi/2)(sqrt(x_+) - sqrt(x_-))^2
    m[1] = 1.0 - (math.sqrt(xp) - math.sqrt(xm)) ** 2 / (4.0 * p.alpha)
    pref = (xp - xm) ** 2 / (16.0 * p.alpha)
    zf = (xp - xm) / xp
    for n in range(1, N):
        # m_n - m_{n+1} = (K pi / 8)(x_+ - x_-)^2 x_+^{n-1} 2F1(1-n, 3/2; 3; zf)
        m[n + 1] = m[n] - pref * xp ** (n - 1) * hyp2f1(1 - n, 1.5, 3.0, zf)
    return m


def _quadrature_moments(p: JacobiParams, N: int) -> np.ndarray:
    xm, xp = support_edges(p)
    a0, a1 = stationary_atoms(p)
    dens = lambda x: stationary_density(p, x)
    m = np.empty(N + 1)
    m[0] = 1.0
    for n in range(1, N + 1):
        m[n] = a1 + quadrature(lambda x, n=n: x ** n * dens(x), xm, xp)
    return m


def stationary_moments(p: JacobiParams, N: int, method: str = "auto") -> np.ndarray:
    """Stationary moments m_0..m_N.

    ``auto`` uses the hypergeometric ladder when there is no atom at 0 and the
    ladder stays monotone in [0, 1]; it falls back to quadrature otherwise
    (the fallback is also the cross-check oracle in the tests).
    """
    if N < 0:
        raise DomainError("moment order must be >= 0")
    if method not in ("auto", "series", "quadrature"):
        raise DomainError(f"unknown moment method {method!r}")
    a0, _ = stationary_atoms(p)
    if method == "quadrature" or (method == "auto" and a0 > 0.0):
        return _quadrature_moments(p, N)
    m = _ladder_moments(p, N)
    if method == "auto":
        stable = np.all(np.diff(m) <= 1e-10) and np.all(m >= -1e-10) and np.all(m <= 1 + 1e-12)
        if not stable:
            warnings.warn(
                f"hypergeometric moment ladder unstable at N={N}; falling back to quadrature",
                RuntimeWarning,
                stacklevel=2,
            )
            return _quadrature_moments(p, N)
    return m


def stationary_moment(p: JacobiParams, n: int) -> float:
    """Single stationary moment m_n (see :func:`stationary_moments`)."""
    return float(stationary_moments(p, n)[n])


def arcsine_moments_exact(N: int):
    """Exact rational arcsine moments via the hypergeometric ladder.

    At (lambda, theta) = (1, 1/2) every ladder ingredient is rational
    (K pi = 1, edges 0 and 1), so the ladder runs in Fractions and must
    reproduce binom(2n, n)/4^n.
    """
    m = [Fraction(1)]
    if N == 0:
        return m
    m.append(Fraction(1, 2))
    for n in range(1, N):
        m.append(m[n] - Fraction(1, 8) * hyp2f1(1 - n, Fraction(3, 2), Fraction(3), Fraction(1)))
    return m


# ---------------------------------------------------------------------------
# log-potentials
# ---------------------------------------------------------------------------

def _xlogx(u: float) -> float:
    return 0.0 if u <= 0.0 else u * math.log(u)


def _require_sde_regime(p: JacobiParams):
    if not (p.lam <= 1.0 and p.theta * (p.lam + 1.0) <= 1.0 + 1e-12):
        raise DomainError(
            "log-potentials require lambda <= 1 and 1/theta >= lambda + 1; "
            f"got lambda={p.lam}, theta={p.theta}"
        )


def stationary_log_potentials(p: JacobiParams):
    """Closed-form trace log-potentials (E log(1-J), E log J) at stationarity.

    The first is
        [(1-t) log(1-t) + (1-lt) log(1-lt) - (1-t(l+1)) log(1-t(l+1))] / (lt)
    with l = lambda, t = theta and the 0 log 0 = 0 convention at the regime
    boundary; the second follows under the parameter involution
    (lambda, theta) -> (lambda theta/(1-theta), 1-theta), which swaps J and
    1-J within the same family.
    """
    _require_sde_regime(p)

    def log1m_of(lam, theta):
        return (
            _xlogx(1.0 - theta) + _xlogx(1.0 - lam * theta) - _xlogx(1.0 - theta * (lam + 1.0))
        ) / (lam * theta)

    log1m = log1m_of(p.lam, p.theta)
    logj = log1m_of(p.alpha / (1.0 - p.theta), 1.0 - p.theta)
    return log1m, logj


def log_potential_integral(p: JacobiParams) -> float:
    """Integral representation of twice the log(1-J) potential.

    Evaluates -int_0^1 [(1 + 1/lambda) z - r + sqrt(C z^2 - B z + A)] /
    (z (1-z)) dz, which equals 2 * stationary_log_potentials(p)[0]; the
    integrand has finite endpoint limits in the valid regime.
    """
    _require_sde_regime(p)
    A, B, C, r, l = p.A, p.B, p.C, p.r, p.l

    def f(z):
        return ((1.0 + l) * z - r + np.sqrt(C * z * z - B * z + A)) / (z * (1.0 - z))

    return -float(quadrature(f, 0.0, 1.0))
