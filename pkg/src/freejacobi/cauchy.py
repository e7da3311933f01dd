"""Evolution equation for the Cauchy transform on an upper-half-plane contour.

In differential form the transform satisfies

    dG/dt = (1 - 2 lt) G + lt (2z - 1) G^2
            + ((1 - 2 lt) z - theta (1 - lambda)) G'
            + 2 lt z (z - 1) G G',            lt = lambda theta,

with G' = dG/dz.  On a horizontal contour the z-derivative equals the
x-derivative (holomorphy), computed by 4th-order finite differences with
one-sided stencils at the endpoints.

The differential form transported along a truncated contour is well posed
only on upper-half-plane-analytic data: the discretization also carries the
conjugate branch, whose modes grow like |k| Im(advection) and swamp the
solution long before t = 1.  ``solve_pde`` therefore re-projects every
Runge-Kutta stage onto an analytic rational subspace (powers of 1/(z - 1/2)),
which suppresses the spurious branch exactly and leaves the physics intact;
see the projector notes on :func:`analytic_projector`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .stationary import JacobiParams

__all__ = [
    "ContourSample",
    "make_contour",
    "contour_derivative",
    "pde_rhs_values",
    "pde_rhs",
    "analytic_projector",
    "solve_pde",
    "h_from_G",
    "G_from_h",
    "cauchy_from_moments",
    "cauchy_derivative_from_moments",
    "laurent_coefficients",
]

TRUST_MARGIN = 5  # endpoint stencil points excluded from the trust region


def make_contour(x_lo: float = -4.0, x_hi: float = 6.0, y0: float = 1.0, dx: float = 0.01):
    """Uniform horizontal contour x + i y0 with spacing dx."""
    if y0 <= 0:
        raise DomainError("contour must sit in the open upper half-plane")
    if x_lo >= x_hi or dx <= 0:
        raise DomainError("need x_lo < x_hi and dx > 0")
    n = int(round((x_hi - x_lo) / dx)) + 1
    return x_lo + dx * np.arange(n) + 1j * y0


@dataclass
class ContourSample:
    """Values of G on a uniform horizontal contour at one time."""

    points: np.ndarray
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.points, dtype=complex)
        v = np.asarray(self.values, dtype=complex)
        if z.ndim != 1 or z.shape != v.shape or z.size < 5:
            raise DomainError("contour needs >= 5 points and matching values")
        y = z.imag
        if y[0] <= 0 or np.max(np.abs(y - y[0])) > 1e-12:
            raise DomainError("contour must be horizontal with Im z = y0 > 0")
        dx = np.diff(z.real)
        if np.max(np.abs(dx - dx[0])) > 1e-9 * abs(dx[0]):
            raise DomainError("contour must be uniformly spaced")
        object.__setattr__(self, "points", z)
        object.__setattr__(self, "values", v)

    @property
    def dx(self):
        return float(self.points[1].real - self.points[0].real)

    @property
    def trust(self):
        """Slice excluding the endpoint-stencil zone at both ends."""
        return slice(TRUST_MARGIN, self.points.size - TRUST_MARGIN)

    def herglotz_ok(self):
        ok = bool(np.all(self.values.imag < 0.0))
        far = np.abs(self.points) >= 10.0
        if far.any():
            zg = self.points[far] * self.values[far]
            ok = ok and bool(np.all(np.abs(zg - 1.0) <= 2.0 / np.abs(self.points[far])))
        return ok


def contour_derivative(values: np.ndarray, dx: float) -> np.ndarray:
    """4th-order dG/dx: centered stencils inside, one-sided at two points per end."""
    v = np.asarray(values)
    if v.size < 5:
        raise DomainError("derivative stencils need at least 5 contour points")
    gp = np.empty_like(v)
    gp[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * dx)
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    gp[0] = c0 @ v[:5] / dx
    gp[1] = c1 @ v[:5] / dx
    gp[-1] = -(c0 @ v[-5:][::-1]) / dx
    gp[-2] = -(c1 @ v[-5:][::-1]) / dx
    return gp


def pde_rhs_values(z, G, Gp, params: JacobiParams):
    """Pointwise dG/dt given values G and derivative Gp at points z."""
    lt = params.alpha
    lin = (1.0 - 2.0 * lt) * G + lt * (2.0 * z - 1.0) * G * G
    adv = ((1.0 - 2.0 * lt) * z - params.theta * (1.0 - params.lam)) * Gp
    return lin + adv + 2.0 * lt * z * (z - 1.0) * G * Gp


def pde_rhs(sample: ContourSample, params: JacobiParams) -> np.ndarray:
    """dG/dt on the contour, with G' from the finite-difference stencils."""
    gp = contour_derivative(sample.values, sample.dx)
    return pde_rhs_values(sample.points, sample.values, gp, params)


def analytic_projector(points: np.ndarray, basis_size: int = 32):
    """Orthonormal basis Q for span{(z - 1/2)^-(n+1), n < basis_size} on the contour.

    Functions analytic off [0,1] and vanishing at infinity expand in inverse
    powers of (z - 1/2) with coefficients decaying at least like 2^-n on our
    contours, so basis_size = 32 represents them to ~1e-10.  Larger bases put
    the shortest basis scale (|z - 1/2|/n) under the stencil resolution and
    re-introduce the instability, so the default is a deliberate cap.
    """
    base = 1.0 / (np.asarray(points, complex) - 0.5)
    psi = np.empty((base.size, basis_size), complex)
    psi[:, 0] = base
    for n in range(1, basis_size):
        psi[:, n] = psi[:, n - 1] * base
    psi /= np.linalg.norm(psi, axis=0, keepdims=True)
    q, _ = np.linalg.qr(psi)
    return q


def solve_pde(
    initial: ContourSample,
    params: JacobiParams,
    T: float,
    h: float = 1e-3,
    record_every: int = 100,
    stabilize: bool = True,
    basis_size: int = 32,
):
    """March the transform PDE in time with RK4; returns recorded ContourSamples.

    Every stage is projected onto the analytic subspace when ``stabilize`` is
    set (the default; see the module docstring for why the raw scheme cannot
    run past t ~ 0.2).
    """
    if h <= 0 or T < 0:
        raise DomainError("need h > 0 and T >= 0")
    n_steps = int(round(T / h))
    if abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        raise DomainError(f"T={T} is not a multiple of h={h}")
    z = initial.points
    dx = initial.dx
    if stabilize:
        q = analytic_projector(z, basis_size)
        project = lambda v: q @ (q.conj().T @ v)
    else:
        project = lambda v: v

    def f(v):
        return pde_rhs_values(z, v, contour_derivative(v, dx), params)

    G = project(initial.values.astype(complex))
    out = [ContourSample(z, G.copy(), initial.t)]
    for i in range(n_steps):
        k1 = f(G)
        k2 = f(project(G + 0.5 * h * k1))
        k3 = f(project(G + 0.5 * h * k2))
        k4 = f(project(G + h * k3))
        G = project(G + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.isfinite(G).all():
            raise DomainError(f"PDE solution lost finiteness at t={initial.t + (i + 1) * h:.4g}")
        if (i + 1) % record_every == 0 or i == n_steps - 1:
            out.append(ContourSample(z, G.copy(), initial.t + (i + 1) * h))
    return out


# ---------------------------------------------------------------------------
# change of variables and Laurent helpers
# ---------------------------------------------------------------------------

def h_from_G(G: Callable, u):
    """h(u) = (1/u) G(1/u); h(0) = 1 by the total-mass limit."""
    u = complex(u)
    if u == 0:
        return 1.0 + 0.0j
    return G(1.0 / u) / u


def G_from_h(h: Callable, z):
    """Inverse change of variables: G(z) = (1/z) h(1/z)."""
    z = complex(z)
    if z == 0:
        raise DomainError("G_from_h is singular at z = 0")
    return h(1.0 / z) / z


def cauchy_from_moments(m, z):
    """Laurent sum G(z) = sum_n m_n z^{-n-1} (Horner in 1/z)."""
    z = np.asarray(z, dtype=complex)
    w = 1.0 / z
    acc = np.zeros_like(w)
    for mn in np.asarray(m)[::-1]:
        acc = (acc + mn) * w
    return acc


def cauchy_derivative_from_moments(m, z):
    """d/dz of the Laurent sum: -sum_n (n+1) m_n z^{-n-2}."""
    m = np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=complex)
    return -cauchy_from_moments(np.arange(1, m.size + 1) * m, z) / z


def laurent_coefficients(fn: Callable, order: int, radius: float = 4.0, samples: int = 4096):
    """Coefficients of z^{-1}..z^{-order} of ``fn`` by contour integration on |z| = radius.

    Double precision limits the reachable order to roughly log(1e8)/log(radius);
    beyond that the radius^k amplification of rounding noise dominates.
    """
    phi = 2.0 * np.pi * np.arange(samples) / samples
    zz = radius * np.exp(1j * phi)
    vals = np.asarray(fn(zz), dtype=complex)
    out = np.empty(order, dtype=complex)
    for k in range(1, order + 1):
        out[k - 1] = np.mean(vals * np.exp(1j * k * phi)) * radius ** k
    return out
