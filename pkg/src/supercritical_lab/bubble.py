"""The standard bubble, its rescalings, and reference constants derived from it
by quadrature (never hard-coded)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np
from scipy import integrate

from .discretization import Field
from .geometry import GeneratorDomain, critical_exponent, sphere_area


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class BubbleParams:
    n: int
    epsilon: float
    zeta: tuple

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("bubble needs n >= 3")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def _check_n(n):
    if n < 3:
        raise ValueError("bubble needs n >= 3")


def bubble_peak(n: int) -> float:
    """U(0) = [n(n-2)]^{(n-2)/4}."""
    _check_n(n)
    return (n * (n - 2.0)) ** ((n - 2.0) / 4.0)


def bubble_value(x, n: int):
    """U at radius r (scalar or 1D array) or at points of R^n given as rows
    of a 2D array."""
    _check_n(n)
    x = np.asarray(x, float)
    r2 = x * x if x.ndim <= 1 else np.sum(x * x, axis=-1)
    return bubble_peak(n) * (1.0 + r2) ** (-(n - 2.0) / 2.0)


def bubble_derivative(r, n: int):
    """dU/dr."""
    r = np.asarray(r, float)
    return -(n - 2.0) * bubble_peak(n) * r * (1.0 + r * r) ** (-n / 2.0)


def bubble_pde_residual(n: int, sample_radii: Sequence[float], step: float = 1e-4,
                        amplitude: float = 1.0, dps: int = 40) -> float:
    """Max relative error between -(U'' + (n-1)U'/r) and U^{(n+2)/(n-2)}.

    Derivatives of the closed form ``amplitude * U`` are taken by 5-point
    central differences evaluated in extended precision, so the step can be
    small without round-off swamping the check.
    """
    _check_n(n)
    with mpmath.workdps(dps):
        c = mpmath.mpf(n * (n - 2)) ** (mpmath.mpf(n - 2) / 4)
        amp = mpmath.mpf(amplitude)
        e = mpmath.mpf(n - 2) / 2

        def U(r):
            return amp * c * (1 + r * r) ** (-e)

        h = mpmath.mpf(step)
        worst = 0.0
        for r in sample_radii:
            r = mpmath.mpf(r)
            f = [U(r + k * h) for k in (-2, -1, 0, 1, 2)]
            d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
            d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
            lap = -(d2 + (n - 1) * d1 / r)
            rhs = f[2] ** (mpmath.mpf(n + 2) / (n - 2))
            worst = max(worst, float(abs(lap - rhs) / abs(rhs)))
    return worst


def rescaled_bubble(dom: GeneratorDomain, epsilon: float, zeta: Sequence[float], n: int,
                    sign: float = 1.0) -> np.ndarray:
    """Nodal interpolant of eps^{(2-n)/2} U((x - zeta)/eps).

    Boundary nodes are not zeroed: this is a free-space profile.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = dom.nodes - np.asarray(zeta, float)[None, : dom.dim]
    r = np.linalg.norm(x, axis=1) / epsilon
    return sign * epsilon ** ((2.0 - n) / 2.0) * bubble_value(r, n)


def rescaled_bubble_field(dom, epsilon, zeta, n) -> Field:
    return Field(dom, rescaled_bubble(dom, epsilon, zeta, n))


def _radial_integral(f, R, n_pieces_per_decade=1):
    """int_0^R f(r) dr split on a logarithmic grid for QUADPACK."""
    edges = [0.0, 1e-2, 1e-1, 1.0]
    x = 1.0
    while x < R:
        x = min(10.0 * x, R)
        edges.append(x)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=500)
        if not math.isfinite(val) or err > 1e-10 * max(abs(val), 1e-300) + 1e-300:
            raise QuadratureError(f"quadrature did not converge on [{a}, {b}]")
        total += val
    return total


def _cutoff_radius(n, head, rel=1e-9):
    # |U'| r^{(n-1)/2} <= K (n-2) r^{(1-n)/2}: tail of |grad U|^2 <= K^2 (n-2) R^{2-n}
    K2 = bubble_peak(n) ** 2
    return (K2 * (n - 2.0) / (rel * head)) ** (1.0 / (n - 2.0))


def dirichlet_energy(n: int, R: float = math.inf) -> float:
    """int_{|x|<R} |grad U|^2 over R^n by radial quadrature."""
    area = sphere_area(n - 1)
    f = lambda r: bubble_derivative(r, n) ** 2 * r ** (n - 1)
    if math.isinf(R):
        head = _radial_integral(f, 10.0)
        R = _cutoff_radius(n, head)
    return area * _radial_integral(f, R)


def critical_norm(n: int) -> float:
    """int |U|^{2*} over R^n."""
    area = sphere_area(n - 1)
    q = critical_exponent(n)
    f = lambda r: bubble_value(r, n) ** q * r ** (n - 1)
    head = _radial_integral(f, 10.0)
    # U^{2*} r^{n-1} <= K^{2*} r^{-n-1}: tail <= K^{2*} R^{-n} / n
    R = (bubble_peak(n) ** q / (n * 1e-9 * head)) ** (1.0 / n)
    return area * _radial_integral(f, max(R, 10.0))


@dataclass(frozen=True)
class LimitEnergy:
    n: int
    S_half_power: float
    ell_infinity: float
    critical_integral: float
    J_direct: float


def limit_energy(n: int, rtol: float = 1e-6) -> LimitEnergy:
    """S^{n/2} = ||U||^2 and ell_inf = S^{n/2}/n, after checking that U lies
    on the limit Nehari set and that J_inf(U) agrees with the level."""
    _check_n(n)
    grad = dirichlet_energy(n)
    crit = critical_norm(n)
    if abs(grad - crit) > rtol * grad:
        raise QuadratureError(f"||U||^2={grad} and |U|^2*={crit} disagree")
    q = critical_exponent(n)
    J = 0.5 * grad - crit / q
    ell = grad / n
    if abs(J - ell) > rtol * ell:
        raise QuadratureError(f"J_inf(U)={J} differs from ||U||^2/n={ell}")
    return LimitEnergy(n, grad, ell, crit, J)
