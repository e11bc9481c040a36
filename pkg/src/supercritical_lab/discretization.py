"""P1 assembly of the weighted forms and evaluation of the energy functional.

On a generator domain the integrals carry an orbit measure
``orbit_scale * s^orbit_exponent`` (the Jacobian of the axial reduction)
times the coefficient ``a_scale * s^alpha * t^beta``; ``b = lam * a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .geometry import AmbientParams, GeneratorDomain, sphere_area

_ABS_FLOOR = 1e-300


class AssemblyError(ValueError):
    pass


# 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
_R15 = math.sqrt(15.0)
_B1, _B2 = (6.0 + _R15) / 21.0, (6.0 - _R15) / 21.0
_W1, _W2 = (155.0 - _R15) / 1200.0, (155.0 + _R15) / 1200.0
TRI_BARY = np.array(
    [[1 / 3, 1 / 3, 1 / 3]]
    + [np.roll([1 - 2 * _B1, _B1, _B1], k).tolist() for k in range(3)]
    + [np.roll([1 - 2 * _B2, _B2, _B2], k).tolist() for k in range(3)]
)
TRI_W = np.array([0.225] + [_W1] * 3 + [_W2] * 3)

_G = math.sqrt(0.6) / 2.0
SEG_BARY = np.array([[0.5 + _G, 0.5 - _G], [0.5, 0.5], [0.5 - _G, 0.5 + _G]])
SEG_W = np.array([5.0, 8.0, 5.0]) / 18.0


@dataclass(frozen=True)
class WeightSpec:
    """Coefficients of the weighted problem.

    ``a_exponents = (alpha, beta)`` gives a(s, t) = a_scale s^alpha t^beta on
    top of the orbit measure; ``c_exponents`` defaults to the same.
    ``c_bump = (s_b, t_b, amplitude, width)`` multiplies c by
    1 + amplitude * exp(-|x - x_b|^2 / width^2).
    """

    a_exponents: Tuple[float, float] = (0.0, 0.0)
    lam: float = 0.0
    c_exponents: Optional[Tuple[float, float]] = None
    a_scale: float = 1.0
    c_scale: float = 1.0
    c_bump: Optional[Tuple[float, float, float, float]] = None
    orbit_exponent: float = 0.0
    orbit_scale: float = 1.0

    def __post_init__(self):
        if self.c_exponents is None:
            object.__setattr__(self, "c_exponents", tuple(self.a_exponents))
        if self.a_scale <= 0 or self.c_scale <= 0 or self.orbit_scale <= 0:
            raise AssemblyError("weight prefactors must be positive")

    def _coords(self, x):
        x = np.asarray(x, float)
        if x.shape[-1] == 1:
            return np.zeros_like(x[..., 0]), x[..., 0]
        return x[..., 0], x[..., 1]

    def orbit(self, x):
        s, _ = self._coords(x)
        if self.orbit_exponent == 0:
            return np.full_like(s, self.orbit_scale)
        return self.orbit_scale * s**self.orbit_exponent

    def a_coeff(self, x):
        s, t = self._coords(x)
        al, be = self.a_exponents
        return self.a_scale * s**al * t**be

    def c_coeff(self, x):
        s, t = self._coords(x)
        al, be = self.c_exponents
        val = self.c_scale * s**al * t**be
        if self.c_bump is not None:
            sb, tb, amp, width = self.c_bump
            r2 = (s - sb) ** 2 + (t - tb) ** 2
            val = val * (1.0 + amp * np.exp(-r2 / width**2))
        return val

    def a(self, x):
        return self.orbit(x) * self.a_coeff(x)

    def c(self, x):
        return self.orbit(x) * self.c_coeff(x)

    def a_over_c(self, x):
        """a/c of the coefficients (the orbit measure cancels)."""
        return self.a_coeff(x) / self.c_coeff(x)

    def concentration_ratio(self, x, n):
        """a^{n/2} / c^{(n-2)/2}: the quantity whose minimiser over the
        fixed-point set locates single-bump concentration."""
        return self.a_coeff(x) ** (n / 2.0) / self.c_coeff(x) ** ((n - 2) / 2.0)

    def scaled(self, factor: float) -> "WeightSpec":
        """Same weights with a and c both multiplied by ``factor``."""
        return WeightSpec(self.a_exponents, self.lam, self.c_exponents,
                          self.a_scale * factor, self.c_scale * factor, self.c_bump,
                          self.orbit_exponent, self.orbit_scale)


def reduction_weights(params: AmbientParams, lam: float = 0.0, c_bump=None) -> WeightSpec:
    """Weights of the reduced problem: a = c = t^m, b = lam t^m, with the
    orbit measure |S^{n-2}| s^{n-2} in axial mode."""
    if params.mode == "axial":
        return WeightSpec((0.0, float(params.m)), lam, None, 1.0, 1.0, c_bump,
                          float(params.n - 2), sphere_area(params.n - 2))
    return WeightSpec((0.0, float(params.m)), lam, None, 1.0, 1.0, c_bump)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values on a generator domain; Dirichlet nodes are zero."""

    dom: GeneratorDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.dom.mesh.n_nodes,):
            raise ValueError("field size does not match the mesh")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        v[self.dom.mesh.dirichlet] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Weighted P1 matrices restricted to the free (non-Dirichlet) nodes.

    ``K`` is the a-weighted stiffness matrix, ``M`` the a-weighted mass
    matrix, both on free nodes.  Quadrature data for the c-weighted
    nonlinear terms and per-element data for windowed seminorms are kept.
    """

    dom: GeneratorDomain
    weights: WeightSpec
    K: sp.csr_matrix
    M: sp.csr_matrix
    free: np.ndarray
    phi_q: np.ndarray
    qc: np.ndarray
    grads: np.ndarray
    a_int: np.ndarray
    measure: np.ndarray
    rule: str = ""

    @property
    def lam(self) -> float:
        return self.weights.lam

    @property
    def n_nodes(self) -> int:
        return self.dom.mesh.n_nodes

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, float)[self.free]

    def extend(self, uf: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        out[self.free] = uf
        return out

    def quad_values(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, float)[self.dom.mesh.elements] @ self.phi_q.T

    def operator(self) -> sp.csr_matrix:
        """K + lam M on free nodes."""
        return (self.K + self.lam * self.M).tocsr()


def _values(u):
    return u.values if isinstance(u, Field) else np.asarray(u, float)


def _element_gradients(nodes, elements):
    x = nodes[elements]
    if nodes.shape[1] == 1:
        L = x[:, 1, 0] - x[:, 0, 0]
        g = np.stack([-1.0 / L, 1.0 / L], axis=1)[:, :, None]
        return g, L
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of barycentric coordinates
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    g0 = -g1 - g2
    return np.stack([g0, g1, g2], axis=1), 0.5 * det


def assemble(dom: GeneratorDomain, w: WeightSpec) -> AssembledForms:
    """P1 element matrices with 7-point (triangles) or 3-point Gauss
    (segments) quadrature of the weights; Dirichlet rows and columns are
    eliminated."""
    mesh = dom.mesh
    nodes, E = mesh.nodes, mesh.elements
    if dom.dim == 1:
        bary, qw, rule = SEG_BARY, SEG_W, "gauss-3"
        if w.orbit_exponent != 0 or w.a_exponents[0] != 0 or w.c_exponents[0] != 0:
            raise AssemblyError("1D domains support t-weights only")
    else:
        bary, qw, rule = TRI_BARY, TRI_W, "dunavant-7"
    grads, meas = _element_gradients(nodes, E)
    if np.any(meas <= 0):
        raise AssemblyError("non-positive element measure")
    xq = np.einsum("qk,ekd->eqd", bary, nodes[E])
    wq = meas[:, None] * qw[None, :]
    qa = wq * w.a(xq)
    qc = wq * w.c(xq)
    if np.any(~np.isfinite(qa)) or np.any(~np.isfinite(qc)) or np.any(qc < 0) or np.any(qa < 0):
        raise AssemblyError("weights are not finite and nonnegative on the mesh")
    a_int = qa.sum(axis=1)
    k = E.shape[1]
    Ke = a_int[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    Me = np.einsum("eq,qi,qj->eij", qa, bary, bary)
    rows = np.repeat(E, k, axis=1).ravel()
    cols = np.tile(E, (1, k)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    free = np.flatnonzero(~mesh.dirichlet)
    _check_constrained(K, mesh, free)
    Kf = K[free][:, free].tocsr()
    Mf = M[free][:, free].tocsr()
    return AssembledForms(dom, w, Kf, Mf, free, bary, qc, grads, a_int, meas, rule)


def _check_constrained(K, mesh, free):
    if len(free) == 0:
        raise AssemblyError("no free nodes")
    # each connected component of the weighted graph must touch the Dirichlet set
    G = (abs(K) > 0).astype(np.int8)
    ncomp, labels = connected_components(G, directed=False)
    touched = np.zeros(ncomp, bool)
    touched[labels[mesh.dirichlet]] = True
    if not touched.all():
        raise AssemblyError("constrained stiffness is singular: a component has no Dirichlet node")


def norm_ab_sq(u, forms: AssembledForms) -> float:
    """||u||_{a,b}^2 = u'K u + lam u'M u."""
    uf = forms.restrict(_values(u))
    val = uf @ (forms.K @ uf)
    if forms.lam != 0:
        val += forms.lam * (uf @ (forms.M @ uf))
    return float(val)


def lp_integral(u, forms: AssembledForms, p: float) -> float:
    """int c |u|^p with u interpolated at the quadrature points."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    uq = forms.quad_values(_values(u))
    return float(np.sum(forms.qc * np.abs(uq) ** p))


def energy_Jp(u, forms: AssembledForms, p: float) -> float:
    return 0.5 * norm_ab_sq(u, forms) - lp_integral(u, forms, p) / p


def nonlinear_load(u, forms: AssembledForms, p: float) -> np.ndarray:
    """Full nodal vector of int c |u|^{p-2} u psi_i."""
    uq = forms.quad_values(_values(u))
    au = np.maximum(np.abs(uq), _ABS_FLOOR)
    f = forms.qc * au ** (p - 2.0) * uq
    local = f @ forms.phi_q
    E = forms.dom.mesh.elements
    return np.bincount(E.ravel(), weights=local.ravel(), minlength=forms.n_nodes)


def residual(u, forms: AssembledForms, p: float) -> np.ndarray:
    """K u + lam M u - N_p(u) on free nodes, zero on Dirichlet nodes."""
    v = _values(u)
    uf = forms.restrict(v)
    r = forms.K @ uf
    if forms.lam != 0:
        r = r + forms.lam * (forms.M @ uf)
    r = r - nonlinear_load(v, forms, p)[forms.free]
    return forms.extend(r)


def element_energy(u, forms: AssembledForms) -> np.ndarray:
    """Per-element a-weighted Dirichlet energy int_T a |grad u|^2."""
    v = _values(u)
    g = np.einsum("ekd,ek->ed", forms.grads, v[forms.dom.mesh.elements])
    return forms.a_int * np.einsum("ed,ed->e", g, g)
