"""Least-energy equivariant solutions by Nehari-constrained descent.

The Nehari set is a radial graph over the unit sphere, so every iterate is
simply rescaled back onto it.  Search directions are Riesz (Sobolev)
gradients: the residual preconditioned by the constrained stiffness matrix,
which keeps the iteration count roughly mesh independent.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import (
    AssembledForms,
    Field,
    _values,
    lp_integral,
    nonlinear_load,
    norm_ab_sq,
)
from .symmetry import (
    Character,
    SymmetryAction,
    check_assumption_A,
    equivariant_project,
)

log = logging.getLogger(__name__)

THREADS_ENV = "SUPERCRIT_LAB_THREADS"


class SolverError(RuntimeError):
    pass


class DegenerateInputError(SolverError, ValueError):
    pass


class CoercivityError(SolverError, ValueError):
    pass


class NotConvergedError(SolverError):
    pass


class AssumptionAError(SolverError, ValueError):
    pass


class NotOnNehariError(SolverError, ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    max_iterations: int = 20000
    energy_tol: float = 1e-8
    residual_tol: float = 1e-6
    restarts: int = 8
    rng_seed: int = 0
    # step rule
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    nonmonotone_window: int = 10
    step_min: float = 1e-12
    step_max: float = 1e6
    threads: Optional[int] = None
    verbose: bool = False

    def __post_init__(self):
        if not (self.energy_tol > 0 and self.residual_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class NehariSolveResult:
    u: Field
    level: float
    sobolev_quotient: float
    iterations: int
    residual_norm: float
    restart_index: int
    converged: bool
    p: float = float("nan")
    forms: Optional[AssembledForms] = field(default=None, repr=False)
    restart_levels: tuple = ()


def _thread_count(opts: SolveOptions) -> int:
    if opts.threads is not None:
        return max(1, int(opts.threads))
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# Nehari scaling ---------------------------------------------------------

def nehari_scale(u, forms: AssembledForms, p: float) -> float:
    """t with t*u on the Nehari set: (||u||^2 / |u|_p^p)^{1/(p-2)}."""
    if p <= 2:
        raise ValueError("p must exceed 2")
    v = _values(u)
    if not np.any(v[forms.free]):
        raise DegenerateInputError("u vanishes")
    lp = lp_integral(v, forms, p)
    if not lp > 0:
        raise DegenerateInputError("|u|_{c;p} vanishes")
    nrm = norm_ab_sq(v, forms)
    if not nrm > 0:
        raise CoercivityError(f"||u||^2 = {nrm} <= 0: quadratic form is not coercive")
    return float((nrm / lp) ** (1.0 / (p - 2.0)))


def reproject(u_p, forms: AssembledForms, p: float, q: float, rtol: float = 1e-9):
    """Move a p-Nehari field onto the q-Nehari set.

    Returns (t_qp, u_tilde, J_q(u_tilde)).  Both closed forms of t_qp are
    evaluated and must agree, which also certifies that u_p was on the
    p-Nehari set.
    """
    v = _values(u_p)
    if q == p:
        from .discretization import energy_Jp

        return 1.0, v.copy(), energy_Jp(v, forms, q)
    if q <= 2:
        raise ValueError("q must exceed 2")
    nrm = norm_ab_sq(v, forms)
    lq = lp_integral(v, forms, q)
    lp = lp_integral(v, forms, p)
    if not (lq > 0 and lp > 0):
        raise DegenerateInputError("u vanishes")
    if not nrm > 0:
        raise CoercivityError("||u||^2 <= 0")
    t1 = (nrm / lq) ** (1.0 / (q - 2.0))
    t2 = (lp / lq) ** (1.0 / (q - 2.0))
    if abs(t1 - t2) > rtol * abs(t1):
        raise NotOnNehariError(f"t_qp closed forms disagree: {t1!r} vs {t2!r}")
    ut = t1 * v
    Jq = 0.5 * t1 ** 2 * nrm - t1 ** q * lq / q
    return float(t1), ut, float(Jq)


# linear algebra helpers -------------------------------------------------

def _projector(forms, group, character):
    """Equivariant projection acting on free-node vectors."""
    if group is None or group.order == 1:
        return lambda x: x
    free = forms.free

    def proj(x):
        return equivariant_project(forms.extend(x), group, character)[free]

    return proj


def _factor(Amat):
    return splu(sp.csc_matrix(Amat))


def lambda1(forms: AssembledForms, group: Optional[SymmetryAction] = None,
            character: Optional[Character] = None, tol: float = 1e-12,
            max_iterations: int = 20000, seed: int = 0) -> float:
    """Smallest generalized eigenvalue of K v = mu M v on the equivariant
    constrained subspace, by projected inverse iteration.

    The lambda term of ``forms`` is ignored.
    """
    proj = _projector(forms, group, character)
    K, M = forms.K, forms.M
    lu = _factor(K)
    rng = np.random.default_rng(seed)
    x = proj(rng.standard_normal(K.shape[0]))
    nx = np.sqrt(x @ (M @ x))
    if not nx > 1e-300:
        raise DegenerateInputError("equivariant subspace is empty")
    x /= nx
    mu = float(x @ (K @ x))
    for it in range(max_iterations):
        y = proj(lu.solve(M @ x))
        y /= np.sqrt(y @ (M @ y))
        mu_new = float(y @ (K @ y))
        x = y
        if abs(mu_new - mu) <= tol * abs(mu_new):
            # residual check guards against stalling on a plateau
            r = K @ x - mu_new * (M @ x)
            if np.sqrt(r @ lu.solve(r)) <= 1e-5 * np.sqrt(mu_new):
                return mu_new
        mu = mu_new
    raise NotConvergedError(f"inverse iteration did not converge in {max_iterations} steps")


# descent ------------------------------------------------------------------

class _Problem:
    """Cached pieces shared by all restarts of one solve."""

    def __init__(self, forms, group, character, p):
        self.forms = forms
        self.p = p
        self.A = forms.operator()
        lam = forms.lam
        P = forms.K + max(lam, 0.0) * forms.M if lam != 0 else forms.K
        self.lu = _factor(P)
        self.proj = _projector(forms, group, character)

    def energy_parts(self, x):
        full = self.forms.extend(x)
        nrm = float(x @ (self.A @ x))
        lp = lp_integral(full, self.forms, self.p)
        return nrm, lp

    def scale(self, x):
        nrm, lp = self.energy_parts(x)
        if not (nrm > 0 and lp > 0):
            raise DegenerateInputError("iterate left the admissible cone")
        t = (nrm / lp) ** (1.0 / (self.p - 2.0))
        return t * x, t * t * nrm

    def level_of(self, nrm_on_nehari):
        p = self.p
        return (p - 2.0) / (2.0 * p) * nrm_on_nehari

    def gradient(self, x):
        full = self.forms.extend(x)
        r = self.A @ x - nonlinear_load(full, self.forms, self.p)[self.forms.free]
        g = self.proj(self.lu.solve(r))
        return r, g


def _descend(prob: _Problem, x0: np.ndarray, opts: SolveOptions, tag: int):
    x, nrm = prob.scale(prob.proj(x0))
    E = prob.level_of(nrm)
    r, g = prob.gradient(x)
    rg = float(r @ g)
    res = np.sqrt(max(rg, 0.0) / nrm)
    history = [E]
    alpha = 1.0
    it = 0
    small_steps = 0
    converged = res <= opts.residual_tol
    while not converged and it < opts.max_iterations:
        it += 1
        Eref = max(history[-opts.nonmonotone_window:])
        a = alpha
        while True:
            xt, nrm_t = prob.scale(x - a * g)
            Et = prob.level_of(nrm_t)
            if Et <= Eref - opts.armijo_c * a * rg or a <= opts.step_min:
                break
            a *= opts.backtrack
        s = xt - x
        rt, gt = prob.gradient(xt)
        # BB1 step in the preconditioner metric
        sy = float(s @ (rt - r))
        sPs = float(s @ (prob.A @ s)) if prob.forms.lam >= 0 else float(s @ (prob.forms.K @ s))
        alpha = sPs / sy if sy > 0 else min(2.0 * a, opts.step_max)
        alpha = float(np.clip(alpha, opts.step_min, opts.step_max))
        dE = abs(E - Et) / max(abs(Et), 1e-300)
        x, nrm, E, r, g = xt, nrm_t, Et, rt, gt
        rg = float(r @ g)
        res = np.sqrt(max(rg, 0.0) / nrm)
        history.append(E)
        if opts.verbose:
            log.info("restart=%d iter=%d energy=%.15e residual=%.3e step=%.3e", tag, it, E, res, a)
        if res <= opts.residual_tol:
            converged = True
        elif dE <= opts.energy_tol * 1e-6 and a <= opts.step_min:
            small_steps += 1
            if small_steps > 20:
                break
    return x, nrm, it, res, converged


def _random_start(rng, prob: _Problem, n):
    for _ in range(100):
        z = prob.proj(rng.standard_normal(n))
        if np.linalg.norm(z) >= 1e-12:
            return z
    raise DegenerateInputError("random equivariant starts keep vanishing")


def solve_least_energy(forms: AssembledForms, p: float,
                       group: Optional[SymmetryAction] = None,
                       character: Optional[Character] = None,
                       opts: SolveOptions = SolveOptions(),
                       initial=None) -> NehariSolveResult:
    """Minimize J_p over the equivariant Nehari set.

    With ``initial`` the first restart starts from that field; remaining
    restarts (if any) are random.
    """
    if not p > 2:
        raise ValueError("p must exceed 2")
    if character is not None and group is not None and not character.is_trivial:
        if not check_assumption_A(group, character, forms.dom):
            raise AssumptionAError("no node has its stabilizer inside ker(phi)")
    if forms.lam < 0:
        mu = lambda1(forms, group, character)
        if not forms.lam > -mu:
            raise CoercivityError(f"lambda={forms.lam} <= -lambda1={-mu}")
    prob = _Problem(forms, group, character, p)
    nfree = len(forms.free)
    children = np.random.SeedSequence(opts.rng_seed).spawn(opts.restarts)

    def run(k):
        if k == 0 and initial is not None:
            x0 = forms.restrict(_values(initial))
            if not np.linalg.norm(prob.proj(x0)) > 1e-12 * np.linalg.norm(x0):
                raise DegenerateInputError("initial field projects to zero")
        else:
            x0 = _random_start(np.random.default_rng(children[k]), prob, nfree)
        return _descend(prob, x0, opts, k)

    nthreads = _thread_count(opts)
    if nthreads > 1 and opts.restarts > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            outs = list(ex.map(run, range(opts.restarts)))
    else:
        outs = [run(k) for k in range(opts.restarts)]

    levels = [prob.level_of(o[1]) for o in outs]
    order = sorted(range(len(outs)), key=lambda k: (not outs[k][4], levels[k], k))
    best = order[0]
    x, nrm, its, res, conv = outs[best]
    if not any(o[4] for o in outs):
        log.warning("no restart reached residual_tol=%g (best residual %.3e)", opts.residual_tol, res)
    u = forms.extend(x)
    if group is not None and character is not None:
        u = equivariant_project(u, group, character)
    lp = lp_integral(u, forms, p)
    level = 0.5 * nrm - lp / p
    S = nrm / lp ** (2.0 / p)
    return NehariSolveResult(Field(forms.dom, u), float(level), float(S), its, float(res),
                             best, bool(conv), p, forms, tuple(levels))


def require_converged(res: NehariSolveResult) -> NehariSolveResult:
    if not res.converged:
        raise NotConvergedError(f"solver stopped with residual {res.residual_norm:.3e}")
    return res


# p-continuity ------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityRow:
    p: float
    level: float
    t_qp: float
    Jq_tilde: float
    lp_gap: float
    level_gap: float
    converged: bool


def p_continuity_experiment(forms: AssembledForms, q: float, p_list: Sequence[float],
                            group=None, character=None,
                            opts: SolveOptions = SolveOptions()) -> list:
    """Solve at q, then at each p warm-started from the q minimizer, and
    record the three limits: level gap, t_qp - 1 and J_q(t_qp u_p) - l_q."""
    base = solve_least_energy(forms, q, group, character, opts)
    lq = base.level
    rows = []
    warm = replace(opts, restarts=1)
    for p in p_list:
        if p == q:
            res = base
        else:
            t0 = nehari_scale(base.u, forms, p)
            res = solve_least_energy(forms, p, group, character, warm, initial=t0 * base.u.values)
        t, ut, Jq = reproject(res.u, forms, p, q)
        v = res.u.values
        gap = abs(lp_integral(v, forms, p) - lp_integral(v, forms, q)) if p != q else 0.0
        rows.append(ContinuityRow(float(p), res.level, t, Jq, gap, abs(res.level - lq), res.converged))
    return rows
