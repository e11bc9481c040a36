"""Continuation in (delta, p), blow-up descriptors, weight steering and the
harmonic cutoff diagnostics."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.interpolate import LinearNDInterpolator

from .bubble import bubble_peak, rescaled_bubble
from .discretization import AssembledForms, WeightSpec, assemble
from .geometry import (
    GeneratorDomain,
    SymmetrySpec,
    build_ball_generator,
    distance_to_outer_boundary,
    distance_to_plane,
    fixed_set_samples,
    punch_hole,
)
from .solver import (
    NehariSolveResult,
    SolveOptions,
    SolverError,
    solve_least_energy,
)
from .symmetry import group_from_preset, make_character, trivial_character

log = logging.getLogger(__name__)


class DegenerateDescriptorWarning(UserWarning):
    pass


class ScheduleError(ValueError):
    pass


class StageFailure(RuntimeError):
    def __init__(self, msg, records):
        super().__init__(msg)
        self.records = records


@dataclass(frozen=True)
class Stage:
    delta: float
    p: float
    lam: float
    mesh_h: float


@dataclass(frozen=True)
class ContinuationSchedule:
    stages: tuple
    warm_start: bool = True

    def __post_init__(self):
        st = tuple(s if isinstance(s, Stage) else Stage(*s) for s in self.stages)
        object.__setattr__(self, "stages", st)
        if not st:
            raise ScheduleError("schedule is empty")
        for a, b in zip(st[:-1], st[1:]):
            if b.delta > a.delta:
                raise ScheduleError("delta must be nonincreasing")
            if b.p > a.p:
                raise ScheduleError("p must be nonincreasing")
            if b.mesh_h > a.mesh_h:
                raise ScheduleError("mesh_h must be nonincreasing")
        for s in st:
            if s.delta < 0 or s.mesh_h <= 0 or s.p <= 2:
                raise ScheduleError(f"invalid stage {s}")

    def __len__(self):
        return len(self.stages)


@dataclass(frozen=True)
class BlowUpDescriptor:
    zeta: tuple
    epsilon: float
    peak: float
    sign: int
    profile_error: float
    level: float
    dist_to_plane: float
    dist_boundary: float
    interiority_ratio: float
    window: float
    degenerate: bool = False


# descriptor extraction ----------------------------------------------------

def _patch(dom: GeneratorDomain, i: int, rings: int = 2) -> np.ndarray:
    E = dom.mesh.elements
    nodes = {i}
    for _ in range(rings):
        mask = np.isin(E, list(nodes)).any(axis=1)
        nodes = set(np.unique(E[mask]).tolist())
    return np.array(sorted(nodes))


def _locate_peak(u: np.ndarray, dom: GeneratorDomain, i: int):
    """Sub-mesh location of the extremum of |u| from a local quadratic fit."""
    x = dom.nodes
    idx = _patch(dom, i)
    v = np.abs(u[idx])
    if dom.dim == 1:
        t = x[idx, 0]
        c = np.polyfit(t - x[i, 0], v, 2)
        if c[0] < 0:
            ts = x[i, 0] - c[1] / (2 * c[0])
            if t.min() <= ts <= t.max():
                return (float(ts),)
        return (float(x[i, 0]),)
    s, t = x[idx, 0], x[idx, 1]
    if dom.params.mode == "axial":
        # even in s about the axis: v ~ c0 + c1 dt + c2 dt^2 + c3 s^2
        dt = t - x[i, 1]
        A = np.stack([np.ones_like(dt), dt, dt * dt, s * s], axis=1)
        c, *_ = np.linalg.lstsq(A, v, rcond=None)
        ts = x[i, 1]
        if c[2] < 0:
            cand = x[i, 1] - c[1] / (2 * c[2])
            if t.min() <= cand <= t.max():
                ts = cand
        return (0.0, float(ts))
    ds, dt = s - x[i, 0], t - x[i, 1]
    A = np.stack([np.ones_like(ds), ds, dt, ds * ds, ds * dt, dt * dt], axis=1)
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    try:
        if np.all(np.linalg.eigvalsh(H) < 0):
            d = np.linalg.solve(H, -c[1:3])
            z = x[i] + d
            if np.linalg.norm(d) <= np.max(np.hypot(ds, dt)):
                return (float(z[0]), float(z[1]))
    except np.linalg.LinAlgError:
        pass
    return (float(x[i, 0]), float(x[i, 1]))


def _windowed_seminorm_sq(v: np.ndarray, forms: AssembledForms, mask: np.ndarray) -> float:
    E = forms.dom.mesh.elements
    g = np.einsum("ekd,ek->ed", forms.grads, v[E])
    return float(np.sum(forms.a_int[mask] * np.einsum("ed,ed->e", g[mask], g[mask])))


def profile_error(u: np.ndarray, forms: AssembledForms, epsilon: float, zeta, n: int,
                  sign: int, window: float) -> float:
    """Relative K_a seminorm distance between u and sign*U_{eps,zeta}
    over elements whose centroid lies within ``window`` of zeta."""
    dom = forms.dom
    cent = dom.nodes[dom.mesh.elements].mean(axis=1)
    z = np.asarray(zeta, float)[: dom.dim]
    mask = np.linalg.norm(cent - z[None, :], axis=1) <= window
    if not mask.any():
        return float("nan")
    ref = sign * rescaled_bubble(dom, epsilon, zeta, n)
    num = _windowed_seminorm_sq(u - ref, forms, mask)
    den = _windowed_seminorm_sq(u, forms, mask)
    return float(math.sqrt(num / den)) if den > 0 else float("nan")


def extract_blowup(result: NehariSolveResult, n: int, w: Optional[WeightSpec] = None,
                   forms: Optional[AssembledForms] = None) -> BlowUpDescriptor:
    """Concentration point, scale and bubble-fit quality of a minimizer."""
    forms = forms if forms is not None else result.forms
    if forms is None:
        raise ValueError("assembled forms are required")
    w = w if w is not None else forms.weights
    dom = forms.dom
    u = np.asarray(result.u.values if hasattr(result, "u") else result, float)
    i = int(np.argmax(np.abs(u)))
    peak = float(abs(u[i]))
    if peak == 0:
        raise ValueError("field vanishes")
    sign = 1 if u[i] > 0 else -1
    degenerate = bool(dom.mesh.dirichlet[i])
    if degenerate:
        warnings.warn("peak of |u| sits on the Dirichlet boundary", DegenerateDescriptorWarning)
    zeta = _locate_peak(u, dom, i)
    ratio = float(np.asarray(w.a_over_c(np.asarray(zeta)[None, :]))[0])
    eps = (ratio ** ((n - 2) / 4.0) * bubble_peak(n) / peak) ** (2.0 / (n - 2))
    dist = distance_to_outer_boundary(dom, zeta)
    window = min(10.0 * eps, dist / 2.0)
    perr = profile_error(u, forms, eps, zeta, n, sign, window) if window > 0 else float("nan")
    level = float(getattr(result, "level", float("nan")))
    return BlowUpDescriptor(tuple(float(z) for z in zeta), float(eps), peak, sign, perr, level,
                            float(zeta[-1]), float(dist), float(dist / eps), float(window),
                            degenerate)


# schedules ----------------------------------------------------------------

DomainFamily = Callable[[float, float], GeneratorDomain]


def ball_family(center_height: float, radius: float, params=None,
                hole_mode: str = "cylindrical") -> DomainFamily:
    """(delta, h) -> punched ball generator."""

    def make(delta, h):
        dom = build_ball_generator(center_height, radius, h, params)
        return punch_hole(dom, delta, hole_mode) if delta > 0 else dom

    return make


def transfer(u_old: np.ndarray, old: GeneratorDomain, new: GeneratorDomain) -> np.ndarray:
    """Piecewise-linear interpolation onto a new mesh, zero outside the old one."""
    if old.dim == 1:
        x = old.nodes[:, 0]
        order = np.argsort(x)
        return np.interp(new.nodes[:, 0], x[order], u_old[order], left=0.0, right=0.0)
    f = LinearNDInterpolator(old.nodes, u_old, fill_value=0.0)
    v = f(new.nodes)
    v[new.mesh.dirichlet] = 0.0
    return np.nan_to_num(v)


@dataclass
class StageRecord:
    index: int
    stage: Stage
    result: NehariSolveResult
    descriptor: BlowUpDescriptor
    domain: GeneratorDomain = field(repr=False)
    forms: AssembledForms = field(repr=False)
    wall_time: float = 0.0


def _group_for(dom, symmetry, character_values):
    if symmetry is None or symmetry.preset == "trivial":
        return None, None
    G = group_from_preset(symmetry, dom)
    phi = make_character(G, character_values) if character_values else trivial_character(G)
    return G, phi


def run_schedule(dom_family: DomainFamily, w: WeightSpec, schedule: ContinuationSchedule,
                 opts: SolveOptions = SolveOptions(), symmetry: Optional[SymmetrySpec] = None,
                 character_values: Optional[Sequence[int]] = None, n: Optional[int] = None,
                 on_stage: Optional[Callable[[StageRecord], None]] = None) -> List[StageRecord]:
    """Solve each stage in order, warm-starting from the previous minimizer.

    ``on_stage`` is called after every finished stage so callers can persist
    partial results.
    """
    records: List[StageRecord] = []
    prev = None
    for k, st in enumerate(schedule.stages):
        t0 = time.perf_counter()
        try:
            dom = dom_family(st.delta, st.mesh_h)
            wk = replace(w, lam=st.lam)
            forms = assemble(dom, wk)
            G, phi = _group_for(dom, symmetry, character_values)
            nn = n if n is not None else dom.params.n
            initial = None
            stage_opts = opts
            if schedule.warm_start and prev is not None:
                initial = transfer(prev.result.u.values, prev.domain, dom)
                if np.any(initial[forms.free]):
                    stage_opts = replace(opts, restarts=1)
                else:
                    initial = None
            res = solve_least_energy(forms, st.p, G, phi, stage_opts, initial=initial)
            desc = extract_blowup(res, nn, wk, forms)
        except (SolverError, ValueError, ArithmeticError) as exc:
            raise StageFailure(f"stage {k} failed: {exc}", records) from exc
        rec = StageRecord(k, st, res, desc, dom, forms, time.perf_counter() - t0)
        log.info("stage=%d delta=%g p=%g h=%g level=%.10g eps=%.5g zeta=%s perr=%.4g",
                 k, st.delta, st.p, st.mesh_h, res.level, desc.epsilon, desc.zeta,
                 desc.profile_error)
        records.append(rec)
        if on_stage is not None:
            on_stage(rec)
        prev = rec
    return records


# weight steering ----------------------------------------------------------

@dataclass(frozen=True)
class SteeringRow:
    label: str
    zeta: tuple
    predicted: tuple
    distance: float
    mesh_h: float
    level: float


def ratio_minimizer(dom: GeneratorDomain, w: WeightSpec, n: int, count: int = 4001):
    """Minimizer of a^{n/2}/c^{(n-2)/2} over the closure of the fixed-point set."""
    pts = fixed_set_samples(dom, count)
    vals = w.concentration_ratio(pts, n)
    return tuple(float(c) for c in pts[int(np.argmin(vals))])


def weight_location_experiment(dom_family: DomainFamily, configs: Sequence, schedule,
                               opts: SolveOptions = SolveOptions(), symmetry=None,
                               character_values=None) -> List[SteeringRow]:
    """Run the same schedule under several weights and compare the final
    concentration point with the predicted ratio minimizer.

    ``configs`` is a sequence of (label, WeightSpec).
    """
    rows = []
    for label, w in configs:
        recs = run_schedule(dom_family, w, schedule, opts, symmetry, character_values)
        last = recs[-1]
        n = last.domain.params.n
        pred = ratio_minimizer(last.domain, w, n)
        d = float(np.linalg.norm(np.subtract(last.descriptor.zeta, pred)))
        rows.append(SteeringRow(label, last.descriptor.zeta, pred, d, last.stage.mesh_h,
                                last.result.level))
    return rows


# cutoff functions ---------------------------------------------------------

def blend(x):
    """Quintic blend: 1 on [0,1], 0 on [2,inf), C^2 in between."""
    x = np.asarray(x, float)
    tau = np.clip(x - 1.0, 0.0, 1.0)
    return 1.0 - tau ** 3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)


def blend_derivative(x):
    x = np.asarray(x, float)
    tau = np.clip(x - 1.0, 0.0, 1.0)
    inside = (x > 1.0) & (x < 2.0)
    return np.where(inside, -30.0 * tau ** 2 * (1.0 - tau) ** 2, 0.0)


def harmonic(k: int) -> float:
    return float(sum(1.0 / j for j in range(1, k + 1)))


@dataclass(frozen=True)
class CutoffResult:
    k: int
    sigma: float
    radii: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)
    grad_sq_integral: float = 0.0
    sq_integral: float = 0.0


def cutoff_chi(k: int, radius_scale: float = 1.0, samples: int = 513) -> CutoffResult:
    """chi_k(r) = sigma_k^{-1} sum_j g(j r / R)/j on R^2 and its two integrals.

    chi_k is piecewise polynomial of degree 5 between the breakpoints
    {R/j, 2R/j}, so Gauss-Legendre with 8 nodes per piece is exact up to
    round-off for both integrands (degree <= 11 with the r Jacobian).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    R = float(radius_scale)
    sigma = harmonic(k)
    j = np.arange(1, k + 1, dtype=float)

    # chunk over j so memory stays O(len(r) * 256)
    chunks = [j[i:i + 256] for i in range(0, k, 256)]

    def chi(r):
        r = np.atleast_1d(r) / R
        return sum(blend(np.outer(r, jj)) @ (1.0 / jj) for jj in chunks) / sigma

    def dchi(r):
        r = np.atleast_1d(r) / R
        return sum(blend_derivative(np.outer(r, jj)).sum(axis=1) for jj in chunks) / (sigma * R)

    br = np.unique(np.concatenate([[0.0, 2.0 * R], R / j, 2.0 * R / j]))
    xg, wg = np.polynomial.legendre.leggauss(8)
    a, b = br[:-1], br[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    r = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wr = (half[:, None] * wg[None, :]).ravel() * 2.0 * math.pi * r
    grad = float(np.sum(wr * dchi(r) ** 2))
    sq = float(np.sum(wr * chi(r) ** 2))
    radii = np.linspace(0.0, 2.0 * R, samples)
    return CutoffResult(k, sigma, radii, chi(radii), grad, sq)
