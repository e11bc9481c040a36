"""Command line entry point: ``run``, ``verify`` and ``dump-mesh``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from typing import Callable, List, Optional

import numpy as np

from . import __version__
from .bubble import (
    bubble_pde_residual,
    bubble_peak,
    critical_norm,
    dirichlet_energy,
    limit_energy,
)
from .config import ConfigError, ExperimentConfig, load_config, serialize
from .continuation import StageFailure, StageRecord, cutoff_chi, harmonic, run_schedule
from .geometry import GeometryError, dump_mesh

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SUMMARY_FIELDS = ["stage", "delta", "p", "level", "epsilon", "zeta_s", "zeta_t",
                  "profile_error", "interiority_ratio"]


def _num(x) -> str:
    return format(float(x), ".12g")


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def summary_row(rec: StageRecord) -> List[str]:
    d = rec.descriptor
    zs, zt = (0.0, d.zeta[0]) if len(d.zeta) == 1 else d.zeta
    return [str(rec.index), _num(rec.stage.delta), _num(rec.stage.p), _num(rec.result.level),
            _num(d.epsilon), _num(zs), _num(zt), _num(d.profile_error), _num(d.interiority_ratio)]


def summary_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for rec in records:
        w.writerow(summary_row(rec))
    return buf.getvalue()


DESCRIPTOR_FIELDS = ["stage", "mesh_h", "nodes", "level", "epsilon", "peak", "dist_to_plane",
                     "dist_boundary", "interiority_ratio", "profile_error", "iterations",
                     "residual_norm"]


def descriptors_csv(records) -> str:
    """Descriptor-versus-stage series for plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DESCRIPTOR_FIELDS)
    for rec in records:
        d, r = rec.descriptor, rec.result
        w.writerow([str(rec.index), _num(rec.stage.mesh_h), str(rec.domain.mesh.n_nodes),
                    _num(r.level), _num(d.epsilon), _num(d.peak), _num(d.dist_to_plane),
                    _num(d.dist_boundary), _num(d.interiority_ratio), _num(d.profile_error),
                    str(r.iterations), _num(r.residual_norm)])
    return buf.getvalue()


def stage_record_json(rec: StageRecord, cfg_hash: str) -> str:
    d, r = rec.descriptor, rec.result
    obj = {
        "stage": rec.index, "delta": rec.stage.delta, "p": rec.stage.p, "lam": rec.stage.lam,
        "mesh_h": rec.stage.mesh_h, "nodes": int(rec.domain.mesh.n_nodes),
        "level": r.level, "sobolev_quotient": r.sobolev_quotient, "iterations": r.iterations,
        "residual_norm": r.residual_norm, "converged": r.converged, "restart_index": r.restart_index,
        "zeta": list(d.zeta), "epsilon": d.epsilon, "peak": d.peak, "sign": d.sign,
        "profile_error": d.profile_error, "dist_to_plane": d.dist_to_plane,
        "dist_boundary": d.dist_boundary, "interiority_ratio": d.interiority_ratio,
        "window": d.window, "degenerate": d.degenerate, "config_hash": cfg_hash,
    }
    return json.dumps(obj, sort_keys=True)


def profile_csv(rec: StageRecord, samples: int) -> str:
    """|u| sampled on the line through zeta parallel to the t axis."""
    from scipy.interpolate import LinearNDInterpolator

    dom = rec.domain
    u = rec.result.u.values
    z = np.asarray(rec.descriptor.zeta, float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["offset", "u"])
    if dom.dim == 1:
        x = dom.nodes[:, 0]
        order = np.argsort(x)
        for xi, ui in zip(x[order], u[order]):
            w.writerow([_num(xi - z[0]), _num(ui)])
        return buf.getvalue()
    half = max(4.0 * rec.descriptor.window, 4.0 * rec.stage.mesh_h)
    t = np.linspace(z[1] - half, z[1] + half, samples)
    pts = np.column_stack([np.full_like(t, max(z[0], dom.s.min())), t])
    vals = LinearNDInterpolator(dom.nodes, u, fill_value=0.0)(pts)
    for ti, vi in zip(t, vals):
        w.writerow([_num(ti - z[1]), _num(vi)])
    return buf.getvalue()


def _out_dir_ok(path: str, force: bool) -> bool:
    return force or not os.path.isdir(path) or not os.listdir(path)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg["output.dir"]
    if not _out_dir_ok(out, args.force):
        print(f"refusing to write into nonempty directory {out!r} (use --force)", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(out, exist_ok=True)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s", stream=sys.stderr)
    h = cfg.hash()
    write_atomic(os.path.join(out, "config.resolved"), serialize(cfg))
    n = cfg.params.n
    constants = {}
    if n >= 3:
        L = limit_energy(n)
        constants[f"S_half_power_n{n}"] = {"value": L.S_half_power, "provenance": "derived by radial quadrature"}
        constants[f"ell_infinity_n{n}"] = {"value": L.ell_infinity, "provenance": "derived by radial quadrature"}
    for key in ("ambient.N", "ambient.m", "domain.center_height", "domain.radius"):
        if cfg[key] is not None:
            constants[key] = {"value": cfg[key], "provenance": "config"}
    manifest = {"config_hash": h, "code_version": __version__, "constants": constants,
                "stages": [], "status": "running"}
    write_atomic(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True))
    stages_path = os.path.join(out, "stages.jsonl")
    open(stages_path, "w").close()
    records: List[StageRecord] = []
    samples = cfg["output.profile_samples"]

    def persist(rec: StageRecord):
        records.append(rec)
        with open(stages_path, "a") as fh:
            fh.write(stage_record_json(rec, h) + "\n")
        write_atomic(os.path.join(out, f"profile_stage{rec.index}.csv"), profile_csv(rec, samples))
        write_atomic(os.path.join(out, "summary.csv"), summary_csv(records))
        manifest["stages"].append({"stage": rec.index, "wall_time_s": round(rec.wall_time, 3),
                                   "record_line": rec.index + 1})
        write_atomic(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True))
        print(",".join(summary_row(rec)), flush=True)

    status = EXIT_OK
    try:
        run_schedule(cfg.build_domain, cfg.weights(), cfg.schedule(), cfg.solve_options(args.verbose),
                     cfg.symmetry, cfg.character_values or None, on_stage=persist)
        manifest["status"] = "complete"
        if records and not all(r.result.converged for r in records):
            manifest["status"] = "complete (unconverged stages)"
            status = EXIT_FAIL
    except StageFailure as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        manifest["status"] = f"failed: {exc}"
        status = EXIT_FAIL
    write_atomic(os.path.join(out, "descriptors.csv"), descriptors_csv(records))
    write_atomic(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True))
    return status


# verify ------------------------------------------------------------------

class Check:
    def __init__(self, name: str, measured: float, tol: float, kind: str = "le"):
        self.name, self.measured, self.tol, self.kind = name, float(measured), float(tol), kind

    @property
    def ok(self) -> bool:
        return math.isfinite(self.measured) and self.measured <= self.tol

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: measured {self.measured:.3e} tol {self.tol:.1e}"


def suite_bubble(tol: Optional[float]) -> List[Check]:
    out = []
    radii = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0]
    for n in (3, 4, 5):
        out.append(Check(f"bubble pde residual n={n}", bubble_pde_residual(n, radii), tol or 1e-6))
    for n in (3, 4, 5):
        g, c = dirichlet_energy(n), critical_norm(n)
        out.append(Check(f"bubble nehari membership n={n}", abs(g - c) / g, tol or 1e-6))
        q = 2.0 * n / (n - 2.0)
        J = 0.5 * g - c / q
        out.append(Check(f"limit energy J(U)=||U||^2/n n={n}", abs(J - g / n) / (g / n), tol or 1e-6))
    off = bubble_pde_residual(3, radii, amplitude=1.01)
    out.append(Check("perturbed bubble detected", 1e-3 / max(off, 1e-300), tol or 1.0))
    out.append(Check("peak n=3 is 3^(1/4)", abs(bubble_peak(3) - 3 ** 0.25), tol or 1e-15))
    return out


def suite_identities(tol: Optional[float]) -> List[Check]:
    from .discretization import WeightSpec, assemble, energy_Jp, lp_integral, norm_ab_sq, residual
    from .geometry import SymmetrySpec, build_interval, build_rectangle
    from .solver import SolveOptions, reproject, solve_least_energy
    from .symmetry import equivariant_project, group_from_preset, make_character

    out = []
    dom = build_interval(0.0, math.pi, 0.01)
    f = assemble(dom, WeightSpec())
    p = 4.0
    res = solve_least_energy(f, p, opts=SolveOptions(restarts=2))
    u = res.u.values
    nrm, lp = norm_ab_sq(u, f), lp_integral(u, f, p)
    out.append(Check("nehari identity", abs(nrm - lp) / nrm, tol or 1e-10))
    S = nrm / lp ** (2 / p)
    lvl = (p - 2) / (2 * p) * S ** (p / (p - 2))
    out.append(Check("level identity", abs(lvl - res.level) / res.level, tol or 1e-8))
    q = 4.1
    t1 = (nrm / lp_integral(u, f, q)) ** (1 / (q - 2))
    t2 = (lp / lp_integral(u, f, q)) ** (1 / (q - 2))
    out.append(Check("t_qp closed forms", abs(t1 - t2) / t1, tol or 1e-9))
    out.append(Check("solver residual", res.residual_norm, tol or 1e-6))
    # gradient consistency
    rng = np.random.default_rng(3)
    v = rng.standard_normal(len(u))
    v[dom.mesh.dirichlet] = 0
    hstep = 1e-5 * np.linalg.norm(u) / np.linalg.norm(v)
    # off the critical point, so the directional derivative is not ~0
    w0 = u + 0.1 * np.sin(np.arange(len(u)))
    w0[dom.mesh.dirichlet] = 0
    fd = (energy_Jp(w0 + hstep * v, f, p) - energy_Jp(w0 - hstep * v, f, p)) / (2 * hstep)
    an = v @ residual(w0, f, p)
    out.append(Check("gradient consistency", abs(fd - an) / abs(an), tol or 1e-5))
    # projector algebra on a mirror-symmetric rectangle
    rdom = build_rectangle((0.0, 2.0), (1.0, 2.0), 0.1, None, SymmetrySpec("mirror", (1.0, 0.0)))
    G = group_from_preset(rdom.symmetry, rdom)
    phi = make_character(G, [-1])
    x = rng.standard_normal(rdom.mesh.n_nodes)
    y = rng.standard_normal(rdom.mesh.n_nodes)
    Px = equivariant_project(x, G, phi)
    out.append(Check("projector idempotent", np.linalg.norm(equivariant_project(Px, G, phi) - Px) / np.linalg.norm(Px), tol or 1e-12))
    Py = equivariant_project(y, G, phi)
    out.append(Check("projector self-adjoint", abs(Px @ y - x @ Py) / (np.linalg.norm(x) * np.linalg.norm(y)), tol or 1e-12))
    return out


def suite_cutoff(tol: Optional[float]) -> List[Check]:
    ks = [2 ** i for i in range(9)]
    res = [cutoff_chi(k) for k in ks]
    sq = np.array([r.sq_integral for r in res])
    gr = np.array([r.grad_sq_integral for r in res])
    out = [
        Check("sigma_4 = 25/12", abs(harmonic(4) - 25 / 12), tol or 1e-14),
        # largest step ratio x_{k+1}/x_k must stay below 1
        Check("int chi_k^2 decreasing", max(0.0, float(np.max(sq[1:] / sq[:-1]) - 1 + 1e-15)), tol or 1e-15),
        Check("int |grad chi_k|^2 decreasing", max(0.0, float(np.max(gr[1:] / gr[:-1]) - 1 + 1e-15)), tol or 1e-15),
        Check("chi_k = 1 inside 1/k", max(abs(cutoff_chi(k).profile[0] - 1) for k in (1, 7, 64)), tol or 1e-14),
    ]
    return out


SUITES = {"bubble": suite_bubble, "identities": suite_identities, "cutoff": suite_cutoff}


def cmd_verify(args) -> int:
    names = args.suite or list(SUITES)
    failed = 0
    for name in names:
        if name not in SUITES:
            print(f"unknown suite {name!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
            return EXIT_CONFIG
        t0 = time.perf_counter()
        for chk in SUITES[name](args.tol):
            print(f"[{name}] {chk.line()}")
            failed += not chk.ok
        print(f"[{name}] finished in {time.perf_counter() - t0:.2f}s")
    if failed:
        print(f"{failed} check(s) failed")
        return EXIT_FAIL
    print("all checks passed")
    return EXIT_OK


def cmd_dump_mesh(args) -> int:
    try:
        cfg = load_config(args.config)
        st = cfg.schedule().stages[args.stage]
        dom = cfg.build_domain(st.delta, st.mesh_h)
    except (ConfigError, OSError, IndexError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        dump_mesh(dom, args.out)
    else:
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "mesh.txt")
            dump_mesh(dom, path)
            with open(path) as fh:
                sys.stdout.write(fh.read())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="supercrit-lab", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a continuation experiment")
    r.add_argument("config")
    r.add_argument("--force", action="store_true", help="write into a nonempty output directory")
    r.add_argument("--verbose", action="store_true", help="stream solver diagnostics")
    r.add_argument("--out", help="override output.dir")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify", help="run analytic identity suites")
    v.add_argument("suite", nargs="*", help=f"any of {', '.join(SUITES)} (default all)")
    v.add_argument("--tol", type=float, default=None, help="override every tolerance")
    v.set_defaults(func=cmd_verify)
    d = sub.add_parser("dump-mesh", help="write the mesh of one stage")
    d.add_argument("config")
    d.add_argument("--stage", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump_mesh)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
