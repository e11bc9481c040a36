"""Flat ``dotted.key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  Lists are comma separated;
polygon vertices are ``s t`` pairs separated by ``;``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Dict, Optional

from .continuation import ContinuationSchedule, ScheduleError, Stage
from .discretization import WeightSpec, reduction_weights
from .geometry import (
    AmbientParams,
    GeometryError,
    SymmetrySpec,
    build_annulus,
    build_ball_generator,
    build_interval,
    build_polygon,
    build_rectangle,
    punch_hole,
)
from .solver import SolveOptions
from .symmetry import SymmetryError, group_from_preset, make_character


class ConfigError(ValueError):
    def __init__(self, msg, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)
        self.line = line
        self.key = key


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_floats(text):
    return None if text.strip().lower() in ("", "none") else _floats(text)


def _vertices(text):
    out = []
    for pair in text.split(";"):
        if pair.strip():
            s, t = pair.split()
            out.append((float(s), float(t)))
    return tuple(out)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(f"{_fmt(a)} {_fmt(b)}" for a, b in v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# key -> (parser, default); a default of ... means required
SCHEMA: Dict[str, tuple] = {
    "rng_seed": (int, 0),
    "output.dir": (str, "runs/out"),
    "ambient.N": (int, ...),
    "ambient.m": (int, ...),
    "ambient.mode": (str, "axial"),
    "ambient.alpha": (_opt_float, None),
    "domain.shape": (str, ...),
    "domain.center_height": (_opt_float, None),
    "domain.radius": (_opt_float, None),
    "domain.s_range": (_opt_floats, None),
    "domain.t_range": (_opt_floats, None),
    "domain.center": (_opt_floats, None),
    "domain.r_inner": (_opt_float, None),
    "domain.r_outer": (_opt_float, None),
    "domain.vertices": (_vertices, ()),
    "domain.a": (_opt_float, None),
    "domain.b": (_opt_float, None),
    "domain.hole_mode": (str, "cylindrical"),
    "symmetry.preset": (str, "trivial"),
    "symmetry.center": (_floats, (0.0, 0.0)),
    "symmetry.character": (_ints, ()),
    "weights.reduction": (_bool, True),
    "weights.a_exponents": (_opt_floats, None),
    "weights.c_exponents": (_opt_floats, None),
    "weights.a_scale": (float, 1.0),
    "weights.c_scale": (float, 1.0),
    "weights.c_bump": (_opt_floats, None),
    "schedule.delta": (_floats, ...),
    "schedule.p": (_floats, ...),
    "schedule.lam": (_floats, (0.0,)),
    "schedule.mesh_h": (_floats, ...),
    "schedule.warm_start": (_bool, True),
    "solver.max_iterations": (int, 20000),
    "solver.energy_tol": (float, 1e-8),
    "solver.residual_tol": (float, 1e-6),
    "solver.restarts": (int, 8),
    "output.profile_samples": (int, 201),
}

SHAPE_KEYS = {
    "ball": ("domain.center_height", "domain.radius"),
    "rectangle": ("domain.s_range", "domain.t_range"),
    "annulus": ("domain.center", "domain.r_inner", "domain.r_outer"),
    "polygon": ("domain.vertices",),
    "interval": ("domain.a", "domain.b"),
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    values: tuple  # sorted (key, value) pairs, every schema key present

    def __getitem__(self, key):
        return dict(self.values)[key]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.values)

    # derived objects --------------------------------------------------
    @property
    def params(self) -> AmbientParams:
        d = self.as_dict()
        return AmbientParams(d["ambient.N"], d["ambient.m"], d["ambient.mode"], d["ambient.alpha"])

    @property
    def symmetry(self) -> SymmetrySpec:
        d = self.as_dict()
        return SymmetrySpec(d["symmetry.preset"], tuple(d["symmetry.center"]))

    @property
    def character_values(self):
        return tuple(self["symmetry.character"])

    def weights(self) -> WeightSpec:
        d = self.as_dict()
        lam = d["schedule.lam"][0]
        if d["weights.reduction"]:
            w = reduction_weights(self.params, lam, d["weights.c_bump"])
            if d["weights.a_exponents"] is not None or d["weights.c_exponents"] is not None:
                a_exp = d["weights.a_exponents"] or w.a_exponents
                c_exp = d["weights.c_exponents"] or a_exp
                w = WeightSpec(tuple(a_exp), lam, tuple(c_exp), 1.0, 1.0, w.c_bump,
                               w.orbit_exponent, w.orbit_scale)
        else:
            a_exp = d["weights.a_exponents"] or (0.0, 0.0)
            c_exp = d["weights.c_exponents"] or a_exp
            w = WeightSpec(tuple(a_exp), lam, tuple(c_exp), 1.0, 1.0, d["weights.c_bump"])
        return WeightSpec(w.a_exponents, lam, w.c_exponents, d["weights.a_scale"],
                          d["weights.c_scale"], w.c_bump, w.orbit_exponent, w.orbit_scale)

    def schedule(self) -> ContinuationSchedule:
        d = self.as_dict()
        deltas, ps, hs, lams = d["schedule.delta"], d["schedule.p"], d["schedule.mesh_h"], d["schedule.lam"]
        k = len(ps)
        if len(lams) == 1:
            lams = lams * k
        if not (len(deltas) == len(hs) == len(lams) == k):
            raise ConfigError("schedule lists differ in length", key="schedule")
        return ContinuationSchedule(tuple(Stage(a, b, c, e) for a, b, c, e in zip(deltas, ps, lams, hs)),
                                    d["schedule.warm_start"])

    def solve_options(self, verbose: bool = False) -> SolveOptions:
        d = self.as_dict()
        return SolveOptions(max_iterations=d["solver.max_iterations"], energy_tol=d["solver.energy_tol"],
                            residual_tol=d["solver.residual_tol"], restarts=d["solver.restarts"],
                            rng_seed=d["rng_seed"], verbose=verbose)

    def build_domain(self, delta: float, h: float):
        d = self.as_dict()
        P, sym, shape = self.params, self.symmetry, d["domain.shape"]
        if shape == "ball":
            dom = build_ball_generator(d["domain.center_height"], d["domain.radius"], h, P)
        elif shape == "rectangle":
            dom = build_rectangle(d["domain.s_range"], d["domain.t_range"], h, P, sym)
        elif shape == "annulus":
            dom = build_annulus(d["domain.center"], d["domain.r_inner"], d["domain.r_outer"], h, P, sym)
        elif shape == "polygon":
            dom = build_polygon(d["domain.vertices"], h, P, sym)
        else:
            dom = build_interval(d["domain.a"], d["domain.b"], h, P, sym)
        if delta > 0:
            dom = punch_hole(dom, delta, d["domain.hole_mode"])
        return dom

    def hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _validate(cfg: ExperimentConfig, lines: Dict[str, int]):
    d = cfg.as_dict()

    def fail(msg, key):
        raise ConfigError(msg, lines.get(key), key)

    try:
        P = cfg.params
    except GeometryError as exc:
        fail(str(exc), "ambient.mode")
    shape = d["domain.shape"]
    if shape not in SHAPE_KEYS:
        fail(f"unknown shape {shape!r}", "domain.shape")
    for key in SHAPE_KEYS[shape]:
        if d[key] in (None, ()):
            fail(f"required for shape {shape!r}", key)
    if shape == "interval" and P.mode != "planar":
        fail("intervals need planar mode", "domain.shape")
    try:
        spec = cfg.symmetry
        dim = 1 if shape == "interval" else 2
        if spec.preset != "trivial" and P.mode == "axial":
            fail("axial mode admits only the trivial explicit symmetry", "symmetry.preset")
        G = group_from_preset(spec, dim=dim)
        if cfg.character_values:
            make_character(G, list(cfg.character_values))
        elif spec.preset != "trivial":
            pass
    except (SymmetryError, GeometryError) as exc:
        key = "symmetry.character" if "character" in type(exc).__name__.lower() or \
            "homomorphism" in type(exc).__name__.lower() or "generators" in str(exc) else "symmetry.preset"
        fail(str(exc), key)
    if d["domain.hole_mode"] not in ("cylindrical", "fixed_set_distance"):
        fail("unknown hole mode", "domain.hole_mode")
    if d["weights.c_bump"] is not None and len(d["weights.c_bump"]) != 4:
        fail("c_bump needs s, t, amplitude, width", "weights.c_bump")
    for key in ("weights.a_exponents", "weights.c_exponents"):
        if d[key] is not None and len(d[key]) != 2:
            fail("exponents are (alpha, beta)", key)
    try:
        cfg.schedule()
    except ScheduleError as exc:
        fail(str(exc), "schedule.p")
    try:
        cfg.solve_options()
        cfg.weights()
    except ValueError as exc:
        fail(str(exc), "solver")


def parse_config(text: str) -> ExperimentConfig:
    raw: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", no)
        key, val = (x.strip() for x in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", no, key)
        if key in raw:
            raise ConfigError("duplicate key", no, key)
        try:
            raw[key] = SCHEMA[key][0](val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {val!r} ({exc})", no, key) from None
        lines[key] = no
    for key, (_, default) in SCHEMA.items():
        if key not in raw:
            if default is ...:
                raise ConfigError("missing required key", None, key)
            raw[key] = default
    cfg = ExperimentConfig(tuple(sorted(raw.items())))
    _validate(cfg, lines)
    return cfg


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical text with every default spelled out."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in cfg.values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
