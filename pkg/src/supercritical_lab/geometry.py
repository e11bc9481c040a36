"""Reduced (generator) domains in the (s, t) half-plane and their P1 meshes.

A generator domain is the planar region whose rotation about the coordinate
subspaces rebuilds the full domain: ``s = |y|`` and ``t = |z|``.  Meshes are
unstructured, boundary fitted, and, when a finite symmetry preset is
attached, built from a fundamental cell and replicated so that the group
acts exactly on the node set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import shapely
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, cKDTree
from shapely.geometry import LineString, Point, Polygon, box

_BIG = 1.0e6


class GeometryError(ValueError):
    """Invalid domain parameters or an impossible construction."""


class DomainTouchesPlaneError(GeometryError):
    pass


class EmptyDomainError(GeometryError):
    pass


class InvalidStateError(GeometryError):
    pass


class IncompatibleActionError(GeometryError):
    pass


def critical_exponent(k: float) -> float:
    """Sobolev exponent 2k/(k-2) in dimension k, +inf for k <= 2."""
    if k <= 2:
        return math.inf
    return 2.0 * k / (k - 2.0)


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class AmbientParams:
    """Dimensions of the full problem.

    ``n = N - m`` is the dimension of the reduced domain.  In axial mode the
    generator is the (|y|, t) half-plane and the orbit weight is ``s^(n-2)``;
    in planar mode the generator is the reduced domain itself.
    """

    N: int
    m: int
    mode: str = "axial"
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("axial", "planar"):
            raise GeometryError(f"unknown mode {self.mode!r}")
        if self.m < 1:
            raise GeometryError("m must be >= 1")
        n = self.N - self.m
        if n < 1:
            raise GeometryError("N - m must be >= 1")
        expected = float(n - 2) if self.mode == "axial" else 0.0
        if self.mode == "axial" and n < 3:
            raise GeometryError("axial mode needs n = N - m >= 3")
        if self.alpha is None:
            object.__setattr__(self, "alpha", expected)
        elif abs(self.alpha - expected) > 1e-12:
            raise GeometryError(
                f"alpha={self.alpha} inconsistent with mode {self.mode} (expected {expected})"
            )

    @property
    def n(self) -> int:
        return self.N - self.m

    @property
    def critical_exponent(self) -> float:
        return critical_exponent(self.n)


# --------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class BallShape:
    t0: float
    r: float

    def region(self, res):
        k = max(64, int(math.ceil(math.pi / res)))
        th = np.linspace(-math.pi / 2, math.pi / 2, k + 1)
        pts = np.column_stack([self.r * np.cos(th), self.t0 + self.r * np.sin(th)])
        pts[0, 0] = pts[-1, 0] = 0.0
        return Polygon(pts)

    def circles(self):
        return [((0.0, self.t0), self.r)]

    def min_t(self, hole):
        if hole is None or hole.delta == 0:
            return self.t0 - self.r
        return self.t0 - math.sqrt(self.r**2 - hole.delta**2)

    def sup_s(self):
        return self.r


@dataclass(frozen=True)
class RectangleShape:
    s_min: float
    s_max: float
    t_min: float
    t_max: float

    def region(self, res):
        return box(self.s_min, self.t_min, self.s_max, self.t_max)

    def circles(self):
        return []

    def min_t(self, hole):
        return self.t_min

    def sup_s(self):
        return self.s_max


@dataclass(frozen=True)
class AnnulusShape:
    center: tuple
    r_inner: float
    r_outer: float

    def region(self, res):
        cs, ct = self.center

        def ring(r):
            k = max(128, int(math.ceil(2 * math.pi / res)))
            th = np.linspace(0.0, 2 * math.pi, k, endpoint=False)
            return np.column_stack([cs + r * np.cos(th), ct + r * np.sin(th)])

        poly = Polygon(ring(self.r_outer), [ring(self.r_inner)[::-1]])
        return poly.intersection(box(0.0, -_BIG, _BIG, _BIG))

    def circles(self):
        return [(tuple(self.center), self.r_inner), (tuple(self.center), self.r_outer)]

    def min_t(self, hole):
        return None

    def sup_s(self):
        return self.center[0] + self.r_outer


@dataclass(frozen=True)
class PolygonShape:
    vertices: tuple

    def region(self, res):
        return Polygon(self.vertices)

    def circles(self):
        return []

    def min_t(self, hole):
        return None

    def sup_s(self):
        return max(v[0] for v in self.vertices)


@dataclass(frozen=True)
class IntervalShape:
    a: float
    b: float

    def min_t(self, hole):
        return self.a

    def sup_s(self):
        return self.b


@dataclass(frozen=True)
class SymmetrySpec:
    """Finite symmetry preset the mesh is built to respect.

    ``preset`` is one of ``trivial``, ``mirror`` (reflection across the line
    ``s = center[0]``, or the point ``center[0]`` in 1D), ``dihedral-k`` and
    ``cyclic-k`` (about ``center``).
    """

    preset: str = "trivial"
    center: tuple = (0.0, 0.0)

    @property
    def order(self) -> int:
        if self.preset == "trivial":
            return 1
        if self.preset == "mirror":
            return 2
        kind, k = _split_preset(self.preset)
        return 2 * k if kind == "dihedral" else k


def _split_preset(preset):
    kind, _, k = preset.partition("-")
    if kind not in ("dihedral", "cyclic") or not k.isdigit() or int(k) < 1:
        raise GeometryError(f"unknown symmetry preset {preset!r}")
    return kind, int(k)


@dataclass(frozen=True)
class HoleSpec:
    delta: float
    mode: str = "cylindrical"


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    boundary: np.ndarray
    dirichlet: np.ndarray

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def element_measures(self) -> np.ndarray:
        x = self.nodes[self.elements]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


@dataclass(frozen=True, eq=False)
class GeneratorDomain:
    params: AmbientParams
    shape: object
    mesh_h: float
    mesh: Mesh
    hole: Optional[HoleSpec] = None
    symmetry: SymmetrySpec = field(default_factory=SymmetrySpec)

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def s(self) -> np.ndarray:
        return self.mesh.nodes[:, 0]

    @property
    def t(self) -> np.ndarray:
        return self.mesh.nodes[:, -1]

    @property
    def diameter(self) -> float:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def region(self):
        """Shapely geometry of the (punched) domain; None in 1D."""
        if self.dim == 1:
            return None
        return _region_with_hole(self.shape, self.hole, self.params, self.symmetry, self.mesh_h)

    def same_mesh(self, other: "GeneratorDomain") -> bool:
        return (
            self.mesh.nodes.shape == other.mesh.nodes.shape
            and np.array_equal(self.mesh.nodes, other.mesh.nodes)
            and np.array_equal(self.mesh.elements, other.mesh.elements)
            and np.array_equal(self.mesh.dirichlet, other.mesh.dirichlet)
        )


# --------------------------------------------------------------------------
# mesh generation


def _arc_resolution(h):
    # vertex angle step; sagitta r*step^2/8 stays far below the snap tolerance
    return min(0.05, 0.25 * h)


def _fixed_set_geometry(params, sym):
    """Geometric fixed-point set of the symmetry as a shapely object.

    Returns ``None`` when every point is fixed (planar mode, trivial group).
    """
    axis = LineString([(0.0, -_BIG), (0.0, _BIG)]) if params.mode == "axial" else None
    if sym.preset == "trivial":
        return axis
    cs, ct = sym.center
    if sym.preset == "mirror":
        g = LineString([(cs, -_BIG), (cs, _BIG)])
    else:
        g = Point(cs, ct)
    return g if axis is None else g.intersection(axis)


def _region_with_hole(shape, hole, params, sym, h):
    region = shape.region(_arc_resolution(h))
    if hole is None or hole.delta == 0:
        return region
    if hole.mode == "cylindrical":
        cut = box(-_BIG, -_BIG, hole.delta, _BIG)
    else:
        fixed = _fixed_set_geometry(params, sym)
        if fixed is None:
            raise EmptyDomainError("every point is fixed; the fixed-set hole removes the domain")
        cut = fixed.buffer(hole.delta, quad_segs=max(64, int(1.0 / _arc_resolution(h))))
    out = region.difference(cut)
    if out.is_empty or out.area <= 0:
        raise EmptyDomainError(f"hole of size {hole.delta} leaves an empty domain")
    return out


def _hole_circles(hole, params, sym):
    if hole is None or hole.delta == 0 or hole.mode == "cylindrical":
        return []
    fixed = _fixed_set_geometry(params, sym)
    if isinstance(fixed, Point):
        return [((fixed.x, fixed.y), hole.delta)]
    return []


def _sample_ring(coords, h):
    """Resample a closed ring at spacing <= h, keeping sharp corners."""
    pts = np.asarray(coords)[:-1]
    k = len(pts)
    prev = pts - np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0) - pts
    cosang = np.einsum("ij,ij->i", prev, nxt) / (
        np.linalg.norm(prev, axis=1) * np.linalg.norm(nxt, axis=1) + 1e-300
    )
    corners = np.flatnonzero(cosang < math.cos(math.radians(20.0)))
    if len(corners) == 0:
        corners = np.array([0])
    out = []
    for a, b in zip(corners, np.roll(corners, -1)):
        idx = np.arange(a, b + 1) if b > a else np.r_[np.arange(a, k), np.arange(0, b + 1)]
        seg = pts[idx % k]
        d = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(seg, axis=0), axis=1))]
        if d[-1] == 0:
            continue
        nseg = max(1, int(math.ceil(d[-1] / h - 1e-9)))
        targets = np.linspace(0.0, d[-1], nseg + 1)[:-1]
        out.append(np.column_stack([np.interp(targets, d, seg[:, 0]), np.interp(targets, d, seg[:, 1])]))
    return np.vstack(out)


def _boundary_samples(geom, h):
    polys = list(geom.geoms) if hasattr(geom, "geoms") else [geom]
    out = []
    for poly in polys:
        if not isinstance(poly, Polygon) or poly.area <= 0:
            continue
        out.append(_sample_ring(poly.exterior.coords, h))
        for ring in poly.interiors:
            out.append(_sample_ring(ring.coords, h))
    return np.vstack(out)


def _snap(points, circles, tol, s_lines=()):
    """Project near-circle nodes onto the circle; nodes also on a vertical
    line s = c slide along that line instead."""
    for (cx, cy), r in circles:
        d = np.hypot(points[:, 0] - cx, points[:, 1] - cy)
        close = np.abs(d - r) < tol
        if not np.any(close):
            continue
        scale = r / d[close]
        snapped = np.column_stack([cx + (points[close, 0] - cx) * scale,
                                   cy + (points[close, 1] - cy) * scale])
        for c in s_lines:
            on = np.abs(points[close, 0] - c) < tol
            if np.any(on) and abs(c - cx) <= r:
                dy = math.sqrt(r * r - (c - cx) ** 2)
                snapped[on, 0] = c
                snapped[on, 1] = cy + np.sign(points[close, 1][on] - cy) * dy
        points[close] = snapped
    return points


def _lattice(geom, h):
    s0, t0, s1, t1 = geom.bounds
    dy = h * math.sqrt(3.0) / 2.0
    rows = np.arange(math.floor(t0 / dy) - 1, math.ceil(t1 / dy) + 2)
    pts = []
    for j in rows:
        off = 0.5 * h * (j % 2)
        xs = np.arange(math.floor((s0 - off) / h) - 1, math.ceil((s1 - off) / h) + 2) * h + off
        pts.append(np.column_stack([xs, np.full_like(xs, j * dy)]))
    pts = np.vstack(pts)
    keep = shapely.contains_xy(geom, pts[:, 0], pts[:, 1])
    pts = pts[keep]
    dist = shapely.distance(geom.boundary, shapely.points(pts))
    return pts[dist > 0.45 * h]


def _triangulate(geom, h, circles, s_lines=()):
    bpts = _boundary_samples(geom, h)
    bpts = _snap(bpts, circles, 1e-2 * h, s_lines)
    ipts = _lattice(geom, h)
    pts = np.vstack([bpts, ipts])
    pts = _dedupe(pts, 1e-9 * max(1.0, h))
    tri = Delaunay(pts)
    simp = tri.simplices
    cen = pts[simp].mean(axis=1)
    inside = shapely.contains_xy(geom, cen[:, 0], cen[:, 1])
    simp = simp[inside]
    area = _areas(pts, simp)
    simp = simp[np.abs(area) > 1e-10 * h * h]
    return pts, simp


def _areas(pts, simp):
    x = pts[simp]
    e1 = x[:, 1] - x[:, 0]
    e2 = x[:, 2] - x[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _dedupe(pts, tol):
    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return pts
    drop = np.zeros(len(pts), bool)
    drop[np.maximum(pairs[:, 0], pairs[:, 1])] = True
    return pts[~drop]


def _orient(pts, simp):
    simp = simp.copy()
    neg = _areas(pts, simp) < 0
    simp[neg] = simp[neg][:, [0, 2, 1]]
    return simp


def _compact(pts, simp):
    used = np.unique(simp)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return pts[used], remap[simp]


def _group_maps(sym, dim):
    """Affine maps (A, b) of every element of a symmetry preset."""
    eye = np.eye(dim)
    if sym.preset == "trivial":
        return [(eye, np.zeros(dim))]
    c = np.asarray(sym.center[:dim], float)
    if sym.preset == "mirror":
        A = eye.copy()
        A[0, 0] = -1.0
        return [(eye, np.zeros(dim)), (A, c - A @ c)]
    if dim != 2:
        raise GeometryError(f"preset {sym.preset} needs a 2D domain")
    kind, k = _split_preset(sym.preset)
    maps = []
    for j in range(k):
        th = 2 * math.pi * j / k
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        maps.append((R, c - R @ c))
    if kind == "dihedral":
        F = np.array([[1.0, 0.0], [0.0, -1.0]])
        maps += [(A @ F, c - A @ F @ c) for A, _ in maps[:k]]
    return maps


def _fundamental_cell(sym, region):
    if sym.preset == "trivial":
        return region
    cs, ct = sym.center
    if sym.preset == "mirror":
        return region.intersection(box(cs, -_BIG, _BIG, _BIG))
    kind, k = _split_preset(sym.preset)
    ang = (math.pi / k) if kind == "dihedral" else (2 * math.pi / k)
    R = _BIG
    th = np.linspace(0.0, ang, 65)
    wedge = Polygon(np.vstack([[cs, ct], np.column_stack([cs + R * np.cos(th), ct + R * np.sin(th)])]))
    return region.intersection(wedge)


def _replicate(pts, simp, maps, tol):
    all_pts, all_simp, off = [], [], 0
    for A, b in maps:
        q = pts @ A.T + b
        all_pts.append(q)
        all_simp.append(simp + off)
        off += len(q)
    P = np.vstack(all_pts)
    S = np.vstack(all_simp)
    tree = cKDTree(P)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    rep = np.arange(len(P))
    if len(pairs):
        # union-find on coincident nodes
        parent = np.arange(len(P))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in pairs:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        rep = np.array([find(i) for i in range(len(P))])
    S = rep[S]
    # the cell is replicated |G| times; on cut lines duplicate triangles may appear
    key = np.sort(S, axis=1)
    _, first = np.unique(key, axis=0, return_index=True)
    S = S[np.sort(first)]
    P, S = _compact(P, S)
    return P, S


def _boundary_from_topology(simp, n):
    edges = np.vstack([simp[:, [0, 1]], simp[:, [1, 2]], simp[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    bedges = uniq[counts == 1]
    bnd = np.zeros(n, bool)
    bnd[bedges.ravel()] = True
    return bnd, bedges


def _mesh_region(shape, params, sym, hole, h):
    region = _region_with_hole(shape, hole, params, sym, h)
    circles = list(shape.circles()) + _hole_circles(hole, params, sym)
    cell = _fundamental_cell(sym, region)
    if cell.is_empty:
        raise EmptyDomainError("empty fundamental cell")
    s_lines = [0.0]
    if hole is not None and hole.delta > 0 and (hole.mode == "cylindrical" or params.mode == "axial"):
        s_lines.append(hole.delta)
    if sym.preset == "mirror":
        s_lines.append(sym.center[0])
    pts, simp = _triangulate(cell, h, circles, s_lines)
    maps = _group_maps(sym, 2)
    diam = math.hypot(region.bounds[2] - region.bounds[0], region.bounds[3] - region.bounds[1])
    if len(maps) > 1:
        pts, simp = _replicate(pts, simp, maps, 1e-9 * diam)
    else:
        pts, simp = _compact(pts, simp)
    simp = _orient(pts, simp)
    bnd, bedges = _boundary_from_topology(simp, len(pts))
    if params.mode == "axial":
        tol = 1e-12 * max(1.0, diam)
        on_axis = np.abs(pts[:, 0]) <= tol
        pts[on_axis, 0] = 0.0
        axis_edge = on_axis[bedges[:, 0]] & on_axis[bedges[:, 1]]
        dirichlet = np.zeros(len(pts), bool)
        dirichlet[bedges[~axis_edge].ravel()] = True
    else:
        dirichlet = bnd.copy()
    return Mesh(_frozen(pts), _frozen(simp.astype(np.int64)), _frozen(bnd), _frozen(dirichlet))


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_mesh(dom: GeneratorDomain):
    mesh = dom.mesh
    if mesh.n_nodes == 0 or len(mesh.elements) == 0:
        raise EmptyDomainError("mesh has no elements")
    if np.any(mesh.element_measures() <= 0):
        raise GeometryError("mesh has non-positive element measures")
    n = mesh.n_nodes
    E = mesh.elements
    k = E.shape[1]
    rows = np.repeat(E, k, axis=1).ravel()
    cols = np.tile(E, (1, k)).ravel()
    graph = coo_matrix((np.ones_like(rows), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise GeometryError(f"mesh is not connected ({ncomp} components)")
    if dom.dim == 2 and np.any(mesh.nodes[:, 0] < 0):
        raise GeometryError("nodes with s < 0")
    if dom.params.mode == "axial" and np.any(dom.t <= 0):
        raise DomainTouchesPlaneError("nodes with t <= 0")


def _build(params, shape, h, hole=None, symmetry=None):
    symmetry = symmetry or SymmetrySpec()
    if params.mode == "axial" and symmetry.preset != "trivial":
        raise GeometryError("axial mode supports only the trivial explicit symmetry")
    if isinstance(shape, IntervalShape):
        mesh = _mesh_interval(shape, hole, symmetry, h)
    else:
        mesh = _mesh_region(shape, params, symmetry, hole, h)
    dom = GeneratorDomain(params, shape, h, mesh, hole, symmetry)
    _check_mesh(dom)
    return dom


def _mesh_interval(shape, hole, sym, h):
    if hole is not None and hole.delta > 0:
        raise GeometryError("holes are not supported on intervals")
    L = shape.b - shape.a
    k = max(2, int(math.ceil(L / h - 1e-9)))
    if sym.preset == "mirror":
        k += k % 2
        half = np.linspace(shape.a, 0.5 * (shape.a + shape.b), k // 2 + 1)
        x = np.r_[half, (shape.a + shape.b - half[::-1])[1:]]
    else:
        x = np.linspace(shape.a, shape.b, k + 1)
    E = np.column_stack([np.arange(k), np.arange(1, k + 1)])
    bnd = np.zeros(k + 1, bool)
    bnd[[0, -1]] = True
    return Mesh(_frozen(x[:, None]), _frozen(E), _frozen(bnd), _frozen(bnd.copy()))


def _check_h(h):
    if not (h > 0 and math.isfinite(h)):
        raise GeometryError(f"mesh_h must be positive, got {h}")


# --------------------------------------------------------------------------
# public constructors


def build_ball_generator(center_height: float, radius: float, mesh_h: float,
                         params: Optional[AmbientParams] = None) -> GeneratorDomain:
    """Half-disk {s >= 0, s^2 + (t - t0)^2 < r^2}: the generator of a ball
    centred on the t half-line."""
    _check_h(mesh_h)
    if not radius > 0:
        raise GeometryError("radius must be positive")
    if radius >= center_height:
        raise DomainTouchesPlaneError(
            f"closure touches t = 0: radius {radius} >= center height {center_height}"
        )
    params = params or AmbientParams(N=4, m=1, mode="axial")
    return _build(params, BallShape(float(center_height), float(radius)), mesh_h)


def build_rectangle(s_range: Sequence[float], t_range: Sequence[float], mesh_h: float,
                    params: Optional[AmbientParams] = None,
                    symmetry: Optional[SymmetrySpec] = None) -> GeneratorDomain:
    _check_h(mesh_h)
    s0, s1 = map(float, s_range)
    t0, t1 = map(float, t_range)
    if not (s1 > s0 >= 0 and t1 > t0):
        raise GeometryError("rectangle needs 0 <= s_min < s_max and t_min < t_max")
    params = params or AmbientParams(N=3, m=1, mode="planar")
    if t0 <= 0 and params.mode == "axial":
        raise DomainTouchesPlaneError("closure touches t = 0")
    return _build(params, RectangleShape(s0, s1, t0, t1), mesh_h, symmetry=symmetry)


def build_annulus(center: Sequence[float], r_inner: float, r_outer: float, mesh_h: float,
                  params: Optional[AmbientParams] = None,
                  symmetry: Optional[SymmetrySpec] = None) -> GeneratorDomain:
    _check_h(mesh_h)
    if not 0 < r_inner < r_outer:
        raise GeometryError("annulus needs 0 < r_inner < r_outer")
    cs, ct = map(float, center)
    if ct - r_outer <= 0:
        raise DomainTouchesPlaneError("closure touches t = 0")
    params = params or AmbientParams(N=3, m=1, mode="planar")
    return _build(params, AnnulusShape((cs, ct), float(r_inner), float(r_outer)), mesh_h,
                  symmetry=symmetry)


def build_polygon(vertices: Sequence[Sequence[float]], mesh_h: float,
                  params: Optional[AmbientParams] = None,
                  symmetry: Optional[SymmetrySpec] = None) -> GeneratorDomain:
    _check_h(mesh_h)
    verts = tuple((float(a), float(b)) for a, b in vertices)
    if len(verts) < 3 or not Polygon(verts).is_valid or Polygon(verts).area <= 0:
        raise GeometryError("polygon must be simple with positive area")
    if min(v[1] for v in verts) <= 0:
        raise DomainTouchesPlaneError("closure touches t = 0")
    if min(v[0] for v in verts) < 0:
        raise GeometryError("polygon must lie in s >= 0")
    params = params or AmbientParams(N=3, m=1, mode="planar")
    return _build(params, PolygonShape(verts), mesh_h, symmetry=symmetry)


def build_interval(a: float, b: float, mesh_h: float,
                   params: Optional[AmbientParams] = None,
                   symmetry: Optional[SymmetrySpec] = None) -> GeneratorDomain:
    """1D domain (a, b); the single coordinate plays the role of t."""
    _check_h(mesh_h)
    if not b > a:
        raise GeometryError("interval needs a < b")
    params = params or AmbientParams(N=2, m=1, mode="planar")
    if params.mode != "planar":
        raise GeometryError("intervals are planar-mode domains")
    return _build(params, IntervalShape(float(a), float(b)), mesh_h, symmetry=symmetry)


def punch_hole(dom: GeneratorDomain, delta: float, mode: str = "cylindrical") -> GeneratorDomain:
    """Remove {s <= delta} (cylindrical) or the closed delta-neighbourhood of
    the fixed-point set, re-meshing the remainder with fitted hole boundary."""
    if mode not in ("cylindrical", "fixed_set_distance"):
        raise GeometryError(f"unknown hole mode {mode!r}")
    if dom.hole is not None and dom.hole.delta > 0:
        raise InvalidStateError("domain already has a hole")
    if delta < 0:
        raise GeometryError("delta must be nonnegative")
    if delta == 0:
        return dom
    if dom.dim == 1:
        raise GeometryError("holes are not supported on intervals")
    if mode == "cylindrical" and delta >= dom.shape.sup_s():
        raise EmptyDomainError(f"delta={delta} >= sup s = {dom.shape.sup_s()}")
    return _build(dom.params, dom.shape, dom.mesh_h, HoleSpec(float(delta), mode), dom.symmetry)


def remesh(dom: GeneratorDomain, mesh_h: float) -> GeneratorDomain:
    """Same shape, hole and symmetry at a different resolution."""
    _check_h(mesh_h)
    return _build(dom.params, dom.shape, mesh_h, dom.hole, dom.symmetry)


def distance_to_plane(dom: GeneratorDomain) -> float:
    """min of t over the closure of the domain (analytic when parametric)."""
    if dom.dim == 1:
        return float(dom.nodes[:, 0].min())
    val = dom.shape.min_t(dom.hole)
    if val is not None and (dom.hole is None or dom.hole.mode == "cylindrical"
                            or dom.params.mode == "axial"):
        return float(val)
    return float(dom.t.min())


def fixed_point_set(dom: GeneratorDomain, action) -> np.ndarray:
    """Indices of nodes fixed by every group element (and, in axial mode, by
    the implicit rotation group, i.e. lying on s = 0)."""
    perms = np.asarray(action.node_permutations)
    if perms.shape[1] != dom.mesh.n_nodes:
        raise IncompatibleActionError("action permutations do not match the mesh")
    idx = np.arange(dom.mesh.n_nodes)
    fixed = np.all(perms == idx[None, :], axis=0)
    if dom.params.mode == "axial" and dom.dim == 2:
        fixed &= dom.s == 0.0
    return np.flatnonzero(fixed)


def fixed_set_samples(dom: GeneratorDomain, count: int = 2001) -> np.ndarray:
    """Points sampled on the closure of the geometric fixed-point set of the
    un-punched domain (used to locate weight-ratio minimisers)."""
    if dom.dim == 1:
        raise GeometryError("fixed-set sampling needs a 2D domain")
    region = dom.shape.region(_arc_resolution(dom.mesh_h))
    fixed = _fixed_set_geometry(dom.params, dom.symmetry)
    if fixed is None:
        raise GeometryError("every point is fixed")
    inter = fixed.intersection(region.buffer(1e-12))
    if inter.is_empty:
        return np.empty((0, 2))
    if isinstance(inter, Point):
        return np.array([[inter.x, inter.y]])
    parts = list(inter.geoms) if hasattr(inter, "geoms") else [inter]
    out = []
    for part in parts:
        if isinstance(part, Point):
            out.append([[part.x, part.y]])
            continue
        L = part.length
        d = np.linspace(0.0, L, max(2, int(count * L / max(inter.length, 1e-300))))
        out.append(np.array([[q.x, q.y] for q in (part.interpolate(x) for x in d)]))
    return np.vstack(out)


def distance_to_outer_boundary(dom: GeneratorDomain, point: Sequence[float]) -> float:
    """Distance from ``point`` to the Dirichlet boundary of the un-punched
    domain (the axis is not boundary in axial mode)."""
    if dom.dim == 1:
        x = float(point[-1])
        return min(x - dom.shape.a, dom.shape.b - x)
    region = dom.shape.region(_arc_resolution(dom.mesh_h))
    bnd = region.boundary
    if dom.params.mode == "axial":
        bnd = bnd.difference(box(-_BIG, -_BIG, 1e-12, _BIG))
    return float(bnd.distance(Point(point[0], point[1])))


def dump_mesh(dom: GeneratorDomain, path) -> None:
    """Plain-text mesh dump: node lines (index, s, t, boundary-flag) then
    element lines (node indices)."""
    m = dom.mesh
    with open(path, "w") as fh:
        fh.write(f"# nodes {m.n_nodes}\n")
        for i, x in enumerate(m.nodes):
            coords = " ".join(repr(float(c)) for c in (x if dom.dim == 2 else (x[0],)))
            fh.write(f"{i} {coords} {int(m.dirichlet[i])}\n")
        fh.write(f"# elements {len(m.elements)}\n")
        for e in m.elements:
            fh.write(" ".join(str(int(v)) for v in e) + "\n")
