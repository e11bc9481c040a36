"""Finite symmetry groups on generator meshes, sign characters, and the
equivariant averaging projector.

Continuous invariances (rotations in y and z) are absorbed into the weights
by the axial reduction; only residual finite symmetries live here.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import GeneratorDomain, SymmetrySpec, _group_maps

MAX_ORDER = 1024


class SymmetryError(ValueError):
    pass


class NotFiniteError(SymmetryError):
    pass


class InvarianceError(SymmetryError):
    pass


class NotAHomomorphismError(SymmetryError):
    pass


@dataclass(frozen=True, eq=False)
class Isometry:
    """Affine isometry x -> A x + b."""

    A: np.ndarray
    b: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.A.T + self.b

    def compose(self, other: "Isometry") -> "Isometry":
        # (self o other)(x) = A (A' x + b') + b
        return Isometry(self.A @ other.A, self.A @ other.b + self.b)

    def key(self, scale: float = 1.0):
        return tuple(np.round(np.r_[self.A.ravel(), self.b.ravel() / scale], 8) + 0.0)

    @classmethod
    def identity(cls, dim: int) -> "Isometry":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def reflection_s(cls, c: float, dim: int = 2) -> "Isometry":
        """Mirror s -> 2c - s."""
        A = np.eye(dim)
        A[0, 0] = -1.0
        b = np.zeros(dim)
        b[0] = 2.0 * c
        return cls(A, b)

    @classmethod
    def rotation(cls, angle: float, center: Sequence[float]) -> "Isometry":
        c = np.asarray(center, float)
        R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        return cls(R, c - R @ c)


@dataclass(frozen=True, eq=False)
class SymmetryAction:
    """A finite group of isometries with its induced node permutations.

    ``node_permutations[g][i]`` is the index of the node ``g(x_i)``.
    ``generators`` lists indices (into ``elements``) of the generating set.
    """

    elements: tuple
    node_permutations: np.ndarray
    table: np.ndarray
    generators: tuple = ()
    orbit_dim_effective: int = 0

    @property
    def order(self) -> int:
        return len(self.elements)

    def inverse(self, g: int) -> int:
        return int(np.flatnonzero(self.table[g] == 0)[0])


@dataclass(frozen=True, eq=False)
class Character:
    """A homomorphism group -> {+1, -1}, stored per element index."""

    values: np.ndarray

    @property
    def is_trivial(self) -> bool:
        return bool(np.all(self.values == 1))

    def kernel(self) -> np.ndarray:
        return np.flatnonzero(self.values == 1)


def _closure(generators, dim, scale):
    ident = Isometry.identity(dim)
    elements = [ident]
    keys = {ident.key(scale): 0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for g in generators:
                h = g.compose(elements[i])
                k = h.key(scale)
                if k not in keys:
                    if len(elements) >= MAX_ORDER:
                        raise NotFiniteError(f"group closure exceeds {MAX_ORDER} elements")
                    keys[k] = len(elements)
                    elements.append(h)
                    nxt.append(len(elements) - 1)
        frontier = nxt
    table = np.empty((len(elements), len(elements)), dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            k = a.compose(b).key(scale)
            if k not in keys:
                raise NotFiniteError("composition left the computed closure")
            table[i, j] = keys[k]
    gen_idx = tuple(keys[g.key(scale)] for g in generators)
    return elements, table, gen_idx


def _permutation(g, nodes, tree, tol):
    dist, idx = tree.query(g(nodes))
    if np.any(dist > tol) or len(np.unique(idx)) != len(idx):
        return None
    return idx


def make_group(generators: Sequence[Isometry], mesh: Optional[GeneratorDomain] = None,
               orbit_dim_effective: Optional[int] = None, dim: int = 2) -> SymmetryAction:
    """Close ``generators`` under composition and build node permutations.

    Without a mesh only the abstract group (elements and table) is built,
    which is enough to validate characters.
    """
    if mesh is not None:
        dim = mesh.dim
    elif generators:
        dim = np.asarray(generators[0].A).shape[0]
    scale = mesh.diameter if mesh is not None else 1.0
    gens = [Isometry(np.asarray(g.A, float), np.asarray(g.b, float)) for g in generators]
    elements, table, gen_idx = _closure(gens, dim, scale)
    if mesh is None:
        perms = np.zeros((len(elements), 0), dtype=np.int64)
    else:
        nodes = mesh.nodes
        tree = cKDTree(nodes)
        tol = 1e-9 * scale
        perms = []
        for gi, g in enumerate(elements):
            p = _permutation(g, nodes, tree, tol)
            if p is None:
                raise InvarianceError(f"group element {gi} does not map the mesh onto itself")
            perms.append(p)
        perms = np.array(perms, dtype=np.int64)
    if orbit_dim_effective is None:
        orbit_dim_effective = 0
        if mesh is not None and mesh.params.mode == "axial":
            orbit_dim_effective = mesh.params.n - 2
    return SymmetryAction(tuple(elements), perms, table, gen_idx, orbit_dim_effective)


def preset_generators(spec: SymmetrySpec, dim: int = 2) -> list:
    """Generating isometries for a named preset."""
    if spec.preset == "trivial":
        return []
    maps = _group_maps(spec, dim)
    if spec.preset == "mirror":
        A, b = maps[1]
        return [Isometry(A, b)]
    kind, k = spec.preset.split("-")
    k = int(k)
    gens = [Isometry(*maps[1 % len(maps)])] if k > 1 else []
    if kind == "dihedral":
        gens.append(Isometry(*maps[k]))
    return gens


def group_from_preset(spec: SymmetrySpec, mesh: Optional[GeneratorDomain] = None,
                      dim: int = 2) -> SymmetryAction:
    if mesh is not None:
        dim = mesh.dim
    return make_group(preset_generators(spec, dim), mesh, dim=dim)


def make_character(group: SymmetryAction, gen_values) -> Character:
    """Extend +-1 values on the generators multiplicatively.

    ``gen_values`` is a sequence aligned with ``group.generators`` or a map
    generator-position -> value.
    """
    if isinstance(gen_values, dict):
        vals = [gen_values[i] for i in range(len(group.generators))]
    else:
        vals = list(gen_values)
    if len(vals) != len(group.generators):
        raise NotAHomomorphismError(
            f"{len(vals)} values for {len(group.generators)} generators"
        )
    if any(v not in (1, -1) for v in vals):
        raise NotAHomomorphismError("character values must be +1 or -1")
    phi = np.zeros(group.order, dtype=np.int64)
    phi[0] = 1
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for g, v in zip(group.generators, vals):
                j = group.table[g, i]
                val = v * phi[i]
                if phi[j] == 0:
                    phi[j] = val
                    nxt.append(j)
                elif phi[j] != val:
                    raise NotAHomomorphismError(
                        f"inconsistent extension at element {j}"
                    )
        frontier = nxt
    if np.any(phi == 0):
        raise NotAHomomorphismError("generators do not generate the group")
    if not np.array_equal(phi[group.table], np.outer(phi, phi)):
        raise NotAHomomorphismError("phi(gh) != phi(g) phi(h)")
    return Character(phi)


def trivial_character(group: SymmetryAction) -> Character:
    return Character(np.ones(group.order, dtype=np.int64))


def stabilizer(group: SymmetryAction, node: int) -> np.ndarray:
    return np.flatnonzero(group.node_permutations[:, node] == node)


def check_assumption_A(group: SymmetryAction, character: Character,
                       dom: Optional[GeneratorDomain] = None) -> bool:
    """True iff some node has its stabilizer inside ker(phi).

    With a domain, only interior (non-Dirichlet) nodes are candidates.
    """
    if character.is_trivial:
        return True
    perms = group.node_permutations
    n = perms.shape[1]
    candidates = np.arange(n)
    if dom is not None:
        candidates = np.flatnonzero(~dom.mesh.dirichlet)
    bad = character.values == -1
    fixed = perms[:, candidates] == candidates[None, :]
    # stabilizer contains an element with phi = -1
    violates = np.any(fixed & bad[:, None], axis=0)
    return bool(np.any(~violates))


@dataclass(frozen=True, eq=False)
class _OrbitData:
    rep: np.ndarray
    sign: np.ndarray
    killed: np.ndarray


def _orbits(group: SymmetryAction, character: Character) -> _OrbitData:
    perms = group.node_permutations
    n = perms.shape[1]
    rep = perms.min(axis=0)
    # sign[x] = phi(g) for any g with g(rep) = x
    sign = np.zeros(n, dtype=np.int64)
    for g in range(group.order):
        sign[perms[g, rep]] = character.values[g]
    killed = np.zeros(n, bool)
    bad = character.values == -1
    fixed_by_bad = np.any((perms[bad] == np.arange(n)[None, :]), axis=0) if bad.any() else killed
    killed[fixed_by_bad] = True
    killed = killed[rep]
    return _OrbitData(rep, sign, killed)


_ORBIT_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def equivariant_project(u: np.ndarray, group: SymmetryAction, character: Character) -> np.ndarray:
    """(Pu)(x) = |G|^-1 sum_g phi(g) u(g x), written back orbit-wise so that
    Pu(g x) = phi(g) Pu(x) holds bit-exactly."""
    u = np.asarray(u, float)
    perms = group.node_permutations
    if u.shape[0] != perms.shape[1]:
        raise InvarianceError("field does not live on the group's mesh")
    if group.order == 1:
        return u.copy()
    per_group = _ORBIT_CACHE.setdefault(group, weakref.WeakKeyDictionary())
    data = per_group.get(character)
    if data is None:
        data = per_group[character] = _orbits(group, character)
    avg = np.zeros_like(u)
    for g in range(group.order):
        avg += character.values[g] * u[perms[g]]
    avg /= group.order
    out = data.sign * avg[data.rep]
    out[data.killed] = 0.0
    return out


def is_equivariant(u: np.ndarray, group: SymmetryAction, character: Character) -> bool:
    u = np.asarray(u)
    for g in range(group.order):
        if not np.array_equal(u[group.node_permutations[g]], character.values[g] * u):
            return False
    return True
