import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from supercritical_lab.discretization import WeightSpec, assemble
from supercritical_lab.geometry import AmbientParams, SymmetrySpec, build_annulus, build_rectangle
from supercritical_lab.symmetry import (
    InvarianceError,
    Isometry,
    NotAHomomorphismError,
    NotFiniteError,
    SymmetryAction,
    check_assumption_A,
    equivariant_project,
    group_from_preset,
    is_equivariant,
    make_character,
    make_group,
    trivial_character,
)

P = AmbientParams(4, 1, "planar")


@pytest.fixture(scope="module")
def mirror():
    dom = build_rectangle((0.0, 2.0), (1.0, 2.0), 0.1, P, SymmetrySpec("mirror", (1.0, 0.0)))
    G = group_from_preset(dom.symmetry, dom)
    return dom, G, make_character(G, [-1])


@pytest.fixture(scope="module")
def dihedral():
    dom = build_annulus((2.0, 3.0), 0.4, 1.0, 0.1, P, SymmetrySpec("dihedral-3", (2.0, 3.0)))
    G = group_from_preset(dom.symmetry, dom)
    # rotation +1, reflection -1
    return dom, G, make_character(G, [1, -1])


def test_orders(mirror, dihedral):
    assert make_group([], mirror[0]).order == 1
    assert mirror[1].order == 2
    assert dihedral[1].order == 6


def test_bad_rotation_center(mirror):
    rot = Isometry.rotation(2 * math.pi / 3, (0.3, 1.2))
    with pytest.raises(InvarianceError):
        make_group([rot], mirror[0])


def test_infinite_group():
    with pytest.raises(NotFiniteError):
        make_group([Isometry.rotation(1.0, (0.0, 0.0))])


def test_characters(mirror):
    G = group_from_preset(SymmetrySpec("cyclic-3", (0.0, 0.0)))
    with pytest.raises(NotAHomomorphismError):
        make_character(G, [-1])
    assert make_character(mirror[1], [1]).is_trivial


def test_assumption_A(mirror):
    dom, G, phi = mirror
    assert check_assumption_A(G, trivial_character(G), dom)
    assert check_assumption_A(G, phi, dom)
    # a single node on the mirror line violates it
    one = SymmetryAction(G.elements, np.zeros((2, 1), dtype=np.int64), G.table, G.generators)
    assert not check_assumption_A(one, phi)


def test_projector_basic(mirror):
    dom, G, phi = mirror
    one = np.ones(dom.mesh.n_nodes)
    assert np.all(equivariant_project(one, G, phi) == 0)
    u = np.random.default_rng(0).standard_normal(dom.mesh.n_nodes)
    Pu = equivariant_project(u, G, phi)
    assert is_equivariant(Pu, G, phi)
    assert np.array_equal(equivariant_project(Pu, G, phi), Pu)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projector_self_adjoint_in_mass_product(dihedral, seed):
    dom, G, phi = dihedral
    # constant weight: invariant under the rotations
    f = assemble(dom, WeightSpec(a_scale=1.7))
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, dom.mesh.n_nodes))
    u[dom.mesh.dirichlet] = v[dom.mesh.dirichlet] = 0
    Pu, Pv = equivariant_project(u, G, phi), equivariant_project(v, G, phi)
    M = f.M
    lhs = f.restrict(Pu) @ (M @ f.restrict(v))
    rhs = f.restrict(u) @ (M @ f.restrict(Pv))
    scale = math.sqrt((f.restrict(u) @ (M @ f.restrict(u))) * (f.restrict(v) @ (M @ f.restrict(v))))
    assert abs(lhs - rhs) <= 1e-12 * scale
    assert is_equivariant(Pu, G, phi)
    assert np.allclose(equivariant_project(Pu, G, phi), Pu, rtol=0, atol=1e-15 * np.abs(u).max())
