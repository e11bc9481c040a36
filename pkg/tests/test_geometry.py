import math

import numpy as np
import pytest

from supercritical_lab.geometry import (
    AmbientParams,
    DomainTouchesPlaneError,
    EmptyDomainError,
    GeometryError,
    IncompatibleActionError,
    InvalidStateError,
    SymmetrySpec,
    build_annulus,
    build_ball_generator,
    build_interval,
    build_rectangle,
    critical_exponent,
    distance_to_plane,
    dump_mesh,
    fixed_point_set,
    punch_hole,
)
from supercritical_lab.symmetry import Isometry, group_from_preset, make_group


@pytest.fixture(scope="module")
def ball():
    return build_ball_generator(2.0, 1.0, 0.05)


def test_ambient_params():
    P = AmbientParams(4, 1, "axial")
    assert P.n == 3 and P.alpha == 1.0 and P.critical_exponent == 6.0
    assert AmbientParams(4, 1, "planar").alpha == 0.0
    with pytest.raises(GeometryError):
        AmbientParams(4, 1, "planar", alpha=1.0)
    assert math.isinf(critical_exponent(2))


def test_ball_generator(ball):
    assert distance_to_plane(ball) == pytest.approx(1.0)
    assert ball.t.min() == pytest.approx(1.0, abs=1e-12)
    assert ball.s.max() == pytest.approx(1.0, abs=0.05 ** 2)
    assert np.all(ball.s >= 0)
    assert np.all(ball.mesh.element_measures() > 0)
    # the axis is not Dirichlet in axial mode
    on_axis = ball.s == 0
    interior_axis = on_axis & (ball.t > 1 + 1e-9) & (ball.t < 3 - 1e-9)
    assert interior_axis.any() and not ball.mesh.dirichlet[interior_axis].any()


def test_ball_touching_plane():
    with pytest.raises(DomainTouchesPlaneError):
        build_ball_generator(1.0, 1.0, 0.05)
    with pytest.raises(GeometryError):
        build_ball_generator(2.0, 1.0, 0.0)


def test_refinement_quadruples_nodes():
    a = build_ball_generator(2.0, 1.0, 0.05).mesh.n_nodes
    b = build_ball_generator(2.0, 1.0, 0.025).mesh.n_nodes
    assert 3.4 < b / a < 4.6


def test_punch_hole(ball):
    assert punch_hole(ball, 0.0) is ball
    d = punch_hole(ball, 0.6)
    assert distance_to_plane(d) == pytest.approx(1.2)
    assert d.t.min() == pytest.approx(1.2, abs=1e-9)
    assert np.all(d.s >= 0.6 - 1e-12)
    # hole boundary is Dirichlet
    assert d.mesh.dirichlet[np.isclose(d.s, 0.6)].all()
    with pytest.raises(EmptyDomainError):
        punch_hole(ball, 1.5)
    with pytest.raises(InvalidStateError):
        punch_hole(d, 0.1)


def test_rectangle_distance_and_mirror_fixed_set():
    P = AmbientParams(4, 1, "planar")
    dom = build_rectangle((0.0, 1.0), (3.0, 4.0), 0.1, P, SymmetrySpec("mirror", (0.5, 0.0)))
    assert distance_to_plane(dom) == pytest.approx(3.0)
    G = group_from_preset(dom.symmetry, dom)
    fixed = fixed_point_set(dom, G)
    assert len(fixed) > 0 and np.allclose(dom.s[fixed], 0.5)
    triv = make_group([], dom)
    assert len(fixed_point_set(dom, triv)) == dom.mesh.n_nodes


def test_rotation_without_center_node_has_empty_fixed_set():
    P = AmbientParams(4, 1, "planar")
    dom = build_annulus((2.0, 3.0), 0.5, 1.0, 0.1, P, SymmetrySpec("dihedral-2", (2.0, 3.0)))
    rot = Isometry.rotation(math.pi, (2.0, 3.0))
    G = make_group([rot], dom)
    assert len(fixed_point_set(dom, G)) == 0


def test_fixed_point_set_incompatible(ball):
    other = build_ball_generator(2.0, 1.0, 0.1)
    G = make_group([], other)
    with pytest.raises(IncompatibleActionError):
        fixed_point_set(ball, G)


def test_interval_and_dump(tmp_path):
    dom = build_interval(0.0, math.pi, 0.1)
    assert dom.dim == 1 and dom.mesh.dirichlet.sum() == 2
    path = tmp_path / "mesh.txt"
    dump_mesh(build_ball_generator(2.0, 1.0, 0.2), path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# nodes")
    n = int(lines[0].split()[-1])
    assert lines[n + 1].startswith("# elements")
    assert len(lines[1].split()) == 4
