import pytest

from stfr.errors import ConfigurationError
from stfr.mesh import BOUNDARY_T0, BOUNDARY_TT, build_mesh


def test_single_element_wraps_to_itself():
    m = build_mesh(1, 1)
    assert m.neighbor(0, 0, 1) == (0, 0) and m.neighbor(0, 0, 2) == (0, 0)
    assert m.neighbor(0, 0, 3) == BOUNDARY_T0 and m.neighbor(0, 0, 4) == BOUNDARY_TT


def test_geometry_of_2x2():
    g = build_mesh(2, 2).geometry
    assert (g.dx, g.dt, g.J, g.J_1D) == (1.0, 1.0, 0.25, 0.5)


def test_timeslab_counting():
    m = build_mesh(8, 8)
    assert m.n_elements == 64
    assert m.timeslab(0) == [(ks, 0) for ks in range(8)]
    assert [kt for kt, _ in m.timeslabs()] == list(range(8))


def test_periodic_and_temporal_neighbours():
    m = build_mesh(4, 3)
    assert m.neighbor(0, 1, 1) == (3, 1) and m.neighbor(3, 1, 2) == (0, 1)
    assert m.neighbor(2, 1, 3) == (2, 0) and m.neighbor(2, 1, 4) == (2, 2)
    assert m.neighbor(2, 2, 4) == BOUNDARY_TT
    with pytest.raises(ConfigurationError):
        m.neighbor(0, 0, 5)


def test_physical_coordinates():
    m = build_mesh(4, 2, (-1.0, 1.0), (0.0, 1.0))
    x = m.physical_x([-1.0, 1.0])
    assert x[0, 0] == -1.0 and x[-1, 1] == pytest.approx(1.0)
    assert m.physical_t([1.0])[-1, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("args", [(0, 1), (1, 0), (2, 2, (1.0, 1.0)), (2, 2, (0.0, 1.0), (1.0, 0.0))])
def test_invalid_meshes(args):
    with pytest.raises(ConfigurationError):
        build_mesh(*args)
