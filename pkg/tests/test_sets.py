"""Closed sets: membership, sampling shells, projections, constructors."""

import numpy as np
import pytest

from infcone import dsl
from infcone.sets import (ClosedSet, SetError, Shell, epigraph_set,
                          full_space, graph_of_function, indicator_graph,
                          intersection_set, points_to_csv, product_set)


def make_set(text, dim, name="S"):
    return ClosedSet(dim, pred=dsl.parse_predicate(text, dim), name=name)


@pytest.fixture(scope="module")
def halfplane():
    return make_set("v1 >= v2", 2, "Half")


@pytest.fixture(scope="module")
def disk():
    return make_set("v1^2 + v2^2 <= 1", 2, "Disk")


class TestMembership:
    def test_status_values(self, halfplane):
        P = np.array([[2.0, 1.0], [1.0, 1.0], [0.0, 1.0]])
        assert list(halfplane.status(P)) == [dsl.INSIDE, dsl.BOUNDARY,
                                             dsl.OUTSIDE]

    def test_contains(self, disk):
        assert disk.contains(np.array([0.5, 0.5]))
        assert not disk.contains(np.array([1.0, 1.0]))

    def test_full_space(self):
        R2 = full_space(2)
        assert R2.contains(np.array([1e6, -1e6]))


class TestSampling:
    def test_members_in_shell(self, halfplane, fast_cfg):
        sh = Shell((0, 1), 10.0, 20.0)
        P = halfplane.sample_shell(sh, 300, fast_cfg)
        assert len(P) > 100
        assert (halfplane.status(P) >= dsl.BOUNDARY).all()
        r = np.linalg.norm(P, axis=1)
        assert (r >= 10.0 - 1e-6).all() and (r <= 20.0 + 1e-6).all()

    def test_boundary_bias(self, halfplane, fast_cfg):
        # roughly half the draws get pushed onto active boundaries
        sh = Shell((0, 1), 10.0, 20.0)
        P = halfplane.sample_shell(sh, 400, fast_cfg)
        frac = np.mean(halfplane.status(P) == dsl.BOUNDARY)
        assert frac > 0.2

    def test_fiber_center(self, fast_cfg):
        g = make_set("v2 == v1^2", 2, "Par")
        sh = Shell((0,), 5.0, 8.0, center=np.array([30.0]), rho=40.0)
        P = g.sample_shell(sh, 200, fast_cfg)
        assert len(P) > 0
        assert np.allclose(P[:, 1], P[:, 0] ** 2, atol=1e-6)

    def test_deterministic(self, halfplane, fast_cfg):
        sh = Shell((0, 1), 10.0, 20.0)
        a = halfplane.sample_shell(sh, 100, fast_cfg, label="t")
        b = halfplane.sample_shell(sh, 100, fast_cfg, label="t")
        assert np.array_equal(a, b)

    def test_bad_shell(self):
        with pytest.raises(SetError):
            Shell((0,), 5.0, 2.0)
        with pytest.raises(SetError):
            Shell((), 1.0, 2.0)


class TestProjection:
    def test_halfplane_oracle(self, fast_cfg):
        s = make_set("v1 <= 0", 2)
        res = s.project(np.array([3.0, 1.0]), fast_cfg)
        assert res.dist == pytest.approx(3.0, abs=1e-6)
        assert np.allclose(res.minimizers[0], [0.0, 1.0], atol=1e-6)

    def test_disk_oracle(self, disk, fast_cfg):
        res = disk.project(np.array([2.0, 0.0]), fast_cfg)
        assert res.dist == pytest.approx(1.0, abs=1e-6)
        assert np.allclose(res.minimizers[0], [1.0, 0.0], atol=1e-5)

    def test_member_projects_to_itself(self, disk, fast_cfg):
        q = np.array([0.1, -0.2])
        res = disk.project(q, fast_cfg)
        assert res.dist == 0.0
        assert np.array_equal(res.minimizers[0], q)

    def test_parabola_oracle(self, fast_cfg):
        # nearest point of v2 = v1^2 to (0, 2): v1 = sqrt(3/2)
        g = make_set("v2 == v1^2", 2)
        res = g.project(np.array([0.0, 2.0]), fast_cfg)
        x = np.sqrt(1.5)
        d = np.linalg.norm([x, x ** 2] - np.array([0.0, 2.0]))
        assert res.dist == pytest.approx(d, abs=1e-5)


class TestConstructors:
    def test_product(self, halfplane, disk):
        p = product_set(halfplane, disk)
        assert p.dim == 4 and p.split == (2, 2)
        assert p.contains(np.array([2.0, 1.0, 0.0, 0.0]))
        assert not p.contains(np.array([2.0, 1.0, 2.0, 0.0]))

    def test_intersection(self, halfplane, disk):
        s = intersection_set(halfplane, disk)
        assert s.contains(np.array([0.5, 0.0]))
        assert not s.contains(np.array([0.0, 0.5]))
        assert not s.contains(np.array([5.0, 0.0]))

    def test_intersection_dim_mismatch(self, disk):
        with pytest.raises(SetError):
            intersection_set(disk, full_space(3))

    def test_indicator_graph(self, disk):
        g = indicator_graph(disk, 1)
        assert g.dim == 3 and g.split == (2, 1)
        assert g.contains(np.array([0.5, 0.0, 0.0]))
        assert not g.contains(np.array([0.5, 0.0, 0.1]))
        assert not g.contains(np.array([2.0, 0.0, 0.0]))

    def test_function_graph_and_epigraph(self):
        fd = dsl.parse_problem(
            '{"functions": {"f": {"n": 1, "value": "v1^2"}}}').functions["f"]
        g = graph_of_function(fd)
        e = epigraph_set(fd)
        assert g.contains(np.array([2.0, 4.0]))
        assert not g.contains(np.array([2.0, 5.0]))
        assert e.contains(np.array([2.0, 5.0]))
        assert not e.contains(np.array([2.0, 3.0]))


def test_points_to_csv():
    txt = points_to_csv(np.array([[1.0, 2.0], [3.0, 4.0]]))
    lines = txt.strip().splitlines()
    assert lines[0] == "idx,coord0,coord1"
    assert lines[1].startswith("0,1,")
