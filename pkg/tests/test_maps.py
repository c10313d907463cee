"""Set-valued mappings: coderivatives, distances, subdifferentials."""

import json

import numpy as np
import pytest

from infcone.cones import INF, Status, contains_direction, slice_hmap
from infcone.dsl import parse_problem
from infcone.maps import (MultiMap, coderivative_cone_at, dist_to_preimage,
                          distance_to_image, function_value, jelonek_set,
                          point_subdifferential)
from infcone.sets import SetError


def make_map(graph, n=1, m=1, name="F"):
    doc = json.dumps({"mappings": {name: {"n": n, "m": m, "graph": graph}}})
    return MultiMap.from_mapdef(parse_problem(doc).mappings[name])


def make_func(spec, name="f"):
    doc = json.dumps({"functions": {name: spec}})
    return parse_problem(doc).functions[name]


ABS = {"n": 1, "pieces": [{"where": "v1 >= 0", "value": "v1"},
                          {"where": "v1 <= 0", "value": "-v1"}]}


class TestMultiMap:
    def test_dimensions(self):
        F = make_map("v2 == 2*v1")
        assert (F.n, F.m) == (1, 1)
        assert F.graph.split == (1, 1)

    def test_values_near(self, fast_cfg):
        F = make_map("v2 == v1^2")
        Y = F.values_near(np.array([3.0]), np.array([9.0]), 1.0, 10,
                          fast_cfg)
        assert len(Y) > 0
        assert np.allclose(Y, 9.0, atol=1e-6)

    def test_explicit_pieces(self):
        F = make_map("v2 == 2*v1")
        pieces = F.explicit_pieces()
        assert pieces is not None and len(pieces) == 1
        G = make_map("v2^2 == v1")
        assert G.explicit_pieces() is None


class TestCoderivative:
    def test_linear_map_adjoint(self, fast_cfg):
        # y = 2x: D*F(x,y)(v) = {2v}
        F = make_map("v2 == 2*v1")
        N = coderivative_cone_at(F, 1.0, 2.0, fast_cfg)
        sl = slice_hmap(N, np.array([1.0]), fast_cfg.ang_tol, 1)
        # cone rays are grid-snapped, so slice points carry O(step) error
        assert any(abs(p[0] - 2.0) <= 0.02 for p in sl.points)
        sl_neg = slice_hmap(N, np.array([-1.0]), fast_cfg.ang_tol, 1)
        assert any(abs(p[0] + 2.0) <= 0.02 for p in sl_neg.points)

    def test_interior_graph_point_rejected(self, fast_cfg):
        F = make_map("v2 == 2*v1")
        with pytest.raises(SetError):
            coderivative_cone_at(F, 1.0, 5.0, fast_cfg)


class TestDistances:
    def test_distance_to_image(self, fast_cfg):
        F = make_map("v2 == v1^2")
        assert distance_to_image(F, 2.0, 1.0, fast_cfg) == \
            pytest.approx(3.0, abs=1e-6)
        assert distance_to_image(F, 2.0, 4.0, fast_cfg) == \
            pytest.approx(0.0, abs=1e-6)

    def test_empty_image(self, fast_cfg):
        # graph restricted to v1 >= 1: F(x) empty for x < 1
        F = make_map("v2 == v1 && v1 >= 1")
        assert distance_to_image(F, 0.0, 0.0, fast_cfg) == INF

    def test_dist_to_preimage(self, fast_cfg):
        F = make_map("v2 == v1^2")
        assert dist_to_preimage(F, 4.0, 0.0, fast_cfg) == \
            pytest.approx(2.0, abs=1e-6)
        assert dist_to_preimage(F, -1.0, 0.0, fast_cfg) == INF

    def test_discrete_atoms(self, fast_cfg):
        doc = json.dumps({"mappings": {"A": {
            "n": 1, "m": 1,
            "discrete": {"atom": "v1^2", "domain": "naturals"}}}})
        F = MultiMap.from_mapdef(parse_problem(doc).mappings["A"])
        assert distance_to_image(F, 3.0, 10.0, fast_cfg) == \
            pytest.approx(1.0)
        assert distance_to_image(F, 2.5, 0.0, fast_cfg) == INF
        assert dist_to_preimage(F, 9.0, 0.0, fast_cfg) == pytest.approx(3.0)


class TestJelonek:
    def test_hyperbola_asymptotic_value(self, fast_cfg):
        # F(x) = 1/x: the only asymptotic value in the window is 0
        F = make_map("v1 * v2 == 1")
        window = np.array([[-2.0, 2.0]])
        js = jelonek_set(F, window, fast_cfg, mesh=0.1)
        assert len(js.values) >= 1
        assert min(abs(v[0]) for v in js.values) <= 0.15
        assert all(abs(v[0]) <= 0.3 for v in js.values)


class TestSubdifferential:
    def test_smooth_point(self, fast_cfg):
        f = make_func({"n": 1, "value": "v1^2"})
        basic, singular = point_subdifferential(f, 1.0, fast_cfg)
        assert any(abs(p[0] - 2.0) <= 0.05 for p in basic.points)
        assert singular.is_zero

    def test_abs_at_kink(self, fast_cfg):
        f = make_func(ABS)
        basic, singular = point_subdifferential(f, 0.0, fast_cfg)
        got = sorted(p[0] for p in basic.points)
        assert got[0] == pytest.approx(-1.0, abs=0.05)
        assert got[-1] == pytest.approx(1.0, abs=0.05)
        assert singular.is_zero

    def test_function_value_piecewise(self):
        f = make_func(ABS)
        assert function_value(f, -3.0) == 3.0
        g = make_func({"n": 1,
                       "pieces": [{"where": "v1 >= 1", "value": "v1"}]})
        with pytest.raises(SetError):
            function_value(g, 0.0)
