"""Outer limits along approach paths and pointwise cone estimates."""

import numpy as np
import pytest

from infcone import dsl
from infcone.cones import Status, cone_distance, contains_direction
from infcone.limits import (ApproachSpec, contingent_cone,
                            frechet_normal_cone, limiting_normal_cone,
                            normal_cone_at_infinity_total, outer_limit)
from infcone.sets import ClosedSet, SetError


def synthetic_approach(dim=2, levels=10):
    def sampler(j):
        return np.full((5, dim), float(j + 1))
    return ApproachSpec("synthetic", dim, sampler, levels)


class TestOuterLimit:
    def test_persistent_direction(self, fast_cfg):
        e1 = np.array([[1.0, 0.0]])
        res = outer_limit(lambda j, P: e1, synthetic_approach(), fast_cfg)
        assert res.cone.status == Status.RAYS
        assert contains_direction(res.cone, e1[0], 1e-6)
        assert res.converged
        assert res.persistence and len(res.persistence[0]) >= \
            fast_cfg.persistence_window

    def test_flicker_is_dropped(self, fast_cfg):
        e1 = np.array([[1.0, 0.0]])
        empty = np.zeros((0, 2))

        def field(j, P):
            return e1 if j % 2 == 0 else empty

        res = outer_limit(field, synthetic_approach(), fast_cfg)
        assert res.cone.is_zero
        assert not res.converged
        assert res.diagnostics["flicker"]

    def test_no_samples_is_empty(self, fast_cfg):
        ap = ApproachSpec("synthetic", 2,
                          lambda j: np.zeros((0, 2)), 10)
        res = outer_limit(lambda j, P: P, ap, fast_cfg)
        assert res.cone.is_empty

    def test_vanishing_tail_is_zero(self, fast_cfg):
        # samples keep coming but the field dies off after shell 3
        e1 = np.array([[1.0, 0.0]])

        def field(j, P):
            return e1 if j <= 3 else np.zeros((0, 2))

        res = outer_limit(field, synthetic_approach(), fast_cfg)
        assert res.cone.is_zero

    def test_full_flag_carries_sphere(self, fast_cfg):
        def field(j, P):
            return {"dirs": np.zeros((0, 2)), "full": True}

        res = outer_limit(field, synthetic_approach(), fast_cfg)
        assert res.cone.status == Status.RAYS
        for d in ([1.0, 0.0], [0.0, -1.0], [-0.6, 0.8]):
            assert contains_direction(res.cone, np.array(d), 0.05)

    def test_thread_count_does_not_change_result(self, fast_cfg):
        rot = np.array([[np.cos(0.004), np.sin(0.004)]])
        a = outer_limit(lambda j, P: rot, synthetic_approach(), fast_cfg)
        b = outer_limit(lambda j, P: rot, synthetic_approach(),
                        fast_cfg.replace(threads=8))
        assert cone_distance(a.cone, b.cone) == 0.0
        assert a.converged == b.converged


def make_set(text, dim, name="S"):
    return ClosedSet(dim, pred=dsl.parse_predicate(text, dim), name=name)


class TestPointwiseCones:
    def test_halfplane_normal(self, fast_cfg):
        s = make_set("v1 <= 0", 2)
        n = frechet_normal_cone(s, np.array([0.0, 1.0]), fast_cfg)
        assert n.status == Status.RAYS
        assert contains_direction(n, np.array([1.0, 0.0]), 0.02)
        assert not contains_direction(n, np.array([0.0, 1.0]), 0.1)

    def test_interior_normal_is_zero(self, fast_cfg):
        s = make_set("v1 <= 0", 2)
        assert limiting_normal_cone(s, np.array([-1.0, 0.0]),
                                    fast_cfg).is_zero

    def test_contingent_halfplane(self, fast_cfg):
        s = make_set("v1 <= 0", 2)
        t = contingent_cone(s, np.array([0.0, 0.0]), fast_cfg)
        for d in ([-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]):
            assert contains_direction(t, np.array(d), 0.05)
        assert not contains_direction(t, np.array([1.0, 0.0]), 0.05)

    def test_limiting_on_cross(self, fast_cfg):
        # union of the two axes: at the origin, limiting normals include
        # the normals of both branches
        s = make_set("v1 == 0 || v2 == 0", 2)
        n = limiting_normal_cone(s, np.zeros(2), fast_cfg)
        for d in ([1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]):
            assert contains_direction(n, np.array(d), 0.1)

    def test_nonmember_rejected(self, fast_cfg):
        s = make_set("v1 <= 0", 2)
        with pytest.raises(SetError):
            limiting_normal_cone(s, np.array([1.0, 0.0]), fast_cfg)


class TestAtInfinity:
    def test_total_cone_of_line(self, fast_cfg):
        s = make_set("v2 == 0", 2, "Line")
        res = normal_cone_at_infinity_total(s, fast_cfg)
        assert res.cone.status == Status.RAYS
        assert contains_direction(res.cone, np.array([0.0, 1.0]), 0.05)
        assert contains_direction(res.cone, np.array([0.0, -1.0]), 0.05)
        assert not contains_direction(res.cone, np.array([1.0, 0.0]), 0.1)
