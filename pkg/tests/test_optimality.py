"""Ordering cones, scalarization, weak efficiency, Fermat certificates."""

import json

import numpy as np
import pytest

from infcone.cones import Status, contains_direction
from infcone.dsl import parse_problem
from infcone.maps import MultiMap
from infcone.optimality import (FermatCertificate, OrderingCone,
                                check_cq_infinity, check_weak_efficient,
                                fermat_certificate, positive_polar,
                                scalarize, scalarize_subdiff)
from infcone.sets import SetError, full_space
from infcone.verdict import Verdict


def make_map(graph, n=1, m=1, name="F"):
    doc = json.dumps({"mappings": {name: {"n": n, "m": m, "graph": graph}}})
    return MultiMap.from_mapdef(parse_problem(doc).mappings[name])


@pytest.fixture(scope="module")
def pos1():
    return OrderingCone([[1.0]], [1.0], name="R+")


@pytest.fixture(scope="module")
def orthant():
    return OrderingCone([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0], name="R2+")


class TestOrderingCone:
    def test_unpointed_rejected(self):
        with pytest.raises(SetError):
            OrderingCone([[1.0, 0.0], [-1.0, 0.0]], [0.0, 1.0])

    def test_zero_generator_rejected(self):
        with pytest.raises(SetError):
            OrderingCone([[0.0, 0.0]], [1.0, 1.0])

    def test_positive_polar_of_orthant(self, orthant, fast_cfg):
        kp = positive_polar(orthant, fast_cfg)
        assert kp.status == Status.RAYS
        s = 1.0 / np.sqrt(2.0)
        assert contains_direction(kp, np.array([s, s]), 0.02)
        assert not contains_direction(kp, np.array([-1.0, 0.0]), 0.05)

    def test_membership(self, orthant, fast_cfg):
        assert orthant.contains(np.array([2.0, 0.5]), fast_cfg)
        assert not orthant.contains(np.array([-1.0, 1.0]), fast_cfg)


class TestScalarize:
    def test_half_line_oracle(self, pos1, fast_cfg):
        assert scalarize(pos1, pos1.e, [0.0], fast_cfg) == \
            pytest.approx(0.0, abs=1e-6)
        assert scalarize(pos1, pos1.e, [3.0], fast_cfg) == \
            pytest.approx(3.0, abs=1e-6)
        assert scalarize(pos1, pos1.e, [-2.0], fast_cfg) == \
            pytest.approx(-2.0, abs=1e-6)

    def test_orthant_oracle(self, orthant, fast_cfg):
        # phi(y) = max(y1, y2) for K = R^2_+, e = (1, 1)
        # bisection against sampled membership: grid-slack error ~2e-3
        assert scalarize(orthant, orthant.e, [1.0, 2.0], fast_cfg) == \
            pytest.approx(2.0, abs=0.01)
        assert scalarize(orthant, orthant.e, [-1.0, -3.0], fast_cfg) == \
            pytest.approx(-1.0, abs=0.01)

    def test_subdiff_active_face(self, orthant, fast_cfg):
        sl = scalarize_subdiff(orthant, orthant.e, [1.0, 2.0], fast_cfg)
        assert len(sl.points) >= 1
        # the tolerance band smears the face a little; everything stays
        # near the (0, 1) vertex and the vertex itself is hit
        assert min(np.linalg.norm(p - np.array([0.0, 1.0]))
                   for p in sl.points) <= 0.05
        assert all(p[1] >= 0.8 for p in sl.points)

    def test_subdiff_kink(self, orthant, fast_cfg):
        # y1 = y2: both faces are active, the subdifferential is a segment
        sl = scalarize_subdiff(orthant, orthant.e, [2.0, 2.0], fast_cfg)
        got = np.array(sl.points)
        assert got[:, 0].min() <= 0.1 and got[:, 0].max() >= 0.9


class TestWeakEfficiency:
    def test_square_min_at_zero(self, pos1, fast_cfg):
        F = make_map("v2 == v1^2", name="Sq")
        v = check_weak_efficient(F, full_space(1), pos1, [0.0], fast_cfg)
        assert v.ok

    def test_interior_value_fails(self, pos1, fast_cfg):
        F = make_map("v2 == v1^2", name="Sq")
        v = check_weak_efficient(F, full_space(1), pos1, [1.0], fast_cfg)
        assert v.status == "Fail"
        assert v.witness["phi"] < 0


class TestFermat:
    def test_precondition_refusal(self, pos1, fast_cfg):
        F = make_map("v2 == v1^2", name="Sq")
        pre = {"weak_efficient": Verdict.failed({"y": [0.0]}),
               "cq_infinity": Verdict.passed()}
        out = fermat_certificate(F, full_space(1), pos1, [0.0], fast_cfg,
                                 preconditions=pre)
        assert isinstance(out, Verdict)
        assert out.status == "Inconclusive"
        assert out.reason.startswith("precondition not passed")

    def test_flat_tail_certificate(self, pos1, fast_cfg):
        # F(x) = {exp(-x^2)}: values decrease to 0 at infinity, so 0 is
        # weakly efficient and the multiplier is c* = 1
        F = make_map("v2 == exp(-v1^2)", name="FlatTail")
        out = fermat_certificate(F, full_space(1), pos1, [0.0], fast_cfg)
        assert isinstance(out, FermatCertificate)
        assert out.c_star[0] == pytest.approx(1.0, abs=0.05)
        assert out.residual <= 1e-2

    def test_cq_trivial_constraint(self, fast_cfg):
        F = make_map("v2 == exp(-v1^2)", name="FlatTail")
        v = check_cq_infinity(F, full_space(1), [0.0], fast_cfg)
        assert v.ok

    def test_cq_inconclusive_off_asymptotic_value(self, fast_cfg):
        # ybar = 0 is not an asymptotic value of the identity, so the
        # value-window cone is empty and the check declines to answer
        F = make_map("v2 == v1", name="Id")
        v = check_cq_infinity(F, full_space(1), [0.0], fast_cfg)
        assert v.status == "Inconclusive"
        assert "empty" in v.reason
