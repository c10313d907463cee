"""Property-based checks for the cone algebra and scalarization."""

import math

import numpy as np
from hypothesis import given, settings, strategies as st

from infcone import dsl
from infcone.cones import (canonicalize, cone_distance, contains_direction,
                           dedup_directions, in_convex_cone, polar_cone,
                           slice_hmap, hslice_distance, HSlice)
from infcone.config import RunConfig
from infcone.optimality import OrderingCone, scalarize

CFG = RunConfig(shells=4, samples_per_shell=200, probes_per_level=40)
ORTHANT = OrderingCone([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])

SLOW = settings(max_examples=25, deadline=None)
unit_angle = st.floats(min_value=0.0, max_value=2.0 * math.pi,
                       allow_nan=False)
coord = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False,
                  allow_infinity=False)


def dirs_from_angles(angles):
    return np.array([[math.cos(a), math.sin(a)] for a in angles])


@SLOW
@given(st.lists(unit_angle, min_size=1, max_size=6))
def test_canonicalize_idempotent(angles):
    c = canonicalize(dirs_from_angles(angles), 2, nonempty=True)
    again = canonicalize(c.rays, 2, nonempty=True) if len(c.rays) else c
    assert cone_distance(c, again) <= 1e-7


@SLOW
@given(st.lists(unit_angle, min_size=1, max_size=6))
def test_dedup_separation(angles):
    out = dedup_directions(dirs_from_angles(angles), 0.05)
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            assert float(out[i] @ out[j]) < math.cos(0.05) + 1e-12


@SLOW
@given(st.lists(unit_angle, min_size=1, max_size=4))
def test_polar_pairing_nonpositive(angles):
    c = canonicalize(dirs_from_angles(angles), 2, nonempty=True)
    p = polar_cone(c)
    if c.rays is None or len(c.rays) == 0 or p.status != "rays":
        return
    # every polar ray pairs nonpositively (up to grid slack) with the cone
    sup = float(np.max(p.rays @ c.rays.T))
    assert sup <= math.sin(2.0 * p.resolution) + 1e-9


@SLOW
@given(st.lists(unit_angle, min_size=1, max_size=3),
       st.lists(st.floats(min_value=0.0, max_value=3.0), min_size=1,
                max_size=3))
def test_convex_cone_closed_under_combinations(angles, weights):
    G = dirs_from_angles(angles)
    k = min(len(G), len(weights))
    x = np.sum(G[:k] * np.array(weights[:k])[:, None], axis=0)
    if np.linalg.norm(x) < 1e-9:
        return
    assert in_convex_cone(G, x, 1e-6)


@SLOW
@given(unit_angle, st.floats(min_value=0.1, max_value=10.0))
def test_slice_homogeneity(angle, lam):
    # graph-space ray cone in R^1 x R^1: slice(lam*v) = lam*slice(v)
    g = canonicalize(dirs_from_angles([angle]), 2, nonempty=True)
    a = slice_hmap(g, np.array([lam]), 0.01, 1)
    b = slice_hmap(g, np.array([1.0]), 0.01, 1)
    if b.empty:
        assert a.empty
        return
    scaled = HSlice(1, points=[lam * p for p in b.points],
                    recessions=list(b.recessions))
    assert hslice_distance(a, scaled) <= 1e-6 * (1.0 + lam)


@SLOW
@given(coord, coord, coord, coord)
def test_scalarize_lipschitz(y1, y2, z1, z2):
    y = np.array([y1, y2])
    z = np.array([z1, z2])
    fy = scalarize(ORTHANT, ORTHANT.e, y, CFG)
    fz = scalarize(ORTHANT, ORTHANT.e, z, CFG)
    gap = float(np.linalg.norm(y - z))
    # phi = max(y1, y2): 1-Lipschitz up to the sampled-membership slack
    assert abs(fy - fz) <= gap + 0.02 * (1.0 + np.linalg.norm(y)
                                         + np.linalg.norm(z))


@SLOW
@given(coord, coord)
def test_scalarize_sign_is_interior_membership(y1, y2):
    y = np.array([y1, y2])
    phi = scalarize(ORTHANT, ORTHANT.e, y, CFG)
    exact = max(y1, y2)
    assert abs(phi - exact) <= 0.02 * (1.0 + np.linalg.norm(y))
    if exact < -0.1:
        assert phi < 0.0  # strictly inside -K
    if exact > 0.1:
        assert phi > 0.0


@SLOW
@given(st.lists(st.tuples(coord, coord), min_size=1, max_size=20))
def test_predicate_status_matches_sign(pts):
    pred = dsl.parse_predicate("v1 >= v2", 2)
    P = np.array(pts, dtype=float)
    st_ = dsl.eval_predicate(pred, P, 1e-9)
    for row, s in zip(P, np.atleast_1d(st_)):
        g = row[0] - row[1]
        if g > 1e-6:
            assert s == dsl.INSIDE
        elif g < -1e-6:
            assert s == dsl.OUTSIDE


@SLOW
@given(st.lists(unit_angle, min_size=1, max_size=3))
def test_double_polar_contains_generators(angles):
    c = canonicalize(dirs_from_angles(angles), 2, nonempty=True)
    dd = polar_cone(polar_cone(c))
    if c.status != "rays":
        return
    for r in c.rays:
        assert dd.status == "rays" and \
            contains_direction(dd, r, 4.0 * dd.resolution + 0.01)
