"""Acceptance battery: one pass/fail line per criterion.

Runs the bundled fixture suite at full budgets (once per thread count)
and checks the frozen expectations plus the cross-cutting properties.
Budgets are wall-clock seconds measured on the single-threaded run.
"""

import json
import math
import time

import numpy as np
import pytest

from infcone.cones import (canonicalize, contains_direction, polar_cone,
                           slice_hmap, hslice_distance, HSlice)
from infcone.config import RunConfig
from infcone.limits import (frechet_normal_cone, limiting_normal_cone,
                            normal_cone_at_infinity)
from infcone.maps import check_prop314
from infcone.sets import Shell
from infcone.suite import (fixture_function, fixture_set, run_paper_suite)

pytestmark = pytest.mark.acceptance


def _timed_suite(threads):
    times = {}

    def progress(name, elapsed):
        times[name] = elapsed

    t0 = time.perf_counter()
    summary = run_paper_suite(cfg=RunConfig(threads=threads),
                              progress=progress)
    return summary, times, time.perf_counter() - t0


@pytest.fixture(scope="module")
def suite1():
    return _timed_suite(1)


@pytest.fixture(scope="module")
def suite8():
    return _timed_suite(8)


def _report(num, desc, ok):
    print("ACCEPTANCE %2d %-42s %s" % (num, desc, "PASS" if ok else "FAIL"))
    assert ok, "acceptance criterion %d failed: %s" % (num, desc)


def _cases(summary, prefix):
    return [c for c in summary["cases"] if c["name"].startswith(prefix)]


def _all_pass(summary, prefix, times, budget):
    cs = _cases(summary, prefix)
    ok = bool(cs) and all(c["status"] == "Pass" for c in cs)
    in_budget = all(times[c["name"]] <= budget for c in cs)
    return ok and in_budget


def test_criterion_1_planar_cones(suite1):
    summary, times, _ = suite1
    _report(1, "planar normal cones at infinity",
            _all_pass(summary, "ex-", times, 60.0))


def test_criterion_2_coderivatives(suite1):
    summary, times, _ = suite1
    _report(2, "coderivative slices at infinity",
            _all_pass(summary, "cod-", times, 60.0))


def test_criterion_3_subdifferentials(suite1):
    summary, times, _ = suite1
    _report(3, "subdifferentials at infinity",
            _all_pass(summary, "subdiff-", times, 120.0))


def test_criterion_4_wellposed_battery(suite1):
    summary, times, _ = suite1
    _report(4, "well-posedness battery",
            _all_pass(summary, "wellposed-", times, 300.0))


def test_criterion_5_criterion_battery(suite1):
    summary, times, _ = suite1
    _report(5, "coderivative criterion battery",
            _all_pass(summary, "criterion-", times, 300.0))


def test_criterion_6_fermat(suite1):
    summary, times, _ = suite1
    _report(6, "optimality certificates",
            _all_pass(summary, "fermat-", times, 300.0))


def test_criterion_7_property_suites(suite1):
    summary, _, _ = suite1
    cfg = RunConfig()
    ok = True

    # regular-vs-limiting field agreement on the planar fixtures
    for name, ybar in (("Halfplane", 0.0), ("ExpEpigraph", 0.0)):
        S = fixture_set(name, split=(1, 1))
        res = normal_cone_at_infinity(S, [ybar], cfg, method="both")
        agree = res.diagnostics.get("limiting_agreement")
        ok = ok and agree is not None and agree <= 2.0 * cfg.ang_tol

    # regular normals are limiting normals at 50 probed points per set
    for name in ("Halfplane", "ExpEpigraph"):
        S = fixture_set(name)
        P = S.sample_shell(Shell(range(S.dim), 2.0, 10.0), 50, cfg,
                           label="acc7")[:50]
        for x in P:
            fn = frechet_normal_cone(S, x, cfg)
            ln = limiting_normal_cone(S, x, cfg)
            if fn.status != "rays":
                continue
            if ln.status != "rays":
                ok = False
                break
            for r in fn.rays:
                if not contains_direction(ln, r, 2.0 * cfg.ang_tol):
                    ok = False
                    break

    # double polar is the convex conic hull, within 2 grid steps
    c = canonicalize(np.array([[1.0, 0.0], [0.0, 1.0]]), 2, nonempty=True)
    dd = polar_cone(polar_cone(c))
    diag = np.array([1.0, 1.0]) / math.sqrt(2.0)
    ok = ok and contains_direction(dd, diag, 2.0 * 2.0 * dd.resolution)
    ok = ok and not contains_direction(dd, np.array([-1.0, 0.0]), 0.05)

    # slice positive homogeneity is exact at the ray level
    s = 1.0 / math.sqrt(2.0)
    g = canonicalize(np.array([[s, -s]]), 2, nonempty=True)
    for lam in (0.5, 3.0):
        a = slice_hmap(g, np.array([lam]), cfg.ang_tol, 1)
        b = slice_hmap(g, np.array([1.0]), cfg.ang_tol, 1)
        d = hslice_distance(a, HSlice(1, points=[lam * p for p in b.points]))
        ok = ok and d <= 1e-9

    # graph-cone consistency of the subdifferential on smooth fixtures
    for fname in ("SinFn", "ExpFn"):
        v = check_prop314(fixture_function(fname), 0.0, cfg)
        ok = ok and v.status == "Pass"

    # intersection rule: a passing pair and a CQ-violating pair
    ok = ok and _cases(summary, "isect-exp-belowtwo")[0]["status"] == "Pass"
    ok = ok and _cases(summary, "isect-cq-violated")[0]["status"] == "Pass"

    _report(7, "cone/subdifferential property suites", ok)


def test_criterion_8_sum_chain_verifiers(suite1):
    summary, times, _ = suite1
    ok = _all_pass(summary, "sum-", times, 300.0) and \
        _all_pass(summary, "chain-", times, 300.0)
    _report(8, "sum and chain rule verifiers", ok)


def test_criterion_9_determinism(suite1, suite8):
    a = json.dumps(suite1[0], sort_keys=True)
    b = json.dumps(suite8[0], sort_keys=True)
    _report(9, "bit-identical summaries across thread counts", a == b)


def test_criterion_10_total_budget(suite1):
    _, _, total = suite1
    _report(10, "full verification under 15 minutes", total <= 900.0)
