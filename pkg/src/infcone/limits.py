"""Outer-limit sampling engine and the normal-cone computations on it.

outer_limit discretizes a Painleve-Kuratowski outer limit of a direction
field: the field is evaluated on samples drawn shell by shell along an
approach (to a point, or to infinity with/without a value window), and a
direction survives when it is matched in every shell of a tail run.  All
normal cones -- contingent, Frechet, limiting, at infinity with a value,
at infinity total -- reduce to this engine plus the closed-set oracles.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cones import (RayCone, Status, canonicalize, cone_distance,
                    cone_intersect, cone_negate, cone_sum,
                    contains_direction, dedup_directions, in_convex_cone)
from .grids import grid_sizes_from_config, sphere_grid
from .sets import ClosedSet, SetError, Shell
from .verdict import Verdict


class ApproachSpec:
    """How base points approach the limit: a sampler per shell level.

    sampler(j) returns the shell-j base points; levels is the number of
    shells.  The constructors below cover the three approach modes.
    """

    __slots__ = ("mode", "dim", "sampler", "levels")

    def __init__(self, mode, dim, sampler, levels):
        self.mode = mode
        self.dim = int(dim)
        self.sampler = sampler
        self.levels = int(levels)

    @classmethod
    def to_infinity_with_value(cls, S, ybar, cfg, label=""):
        """x-block escapes through radius shells, y-block stays near ybar."""
        if S.split is None:
            raise SetError("at-infinity-with-value needs split metadata")
        n, m = S.split
        ybar = np.asarray(ybar, dtype=float).reshape(m)

        def sampler(j):
            sh = Shell(range(n), cfg.radius(j), cfg.radius(j + 1),
                       center=ybar, rho=cfg.rho(j))
            return S.sample_shell(sh, cfg.samples_per_shell, cfg,
                                  label="%s|j%d" % (label, j))

        return cls("to_infinity_with_value", S.dim, sampler, cfg.shells)

    @classmethod
    def to_infinity(cls, S, cfg, label=""):
        """All coordinates escape together through radius shells."""

        def sampler(j):
            sh = Shell(range(S.dim), cfg.radius(j), cfg.radius(j + 1))
            return S.sample_shell(sh, cfg.samples_per_shell, cfg,
                                  label="%s|t%d" % (label, j))

        return cls("to_infinity", S.dim, sampler, cfg.shells)

    @classmethod
    def to_point(cls, x, cfg, label="", levels=None, start_level=3):
        """Probe points in shrinking balls around x (not necessarily in S)."""
        x = np.asarray(x, dtype=float)
        dim = x.shape[0]
        levels = levels if levels is not None else cfg.shells

        def sampler(j):
            rng = cfg.rng("topoint", label, j)
            d = cfg.delta(start_level + j)
            u = rng.standard_normal((cfg.probes_per_level, dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            rad = d * rng.random(cfg.probes_per_level) ** (1.0 / dim)
            return x + u * rad[:, None]

        return cls("to_point", dim, sampler, levels)


class LimsupResult:
    __slots__ = ("cone", "persistence", "shells_used", "converged",
                 "diagnostics")

    def __init__(self, cone, persistence, shells_used, converged,
                 diagnostics=None):
        self.cone = cone
        self.persistence = persistence  # list of shell-index lists per ray
        self.shells_used = int(shells_used)
        self.converged = bool(converged)
        self.diagnostics = diagnostics or {}

    def __repr__(self):
        return "LimsupResult(%r, shells=%d, converged=%s)" % (
            self.cone, self.shells_used, self.converged)

    def to_json(self):
        return {"cone": self.cone.to_json(),
                "persistence": self.persistence,
                "shells_used": self.shells_used,
                "converged": self.converged,
                "diagnostics": self.diagnostics}


def _normalize_field_output(out, dim):
    if isinstance(out, dict):
        dirs = np.asarray(out.get("dirs"), dtype=float).reshape(-1, dim)
        return dirs, bool(out.get("full", False))
    dirs = np.asarray(out, dtype=float).reshape(-1, dim)
    return dirs, False


def _persistent_mask(cands, shell_dirs, shell_full, sampled, last, window,
                     cos_thr):
    """Which candidates are matched in a tail run ending at shell `last`.

    A shell matches a candidate when it is full-flagged or contains a
    direction within the angular tolerance; the run must have length >=
    window.  Returns (mask, runs) where runs[i] is the list of matched
    shell indices of candidate i's tail run (empty when not persistent).
    """
    k = len(cands)
    mask = np.zeros(k, dtype=bool)
    runs = [[] for _ in range(k)]
    if k == 0 or last < window - 1:
        return mask, runs
    matched = np.zeros((last + 1, k), dtype=bool)
    for j in range(last + 1):
        if not sampled[j]:
            continue
        if shell_full[j]:
            matched[j, :] = True
        elif len(shell_dirs[j]):
            matched[j] = np.max(cands @ shell_dirs[j].T, axis=1) >= cos_thr
    for i in range(k):
        run = 0
        j = last
        while j >= 0 and matched[j, i]:
            run += 1
            j -= 1
        if run >= window:
            mask[i] = True
            runs[i] = list(range(j + 1, last + 1))
    return mask, runs


def outer_limit(field, approach, cfg):
    """Tail-persistent directions of `field` along `approach`.

    field(j, points) -> direction array or {"dirs": ..., "full": bool};
    the full flag marks shells whose samples generate every direction
    (e.g. isolated atoms).  Empty iff the final persistence window saw no
    samples at all; ZeroOnly when samples exist but no direction persists.
    converged=False when the estimate still moved at the last shell or
    some direction flickered in the final window without persisting.
    """
    dim = approach.dim
    J = approach.levels
    window = cfg.persistence_window

    def eval_shell(j):
        P = approach.sampler(j)
        if len(P) == 0:
            return False, np.zeros((0, dim)), False, 0
        dirs, full = _normalize_field_output(field(j, P), dim)
        if len(dirs):
            nrm = np.linalg.norm(dirs, axis=1, keepdims=True)
            keep = nrm[:, 0] > 1e-12
            dirs = dirs[keep] / nrm[keep]
            dirs = dedup_directions(dirs, cfg.ang_tol / 2.0)
        return True, dirs, full, len(P)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            rows = list(ex.map(eval_shell, range(J)))
    else:
        rows = [eval_shell(j) for j in range(J)]
    sampled = [r[0] for r in rows]
    shell_dirs = [r[1] for r in rows]
    shell_full = [r[2] for r in rows]
    counts = [r[3] for r in rows]

    all_dirs = [d for d in shell_dirs if len(d)]
    if any(shell_full):
        # full-flagged shells generate every direction; seed the candidate
        # pool with a sphere grid so they can carry the whole sphere
        grid, _ = sphere_grid(dim)
        all_dirs.append(grid)
    cands = np.vstack(all_dirs) if all_dirs else np.zeros((0, dim))
    if len(cands):
        cands = dedup_directions(cands, cfg.ang_tol / 2.0)
    cos_thr = np.cos(cfg.ang_tol)

    mask, runs = _persistent_mask(cands, shell_dirs, shell_full, sampled,
                                  J - 1, window, cos_thr)
    tail_sampled = any(sampled[J - window:])
    diagnostics = {"samples_per_shell": counts,
                   "candidates": int(len(cands))}

    if not tail_sampled:
        cone = RayCone.empty(dim)
        persistence = []
    elif not mask.any():
        cone = RayCone.zero(dim)
        persistence = []
    else:
        cone = canonicalize(cands[mask], dim, nonempty=True)
        # map kept canonical rays back to candidate persistence runs
        persistence = []
        kept_idx = np.flatnonzero(mask)
        for ray in cone.rays:
            best = kept_idx[int(np.argmax(cands[kept_idx] @ ray))]
            persistence.append(runs[best])

    # convergence: drop the last shell, recompute, compare; also flag
    # directions that matched part of the final window without persisting
    prev_mask, _ = _persistent_mask(cands, shell_dirs, shell_full, sampled,
                                    J - 2, window, cos_thr)
    prev_tail = any(sampled[max(J - 1 - window, 0):J - 1])
    if not prev_tail:
        prev = RayCone.empty(dim)
    elif not prev_mask.any():
        prev = RayCone.zero(dim)
    else:
        prev = canonicalize(cands[prev_mask], dim, nonempty=True)
    drift = cone_distance(prev, cone)
    flicker = False
    if len(cands):
        recent = np.zeros(len(cands), dtype=bool)
        for j in range(max(J - window, 0), J):
            if not sampled[j]:
                continue
            if shell_full[j]:
                recent[:] = True
            elif len(shell_dirs[j]):
                recent |= np.max(cands @ shell_dirs[j].T, axis=1) >= cos_thr
        flicker = bool(np.any(recent & ~mask))
    converged = drift <= 2.0 * cfg.ang_tol and not flicker
    diagnostics["drift"] = None if np.isinf(drift) else float(drift)
    diagnostics["flicker"] = flicker
    return LimsupResult(cone, persistence, J, converged, diagnostics)


# ---------------------------------------------------------------------------
# Pointwise cones


def _require_member(S, x, cfg):
    x = np.asarray(x, dtype=float)
    if not S.contains(x, max(cfg.eq_tol, 1e-9) * 100):
        raise SetError("point %s is not in the set" % (x.tolist(),))
    return x


def contingent_cone(S, x, cfg):
    """Sampled contingent (tangent) cone of S at a member x.

    A grid direction d survives when, for every step t in a decreasing
    schedule, the set comes within t*ang_tol + 5t^2 of x + t*d; the
    quadratic slack accommodates curved boundaries at the larger steps.
    """
    x = _require_member(S, x, cfg)
    if S.discrete is not None:
        return RayCone.zero(S.dim)  # isolated atoms: tangent cone is {0}
    grid, _ = sphere_grid(S.dim, grid_sizes_from_config(cfg))
    ok = np.ones(len(grid), dtype=bool)
    for j in range(3, 11):
        t = cfg.delta(j)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            break
        d = S.approx_dist(x + t * grid[idx])
        ok[idx[d > t * cfg.ang_tol + 5.0 * t * t]] = False
    rays = grid[ok]
    return canonicalize(rays, S.dim, nonempty=True)


def frechet_normal_cone(S, x, cfg):
    """Regular (Frechet) normal cone: polar of the contingent cone."""
    if S.discrete is not None:
        _require_member(S, x, cfg)
        grid, step = sphere_grid(S.dim, grid_sizes_from_config(cfg))
        return RayCone(S.dim, Status.RAYS, grid, resolution=step / 2.0,
                       _trusted=True)
    return polar_of_contingent(S, x, cfg)


def polar_of_contingent(S, x, cfg):
    from .cones import polar_cone
    # the sampled contingent cone over-includes by up to ang_tol; give
    # the polar the matching slack so boundary normals survive
    return polar_cone(contingent_cone(S, x, cfg),
                      grid_sizes_from_config(cfg),
                      slack=math.sin(cfg.ang_tol))


def limiting_normal_cone(S, x, cfg):
    """Limiting (Mordukhovich) normal cone at a member x.

    Fast path: x inside a single smooth piece -- the cone is generated by
    the active constraint gradients, sampled on the grid when several
    inequalities are active.  Otherwise (corners, several pieces,
    nonsmooth comparisons) falls back to the projection-direction field:
    probes q near x project back to the set and q - proj(q) accumulates
    normal directions.
    """
    x = _require_member(S, x, cfg)
    grid, step = sphere_grid(S.dim, grid_sizes_from_config(cfg))
    if S.discrete is not None:
        # isolated atom: every direction is normal
        return RayCone(S.dim, Status.RAYS, grid, resolution=step / 2.0,
                       _trusted=True)
    pstat = S.piece_status(x[None, :], cfg.eq_tol)[:, 0]
    members = np.flatnonzero(pstat >= 0)
    if len(members) == 1:
        piece = S.pieces[members[0]]
        if all(c.smooth for c in piece.comparisons):
            gens = S._active_generators(piece, x)
            if gens is not None:
                if not gens:
                    return RayCone.zero(S.dim)
                if len(gens) == 1:
                    return canonicalize(gens, S.dim, nonempty=True)
                G = np.array(gens)
                # grid directions sit up to step/2 off the generator cone
                tol = max(1e-6, math.sin(step))
                keep = np.fromiter(
                    (in_convex_cone(G, d, tol) for d in grid),
                    dtype=bool, count=len(grid))
                if not keep.any():
                    return canonicalize(gens, S.dim, nonempty=True)
                return canonicalize(grid[keep], S.dim, nonempty=True)
    # projection fallback
    dirs = []
    for j in (4, 6, 8):
        delta = cfg.delta(j)
        rng = cfg.rng("limnorm", S.name, j,
                      np.round(x, 9).tobytes().hex())
        n = max(cfg.probes_per_level // 2, 8)
        u = rng.standard_normal((n, S.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = delta * rng.random(n) ** (1.0 / S.dim)
        Q = x + u * rad[:, None]
        for q in Q:
            if S.contains(q, cfg.eq_tol):
                continue
            try:
                res = S.project(q, cfg, starts=2)
            except SetError:
                continue
            for p in res.minimizers:
                d = q - p
                nd = np.linalg.norm(d)
                if nd > 1e-9 * (1.0 + np.linalg.norm(q)):
                    dirs.append(d / nd)
    return canonicalize(dirs, S.dim, nonempty=True)


# ---------------------------------------------------------------------------
# Cones at infinity


def normal_cone_at_infinity(S, ybar, cfg, method="frechet", label=""):
    """Normal cone at infinity with value window ybar (split sets).

    Tail-persistent limit of the per-sample regular-normal field along
    shells where the x-block escapes and the y-block stays near ybar.
    method "limiting" swaps in the projection-direction field; "both"
    returns the regular-field result and records the angular distance to
    the limiting-field result as a diagnostic.
    """
    if method not in ("frechet", "limiting", "both"):
        raise ValueError("method must be frechet, limiting or both")
    approach = ApproachSpec.to_infinity_with_value(
        S, ybar, cfg, label=label or S.name)

    def field_reg(j, P):
        return S.frechet_field(P, cfg)

    def field_lim(j, P):
        return S.projection_dir_field(P, cfg,
                                      label="%s|j%d" % (label or S.name, j))

    if method == "limiting":
        return outer_limit(field_lim, approach, cfg)
    res = outer_limit(field_reg, approach, cfg)
    if method == "both":
        alt = outer_limit(field_lim, approach, cfg)
        d = cone_distance(res.cone, alt.cone)
        res.diagnostics["limiting_agreement"] = \
            None if np.isinf(d) else float(d)
        res.diagnostics["limiting_status"] = alt.cone.status
    return res


def normal_cone_at_infinity_total(S, cfg, label=""):
    """Normal cone at infinity without a value window (whole set escapes)."""
    approach = ApproachSpec.to_infinity(S, cfg, label=label or S.name)

    def field(j, P):
        return S.frechet_field(P, cfg)

    return outer_limit(field, approach, cfg)


def _with_split(S, split):
    if S.split == tuple(split):
        return S
    return ClosedSet(S.dim, pred=S.pred, discrete=S.discrete, split=split,
                     unbounded=S.unbounded, name=S.name)


def verify_intersection_rule(o1, o2, ybar, cfg):
    """Check the at-infinity normal-cone sum rule for an intersection.

    Under the qualification N_1(inf,ybar) meets -N_2(inf,ybar) only at 0,
    every normal direction of the intersection at infinity should lie in
    the sampled sum of the two cones.  CQ failure is Inconclusive; an
    unexplained direction is a Fail with that ray as witness.
    """
    if o1.dim != o2.dim:
        raise SetError("dimension mismatch")
    ybar = np.atleast_1d(np.asarray(ybar, dtype=float))
    split = (o1.dim - len(ybar), len(ybar))
    s1 = _with_split(o1, split)
    s2 = _with_split(o2, split)
    from .sets import intersection_set
    n1 = normal_cone_at_infinity(s1, ybar, cfg, label="ir1")
    n2 = normal_cone_at_infinity(s2, ybar, cfg, label="ir2")
    diag = {"cone1": n1.cone.to_json(), "cone2": n2.cone.to_json()}
    if n1.cone.is_empty or n2.cone.is_empty:
        return Verdict.inconclusive("empty cone at infinity", **diag)
    meet = cone_intersect(n1.cone, cone_negate(n2.cone), cfg.ang_tol)
    if meet.status == Status.RAYS:
        return Verdict.inconclusive("CQ violated",
                                    cq_witness=meet.rays[0].tolist(), **diag)
    inter = _with_split(intersection_set(o1, o2), split)
    left = normal_cone_at_infinity(inter, ybar, cfg, label="ir12")
    right = cone_sum(n1.cone, n2.cone)
    diag["left"] = left.cone.to_json()
    diag["right"] = right.to_json()
    if left.cone.status != Status.RAYS:
        return Verdict.passed(**diag)
    for ray in left.cone.rays:
        if right.status != Status.RAYS or \
                not contains_direction(right, ray, 2.0 * cfg.ang_tol):
            return Verdict.failed(ray.tolist(), **diag)
    return Verdict.passed(**diag)
