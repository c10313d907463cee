"""Set-valued optimization at infinity: ordering cones and Fermat rule.

Ordering cones are generator-specified pointed convex cones with a chosen
interior point e.  Scalarization uses the Gerstewitz-type function
phi(y) = inf{t real : t e in y + K}, computed by bisection with sampled
K-membership.  The Fermat certificate search looks for c* in the positive
polar with 0 in D*F(inf, ybar)(c*) + N_Omega(inf), gated on the weak
efficiency and constraint-qualification falsifiers.
"""

import math

import numpy as np

from .cones import (INF, HSlice, RayCone, Status, canonicalize,
                    cone_intersect, cone_negate, contains_direction,
                    split_ray, unit)
from .grids import grid_sizes_from_config, sphere_grid
from .limits import (ApproachSpec, normal_cone_at_infinity_total,
                     outer_limit)
from .maps import _slice_cone, coderivative_at_infinity, slice_hmap
from .sets import (SetError, Shell, full_space, intersection_set,
                   product_set)
from .verdict import Verdict

_BUDGET_NOTE = "no counterexample within budget (not a proof)"


class OrderingCone:
    """Pointed closed convex cone cone(generators) with interior point e."""

    __slots__ = ("generators", "e", "m", "name", "_kplus")

    def __init__(self, generators, interior_point, name=""):
        gens = np.asarray(generators, dtype=float)
        if gens.ndim != 2 or gens.shape[0] == 0:
            raise SetError("ordering cone needs generator rows")
        norms = np.linalg.norm(gens, axis=1)
        if np.any(norms < 1e-12):
            raise SetError("zero generator in ordering cone")
        self.generators = gens / norms[:, None]
        self.m = gens.shape[1]
        self.e = np.asarray(interior_point, dtype=float).reshape(self.m)
        self.name = name
        self._kplus = None
        # pointedness: no generator direction is (approximately) in -K
        khat = canonicalize(self.generators, self.m, nonempty=True)
        meet = cone_intersect(khat, cone_negate(khat), 0.01)
        if meet.status == Status.RAYS:
            raise SetError("ordering cone is not pointed: +-%s"
                           % (meet.rays[0].tolist(),))

    @classmethod
    def from_conedef(cls, cd):
        return cls(cd.generators, cd.interior_point, name=cd.name)

    def __repr__(self):
        return "OrderingCone(%r, m=%d, %d generators)" % (
            self.name, self.m, len(self.generators))

    def kplus(self, cfg):
        if self._kplus is None:
            kp = positive_polar(self, cfg)
            emin = INF
            if kp.status == Status.RAYS:
                emin = float(np.min(kp.rays @ self.e))
            if not emin > 1e-6:
                raise SetError("interior point is not strictly interior "
                               "(min polar pairing %.3g)" % emin)
            self._kplus = kp
        return self._kplus

    def contains(self, y, cfg, slack=None):
        """Sampled membership y in K via the positive polar."""
        y = np.asarray(y, dtype=float)
        kp = self.kplus(cfg)
        if kp.status != Status.RAYS:
            return True  # polar is {0}: K is the whole space
        _, step = sphere_grid(self.m, grid_sizes_from_config(cfg))
        if slack is None:
            slack = math.sin(step) + 1e-9
        return float(np.min(kp.rays @ y)) >= -slack * (1.0 +
                                                       np.linalg.norm(y))


def positive_polar(K, cfg):
    """K+ = {c : <c, y> >= 0 for all y in K}, sampled on the grid."""
    grid, step = sphere_grid(K.m, grid_sizes_from_config(cfg))
    mins = np.min(grid @ K.generators.T, axis=1)
    keep = grid[mins >= -math.sin(step) - 1e-12]
    if keep.shape[0] == 0:
        return RayCone.zero(K.m, resolution=step / 2.0)
    return RayCone(K.m, Status.RAYS, keep, resolution=step / 2.0,
                   _trusted=True)


def scalarize(K, e, y, cfg):
    """phi(y) = inf{t : t e - y in K}, by monotone bisection.

    e must be the cone's interior point (t e - y in K is monotone in t);
    53 iterations take the bracket to machine precision of the sampled
    membership threshold.
    """
    y = np.asarray(y, dtype=float).reshape(K.m)
    kp = K.kplus(cfg)
    emin = float(np.min(kp.rays @ e)) if kp.status == Status.RAYS else 1.0
    lam = 2.0 * (1.0 + float(np.linalg.norm(y))) / max(emin, 1e-6)
    lo, hi = -lam, lam
    if not K.contains(hi * e - y, cfg):
        return INF
    if K.contains(lo * e - y, cfg):
        return -INF
    for _ in range(53):
        mid = 0.5 * (lo + hi)
        if K.contains(mid * e - y, cfg):
            hi = mid
        else:
            lo = mid
    return hi


def scalarize_subdiff(K, e, y, cfg, tol=0.05):
    """Subdifferential of phi at y: the active face of the polar.

    {c* in K+ : <c*, e> = 1, <c*, y> = phi(y)}, sampled from the polar
    grid and returned as points on the normalization slice.
    """
    y = np.asarray(y, dtype=float).reshape(K.m)
    phi = scalarize(K, e, y, cfg)
    if not math.isfinite(phi):
        return HSlice.make_empty(K.m)
    kp = K.kplus(cfg)
    if kp.status != Status.RAYS:
        return HSlice.make_empty(K.m)
    pair = kp.rays @ e
    ok = pair > 1e-9
    c = kp.rays[ok] / pair[ok, None]
    vals = c @ y
    keep = c[np.abs(vals - phi) <= tol * (1.0 + np.linalg.norm(y))]
    if keep.shape[0] == 0:
        return HSlice.make_empty(K.m)
    # dedup on the slice
    pts = []
    for p in keep:
        if not any(np.linalg.norm(p - q) <= 0.01 for q in pts):
            pts.append(p)
    return HSlice(K.m, points=pts)


# ---------------------------------------------------------------------------
# Weak efficiency and CQ


def _constrained_graph(F, omega):
    if omega.pred is not None and \
            all(len(pc.comparisons) == 0 for pc in omega.pieces):
        return F.graph
    lifted = product_set(omega, full_space(F.m))
    return intersection_set(F.graph, lifted, name="gph %s|%s"
                            % (F.name, omega.name))


def _constrained_coderivative(F, omega, ybar, cfg, label):
    """Graph cone at infinity along feasible escapes only.

    Normals are still regular normals of gph F, but the escape sequence
    is restricted to x in omega: graph normals reachable only through
    infeasible points are irrelevant to the constrained problem and
    would poison the CQ and the certificate search.
    """
    S = _constrained_graph(F, omega)
    if S is F.graph:
        return coderivative_at_infinity(F, ybar, cfg, label=label)
    ybar = np.atleast_1d(np.asarray(ybar, dtype=float))
    # feasible escapes can be polynomially thin (x large forces y close
    # at some power rate); stretch the shell radii so the shrinking value
    # window still catches them
    cfg = cfg.replace(radius_factor=max(cfg.radius_factor, 4.0))
    approach = ApproachSpec.to_infinity_with_value(S, ybar, cfg,
                                                   label=label + "|con")

    def field(j, P):
        return F.graph.frechet_field(P, cfg)

    return outer_limit(field, approach, cfg)


def check_weak_efficient(F, omega, K, ybar, cfg, margin=0.02):
    """Falsify weak efficiency of ybar for F over omega.

    Samples values y in F(omega) at bounded and escaping radii; a sample
    with phi(y - ybar) < -margin lies in ybar - int K and is a
    counterexample.  Also reports how closely samples approach ybar
    (closure membership evidence).
    """
    ybar = np.asarray(ybar, dtype=float).reshape(K.m)
    S = _constrained_graph(F, omega)
    closest = INF
    probes = 0
    for j in range(cfg.shells + 2):
        lo = 0.2 * 2.0 ** j
        sh = Shell(range(F.n), lo, 2.0 * lo, center=ybar, rho=8.0)
        P = S.sample_shell(sh, cfg.samples_per_shell // 4, cfg,
                           label="weff|%d" % j)
        for row in P:
            y = row[F.n:]
            closest = min(closest, float(np.linalg.norm(y - ybar)))
            phi = scalarize(K, K.e, y - ybar, cfg)
            probes += 1
            if phi < -margin * (1.0 + np.linalg.norm(y - ybar)):
                return Verdict.failed(
                    {"x": row[:F.n].tolist(), "y": y.tolist(),
                     "phi": float(phi)},
                    closure_gap=closest)
    return Verdict.passed(probes=probes,
                          closure_gap=None if np.isinf(closest)
                          else float(closest),
                          note=_BUDGET_NOTE)


def check_cq_infinity(F, omega, ybar, cfg):
    """Constraint qualification: D*F(inf,ybar)(0) meets -N_omega(inf) at 0."""
    ybar = np.atleast_1d(np.asarray(ybar, dtype=float))
    cod = _constrained_coderivative(F, omega, ybar, cfg, "cq")
    if cod.cone.is_empty:
        return Verdict.inconclusive("coderivative cone empty at infinity")
    s0 = _slice_cone(slice_hmap(cod.cone, np.zeros(F.m), cfg.ang_tol, F.m),
                     F.n)
    nom = normal_cone_at_infinity_total(omega, cfg, label="cqO")
    diag = {"slice0_cone": s0.to_json(), "omega_cone": nom.cone.to_json()}
    if nom.cone.is_empty:
        return Verdict.inconclusive("constraint-set cone empty at infinity",
                                    **diag)
    if s0.status != Status.RAYS or nom.cone.status != Status.RAYS:
        return Verdict.passed(**diag)
    meet = cone_intersect(s0, cone_negate(nom.cone), cfg.ang_tol)
    if meet.status == Status.RAYS:
        return Verdict.failed(meet.rays[0].tolist(), **diag)
    return Verdict.passed(**diag)


# ---------------------------------------------------------------------------
# Fermat certificate


class FermatCertificate:
    __slots__ = ("c_star", "u", "w", "residual", "preconditions",
                 "diagnostics")

    def __init__(self, c_star, u, w, residual, preconditions=None,
                 diagnostics=None):
        self.c_star = np.asarray(c_star, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.residual = float(residual)
        self.preconditions = preconditions or {}
        self.diagnostics = diagnostics or {}

    def __repr__(self):
        return "FermatCertificate(c*=%s, residual=%.3g)" % (
            self.c_star.tolist(), self.residual)

    def to_json(self):
        return {"c_star": self.c_star.tolist(), "u": self.u.tolist(),
                "w": self.w.tolist(), "residual": self.residual,
                "preconditions": self.preconditions,
                "diagnostics": self.diagnostics}


def _candidate_grid(K, cfg):
    if K.m == 1:
        return np.array([[1.0], [-1.0]])
    if K.m == 2:
        th = np.deg2rad(np.arange(360.0))
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    from .grids import fibonacci_sphere
    if K.m == 3:
        return np.asarray(fibonacci_sphere(10000))
    grid, _ = sphere_grid(K.m, grid_sizes_from_config(cfg))
    return np.asarray(grid)


def _certificate_residual(chat, K, e, cone, nom, n, m, cfg):
    """Best (score, u, w, residual) over cone rays for unit candidate chat.

    score adds an alignment penalty so a coarse-grid candidate near the
    true c* still ranks correctly before refinement.
    """
    pair = float(np.dot(chat, e))
    if pair <= 1e-9:
        return INF, None, None, INF
    c = chat / pair
    cn = float(np.linalg.norm(c))
    snap = 2.0 * cfg.ang_tol + (cone.resolution if cone.status == Status.RAYS
                                else 0.0)
    best = (INF, None, None, INF)
    if cone.status != Status.RAYS:
        return best
    for ray in cone.rays:
        a, b = split_ray(ray, m)
        bn = float(np.linalg.norm(b))
        if bn <= math.sin(min(cfg.ang_tol, math.pi / 2)):
            continue
        align = float(np.arccos(np.clip(np.dot(b / bn, -unit(c)), -1, 1)))
        if align > 0.35:  # ~20 degrees: not a plausible slice match
            continue
        u = (cn / bn) * a
        un = float(np.linalg.norm(u))
        if un <= 1e-9:
            w = np.zeros(n)
            resid = un
        elif nom.status == Status.RAYS and \
                contains_direction(nom, -u, snap):
            w = -u  # within cone-estimate resolution of a sampled normal
            resid = 0.0
        elif nom.status == Status.RAYS:
            cos = float(np.max(nom.rays @ (-u / un)))
            resid = un * math.sqrt(max(0.0, 2.0 - 2.0 * cos))
            w = -u if cos >= 1.0 - 1e-12 else \
                un * nom.rays[int(np.argmax(nom.rays @ (-u / un)))]
            resid = min(resid, un)  # w = 0 fallback
            if resid == un:
                w = np.zeros(n)
        else:
            w = np.zeros(n)
            resid = un
        score = resid + align * (1.0 + un)
        if score < best[0]:
            best = (score, u, w, resid)
    return best


def fermat_certificate(F, omega, K, ybar, cfg, tol=0.05,
                       preconditions=None):
    """Search for the Fermat-rule certificate at infinity.

    Requires the weak-efficiency and CQ falsifiers to pass first (run
    here unless their verdicts are supplied).  Scans the normalization
    slice of K+ for c* whose coderivative slice meets -N_omega(inf),
    refines the best candidate, and returns a FermatCertificate; a
    Verdict explains refusal or an exhausted search.
    """
    ybar = np.asarray(ybar, dtype=float).reshape(K.m)
    if preconditions is None:
        preconditions = {
            "weak_efficient": check_weak_efficient(F, omega, K, ybar, cfg),
            "cq_infinity": check_cq_infinity(F, omega, ybar, cfg),
        }
    pre_json = {k: v.to_json() for k, v in preconditions.items()}
    for name, v in preconditions.items():
        if not v.ok:
            return Verdict.inconclusive("precondition not passed: " + name,
                                        preconditions=pre_json)
    cone = _constrained_coderivative(F, omega, ybar, cfg, "fermat").cone
    if cone.is_empty:
        return Verdict.inconclusive("coderivative cone empty at infinity",
                                    preconditions=pre_json)
    nomr = normal_cone_at_infinity_total(omega, cfg, label="fermatO")
    nom = nomr.cone
    n, m = F.n, F.m
    kgen = K.generators
    grid = _candidate_grid(K, cfg)
    mins = np.min(grid @ kgen.T, axis=1)
    cands = list(grid[mins >= -0.01])
    # exact candidates read off the cone rays (perfect alignment)
    if cone.status == Status.RAYS:
        for ray in cone.rays:
            b = split_ray(ray, m)[1]
            bn = np.linalg.norm(b)
            if bn > math.sin(cfg.ang_tol) and \
                    float(np.min((-b / bn) @ kgen.T)) >= -0.02:
                cands.append(-b / bn)
    scored = []
    for chat in cands:
        score, u, w, resid = _certificate_residual(chat, K, K.e, cone, nom,
                                                   n, m, cfg)
        if u is not None:
            scored.append((score, chat, u, w, resid))
    if not scored:
        return Verdict.failed(
            {"note": "no certificate on the candidate grid; per the "
             "theory this indicates tolerance or budget failure"},
            preconditions=pre_json)
    # Among candidates within tolerance prefer the one whose coderivative
    # value u is largest: trivial u = 0 certificates coexist with the
    # informative one whenever the graph cone has a purely vertical ray.
    valid = [s for s in scored
             if s[4] <= tol and s[0] - s[4] <= 0.1 * (1 + np.linalg.norm(
                 s[2]))]
    if valid:
        best = max(valid, key=lambda s: (round(float(np.linalg.norm(s[2])),
                                               6), -s[0]))
    else:
        best = min(scored, key=lambda s: s[0])
    chat = np.asarray(best[1], dtype=float)
    # local refinement of the candidate direction (not needed when the
    # candidate came straight off a cone ray: alignment is already exact)
    if best[0] - best[4] <= 1e-9:
        pass
    elif m == 2:
        th0 = math.atan2(chat[1], chat[0])
        lo, hi = th0 - math.radians(1.5), th0 + math.radians(1.5)
        gr = (math.sqrt(5.0) - 1.0) / 2.0
        fcache = {}

        def fval(t):
            if t not in fcache:
                ct = np.array([math.cos(t), math.sin(t)])
                fcache[t] = _certificate_residual(ct, K, K.e, cone, nom,
                                                  n, m, cfg)[0]
            return fcache[t]

        a, b = lo, hi
        c1 = b - gr * (b - a)
        c2 = a + gr * (b - a)
        for _ in range(40):
            if fval(c1) <= fval(c2):
                b, c2 = c2, c1
                c1 = b - gr * (b - a)
            else:
                a, c1 = c1, c2
                c2 = a + gr * (b - a)
        tbest = min(fcache, key=fcache.get)
        cand = np.array([math.cos(tbest), math.sin(tbest)])
        if _certificate_residual(cand, K, K.e, cone, nom, n, m, cfg)[0] \
                <= best[0]:
            chat = cand
    elif m >= 3:
        rng = cfg.rng("fermat-refine", F.name)
        radius = 0.03
        for _ in range(6):
            probes = chat + radius * rng.standard_normal((60, m))
            probes /= np.linalg.norm(probes, axis=1, keepdims=True)
            probes = probes[np.min(probes @ kgen.T, axis=1) >= -0.01]
            for p in probes:
                s = _certificate_residual(p, K, K.e, cone, nom, n, m,
                                          cfg)[0]
                if s < best[0]:
                    best = (s, p) + best[2:]
                    chat = np.asarray(p, dtype=float)
            radius *= 0.5
    score, u, w, resid = _certificate_residual(chat, K, K.e, cone, nom,
                                               n, m, cfg)
    if u is None or resid > tol:
        return Verdict.failed(
            {"note": "grid exhausted without a certificate within "
             "tolerance; per the theory this indicates tolerance or "
             "budget failure",
             "best_residual": None if resid == INF else float(resid)},
            preconditions=pre_json)
    c_star = chat / float(np.dot(chat, K.e))
    return FermatCertificate(
        c_star, u, w, resid, preconditions=pre_json,
        diagnostics={"score": float(score),
                     "omega_cone": nom.to_json(),
                     "omega_converged": nomr.converged})
