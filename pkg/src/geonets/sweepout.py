"""Families of 1-cycles, discrete min-max, and theorem-bound verification.

Three family builders are provided:

* :func:`latitude_sweepout` slices a sphere-like manifold by a height
  function into polygonal circles, pole to pole;
* :func:`tetrahedron_sweepout` realizes the four oriented triangle
  boundaries spanned by four vertices and the loop they trace in cycle
  space as each boundary contracts (order-12 members);
* :func:`two_disc_refined_sweepout` is the refined order-2 construction:
  two boundaries grow from points, their shared edge cancels, the
  resulting quadrilateral regrows the other shared edge, and the second
  pair of boundaries contracts, so every member is at most two closed
  curves.

:func:`minmax` pulls a family down by applying one Birkhoff pass plus one
line-searched flow batch per member per round (the same operator schedule
for every member), then certifies the final maximal member through
:func:`geonets.shortening.shorten`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cycles import (
    GeodesicNet,
    PolygonalCycle,
    _assemble_many,
    build_cycle,
    latitude_circle_cycle,
    torus_wrap_cycle,
)
from .errors import (
    BirkhoffPreconditionError,
    NumericError,
    PreconditionError,
    ShortCycleFound,
    ShortenDidNotConverge,
    StepTooLongError,
)
from .manifolds import Manifold, _as_coords
from .shortening import (
    FlowConfig,
    ShortenOutcome,
    birkhoff_step,
    birkhoff_step_many,
    choose_N,
    deformation_vector,
    dt_scale_cap,
    shorten,
)

Array = np.ndarray


@dataclass(eq=False)
class CycleFamily:
    """A discrete one-parameter family of polygonal cycles."""

    manifold: Manifold
    members: list[PolygonalCycle]
    params: list[float]
    boundary_condition: str  # "closed_loop_in_cycle_space" | "free"
    provenance: str          # "latitude" | "tetrahedron_faces" | "two_disc_refined" | "user"
    continuity_bound: float
    meta: dict = field(default_factory=dict)

    def max_length(self) -> float:
        return max((m.length() for m in self.members), default=0.0)

    def lengths(self) -> list[float]:
        return [m.length() for m in self.members]

    def consecutive_hausdorff(self) -> list[float]:
        out = []
        for a, b in zip(self.members, self.members[1:]):
            out.append(_hausdorff(self.manifold, a.all_vertex_positions(),
                                  b.all_vertex_positions()))
        return out


def _hausdorff(m: Manifold, A: Array, B: Array) -> float:
    if A.size == 0 or B.size == 0:
        return 0.0

    def one_sided(X, Y):
        worst = 0.0
        for x in X:
            d = m.local_distance(np.repeat(x[None], Y.shape[0], axis=0), Y)
            worst = max(worst, float(np.min(d)))
        return worst

    return max(one_sided(A, B), one_sided(B, A))


# ----------------------------------------------------------------------
# latitude slicing
# ----------------------------------------------------------------------


def latitude_sweepout(m: Manifold, slices: int, segments: int | None = None) -> CycleFamily:
    """Height-function level circles of a sphere-like manifold, pole to pole."""
    if not getattr(m, "sphere_like", False):
        raise PreconditionError("latitude_sweepout needs a sphere-like manifold")
    if slices < 3:
        raise PreconditionError("need at least 3 slices")
    if hasattr(m, "axes"):
        equator_bound = 2.0 * math.pi * float(max(m.axes))
    else:
        equator_bound = 2.0 * math.pi * m.radius
    N = segments if segments is not None else choose_N(1.2 * equator_bound, m.inj)
    members = []
    params = []
    for i in range(slices):
        t = i / (slices - 1)
        members.append(latitude_circle_cycle(m, math.cos(math.pi * t), N))
        params.append(t)
    return CycleFamily(m, members, params, "closed_loop_in_cycle_space",
                       "latitude", m.inj / 8.0)


# ----------------------------------------------------------------------
# edge paths (minimizing geodesics subdivided into polygonal chains)
# ----------------------------------------------------------------------


@dataclass(eq=False)
class _EdgePath:
    verts: Array    # (N+1, d)
    lengths: Array  # (N,)
    v_init: Array   # (N, d)
    v_term: Array   # (N, d)
    v_full: Array | None = None  # whole-edge shooting velocity (solver seed)

    @property
    def total(self) -> float:
        return float(self.lengths.sum())

    def reverse(self) -> "_EdgePath":
        return _EdgePath(self.verts[::-1].copy(), self.lengths[::-1].copy(),
                         -self.v_term[::-1].copy(), -self.v_init[::-1].copy())


def _edge_path(m: Manifold, p: Array, q: Array, n_segments: int,
               v_full: Array | None = None) -> _EdgePath:
    """A minimizing geodesic p -> q subdivided into n equal-arc segments.

    Uses multi-start shooting and therefore tolerates separations beyond
    inj/2 (the builders need diameter-scale edges).  ``v_full`` seeds the
    full-edge solve (the probe pass shares its answer with the final pass).
    """
    res = m.connect_batch(p[None], q[None], max_length=1.5 * m.diam,
                          v_guess=None if v_full is None else v_full[None])
    L = float(res["lengths"][0])
    if L == 0.0:
        verts = np.repeat(p[None], n_segments + 1, axis=0)
        zeros = np.zeros((n_segments, p.shape[0]))
        return _EdgePath(verts, np.zeros(n_segments), zeros, zeros.copy())
    fracs = np.arange(1, n_segments) / n_segments
    pts, _ = m.shoot_batch(np.repeat(p[None], n_segments - 1, axis=0),
                           np.repeat(res["v_init"], n_segments - 1, axis=0), fracs)
    verts = np.concatenate([p[None], m.wrap_points(pts), q[None]], axis=0)
    piece = L / n_segments
    sub = m.connect_batch(verts[:-1], verts[1:],
                          max_length=max(1.5 * piece, 0.3 * m.inj))
    path = _EdgePath(verts, sub["lengths"], sub["v_init"], sub["v_term"])
    path.v_full = res["v_init"][0]
    return path


def _partial_path(m: Manifold, path: _EdgePath, arc: float, n_out: int) -> Array:
    """Vertices of the equal-arc n_out-gon along ``path`` up to arclength arc."""
    d = path.verts.shape[1]
    if arc <= 0.0 or path.total == 0.0:
        return np.repeat(path.verts[0][None], n_out + 1, axis=0)
    arc = min(arc, path.total)
    cum = np.concatenate([[0.0], np.cumsum(path.lengths)])
    targets = arc * np.arange(1, n_out + 1) / n_out
    out = np.empty((n_out + 1, d))
    out[0] = path.verts[0]
    seg = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(path.lengths) - 1)
    ps, vs, ts = [], [], []
    for s, j in zip(targets, seg):
        L = path.lengths[j]
        ps.append(path.verts[j])
        vs.append(path.v_init[j])
        ts.append((s - cum[j]) / L if L > 0 else 0.0)
    pts, _ = m.shoot_batch(np.array(ps), np.array(vs), np.array(ts))
    out[1:] = m.wrap_points(pts)
    return out


# ----------------------------------------------------------------------
# tetrahedron constructions
# ----------------------------------------------------------------------

# gamma_i as signed sums of the six edges e_1..e_6 spanned by vertices
# v0..v3: e1=[v0,v1], e2=[v0,v2], e3=[v0,v3], e4=[v1,v2], e5=[v1,v3],
# e6=[v2,v3].  Each edge appears in exactly two boundaries with opposite
# signs, which is what makes the t=1 member the zero cycle.
TETRAHEDRON_EDGE_SIGNS = {
    1: {1: +1, 5: +1, 3: -1},
    2: {1: -1, 2: +1, 4: -1},
    3: {2: -1, 3: +1, 6: -1},
    4: {6: +1, 5: -1, 4: +1},
}

_EDGE_VERTICES = {1: (0, 1), 2: (0, 2), 3: (0, 3), 4: (1, 2), 5: (1, 3), 6: (2, 3)}

# cyclic side order of each triangle, as (edge index, traversed forward?)
_TRIANGLE_SIDES = {
    1: ((1, True), (5, True), (3, False)),
    2: ((1, False), (2, True), (4, False)),
    3: ((2, False), (3, True), (6, False)),
    4: ((6, True), (5, False), (4, True)),
}


def tetrahedron_cancellation_pairs() -> list[tuple[int, tuple[int, int]]]:
    """(edge, (gamma with +, gamma with -)) for all six edges."""
    out = []
    for e in range(1, 7):
        plus = [g for g, signs in TETRAHEDRON_EDGE_SIGNS.items() if signs.get(e) == +1]
        minus = [g for g, signs in TETRAHEDRON_EDGE_SIGNS.items() if signs.get(e) == -1]
        if len(plus) != 1 or len(minus) != 1:
            raise AssertionError("edge sign table corrupted")
        out.append((e, (plus[0], minus[0])))
    return out


def _triangle_cycle(m: Manifold, paths: dict[int, _EdgePath], tri: int) -> PolygonalCycle:
    chains = []
    for e, forward in _TRIANGLE_SIDES[tri]:
        path = paths[e] if forward else paths[e].reverse()
        chains.append(path.verts)
    return build_cycle(m, chains)


def _contract_recording(c: PolygonalCycle, cfg: FlowConfig) -> list[PolygonalCycle]:
    """Shorten to collapse, returning snapshots (initial state included).

    A stationary outcome raises ShortCycleFound carrying the net: for the
    outer min-max algorithm this is a success, not an error.
    """
    snaps: list[PolygonalCycle] = []
    out = shorten(c, cfg, observer=lambda cc, it: snaps.append(cc))
    if out.stationary:
        raise ShortCycleFound(out.net)
    if out.final_cycle is not None:
        snaps.append(out.final_cycle)
    return snaps


def _contract_recording_many(tris: dict, cfg: FlowConfig) -> dict:
    """Contract several cycles together, sharing every batched solve.

    Applies the shorten schedule round-robin to all live cycles at once and
    records a snapshot per cycle per round; the dichotomy is checked per
    cycle exactly as in ``shorten`` (collapse threshold, stationarity
    threshold, saddle-dip polish with cooldown).
    """
    from .shortening import _polish_stationary, counted_components, project_to_net

    keys = list(tris.keys())
    m = tris[keys[0]].manifold
    state = {g: tris[g] for g in keys}
    snaps = {g: [tris[g]] for g in keys}
    live = set(keys)
    cooldown = {g: math.inf for g in keys}
    rcfg = {g: cfg.resolved(m, max(tris[g].k, 1)) for g in keys}
    max_iters = max(rc.max_outer_iters for rc in rcfg.values())

    for _ in range(max_iters):
        if not live:
            break
        current = [state[g] for g in sorted(live)]
        updated = _pulldown_round(current, cfg)
        for g, cc in zip(sorted(live), updated):
            state[g] = cc
            snaps[g].append(cc)
        for g in sorted(live):
            cc = state[g]
            rc = rcfg[g]
            all_const = all(all(row) for row in cc.ctype.constant_mask)
            if cc.length() < rc.eps_collapse or all_const:
                live.discard(g)
                continue
            v = deformation_vector(cc)
            if v.norm_sq < rc.eps_stationary**2:
                raise ShortCycleFound(project_to_net(cc, rc.merge_tol))
            rms = math.sqrt(v.norm_sq / max(counted_components(v), 1))
            if (cfg.polish and rms < rc.polish_trigger_rms
                    and v.norm_sq < 0.25 * cooldown[g]):
                cooldown[g] = v.norm_sq
                polished = _polish_stationary(cc, rc)
                if polished is not None:
                    raise ShortCycleFound(project_to_net(polished, rc.merge_tol))
    else:
        if live:
            raise ShortenDidNotConverge(
                f"contractions {sorted(live)} did not collapse within "
                f"{max_iters} rounds", [])
    return snaps


def _default_side_segments(m: Manifold, paths: dict[int, _EdgePath]) -> int:
    longest = max(p.total for p in paths.values())
    return max(choose_N(max(1.3 * longest, 1e-9 * m.diam), m.inj), 3)


def _build_edge_paths(m: Manifold, vertices, n_side: int | None):
    V = [np.asarray(_as_coords(v), dtype=float) for v in vertices]
    if len(V) != 4:
        raise PreconditionError("need exactly 4 vertices")
    probe = {e: _edge_path(m, V[a], V[b], 1) for e, (a, b) in _EDGE_VERTICES.items()}
    N = n_side if n_side is not None else _default_side_segments(m, probe)
    return {e: _edge_path(m, V[a], V[b], N, v_full=probe[e].v_full)
            for e, (a, b) in _EDGE_VERTICES.items()}, N


def _resample(seq: list, n: int | None) -> list:
    if n is None or n >= len(seq) or n < 2:
        return seq
    idx = [round(i * (len(seq) - 1) / (n - 1)) for i in range(n)]
    return [seq[i] for i in idx]


def _run_contractions(m: Manifold, tris: dict, cfg: FlowConfig) -> dict:
    # union members stack several contracted pieces, so each contraction runs
    # to a quarter of the family collapse threshold
    from dataclasses import replace as _replace
    eps_c = cfg.eps_collapse if cfg.eps_collapse is not None else 1e-4 * m.diam
    tight = _replace(cfg, eps_collapse=eps_c / 4.0)
    out = {g: [tri] for g, tri in tris.items() if tri.length() <= eps_c / 2.0}
    todo = {g: tri for g, tri in tris.items() if g not in out}
    if todo:
        out.update(_contract_recording_many(todo, tight))
    return out


def tetrahedron_sweepout(m: Manifold, vertices, segments: int | None = None,
                         members: int | None = None,
                         cfg: FlowConfig | None = None) -> CycleFamily:
    """The order-12 family G_1(t): four triangle boundaries contracting.

    t=0 is four points (zero cycle); t=1 is the four full boundaries, whose
    twelve sides cancel in six oppositely oriented pairs (zero as a current,
    not zero length).
    """
    cfg = cfg or FlowConfig()
    paths, N = _build_edge_paths(m, vertices, segments)
    tris = {g: _triangle_cycle(m, paths, g) for g in range(1, 5)}
    contractions = _run_contractions(m, tris, cfg)

    T = max(len(s) for s in contractions.values())
    sequence = []
    params = []
    for i in range(T + 1):
        t = i / T
        chains = []
        for g in range(1, 5):
            snaps = contractions[g]
            idx = round((1.0 - t) * (len(snaps) - 1))
            snap = snaps[idx]
            for ci in range(snap.k):
                chains.append(snap.chain_vertices(ci))
        sequence.append(build_cycle(m, chains))
        params.append(t)
    sequence = _resample(sequence, members)
    params = _resample(params, members)
    fam = CycleFamily(m, sequence, params, "closed_loop_in_cycle_space",
                      "tetrahedron_faces", m.inj / 8.0)
    fam.meta["side_segments"] = N
    fam.meta["triangle_lengths"] = [tris[g].length() for g in range(1, 5)]
    return fam


def _loop_chain_from_cycle(snap: PolygonalCycle) -> Array:
    """Concatenate the (cyclically matched) chains of a snapshot into one loop."""
    verts = snap.chain_vertices(0)
    out = [verts]
    for ci in range(1, snap.k):
        out.append(snap.chain_vertices(ci)[1:])
    return np.concatenate(out, axis=0)


def two_disc_refined_sweepout(m: Manifold, vertices, segments: int | None = None,
                              members: int | None = None,
                              cfg: FlowConfig | None = None) -> CycleFamily:
    """The refined order-2 family behind the 4d bound.

    Phase A grows the boundaries of the first two discs from their collapse
    points; phase B cancels their doubled shared edge, leaving one
    quadrilateral; phase C regrows the other shared edge and contracts the
    remaining two boundaries.  Every member is at most two closed curves.
    """
    cfg = cfg or FlowConfig()
    paths, N = _build_edge_paths(m, vertices, segments)
    tris = {g: _triangle_cycle(m, paths, g) for g in range(1, 5)}
    contractions = _run_contractions(m, tris, cfg)

    d = paths[1].verts.shape[1]
    v1_anchor = paths[1].verts[-1]  # vertex v1, base of the e1 excursion
    v2_anchor = paths[6].verts[0]   # vertex v2, base of the e6 excursion

    def pad(chains: list[Array], anchor: Array) -> list[Array]:
        n_pts = chains[0].shape[0]
        chains.append(np.repeat(anchor[None], n_pts, axis=0))
        return chains

    def two_loop_member(ga: int, gb: int, idx_a: int, idx_b: int) -> PolygonalCycle:
        la = _loop_chain_from_cycle(contractions[ga][idx_a])
        lb = _loop_chain_from_cycle(contractions[gb][idx_b])
        return build_cycle(m, [la, lb])

    # quadrilateral v1 -> v3 -> v0 -> v2 -> v1 (e5, -e3, e2, -e4)
    quad_sides = [paths[5], paths[3].reverse(), paths[2], paths[4].reverse()]
    quad_verts = np.concatenate([quad_sides[0].verts]
                                + [s.verts[1:] for s in quad_sides[1:]], axis=0)

    def excursion_member(path: _EdgePath, lam: float, quad: Array, anchor: Array) -> PolygonalCycle:
        exc = _partial_path(m, path, lam * path.total, N)
        loop = np.concatenate([exc, exc[::-1][1:], quad[1:]], axis=0)
        return build_cycle(m, pad([loop], anchor))

    sequence: list[PolygonalCycle] = []

    # phase A: two boundaries grow from points
    TA = max(len(contractions[1]), len(contractions[2]))
    for i in range(TA):
        t = i / max(TA - 1, 1)
        ia = round((1.0 - t) * (len(contractions[1]) - 1))
        ib = round((1.0 - t) * (len(contractions[2]) - 1))
        sequence.append(two_loop_member(1, 2, ia, ib))

    # phase B: retract the doubled edge e1 (from v1 toward v0)
    e1_rev = paths[1].reverse()
    nB = max(2, math.ceil(paths[1].total / (m.inj / 8.0)) + 1)
    for i in range(nB + 1):
        lam = 1.0 - i / nB
        sequence.append(excursion_member(e1_rev, lam, quad_verts, v1_anchor))

    # phase C: grow the e6 excursion out of the quadrilateral...
    quadC_sides = [paths[2].reverse(), paths[3], paths[5].reverse(), paths[4]]
    quadC_verts = np.concatenate([quadC_sides[0].verts]
                                 + [s.verts[1:] for s in quadC_sides[1:]], axis=0)
    nC = max(2, math.ceil(paths[6].total / (m.inj / 8.0)) + 1)
    for i in range(nC + 1):
        lam = i / nC
        sequence.append(excursion_member(paths[6], lam, quadC_verts, v2_anchor))

    # ...then contract the remaining two boundaries to points
    TC = max(len(contractions[3]), len(contractions[4]))
    for i in range(TC):
        t = i / max(TC - 1, 1)
        ia = round(t * (len(contractions[3]) - 1))
        ib = round(t * (len(contractions[4]) - 1))
        sequence.append(two_loop_member(3, 4, ia, ib))

    sequence = _resample(sequence, members)
    params = [i / max(len(sequence) - 1, 1) for i in range(len(sequence))]
    fam = CycleFamily(m, sequence, params, "closed_loop_in_cycle_space",
                      "two_disc_refined", m.inj / 8.0)
    fam.meta["side_segments"] = N
    fam.meta["max_member_length"] = fam.max_length()
    return fam


# ----------------------------------------------------------------------
# discrete min-max
# ----------------------------------------------------------------------


@dataclass(eq=False)
class MinMaxReport:
    width_estimate: float
    achiever: int
    stationary_candidate: ShortenOutcome | None
    bound_checked: tuple[str, float, bool] | None
    round_max_lengths: list[float]
    certificate_mass: float | None = None
    certificate_residual: float | None = None

    @property
    def certificate_net(self) -> GeodesicNet | None:
        if self.stationary_candidate is not None and self.stationary_candidate.stationary:
            return self.stationary_candidate.net
        return None


def _moved_positions(c: PolygonalCycle, v, dt: float, gather):
    """Queue the vertex shoots for one flow-step candidate into ``gather``."""
    block = np.asarray(v.block_comp)
    inter = np.asarray(v.interior_comp).reshape(-1, c.mp.shape[1]) if c.N > 1 \
        else np.zeros((0, c.mp.shape[1]))
    new_mp = c.mp.copy()
    flat_in = c.interior.reshape(-1, c.mp.shape[1]).copy()
    jobs = []
    for row in range(block.shape[0]):
        if np.linalg.norm(block[row]) > 0:
            jobs.append((("mp", row), c.mp[row], block[row]))
    for row in range(flat_in.shape[0]):
        if np.linalg.norm(inter[row]) > 0:
            jobs.append((("in", row), flat_in[row], inter[row]))
    for tag, p, w in jobs:
        gather.append((p, w, dt, tag))
    return new_mp, flat_in


def _pulldown_round(members: list[PolygonalCycle], cfg: FlowConfig) -> list[PolygonalCycle]:
    """One min-max round: Birkhoff + line-searched flow batch, family-batched.

    The same operator schedule is applied to every member; all geodesic
    solves of one line-search wave share a single batched call.
    """
    if not members:
        return members
    m = members[0].manifold
    rcfgs = [cfg.resolved(m, max(c.k, 1)) for c in members]
    eps_c = [rc.eps_collapse for rc in rcfgs]

    # Birkhoff every live member (with a larger-N retry on overlong chains)
    live = [i for i, c in enumerate(members) if c.length() >= eps_c[i]]
    todo = [members[i] for i in live]
    for attempt in range(3):
        try:
            done = birkhoff_step_many(todo)
            break
        except BirkhoffPreconditionError:
            todo = [birkhoff_step(c, max(choose_N(1.5 * max(c.length(), 1e-12), m.inj),
                                         c.N + 1))
                    if c.lengths.sum(axis=1).max() > c.N * m.inj / 4.0 else c
                    for c in todo]
    else:
        raise NumericError("Birkhoff retries exhausted during pull-down")
    members = list(members)
    for pos, i in enumerate(live):
        members[i] = done[pos]

    state = {}
    for i in live:
        c = members[i]
        v = deformation_vector(c)
        if v.norm_sq <= 1e-18:
            continue
        dt0 = min(rcfgs[i].t_star, dt_scale_cap(c, v))
        state[i] = {"c": c, "len": c.length(), "v": v,
                    "remaining": rcfgs[i].t_star, "dt": dt0}

    waves = 0
    while state and waves < 20:
        waves += 1
        gather, plan = [], []
        for i, st in state.items():
            new_mp, flat_in = _moved_positions(st["c"], st["v"], st["dt"], gather)
            plan.append((i, new_mp, flat_in, len(gather)))
        if gather:
            P = np.array([g[0] for g in gather])
            W = np.array([g[1] for g in gather])
            T = np.array([g[2] for g in gather])
            P1, _ = m.shoot_batch(P, W, T)
            P1 = m.wrap_points(P1)
        specs, spec_idx = [], []
        cursor = 0
        for i, new_mp, flat_in, end in plan:
            for g_row in range(cursor, end):
                tag = gather[g_row][3]
                if tag[0] == "mp":
                    new_mp[tag[1]] = P1[g_row]
                else:
                    flat_in[tag[1]] = P1[g_row]
            cursor = end
            c = state[i]["c"]
            specs.append({"ctype": c.ctype, "mp": new_mp,
                          "interior": flat_in.reshape(c.interior.shape),
                          "v_warm": c.v_init, "keep_mask": True})
            spec_idx.append(i)
        cands = _assemble_many(m, specs, strict=False)
        for i, cand in zip(spec_idx, cands):
            st = state[i]
            if cand is not None:
                cand.ctype = st["c"].ctype
            if cand is not None and cand.length() < st["len"]:
                st["c"] = cand
                st["len"] = cand.length()
                st["remaining"] -= st["dt"]
                members[i] = cand
                if st["remaining"] <= 1e-9 * rcfgs[i].t_star or st["len"] < eps_c[i]:
                    del state[i]
                    continue
                st["v"] = deformation_vector(cand)
                if st["v"].norm_sq <= 1e-18:
                    del state[i]
                    continue
                st["dt"] = min(st["remaining"], 2.0 * st["dt"],
                               dt_scale_cap(cand, st["v"]))
            else:
                st["dt"] *= rcfgs[i].line_search_shrink
                if st["dt"] < 1e-7 * rcfgs[i].t_star:
                    del state[i]
    return members


def minmax(fam: CycleFamily, cfg: FlowConfig | None = None, rounds: int = 24) -> MinMaxReport:
    """Pull the whole family down and certify the final maximal member.

    Every round applies the identical operator schedule (one Birkhoff pass,
    one flow batch) to every member; the width estimate is the smallest
    max-length seen over rounds.  The final maximal member is handed to
    ``shorten``, whose dichotomy produces the stationary candidate.
    """
    from .shortening import _polish_stationary, counted_components, project_to_net

    cfg = cfg or FlowConfig()
    m = fam.manifold
    members = list(fam.members)
    round_max = [max(c.length() for c in members)]
    best_dip: tuple[float, PolygonalCycle] | None = None
    best_dip_round = -1
    r = 0
    while r < 3 * rounds:
        members = _pulldown_round(members, cfg)
        lengths = [c.length() for c in members]
        round_max.append(max(lengths))
        r += 1
        ach = int(np.argmax(lengths))
        c = members[ach]
        rc = cfg.resolved(m, max(c.k, 1))
        if lengths[ach] < rc.eps_collapse:
            if r >= rounds:
                break
            continue
        v = deformation_vector(c)
        if best_dip is None or v.norm_sq < best_dip[0]:
            best_dip = (v.norm_sq, c)
            best_dip_round = r
        rms = math.sqrt(v.norm_sq / max(counted_components(v), 1))
        if rms < 0.7 * rc.polish_trigger_rms:
            # the maximal member is pinned on the saddle; certify it now
            break
        if r >= rounds:
            # extend past the base budget only while the family is still
            # sliding toward the saddle
            if round_max[-2] - round_max[-1] <= 2e-4 * m.diam:
                break

    width = min(round_max)
    lengths = [c.length() for c in members]
    achiever = int(np.argmax(lengths))
    rcfg = cfg.resolved(m, max(members[achiever].k, 1))
    def dip_is_promising(dip) -> bool:
        if dip is None:
            return False
        v_dip = deformation_vector(dip[1])
        rms = math.sqrt(dip[0] / max(counted_components(v_dip), 1))
        rc = cfg.resolved(m, max(dip[1].k, 1))
        return rms < 3.0 * rc.polish_trigger_rms

    promising = dip_is_promising(best_dip)
    candidate: ShortenOutcome | None = None
    if lengths[achiever] >= rcfg.eps_collapse:
        floor = 0.7 * best_dip[1].length() if promising else None
        try:
            candidate = shorten(members[achiever], cfg, abort_below=floor)
        except ShortenDidNotConverge as exc:
            candidate = ShortenOutcome("collapsed", None, exc.trace, None)
            candidate.status = "nonconverged"
    if (candidate is None or not candidate.stationary) and promising:
        # a discrete family can hop past an isolated saddle; the straddling
        # member recorded at the crossing is the honest fallback candidate
        dip_cfg = cfg.resolved(m, max(best_dip[1].k, 1))
        polished = _polish_stationary(best_dip[1], dip_cfg)
        if polished is not None:
            net = project_to_net(polished, dip_cfg.merge_tol)
            candidate = ShortenOutcome("stationary", net,
                                       candidate.trace if candidate else [],
                                       polished)
    report = MinMaxReport(width, achiever, candidate, None, round_max)
    if candidate is not None and candidate.stationary:
        report.certificate_mass = candidate.net.total_mass
        report.certificate_residual = candidate.net.residual
    return report


# ----------------------------------------------------------------------
# verification drivers
# ----------------------------------------------------------------------


def family_to_json(fam: CycleFamily) -> list[dict]:
    """Stable JSON form of a family: serialized cycles with parameters."""
    out = []
    for t, member in zip(fam.params, fam.members):
        out.append({
            "t": float(t),
            "k": member.k,
            "segments_per_chain": member.N,
            "length": member.length(),
            "chains": [[[float(x) for x in row] for row in member.chain_vertices(i)]
                       for i in range(member.k)],
        })
    return out


def farthest_point_vertices(m: Manifold, rng: np.random.Generator,
                            n_vertices: int = 4, candidates: int = 512) -> list[Array]:
    """Greedy farthest-point sample of n_vertices over random candidates."""
    pool = m.random_point_batch(rng, candidates)
    chosen = [pool[0]]
    for _ in range(n_vertices - 1):
        best, best_d = None, -1.0
        for cand in pool:
            d = min(float(m.distance_batch(cand[None], q[None])[0]) for q in chosen)
            if d > best_d:
                best, best_d = cand, d
        chosen.append(best)
    return chosen


def _fps_spread(m: Manifold, rng: np.random.Generator, candidates: int = 512) -> list[Array]:
    # chordal / chart proxy keeps the default vertex choice cheap on
    # manifolds without closed-form distances; spread is all that matters.
    # Scores are capped below the maximal separation so the vertices stay
    # clear of each other's cut loci (near-antipodal pairs make the edge
    # boundary-value problems needlessly ill-conditioned).
    pool = m.random_point_batch(rng, candidates)
    sample = pool[:64]
    dmax = 0.0
    for q in sample:
        d = m.local_distance(np.repeat(q[None], pool.shape[0], axis=0), pool)
        dmax = max(dmax, float(np.max(d)))
    cap = 0.9 * dmax
    chosen = [pool[0]]
    for _ in range(3):
        dmin = None
        for q in chosen:
            d = m.local_distance(np.repeat(q[None], pool.shape[0], axis=0), pool)
            dmin = d if dmin is None else np.minimum(dmin, d)
        chosen.append(pool[int(np.argmax(np.minimum(dmin, cap)))])
    return chosen


def verify_theorem1_q2(m: Manifold, vertices=None, cfg: FlowConfig | None = None,
                       segments: int | None = None, members: int | None = 33,
                       rounds: int = 20, seed: int = 0,
                       tol_bound: float | None = None) -> MinMaxReport:
    """Refined sweepout + min-max, checked against the 4d bound.

    A contraction that terminates stationary short-circuits: its net is the
    certificate.  Requires a simply connected (sphere-like) builtin.
    """
    if not getattr(m, "sphere_like", False):
        raise PreconditionError("verify_theorem1_q2 needs a sphere-like manifold")
    cfg = cfg or FlowConfig()
    tol = tol_bound if tol_bound is not None else 1e-2 * m.diam
    bound_value = 4.0 * m.diam
    if vertices is None:
        vertices = _fps_spread(m, np.random.default_rng(seed))
    try:
        fam = two_disc_refined_sweepout(m, vertices, segments=segments,
                                        members=members, cfg=cfg)
    except ShortCycleFound as hit:
        outcome = ShortenOutcome("stationary", hit.net, [], None)
        ok = hit.net.total_mass <= bound_value + tol
        return MinMaxReport(hit.net.total_mass, 0, outcome,
                            ("4d", bound_value, ok), [hit.net.total_mass],
                            hit.net.total_mass, hit.net.residual)
    report = minmax(fam, cfg, rounds=rounds)
    ok = report.width_estimate <= bound_value + tol
    if report.certificate_mass is not None:
        ok = ok and report.certificate_mass <= bound_value + tol
    report.bound_checked = ("4d", bound_value, ok)
    return report


def shortest_wrap_candidate(m: Manifold, segments: int | None = None,
                            noise: float = 0.0,
                            rng: np.random.Generator | None = None) -> PolygonalCycle:
    """A shortest nontrivial combinatorial loop candidate on a builtin torus."""
    if m.kind == "flat_torus":
        b1 = m._reduced[:, 0]
        winding = np.rint(m.basis_inv @ b1).astype(int)
        if np.all(winding == 0):
            winding = np.array([1, 0])
        L = float(np.linalg.norm(b1))
        N = segments if segments is not None else choose_N(1.5 * L, m.inj)
        return torus_wrap_cycle(m, tuple(int(w) for w in winding), N,
                                noise=noise, rng=rng)
    if m.kind == "torus_of_revolution":
        # meridian (tube) circle: the shortest of the obvious geodesic classes
        L = 2.0 * math.pi * m.minor
        N = segments if segments is not None else choose_N(1.5 * L, m.inj)
        phis = 2.0 * math.pi * np.arange(N + 1) / N
        pts = np.stack([np.zeros_like(phis), phis], axis=1)
        pts[-1] = pts[0]
        if noise > 0.0 and rng is not None:
            pts[1:-1, 0] += noise * rng.normal(size=N - 1)
        return build_cycle(m, [pts])
    raise PreconditionError("no wrap candidate for this manifold kind")


def verify_nonsimply_connected(m: Manifold, cfg: FlowConfig | None = None,
                               segments: int | None = None, noise: float = 0.0,
                               seed: int = 0,
                               tol_bound: float | None = None) -> MinMaxReport:
    """Shorten a wrapping loop and check the closed-geodesic mass against 2d."""
    if m.kind not in ("flat_torus", "torus_of_revolution"):
        raise PreconditionError("verify_nonsimply_connected needs a builtin torus")
    cfg = cfg or FlowConfig()
    tol = tol_bound if tol_bound is not None else 1e-2 * m.diam
    rng = np.random.default_rng(seed)
    candidate = shortest_wrap_candidate(m, segments=segments, noise=noise, rng=rng)
    initial = candidate.length()
    outcome = shorten(candidate, cfg)
    bound_value = 2.0 * m.diam
    mass = outcome.net.total_mass if outcome.stationary else 0.0
    ok = outcome.stationary and mass <= bound_value + tol
    report = MinMaxReport(initial, 0, outcome, ("2d", bound_value, ok), [initial])
    if outcome.stationary:
        report.certificate_mass = mass
        report.certificate_residual = outcome.net.residual
    return report
