"""Curve-shortening machinery: Birkhoff deformation, steepest descent, shorten.

The pipeline alternates two length-non-increasing operators on a piecewise
geodesic cycle:

* :func:`birkhoff_step` subdivides every chain at equal-arclength points and
  replaces each piece by the minimizing geodesic, keeping chain endpoints
  fixed;
* :func:`flow_step` moves every multiple point and double point along the
  steepest-descent deformation vector, with the step budget
  ``t_star = inj / (16 k)`` guaranteeing segments never outgrow inj/2
  between Birkhoff passes.

:func:`shorten` iterates the pair with a backtracking line search and
realizes the dichotomy: the cycle either collapses below a length threshold
or converges to a stationarity certificate.  Descent alone escapes saddle
points, so when the deformation norm dips low the loop hands the snapshot to
a least-squares stationarity polish; a polished cycle whose residual clears
the threshold is returned as the stationary net.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from .cycles import (
    CycleType,
    GeodesicNet,
    PolygonalCycle,
    _assemble,
    _assemble_many,
    _segment_endpoints,
    classify_type,
    default_merge_tol,
    project_to_net,
)
from .errors import (
    BirkhoffPreconditionError,
    GeonetsError,
    NumericError,
    PreconditionError,
    ShortenDidNotConverge,
    StepTooLongError,
)
from .manifolds import Manifold

Array = np.ndarray


def choose_N(x: float, inj: float) -> int:
    """Segments per chain needed for cycles of length <= x: floor(4x/inj) + 1."""
    if x <= 0 or inj <= 0:
        raise PreconditionError("x and inj must be positive")
    return int(math.floor(4.0 * x / inj)) + 1


# ----------------------------------------------------------------------
# deformation vector
# ----------------------------------------------------------------------


@dataclass(eq=False)
class DeformationVector:
    """Steepest-descent direction: one tangent vector per cycle vertex.

    ``cluster_id[i, j-1]`` labels the cluster of double point (i, j); -1
    marks a standalone double point.  All double points of one cluster carry
    the same component; negligible clusters (attached through constant
    segments to a multiple point) adopt the multiple point's component and
    contribute nothing to ``norm_sq``, every other cluster is counted once.
    """

    block_comp: Array            # (J, d)
    interior_comp: Array         # (k, N-1, d)
    cluster_id: Array            # (k, N-1) int
    negligible: Array            # (n_clusters,) bool
    norm_sq: float


def _first_nonconstant(mask_row, from_side: int) -> int | None:
    n = len(mask_row)
    rng = range(n) if from_side == 0 else range(n - 1, -1, -1)
    for j in rng:
        if not mask_row[j]:
            return j
    return None


def deformation_vector(c: PolygonalCycle) -> DeformationVector:
    m = c.manifold
    k, N, d = c.k, c.N, c.mp.shape[1]
    mask = c.ctype.constant_mask
    lut = c.ctype.block_lookup()

    block_comp = np.zeros((c.J, d))
    for i in range(k):
        j0 = _first_nonconstant(mask[i], 0)
        if j0 is None:
            continue  # fully constant chain contributes no tangents
        j1 = _first_nonconstant(mask[i], 1)
        block_comp[lut[2 * i]] += c.tan_start[i, j0]
        block_comp[lut[2 * i + 1]] += c.tan_end[i, j1]

    interior_comp = np.zeros((k, max(N - 1, 0), d))
    cluster_id = -np.ones((k, max(N - 1, 0)), dtype=int)
    negligible: list[bool] = []

    for i in range(k):
        j = 1
        while j <= N - 1:
            left_const = mask[i][j - 1]
            right_const = mask[i][j]
            if not left_const and not right_const:
                interior_comp[i, j - 1] = c.tan_end[i, j - 1] + c.tan_start[i, j]
                j += 1
                continue
            # walk the maximal run of junctions glued by constant segments
            run_start = j
            jj = j
            while jj + 1 <= N - 1 and mask[i][jj]:
                jj += 1
            run_end = jj
            # bounding non-constant segments
            left_seg = run_start - 1 if not mask[i][run_start - 1] else None
            right_seg = run_end if run_end <= N - 1 and not mask[i][run_end] else None
            cid = len(negligible)
            if left_seg is None or right_seg is None:
                comp = block_comp[lut[2 * i]] if left_seg is None else block_comp[lut[2 * i + 1]]
                if left_seg is None and right_seg is None:
                    comp = block_comp[lut[2 * i]]
                negligible.append(True)
            else:
                comp = c.tan_end[i, left_seg] + c.tan_start[i, right_seg]
                negligible.append(False)
            for jx in range(run_start, run_end + 1):
                interior_comp[i, jx - 1] = comp
                cluster_id[i, jx - 1] = cid
            j = run_end + 1

    positions_mp = c.mp
    norm_sq = float(np.sum(m.inner_batch(positions_mp, block_comp, block_comp)))
    neg = np.array(negligible, dtype=bool)
    counted_clusters: set[int] = set()
    for i in range(k):
        for j in range(1, N):
            cid = cluster_id[i, j - 1]
            pos = c.interior[i, j - 1][None]
            comp = interior_comp[i, j - 1][None]
            if cid < 0:
                norm_sq += float(m.inner_batch(pos, comp, comp)[0])
            elif not neg[cid] and cid not in counted_clusters:
                counted_clusters.add(cid)
                norm_sq += float(m.inner_batch(pos, comp, comp)[0])
    return DeformationVector(block_comp, interior_comp, cluster_id, neg, norm_sq)


def counted_components(v: DeformationVector) -> int:
    n = v.block_comp.shape[0]
    k, nm1 = v.cluster_id.shape
    seen: set[int] = set()
    for i in range(k):
        for j in range(nm1):
            cid = v.cluster_id[i, j]
            if cid < 0:
                n += 1
            elif not v.negligible[cid] and cid not in seen:
                seen.add(cid)
                n += 1
    return n


def _direction_fields(c: PolygonalCycle, direction) -> tuple[Array, Array]:
    block = np.asarray(direction.block_comp, dtype=float)
    inter = np.asarray(direction.interior_comp, dtype=float)
    if block.shape != (c.J, c.mp.shape[1]) or inter.shape[:2] != (c.k, max(c.N - 1, 0)):
        raise PreconditionError("direction field shape does not match the cycle")
    return block, inter


def first_variation(c: PolygonalCycle, direction) -> float:
    """Analytic first variation of cycle length along a per-vertex field.

    The field must supply ``block_comp`` and ``interior_comp`` arrays (a
    DeformationVector works).  Constant segments are skipped: they only vary
    differentiably under cluster-consistent fields, which is how the flow
    moves them.
    """
    block, inter = _direction_fields(c, direction)
    m = c.manifold
    k, N, d = c.k, c.N, c.mp.shape[1]
    lut = c.ctype.block_lookup()
    mask = c.ctype.constant_mask
    starts, ends = _segment_endpoints(c)

    w_start = np.zeros((k, N, d))
    w_end = np.zeros((k, N, d))
    for i in range(k):
        w_start[i, 0] = block[lut[2 * i]]
        if N > 1:
            w_start[i, 1:] = inter[i]
            w_end[i, : N - 1] = inter[i]
        w_end[i, N - 1] = block[lut[2 * i + 1]]

    live = ~np.array(mask, dtype=bool)
    fv = 0.0
    flat = live.reshape(-1)
    sp = starts.reshape(-1, d)[flat]
    ep = ends.reshape(-1, d)[flat]
    ws = w_start.reshape(-1, d)[flat]
    we = w_end.reshape(-1, d)[flat]
    ts = c.tan_start.reshape(-1, d)[flat]
    te = c.tan_end.reshape(-1, d)[flat]
    fv -= float(np.sum(m.inner_batch(sp, ws, ts)))
    fv -= float(np.sum(m.inner_batch(ep, we, te)))
    return fv


# ----------------------------------------------------------------------
# Birkhoff deformation
# ----------------------------------------------------------------------


def _birkhoff_prepare(c: PolygonalCycle, N_out: int):
    """Subdivision shoot requests and the interior template for one cycle."""
    m = c.manifold
    k, d = c.k, c.mp.shape[1]
    chain_len = c.lengths.sum(axis=1)
    budget = N_out * m.inj / 4.0
    if np.any(chain_len > budget * (1.0 + 1e-9)):
        raise BirkhoffPreconditionError(
            f"chain length {chain_len.max():.6g} exceeds N inj/4 = {budget:.6g}; "
            f"re-run with N >= {choose_N(float(chain_len.max()), m.inj)}"
        )
    tol = default_merge_tol(m)
    starts, _ = _segment_endpoints(c)
    shoot_p, shoot_v, shoot_t, where = [], [], [], []
    new_interior = np.zeros((k, N_out - 1, d)) if N_out > 1 else np.zeros((k, 0, d))
    lut = c.ctype.block_lookup()
    for i in range(k):
        L = float(chain_len[i])
        if L <= tol:
            # constant chain: interior points sit on the start multiple point
            for jx in range(N_out - 1):
                new_interior[i, jx] = c.mp[lut[2 * i]]
            continue
        cum = np.concatenate([[0.0], np.cumsum(c.lengths[i])])
        targets = L * np.arange(1, N_out) / N_out
        seg = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, c.N - 1)
        for t_idx, (s, jseg) in enumerate(zip(targets, seg)):
            seg_len = float(c.lengths[i, jseg])
            frac = (s - cum[jseg]) / seg_len if seg_len > 0 else 0.0
            shoot_p.append(starts[i, jseg])
            shoot_v.append(c.v_init[i, jseg])
            shoot_t.append(frac)
            where.append((i, t_idx))
    ctype = CycleType(c.ctype.blocks,
                      tuple(tuple(False for _ in range(N_out)) for _ in range(k)))
    return shoot_p, shoot_v, shoot_t, where, new_interior, ctype


def birkhoff_step_many(cycles: list[PolygonalCycle],
                       Ns: list[int] | None = None) -> list[PolygonalCycle]:
    """Birkhoff pass over several cycles with shared batched solves."""
    if not cycles:
        return []
    m = cycles[0].manifold
    preps = []
    all_p, all_v, all_t = [], [], []
    marks = []
    for ci, c in enumerate(cycles):
        N_out = c.N if Ns is None else int(Ns[ci])
        sp, sv, st, where, tmpl, ctype = _birkhoff_prepare(c, N_out)
        preps.append((where, tmpl, ctype))
        for row in range(len(sp)):
            marks.append(ci)
        all_p.extend(sp)
        all_v.extend(sv)
        all_t.extend(st)
    if all_p:
        P1, _ = m.shoot_batch(np.array(all_p), np.array(all_v), np.array(all_t))
        P1 = m.wrap_points(P1)
        cursor = 0
        for ci, c in enumerate(cycles):
            where, tmpl, _ = preps[ci]
            for (i, t_idx) in where:
                tmpl[i, t_idx] = P1[cursor]
                cursor += 1
    specs = []
    for ci, c in enumerate(cycles):
        # previous velocities are good Newton guesses when N is unchanged
        warm = c.v_init if preps[ci][2].n_segments == c.N else None
        specs.append({"ctype": preps[ci][2], "mp": c.mp.copy(),
                      "interior": preps[ci][1], "v_warm": warm})
    out = _assemble_many(m, specs, strict=True)
    return [x for x in out]


def birkhoff_step(c: PolygonalCycle, N: int | None = None) -> PolygonalCycle:
    """One Birkhoff pass: N equal-arclength pieces per chain, re-minimized.

    Chain endpoints are untouched, the length never increases, and every
    output segment is at most inj/4 provided each chain is no longer than
    N inj / 4 (checked).
    """
    return birkhoff_step_many([c], None if N is None else [N])[0]


# ----------------------------------------------------------------------
# flow steps
# ----------------------------------------------------------------------


def t_star_for(m: Manifold, k: int) -> float:
    return m.inj / (16.0 * k)


def dt_scale_cap(c: PolygonalCycle, v: DeformationVector) -> float:
    """Largest step worth trying: vertex moves about a quarter of the length.

    The t_star budget is safe but far too coarse once a cycle is much
    smaller than inj; without this cap the backtracking line search burns
    its iterations re-discovering the scale every round.
    """
    m = c.manifold
    vmax = 0.0
    if v.block_comp.size:
        vmax = float(np.max(m.norm_batch(c.mp, v.block_comp)))
    if v.interior_comp.size:
        flat_p = c.interior.reshape(-1, c.mp.shape[1])
        flat_v = v.interior_comp.reshape(-1, c.mp.shape[1])
        vmax = max(vmax, float(np.max(m.norm_batch(flat_p, flat_v))))
    if vmax <= 0.0:
        return math.inf
    return 0.25 * max(c.length(), 1e-300) / vmax


def flow_step(c: PolygonalCycle, v: DeformationVector, dt: float) -> PolygonalCycle:
    """Move every vertex along its deformation component for time dt.

    The combinatorial type (partition object and constant-segment mask) is
    carried over untouched; a step that would stretch any segment past inj/2
    raises StepTooLongError for the caller to shrink or re-Birkhoff.
    """
    m = c.manifold
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    if dt > t_star_for(m, c.k) * (1.0 + 1e-12):
        raise PreconditionError("dt exceeds the safe budget t_star = inj/(16 k)")
    block, inter = _direction_fields(c, v)
    if not (np.all(np.isfinite(block)) and np.all(np.isfinite(inter))):
        raise PreconditionError("deformation components must be finite")

    new_mp = c.mp.copy()
    moving = np.linalg.norm(block, axis=1) > 0
    if np.any(moving):
        P1, _ = m.shoot_batch(c.mp[moving], block[moving], dt)
        new_mp[moving] = m.wrap_points(P1)
    if c.N > 1:
        flat_pos = c.interior.reshape(-1, c.mp.shape[1])
        flat_dir = inter.reshape(-1, c.mp.shape[1])
        new_interior = flat_pos.copy()
        mv = np.linalg.norm(flat_dir, axis=1) > 0
        if np.any(mv):
            P1, _ = m.shoot_batch(flat_pos[mv], flat_dir[mv], dt)
            new_interior[mv] = m.wrap_points(P1)
        new_interior = new_interior.reshape(c.interior.shape)
    else:
        new_interior = c.interior.copy()

    try:
        out = _assemble(m, c.ctype, new_mp, new_interior, v_warm=c.v_init,
                        keep_mask=True)
    except (PreconditionError, NumericError) as exc:
        raise StepTooLongError(str(exc)) from exc
    out.ctype = c.ctype  # same object: type preservation is structural
    return out


# ----------------------------------------------------------------------
# the shorten loop
# ----------------------------------------------------------------------


@dataclass
class FlowConfig:
    """Thresholds and budgets of the shortening flow.

    ``None`` fields resolve to manifold-dependent defaults:
    eps_stationary=1e-5, eps_collapse=1e-4*diam, t_star=inj/(16 k),
    merge_tol=1e-6*diam.
    """

    eps_stationary: float | None = None
    eps_collapse: float | None = None
    t_star: float | None = None
    max_outer_iters: int = 800
    line_search_shrink: float = 0.5
    merge_tol: float | None = None
    polish: bool = True
    polish_trigger_rms: float = 0.05
    merge_and_restart: bool = False

    def resolved(self, m: Manifold, k: int) -> "FlowConfig":
        return replace(
            self,
            eps_stationary=self.eps_stationary if self.eps_stationary is not None else 1e-5,
            eps_collapse=self.eps_collapse if self.eps_collapse is not None else 1e-4 * m.diam,
            t_star=self.t_star if self.t_star is not None else t_star_for(m, k),
            merge_tol=self.merge_tol if self.merge_tol is not None else default_merge_tol(m),
        )


@dataclass
class TraceRow:
    iteration: int
    length: float
    norm_sq: float
    step_dt: float
    event: str


@dataclass(eq=False)
class ShortenOutcome:
    status: str  # "collapsed" | "stationary"
    net: GeodesicNet | None
    trace: list[TraceRow]
    final_cycle: PolygonalCycle | None = None

    @property
    def collapsed(self) -> bool:
        return self.status == "collapsed"

    @property
    def stationary(self) -> bool:
        return self.status == "stationary"


def trace_to_csv(trace: list[TraceRow]) -> str:
    lines = ["iteration,length,norm_sq,step_dt,event"]
    for r in trace:
        lines.append(f"{r.iteration},{r.length!r},{r.norm_sq!r},{r.step_dt!r},{r.event}")
    return "\n".join(lines) + "\n"


def _block_proximity(c: PolygonalCycle, tol: float) -> bool:
    if c.J < 2:
        return False
    for a in range(c.J):
        rest = c.mp[a + 1:]
        if rest.size == 0:
            continue
        dd = c.manifold.local_distance(np.repeat(c.mp[a][None], rest.shape[0], axis=0), rest)
        if np.any(dd <= tol):
            return True
    return False


def _closed_geodesic_polish(c: PolygonalCycle, cfg: FlowConfig) -> PolygonalCycle | None:
    """Refine a single-loop cycle to a nearby closed geodesic by shooting.

    Unknowns are the basepoint (2 tangent coordinates), the launch angle and
    the loop length; the residual asks the unit-speed geodesic to return to
    its start with its starting direction.  A solution is only accepted when
    it stays close to the input loop (comparable length, basepoint within
    inj/4), so a certificate cannot teleport to an unrelated geodesic.
    """
    m = c.manifold
    L0 = c.length()
    p0 = c.mp[0].copy()
    mask = c.ctype.constant_mask[0]
    j0 = _first_nonconstant(mask, 0)
    if j0 is None:
        return None
    dir0 = c.tan_start[0, j0].copy()
    E1_0, E2_0 = m.frame_batch(p0[None])
    th0 = math.atan2(float(m.inner_batch(p0[None], dir0[None], E2_0)[0]),
                     float(m.inner_batch(p0[None], dir0[None], E1_0)[0]))

    def state(x):
        p = m.wrap_points((p0 + x[0] * E1_0[0] + x[1] * E2_0[0])[None])
        e1, e2 = m.frame_batch(p)
        th = th0 + x[2]
        v = math.cos(th) * e1 + math.sin(th) * e2
        L = L0 * math.exp(x[3])
        q, w = m.shoot_batch(p, v, L)
        return p, e1, e2, th, v, L, q, w

    def residual(x):
        if abs(x[3]) > 1.5:
            return np.full(4, 1e3)
        p, e1, e2, th, v, L, q, w = state(x)
        D = m.endpoint_diff(q, p)
        wq = m.unit_batch(q, w)
        perp = -math.sin(th) * e1 + math.cos(th) * e2
        slide = m.endpoint_diff(p, p0[None])
        return np.array([
            float(m.inner_batch(p, D, e1)[0]),
            float(m.inner_batch(p, D, e2)[0]),
            float(m.inner_batch(q, wq, perp)[0]),
            # gauge: the basepoint may not slide along the launch direction
            0.1 * float(m.inner_batch(p0[None], slide, dir0[None])[0]),
        ])

    try:
        sol = least_squares(residual, np.zeros(4), method="lm",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=400)
    except Exception:
        return None
    x = sol.x
    L = L0 * math.exp(x[3])
    # locality guards: stay comparable and close to the input loop (the
    # basepoint may slide along it, so measure distance to the vertex set)
    if not (0.7 * L0 <= L <= 1.5 * L0):
        return None
    p, e1, e2, th, v, L, q, w = state(x)
    verts_in = c.all_vertex_positions()
    d_to_loop = float(np.min(m.local_distance(
        np.repeat(p, verts_in.shape[0], axis=0), verts_in)))
    if d_to_loop > 0.3 * m.inj:
        return None
    n_out = max(choose_N(1.05 * L, m.inj), 8)
    fracs = np.arange(1, n_out) / n_out
    pts, _ = m.shoot_batch(np.repeat(p, n_out - 1, axis=0),
                           np.repeat(v * L, n_out - 1, axis=0), fracs)
    verts = np.concatenate([p, m.wrap_points(pts), p], axis=0)
    from .cycles import build_cycle
    try:
        refined = build_cycle(m, [verts], merge_tol=cfg.merge_tol)
    except GeonetsError:
        return None
    vdef = deformation_vector(refined)
    if vdef.norm_sq >= cfg.eps_stationary**2:
        return None
    if refined.length() < 2.0 * cfg.eps_collapse:
        return None
    return refined


def _polish_stationary(c: PolygonalCycle, cfg: FlowConfig) -> PolygonalCycle | None:
    """Least-squares refinement of the vertex positions toward stationarity.

    Single-loop inputs route to closed-geodesic shooting (on surfaces a
    strongly stationary one-chain cycle is a closed geodesic).  The general
    path works on a coarse re-polygonalization (enough segments for
    validity, few enough for a cheap finite-difference Jacobian) and only
    when the cycle has no constant segments, which is the generic
    saddle-dip situation.  Returns the refined cycle when its deformation
    norm clears the stationarity threshold, else None.
    """
    m = c.manifold
    total = c.length()
    if total < 4.0 * cfg.eps_collapse:
        return None
    chain_lens = c.lengths.sum(axis=1)
    live = [i for i in range(c.k) if chain_lens[i] > cfg.merge_tol * c.N]
    if not live:
        return None
    if len(live) < c.k:
        # fully constant chains carry no geometry; refine without them
        from .cycles import build_cycle
        try:
            c = build_cycle(m, [c.chain_vertices(i) for i in live],
                            merge_tol=cfg.merge_tol)
        except GeonetsError:
            return None
    if c.k == 1:
        refined = _closed_geodesic_polish(c, cfg)
        if refined is not None:
            return refined
        return None
    max_chain = float(c.lengths.sum(axis=1).max())
    n_coarse = max(3, choose_N(max(max_chain * 1.3, 1e-12), m.inj))
    try:
        base = birkhoff_step(c, min(max(n_coarse, 3), c.N)) if c.N >= 3 else c
    except GeonetsError:
        return None
    if any(any(row) for row in base.ctype.constant_mask):
        return None

    d = base.mp.shape[1]
    kk, NN = base.k, base.N
    if 2 * (base.J + kk * (NN - 1)) > 44:
        # a finite-difference Jacobian at this size is not worth its cost;
        # the flow keeps running instead
        return None
    mp0 = base.mp.copy()
    in0 = base.interior.copy()
    e1_mp, e2_mp = m.frame_batch(mp0)
    flat_in0 = in0.reshape(-1, d)
    e1_in, e2_in = m.frame_batch(flat_in0) if flat_in0.size else (flat_in0, flat_in0)
    n_mp = mp0.shape[0]
    n_in = flat_in0.shape[0]

    def rebuild(x: Array) -> PolygonalCycle:
        xm = x[: 2 * n_mp].reshape(n_mp, 2)
        xi = x[2 * n_mp:].reshape(n_in, 2)
        mp = m.wrap_points(mp0 + xm[:, 0:1] * e1_mp + xm[:, 1:2] * e2_mp)
        if n_in:
            fi = m.wrap_points(flat_in0 + xi[:, 0:1] * e1_in + xi[:, 1:2] * e2_in)
        else:
            fi = flat_in0
        return _assemble(m, base.ctype, mp, fi.reshape(in0.shape),
                         v_warm=base.v_init, keep_mask=True)

    def residual(x: Array) -> Array:
        try:
            cc = rebuild(x)
        except GeonetsError:
            return np.full(2 * (n_mp + n_in), 1e3)
        v = deformation_vector(cc)
        r = np.empty(2 * (n_mp + n_in))
        f1, f2 = m.frame_batch(cc.mp)
        r[: 2 * n_mp: 2] = m.inner_batch(cc.mp, v.block_comp, f1)
        r[1: 2 * n_mp: 2] = m.inner_batch(cc.mp, v.block_comp, f2)
        if n_in:
            fp = cc.interior.reshape(-1, d)
            fc = v.interior_comp.reshape(-1, d)
            g1, g2 = m.frame_batch(fp)
            r[2 * n_mp:: 2] = m.inner_batch(fp, fc, g1)
            r[2 * n_mp + 1:: 2] = m.inner_batch(fp, fc, g2)
        return r

    n_par = 2 * (n_mp + n_in)
    try:
        sol = least_squares(residual, np.zeros(n_par), method="lm",
                            xtol=1e-14, ftol=1e-14, gtol=1e-14,
                            max_nfev=12 * (n_par + 1))
        refined = rebuild(sol.x)
    except GeonetsError:
        return None
    v = deformation_vector(refined)
    if v.norm_sq >= cfg.eps_stationary**2:
        return None
    if refined.length() < 2.0 * cfg.eps_collapse:
        return None
    if refined.length() > 1.5 * total + m.inj:
        return None
    return refined


def shorten(c: PolygonalCycle, cfg: FlowConfig | None = None,
            observer=None, abort_below: float | None = None) -> ShortenOutcome:
    """Run the Birkhoff / steepest-descent loop until collapse or stationarity.

    ``observer(cycle, iteration)``, when given, is called with the current
    state at the top of every outer iteration; sweepout builders use it to
    record contraction homotopies.  ``abort_below`` short-circuits to a
    collapse outcome once the length falls under that floor (callers that
    only care about stationary cycles above a known scale use it to skip
    grinding out the full collapse).

    Raises ShortenDidNotConverge (with the full trace) when the iteration
    budget runs out, which signals a near-stationary slow manifold rather
    than silently returning.
    """
    cfg = (cfg or FlowConfig()).resolved(c.manifold, c.k)
    m = c.manifold
    trace: list[TraceRow] = []
    eps_c = cfg.eps_collapse
    eps_s2 = cfg.eps_stationary**2
    last_polish_norm = math.inf
    tstar = cfg.t_star

    def finish_stationary(cc: PolygonalCycle, it: int, dt: float, note: str) -> ShortenOutcome:
        net = project_to_net(cc, cfg.merge_tol)
        trace.append(TraceRow(it, cc.length(), deformation_vector(cc).norm_sq, dt, note))
        return ShortenOutcome("stationary", net, trace, cc)

    dt_hint = tstar
    for it in range(cfg.max_outer_iters):
        if observer is not None:
            observer(c, it)
        c = birkhoff_step(c)
        length = c.length()
        all_constant = all(all(row) for row in c.ctype.constant_mask)
        if length < eps_c or all_constant:
            # an all-constant husk has zero deformation norm but is a
            # collapse, not a stationarity certificate
            trace.append(TraceRow(it, length, 0.0, 0.0, "collapsed"))
            return ShortenOutcome("collapsed", None, trace, c)
        if abort_below is not None and length < abort_below:
            trace.append(TraceRow(it, length, 0.0, 0.0, "collapse-abort"))
            return ShortenOutcome("collapsed", None, trace, c)
        proximal = _block_proximity(c, 8.0 * cfg.merge_tol)
        if proximal and cfg.merge_and_restart:
            merged_type = classify_type(c, 8.0 * cfg.merge_tol)
            if merged_type.J < c.J:
                lut_old = c.ctype.block_lookup()
                endpoints = np.array([c.mp[lut_old[e]] for e in range(2 * c.k)])
                mp = np.empty((merged_type.J, c.mp.shape[1]))
                for j, b in enumerate(merged_type.blocks):
                    mp[j] = endpoints[b[0]]
                c = _assemble(m, merged_type, mp, c.interior.copy())
                trace.append(TraceRow(it, c.length(), 0.0, 0.0, "merged-types"))
                continue

        v = deformation_vector(c)
        if v.norm_sq < eps_s2:
            return finish_stationary(c, it, 0.0, "stationary")

        rms = math.sqrt(v.norm_sq / max(counted_components(v), 1))
        if cfg.polish and rms < cfg.polish_trigger_rms and v.norm_sq < 0.25 * last_polish_norm:
            last_polish_norm = v.norm_sq
            polished = _polish_stationary(c, cfg)
            if polished is not None:
                return finish_stationary(polished, it, 0.0, "stationary-polished")

        remaining = tstar
        batch_events = "proximity" if proximal else "flow"
        dt_last = 0.0
        stalled = True
        while remaining > 1e-9 * tstar:
            dt = min(remaining, dt_hint, dt_scale_cap(c, v))
            accepted = None
            while dt > 1e-7 * tstar:
                try:
                    cand = flow_step(c, v, dt)
                except StepTooLongError:
                    dt *= cfg.line_search_shrink
                    continue
                if cand.length() < length:
                    accepted = cand
                    break
                dt *= cfg.line_search_shrink
            if accepted is None:
                break
            stalled = False
            c = accepted
            length = c.length()
            dt_last = dt
            dt_hint = min(tstar, 2.0 * dt)
            remaining -= dt
            if length < eps_c:
                trace.append(TraceRow(it, length, v.norm_sq, dt, "collapsed"))
                return ShortenOutcome("collapsed", None, trace, c)
            v = deformation_vector(c)
            if v.norm_sq < eps_s2:
                return finish_stationary(c, it, dt, "stationary")

        if stalled:
            # no descent at any step size: numerically pinned near a critical
            # point; polish decides, otherwise report non-convergence below
            polished = _polish_stationary(c, cfg) if cfg.polish else None
            if polished is not None:
                return finish_stationary(polished, it, 0.0, "stationary-polished")
            trace.append(TraceRow(it, length, v.norm_sq, 0.0, "stalled"))
            raise ShortenDidNotConverge(
                f"line search found no descent at iteration {it} "
                f"(length {length:.6g}, |v|^2 {v.norm_sq:.3g})", trace)

        trace.append(TraceRow(it, length, v.norm_sq, dt_last, batch_events))

    raise ShortenDidNotConverge(
        f"no collapse or stationarity within {cfg.max_outer_iters} iterations "
        f"(length {c.length():.6g})", trace)
