"""Parametrized polygonal 1-cycles, their combinatorial types, and geodesic nets.

A :class:`PolygonalCycle` is k chains of N geodesic segments with matched
endpoints.  Chain endpoints ("multiple points") are partitioned into
coincidence blocks; interior junctions ("double points") always join exactly
two consecutive segments of one chain.  The partition plus the mask of
constant segments is the cycle's :class:`CycleType`; types are partially
ordered by coarsening.

Projection to a :class:`GeodesicNet` forgets the parametrization: coincident
vertices merge, zero-length segments drop, collinear junctions straighten
away, and duplicate edges collapse into integer multiplicities.  The net
carries a stationarity residual (the worst vertex tangent imbalance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, PreconditionError, ValidationError
from .manifolds import Manifold, Point, _as_coords

Array = np.ndarray

NET_STRAIGHTEN_TOL = 1e-5  # rad; junction angle deficit below this merges edges


def default_merge_tol(m: Manifold) -> float:
    return 1e-6 * m.diam


# ----------------------------------------------------------------------
# cycle types
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CycleType:
    """Partition of the 2k chain endpoints plus the constant-segment mask.

    Endpoint ids are 2*i + side for chain i and side in {0, 1}.
    """

    blocks: tuple[tuple[int, ...], ...]
    constant_mask: tuple[tuple[bool, ...], ...]

    def __post_init__(self):
        k = len(self.constant_mask)
        ids = sorted(i for b in self.blocks for i in b)
        if ids != list(range(2 * k)):
            raise ValidationError("blocks must partition the 2k chain endpoints")
        for b in self.blocks:
            starts = sum(1 for e in b if e % 2 == 0)
            if 2 * starts != len(b):
                raise ValidationError(
                    "each block needs equally many chain starts and chain ends"
                )

    @property
    def k(self) -> int:
        return len(self.constant_mask)

    @property
    def n_segments(self) -> int:
        return len(self.constant_mask[0]) if self.constant_mask else 0

    @property
    def J(self) -> int:
        """Number of multiple points."""
        return len(self.blocks)

    def block_of(self, chain: int, side: int) -> int:
        e = 2 * chain + side
        for j, b in enumerate(self.blocks):
            if e in b:
                return j
        raise KeyError(e)

    def block_lookup(self) -> dict[int, int]:
        return {e: j for j, b in enumerate(self.blocks) for e in b}

    def coarsens(self, other: "CycleType") -> bool:
        """True when every block of ``other`` sits inside one of ours."""
        mine = self.block_lookup()
        for b in other.blocks:
            owners = {mine[e] for e in b}
            if len(owners) != 1:
                return False
        return True


def canonical_blocks(groups) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted((tuple(sorted(g)) for g in groups), key=lambda b: b[0]))


def type_higher_than(a: CycleType, b: CycleType) -> bool:
    """Partial order on cycle types (reflexive: a >= b).

    a is higher than b when a's endpoint partition coarsens b's and every
    segment constant in b is also constant in a.
    """
    if a.k != b.k or a.n_segments != b.n_segments:
        raise PreconditionError("types must share (k, N) to be comparable")
    if not a.coarsens(b):
        return False
    for row_a, row_b in zip(a.constant_mask, b.constant_mask):
        for ca, cb in zip(row_a, row_b):
            if cb and not ca:
                return False
    return True


@dataclass(frozen=True)
class VertexRole:
    """Identity of a cycle vertex: a partition block or a chain junction."""

    role: str  # "multiple" | "double"
    index: tuple  # (block,) or (chain, junction)
    position: Point


# ----------------------------------------------------------------------
# polygonal cycles
# ----------------------------------------------------------------------


@dataclass(eq=False)
class PolygonalCycle:
    """k chains of N geodesic segments with shared multiple-point storage.

    ``mp`` holds one position per partition block; ``interior`` the double
    points.  Chain i's vertex list is
    ``[mp[block(i,0)], interior[i, 0..N-2], mp[block(i,1)]]`` so the cycle
    condition is structural.  Geometry (segment lengths, outward unit
    tangents, shooting velocities) is cached at construction.
    """

    manifold: Manifold
    ctype: CycleType
    mp: Array
    interior: Array
    lengths: Array = field(repr=False)
    tan_start: Array = field(repr=False)
    tan_end: Array = field(repr=False)
    v_init: Array = field(repr=False)

    @property
    def k(self) -> int:
        return self.ctype.k

    @property
    def N(self) -> int:
        return self.ctype.n_segments

    @property
    def J(self) -> int:
        return self.ctype.J

    def length(self) -> float:
        return float(self.lengths.sum())

    def segment_start_positions(self) -> Array:
        return _segment_endpoints(self)[0]

    def segment_end_positions(self) -> Array:
        return _segment_endpoints(self)[1]

    def chain_vertices(self, i: int) -> Array:
        lut = self.ctype.block_lookup()
        rows = [self.mp[lut[2 * i]]]
        rows.extend(self.interior[i])
        rows.append(self.mp[lut[2 * i + 1]])
        return np.array(rows)

    def all_vertex_positions(self) -> Array:
        parts = [self.mp]
        if self.interior.size:
            parts.append(self.interior.reshape(-1, self.mp.shape[1]))
        return np.concatenate(parts, axis=0)

    def vertex_roles(self) -> list[VertexRole]:
        roles = [
            VertexRole("multiple", (j,), Point(self.mp[j].copy()))
            for j in range(self.J)
        ]
        for i in range(self.k):
            for j in range(1, self.N):
                roles.append(
                    VertexRole("double", (i, j), Point(self.interior[i, j - 1].copy()))
                )
        return roles

    def segments(self, n_samples: int = 16):
        """Materialize GeodesicSegment objects (plotting / interrogation)."""
        from .manifolds import GeodesicSegment, TangentVector

        starts, ends = _segment_endpoints(self)
        flat_p = starts.reshape(-1, starts.shape[-1])
        flat_v = self.v_init.reshape(-1, starts.shape[-1])
        traj = self.manifold.sample_batch(flat_p, flat_v, n_samples)
        out = []
        for i in range(self.k):
            row = []
            for j in range(self.N):
                f = i * self.N + j
                s = Point(starts[i, j].copy())
                e = Point(ends[i, j].copy())
                pts = traj[f]
                pts[-1] = ends[i, j]
                row.append(
                    GeodesicSegment(
                        s, e, TangentVector(s, self.v_init[i, j].copy()),
                        float(self.lengths[i, j]), tuple(Point(p.copy()) for p in pts),
                    )
                )
            out.append(row)
        return out


def _segment_endpoints(c: PolygonalCycle) -> tuple[Array, Array]:
    k, N, d = c.k, c.N, c.mp.shape[1]
    lut = c.ctype.block_lookup()
    starts = np.empty((k, N, d))
    ends = np.empty((k, N, d))
    for i in range(k):
        starts[i, 0] = c.mp[lut[2 * i]]
        if N > 1:
            starts[i, 1:] = c.interior[i]
            ends[i, : N - 1] = c.interior[i]
        ends[i, N - 1] = c.mp[lut[2 * i + 1]]
    return starts, ends


def _assemble_many(manifold: Manifold, specs: list[dict],
                   strict: bool = True) -> list[PolygonalCycle | None]:
    """Assemble several cycles with one batched boundary-value solve.

    Each spec carries ctype, mp, interior and optionally v_warm / keep_mask.
    With ``strict=False`` a cycle whose segments exceed inj/2 or whose solve
    fails comes back as None instead of raising; callers treat that as a
    rejected candidate.
    """
    d = manifold.ambient_dim
    flat_p, flat_q, flat_w = [], [], []
    shells, slices = [], []
    offset = 0
    for spec in specs:
        ctype, mp, interior = spec["ctype"], spec["mp"], spec["interior"]
        k, N = ctype.k, ctype.n_segments
        shell = PolygonalCycle(manifold, ctype, mp, interior,
                               np.zeros((k, N)), np.zeros((k, N, d)),
                               np.zeros((k, N, d)), np.zeros((k, N, d)))
        starts, ends = _segment_endpoints(shell)
        flat_p.append(starts.reshape(-1, d))
        flat_q.append(ends.reshape(-1, d))
        warm = spec.get("v_warm")
        flat_w.append(warm.reshape(-1, d) if warm is not None
                      else np.full((k * N, d), np.nan))
        shells.append(shell)
        slices.append(slice(offset, offset + k * N))
        offset += k * N

    P = np.concatenate(flat_p, axis=0)
    Q = np.concatenate(flat_q, axis=0)
    W = np.concatenate(flat_w, axis=0)
    use_warm = np.all(np.isfinite(W[np.linalg.norm(Q - P, axis=1) > 0])) if W.size else False
    guess = manifold.initial_velocity_guess(P, Q)
    if W.size:
        have = np.all(np.isfinite(W), axis=1)
        guess[have] = W[have]
    res = manifold.connect_batch(P, Q, v_guess=guess, strict=False)
    tan_s = manifold.unit_batch(P, res["v_init"])
    tan_e = manifold.unit_batch(Q, -res["v_term"])

    out: list[PolygonalCycle | None] = []
    # the inj/2 budget with slack for integrator length bias, so that exact
    # quarter-circle segments on the round sphere remain constructible
    limit = 0.5 * manifold.inj * (1.0 + 1e-7)
    tol = default_merge_tol(manifold)
    for spec, shell, sl in zip(specs, shells, slices):
        k, N = shell.ctype.k, shell.ctype.n_segments
        lengths = res["lengths"][sl].reshape(k, N)
        ok = bool(np.all(res["ok"][sl])) and float(lengths.max(initial=0.0)) <= limit
        if not ok:
            if strict:
                raise PreconditionError(
                    f"segment length {float(lengths.max(initial=0.0)):.6g} exceeds "
                    f"inj/2 = {0.5 * manifold.inj:.6g} or the solve failed"
                )
            out.append(None)
            continue
        shell.lengths = lengths
        shell.v_init = res["v_init"][sl].reshape(k, N, d)
        shell.tan_start = tan_s[sl].reshape(k, N, d)
        shell.tan_end = tan_e[sl].reshape(k, N, d)
        if not spec.get("keep_mask", False):
            mask = tuple(tuple(bool(x) for x in row) for row in (lengths <= tol))
            if mask != shell.ctype.constant_mask:
                shell.ctype = CycleType(shell.ctype.blocks, mask)
        out.append(shell)
    return out


def _assemble(manifold: Manifold, ctype: CycleType, mp: Array, interior: Array,
              v_warm: Array | None = None, keep_mask: bool = False) -> PolygonalCycle:
    """Connect all segments (batched) and cache the geometry."""
    spec = {"ctype": ctype, "mp": mp, "interior": interior,
            "v_warm": v_warm, "keep_mask": keep_mask}
    result = _assemble_many(manifold, [spec], strict=True)[0]
    assert result is not None
    return result


def cycle_length(c: PolygonalCycle) -> float:
    """Sum of all segment lengths over all chains (no mass cancellation)."""
    return c.length()


def _derive_partition(manifold: Manifold, endpoints: Array, merge_tol: float):
    """Union-find the 'coincide within merge_tol' relation on 2k endpoints."""
    n = endpoints.shape[0]
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        di = manifold.local_distance(np.repeat(endpoints[i][None], n - i - 1, axis=0),
                                     endpoints[i + 1:]) if i + 1 < n else []
        for off, dist in enumerate(di):
            if dist <= merge_tol:
                a, b = find(i), find(i + 1 + off)
                if a != b:
                    parent[b] = a
    groups: dict[int, list[int]] = {}
    for e in range(n):
        groups.setdefault(find(e), []).append(e)
    return canonical_blocks(groups.values())


def classify_type(c: PolygonalCycle, merge_tol: float | None = None) -> CycleType:
    """Re-derive the type of a cycle from its current geometry."""
    merge_tol = default_merge_tol(c.manifold) if merge_tol is None else merge_tol
    if merge_tol <= 0:
        raise PreconditionError("merge_tol must be positive")
    lut = c.ctype.block_lookup()
    endpoints = np.array([c.mp[lut[e]] for e in range(2 * c.k)])
    blocks = _derive_partition(c.manifold, endpoints, merge_tol)
    mask = tuple(tuple(bool(x) for x in row) for row in (c.lengths <= merge_tol))
    return CycleType(blocks, mask)


def build_cycle(manifold: Manifold, vertex_chains, partition: CycleType | None = None,
                merge_tol: float | None = None) -> PolygonalCycle:
    """Construct a piecewise-geodesic cycle from k lists of N+1 vertices.

    Every consecutive pair is joined by the minimizing geodesic.  When a
    partition is supplied it must match the geometric coincidences of the
    endpoints exactly (same blocks); otherwise the partition is derived.
    """
    merge_tol = default_merge_tol(manifold) if merge_tol is None else merge_tol
    chains = [np.array([_as_coords(p) for p in ch], dtype=float) for ch in vertex_chains]
    if not chains:
        raise ValidationError("need at least one chain")
    n_pts = {ch.shape[0] for ch in chains}
    if len(n_pts) != 1 or min(n_pts) < 2:
        raise ValidationError("all chains must have the same vertex count N+1 >= 2")
    arr = np.stack([manifold.wrap_points(ch) for ch in chains])  # (k, N+1, d)
    k, n_vertices, d = arr.shape
    N = n_vertices - 1

    gaps = manifold.local_distance(arr[:, :-1].reshape(-1, d), arr[:, 1:].reshape(-1, d))
    if np.any(gaps > 0.5 * manifold.inj * 1.2):
        raise PreconditionError(
            f"consecutive vertices are {gaps.max():.6g} apart; need <= inj/2 = "
            f"{0.5 * manifold.inj:.6g}"
        )

    # endpoint id order is (chain0 start, chain0 end, chain1 start, ...)
    endpoints = np.empty((2 * k, d))
    for i in range(k):
        endpoints[2 * i] = arr[i, 0]
        endpoints[2 * i + 1] = arr[i, -1]
    derived = _derive_partition(manifold, endpoints, merge_tol)
    if partition is not None:
        if canonical_blocks(partition.blocks) != derived:
            raise ValidationError(
                "given partition is inconsistent with the geometric coincidences"
            )
        blocks = partition.blocks
    else:
        blocks = derived

    mask = tuple(tuple(False for _ in range(N)) for _ in range(k))
    ctype = CycleType(blocks, mask)
    mp = np.empty((len(blocks), d))
    for j, b in enumerate(blocks):
        e = b[0]
        mp[j] = endpoints[e]
    interior = arr[:, 1:-1].copy() if N > 1 else np.zeros((k, 0, d))
    return _assemble(manifold, ctype, mp, interior)


# ----------------------------------------------------------------------
# geodesic nets
# ----------------------------------------------------------------------


@dataclass(eq=False)
class NetEdge:
    v_from: int
    v_to: int
    loop: bool
    multiplicity: int
    length: float
    polyline: Array
    tan_from: Array
    tan_to: Array


@dataclass(eq=False)
class GeodesicNet:
    """Non-parametrized stationary-object candidate: a geodesic multigraph."""

    manifold: Manifold
    vertices: Array  # (V, d)
    edges: list[NetEdge]
    residual: float
    total_mass: float

    def degrees(self) -> Array:
        deg = np.zeros(len(self.vertices), dtype=int)
        for e in self.edges:
            if e.loop:
                deg[e.v_from] += 2 * e.multiplicity
            else:
                deg[e.v_from] += e.multiplicity
                deg[e.v_to] += e.multiplicity
        return deg


def _edge_flip(e: NetEdge) -> NetEdge:
    return NetEdge(e.v_to, e.v_from, e.loop, e.multiplicity, e.length,
                   e.polyline[::-1].copy(), e.tan_to, e.tan_from)


def _net_residual(m: Manifold, vertices: Array, edges: list[NetEdge]) -> float:
    worst = 0.0
    for vi in range(len(vertices)):
        total = np.zeros(vertices.shape[1])
        hit = False
        for e in edges:
            if e.v_from == vi:
                total += e.multiplicity * e.tan_from
                hit = True
            if e.v_to == vi or (e.loop and e.v_from == vi):
                total += e.multiplicity * e.tan_to
                hit = True
        if hit:
            worst = max(worst, float(m.norm_batch(vertices[vi][None], total[None])[0]))
    return worst


def project_to_net(c: PolygonalCycle, merge_tol: float | None = None,
                   n_samples: int = 16) -> GeodesicNet:
    """Project a parametrized cycle to its geodesic net.

    Coincident vertices merge, segments shorter than merge_tol drop,
    degree-2 junctions with opposite tangents straighten into longer edges
    (a closed geodesic keeps a single anchor vertex by convention), and
    geometrically identical edges stack into multiplicities.
    """
    m = c.manifold
    merge_tol = default_merge_tol(m) if merge_tol is None else merge_tol
    d = c.mp.shape[1]

    cand = c.all_vertex_positions()
    nc = cand.shape[0]
    parent = list(range(nc))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(nc):
        if i + 1 < nc:
            dist = m.local_distance(np.repeat(cand[i][None], nc - i - 1, axis=0),
                                    cand[i + 1:])
            for off, dd in enumerate(dist):
                if dd <= merge_tol:
                    a, b = find(i), find(i + 1 + off)
                    if a != b:
                        parent[b] = a

    classes: dict[int, int] = {}
    vertices = []
    for i in range(nc):
        r = find(i)
        if r not in classes:
            classes[r] = len(vertices)
            vertices.append(cand[r])
    vertices = np.array(vertices) if vertices else np.zeros((0, d))

    def vid(candidate_index: int) -> int:
        return classes[find(candidate_index)]

    def cand_index(chain: int, vertex: int) -> int:
        # vertex 0..N along chain; maps into the candidate array layout
        lut = c.ctype.block_lookup()
        if vertex == 0:
            return lut[2 * chain]
        if vertex == c.N:
            return lut[2 * chain + 1]
        return c.J + chain * (c.N - 1) + (vertex - 1)

    keep = [(i, j) for i in range(c.k) for j in range(c.N)
            if c.lengths[i, j] > merge_tol]
    edges: list[NetEdge] = []
    if keep:
        starts, ends = _segment_endpoints(c)
        flat_p = np.array([starts[i, j] for i, j in keep])
        flat_v = np.array([c.v_init[i, j] for i, j in keep])
        traj = m.sample_batch(flat_p, flat_v, n_samples)
        for row, (i, j) in enumerate(keep):
            a = vid(cand_index(i, j))
            b = vid(cand_index(i, j + 1))
            poly = traj[row]
            poly[-1] = ends[i, j]
            edges.append(NetEdge(a, b, a == b, 1, float(c.lengths[i, j]), poly,
                                 c.tan_start[i, j].copy(), c.tan_end[i, j].copy()))

    def straighten(edges: list[NetEdge]) -> list[NetEdge]:
        changed = True
        while changed:
            changed = False
            incident: dict[int, list[tuple[int, int]]] = {}
            for ei, e in enumerate(edges):
                if e.loop:
                    incident.setdefault(e.v_from, []).extend([(ei, 0), (ei, 1)])
                else:
                    incident.setdefault(e.v_from, []).append((ei, 0))
                    incident.setdefault(e.v_to, []).append((ei, 1))
            for v, ends_here in incident.items():
                if len(ends_here) != 2:
                    continue
                (e1i, s1), (e2i, s2) = ends_here
                if e1i == e2i:
                    continue  # a loop anchor stays
                e1, e2 = edges[e1i], edges[e2i]
                if e1.multiplicity != e2.multiplicity:
                    continue
                t1 = e1.tan_from if s1 == 0 else e1.tan_to
                t2 = e2.tan_from if s2 == 0 else e2.tan_to
                bend = float(m.norm_batch(vertices[v][None], (t1 + t2)[None])[0])
                if bend >= NET_STRAIGHTEN_TOL:
                    continue
                # orient e1 into v and e2 out of v, then concatenate
                a = _edge_flip(e1) if s1 == 0 else e1
                b = _edge_flip(e2) if s2 == 1 else e2
                merged = NetEdge(
                    a.v_from, b.v_to, a.v_from == b.v_to, a.multiplicity,
                    a.length + b.length,
                    np.concatenate([a.polyline, b.polyline[1:]], axis=0),
                    a.tan_from, b.tan_to,
                )
                edges = [e for ei, e in enumerate(edges) if ei not in (e1i, e2i)]
                edges.append(merged)
                changed = True
                break
        return edges

    def group_multiplicity(edges: list[NetEdge]) -> list[NetEdge]:
        out: list[NetEdge] = []
        used = [False] * len(edges)
        for i, e in enumerate(edges):
            if used[i]:
                continue
            used[i] = True
            acc = NetEdge(e.v_from, e.v_to, e.loop, e.multiplicity, e.length,
                          e.polyline, e.tan_from, e.tan_to)
            for j in range(i + 1, len(edges)):
                if used[j]:
                    continue
                f = edges[j]
                if {f.v_from, f.v_to} != {e.v_from, e.v_to} or f.loop != e.loop:
                    continue
                if abs(f.length - e.length) > 10 * merge_tol + 1e-12:
                    continue
                for g in (f, _edge_flip(f)):
                    if g.v_from != e.v_from:
                        continue
                    qa = e.polyline[len(e.polyline) // 4]
                    qb = g.polyline[len(g.polyline) // 4]
                    ha = e.polyline[len(e.polyline) // 2]
                    hb = g.polyline[len(g.polyline) // 2]
                    same_geometry = (
                        float(m.local_distance(qa[None], qb[None])[0]) <= 20 * merge_tol
                        and float(m.local_distance(ha[None], hb[None])[0]) <= 20 * merge_tol
                    )
                    if same_geometry:
                        acc.multiplicity += f.multiplicity
                        used[j] = True
                        break
            out.append(acc)
        return out

    edges = straighten(edges)
    edges = group_multiplicity(edges)
    edges = straighten(edges)

    live = sorted({e.v_from for e in edges} | {e.v_to for e in edges})
    remap = {old: new for new, old in enumerate(live)}
    vertices = vertices[live] if live else np.zeros((0, d))
    for e in edges:
        e.v_from = remap[e.v_from]
        e.v_to = remap[e.v_to]

    net = GeodesicNet(c.manifold, vertices, edges, 0.0, 0.0)
    deg = net.degrees()
    if np.any(deg % 2 != 0):
        raise InvariantViolation(
            f"odd vertex degree after net projection (degrees {deg.tolist()}); "
            "suspect a bug or an unsuitable merge_tol"
        )
    net.residual = _net_residual(m, vertices, edges)
    net.total_mass = float(sum(e.multiplicity * e.length for e in edges))
    return net


def net_to_json(net: GeodesicNet) -> dict:
    """Stable JSON form of a geodesic net (documented output format)."""
    return {
        "manifold": net.manifold.kind,
        "vertices": [[float(x) for x in v] for v in net.vertices],
        "edges": [
            {
                "v_from": int(e.v_from),
                "v_to": int(e.v_to),
                "loop": bool(e.loop),
                "multiplicity": int(e.multiplicity),
                "length": float(e.length),
                "polyline": [[float(x) for x in p] for p in e.polyline],
            }
            for e in net.edges
        ],
        "residual": float(net.residual),
        "total_mass": float(net.total_mass),
    }


# ----------------------------------------------------------------------
# canned cycle constructions (tests, experiments, CLI)
# ----------------------------------------------------------------------


def great_circle_cycle(m, n_vertices: int = 8, axis=(0.0, 0.0, 1.0),
                       phase: float = 0.0) -> PolygonalCycle:
    """Equal-arc polygon inscribed in the great circle normal to ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = ref - np.dot(ref, axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    r = m.radius
    th = phase + 2.0 * math.pi * np.arange(n_vertices + 1) / n_vertices
    pts = r * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
    pts[-1] = pts[0]
    return build_cycle(m, [pts])


def latitude_circle_cycle(m, z_frac: float, n_vertices: int = 12, noise: float = 0.0,
                          rng: np.random.Generator | None = None) -> PolygonalCycle:
    """Polygon on the height-z_frac latitude circle of a sphere-like manifold.

    z_frac in (-1, 1) is the fraction of the vertical semi-axis; optional
    noise displaces vertices along the surface.
    """
    if hasattr(m, "axes"):
        ax, ay, az = m.axes
    else:
        ax = ay = az = m.radius
    z = z_frac * az
    rho = math.sqrt(max(1.0 - z_frac**2, 0.0))
    th = 2.0 * math.pi * np.arange(n_vertices + 1) / n_vertices
    pts = np.stack([ax * rho * np.cos(th), ay * rho * np.sin(th),
                    np.full_like(th, z)], axis=1)
    pts[-1] = pts[0]
    if noise > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        pts[:-1] += noise * rng.normal(size=(n_vertices, 3))
        pts = m.wrap_points(pts)
        pts[-1] = pts[0]
    return build_cycle(m, [pts])


def torus_wrap_cycle(m, winding=(1, 0), n_vertices: int = 8, noise: float = 0.0,
                     rng: np.random.Generator | None = None,
                     base=(0.0, 0.0)) -> PolygonalCycle:
    """Closed loop on a flat torus wrapping the given lattice class."""
    w = m.basis @ np.asarray(winding, dtype=float)
    s = np.arange(n_vertices + 1)[:, None] / n_vertices
    pts = np.asarray(base, dtype=float)[None, :] + s * w[None, :]
    if noise > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        perp = np.array([-w[1], w[0]])
        perp /= np.linalg.norm(perp)
        pts[1:-1] += noise * rng.normal(size=(n_vertices - 1, 1)) * perp[None, :]
    pts = m.wrap_points(pts)
    pts[-1] = pts[0]
    return build_cycle(m, [pts])


def random_loop_cycle(m, rng: np.random.Generator, k: int = 1, n_vertices: int = 5,
                      radius: float | None = None, center=None) -> PolygonalCycle:
    """Small random closed polygons, one per chain, pairwise separated.

    Vertices are scattered on a circle of geodesic radius <= inj/8 around a
    base point, so segments stay below inj/4 (safe for the Birkhoff budget
    at any N) and none is constant.  Used by the property suites and the
    flat-space sanity check.
    """
    radius = min(radius if radius is not None else m.inj / 8.0, m.inj / 8.0)
    chains = []
    centers = []
    for ci in range(k):
        for _ in range(64):
            p0 = center if center is not None else m.random_point(rng).coords
            if center is not None and k > 1:
                # spread chain centers inside the allowed disc
                v = m.random_tangent(Point(np.asarray(center, dtype=float)), rng,
                                     scale=radius).components
                p0c, _ = m.shoot_batch(np.asarray(center, dtype=float)[None], v[None], 1.0)
                p0 = p0c[0]
            p0 = np.asarray(p0, dtype=float)
            if all(float(m.local_distance(p0[None], q[None])[0]) > 3.0 * radius
                   for q in centers) or center is not None:
                break
        centers.append(p0)
        E1, E2 = m.frame_batch(p0[None])
        angles = 2.0 * math.pi * (np.arange(n_vertices) + rng.uniform(0.1, 0.9, n_vertices) - 0.5) / n_vertices
        radii = radius * rng.uniform(0.35, 1.0, size=n_vertices)
        V = (radii * np.cos(angles))[:, None] * E1[0][None, :] \
            + (radii * np.sin(angles))[:, None] * E2[0][None, :]
        pts, _ = m.shoot_batch(np.repeat(p0[None], n_vertices, axis=0), V, 1.0)
        pts = m.wrap_points(pts)
        loop = np.concatenate([pts, pts[0][None]], axis=0)
        chains.append(loop)
    return build_cycle(m, chains)


def figure_eight_cycle(m, n_vertices_per_loop: int = 12, tilt: float = 0.9,
                       displace: float = 0.0) -> PolygonalCycle:
    """Two great circles through the north pole of a round sphere.

    This is the two-geodesic-loop configuration of a figure-eight whose four
    outward tangents at the basepoint balance exactly (the degenerate planar
    case of the equal-angle / opposite-bisector condition).  ``displace``
    moves the shared basepoint off both circles, breaking the balance by an
    angle of order displace / segment length.
    """
    r = m.radius
    pole = np.array([0.0, 0.0, 1.0]) * r
    dirs = [np.array([1.0, 0.0, 0.0]), np.array([math.cos(tilt), math.sin(tilt), 0.0])]
    base = pole.copy()
    if displace != 0.0:
        base = m.wrap_points((pole + displace * r * np.array([math.cos(2.0), math.sin(2.0), 0.0]))[None])[0]
    chains = []
    for u in dirs:
        th = 2.0 * math.pi * np.arange(n_vertices_per_loop + 1) / n_vertices_per_loop
        pts = np.cos(th)[:, None] * pole[None, :] + r * np.sin(th)[:, None] * u[None, :]
        pts[0] = base
        pts[-1] = base
        chains.append(pts)
    return build_cycle(m, chains)
