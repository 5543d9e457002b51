"""Cycle data model tests: construction, length, types, net projection."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geonets.cycles import (
    CycleType,
    build_cycle,
    classify_type,
    cycle_length,
    figure_eight_cycle,
    great_circle_cycle,
    latitude_circle_cycle,
    net_to_json,
    project_to_net,
    random_loop_cycle,
    torus_wrap_cycle,
    type_higher_than,
)
from geonets.errors import PreconditionError, ValidationError
from geonets.manifolds import RoundSphere


# ----------------------------------------------------------------------
# build_cycle / cycle_length
# ----------------------------------------------------------------------


def test_great_circle_quadrilateral_length(sphere):
    # four equal arcs of a great circle: length 4 * (pi/2) = 2 pi
    c = great_circle_cycle(sphere, 4)
    assert abs(cycle_length(c) - 2.0 * math.pi) < 1e-6


def test_constant_cycle_zero_length(sphere):
    p = np.array([0.0, 0.0, 1.0])
    c = build_cycle(sphere, [[p, p, p]])
    assert cycle_length(c) == 0.0


def test_figure_eight_skeleton_structure(sphere):
    c = figure_eight_cycle(sphere, 13)
    assert c.k == 2
    assert c.J == 1  # all four endpoints merged at one point
    assert len(c.ctype.blocks[0]) == 4


def test_build_cycle_far_vertices_rejected(sphere):
    p = np.array([1.0, 0.0, 0.0])
    q = np.array([-1.0, 0.0, 0.0])
    with pytest.raises(PreconditionError):
        build_cycle(sphere, [[p, q, p]])


def test_build_cycle_inconsistent_partition_rejected(flat_torus):
    # two loops sharing one basepoint, but the partition claims per-chain
    # blocks: balanced yet inconsistent with the geometric coincidences
    p = np.array([0.3, 0.3])
    sq1 = [p, p + (0.1, 0.0), p + (0.1, 0.1), p + (0.0, 0.1), p]
    sq2 = [p, p + (-0.1, 0.0), p + (-0.1, -0.1), p + (0.0, -0.1), p]
    bad = CycleType(((0, 1), (2, 3)),
                    (tuple([False] * 4), tuple([False] * 4)))
    with pytest.raises(ValidationError):
        build_cycle(flat_torus, [sq1, sq2], partition=bad)


def test_cycle_length_additive_over_copies(flat_torus):
    pts = [(0.1, 0.1), (0.25, 0.12), (0.3, 0.3), (0.12, 0.25), (0.1, 0.1)]
    one = build_cycle(flat_torus, [pts])
    two = build_cycle(flat_torus, [pts, pts])
    assert abs(cycle_length(two) - 2.0 * cycle_length(one)) < 1e-12


def test_orientation_reversal_invariance(flat_torus):
    pts = [(0.1, 0.1), (0.25, 0.12), (0.3, 0.3), (0.12, 0.25), (0.1, 0.1)]
    fwd = build_cycle(flat_torus, [pts])
    rev = build_cycle(flat_torus, [pts[::-1]])
    assert abs(cycle_length(fwd) - cycle_length(rev)) < 1e-12
    sizes_f = sorted(len(b) for b in classify_type(fwd).blocks)
    sizes_r = sorted(len(b) for b in classify_type(rev).blocks)
    assert sizes_f == sizes_r


# ----------------------------------------------------------------------
# classify_type (paper cases for k=2)
# ----------------------------------------------------------------------


def _two_loop_cycle(m, p_a, p_b):
    """Two small square loops based at p_a and p_b (possibly equal)."""
    def square(p):
        p = np.asarray(p, dtype=float)
        return [p, p + (0.1, 0.0), p + (0.1, 0.1), p + (0.0, 0.1), p]

    return build_cycle(m, [square(p_a), square(p_b)])


def test_classify_two_disjoint_loops(flat_torus):
    # case (a): gamma_1(0)=gamma_1(1) != gamma_2(0)=gamma_2(1)
    c = _two_loop_cycle(flat_torus, (0.1, 0.1), (0.6, 0.6))
    t = classify_type(c)
    assert sorted(len(b) for b in t.blocks) == [2, 2]


def test_classify_shared_basepoint(flat_torus):
    # case (c): all four endpoints equal -> one block of size 4
    p = (0.3, 0.3)

    def square(p, flip):
        p = np.asarray(p, dtype=float)
        s = 0.1 if not flip else -0.1
        return [p, p + (s, 0.0), p + (s, s), p + (0.0, s), p]

    c = build_cycle(flat_torus, [square(p, False), square(p, True)])
    t = classify_type(c)
    assert [len(b) for b in t.blocks] == [4]


def test_classify_single_loop(flat_torus):
    c = torus_wrap_cycle(flat_torus, (1, 0), 8)
    t = classify_type(c)
    assert [len(b) for b in t.blocks] == [2]


def test_classify_idempotent(flat_torus, rng):
    c = random_loop_cycle(flat_torus, rng, k=2, n_vertices=4)
    t1 = classify_type(c)
    t2 = classify_type(c)
    assert t1 == t2


def test_classify_requires_positive_tolerance(flat_torus):
    c = torus_wrap_cycle(flat_torus, (1, 0), 8)
    with pytest.raises(PreconditionError):
        classify_type(c, merge_tol=0.0)


# ----------------------------------------------------------------------
# type partial order
# ----------------------------------------------------------------------


def _balanced_partitions_k2():
    # partitions of endpoints {0,1,2,3} (0,2 starts; 1,3 ends) with balanced
    # blocks, enumerated explicitly
    return [
        ((0, 1), (2, 3)),
        ((0, 3), (1, 2)),
        ((0, 1, 2, 3),),
        ((0, 1), (2,), (3,)),  # unbalanced ones excluded below
    ]


def _all_types_k2_n2():
    parts = []
    for blocks in _balanced_partitions_k2():
        try:
            CycleType(blocks, ((False, False), (False, False)))
        except ValidationError:
            continue
        parts.append(blocks)
    masks = list(itertools.product([False, True], repeat=4))
    out = []
    for blocks in parts:
        for mask in masks:
            out.append(CycleType(blocks, (tuple(mask[:2]), tuple(mask[2:]))))
    return out


def test_type_higher_reflexive_antisymmetric_transitive():
    types = _all_types_k2_n2()
    for a in types:
        assert type_higher_than(a, a)
    for a in types:
        for b in types:
            if type_higher_than(a, b) and type_higher_than(b, a):
                assert a == b
    for a in types:
        for b in types:
            if not type_higher_than(a, b):
                continue
            for c in types:
                if type_higher_than(b, c):
                    assert type_higher_than(a, c)


def test_type_higher_examples():
    fine = CycleType(((0, 1), (2, 3)), ((False,), (False,)))
    coarse = CycleType(((0, 1, 2, 3),), ((False,), (False,)))
    assert type_higher_than(coarse, fine)
    assert not type_higher_than(fine, coarse)
    # a coarsens b but b has a constant segment a lacks -> not higher
    coarse_non_const = CycleType(((0, 1, 2, 3),), ((False,), (False,)))
    fine_const = CycleType(((0, 1), (2, 3)), ((True,), (False,)))
    assert not type_higher_than(coarse_non_const, fine_const)


def test_type_higher_requires_same_shape():
    a = CycleType(((0, 1),), ((False, False),))
    b = CycleType(((0, 1),), ((False,),))
    with pytest.raises(PreconditionError):
        type_higher_than(a, b)


def test_cycle_type_rejects_unbalanced_blocks():
    with pytest.raises(ValidationError):
        CycleType(((0, 2), (1, 3)), ((False,), (False,)))  # two starts together


# ----------------------------------------------------------------------
# project_to_net
# ----------------------------------------------------------------------


def test_net_great_circle_single_loop(sphere):
    net = project_to_net(great_circle_cycle(sphere, 8))
    assert len(net.edges) == 1
    assert net.edges[0].loop
    assert net.residual <= 1e-6
    assert abs(net.total_mass - 2.0 * math.pi) < 1e-6
    assert list(net.degrees()) == [2]


def test_net_figure_eight_balanced_vertex(sphere):
    # odd vertex count keeps the antipodal crossing off the vertex set, so
    # the net is one degree-4 vertex carrying two geodesic loops
    net = project_to_net(figure_eight_cycle(sphere, 13))
    assert len(net.vertices) == 1
    assert list(net.degrees()) == [4]
    assert net.residual <= 1e-6


def test_net_perturbed_polygon_unbalanced(sphere):
    c = great_circle_cycle(sphere, 6)
    chain = c.chain_vertices(0)
    # push one vertex off the great-circle plane to break the balance
    chain[1] = sphere.wrap_points((chain[1] + np.array([0.0, 0.0, 0.05]))[None])[0]
    net = project_to_net(build_cycle(sphere, [chain]))
    assert net.residual > 1e-3


def test_net_multiplicity_two(flat_torus):
    pts = [(0.1, 0.1), (0.25, 0.12), (0.3, 0.3), (0.12, 0.25), (0.1, 0.1)]
    c = build_cycle(flat_torus, [pts, pts])
    net = project_to_net(c)
    assert all(e.multiplicity == 2 for e in net.edges)
    assert abs(net.total_mass - cycle_length(c)) < 1e-9
    assert all(d % 2 == 0 for d in net.degrees())


def test_net_mass_preserved_up_to_dropped_segments(any_manifold, rng):
    c = random_loop_cycle(any_manifold, rng, k=2, n_vertices=4)
    merge_tol = 1e-6 * any_manifold.diam
    net = project_to_net(c, merge_tol)
    assert abs(net.total_mass - cycle_length(c)) <= c.k * c.N * merge_tol + 1e-12


def test_net_even_degrees(any_manifold, rng):
    for _ in range(5):
        c = random_loop_cycle(any_manifold, rng, k=int(rng.integers(1, 3)),
                              n_vertices=int(rng.integers(3, 6)))
        net = project_to_net(c)
        assert all(d % 2 == 0 for d in net.degrees())
        assert all(d > 0 for d in net.degrees())


def test_net_zero_cycle_is_empty(sphere):
    p = np.array([0.0, 0.0, 1.0])
    net = project_to_net(build_cycle(sphere, [[p, p, p]]))
    assert len(net.vertices) == 0
    assert len(net.edges) == 0
    assert net.total_mass == 0.0


def test_net_json_schema(flat_torus):
    net = project_to_net(torus_wrap_cycle(flat_torus, (1, 0), 8))
    doc = net_to_json(net)
    assert set(doc) == {"manifold", "vertices", "edges", "residual", "total_mass"}
    assert doc["manifold"] == "flat_torus"
    for e in doc["edges"]:
        assert set(e) == {"v_from", "v_to", "loop", "multiplicity", "length", "polyline"}
        assert e["multiplicity"] >= 1


# ----------------------------------------------------------------------
# vertex roles
# ----------------------------------------------------------------------


def test_vertex_roles_enumeration(flat_torus, rng):
    c = random_loop_cycle(flat_torus, rng, k=2, n_vertices=4)
    roles = c.vertex_roles()
    multiples = [r for r in roles if r.role == "multiple"]
    doubles = [r for r in roles if r.role == "double"]
    assert len(multiples) == c.J
    assert len(doubles) == c.k * (c.N - 1)
    # a double point joins exactly two segments of its own chain
    for r in doubles:
        chain, junction = r.index
        assert 1 <= junction <= c.N - 1


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=25, deadline=None)
def test_latitude_circles_on_surface(seed):
    m = RoundSphere(1.0)
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.95, 0.95)
    c = latitude_circle_cycle(m, z, 10)
    for i in range(c.k):
        verts = c.chain_vertices(i)
        np.testing.assert_allclose(np.linalg.norm(verts, axis=1), 1.0, atol=1e-12)
