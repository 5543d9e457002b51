"""Sweepout family builders, discrete min-max, and the verify drivers."""

import math

import numpy as np
import pytest

from geonets.cycles import build_cycle, latitude_circle_cycle, torus_wrap_cycle
from geonets.errors import PreconditionError, ShortCycleFound
from geonets.manifolds import (
    ConformalSphere,
    Ellipsoid,
    FlatTorus,
    RoundSphere,
    TorusOfRevolution,
)
from geonets.shortening import shorten
from geonets.sweepout import (
    TETRAHEDRON_EDGE_SIGNS,
    CycleFamily,
    latitude_sweepout,
    minmax,
    tetrahedron_cancellation_pairs,
    tetrahedron_sweepout,
    two_disc_refined_sweepout,
    verify_nonsimply_connected,
    verify_theorem1_q2,
)

REGULAR_TETRA = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
) / math.sqrt(3)


def ellipse_perimeter_oracle(a, b, n=200_001):
    """Independent quadrature of an ellipse perimeter."""
    t = np.linspace(0.0, 2.0 * math.pi, n)
    return float(np.sum(np.hypot(a * np.diff(np.cos(t)), b * np.diff(np.sin(t)))))


# ----------------------------------------------------------------------
# latitude sweepout
# ----------------------------------------------------------------------


def test_latitude_sweepout_sphere(sphere):
    fam = latitude_sweepout(sphere, 65)
    assert len(fam.members) == 65
    assert abs(fam.max_length() - 2.0 * math.pi) < 1e-3
    assert fam.members[0].length() == 0.0
    assert fam.members[-1].length() == 0.0
    assert fam.boundary_condition == "closed_loop_in_cycle_space"


def test_latitude_sweepout_degenerate_three_slices(sphere):
    fam = latitude_sweepout(sphere, 3)
    assert len(fam.members) == 3
    assert fam.members[1].length() > 0


def test_latitude_sweepout_ellipsoid_equator():
    m = Ellipsoid(1.0, 1.0, 1.2)
    fam = latitude_sweepout(m, 33)
    assert abs(fam.max_length() - 2.0 * math.pi) < 1e-2


def test_latitude_sweepout_needs_sphere_like(flat_torus):
    with pytest.raises(PreconditionError):
        latitude_sweepout(flat_torus, 9)


def test_latitude_continuity(sphere):
    fam = latitude_sweepout(sphere, 33)
    gaps = fam.consecutive_hausdorff()
    assert max(gaps) <= fam.continuity_bound + 1e-9


# ----------------------------------------------------------------------
# tetrahedron sweepout
# ----------------------------------------------------------------------


def test_tetrahedron_edge_signs_cancel():
    # combinatorial zero-cycle check: each edge appears in exactly two
    # boundaries with opposite orientation
    pairs = tetrahedron_cancellation_pairs()
    assert len(pairs) == 6
    for edge, (plus, minus) in pairs:
        assert TETRAHEDRON_EDGE_SIGNS[plus][edge] == 1
        assert TETRAHEDRON_EDGE_SIGNS[minus][edge] == -1
        assert plus != minus
    for signs in TETRAHEDRON_EDGE_SIGNS.values():
        assert sorted(abs(s) for s in signs.values()) == [1, 1, 1]


def test_tetrahedron_sweepout_sphere(sphere):
    fam = tetrahedron_sweepout(sphere, REGULAR_TETRA, members=21)
    assert fam.provenance == "tetrahedron_faces"
    # PAPER bound: member mass stays below 8d + 4 eps
    tol = 4e-2 * sphere.diam
    assert fam.max_length() <= 8.0 * sphere.diam + tol
    # t=0 is the zero cycle; t=1 is the four full boundaries (zero as a
    # current through the sign cancellation, not zero length)
    assert fam.members[0].length() <= 1e-3
    per_triangle = 3.0 * math.acos(-1.0 / 3.0)
    assert abs(fam.members[-1].length() - 4.0 * per_triangle) < 1e-6
    assert all(m.k == 12 for m in fam.members[1:])


def test_tetrahedron_sweepout_degenerate_point(sphere):
    p = np.array([0.0, 0.0, 1.0])
    fam = tetrahedron_sweepout(sphere, [p, p, p, p])
    assert fam.max_length() <= 1e-9


def test_tetrahedron_sweepout_flat_disc(flat_torus):
    # flat-triangle oracle: the initial mass is the sum of the four
    # Euclidean triangle perimeters; everything collapses in flat space
    verts = np.array([[0.05, 0.05], [0.16, 0.06], [0.1, 0.17], [0.12, 0.1]])

    def perim(i, j, k):
        return (np.linalg.norm(verts[i] - verts[j])
                + np.linalg.norm(verts[j] - verts[k])
                + np.linalg.norm(verts[k] - verts[i]))

    expect = perim(0, 1, 3) + perim(1, 0, 2) + perim(2, 0, 3) + perim(2, 3, 1)
    fam = tetrahedron_sweepout(flat_torus, verts)
    assert abs(fam.members[-1].length() - expect) < 1e-9
    assert fam.members[0].length() <= 1e-3


# ----------------------------------------------------------------------
# refined two-disc sweepout
# ----------------------------------------------------------------------


def test_two_disc_refined_sphere(sphere):
    fam = two_disc_refined_sweepout(sphere, REGULAR_TETRA, members=33)
    # PAPER: members of at most two closed curves, total <= 2 (2d + eps)
    tol = 4e-2 * sphere.diam
    assert fam.max_length() <= 4.0 * sphere.diam + tol
    assert all(m.k <= 2 for m in fam.members)
    eps_c = 1e-4 * sphere.diam
    assert fam.members[0].length() <= eps_c
    assert fam.members[-1].length() <= eps_c


def test_two_disc_refined_degenerate(sphere):
    p = np.array([0.0, 0.0, 1.0])
    fam = two_disc_refined_sweepout(sphere, [p, p, p, p])
    assert fam.max_length() <= 1e-9


def test_two_disc_refined_obtuse_ellipsoid():
    m = Ellipsoid(1.0, 1.05, 1.1)
    # obtuse configuration: three vertices crowded in one hemisphere
    verts = np.array([
        [0.0, 0.0, 1.1],
        [0.9, 0.0, 0.0],
        [0.0, 0.95, 0.0],
        [0.55, 0.55, 0.0],
    ])
    verts = m.wrap_points(verts)
    try:
        fam = two_disc_refined_sweepout(m, verts, members=25)
    except ShortCycleFound as hit:
        assert hit.net.total_mass <= 4.0 * m.diam + 1e-2 * m.diam
        return
    # analytic-diameter oracle: half the (min-axis, max-axis) ellipse
    d_oracle = ellipse_perimeter_oracle(1.0, 1.1) / 2.0
    assert fam.max_length() <= 4.0 * d_oracle + 4e-2 * d_oracle
    assert all(m_.k <= 2 for m_ in fam.members)


# ----------------------------------------------------------------------
# minmax
# ----------------------------------------------------------------------


def test_minmax_latitude_sphere(sphere):
    fam = latitude_sweepout(sphere, 65)
    rep = minmax(fam, rounds=8)
    # width within 1% of the great-circle oracle 2 pi
    assert abs(rep.width_estimate - 2.0 * math.pi) <= 0.01 * 2.0 * math.pi
    maxima = rep.round_max_lengths
    assert all(b <= a + 1e-9 * sphere.diam for a, b in zip(maxima, maxima[1:]))
    assert rep.stationary_candidate is not None
    assert rep.stationary_candidate.stationary
    assert abs(rep.certificate_mass - 2.0 * math.pi) <= 0.01 * 2.0 * math.pi


def test_minmax_tiny_family_collapses(sphere):
    members = [latitude_circle_cycle(sphere, math.cos(math.radians(6 + i)), 8)
               for i in range(4)]
    fam = CycleFamily(sphere, members, [i / 3 for i in range(4)],
                      "free", "user", sphere.inj / 8.0)
    rep = minmax(fam, rounds=40)
    assert rep.width_estimate <= 1e-3
    assert rep.certificate_net is None


def test_minmax_flat_torus_meridian_family(flat_torus):
    # lattice oracle: every (0,1) wrap has length exactly 1; the width is 1
    members = [torus_wrap_cycle(flat_torus, (0, 1), 9, base=(x, 0.0))
               for x in np.linspace(0.05, 0.95, 13)]
    fam = CycleFamily(flat_torus, members, list(np.linspace(0, 1, 13)),
                      "free", "user", flat_torus.inj / 8.0)
    rep = minmax(fam, rounds=4)
    assert abs(rep.width_estimate - 1.0) <= 1e-3
    assert rep.stationary_candidate.stationary
    assert abs(rep.certificate_mass - 1.0) <= 1e-4


def test_minmax_member_count_and_k_invariant(sphere):
    fam = latitude_sweepout(sphere, 17)
    ks = [m.k for m in fam.members]
    rep = minmax(fam, rounds=3)
    assert len(fam.members) == 17
    assert [m.k for m in fam.members] == ks
    assert rep.width_estimate <= fam.max_length()


def test_minmax_boundary_members_stay_zero(sphere):
    fam = latitude_sweepout(sphere, 17)
    rep = minmax(fam, rounds=5)
    assert fam.members[0].length() <= 1e-4 * sphere.diam
    assert fam.members[-1].length() <= 1e-4 * sphere.diam
    assert rep.round_max_lengths[0] >= rep.width_estimate


# ----------------------------------------------------------------------
# verify drivers
# ----------------------------------------------------------------------


def test_verify_t1q2_round_sphere(sphere):
    rep = verify_theorem1_q2(sphere, REGULAR_TETRA)
    name, bound, ok = rep.bound_checked
    assert name == "4d" and abs(bound - 4.0 * math.pi) < 1e-12 and ok
    assert rep.certificate_mass is not None
    assert abs(rep.certificate_mass - 2.0 * math.pi) <= 0.01 * 2.0 * math.pi
    assert rep.certificate_residual <= 2e-5
    assert rep.width_estimate <= 4.0 * math.pi + 1e-2 * math.pi


def test_verify_t1q2_rejects_torus(flat_torus):
    with pytest.raises(PreconditionError):
        verify_theorem1_q2(flat_torus)


def test_verify_pi1_flat_torus_unit(flat_torus):
    # lattice oracle 1.0 against the PAPER bound 2d = sqrt(2)
    rep = verify_nonsimply_connected(flat_torus, noise=0.04, seed=3)
    name, bound, ok = rep.bound_checked
    assert name == "2d" and abs(bound - math.sqrt(2.0)) < 1e-12
    assert ok
    assert abs(rep.certificate_mass - 1.0) <= 1e-4


def test_verify_pi1_rect_torus():
    m = FlatTorus(((1.0, 0.0), (0.0, 3.0)))
    rep = verify_nonsimply_connected(m, seed=0)
    assert abs(rep.certificate_mass - 1.0) <= 1e-6
    assert abs(rep.bound_checked[1] - math.sqrt(10.0)) < 1e-12
    assert rep.bound_checked[2]


def test_verify_pi1_torus_of_revolution(rev_torus):
    # meridian circles are geodesics of length 2 pi r
    rep = verify_nonsimply_connected(rev_torus, seed=0)
    assert abs(rep.certificate_mass - 2.0 * math.pi * 0.5) <= 1e-6
    assert rep.bound_checked[2]


def test_verify_pi1_rejects_sphere(sphere):
    with pytest.raises(PreconditionError):
        verify_nonsimply_connected(sphere)


def test_inner_equator_is_stationary(rev_torus):
    # revolution-torus oracle: the phi = pi circle is a closed geodesic of
    # length 2 pi (R - r); an inscribed polygon is stationary as built
    R, r = rev_torus.major, rev_torus.minor
    n = 24
    th = 2.0 * math.pi * np.arange(n + 1) / n
    pts = np.stack([th, np.full_like(th, math.pi)], axis=1)
    pts[-1] = pts[0]
    c = build_cycle(rev_torus, [pts])
    out = shorten(c)
    assert out.stationary
    assert abs(out.net.total_mass - 2.0 * math.pi * (R - r)) <= 1e-4


def test_family_to_json_schema(sphere):
    from geonets.sweepout import family_to_json

    fam = latitude_sweepout(sphere, 9)
    doc = family_to_json(fam)
    assert len(doc) == 9
    for entry in doc:
        assert set(entry) == {"t", "k", "segments_per_chain", "length", "chains"}
        assert len(entry["chains"]) == entry["k"]
    assert doc[0]["t"] == 0.0 and doc[-1]["t"] == 1.0
