import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyharm.errors import DegeneracyError, InvalidDimensionError, InvalidInputError
from polyharm.geometry import (BOUNDARY, SphericalPolygon, build_convex, build_prism,
                               classify_direction, classify_directions,
                               inverse_stereographic, polygon_area, solid_angle_polygon,
                               stereographic, tangent_partition)

TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)


def random_unit(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


# --- polyhedra -------------------------------------------------------------

def test_unit_cube_combinatorics():
    P = build_prism(1, 1, 1)
    assert (P.n_vertices, P.n_edges, P.n_faces) == (8, 12, 6)
    assert P.n_vertices - P.n_edges + P.n_faces == 2
    assert P.is_prism


def test_slab_dimensions():
    P = build_prism(20, 10, 1)
    assert np.allclose(P.vertices.max(axis=0), [20, 10, 1])
    assert P.dims == (20.0, 10.0, 1.0)


@pytest.mark.parametrize("dims", [(1, 2, 3), (0, 1, 1), (1, 1, -1), (2, 1, 0)])
def test_bad_prism_dimensions(dims):
    with pytest.raises(InvalidDimensionError):
        build_prism(*dims)


def test_tetrahedron_hull():
    P = build_convex(TETRA)
    assert (P.n_vertices, P.n_edges, P.n_faces) == (4, 6, 4)


def test_cube_hull_matches_prism():
    P = build_prism(1, 1, 1)
    Q = build_convex(P.vertices[::-1])
    assert Q.n_faces == 6 and Q.n_edges == 12
    normals_p = {tuple(np.round(n, 12)) for n in P.normals}
    normals_q = {tuple(np.round(n, 12)) for n in Q.normals}
    assert normals_p == normals_q


def test_coplanar_points_rejected():
    with pytest.raises(DegeneracyError):
        build_convex([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


def test_polyhedron_json_roundtrip():
    P = build_prism(3, 2, 1)
    Q = type(P).from_json(P.to_json())
    assert np.allclose(P.vertices, Q.vertices)
    assert P.faces == Q.faces


# --- spherical polygons -----------------------------------------------------

def test_octant_area():
    octant = SphericalPolygon(np.eye(3))
    assert polygon_area(octant) == pytest.approx(np.pi / 2, abs=1e-14)
    assert octant.reversed().area == pytest.approx(-np.pi / 2, abs=1e-14)


def test_hemisphere_area():
    c = [[1, 0, 0], [-0.5, np.sqrt(3) / 2, 0], [-0.5, -np.sqrt(3) / 2, 0]]
    assert polygon_area(SphericalPolygon(c)) == pytest.approx(2 * np.pi, abs=1e-12)


def test_antipodal_vertices_rejected():
    with pytest.raises(DegeneracyError):
        polygon_area(SphericalPolygon([[1, 0, 0], [-1, 0, 0], [0, 0, 1]]))


def test_prism_corner_solid_angle():
    P = build_prism(2, 1.5, 1)
    for a in range(8):
        assert solid_angle_polygon(P, a).area == pytest.approx(np.pi / 2, abs=1e-12)


def test_tetrahedron_corner_solid_angle():
    P = build_convex(TETRA)
    expected = 3 * np.arccos(1 / 3) - np.pi
    for a in range(4):
        assert solid_angle_polygon(P, a).area == pytest.approx(expected, abs=1e-12)


# --- partitions --------------------------------------------------------------

def test_tetrahedron_has_14_sectors():
    part = tangent_partition(build_convex(TETRA))
    assert part.n_sectors == 14
    assert part.areas.sum() == pytest.approx(4 * np.pi, abs=1e-9)


@pytest.mark.parametrize("dims", [(1, 1, 1), (20, 10, 1), (3, 2, 0.5)])
def test_prism_octants(dims):
    part = tangent_partition(build_prism(*dims))
    assert part.n_sectors == 8
    assert part.is_octant_partition
    assert np.allclose(part.areas, np.pi / 2, atol=1e-12)


def test_generic_hexahedron_has_32_sectors():
    # tilt the six face planes of a cube so no two tangent circles coincide
    rng = np.random.default_rng(3)
    normals = np.vstack([np.eye(3), -np.eye(3)]) + 0.08 * rng.normal(size=(6, 3))
    pts = []
    for sx in (0, 3):
        for sy in (1, 4):
            for sz in (2, 5):
                A = normals[[sx, sy, sz]]
                pts.append(np.linalg.solve(A, np.ones(3)))
    P = build_convex(pts)
    assert P.n_faces == 6
    part = tangent_partition(P)
    assert part.n_sectors == 6 * 6 - 6 + 2
    assert part.areas.sum() == pytest.approx(4 * np.pi, abs=1e-9)


def test_classify_prism_examples():
    part = tangent_partition(build_prism(1, 1, 1))
    s = np.sqrt(3)
    pos = classify_direction(part, np.array([1, 1, 1]) / s)
    assert pos == 7
    assert classify_direction(part, [1.0, 0.0, 0.0]) == BOUNDARY
    assert classify_direction(part, np.array([-1, 1, 1]) / s) not in (pos, BOUNDARY)


def test_classify_rejects_non_unit():
    part = tangent_partition(build_prism(1, 1, 1))
    with pytest.raises(InvalidInputError):
        classify_direction(part, [1.0, 1.0, 0.0])


def test_monte_carlo_sector_areas_tetrahedron():
    part = tangent_partition(build_convex(TETRA))
    rng = np.random.default_rng(0)
    n = 100_000
    ids = classify_directions(part, random_unit(rng, n))
    assert np.all((ids == BOUNDARY) | ((ids >= 0) & (ids < part.n_sectors)))
    for s in part.sectors:
        p = s.area / (4 * np.pi)
        est = np.mean(ids == s.id)
        se = np.sqrt(p * (1 - p) / n)
        assert abs(est - p) < 3 * se + 1e-12, (s.id, est, p)


# --- stereographic projection ------------------------------------------------

def test_stereographic_examples():
    assert stereographic([0.0, 0.0, 1.0]) == 0
    assert stereographic([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    assert np.isinf(stereographic([0.0, 0.0, -1.0]))
    assert np.allclose(inverse_stereographic(complex(np.inf, 0)), [0, 0, -1])


def test_stereographic_roundtrip_bulk():
    rng = np.random.default_rng(1)
    e = random_unit(rng, 10_000)
    # include points very near both poles
    e[:10] = [0, 0, 1]
    e[10:20] = np.array([1e-9, 2e-9, -1.0])
    e = e / np.linalg.norm(e, axis=1)[:, None]
    back = inverse_stereographic(stereographic(e))
    assert np.max(np.abs(back - e)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_inverse_then_forward(re, im):
    w = complex(re, im)
    back = stereographic(inverse_stereographic(w))
    assert abs(back - w) <= 1e-12 * max(1.0, abs(w)) ** 2 * 10
