import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from morphkit.errors import CountMismatch, DegenerateInput, DuplicatePoints, ParseError
from morphkit.landmarks import (
    LandmarkSet,
    TriangleMesh,
    add_boundary_points,
    average_landmarks,
    delaunay_triangulate,
    load_mesh,
    parse_landmarks,
    save_landmarks,
    save_mesh,
)
from oracles import delaunay_violations, mesh_area


def lset(points) -> LandmarkSet:
    return LandmarkSet(np.array(points, dtype=np.float64))


def random_point_set(rng, n, min_dist=1e-5):
    while True:
        pts = rng.uniform(0.0, 1.0, (n, 2))
        diffs = pts[:, None] - pts[None, :]
        dist = np.sqrt((diffs ** 2).sum(-1)) + np.eye(n)
        if dist.min() > min_dist:
            return pts


# --- parsing ------------------------------------------------------------------

def test_parse_three_points(tmp_path):
    path = tmp_path / "pts.txt"
    path.write_text("0 0\n10 0\n0 10\n")
    pts = parse_landmarks(path, expected_count=3)
    assert pts.points.tolist() == [[0, 0], [10, 0], [0, 10]]


def test_parse_skips_comments(tmp_path):
    path = tmp_path / "pts.txt"
    path.write_text("# header\n1 2\n3 4  # trailing\n\n5 6\n")
    assert len(parse_landmarks(path)) == 3


def test_count_mismatch(tmp_path):
    path = tmp_path / "pts.txt"
    path.write_text("\n".join(f"{i} {i}" for i in range(67)) + "\n")
    with pytest.raises(CountMismatch) as exc:
        parse_landmarks(path, expected_count=68)
    assert exc.value.expected == 68
    assert exc.value.got == 67


def test_parse_error_names_line(tmp_path):
    path = tmp_path / "pts.txt"
    path.write_text("1 2\nnot numbers\n")
    with pytest.raises(ParseError) as exc:
        parse_landmarks(path)
    assert exc.value.line == 2


@given(st.lists(st.tuples(
    st.floats(-1e6, 1e6, allow_nan=False),
    st.floats(-1e6, 1e6, allow_nan=False)), min_size=3, max_size=40))
@settings(max_examples=40, deadline=None)
def test_landmark_file_round_trip(tmp_path_factory, points):
    path = tmp_path_factory.mktemp("lm") / "pts.txt"
    original = lset(points)
    save_landmarks(original, path)
    loaded = parse_landmarks(path)
    assert np.array_equal(loaded.points, original.points)


# --- averaging ------------------------------------------------------------------

def test_average_endpoints_are_exact():
    a = lset([(1.5, 2.5), (3.0, 4.0), (0.1, 0.2)])
    b = lset([(9.0, 8.0), (7.0, 6.0), (5.0, 4.0)])
    assert np.array_equal(average_landmarks(a, b, 0.0).points, a.points)
    assert np.array_equal(average_landmarks(a, b, 1.0).points, b.points)


def test_average_midpoint():
    a = lset([(10, 10)] * 3)
    b = lset([(20, 30)] * 3)
    mid = average_landmarks(a, b, 0.5)
    assert mid.points[0].tolist() == [15, 20]


def test_average_count_mismatch():
    with pytest.raises(CountMismatch):
        average_landmarks(lset([(0, 0), (1, 0), (0, 1)]),
                          lset([(0, 0), (1, 0), (0, 1), (1, 1)]), 0.5)


@given(st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_average_is_affine_in_alpha(alpha):
    rng = np.random.Generator(np.random.PCG64(11))
    a = lset(rng.uniform(0, 100, (12, 2)))
    b = lset(rng.uniform(0, 100, (12, 2)))
    avg = average_landmarks(a, b, alpha)
    expected = a.points + alpha * (b.points - a.points)
    assert np.allclose(avg.points, expected, rtol=0, atol=1e-12)


# --- triangulation ----------------------------------------------------------------

def test_three_points_single_triangle():
    mesh = delaunay_triangulate(lset([(0, 0), (4, 0), (2, 3)]))
    assert mesh.triangles == ((0, 1, 2),)


def test_interior_point_fan():
    pts = [(0, 0), (4, 0), (2, 3), (2, 1)]
    mesh = delaunay_triangulate(lset(pts))
    assert len(mesh) == 3
    assert all(3 in tri for tri in mesh.triangles)
    assert delaunay_violations(pts, mesh.triangles) == []


def test_concyclic_square_tie_break():
    mesh = delaunay_triangulate(lset([(0, 0), (1, 0), (1, 1), (0, 1)]))
    # both diagonals are valid; the smallest sorted index list wins
    assert mesh.triangles == ((0, 1, 2), (0, 2, 3))


def test_collinear_points_rejected():
    with pytest.raises(DegenerateInput):
        delaunay_triangulate(lset([(0, 0), (1, 1), (2, 2), (3, 3)]))


def test_duplicate_points_rejected():
    with pytest.raises(DuplicatePoints):
        delaunay_triangulate(lset([(0, 0), (1, 0), (0, 1), (1e-9, 0)]))


def test_random_sets_satisfy_empty_circumcircle():
    rng = np.random.Generator(np.random.PCG64(21))
    for _ in range(200):
        pts = random_point_set(rng, int(rng.integers(3, 9)))
        mesh = delaunay_triangulate(lset(pts))
        assert delaunay_violations(pts, mesh.triangles) == []


def test_mesh_covers_convex_hull():
    rng = np.random.Generator(np.random.PCG64(22))
    for _ in range(100):
        pts = random_point_set(rng, int(rng.integers(4, 9)))
        mesh = delaunay_triangulate(lset(pts))
        hull = ConvexHull(pts).volume
        assert mesh_area(pts, mesh.triangles) == pytest.approx(hull, rel=1e-6)


def test_boundary_augmentation_covers_frame():
    pts = lset([(30, 30), (60, 30), (45, 60)])
    aug = add_boundary_points(pts, 100, 80)
    assert len(aug) == len(pts) + 8
    hull = ConvexHull(aug.points).volume
    assert hull == pytest.approx(100 * 80)


def test_mesh_file_round_trip(tmp_path):
    mesh = TriangleMesh(((0, 1, 2), (0, 2, 3)))
    path = tmp_path / "mesh.txt"
    save_mesh(mesh, path)
    assert load_mesh(path).triangles == mesh.triangles
