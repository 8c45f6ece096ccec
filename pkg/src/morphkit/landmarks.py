"""Landmark sets, Delaunay triangulation, and face-box preprocessing.

The triangulation enumerates all vertex triples and keeps those whose
circumcircle contains no other input point (in-circle determinant tested at
tolerance EPS_CIRC on coordinates normalized to the unit square).  Cocircular
groups admit several valid meshes; ties resolve to the lexicographically
smallest sorted triangle index list, which makes the output reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CountMismatch, DegenerateInput, DuplicatePoints, MissingFile, ParseError

EPS_CIRC = 1e-9      # in-circle tolerance on unit-square coordinates
EPS_DUP = 1e-6       # duplicate-point threshold, pixels
EPS_AREA = 1e-12     # degenerate-triangle threshold on normalized doubled area
DEFAULT_POINT_COUNT = 68


@dataclass(frozen=True)
class LandmarkSet:
    points: np.ndarray  # (n, 2) float64, image coordinates

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected (n, 2) points, got shape {pts.shape}")
        if pts.shape[0] < 3:
            raise ValueError(f"need at least 3 landmarks, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("landmarks must be finite")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class TriangleMesh:
    triangles: tuple[tuple[int, int, int], ...]

    def __len__(self) -> int:
        return len(self.triangles)


def parse_landmarks(path: str | Path, expected_count: int | None = None) -> LandmarkSet:
    """Read `x y` pairs, one per line; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"landmark file not found: {path}")
    pts = []
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"expected 'x y', got {raw!r}", line_no)
        try:
            pts.append((float(fields[0]), float(fields[1])))
        except ValueError:
            raise ParseError(f"bad coordinate in {raw!r}", line_no) from None
    if expected_count is not None and len(pts) != expected_count:
        raise CountMismatch(expected_count, len(pts))
    return LandmarkSet(np.array(pts, dtype=np.float64))


def save_landmarks(landmarks: LandmarkSet, path: str | Path) -> None:
    lines = [f"{float(x)!r} {float(y)!r}" for x, y in landmarks.points]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def average_landmarks(a: LandmarkSet, b: LandmarkSet, alpha: float) -> LandmarkSet:
    if len(a) != len(b):
        raise CountMismatch(len(a), len(b))
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0,1], got {alpha}")
    return LandmarkSet((1.0 - alpha) * a.points + alpha * b.points)


def add_boundary_points(landmarks: LandmarkSet, width: int, height: int) -> LandmarkSet:
    """Append the 4 image corners and 4 edge midpoints so the mesh spans the frame."""
    w, h = float(width), float(height)
    extra = np.array(
        [(0, 0), (w, 0), (w, h), (0, h), (w / 2, 0), (w, h / 2), (w / 2, h), (0, h / 2)],
        dtype=np.float64,
    )
    return LandmarkSet(np.vstack([landmarks.points, extra]))


def _incircle_matrix(ax, ay, bx, by, cx, cy, dx, dy):
    """Vectorized 3x3 in-circle determinant; > 0 means d inside circle(a,b,c) for ccw abc."""
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy
    ad2 = adx * adx + ady * ady
    bd2 = bdx * bdx + bdy * bdy
    cd2 = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd2 - bd2 * cdy)
            - ady * (bdx * cd2 - bd2 * cdx)
            + ad2 * (bdx * cdy - bdy * cdx))


def _project_interval(tri: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    proj = tri @ axis
    return proj.min(), proj.max()


def _triangles_overlap(t1: np.ndarray, t2: np.ndarray, tol: float = 1e-12) -> bool:
    """Positive-area intersection test via separating axes; touching edges do not count."""
    for tri in (t1, t2):
        for i in range(3):
            p, q = tri[i], tri[(i + 1) % 3]
            axis = np.array([q[1] - p[1], p[0] - q[0]])
            lo1, hi1 = _project_interval(t1, axis)
            lo2, hi2 = _project_interval(t2, axis)
            if hi1 <= lo2 + tol or hi2 <= lo1 + tol:
                return False
    return True


def delaunay_triangulate(landmarks: LandmarkSet) -> TriangleMesh:
    pts = landmarks.points
    n = len(pts)
    diffs = pts[:, None, :] - pts[None, :, :]
    dist2 = (diffs ** 2).sum(axis=2)
    iu = np.triu_indices(n, k=1)
    if np.any(dist2[iu] < EPS_DUP ** 2):
        i, j = min(zip(*iu), key=lambda ij: dist2[ij])
        raise DuplicatePoints(f"points {i} and {j} closer than {EPS_DUP}")

    lo = pts.min(axis=0)
    scale = float((pts.max(axis=0) - lo).max())
    norm = (pts - lo) / scale

    xs, ys = norm[:, 0], norm[:, 1]
    triples = np.array(list(itertools.combinations(range(n), 3)), dtype=np.int64)
    certain: list[tuple[int, int, int]] = []
    ambiguous: list[tuple[int, int, int]] = []
    chunk = 8192
    for start in range(0, len(triples), chunk):
        tri = triples[start:start + chunk]
        ia, ib, ic = tri[:, 0], tri[:, 1], tri[:, 2]
        ax, ay = xs[ia], ys[ia]
        bx, by = xs[ib], ys[ib]
        cx, cy = xs[ic], ys[ic]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        nondegenerate = np.abs(area2) > EPS_AREA
        det = _incircle_matrix(
            ax[:, None], ay[:, None], bx[:, None], by[:, None],
            cx[:, None], cy[:, None], xs[None, :], ys[None, :],
        ) * np.sign(area2)[:, None]
        rows = np.arange(len(tri))
        for col in (ia, ib, ic):
            det[rows, col] = -np.inf
        max_det = det.max(axis=1) if n > 3 else np.full(len(tri), -np.inf)
        valid = nondegenerate & (max_det <= EPS_CIRC)
        sure = valid & (max_det < -EPS_CIRC)
        for idx in np.flatnonzero(sure):
            certain.append(tuple(int(v) for v in tri[idx]))
        for idx in np.flatnonzero(valid & ~sure):
            ambiguous.append(tuple(int(v) for v in tri[idx]))

    selected = list(certain)
    for cand in sorted(ambiguous):
        cand_pts = norm[list(cand)]
        if any(_triangles_overlap(cand_pts, norm[list(s)]) for s in selected):
            continue
        selected.append(cand)
    if not selected:
        raise DegenerateInput("points are collinear or otherwise admit no triangulation")
    return TriangleMesh(tuple(sorted(selected)))


def save_mesh(mesh: TriangleMesh, path: str | Path) -> None:
    Path(path).write_text(
        "\n".join(f"{i} {j} {k}" for i, j, k in mesh.triangles) + "\n", encoding="utf-8")


def load_mesh(path: str | Path) -> TriangleMesh:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"mesh file not found: {path}")
    triangles = []
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(f"expected 'i j k', got {raw!r}", line_no)
        triangles.append(tuple(int(f) for f in fields))
    return TriangleMesh(tuple(triangles))
