"""Sector and polygon geometry, graded quadrature, meshes, corner averages.

The radial quadrature substitution r = h u^2 is fixed here once for the whole
package: every boundary-layer integrand we meet decays like exp(-s sqrt(r)),
which the substitution turns into a smooth exponential in u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree

__all__ = [
    "SectorGeometry",
    "PolygonDomain",
    "TriangleMesh",
    "QuadResult",
    "QuadratureControl",
    "delta_w",
    "sector_quadrature",
    "edge_quadrature",
    "arc_quadrature",
    "mesh_polygon",
    "corner_ball_average",
    "gauss_panels",
]


# ---------------------------------------------------------------------------
# geometric types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorGeometry:
    """Open corner sector: angles theta_m < theta < theta_M, radius h.

    Angles live in (-pi, pi); the opening is non-degenerate iff it differs
    from pi.  ``delta_w`` is min cos(theta/2) over the closed angular
    interval, always positive for admissible angles.
    """

    theta_m: float
    theta_M: float
    h: float

    def __post_init__(self) -> None:
        if not (-math.pi < self.theta_m < self.theta_M < math.pi):
            raise ValueError("need -pi < theta_m < theta_M < pi")
        if self.h <= 0:
            raise ValueError("h must be positive")

    @property
    def opening(self) -> float:
        return self.theta_M - self.theta_m

    @property
    def delta_w(self) -> float:
        return delta_w(self)

    @property
    def non_degenerate(self) -> bool:
        return abs(self.opening - math.pi) > 1e-14

    def edge_normal(self, side: str) -> np.ndarray:
        """Outward unit normal of the straight edge at theta_m ('minus')
        or theta_M ('plus')."""
        if side == "minus":
            t = self.theta_m
            return np.array([math.sin(t), -math.cos(t)])
        if side == "plus":
            t = self.theta_M
            return np.array([-math.sin(t), math.cos(t)])
        raise ValueError("side must be 'minus' or 'plus'")


def delta_w(sector: SectorGeometry) -> float:
    """min cos(theta/2) over [theta_m, theta_M].

    cos(theta/2) is concave on (-pi, pi), so the minimum sits at the
    endpoint of larger |theta|; no numerical minimization needed.
    """
    return min(math.cos(0.5 * sector.theta_m), math.cos(0.5 * sector.theta_M))


class PolygonDomain:
    """Simple polygon with counterclockwise vertices."""

    def __init__(self, vertices: Sequence[Sequence[float]]):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("need at least three 2D vertices")
        area2 = _shoelace2(v)
        if abs(area2) < 1e-14:
            raise ValueError("degenerate polygon (zero area)")
        if area2 < 0:
            v = v[::-1].copy()
        if _self_intersects(v):
            raise ValueError("polygon is self-intersecting")
        self.vertices = v

    @property
    def area(self) -> float:
        return 0.5 * _shoelace2(self.vertices)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized point-in-polygon (even-odd rule), boundary-inclusive
        up to floating slop."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        v = self.vertices
        inside = np.zeros(len(pts), dtype=bool)
        n = len(v)
        j = n - 1
        for i in range(n):
            xi, yi = v[i]
            xj, yj = v[j]
            cond = ((yi > y) != (yj > y)) & (
                x < (xj - xi) * (y - yi) / (yj - yi + 1e-300) + xi
            )
            inside ^= cond
            j = i
        return inside

    def corner_opening(self, k: int) -> float:
        """Interior angle at vertex k."""
        v = self.vertices
        n = len(v)
        a = v[(k - 1) % n] - v[k]
        b = v[(k + 1) % n] - v[k]
        ang = math.atan2(_cross2(b, a), float(np.dot(b, a)))
        return ang % (2.0 * math.pi)

    def translated(self, shift) -> "PolygonDomain":
        return PolygonDomain(self.vertices + np.asarray(shift, dtype=float))

    def rotated(self, angle: float) -> "PolygonDomain":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return PolygonDomain(self.vertices @ rot.T)


def _shoelace2(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _cross2(p4 - p3, p1 - p3)
    d2 = _cross2(p4 - p3, p2 - p3)
    d3 = _cross2(p2 - p1, p3 - p1)
    d4 = _cross2(p2 - p1, p4 - p1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _self_intersects(v: np.ndarray) -> bool:
    n = len(v)
    for i in range(n):
        a1, a2 = v[i], v[(i + 1) % n]
        for j in range(i + 1, n):
            if abs(i - j) <= 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(a1, a2, v[j], v[(j + 1) % n]):
                return True
    return False


@dataclass
class TriangleMesh:
    """Conforming triangle mesh with tagged boundary edges.

    Tags: 'gamma_minus', 'gamma_plus' (straight corner edges), 'arc', or
    'outer' for generic polygon boundary.
    """

    nodes: np.ndarray            # (nn, 2)
    triangles: np.ndarray        # (nt, 3), positively oriented
    boundary_edges: list[tuple[int, int, str]] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def boundary_node_indices(self) -> np.ndarray:
        idx = set()
        for a, b, _tag in self.boundary_edges:
            idx.add(a)
            idx.add(b)
        return np.array(sorted(idx), dtype=int)

    def min_angle_deg(self) -> float:
        p = self.nodes[self.triangles]
        worst = 180.0
        for tri in p:
            for k in range(3):
                a = tri[(k + 1) % 3] - tri[k]
                b = tri[(k + 2) % 3] - tri[k]
                ang = math.degrees(
                    math.acos(
                        np.clip(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)), -1, 1)
                    )
                )
                worst = min(worst, ang)
        return worst

    def to_text(self) -> str:
        lines = [f"{self.n_triangles} {self.n_nodes}"]
        for x, y in self.nodes:
            lines.append(f"{x!r} {y!r}")
        for a, b, c in self.triangles:
            lines.append(f"{a} {b} {c}")
        for a, b, tag in self.boundary_edges:
            lines.append(f"{a} {b} {tag}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "TriangleMesh":
        rows = [ln.split() for ln in text.strip().splitlines()]
        nt, nn = int(rows[0][0]), int(rows[0][1])
        nodes = np.array([[float(a), float(b)] for a, b in rows[1:1 + nn]])
        tris = np.array([[int(a) for a in r] for r in rows[1 + nn:1 + nn + nt]], dtype=int)
        edges = [(int(r[0]), int(r[1]), r[2]) for r in rows[1 + nn + nt:]]
        return TriangleMesh(nodes, tris, edges)

    def interpolator(self) -> "P1Interpolator":
        return P1Interpolator(self)


class P1Interpolator:
    """Barycentric point evaluation of nodal fields on a TriangleMesh."""

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        p = mesh.nodes[mesh.triangles]
        self._centroids = p.mean(axis=1)
        self._tree = cKDTree(self._centroids)
        self._p = p

    def locate(self, point: np.ndarray, tol: float = 1e-10) -> tuple[int, np.ndarray]:
        k = min(24, len(self._centroids))
        _, cand = self._tree.query(point, k=k)
        cand = np.atleast_1d(cand)
        best = None
        best_def = -np.inf
        for ti in cand:
            lam = self._bary(int(ti), point)
            d = lam.min()
            if d >= -tol:
                return int(ti), lam
            if d > best_def:
                best_def, best = d, (int(ti), lam)
        if best is not None and best_def > -1e-6:
            return best
        raise ValueError(f"point {point} outside mesh")

    def _bary(self, ti: int, point) -> np.ndarray:
        a, b, c = self._p[ti]
        m = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
        rhs = np.asarray(point, dtype=float) - a
        lam12 = np.linalg.solve(m, rhs)
        return np.array([1.0 - lam12.sum(), lam12[0], lam12[1]])

    def __call__(self, nodal: np.ndarray, point) -> np.ndarray:
        ti, lam = self.locate(np.asarray(point, dtype=float))
        vals = nodal[self.mesh.triangles[ti]]
        return np.tensordot(lam, vals, axes=(0, 0))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class QuadResult(NamedTuple):
    value: complex
    error: float
    converged: bool
    levels: int


@dataclass(frozen=True)
class QuadratureControl:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_refinements: int = 7
    base_radial_panels: int = 10
    base_angular_panels: int = 4
    points_per_panel: int = 16


DEFAULT_QUAD = QuadratureControl()


def gauss_panels(a: float, b: float, n_panels: int, n_points: int,
                 grading: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [a, b].

    grading > 1 packs panels geometrically toward ``a``.
    """
    xg, wg = np.polynomial.legendre.leggauss(n_points)
    if grading == 1.0:
        edges = np.linspace(a, b, n_panels + 1)
    else:
        t = (grading ** np.arange(n_panels + 1) - 1.0) / (grading ** n_panels - 1.0)
        edges = a + (b - a) * t
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + hw * xg)
        weights.append(hw * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _sector_grid(sector: SectorGeometry, level: int, control: QuadratureControl):
    nr = control.base_radial_panels * (2 ** level)
    na = control.base_angular_panels * (2 ** level)
    # u in (0,1]; r = h u^2 focuses points at the vertex boundary layer
    u, wu = gauss_panels(0.0, 1.0, nr, control.points_per_panel, grading=1.35)
    th, wt = gauss_panels(sector.theta_m, sector.theta_M, na, control.points_per_panel)
    r = sector.h * u * u
    jac = 2.0 * sector.h * sector.h * u ** 3          # r dr = 2 h^2 u^3 du
    return r, jac * wu, th, wt


def sector_quadrature(sector: SectorGeometry,
                      integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      control: QuadratureControl = DEFAULT_QUAD) -> QuadResult:
    """Integral of ``integrand`` over the truncated sector S_h.

    ``integrand(x1, x2)`` must accept broadcast arrays of Cartesian
    coordinates and return complex values; the area element is handled here.
    Refines the tensor polar rule until two successive levels agree.
    """
    prev = None
    for level in range(control.max_refinements + 1):
        r, wr, th, wt = _sector_grid(sector, level, control)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        ww = np.outer(wr, wt)
        vals = integrand(rr * np.cos(tt), rr * np.sin(tt))
        cur = complex(np.sum(ww * vals))
        if prev is not None:
            err = abs(cur - prev)
            tol = max(control.abs_tol, control.rel_tol * abs(cur))
            if err <= tol:
                return QuadResult(cur, err, True, level)
        prev = cur
    return QuadResult(prev, float("inf") if prev is None else abs(cur - prev), False,
                      control.max_refinements)


def edge_quadrature(sector: SectorGeometry, side: str,
                    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                    control: QuadratureControl = DEFAULT_QUAD) -> QuadResult:
    """Line integral over the straight edge r in (0, h] at theta_m/theta_M."""
    theta = sector.theta_m if side == "minus" else sector.theta_M
    if side not in ("minus", "plus"):
        raise ValueError("side must be 'minus' or 'plus'")
    c, s = math.cos(theta), math.sin(theta)
    prev = None
    for level in range(control.max_refinements + 1):
        n = control.base_radial_panels * (2 ** level)
        u, wu = gauss_panels(0.0, 1.0, n, control.points_per_panel, grading=1.35)
        r = sector.h * u * u
        jac = 2.0 * sector.h * u                      # dr = 2 h u du
        vals = integrand(r * c, r * s)
        cur = complex(np.sum(wu * jac * vals))
        if prev is not None:
            err = abs(cur - prev)
            if err <= max(control.abs_tol, control.rel_tol * abs(cur)):
                return QuadResult(cur, err, True, level)
        prev = cur
    return QuadResult(prev, abs(cur - prev), False, control.max_refinements)


def arc_quadrature(sector: SectorGeometry,
                   integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   control: QuadratureControl = DEFAULT_QUAD) -> QuadResult:
    """Line integral over the circular arc Lambda_h (radius h)."""
    prev = None
    for level in range(control.max_refinements + 1):
        n = control.base_angular_panels * (2 ** level)
        th, wt = gauss_panels(sector.theta_m, sector.theta_M, n, control.points_per_panel)
        vals = integrand(sector.h * np.cos(th), sector.h * np.sin(th))
        cur = complex(np.sum(wt * sector.h * vals))
        if prev is not None:
            err = abs(cur - prev)
            if err <= max(control.abs_tol, control.rel_tol * abs(cur)):
                return QuadResult(cur, err, True, level)
        prev = cur
    return QuadResult(prev, abs(cur - prev), False, control.max_refinements)


# ---------------------------------------------------------------------------
# meshing
# ---------------------------------------------------------------------------

def mesh_polygon(domain: PolygonDomain, target_edge_length: float,
                 edge_tagger: Callable[[np.ndarray, np.ndarray], str] | None = None,
                 ) -> TriangleMesh:
    """Mesh a polygon with roughly uniform triangles.

    Boundary edges are subdivided to the target length; interior nodes come
    from a staggered grid kept clear of the boundary, and the triangulation
    is Delaunay restricted to the polygon.  Raises if the 20-degree quality
    floor cannot be met.
    """
    if target_edge_length <= 0:
        raise ValueError("target_edge_length must be positive")
    hb = target_edge_length
    bnodes: list[np.ndarray] = []
    v = domain.vertices
    n = len(v)
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        length = float(np.linalg.norm(b - a))
        nseg = max(1, int(math.ceil(length / hb)))
        for k in range(nseg):
            bnodes.append(a + (b - a) * (k / nseg))
    bnodes_arr = np.array(bnodes)

    seg_lengths = np.array([np.linalg.norm(bnodes[(k + 1) % len(bnodes)] - bnodes[k])
                            for k in range(len(bnodes))])
    # interior spacing must track the boundary spacing (a polygon with many
    # short edges forces a finer grid than the target) or slivers appear
    dx = min(hb, 1.35 * float(np.median(seg_lengths)))
    xmin, ymin = v.min(axis=0)
    xmax, ymax = v.max(axis=0)
    dy = dx * math.sqrt(3.0) / 2.0
    rows = int(math.ceil((ymax - ymin) / dy)) + 1
    cols = int(math.ceil((xmax - xmin) / dx)) + 2
    cand = []
    for j in range(rows + 1):
        y = ymin + j * dy
        off = 0.5 * dx if j % 2 else 0.0
        for i in range(cols + 1):
            cand.append((xmin + off + i * dx, y))
    cand = np.array(cand)
    inside = domain.contains(cand)
    cand = cand[inside]
    if len(cand):
        # keep interior nodes away from the boundary polyline
        tree = cKDTree(bnodes_arr)
        d, _ = tree.query(cand)
        cand = cand[d > 0.6 * dx]

    pts = np.vstack([bnodes_arr, cand]) if len(cand) else bnodes_arr
    tri = Delaunay(pts)
    cents = pts[tri.simplices].mean(axis=1)
    keep = domain.contains(cents)
    simplices = tri.simplices[keep]

    # enforce positive orientation
    p = pts[simplices]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    flip = areas < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    simplices = simplices[np.abs(areas) > 1e-14 * hb * hb]

    # drop unused nodes, remap
    used = np.unique(simplices)
    remap = -np.ones(len(pts), dtype=int)
    remap[used] = np.arange(len(used))
    nodes = pts[used]
    tris = remap[simplices]

    edge_count: dict[tuple[int, int], int] = {}
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary = []
    for (a, b), cnt in edge_count.items():
        if cnt == 1:
            tag = "outer"
            if edge_tagger is not None:
                tag = edge_tagger(nodes[a], nodes[b])
            boundary.append((a, b, tag))

    mesh = TriangleMesh(nodes, tris, boundary)
    mesh = _smooth_interior(mesh, rounds=3)
    if mesh.min_angle_deg() < 20.0:
        mesh = _smooth_interior(mesh, rounds=8)
        if mesh.min_angle_deg() < 20.0:
            raise RuntimeError(
                f"mesh quality floor unreachable (min angle {mesh.min_angle_deg():.1f} deg)"
            )
    max_edge = _max_edge_length(mesh)
    if max_edge > 1.5 * target_edge_length + 1e-12:
        raise RuntimeError(f"max edge {max_edge:.3g} exceeds 1.5 x target")
    return mesh


def _max_edge_length(mesh: TriangleMesh) -> float:
    p = mesh.nodes[mesh.triangles]
    e = np.concatenate([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    return float(e.max())


def _smooth_interior(mesh: TriangleMesh, rounds: int = 3) -> TriangleMesh:
    nodes = mesh.nodes.copy()
    bset = set(int(i) for i in mesh.boundary_node_indices())
    neigh: dict[int, set[int]] = {}
    for t in mesh.triangles:
        for a in t:
            neigh.setdefault(int(a), set()).update(int(b) for b in t if b != a)
    for _ in range(rounds):
        for i, nbrs in neigh.items():
            if i in bset:
                continue
            nodes[i] = nodes[list(nbrs)].mean(axis=0)
    return TriangleMesh(nodes, mesh.triangles, mesh.boundary_edges)


# ---------------------------------------------------------------------------
# corner-ball averaging
# ---------------------------------------------------------------------------

def corner_ball_average(field: Callable[[np.ndarray], float],
                        vertex: Sequence[float],
                        rho: float,
                        opening_start: float,
                        opening_end: float,
                        n_radial: int = 48,
                        n_angular: int = 48) -> float:
    """Mean of |field| over the ball-sector B(vertex, rho) cut to the local
    corner wedge [opening_start, opening_end] (angles in the global frame).

    ``field(point)`` returns a vector or scalar; its magnitude is averaged.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    xg, wg = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * rho * (xg + 1.0)
    wr = 0.5 * rho * wg
    tg, wt = np.polynomial.legendre.leggauss(n_angular)
    th = 0.5 * (opening_end + opening_start) + 0.5 * (opening_end - opening_start) * tg
    wth = 0.5 * (opening_end - opening_start) * wt
    vx, vy = float(vertex[0]), float(vertex[1])
    total = 0.0
    area = 0.0
    for ri, wri in zip(r, wr):
        for ti, wti in zip(th, wth):
            p = np.array([vx + ri * math.cos(ti), vy + ri * math.sin(ti)])
            val = field(p)
            mag = float(np.linalg.norm(np.atleast_1d(val)))
            total += wri * wti * ri * mag
            area += wri * wti * ri
    return total / area
