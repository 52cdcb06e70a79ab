"""Planar primitives: points, intervals, cells, convex fat regions, wedges.

Everything here is a pure value or a pure function; no hidden state.  Cell
coordinates are root coordinates scaled by powers of two, so they are exact
in binary floating point.  Region predicates use closed-set semantics
(boundary points count as inside); half-open semantics apply only to cell
point-location, which is handled by the tree layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CoincidentPoints, DegenerateShape

TWO_PI = 2.0 * math.pi


def _finite(*vals):
    return all(math.isfinite(v) for v in vals)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not _finite(self.x, self.y):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Interval1:
    """Non-degenerate closed interval [lo, hi] on the line."""

    lo: float
    hi: float

    def __post_init__(self):
        if not _finite(self.lo, self.hi) or not self.lo < self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    def diameter(self) -> float:
        return self.hi - self.lo

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def overlaps(self, other: "Interval1") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi


def interval_union_span(a: Interval1, b: Interval1) -> float:
    """Diameter of the union point set of two intervals."""
    return max(a.hi, b.hi) - min(a.lo, b.lo)


def is_rho_similar_1d(a: Interval1, b: Interval1, rho: float) -> bool:
    return interval_union_span(a, b) <= rho * min(a.diameter(), b.diameter())


@dataclass(frozen=True)
class CellExtent:
    """Axis-aligned square cell, half-open [x, x+side) x [y, y+side).

    side is the root side divided by 2**depth, hence exact.
    """

    anchor: Point2
    side: float
    depth: int

    def center(self) -> Point2:
        h = 0.5 * self.side
        return Point2(self.anchor.x + h, self.anchor.y + h)

    def contains_point(self, p: Point2) -> bool:
        return (
            self.anchor.x <= p.x < self.anchor.x + self.side
            and self.anchor.y <= p.y < self.anchor.y + self.side
        )

    def closed_contains_point(self, p: Point2) -> bool:
        return (
            self.anchor.x <= p.x <= self.anchor.x + self.side
            and self.anchor.y <= p.y <= self.anchor.y + self.side
        )


def _poly_diameter(vertices):
    best = 0.0
    n = len(vertices)
    for i in range(n):
        xi, yi = vertices[i]
        for j in range(i + 1, n):
            d = math.hypot(vertices[j][0] - xi, vertices[j][1] - yi)
            if d > best:
                best = d
    return best


def _check_strictly_convex_ccw(vertices):
    n = len(vertices)
    if n < 3:
        raise DegenerateShape("polygon needs at least 3 vertices")
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        cx, cy = vertices[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross <= 0.0:
            raise DegenerateShape(
                "vertices must be in strictly convex counterclockwise position"
            )


def _chebyshev_center(vertices):
    """Center and radius of the largest inscribed disk of a convex polygon.

    Solves max r  s.t.  n_i . c + r <= b_i  over the edge half-planes
    (inward normals normalized to unit length).
    """
    from scipy.optimize import linprog

    n = len(vertices)
    a_ub = []
    b_ub = []
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        norm = math.hypot(ex, ey)
        # outward normal of a ccw edge is (ey, -ex); constraint keeps c inside
        nx, ny = ey / norm, -ex / norm
        a_ub.append((nx, ny, 1.0))
        b_ub.append(nx * ax + ny * ay)
    res = linprog(
        c=(0.0, 0.0, -1.0),
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=((None, None), (None, None), (0.0, None)),
        method="highs",
    )
    if not res.success or res.x[2] <= 0.0:
        raise DegenerateShape("polygon has no inscribed disk (flat input)")
    return res.x[0], res.x[1], res.x[2]


class ConvexRegion:
    """Disk or strictly convex polygon with its thickness witness cached.

    rep is the common center of the witness disks: the inscribed disk of
    radius r_inner and the circumscribed disk of radius r_outer, with
    disk(rep, r_inner) inside the region inside disk(rep, r_outer).
    """

    __slots__ = ("kind", "center", "radius", "vertices", "rep", "r_inner", "r_outer", "diam")

    def __init__(self, kind, center, radius, vertices, rep, r_inner, r_outer, diam):
        self.kind = kind  # "disk" | "polygon"
        self.center = center
        self.radius = radius
        self.vertices = vertices
        self.rep = rep
        self.r_inner = r_inner
        self.r_outer = r_outer
        self.diam = diam

    @staticmethod
    def disk(center: Point2, radius: float) -> "ConvexRegion":
        if not _finite(radius) or radius <= 0.0:
            raise DegenerateShape(f"disk radius must be positive, got {radius}")
        return ConvexRegion(
            "disk", center, radius, None, center, radius, radius, 2.0 * radius
        )

    @staticmethod
    def polygon(vertices) -> "ConvexRegion":
        verts = tuple((float(x), float(y)) for x, y in vertices)
        for x, y in verts:
            if not _finite(x, y):
                raise DegenerateShape("non-finite polygon vertex")
        _check_strictly_convex_ccw(verts)
        cx, cy, r_in = _chebyshev_center(verts)
        rep = Point2(cx, cy)
        r_out = max(math.hypot(x - cx, y - cy) for x, y in verts)
        return ConvexRegion(
            "polygon", None, None, verts, rep, r_in, r_out, _poly_diameter(verts)
        )

    def thickness(self) -> float:
        return self.r_outer / self.r_inner

    def contains_point(self, q: Point2) -> bool:
        if self.kind == "disk":
            dx = q.x - self.center.x
            dy = q.y - self.center.y
            return dx * dx + dy * dy <= self.radius * self.radius
        verts = self.vertices
        n = len(verts)
        qx, qy = q.x, q.y
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            if (bx - ax) * (qy - ay) - (by - ay) * (qx - ax) < 0.0:
                return False
        return True

    def translated(self, dx: float, dy: float) -> "ConvexRegion":
        if self.kind == "disk":
            return ConvexRegion.disk(
                Point2(self.center.x + dx, self.center.y + dy), self.radius
            )
        return ConvexRegion.polygon([(x + dx, y + dy) for x, y in self.vertices])

    def __repr__(self):
        if self.kind == "disk":
            return f"ConvexRegion.disk(({self.center.x}, {self.center.y}), {self.radius})"
        return f"ConvexRegion.polygon({list(self.vertices)!r})"


def compute_representative(region: ConvexRegion):
    """(rep, r_inner, r_outer) of a region's thickness witness."""
    return region.rep, region.r_inner, region.r_outer


def union_diameter(r1: ConvexRegion, r2: ConvexRegion) -> float:
    """Diameter of the union point set of two convex regions."""
    if r1.kind == "disk" and r2.kind == "disk":
        d = r1.center.dist(r2.center)
        return max(r1.diam, r2.diam, d + r1.radius + r2.radius)
    if r1.kind == "polygon" and r2.kind == "polygon":
        cross = 0.0
        for ax, ay in r1.vertices:
            for bx, by in r2.vertices:
                cross = max(cross, math.hypot(bx - ax, by - ay))
        return max(r1.diam, r2.diam, cross)
    disk, poly = (r1, r2) if r1.kind == "disk" else (r2, r1)
    cross = max(
        math.hypot(x - disk.center.x, y - disk.center.y) + disk.radius
        for x, y in poly.vertices
    )
    return max(disk.diam, poly.diam, cross)


def is_rho_similar(r1: ConvexRegion, r2: ConvexRegion, rho: float) -> bool:
    return union_diameter(r1, r2) <= rho * min(r1.diam, r2.diam)


def _dist2_point_to_cell(px, py, cell: CellExtent):
    # squared distance to the closed square
    x0, y0 = cell.anchor.x, cell.anchor.y
    x1, y1 = x0 + cell.side, y0 + cell.side
    dx = x0 - px if px < x0 else (px - x1 if px > x1 else 0.0)
    dy = y0 - py if py < y0 else (py - y1 if py > y1 else 0.0)
    return dx * dx + dy * dy


def region_intersects_cell(r: ConvexRegion, c: CellExtent) -> bool:
    """True iff the region meets the closed square of the cell."""
    if r.kind == "disk":
        return _dist2_point_to_cell(r.center.x, r.center.y, c) <= r.radius * r.radius

    # cheap reject/accept through the witness disks
    d2 = _dist2_point_to_cell(r.rep.x, r.rep.y, c)
    if d2 > r.r_outer * r.r_outer:
        return False
    if d2 <= r.r_inner * r.r_inner:
        return True

    # separating axis test: box axes plus polygon edge normals
    verts = r.vertices
    x0, y0 = c.anchor.x, c.anchor.y
    x1, y1 = x0 + c.side, y0 + c.side
    xs = [v[0] for v in verts]
    ys = [v[1] for v in verts]
    if max(xs) < x0 or min(xs) > x1 or max(ys) < y0 or min(ys) > y1:
        return False
    corners = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        nx, ny = ay - by, bx - ax  # inward normal of ccw edge
        poly_max = max(nx * vx + ny * vy for vx, vy in verts)
        poly_min = min(nx * vx + ny * vy for vx, vy in verts)
        box_proj = [nx * px + ny * py for px, py in corners]
        if max(box_proj) < poly_min or min(box_proj) > poly_max:
            return False
    return True


def region_inside_cell(r: ConvexRegion, c: CellExtent) -> bool:
    """True iff the region lies within the closed square of the cell."""
    if r.kind == "disk":
        return (
            c.anchor.x <= r.center.x - r.radius
            and r.center.x + r.radius <= c.anchor.x + c.side
            and c.anchor.y <= r.center.y - r.radius
            and r.center.y + r.radius <= c.anchor.y + c.side
        )
    return all(
        c.anchor.x <= x <= c.anchor.x + c.side
        and c.anchor.y <= y <= c.anchor.y + c.side
        for x, y in r.vertices
    )


def contains_point(r: ConvexRegion, q: Point2) -> bool:
    return r.contains_point(q)


@dataclass(frozen=True)
class WedgeParams:
    """k = ceil(13 * beta) equal angular sectors; k * phi == 2*pi."""

    beta: float
    k: int
    phi: float

    @staticmethod
    def for_beta(beta: float) -> "WedgeParams":
        if beta < 1.0:
            raise ValueError(f"thickness bound must be >= 1, got {beta}")
        k = math.ceil(13.0 * beta)
        return WedgeParams(beta, k, TWO_PI / k)


def wedge_index(c: Point2, m: Point2, w: WedgeParams) -> int:
    """Index i with angle(m - c) in [i*phi, (i+1)*phi), angles in [0, 2*pi)."""
    dx = m.x - c.x
    dy = m.y - c.y
    if dx == 0.0 and dy == 0.0:
        raise CoincidentPoints("wedge direction undefined for coincident points")
    ang = math.atan2(dy, dx)
    if ang < 0.0:
        ang += TWO_PI
    i = int(ang / w.phi)
    if i >= w.k:  # guard the rounding edge at 2*pi
        i = w.k - 1
    return i
