"""Planar kernels shared by the scorers and rewards.

Everything works in unit image coordinates: x right, y DOWN, both in [0, 1].
A positive rotation angle therefore turns +x toward +y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGENERATE_AREA = 1e-12
RECT_TOL = 1e-9
_BOUNDARY_EPS = 1e-12


class EmptyPolyline(ValueError):
    pass


class EmptyPointSet(ValueError):
    pass


class DegeneratePolygon(ValueError):
    pass


class NonPositiveDimension(ValueError):
    pass


class NotARectangle(ValueError):
    pass


def _as_points(obj, min_len: int, err: type[ValueError]) -> np.ndarray:
    pts = np.asarray(obj, dtype=float)
    if pts.ndim == 1 and pts.size == 0:
        raise err("no points given")
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < min_len:
        raise err(f"expected at least {min_len} (x, y) point(s), got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise err("points must be finite")
    return pts


def polyline_length(points) -> float:
    pts = _as_points(points, 1, EmptyPolyline)
    if len(pts) == 1:
        return 0.0
    seg = np.diff(pts, axis=0)
    return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


def resample_polyline(points, n: int) -> np.ndarray:
    """n points uniformly spaced in arc length, at fractions k/(n-1).

    Endpoints are reproduced exactly. A target that lands exactly on a
    shared vertex resolves to the earlier segment. Zero total length
    degenerates to the first point repeated n times.
    """
    pts = _as_points(points, 1, EmptyPolyline)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1]) if len(pts) > 1 else np.zeros(0)
    cum = np.concatenate(([0.0], np.cumsum(seglen)))
    total = float(cum[-1])
    if n == 1:
        return pts[:1].copy()
    if total <= 0.0:
        return np.repeat(pts[:1], n, axis=0)
    out = np.empty((n, 2), dtype=float)
    for k in range(n):
        t = (k / (n - 1)) * total
        j = int(np.searchsorted(cum, t, side="left"))
        j = max(j, 1)
        j = min(j, len(cum) - 1)
        span = cum[j] - cum[j - 1]
        frac = 0.0 if span <= 0.0 else (t - cum[j - 1]) / span
        frac = min(max(frac, 0.0), 1.0)
        # (1-f)*a + f*b reproduces vertices exactly at f in {0, 1}
        out[k] = (1.0 - frac) * pts[j - 1] + frac * pts[j]
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def _pairwise(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    return np.hypot(
        p[:, None, 0] - g[None, :, 0],
        p[:, None, 1] - g[None, :, 1],
    )


def discrete_frechet(p, g) -> float:
    """Coupling distance over the full DP table (symmetric in its arguments)."""
    P = _as_points(p, 1, EmptyPolyline)
    G = _as_points(g, 1, EmptyPolyline)
    d = _pairwise(P, G)
    M, N = d.shape
    C = np.full((M + 1, N + 1), np.inf)
    C[0, 0] = 0.0
    for i in range(1, M + 1):
        row = C[i]
        prev = C[i - 1]
        di = d[i - 1]
        for j in range(1, N + 1):
            reach = min(prev[j], row[j - 1], prev[j - 1])
            step = di[j - 1]
            row[j] = step if step > reach else reach
    return float(C[M, N])


def directed_mean_distance(p, g) -> float:
    """Mean over p of the nearest-neighbour distance into g (asymmetric)."""
    P = _as_points(p, 1, EmptyPointSet)
    G = _as_points(g, 1, EmptyPointSet)
    return float(_pairwise(P, G).min(axis=1).mean())


def bidirectional_mean_distance(p, g) -> float:
    P = _as_points(p, 1, EmptyPointSet)
    G = _as_points(g, 1, EmptyPointSet)
    d = _pairwise(P, G)
    return float(0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))


def polygon_signed_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _validated_polygon(vertices) -> np.ndarray:
    v = _as_points(vertices, 3, DegeneratePolygon)
    if abs(polygon_signed_area(v)) < DEGENERATE_AREA:
        raise DegeneratePolygon("polygon area below 1e-12")
    return v


def point_in_polygon(point, vertices) -> bool:
    """Even-odd ray casting; points on the boundary count as inside."""
    v = _validated_polygon(vertices)
    x, y = float(point[0]), float(point[1])
    n = len(v)
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        if (
            abs(cross) <= _BOUNDARY_EPS
            and min(ax, bx) - _BOUNDARY_EPS <= x <= max(ax, bx) + _BOUNDARY_EPS
            and min(ay, by) - _BOUNDARY_EPS <= y <= max(ay, by) + _BOUNDARY_EPS
        ):
            return True
    inside = False
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        if (ay > y) != (by > y):
            xi = ax + (y - ay) * (bx - ax) / (by - ay)
            if x < xi:
                inside = not inside
    return inside


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, corners normalized so x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        x0, x1 = self.x0, self.x1
        if x0 > x1:
            object.__setattr__(self, "x0", x1)
            object.__setattr__(self, "x1", x0)
        y0, y1 = self.y0, self.y1
        if y0 > y1:
            object.__setattr__(self, "y0", y1)
            object.__setattr__(self, "y1", y0)

    @classmethod
    def from_corners(cls, c1, c2) -> "Box":
        (x0, y0), (x1, y1) = c1, c2
        return cls(min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def box_iou(a: Box, b: Box) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        # both degenerate; identical degenerate boxes count as a perfect match
        return 1.0 if (a.x0, a.y0, a.x1, a.y1) == (b.x0, b.y0, b.x1, b.y1) else 0.0
    return inter / union


@dataclass(frozen=True)
class GraspParam:
    """Oriented rectangle: center, extents, rotation (radians, +x toward +y)."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float


def grasp_params_to_corners(gp: GraspParam) -> np.ndarray:
    """Corner order: (-w/2,-h/2), (+w/2,-h/2), (+w/2,+h/2), (-w/2,+h/2), rotated."""
    if gp.w <= 0 or gp.h <= 0:
        raise NonPositiveDimension(f"w and h must be positive, got {gp.w}, {gp.h}")
    c, s = math.cos(gp.theta), math.sin(gp.theta)
    hw, hh = gp.w / 2.0, gp.h / 2.0
    local = np.array([(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([gp.cx, gp.cy])


def rect_is_valid(corners, tol: float = RECT_TOL) -> bool:
    """Opposite sides equal as vectors, diagonals equal in length."""
    c = np.asarray(corners, dtype=float)
    if c.shape != (4, 2) or not np.isfinite(c).all():
        return False
    if np.abs((c[1] - c[0]) - (c[2] - c[3])).max() > tol:
        return False
    if np.abs((c[3] - c[0]) - (c[2] - c[1])).max() > tol:
        return False
    d1 = np.hypot(*(c[2] - c[0]))
    d2 = np.hypot(*(c[3] - c[1]))
    return abs(d1 - d2) <= tol


def rect_angle(corners) -> float:
    """Orientation of the first edge, folded to [0, pi)."""
    c = np.asarray(corners, dtype=float)
    dx, dy = c[1] - c[0]
    return math.atan2(dy, dx) % math.pi


def angle_difference(a: float, b: float) -> float:
    """Smallest separation between two undirected axes (result in [0, pi/2])."""
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def _ccw(poly: np.ndarray) -> np.ndarray:
    return poly if polygon_signed_area(poly) >= 0 else poly[::-1]


def _clip_convex(subject: np.ndarray, clip: np.ndarray) -> list:
    # Sutherland-Hodgman; clip must be convex and CCW.
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        prior = output
        output = []
        for k in range(len(prior)):
            px, py = prior[k - 1]
            qx, qy = prior[k]
            p_in = ex * (py - ay) - ey * (px - ax) >= 0.0
            q_in = ex * (qy - ay) - ey * (qx - ax) >= 0.0
            if q_in:
                if not p_in:
                    output.append(_edge_cross(ax, ay, ex, ey, px, py, qx, qy))
                output.append((qx, qy))
            elif p_in:
                output.append(_edge_cross(ax, ay, ex, ey, px, py, qx, qy))
    return output


def _edge_cross(ax, ay, ex, ey, px, py, qx, qy):
    dp = ex * (py - ay) - ey * (px - ax)
    dq = ex * (qy - ay) - ey * (qx - ax)
    t = dp / (dp - dq)
    return (px + t * (qx - px), py + t * (qy - py))


def convex_intersection_area(poly_a, poly_b) -> float:
    a = np.asarray(poly_a, dtype=float)
    b = _ccw(np.asarray(poly_b, dtype=float))
    clipped = _clip_convex(a, b)
    if len(clipped) < 3:
        return 0.0
    return abs(polygon_signed_area(np.asarray(clipped)))


def rotated_rect_iou(corners_a, corners_b) -> float:
    a = np.asarray(corners_a, dtype=float)
    b = np.asarray(corners_b, dtype=float)
    area_a = abs(polygon_signed_area(a))
    area_b = abs(polygon_signed_area(b))
    if area_a < DEGENERATE_AREA or area_b < DEGENERATE_AREA:
        return 1.0 if np.array_equal(a, b) else 0.0
    inter = convex_intersection_area(a, b)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 1.0
    return inter / union
