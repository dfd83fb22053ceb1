"""Planar paths built from lines, circular arcs and clothoids.

A path is an ordered chain of constant-or-linear-curvature segments,
parameterized by arc length ``s``.  The module provides pose and curvature
queries along the path and the projection of an arbitrary world pose onto
the path in Frenet coordinates ``(s, l, theta_tilde)``.

Conventions
-----------
* Headings are measured from the world X axis, counter-clockwise positive.
* Curvature is signed: positive curves to the left.
* The lateral offset ``l`` is positive on the left of the tangent direction
  (along the Frenet Y axis), so that ``dl/dt = v * sin(theta_tilde)``.
* ``theta_tilde`` is always wrapped to ``[-pi, pi)``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# Joint matching tolerances for chained segments.
JOINT_POS_TOL = 1e-9
JOINT_HEAD_TOL = 1e-9

# Spacing of the cached clothoid integration nodes.  Positions between nodes
# are recovered with a 5-point Gauss-Legendre rule whose error on a 0.05 m
# sub-interval is far below the 1e-10 m position budget.
_CLOTHOID_NODE_STEP = 0.05

# 5-point Gauss-Legendre abscissae/weights on [-1, 1].
_GL5_X = np.array(
    [-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640]
)
_GL5_W = np.array(
    [0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891]
)


class PathError(Exception):
    """Base class for path construction and query errors."""


class EmptyPath(PathError):
    """Raised when a path is built from an empty segment list."""


class ContinuityError(PathError):
    """Raised when consecutive segments do not join with matching pose."""


class OutOfRange(PathError):
    """Raised when an arc-length query falls outside ``[0, total_length]``."""


class SingularProjection(PathError):
    """Raised when a pose is at or beyond the local center of curvature."""


class AmbiguousProjection(PathError):
    """Raised when two distant path points are equally close to the pose."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to ``[-pi, pi)``; ``wrap_angle(pi) == -pi``."""
    return (angle + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class FrenetState:
    """Path-relative coordinates of a world pose.

    ``s`` is arc length along the path, ``l`` the signed lateral offset
    (positive left) and ``theta_tilde`` the heading error versus the path
    tangent, wrapped to ``[-pi, pi)``.
    """

    s: float
    l: float
    theta_tilde: float

    def normalized_offset(self, radius: float) -> float:
        """Lateral offset in units of the turning radius."""
        return self.l / radius


@dataclass(frozen=True)
class PathSegment:
    """One constant-or-linear-curvature piece of a path.

    Lines carry zero curvature, arcs a constant nonzero curvature, and
    clothoids interpolate curvature linearly in arc length.  ``start_pose``
    is the world pose ``(x, y, heading)`` at the segment's first point.
    """

    kind: str
    length: float
    curvature_start: float
    curvature_end: float
    start_pose: tuple[float, float, float]
    _node_xy: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in ("line", "arc", "clothoid"):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if not self.length > 0.0:
            raise ValueError("segment length must be > 0")
        if self.kind == "line" and (self.curvature_start != 0.0 or self.curvature_end != 0.0):
            raise ValueError("line segments must have zero curvature")
        if self.kind == "arc":
            if self.curvature_start != self.curvature_end:
                raise ValueError("arc segments need equal start/end curvature")
            if self.curvature_start == 0.0:
                raise ValueError("arc segments need nonzero curvature")
        if self.kind == "clothoid":
            object.__setattr__(self, "_node_xy", self._integrate_nodes())

    # -- local queries (u is arc length from the segment start) ---------

    def heading(self, u: float) -> float:
        c0, c1 = self.curvature_start, self.curvature_end
        return self.start_pose[2] + c0 * u + (c1 - c0) * u * u / (2.0 * self.length)

    def curvature(self, u: float) -> float:
        c0, c1 = self.curvature_start, self.curvature_end
        return c0 + (c1 - c0) * u / self.length

    def curvature_rate(self) -> float:
        return (self.curvature_end - self.curvature_start) / self.length

    def point(self, u: float) -> tuple[float, float]:
        x0, y0, th0 = self.start_pose
        if self.kind == "line":
            return x0 + u * math.cos(th0), y0 + u * math.sin(th0)
        if self.kind == "arc":
            c = self.curvature_start
            th = th0 + c * u
            return x0 + (math.sin(th) - math.sin(th0)) / c, y0 - (math.cos(th) - math.cos(th0)) / c
        return self._clothoid_point(u)

    def pose(self, u: float) -> tuple[float, float, float]:
        x, y = self.point(u)
        return x, y, self.heading(u)

    def _node_step(self) -> float:
        n = max(1, math.ceil(self.length / _CLOTHOID_NODE_STEP))
        return self.length / n

    def _integrate_nodes(self) -> np.ndarray:
        """Cumulative clothoid positions at evenly spaced nodes."""
        h = self._node_step()
        n = round(self.length / h)
        xy = np.empty((n + 1, 2))
        xy[0] = self.start_pose[:2]
        for k in range(n):
            dx, dy = self._gl5(k * h, (k + 1) * h)
            xy[k + 1, 0] = xy[k, 0] + dx
            xy[k + 1, 1] = xy[k, 1] + dy
        return xy

    def _gl5(self, a: float, b: float) -> tuple[float, float]:
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        u = mid + half * _GL5_X
        th = (
            self.start_pose[2]
            + self.curvature_start * u
            + (self.curvature_end - self.curvature_start) * u * u / (2.0 * self.length)
        )
        return half * float(np.dot(_GL5_W, np.cos(th))), half * float(np.dot(_GL5_W, np.sin(th)))

    def _clothoid_point(self, u: float) -> tuple[float, float]:
        h = self._node_step()
        k = min(int(u / h), self._node_xy.shape[0] - 1)
        x, y = self._node_xy[k]
        a = k * h
        if u > a:
            dx, dy = self._gl5(a, u)
            x, y = x + dx, y + dy
        return float(x), float(y)


def _segment_from_spec(spec: dict, start_pose: tuple[float, float, float]) -> PathSegment:
    kind = str(spec["kind"]).lower()
    length = float(spec["length"])
    if "curvature" in spec and kind != "clothoid":
        c0 = c1 = float(spec["curvature"])
    else:
        c0 = float(spec.get("curvature_start", 0.0))
        c1 = float(spec.get("curvature_end", c0 if kind != "clothoid" else 0.0))
    if kind == "line":
        c0 = c1 = 0.0
    if "start_pose" in spec:
        given = tuple(float(v) for v in spec["start_pose"])
        dx = given[0] - start_pose[0]
        dy = given[1] - start_pose[1]
        dth = wrap_angle(given[2] - start_pose[2])
        if math.hypot(dx, dy) > JOINT_POS_TOL or abs(dth) > JOINT_HEAD_TOL:
            raise ContinuityError(
                f"segment start pose {given} does not match chained pose {start_pose}"
            )
        start_pose = given
    return PathSegment(kind, length, c0, c1, start_pose)


@dataclass(frozen=True)
class Path:
    """Immutable chain of segments with arc-length bookkeeping.

    Instances are safe to share across threads/processes: all queries are
    pure and every cache is fixed at construction time.
    """

    segments: tuple[PathSegment, ...]
    total_length: float
    cumulative_s: tuple[float, ...]
    _scan_s: np.ndarray = field(repr=False, compare=False)
    _scan_xy: np.ndarray = field(repr=False, compare=False)

    # -- queries ---------------------------------------------------------

    def _locate(self, s: float) -> tuple[PathSegment, float, int]:
        if s < -1e-9 or s > self.total_length + 1e-9:
            raise OutOfRange(f"s={s} outside [0, {self.total_length}]")
        s = min(max(s, 0.0), self.total_length)
        i = bisect.bisect_right(self.cumulative_s, s) - 1
        i = min(i, len(self.segments) - 1)
        return self.segments[i], s - self.cumulative_s[i], i

    def pose_at(self, s: float) -> tuple[float, float, float]:
        """World pose ``(x, y, theta_d)`` of the path point at arc length s."""
        seg, u, _ = self._locate(s)
        return seg.pose(u)

    def curvature(self, s: float) -> tuple[float, float]:
        """Curvature and its arc-length derivative at s.

        At an interior joint the right-limit curvature is returned and the
        derivative is reported as 0 (the jump is not differentiable).
        """
        seg, u, i = self._locate(s)
        c = seg.curvature(u)
        at_joint = i > 0 and u == 0.0
        return c, 0.0 if at_joint else seg.curvature_rate()

    # -- projection ------------------------------------------------------

    def frenet_project(
        self,
        pose: Sequence[float],
        hint_s: Optional[float] = None,
        radius: float = 0.3,
    ) -> FrenetState:
        """Project a world pose onto the path.

        With ``hint_s`` the search is restricted to ``hint_s +- radius``
        (continuity mode for tracking loops); otherwise a global coarse
        scan seeds local refinement.  ``radius`` also sets the separation
        beyond which two equally near minima raise AmbiguousProjection.
        """
        x, y, th = float(pose[0]), float(pose[1]), float(pose[2])
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(th)):
            raise ValueError("pose must be finite")
        if hint_s is not None:
            if hint_s < -1e-9 or hint_s > self.total_length + 1e-9:
                raise OutOfRange(f"hint_s={hint_s} outside path domain")
            lo = max(0.0, hint_s - radius)
            hi = min(self.total_length, hint_s + radius)
            s_best, _ = self._best_in_window(x, y, lo, hi)
        else:
            s_best = self._global_minimum(x, y, radius)
        return self._finish(x, y, th, s_best)

    def _finish(self, x: float, y: float, th: float, s: float) -> FrenetState:
        px, py, thd = self.pose_at(s)
        nx, ny = -math.sin(thd), math.cos(thd)
        l = (x - px) * nx + (y - py) * ny
        c, _ = self.curvature(s)
        if 1.0 - c * l <= 1e-12:
            raise SingularProjection(
                f"pose at or beyond center of curvature (s={s:.6f}, c={c:.6f}, l={l:.6f})"
            )
        return FrenetState(s=s, l=l, theta_tilde=wrap_angle(th - thd))

    def _global_minimum(self, x: float, y: float, radius: float) -> float:
        d2 = (self._scan_xy[:, 0] - x) ** 2 + (self._scan_xy[:, 1] - y) ** 2
        # Local minima of the sampled distance, refined independently.
        interior = np.r_[False, (d2[1:-1] <= d2[:-2]) & (d2[1:-1] <= d2[2:]), False]
        interior[0] = d2[0] <= d2[1]
        interior[-1] = d2[-1] <= d2[-2]
        idx = np.flatnonzero(interior)
        step = self._scan_s[1] - self._scan_s[0] if len(self._scan_s) > 1 else self.total_length
        candidates = []
        for i in idx:
            lo = max(0.0, self._scan_s[i] - step)
            hi = min(self.total_length, self._scan_s[i] + step)
            candidates.append(self._best_in_window(x, y, lo, hi))
        candidates.sort(key=lambda c: c[1])
        s_best, d_best = candidates[0]
        for s_other, d_other in candidates[1:]:
            if abs(s_other - s_best) > radius and abs(
                math.sqrt(d_other) - math.sqrt(d_best)
            ) <= 1e-9:
                # A pose at/beyond a center of curvature is equidistant from a
                # whole arc; report that as the singularity it is.
                px, py, thd = self.pose_at(s_best)
                l = -(x - px) * math.sin(thd) + (y - py) * math.cos(thd)
                c, _ = self.curvature(s_best)
                if 1.0 - c * l <= 1e-9:
                    raise SingularProjection(
                        f"pose at or beyond center of curvature (s={s_best:.6f})"
                    )
                raise AmbiguousProjection(
                    f"equidistant projections at s={s_best:.6f} and s={s_other:.6f}"
                )
        return s_best

    def _best_in_window(self, x: float, y: float, lo: float, hi: float) -> tuple[float, float]:
        """Minimize squared distance to the path over ``[lo, hi]``."""
        best_s, best_d2 = lo, self._dist2(x, y, lo)
        for s in self._candidates(x, y, lo, hi):
            d2 = self._dist2(x, y, s)
            if d2 < best_d2:
                best_s, best_d2 = s, d2
        d2_hi = self._dist2(x, y, hi)
        if d2_hi < best_d2:
            best_s, best_d2 = hi, d2_hi
        return best_s, best_d2

    def _dist2(self, x: float, y: float, s: float) -> float:
        px, py = (self.pose_at(s))[:2]
        return (x - px) ** 2 + (y - py) ** 2

    def _candidates(self, x: float, y: float, lo: float, hi: float) -> Iterable[float]:
        i_lo = max(0, bisect.bisect_right(self.cumulative_s, lo) - 1)
        i_hi = max(0, bisect.bisect_right(self.cumulative_s, min(hi, self.total_length) - 1e-12) - 1)
        for i in range(i_lo, min(i_hi, len(self.segments) - 1) + 1):
            seg = self.segments[i]
            s0 = self.cumulative_s[i]
            ua = max(0.0, lo - s0)
            ub = min(seg.length, hi - s0)
            if ub <= ua:
                continue
            if seg.kind == "line":
                u = self._project_line(seg, x, y)
            elif seg.kind == "arc":
                yield from (s0 + u for u in self._project_arc(seg, x, y, ua, ub))
                continue
            else:
                u = self._project_clothoid(seg, x, y, ua, ub)
            if u is not None:
                yield s0 + min(max(u, ua), ub)

    @staticmethod
    def _project_line(seg: PathSegment, x: float, y: float) -> float:
        x0, y0, th0 = seg.start_pose
        return (x - x0) * math.cos(th0) + (y - y0) * math.sin(th0)

    @staticmethod
    def _project_arc(seg: PathSegment, x: float, y: float, ua: float, ub: float) -> list[float]:
        c = seg.curvature_start
        x0, y0, th0 = seg.start_pose
        cx = x0 - math.sin(th0) / c
        cy = y0 + math.cos(th0) / c
        if math.hypot(x - cx, y - cy) < 1e-15:
            return [0.5 * (ua + ub)]  # at the center: every arc point equidistant
        phi = math.atan2(y - cy, x - cx)
        # Heading at the nearest circle point: phi + pi/2 * sign(c).
        th_target = phi + math.copysign(0.5 * math.pi, c)
        u0 = wrap_angle(th_target - th0) / c
        period = TWO_PI / abs(c)
        out = []
        k_min = math.floor((ua - u0) / period) - 1
        k_max = math.ceil((ub - u0) / period) + 1
        for k in range(k_min, k_max + 1):
            u = u0 + k * period
            if ua - 1e-12 <= u <= ub + 1e-12:
                out.append(min(max(u, ua), ub))
        return out

    def _project_clothoid(
        self, seg: PathSegment, x: float, y: float, ua: float, ub: float
    ) -> Optional[float]:
        def g(u: float) -> float:
            px, py = seg.point(u)
            th = seg.heading(u)
            return (x - px) * math.cos(th) + (y - py) * math.sin(th)

        # Bracket the tangency condition g(u) = 0 on a fine local grid,
        # then polish with Newton (g' = c * l_perp - 1).
        n = max(2, math.ceil((ub - ua) / 0.02))
        us = [ua + (ub - ua) * k / n for k in range(n + 1)]
        gs = [g(u) for u in us]
        best = None
        for a, b, ga, gb in zip(us, us[1:], gs, gs[1:]):
            if ga == 0.0:
                return a
            if ga * gb < 0.0:
                u = 0.5 * (a + b)
                for _ in range(60):
                    px, py = seg.point(u)
                    th = seg.heading(u)
                    gu = (x - px) * math.cos(th) + (y - py) * math.sin(th)
                    lp = -(x - px) * math.sin(th) + (y - py) * math.cos(th)
                    dg = seg.curvature(u) * lp - 1.0
                    if dg != 0.0:
                        u_new = u - gu / dg
                    else:
                        u_new = 0.5 * (a + b)
                    if not a <= u_new <= b:
                        # fall back to bisection
                        if gu * ga > 0.0:
                            a = u
                        else:
                            b = u
                        u_new = 0.5 * (a + b)
                    if abs(u_new - u) < 1e-12:
                        u = u_new
                        break
                    u = u_new
                if best is None or self._seg_d2(seg, x, y, u) < self._seg_d2(seg, x, y, best):
                    best = u
        return best

    @staticmethod
    def _seg_d2(seg: PathSegment, x: float, y: float, u: float) -> float:
        px, py = seg.point(u)
        return (x - px) ** 2 + (y - py) ** 2


def build_path(
    segment_specs: Sequence[dict],
    start_pose: Sequence[float] = (0.0, 0.0, 0.0),
) -> Path:
    """Build a path by chaining segment specs from a start pose.

    Each spec is a mapping with ``kind`` (line | arc | clothoid), ``length``
    and curvature fields (``curvature`` or ``curvature_start`` /
    ``curvature_end``).  A spec may carry an explicit ``start_pose``; it is
    checked against the chained pose and a mismatch beyond 1e-9 (m or rad)
    raises ContinuityError.
    """
    if not segment_specs:
        raise EmptyPath("path needs at least one segment")
    pose = (float(start_pose[0]), float(start_pose[1]), float(start_pose[2]))
    segments: list[PathSegment] = []
    cumulative = [0.0]
    for spec in segment_specs:
        seg = _segment_from_spec(dict(spec), pose)
        segments.append(seg)
        cumulative.append(cumulative[-1] + seg.length)
        pose = seg.pose(seg.length)
    total = cumulative[-1]
    scan_step = min(0.25, max(total / 1000.0, 1e-3))
    n = max(2, math.ceil(total / scan_step))
    scan_s = np.linspace(0.0, total, n + 1)
    scan_xy = np.empty((n + 1, 2))
    for j, s in enumerate(scan_s):
        i = min(bisect.bisect_right(cumulative, s) - 1, len(segments) - 1)
        scan_xy[j] = segments[i].point(s - cumulative[i])
    return Path(
        segments=tuple(segments),
        total_length=total,
        cumulative_s=tuple(cumulative[:-1]),
        _scan_s=scan_s,
        _scan_xy=scan_xy,
    )


def pose_at(path: Path, s: float) -> tuple[float, float, float]:
    return path.pose_at(s)


def curvature(path: Path, s: float) -> tuple[float, float]:
    return path.curvature(s)


def frenet_project(
    path: Path,
    pose: Sequence[float],
    hint_s: Optional[float] = None,
    radius: float = 0.3,
) -> FrenetState:
    return path.frenet_project(pose, hint_s=hint_s, radius=radius)
