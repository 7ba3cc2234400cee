"""Planar geometry of the spectral locus.

Chromaticities of a 3-channel sensor live on the unit-sum plane.  This
module samples the locus, classifies its convexity (strict, with ties,
piecewise along hull arcs, or neither), measures hull membership of
arbitrary plane points, and builds the circular reparametrizations used by
the peaked-density inversion: gluing hull arcs end to end and constant
speed normalization.

All angle computations use one fixed orthonormal basis of the plane so that
results are reproducible run to run.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DegenerateLocusError,
    LiftAmbiguousError,
    NotConvexError,
    PreimageSplitError,
)
from .sensor import Sensor, locus_matrix

FloatArray = NDArray[np.floating]

TWO_PI = 2.0 * np.pi

# Default tolerances for the convexity classifier.
VERTEX_TOL = 1e-7        # hull-membership slack, chromaticity units
ANGLE_TOL = 1e-9         # allowed backward step of the angle lift, radians
BOUNDARY_TOL = 1e-9      # |signed depth| below this counts as "on boundary"
MIN_LOCUS_SAMPLES = 64
_MIN_RUN = 3             # hull/interior runs shorter than this are noise


def _plane_basis() -> tuple[FloatArray, FloatArray]:
    """Fixed orthonormal basis of {x in R^3 : sum(x) = 1}.

    Built by projecting the first two coordinate axes onto the plane and
    orthonormalizing, so every run agrees on angles.
    """
    center = np.full(3, 1.0 / 3.0)
    u1 = np.array([1.0, 0.0, 0.0]) - center
    u1 /= np.linalg.norm(u1)
    u2 = np.array([0.0, 1.0, 0.0]) - center
    u2 -= u1 * (u2 @ u1)
    u2 /= np.linalg.norm(u2)
    return center, np.stack([u1, u2])


_PLANE_CENTER, _PLANE_AXES = _plane_basis()


def _components(p) -> FloatArray:
    return np.asarray(getattr(p, "components", p), dtype=float)


def to_plane(points) -> FloatArray:
    """Map unit-sum points (…, 3) to 2-d plane coordinates."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise DegenerateLocusError("planar geometry requires 3 channels")
    return (pts - _PLANE_CENTER) @ _PLANE_AXES.T


def from_plane(xy) -> FloatArray:
    """Inverse of :func:`to_plane`; rows sum to 1 exactly up to roundoff."""
    xy = np.asarray(xy, dtype=float)
    return xy @ _PLANE_AXES + _PLANE_CENTER


@dataclass(frozen=True)
class SampledLocus:
    """Locus chromaticities at uniformly spaced wavelengths."""

    lambdas: FloatArray
    points: FloatArray  # (n, d), rows sum to 1

    def __post_init__(self):
        lambdas = np.asarray(self.lambdas, dtype=float)
        points = np.asarray(self.points, dtype=float)
        if lambdas.ndim != 1 or points.ndim != 2 or points.shape[0] != lambdas.size:
            raise DegenerateLocusError("locus arrays have inconsistent shapes")
        if lambdas.size < MIN_LOCUS_SAMPLES:
            raise DegenerateLocusError(
                f"locus needs at least {MIN_LOCUS_SAMPLES} samples, got {lambdas.size}"
            )
        lambdas.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return int(self.lambdas.size)

    @property
    def plane_points(self) -> FloatArray:
        return to_plane(self.points)


def sample_locus(sensor: Sensor, n: int) -> SampledLocus:
    """Normalized responses at ``n`` uniform wavelengths across the support.

    When ``n`` equals the native grid length the samples coincide with the
    grid and no interpolation happens.
    """
    if n < MIN_LOCUS_SAMPLES:
        raise DegenerateLocusError(f"need n >= {MIN_LOCUS_SAMPLES}, got {n}")
    lams = np.linspace(sensor.grid.lambda_min, sensor.grid.lambda_max, int(n))
    if int(n) == sensor.grid.n:
        return SampledLocus(sensor.grid.samples.copy(), locus_matrix(sensor))
    chi = np.stack(
        [np.interp(lams, sensor.grid.samples, sensor.channels[i]) for i in range(sensor.d)]
    )
    sums = chi.sum(axis=0)
    pts = np.empty((lams.size, sensor.d))
    ok = sums > sensor.channel_sum.max() * 1e-12
    pts[ok] = (chi[:, ok] / sums[ok]).T
    if not ok.all():
        # endpoint rows with vanishing total: reuse the extended grid table
        eta = locus_matrix(sensor)
        for j in np.nonzero(~ok)[0]:
            row = np.array(
                [np.interp(lams[j], sensor.grid.samples, eta[:, i]) for i in range(sensor.d)]
            )
            pts[j] = row / row.sum()
    return SampledLocus(lams, pts)


# ---------------------------------------------------------------------------
# Primitive planar helpers
# ---------------------------------------------------------------------------

def convex_hull(points2d: FloatArray) -> NDArray[np.intp]:
    """Indices of hull vertices, counterclockwise, collinear points excluded.

    Andrew's monotone chain on lexicographically sorted points.
    """
    pts = np.asarray(points2d, dtype=float)
    n = pts.shape[0]
    if n < 3:
        raise DegenerateLocusError("hull needs at least 3 points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))

    def half(indices):
        chain: list[int] = []
        for i in indices:
            while len(chain) >= 2:
                o, a = pts[chain[-2]], pts[chain[-1]]
                b = pts[i]
                if (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) <= 0.0:
                    chain.pop()
                else:
                    break
            chain.append(int(i))
        return chain

    lower = half(order)
    upper = half(order[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateLocusError("locus is collinear; hull is degenerate")
    return np.asarray(hull, dtype=np.intp)


def _signed_depths(hull_pts: FloatArray, queries: FloatArray) -> FloatArray:
    """Signed distance of each query to the hull boundary, positive inside.

    For points inside a convex polygon the distance to the boundary is the
    minimum perpendicular distance over edges; outside it is the distance
    to the nearest edge segment, negated.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    a = hull_pts
    b = np.roll(hull_pts, -1, axis=0)
    e = b - a
    elen = np.linalg.norm(e, axis=1)
    # perpendicular signed distance to each edge line (ccw: positive inside)
    diff = q[:, None, :] - a[None, :, :]
    cross = e[None, :, 0] * diff[:, :, 1] - e[None, :, 1] * diff[:, :, 0]
    line = cross / elen[None, :]
    inside_depth = line.min(axis=1)

    t = np.clip((diff * e[None, :, :]).sum(axis=2) / (elen**2)[None, :], 0.0, 1.0)
    foot = a[None, :, :] + t[:, :, None] * e[None, :, :]
    seg = np.linalg.norm(q[:, None, :] - foot, axis=2).min(axis=1)

    return np.where(inside_depth >= 0.0, inside_depth, -seg)


def _hull_centroid(hull_pts: FloatArray) -> FloatArray:
    """Area centroid of a convex polygon (ccw)."""
    x, y = hull_pts[:, 0], hull_pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = cross.sum() / 2.0
    if abs(area) < 1e-300:
        raise DegenerateLocusError("hull area is zero")
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def _point_polyline_distance(pts: FloatArray, q: FloatArray) -> float:
    a, b = pts[:-1], pts[1:]
    e = b - a
    ee = (e * e).sum(axis=1)
    ee[ee == 0.0] = 1.0
    t = np.clip(((q - a) * e).sum(axis=1) / ee, 0.0, 1.0)
    foot = a + t[:, None] * e
    return float(np.linalg.norm(foot - q, axis=1).min())


# ---------------------------------------------------------------------------
# Angles, lifts, winding
# ---------------------------------------------------------------------------

def plane_angle(center, p) -> float:
    """Angle of ``p`` seen from ``center``, in the fixed plane basis."""
    c = to_plane(_components(center))
    q = to_plane(_components(p))
    v = q - c
    if np.linalg.norm(v) == 0.0:
        raise LiftAmbiguousError("point coincides with the angle center")
    return float(np.arctan2(v[1], v[0]))


def unwrap_angles(center, locus) -> FloatArray:
    """Continuous angle lift of the locus around an interior center.

    The center must sit inside the hull at depth > 1e-6 and off the curve
    itself, otherwise the lift is ambiguous.
    """
    pts2 = locus.plane_points if isinstance(locus, SampledLocus) else to_plane(np.asarray(locus))
    c2 = to_plane(_components(center))
    hull_pts = pts2[convex_hull(pts2)]
    if _signed_depths(hull_pts, c2[None, :])[0] <= 1e-6:
        raise LiftAmbiguousError("lift center must be strictly inside the hull (depth > 1e-6)")
    if _point_polyline_distance(pts2, c2) <= 1e-9:
        raise LiftAmbiguousError("lift center sits on the curve")
    raw = np.arctan2(pts2[:, 1] - c2[1], pts2[:, 0] - c2[0])
    return np.unwrap(raw)


def winding_number(loop_points, point) -> int:
    """Turns of a closed polyline around a point (last edge closes the loop)."""
    pts = np.asarray(loop_points, dtype=float)
    pts2 = pts if pts.shape[-1] == 2 else to_plane(pts)
    q = _components(point)
    q2 = q if q.shape[-1] == 2 else to_plane(q)
    closed = np.vstack([pts2, pts2[:1]])
    if _point_polyline_distance(closed, q2) <= 1e-9:
        raise LiftAmbiguousError("winding number undefined for a point on the curve")
    v = closed - q2
    ang = np.arctan2(v[:, 1], v[:, 0])
    turns = np.diff(ang)
    turns = (turns + np.pi) % TWO_PI - np.pi
    total = turns.sum()
    k = round(total / TWO_PI)
    if abs(total - k * TWO_PI) > 1e-6:
        raise LiftAmbiguousError(f"winding sum {total!r} is not a multiple of 2*pi")
    return int(k)


# ---------------------------------------------------------------------------
# Convexity classification
# ---------------------------------------------------------------------------

class LocusClass(str, enum.Enum):
    STRICTLY_CONVEX = "StrictlyConvex"
    CONVEX = "Convex"
    PIECEWISE_CONVEX = "PiecewiseConvex"
    NON_CONVEX = "NonConvex"


@dataclass(frozen=True)
class ConvexityReport:
    locus_class: LocusClass
    segments: tuple[tuple[float, float], ...]
    purple_segments: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    witness: tuple[float, float, float] | None
    max_interior_deviation: float

    def to_json_dict(self) -> dict:
        return {
            "class": self.locus_class.value,
            "segments": [[a, b] for a, b in self.segments],
            "purple": [[list(p), list(q)] for p, q in self.purple_segments],
            "witness": list(self.witness) if self.witness is not None else None,
            "max_interior_deviation": self.max_interior_deviation,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _merge_short_runs(mask: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Flip interior runs shorter than _MIN_RUN to match their neighbors."""
    out = mask.copy()
    n = out.size
    i = 0
    while i < n:
        j = i
        while j < n and out[j] == out[i]:
            j += 1
        if (j - i) < _MIN_RUN and i > 0 and j < n:
            out[i:j] = out[i - 1]
        i = j
    return out


def _runs_of(mask: NDArray[np.bool_]) -> list[tuple[int, int]]:
    runs = []
    i = 0
    n = mask.size
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            runs.append((i, j - 1))
            i = j
        else:
            i += 1
    return runs


def classify_convexity(
    locus: SampledLocus,
    vertex_tol: float = VERTEX_TOL,
    angle_tol: float = ANGLE_TOL,
) -> ConvexityReport:
    """Classify the sampled locus.

    StrictlyConvex: every sample is a hull vertex and both the angle lift
    and the edge turning advance strictly.  Convex: on the hull with ties
    allowed (straight stretches, coincident samples).  PiecewiseConvex:
    hull arcs interleaved with interior excursions, the arcs jointly
    sweeping a monotone angle.  NonConvex: anything else, with a witness.
    """
    pts2 = locus.plane_points
    lams = locus.lambdas
    n = locus.n

    hull_idx = convex_hull(pts2)
    hull_pts = pts2[hull_idx]
    centroid = _hull_centroid(hull_pts)

    depths = _signed_depths(hull_pts, pts2)
    depths = np.maximum(depths, 0.0)  # own points cannot be outside
    max_dev = float(depths.max())
    on_hull = depths <= vertex_tol

    def lift_check(points: FloatArray, lam_sel: FloatArray):
        """Return (monotone_ok, strict_ok, witness)."""
        raw = np.arctan2(points[:, 1] - centroid[1], points[:, 0] - centroid[0])
        lift = np.unwrap(raw)
        if lift[-1] == lift[0]:
            return False, False, (float(lam_sel[0]), float(lam_sel[-1]), float(lam_sel[0]))
        orient = 1.0 if lift[-1] > lift[0] else -1.0
        steps = np.diff(lift) * orient
        k = int(np.argmin(steps))
        witness = (
            float(lam_sel[k]),
            float(lam_sel[min(k + 2, lam_sel.size - 1)]),
            float(lam_sel[k + 1]),
        )
        if steps.min() < -angle_tol:
            return False, False, witness
        sweep = abs(lift[-1] - lift[0])
        if sweep > TWO_PI + 1e-6:
            return False, False, witness
        return True, bool(steps.min() > angle_tol), None

    if on_hull.all():
        monotone, strict_steps, witness = lift_check(pts2, lams)
        if not monotone:
            return ConvexityReport(
                LocusClass.NON_CONVEX, ((float(lams[0]), float(lams[-1])),), (), witness, max_dev
            )
        edges = np.diff(pts2, axis=0)
        elen = np.linalg.norm(edges, axis=1)
        strict = strict_steps and bool(elen.min() > 0.0)
        if strict:
            ang = np.arctan2(edges[:, 1], edges[:, 0])
            turns = np.diff(np.unwrap(ang))
            orient = 1.0 if turns.sum() >= 0 else -1.0
            strict = bool((turns * orient).min() > angle_tol)
        closing = ((tuple(locus.points[-1]), tuple(locus.points[0])),)
        cls = LocusClass.STRICTLY_CONVEX if strict else LocusClass.CONVEX
        return ConvexityReport(
            cls, ((float(lams[0]), float(lams[-1])),), closing, None, max_dev
        )

    mask = _merge_short_runs(on_hull)
    runs = _runs_of(mask)
    if not runs:
        return ConvexityReport(
            LocusClass.NON_CONVEX,
            ((float(lams[0]), float(lams[-1])),),
            (),
            None,
            max_dev,
        )
    sel = np.concatenate([np.arange(i0, i1 + 1) for i0, i1 in runs])
    monotone, _, witness = lift_check(pts2[sel], lams[sel])
    if not monotone:
        return ConvexityReport(
            LocusClass.NON_CONVEX,
            ((float(lams[0]), float(lams[-1])),),
            (),
            witness,
            max_dev,
        )
    segments = tuple((float(lams[i0]), float(lams[i1])) for i0, i1 in runs)
    purple = []
    for k in range(len(runs)):
        end_idx = runs[k][1]
        start_idx = runs[(k + 1) % len(runs)][0]
        purple.append((tuple(locus.points[end_idx]), tuple(locus.points[start_idx])))
    return ConvexityReport(
        LocusClass.PIECEWISE_CONVEX, segments, tuple(purple), None, max_dev
    )


# ---------------------------------------------------------------------------
# Hull membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HullLocation:
    kind: str  # "interior" | "boundary" | "exterior"
    signed_depth: float  # positive inside, negative outside

    @property
    def depth(self) -> float:
        return max(self.signed_depth, 0.0)

    @property
    def distance(self) -> float:
        return max(-self.signed_depth, 0.0)


def hull_membership(locus: SampledLocus, p) -> HullLocation:
    """Locate a plane point relative to the sampled-locus hull."""
    pts2 = locus.plane_points
    hull_pts = pts2[convex_hull(pts2)]
    q2 = to_plane(_components(p))
    signed = float(_signed_depths(hull_pts, q2[None, :])[0])
    if abs(signed) <= BOUNDARY_TOL:
        kind = "boundary"
    elif signed > 0:
        kind = "interior"
    else:
        kind = "exterior"
    return HullLocation(kind, signed)


# ---------------------------------------------------------------------------
# Half-plane preimage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreimageResult:
    kind: str  # "full" | "empty" | "interval"
    index_range: tuple[int, int] | None = None
    lambda_range: tuple[float, float] | None = None
    wraps: bool = False


def half_plane_preimage(
    locus: SampledLocus,
    normal,
    offset: float,
    report: ConvexityReport | None = None,
) -> PreimageResult:
    """Wavelengths whose locus points fall in {x : <normal, x> <= offset}.

    The half-plane is given in plane coordinates.  For a convex locus the
    preimage is a single cyclic interval; anything else raises
    PreimageSplitError, which flags an upstream misclassification.
    """
    if report is None:
        report = classify_convexity(locus)
    if report.locus_class not in (LocusClass.STRICTLY_CONVEX, LocusClass.CONVEX):
        raise NotConvexError(
            f"half-plane preimage needs a convex locus, got {report.locus_class.value}"
        )
    normal = np.asarray(normal, dtype=float)
    if normal.shape != (2,) or not np.linalg.norm(normal) > 0:
        raise DegenerateLocusError("half-plane normal must be a nonzero 2-vector")
    vals = locus.plane_points @ normal
    mask = vals <= offset
    n = mask.size
    if mask.all():
        return PreimageResult("full")
    if not mask.any():
        return PreimageResult("empty")
    f0 = int(np.nonzero(~mask)[0][0])
    order = (np.arange(n) + f0 + 1) % n
    runs: list[tuple[int, int]] = []
    i = 0
    while i < n:
        if mask[order[i]]:
            j = i
            while j < n and mask[order[j]]:
                j += 1
            runs.append((int(order[i]), int(order[j - 1])))
            i = j
        else:
            i += 1
    if len(runs) != 1:
        raise PreimageSplitError(
            f"half-plane preimage splits into {len(runs)} runs on a convex locus",
            runs,
        )
    i0, i1 = runs[0]
    return PreimageResult(
        "interval",
        (i0, i1),
        (float(locus.lambdas[i0]), float(locus.lambdas[i1])),
        wraps=i0 > i1,
    )


# ---------------------------------------------------------------------------
# Torus parametrizations: gluing and constant speed
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusParam:
    """Piecewise-affine circular coordinate for (a union of) wavelength
    intervals.  ``pieces`` rows are (t0, t1, l0, l1): the glued coordinate
    [t0, t1) maps affinely onto wavelengths [l0, l1]."""

    pieces: FloatArray  # (m, 4)
    total_width: float
    segment_offsets: tuple[float, ...]

    def __post_init__(self):
        pieces = np.asarray(self.pieces, dtype=float)
        if pieces.ndim != 2 or pieces.shape[1] != 4:
            raise DegenerateLocusError("torus pieces must be (m, 4)")
        if np.any(pieces[:, 1] <= pieces[:, 0]) or np.any(pieces[:, 3] <= pieces[:, 2]):
            raise DegenerateLocusError("torus pieces must have positive width")
        pieces.setflags(write=False)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "total_width", float(self.total_width))
        object.__setattr__(self, "segment_offsets", tuple(float(o) for o in self.segment_offsets))

    @classmethod
    def identity(cls, lambda_min: float, lambda_max: float) -> "TorusParam":
        w = float(lambda_max) - float(lambda_min)
        return cls(
            np.array([[0.0, w, float(lambda_min), float(lambda_max)]]),
            w,
            (0.0,),
        )

    @classmethod
    def from_segments(cls, segments) -> "TorusParam":
        segs = [(float(a), float(b)) for a, b in segments]
        if not segs:
            raise DegenerateLocusError("need at least one segment to glue")
        for a, b in segs:
            if b <= a:
                raise DegenerateLocusError("segments must have positive width")
        for (a0, b0), (a1, b1) in zip(segs, segs[1:]):
            if a1 < b0:
                raise DegenerateLocusError("segments must be disjoint and ordered")
        widths = [b - a for a, b in segs]
        offsets = np.concatenate([[0.0], np.cumsum(widths)])
        pieces = np.array(
            [[offsets[k], offsets[k + 1], segs[k][0], segs[k][1]] for k in range(len(segs))]
        )
        return cls(pieces, float(offsets[-1]), tuple(offsets[:-1]))

    @classmethod
    def from_knots(cls, t_knots: FloatArray, lam_knots: FloatArray) -> "TorusParam":
        t = np.asarray(t_knots, dtype=float)
        lam = np.asarray(lam_knots, dtype=float)
        keep = np.concatenate([[True], np.diff(t) > 0])
        t, lam = t[keep], lam[keep]
        if t.size < 2:
            raise DegenerateLocusError("need at least two distinct knots")
        pieces = np.column_stack([t[:-1], t[1:], lam[:-1], lam[1:]])
        return cls(pieces, float(t[-1] - t[0]), (0.0,))

    @property
    def segments(self) -> tuple[tuple[float, float], ...]:
        """Wavelength intervals covered, merged across adjacent pieces."""
        out: list[tuple[float, float]] = []
        for t0, t1, l0, l1 in self.pieces:
            if out and abs(out[-1][1] - l0) <= 1e-12 * max(1.0, abs(l0)):
                out[-1] = (out[-1][0], float(l1))
            else:
                out.append((float(l0), float(l1)))
        return tuple(out)

    def from_torus(self, t) -> FloatArray:
        """Map glued coordinates (mod total width) to wavelengths."""
        t = np.asarray(t, dtype=float)
        tm = np.mod(t, self.total_width)
        k = np.clip(np.searchsorted(self.pieces[:, 0], tm, side="right") - 1, 0, len(self.pieces) - 1)
        t0, t1, l0, l1 = (self.pieces[k, i] for i in range(4))
        return l0 + (tm - t0) * (l1 - l0) / (t1 - t0)

    def to_torus(self, lams) -> FloatArray:
        """Map wavelengths to glued coordinates; NaN outside the segments."""
        lam = np.asarray(lams, dtype=float)
        out = np.full(lam.shape, np.nan)
        for t0, t1, l0, l1 in self.pieces:
            sel = (lam >= l0 - 1e-12) & (lam <= l1 + 1e-12)
            out = np.where(sel & np.isnan(out), t0 + (lam - l0) * (t1 - t0) / (l1 - l0), out)
        return out

    def to_json_dict(self) -> dict:
        return {
            "total_width": self.total_width,
            "segment_offsets": list(self.segment_offsets),
            "segments": [[a, b] for a, b in self.segments],
        }


def glue_segments(locus: SampledLocus, report: ConvexityReport) -> TorusParam:
    """Glue the report's hull arcs end to end into one circle."""
    if report.locus_class == LocusClass.NON_CONVEX:
        raise NotConvexError("cannot glue a NonConvex locus")
    return TorusParam.from_segments(report.segments)


def constant_speed_reparam(locus: SampledLocus) -> TorusParam:
    """Reparametrize so the locus is traced at uniform plane speed.

    Keeps the original total width; equal steps of the new coordinate give
    equal chord lengths along the sampled polyline.
    """
    pts2 = locus.plane_points
    chords = np.linalg.norm(np.diff(pts2, axis=0), axis=1)
    total = chords.sum()
    if total <= 0:
        raise DegenerateLocusError("locus has zero length")
    span = float(locus.lambdas[-1] - locus.lambdas[0])
    t = np.concatenate([[0.0], np.cumsum(chords)]) * (span / total)
    return TorusParam.from_knots(t, locus.lambdas)
