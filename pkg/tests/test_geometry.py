"""Locus sampling, convexity classification, hull queries, reparametrization."""

import numpy as np
import pytest
import shapely.geometry as sg

from chromalocus import (
    Density,
    DegenerateLocusError,
    LiftAmbiguousError,
    NotConvexError,
    PreimageSplitError,
)
from chromalocus.geometry import (
    ConvexityReport,
    LocusClass,
    SampledLocus,
    TorusParam,
    classify_convexity,
    constant_speed_reparam,
    convex_hull,
    from_plane,
    glue_segments,
    half_plane_preimage,
    hull_membership,
    sample_locus,
    to_plane,
    unwrap_angles,
    winding_number,
)
from chromalocus.sensor import normalized_response, white_point

from conftest import uniform_ref


def circle_locus(n=200, r=0.25, turns=1.0, center=(0.0, 0.0)):
    th = np.linspace(0.0, turns * 2.0 * np.pi, n, endpoint=False)
    xy = np.column_stack([r * np.cos(th), r * np.sin(th)]) + np.asarray(center)
    return SampledLocus(np.linspace(0.0, 1.0, n), from_plane(xy))


def monotone_lift(lift: np.ndarray) -> bool:
    d = np.diff(lift)
    return bool(np.all(d > 0) or np.all(d < 0))


# -- plane embedding -----------------------------------------------------------

def test_plane_roundtrip():
    rng = np.random.default_rng(3)
    xy = rng.normal(size=(20, 2))
    back = to_plane(from_plane(xy))
    assert np.allclose(back, xy, atol=1e-14)
    assert np.allclose(from_plane(xy).sum(axis=1), 1.0, atol=1e-12)


def test_to_plane_rejects_wrong_dimension():
    with pytest.raises(DegenerateLocusError):
        to_plane(np.array([0.5, 0.5]))


# -- sampling -------------------------------------------------------------------

def test_sample_locus_needs_enough_points(cie):
    with pytest.raises(DegenerateLocusError):
        sample_locus(cie, 10)


def test_sample_locus_native_grid_is_exact(cie):
    loc = sample_locus(cie, cie.grid.n)
    assert np.array_equal(loc.lambdas, cie.grid.samples)
    for k in (0, 150, 300):
        eta = normalized_response(cie, loc.lambdas[k])
        assert np.allclose(loc.points[k], eta.components, atol=1e-12)


def test_sample_locus_interpolates(cie):
    loc = sample_locus(cie, 97)
    assert loc.n == 97
    assert np.allclose(loc.points.sum(axis=1), 1.0, atol=1e-12)


def test_sampled_locus_shape_mismatch():
    with pytest.raises(DegenerateLocusError):
        SampledLocus(np.linspace(0, 1, 100), np.ones((99, 3)) / 3.0)


# -- hull and winding primitives -------------------------------------------------

def test_convex_hull_square_with_interior_points():
    pts = np.array([[0.0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5], [0.2, 0.7]])
    idx = convex_hull(pts)
    assert sorted(idx.tolist()) == [0, 1, 2, 3]


def test_unwrap_angles_circle_full_turn(wheel):
    loc = sample_locus(wheel, wheel.grid.n)
    w = white_point(wheel, uniform_ref(wheel))
    lift = unwrap_angles(w, loc)
    # first and last sample coincide, so the lift closes a full turn
    assert abs(abs(lift[-1] - lift[0]) - 2.0 * np.pi) < 1e-9
    assert monotone_lift(lift)


def test_unwrap_angles_open_curve(cie):
    loc = sample_locus(cie, cie.grid.n)
    w = white_point(cie, uniform_ref(cie))
    lift = unwrap_angles(w, loc)
    assert monotone_lift(lift)
    assert abs(lift[-1] - lift[0]) < 2.0 * np.pi


def test_unwrap_angles_rejects_center_on_curve(cie):
    loc = sample_locus(cie, cie.grid.n)
    with pytest.raises(LiftAmbiguousError):
        unwrap_angles(loc.points[100], loc)


def test_unwrap_angles_rejects_exterior_center(cie):
    loc = sample_locus(cie, cie.grid.n)
    with pytest.raises(LiftAmbiguousError):
        unwrap_angles(np.array([2.0, -0.5, -0.5]), loc)


def test_figure_eight_lift_not_monotone():
    u = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    xy = np.column_stack([np.sin(u), 0.8 * np.sin(u) * np.cos(u)]) + np.array([0.4, 0.0])
    lift = unwrap_angles(from_plane(np.array([[0.0, 0.0]]))[0], from_plane(xy))
    assert not monotone_lift(lift)


def test_winding_number_triangle():
    tri = from_plane(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
    inside = from_plane(np.array([[0.05, 0.05]]))[0]
    outside = from_plane(np.array([[5.0, 5.0]]))[0]
    assert winding_number(tri, inside) == 1
    assert winding_number(tri[::-1], inside) == -1
    assert winding_number(tri, outside) == 0


def test_winding_number_rejects_point_on_curve():
    tri = from_plane(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
    with pytest.raises(LiftAmbiguousError):
        winding_number(tri, tri[0])


def test_winding_number_locus_loop_around_white(cie):
    # locus plus the closing chord winds once around the white point
    loc = sample_locus(cie, cie.grid.n)
    w = white_point(cie, uniform_ref(cie))
    assert abs(winding_number(loc.points, w)) == 1


# -- classification ---------------------------------------------------------------

def test_classify_cie_strictly_convex(cie):
    rep = classify_convexity(sample_locus(cie, cie.grid.n))
    assert rep.locus_class is LocusClass.STRICTLY_CONVEX
    assert rep.segments == ((400.0, 700.0),)
    assert rep.witness is None
    assert rep.max_interior_deviation <= 1e-7


def test_classify_wheel_strictly_convex(wheel):
    rep = classify_convexity(sample_locus(wheel, wheel.grid.n))
    assert rep.locus_class is LocusClass.STRICTLY_CONVEX


def test_classify_chord_run_is_convex():
    # circle arc with one straightened stretch: hull ties, no strict advance
    loc = circle_locus(200, turns=0.75)
    pts = loc.plane_points.copy()
    frac = np.linspace(0, 1, 31)[:, None]
    pts[80:111] = pts[80] * (1 - frac) + pts[110] * frac
    flat = SampledLocus(loc.lambdas, from_plane(pts))
    assert classify_convexity(flat).locus_class is LocusClass.CONVEX


def test_classify_d90_piecewise(d90):
    rep = classify_convexity(sample_locus(d90, d90.grid.n))
    assert rep.locus_class is LocusClass.PIECEWISE_CONVEX
    assert len(rep.segments) == 2
    (a0, a1), (b0, b1) = rep.segments
    assert a0 == 400.0 and b1 == 700.0
    assert 420.0 < a1 < 470.0 < b0 < 500.0
    assert rep.max_interior_deviation > 1e-4


def test_classify_figure_eight_nonconvex():
    u = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    xy = np.column_stack([np.sin(u), 0.8 * np.sin(u) * np.cos(u)]) + np.array([0.4, 0.0])
    rep = classify_convexity(SampledLocus(np.linspace(0, 1, 200), from_plane(xy)))
    assert rep.locus_class is LocusClass.NON_CONVEX
    assert rep.witness is not None


def test_convexity_report_json(cie):
    rep = classify_convexity(sample_locus(cie, cie.grid.n))
    d = rep.to_json_dict()
    assert d["class"] == "StrictlyConvex"
    assert d["segments"] == [[400.0, 700.0]]
    assert d["witness"] is None


# -- hull membership ---------------------------------------------------------------

def test_hull_membership_kinds(cie):
    loc = sample_locus(cie, cie.grid.n)
    w = white_point(cie, uniform_ref(cie))
    assert hull_membership(loc, w).kind == "interior"
    assert hull_membership(loc, w).depth > 0.01

    on = hull_membership(loc, normalized_response(cie, 550.0))
    assert on.kind == "boundary"
    assert on.distance <= 1e-12

    mid = 0.5 * (loc.points[0] + loc.points[-1])
    out = w.components + 1.05 * (mid - w.components)
    ext = hull_membership(loc, out)
    assert ext.kind == "exterior"
    assert ext.distance > 0.005


def test_hull_membership_pocket_point_is_interior(d90):
    # points inside the concave pocket are inside the hull (bridged by a chord)
    loc = sample_locus(d90, d90.grid.n)
    pocket = normalized_response(d90, 455.0)
    assert hull_membership(loc, pocket).kind == "interior"


# -- half-plane preimages -------------------------------------------------------------

def test_half_plane_preimage_full_and_empty(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    nrm = np.array([0.3, 1.0])
    vals = loc.plane_points @ nrm
    assert half_plane_preimage(loc, nrm, vals.max() + 1.0, rep).kind == "full"
    assert half_plane_preimage(loc, nrm, vals.min() - 1.0, rep).kind == "empty"


def test_half_plane_preimage_supporting_line(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    nrm = np.array([0.3, 1.0])
    vals = loc.plane_points @ nrm
    k = int(vals.argmax())
    res = half_plane_preimage(loc, -nrm, float(-vals.max()), rep)
    assert res.kind == "interval"
    assert res.index_range == (k, k)


def test_half_plane_preimage_chord(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    pts = loc.plane_points
    i, j = 60, 130
    e = pts[j] - pts[i]
    nrm = np.array([e[1], -e[0]])
    # keep the arc side, not the side holding the centroid
    if (pts.mean(axis=0) - pts[i]) @ nrm < 0:
        nrm = -nrm
    res = half_plane_preimage(loc, nrm, float(pts[i] @ nrm) + 1e-10, rep)
    assert res.kind == "interval"
    assert res.index_range == (i, j)
    assert res.lambda_range == (float(loc.lambdas[i]), float(loc.lambdas[j]))
    assert not res.wraps


def test_half_plane_preimage_wrapping_complement(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    pts = loc.plane_points
    i, j = 60, 130
    e = pts[j] - pts[i]
    nrm = np.array([e[1], -e[0]])
    # keep the centroid side: the preimage is the complement arc and wraps
    if (pts.mean(axis=0) - pts[i]) @ nrm > 0:
        nrm = -nrm
    res = half_plane_preimage(loc, nrm, float(pts[i] @ nrm) + 1e-10, rep)
    assert res.kind == "interval"
    assert res.wraps
    assert res.index_range == (j, i)


def test_half_plane_preimage_rejects_piecewise(d90):
    loc = sample_locus(d90, d90.grid.n)
    with pytest.raises(NotConvexError):
        half_plane_preimage(loc, np.array([1.0, 0.0]), 0.0)


def test_half_plane_preimage_split_detection(d90):
    # a report that wrongly claims convexity gets caught by the run count
    loc = sample_locus(d90, d90.grid.n)
    honest = classify_convexity(loc)
    lying = ConvexityReport(
        LocusClass.CONVEX, honest.segments, honest.purple_segments, None,
        honest.max_interior_deviation,
    )
    pts = loc.plane_points
    i = int(np.searchsorted(loc.lambdas, honest.segments[0][1]))
    j = int(np.searchsorted(loc.lambdas, honest.segments[1][0]))
    e = pts[j] - pts[i]
    nrm = np.array([e[1], -e[0]])
    if (pts.mean(axis=0) - pts[i]) @ nrm > 0:
        nrm = -nrm
    with pytest.raises(PreimageSplitError) as err:
        half_plane_preimage(loc, nrm, float(pts[i] @ nrm) - 1e-5, lying)
    assert len(err.value.runs) >= 2


def test_half_plane_preimage_bad_normal(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    with pytest.raises(DegenerateLocusError):
        half_plane_preimage(loc, np.zeros(2), 0.0, rep)


# -- torus parametrizations ------------------------------------------------------------

def test_torus_identity_roundtrip():
    par = TorusParam.identity(400.0, 700.0)
    assert par.total_width == 300.0
    lams = np.linspace(400.0, 700.0, 11)[:-1]
    assert np.allclose(par.from_torus(par.to_torus(lams)), lams, atol=1e-12)
    # the right endpoint is the seam: it wraps back to the left end
    assert par.from_torus(par.to_torus(np.array([700.0]))[0]) == pytest.approx(400.0)


def test_torus_from_segments():
    par = TorusParam.from_segments([(0.0, 0.3), (0.6, 1.0)])
    assert par.total_width == pytest.approx(0.7)
    assert par.to_torus(np.array([0.65]))[0] == pytest.approx(0.35)
    assert par.from_torus(0.35) == pytest.approx(0.65)
    assert np.isnan(par.to_torus(np.array([0.45]))[0])


def test_torus_merges_adjacent_segments():
    par = TorusParam.from_segments([(0.0, 0.3), (0.3, 1.0)])
    assert par.segments == ((0.0, 1.0),)


def test_torus_rejects_bad_segments():
    with pytest.raises(Exception):
        TorusParam.from_segments([(0.5, 0.2)])
    with pytest.raises(Exception):
        TorusParam.from_segments([(0.0, 0.6), (0.4, 1.0)])


def test_torus_json_dict():
    par = TorusParam.from_segments([(0.0, 0.3), (0.6, 1.0)])
    d = par.to_json_dict()
    assert d["total_width"] == pytest.approx(0.7)
    assert d["segments"] == [[0.0, 0.3], [0.6, 1.0]]


def test_glue_segments_d90(d90):
    loc = sample_locus(d90, d90.grid.n)
    rep = classify_convexity(loc)
    glue = glue_segments(loc, rep)
    assert glue.total_width == pytest.approx(
        sum(b - a for a, b in rep.segments))
    assert glue.segments == rep.segments


def test_glue_segments_rejects_nonconvex():
    u = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    xy = np.column_stack([np.sin(u), 0.8 * np.sin(u) * np.cos(u)]) + np.array([0.4, 0.0])
    loc = SampledLocus(np.linspace(0, 1, 200), from_plane(xy))
    rep = classify_convexity(loc)
    with pytest.raises(NotConvexError):
        glue_segments(loc, rep)


def test_glue_identity_on_convex(cie):
    loc = sample_locus(cie, cie.grid.n)
    rep = classify_convexity(loc)
    glue = glue_segments(loc, rep)
    assert glue.segments == ((400.0, 700.0),)
    assert glue.total_width == 300.0


# -- constant speed ------------------------------------------------------------------

def test_constant_speed_identity_on_wheel(wheel):
    # the wheel locus is already traced at uniform speed
    loc = sample_locus(wheel, wheel.grid.n)
    par = constant_speed_reparam(loc)
    assert par.total_width == pytest.approx(1.0)
    t = np.linspace(0.0, 1.0, 50, endpoint=False)
    assert np.allclose(par.from_torus(t), t, atol=1e-9)


def test_constant_speed_equalizes_chords():
    # circle swept as theta = 2*pi*u^2: badly nonuniform before, even after
    n = 400
    u = np.linspace(0.05, 1.0, n)
    th = 2.0 * np.pi * u**2 * 0.9
    xy = np.column_stack([np.cos(th), np.sin(th)])
    loc = SampledLocus(u, from_plane(xy))
    par = constant_speed_reparam(loc)
    t_new = np.linspace(0.0, par.total_width, 200, endpoint=False)
    lam_new = par.from_torus(t_new)
    pts = np.column_stack([
        np.interp(lam_new, u, xy[:, 0]), np.interp(lam_new, u, xy[:, 1])])
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    before = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    assert before.max() / before.min() > 5.0
    assert chords.max() / chords.min() < 1.1


def test_constant_speed_preserves_class(cie):
    loc = sample_locus(cie, cie.grid.n)
    par = constant_speed_reparam(loc)
    lam_new = par.from_torus(np.linspace(0.0, par.total_width, loc.n, endpoint=True)[:-1])
    pts = np.column_stack([
        np.interp(lam_new, loc.lambdas, loc.points[:, i]) for i in range(3)])
    rep = classify_convexity(SampledLocus(lam_new, pts))
    assert rep.locus_class in (LocusClass.STRICTLY_CONVEX, LocusClass.CONVEX)


# -- sub-arc hulls (independent geometry route) -----------------------------------------

def test_subarc_hull_touches_curve_only_on_subarc(cie):
    loc = sample_locus(cie, cie.grid.n)
    sel = (loc.lambdas >= 500.0) & (loc.lambdas <= 560.0)
    arc = loc.plane_points[sel]
    poly = sg.MultiPoint(arc.tolist()).convex_hull
    for k in range(loc.n):
        p = sg.Point(loc.plane_points[k])
        if sel[k]:
            assert poly.exterior.distance(p) < 1e-9
        else:
            assert not poly.covers(p)
            assert poly.distance(p) > 1e-9
