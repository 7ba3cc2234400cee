#!/usr/bin/env python3
"""Generate the bundled sensor fixtures (cie1931.csv, d90.csv).

The fixtures are analytic surrogates shaped like a standard-observer
chromaticity horseshoe.  They are built from a strictly decreasing tangent
angle phi(lambda) and a positive speed v(lambda), both PCHIP interpolants
through hand-tuned knots, integrated into a plane curve.  This construction
certifies properties that digitized instrument tables cannot:

* every native sample is a strict hull vertex (tangent angle strictly
  monotone, so sampled chord directions are strictly monotone too);
* the white point of the uniform reference is exactly (1/3, 1/3, 1/3)
  (channel areas are equalized by a positive linear-in-chromaticity
  reweighting of the total response);
* curvature * speed^2 stays small enough that peaked-model moments can
  approach the hull boundary closer than any interior coverage target
  (Laplace pull ~ kappa*v^2 / (8*pi^2*a));
* locus endpoints move slowly, keeping seam mixtures near the closing
  chord.

The d90 variant adds a smooth inward dent, producing a two-arc
piecewise-convex locus with a hull-bridge pocket for gluing tests.

Run from the repo root:  python3 tools/make_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from chromalocus.geometry import (  # noqa: E402
    LocusClass,
    _signed_depths,
    classify_convexity,
    convex_hull,
    sample_locus,
    to_plane,
)
from chromalocus.sensor import Density, load_sensor, white_point  # noqa: E402

LAM_MIN, LAM_MAX, STEP = 400.0, 700.0, 1.0
N_SAMPLES = 301
A_MAX = 500.0
SIGMA_TAU = 1.0 / (2.0 * np.pi * np.sqrt(A_MAX))  # peak width at the amplitude cap

# tangent angle knots (nm, degrees); strictly decreasing values
PHI_KNOTS = [
    (400.0, 140.0),
    (410.0, 135.0),
    (420.0, 128.0),
    (430.0, 119.0),
    (440.0, 108.0),
    (460.0, 103.0),
    (490.0, 99.0),
    (520.0, 96.0),
    (545.0, 94.0),
    (552.0, 93.6),
    (558.0, 88.0),
    (566.0, 62.0),
    (574.0, 28.0),
    (582.0, -6.0),
    (590.0, -26.0),
    (598.0, -36.5),
    (610.0, -37.6),
    (640.0, -39.6),
    (670.0, -41.6),
    (688.0, -42.6),
    (700.0, -43.6),
]

# speed knots (nm, xy-units per nm); slow at endpoints and through corners
V_KNOTS = [
    (400.0, 2.5e-5),
    (406.0, 8.0e-5),
    (414.0, 2.6e-4),
    (424.0, 5.0e-4),
    (435.0, 7.5e-4),
    (448.0, 1.9e-3),
    (462.0, 5.0e-3),
    (478.0, 8.0e-3),
    (500.0, 9.0e-3),
    (522.0, 9.0e-3),
    (538.0, 7.5e-3),
    (548.0, 4.8e-3),
    (556.0, 8.0e-4),
    (564.0, 2.6e-4),
    (574.0, 2.0e-4),
    (584.0, 2.8e-4),
    (592.0, 3.8e-4),
    (596.0, 7.5e-4),
    (600.0, 4.0e-3),
    (610.0, 8.5e-3),
    (620.0, 1.12e-2),
    (660.0, 1.12e-2),
    (670.0, 1.0e-2),
    (680.0, 5.8e-3),
    (688.0, 2.0e-3),
    (693.0, 5.0e-4),
    (697.0, 8.0e-5),
    (700.0, 2.5e-5),
]

START_XY = np.array([0.1731, 0.0048])

DENT_LO, DENT_HI, DENT_DEPTH = 430.0, 490.0, 0.10

SUBDIV = 20  # Simpson subintervals per 1 nm step

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "chromalocus" / "data"


def build_xy_curve(offset: np.ndarray | None = None) -> np.ndarray:
    """Integrate the tangent-angle/speed design into 1 nm xy samples."""
    lams, phis = map(np.array, zip(*PHI_KNOTS))
    assert np.all(np.diff(phis) < 0), "phi knots must strictly decrease"
    phi_f = PchipInterpolator(lams, np.deg2rad(phis))
    lv, vv = map(np.array, zip(*V_KNOTS))
    v_f = PchipInterpolator(lv, np.log(vv))

    fine = np.linspace(LAM_MIN, LAM_MAX, (N_SAMPLES - 1) * SUBDIV + 1)
    vel = np.exp(v_f(fine))[:, None] * np.column_stack(
        [np.cos(phi_f(fine)), np.sin(phi_f(fine))]
    )
    # composite Simpson per 1 nm step; positive weights keep each chord
    # direction strictly inside its tangent-angle cone
    w = np.ones(SUBDIV + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= (STEP / SUBDIV) / 3.0
    seg = vel[: (N_SAMPLES - 1) * SUBDIV].reshape(N_SAMPLES - 1, SUBDIV, 2)
    seg = np.concatenate([seg, vel[SUBDIV::SUBDIV][:, None, :]], axis=1)
    steps = np.einsum("s,ksd->kd", w, seg)
    start = START_XY if offset is None else START_XY + offset
    xy = np.empty((N_SAMPLES, 2))
    xy[0] = start
    np.cumsum(steps, axis=0, out=xy[1:])
    xy[1:] += start
    return xy


def apply_dent(xy: np.ndarray) -> np.ndarray:
    lams = np.linspace(LAM_MIN, LAM_MAX, N_SAMPLES)
    prof = np.zeros(N_SAMPLES)
    inside = (lams >= DENT_LO) & (lams <= DENT_HI)
    prof[inside] = DENT_DEPTH * np.sin(
        np.pi * (lams[inside] - DENT_LO) / (DENT_HI - DENT_LO)
    ) ** 2
    white = np.array([1.0 / 3.0, 1.0 / 3.0])
    return xy + prof[:, None] * (white - xy)


def equalized_channels(xy: np.ndarray) -> np.ndarray:
    """chi = w * eta with w > 0 chosen so all three channel areas equal 1.

    The total response w multiplies eta pointwise, so it cannot change the
    chromaticity track, only the balance.  A multiplicative correction
    exp(u*g1 + v*g2) keeps w positive no matter how far Newton has to move.
    """
    lams = np.linspace(LAM_MIN, LAM_MAX, N_SAMPLES)
    eta = np.column_stack([xy[:, 0], xy[:, 1], 1.0 - xy.sum(axis=1)])
    assert eta.min() > 1e-3, f"locus leaves the simplex margin: {eta.min()}"
    w0 = (
        0.02
        + 0.9 * np.exp(-(((lams - 460.0) / 50.0) ** 2))
        + 0.7 * np.exp(-(((lams - 555.0) / 50.0) ** 2))
        + 1.6 * np.exp(-(((lams - 640.0) / 50.0) ** 2))
    )
    g1 = np.exp(-(((lams - 555.0) / 55.0) ** 2))  # steers the middle channel
    g2 = np.exp(-(((lams - 645.0) / 50.0) ** 2))  # steers long vs short
    wts = np.full(N_SAMPLES, STEP)
    wts[0] = wts[-1] = STEP / 2.0

    uv = np.zeros(2)
    for _ in range(60):
        w = w0 * np.exp(uv[0] * g1 + uv[1] * g2)
        areas = np.einsum("k,k,ki->i", wts, w, eta)
        r = np.array([np.log(areas[1] / areas[2]), np.log(areas[0] / areas[2])])
        if np.abs(r).max() < 1e-15:
            break
        dAdu = np.einsum("k,k,k,ki->i", wts, w, g1, eta)
        dAdv = np.einsum("k,k,k,ki->i", wts, w, g2, eta)
        J = np.empty((2, 2))
        for col, dA in enumerate((dAdu, dAdv)):
            J[0, col] = dA[1] / areas[1] - dA[2] / areas[2]
            J[1, col] = dA[0] / areas[0] - dA[2] / areas[2]
        uv -= np.linalg.solve(J, r)
    else:
        raise AssertionError(f"area equalizer stalled, residual {r}")
    assert np.abs(uv).max() < 6.0, f"equalizer correction too violent: {uv}"
    w = w0 * np.exp(uv[0] * g1 + uv[1] * g2)
    w /= np.einsum("k,k,ki->i", wts, w, eta).mean()
    return (w[:, None] * eta).T


def write_csv(path: Path, channels: np.ndarray) -> None:
    lams = np.linspace(LAM_MIN, LAM_MAX, N_SAMPLES)
    lines = ["wavelength,x,y,z"]
    for k in range(N_SAMPLES):
        vals = ",".join("%.17g" % c for c in channels[:, k])
        lines.append("%.17g,%s" % (lams[k], vals))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def simplex_lattice(res: int) -> np.ndarray:
    pts = [
        (i / res, j / res, (res - i - j) / res)
        for i in range(res + 1)
        for j in range(res + 1 - i)
    ]
    return np.array(pts)


def geometry_report(path: Path) -> dict:
    """Certify the generated fixture; returns the metrics it checked."""
    sensor = load_sensor(path)
    locus = sample_locus(sensor, sensor.grid.n)
    report = classify_convexity(locus)
    pts = locus.plane_points
    hull = pts[convex_hull(pts)]

    white = white_point(sensor, Density.uniform(sensor.grid)).components
    assert np.max(np.abs(white - 1.0 / 3.0)) < 1e-12, f"white point {white}"

    # discrete curvature*speed^2 on the glued coordinate tau in [0,1);
    # only hull-contact samples matter: near-boundary solutions peak there,
    # never inside a concave pocket, so off-hull curvature spikes are inert
    chords = np.diff(pts, axis=0)
    ell = np.hypot(chords[:, 0], chords[:, 1])
    ang = np.arctan2(chords[:, 1], chords[:, 0])
    turns = np.abs(np.angle(np.exp(1j * np.diff(ang))))
    dtau = 1.0 / (N_SAMPLES - 1)
    kv2 = turns * 0.5 * (ell[:-1] + ell[1:]) / dtau**2
    on_hull = _signed_depths(hull, pts) < 1e-6
    kv2_hull = kv2[on_hull[:-2] & on_hull[1:-1] & on_hull[2:]]
    pull = kv2_hull.max() / (8.0 * np.pi**2 * A_MAX * 0.9)

    # first-order offset of seam mixtures from a closing chord (i, j)
    def seam_of(i: int, j: int) -> float:
        chord = pts[j] - pts[i]
        psi = np.arctan2(chord[1], chord[0])
        t_i = ang[i - 1] if i > 0 else ang[0]
        t_j = ang[j] if j < len(ang) else ang[-1]
        off = abs(np.sin(t_i - psi)) * ell[min(i, len(ell) - 1)]
        off += abs(np.sin(t_j - psi)) * ell[min(j, len(ell) - 1)]
        return 0.4 * off / dtau * SIGMA_TAU

    # chord features: the wrap seam, plus one bridge per off-hull gap
    onh = np.flatnonzero(on_hull)
    chord_feats = [(N_SAMPLES - 1, 0)]
    for g in np.flatnonzero(np.diff(onh) > 1):
        chord_feats.append((int(onh[g]), int(onh[g + 1])))
    seam = seam_of(N_SAMPLES - 1, 0)

    # local Laplace pull per sample, window-maxed to be conservative
    kv2_pad = np.full(N_SAMPLES, np.nan)
    kv2_pad[1:-1] = np.where(on_hull[:-2] & on_hull[1:-1] & on_hull[2:], kv2, np.nan)
    loc = np.array(
        [np.nanmax(kv2_pad[max(0, i - 3) : i + 4], initial=0.0) for i in range(N_SAMPLES)]
    )
    pull_s = loc / (8.0 * np.pi**2 * A_MAX * 0.9)

    def seg_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
        d = b - a
        t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
        return float(np.hypot(*(p - a - t * d)))

    # every kept lattice node must clear the floor of whatever boundary
    # feature it actually sits against, else it is an impossible target
    worst = np.inf
    for res in (16, 32, 64):
        nodes = to_plane(simplex_lattice(res))
        depths = _signed_depths(hull, nodes)
        kept = depths > 1e-4
        worst = min(worst, depths[kept].min())
        for node, dep in zip(nodes[kept & (depths < 1.5e-3)], depths[kept & (depths < 1.5e-3)]):
            d_arc = np.hypot(*(pts[on_hull] - node).T)
            feats = [(float(d_arc.min()), 2.0 * pull_s[onh[d_arc.argmin()]])]
            for i, j in chord_feats:
                feats.append((seg_dist(node, pts[i], pts[j]), 2.5 * seam_of(i, j)))
            dmin = min(d for d, _ in feats)
            floor = max([1.3e-4] + [f for d, f in feats if d <= 2.0 * dmin + 1e-12])
            assert dep >= floor, (
                f"res {res}: node at depth {dep:.3g} inside the dead zone "
                f"(local floor {floor:.3g})"
            )

    return {
        "class": report.locus_class,
        "segments": report.segments,
        "max_kv2": float(kv2_hull.max()),
        "pull@a_max": float(pull),
        "seam_offset": float(seam),
        "min_kept_depth": float(worst),
        "hull_vertices": len(hull),
        "apex_y": float(locus.points[:, 1].max()),
        "end_x": float(locus.points[-1, 0]),
        "hull_pts": hull,
        "locus_pts": pts,
    }


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    # lattice nodes falling a hair above the depth filter would make coverage
    # targets the solver cannot honestly reach; nudge the whole curve by a
    # golden-angle spiral of sub-milliunit offsets until none do
    golden = np.pi * (3.0 - np.sqrt(5.0))
    info = dinfo = None
    for k in range(120):
        r = min(4e-4 * np.sqrt(k), 2.2e-3)
        off = r * np.array([np.cos(k * golden), np.sin(k * golden)])
        xy = build_xy_curve(off)
        try:
            write_csv(OUT_DIR / "cie1931.csv", equalized_channels(xy))
            info = geometry_report(OUT_DIR / "cie1931.csv")
            write_csv(OUT_DIR / "d90.csv", equalized_channels(apply_dent(xy)))
            dinfo = geometry_report(OUT_DIR / "d90.csv")
            n_pocket, n_shallow = pocket_node_counts(dinfo)
            break
        except AssertionError as exc:
            if "dead zone" not in str(exc) and "pocket" not in str(exc):
                raise
            print(f"offset {k}: {exc}; retrying")
    assert dinfo is not None, "no workable curve offset found"

    # --- strictly convex fixture -----------------------------------------
    assert info["class"] is LocusClass.STRICTLY_CONVEX, info["class"]
    assert info["max_kv2"] <= 3.0, info["max_kv2"]
    assert info["seam_offset"] <= 6e-5, info["seam_offset"]
    assert info["apex_y"] > 0.75 and info["end_x"] > 0.65, (
        info["apex_y"],
        info["end_x"],
    )
    print(f"cie1931.csv  offset={off}")
    for k, v in info.items():
        if not isinstance(v, np.ndarray):
            print(f"  {k}: {v}")

    # --- piecewise-convex variant -----------------------------------------
    assert dinfo["class"] is LocusClass.PIECEWISE_CONVEX, dinfo["class"]
    print("d90.csv")
    for k, v in dinfo.items():
        if not isinstance(v, np.ndarray):
            print(f"  {k}: {v}")
    print(f"  pocket nodes: {n_pocket} (within 2e-3 of bridge: {n_shallow})")


def pocket_node_counts(dinfo: dict) -> tuple[int, int]:
    """Check the dent cut two convex pieces and left lattice nodes in the
    pocket between the hull bridge and the curve, some close to the bridge."""
    assert len(dinfo["segments"]) == 2, dinfo["segments"]
    (s0a, s0b), (s1a, s1b) = dinfo["segments"]
    assert s0a == LAM_MIN and s1b == LAM_MAX
    # concavity starts/ends strictly inside the dent support
    assert DENT_LO - 12 < s0b < DENT_LO + 6 and DENT_HI - 8 < s1a < DENT_HI + 12

    pts = dinfo["locus_pts"]
    b0 = pts[int(round((s0b - LAM_MIN) / STEP))]
    b1 = pts[int(round((s1a - LAM_MIN) / STEP))]
    nodes = to_plane(simplex_lattice(64))
    depths = _signed_depths(dinfo["hull_pts"], nodes)
    rel = nodes - b0
    t = (rel @ (b1 - b0)) / np.dot(b1 - b0, b1 - b0)
    dist_bridge = np.abs(np.cross(rel, b1 - b0)) / np.linalg.norm(b1 - b0)
    near = (depths > 1e-4) & (t > 0.05) & (t < 0.95)
    n_pocket = int(np.count_nonzero(near & (dist_bridge < 0.02)))
    n_shallow = int(np.count_nonzero(near & (dist_bridge < 2e-3)))
    assert n_pocket >= 5, f"only {n_pocket} pocket nodes"
    assert n_shallow >= 2, f"only {n_shallow} shallow pocket nodes"
    return n_pocket, n_shallow


if __name__ == "__main__":
    main()
