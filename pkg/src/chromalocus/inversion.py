"""Inverse solvers: chromaticity targets to spectral-model parameters.

Every peaked-family solve runs the same two-phase continuation.  The
forward maps are periodic in the peak position and send the flat density
(zero amplitude, or a full-circle window) exactly to the white point, so a
target's angle around white pins down the peak position and its radial
fraction pins down the amplitude; damped Newton in chromaticity-plane
coordinates then polishes both.  When Newton stalls, coarse grid sweeps
restart it from the best cell found.

Amplitudes are capped (default 500): beyond that the peaked densities
concentrate below any realistic wavelength grid, and targets that close to
the triangle boundary are reported as boundary cases instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import (
    BoundaryTargetError,
    ExteriorTargetError,
    NoConvergenceError,
    ResolutionExceededError,
    SensorDataError,
)
from .geometry import (
    TorusParam,
    _signed_depths,
    convex_hull,
    sample_locus,
    to_plane,
)
from .models import (
    GeneralizedPeakParams,
    LogLinearParams,
    ModelParams,
    PeriodicShape,
    StepParams,
    VonMisesParams,
)
from .scene import Scene
from .sensor import Chromaticity, Color, Density, Sensor

FloatArray = NDArray[np.floating]

A_MAX_DEFAULT = 500.0
BOUNDARY_DEPTH = 1e-6   # hull depth below which a target counts as boundary
EXTERIOR_TOL = 1e-9     # depth below -this counts as exterior
DELTA_FLOOR = 1e-6      # narrowest step window the solver will request

_FD_SIGMA = 1e-5        # finite-difference step in the circular coordinate
_FD_AMP_REL = 1e-3      # relative finite-difference step in amplitude


def _chroma_vec(value) -> FloatArray:
    comp = getattr(value, "components", value)
    return np.asarray(comp, dtype=float)


# ---------------------------------------------------------------------------
# Targets and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InversionTarget:
    """A chromaticity to hit, with the residual bound to hit it at."""

    chroma: Chromaticity
    tolerance: float = 1e-8
    max_iterations: int = 200

    def __post_init__(self):
        if not isinstance(self.chroma, Chromaticity):
            object.__setattr__(self, "chroma", Chromaticity(_chroma_vec(self.chroma)))
        if not self.tolerance > 0:
            raise SensorDataError("tolerance must be positive")
        if self.max_iterations < 1:
            raise SensorDataError("max_iterations must be at least 1")


@dataclass(frozen=True)
class InversionResult:
    params: ModelParams
    residual: float          # l1 distance between achieved and target vectors
    iterations: int
    path: tuple[dict, ...] = ()


# ---------------------------------------------------------------------------
# Generic continuation engine
# ---------------------------------------------------------------------------

class ProbeTable:
    """Cached forward sweep used to initialize solves.

    Rows are amplitude levels (amp_max halved repeatedly), columns a uniform
    circle of peak positions.  The nearest tabulated image point to a target
    is a reliable Newton starting cell anywhere in the triangle.
    """

    def __init__(self, forward, amp_max: float, n_sigma: int = 256, amps=None):
        self.forward = forward
        self.amp_max = float(amp_max)
        self.sigmas = (np.arange(n_sigma) + 0.5) / n_sigma
        if amps is None:
            amps = self.amp_max * 0.5 ** np.arange(13)
        self.amps = np.asarray(amps, dtype=float)
        self._points: FloatArray | None = None

    def _table(self) -> FloatArray:
        if self._points is None:
            pts = np.empty((self.amps.size, self.sigmas.size, 2))
            for i, a in enumerate(self.amps):
                for j, s in enumerate(self.sigmas):
                    pts[i, j] = to_plane(_chroma_vec(self.forward(s, a)))
            self._points = pts
        return self._points

    def init_guess(self, target2: FloatArray) -> tuple[float, float]:
        pts = self._table()
        d2 = np.sum((pts - target2) ** 2, axis=2)
        i, j = np.unravel_index(int(d2.argmin()), d2.shape)
        return float(self.sigmas[j]), float(self.amps[i])


def _solve_2x2(J: FloatArray, rhs: FloatArray) -> FloatArray | None:
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    scale = np.abs(J).max()
    if not np.isfinite(det) or scale == 0 or abs(det) < 1e-14 * scale * scale:
        return None
    return np.array(
        [
            (J[1, 1] * rhs[0] - J[0, 1] * rhs[1]) / det,
            (J[0, 0] * rhs[1] - J[1, 0] * rhs[0]) / det,
        ]
    )


def continuation_solve(
    forward,
    target: InversionTarget,
    *,
    amp_max: float = A_MAX_DEFAULT,
    probe: ProbeTable | None = None,
    init: tuple[float, float] | None = None,
    keep_trace: bool = False,
) -> tuple[float, float]:
    """Solve forward(s, amp) = target.chroma for (s, amp).

    ``forward`` maps a circular peak position s in [0, 1) and an amplitude
    in [0, amp_max] to a chromaticity, must be continuous and periodic in
    s, and must send amplitude 0 to the white point regardless of s.

    Returns the parameter pair; raises NoConvergenceError (with the
    continuation trace attached) if the iteration budget runs out.
    """
    s, amp, _, _, _ = _continuation(
        forward, target, amp_max=amp_max, probe=probe, init=init, keep_trace=keep_trace
    )
    return s, amp


def _continuation(
    forward,
    target: InversionTarget,
    *,
    amp_max: float,
    probe: ProbeTable | None,
    init: tuple[float, float] | None,
    keep_trace: bool,
) -> tuple[float, float, float, int, tuple[dict, ...]]:
    t3 = target.chroma.components
    t2 = to_plane(t3)
    tol = target.tolerance
    budget = target.max_iterations
    trace: list[dict] = []

    def note(phase: str, s: float, a: float, r: float) -> None:
        if keep_trace:
            trace.append({"phase": phase, "s": s, "amp": a, "residual": r})

    # flat density: the one amplitude whose image needs no position
    white_res = float(np.abs(_chroma_vec(forward(0.0, 0.0)) - t3).sum())
    note("white", 0.0, 0.0, white_res)
    if white_res <= tol:
        return 0.0, 0.0, white_res, 1, tuple(trace)

    if init is None:
        if probe is None:
            probe = ProbeTable(forward, amp_max)
        s, amp = probe.init_guess(t2)
    else:
        s, amp = float(init[0]) % 1.0, float(np.clip(init[1], 0.0, amp_max))
    note("init", s, amp, np.nan)

    iters = 0
    best: tuple[float, float, float] = (np.inf, s, amp)

    def residuals(s_: float, a_: float) -> tuple[FloatArray, float]:
        f3 = _chroma_vec(forward(s_, a_))
        return to_plane(f3) - t2, float(np.abs(f3 - t3).sum())

    for fallback in range(4):
        if fallback > 0:
            # grid restart around the best cell so far; first local, then
            # global, then local again but denser
            _, s0, a0 = best
            if fallback == 2:
                s_grid = np.linspace(0.0, 1.0, 96, endpoint=False)
                a_grid = np.geomspace(max(amp_max * 1e-4, 1e-6), amp_max, 25)
            else:
                halfspan = 0.08 if fallback == 1 else 0.02
                n_s = 17 if fallback == 1 else 33
                s_grid = (s0 + np.linspace(-halfspan, halfspan, n_s)) % 1.0
                fac = 4.0 if fallback == 1 else 1.5
                a_lo = max(a0 / fac, amp_max * 1e-6)
                a_grid = np.geomspace(a_lo, min(a0 * fac, amp_max), 13)
            cells = [(float(np.abs(_chroma_vec(forward(sg, ag)) - t3).sum()), sg, ag)
                     for sg in s_grid for ag in a_grid]
            r0, s, amp = min(cells, key=lambda c: c[0])
            note("fallback", s, amp, r0)

        F, r1 = residuals(s, amp)
        if r1 < best[0]:
            best = (r1, s, amp)
        stalled = False
        while iters < budget and not stalled:
            if r1 <= tol:
                note("done", s, amp, r1)
                return s, amp, r1, iters, tuple(trace)
            # central-difference Jacobian of the plane residual
            da = max(_FD_AMP_REL * amp, _FD_AMP_REL)
            a_hi = min(amp + da, amp_max)
            a_lo = max(amp - da, 0.0)
            Fsp, _ = residuals((s + _FD_SIGMA) % 1.0, amp)
            Fsm, _ = residuals((s - _FD_SIGMA) % 1.0, amp)
            Fap, _ = residuals(s, a_hi)
            Fam, _ = residuals(s, a_lo)
            J = np.column_stack(
                [(Fsp - Fsm) / (2 * _FD_SIGMA), (Fap - Fam) / (a_hi - a_lo)]
            )
            step = _solve_2x2(J, -F)
            if step is None:
                stalled = True
                break
            # backtracking on the plane norm
            norm0 = float(np.hypot(*F))
            lam = 1.0
            accepted = False
            for _ in range(15):
                s_try = (s + lam * step[0]) % 1.0
                a_try = float(np.clip(amp + lam * step[1], 0.0, amp_max))
                F_try, r_try = residuals(s_try, a_try)
                if float(np.hypot(*F_try)) < norm0 * (1.0 - 1e-4 * lam):
                    s, amp, F, r1 = s_try, a_try, F_try, r_try
                    accepted = True
                    break
                lam *= 0.5
            iters += 1
            if not accepted:
                stalled = True
            elif r1 < best[0]:
                best = (r1, s, amp)
        if iters >= budget:
            break

    note("exhausted", best[1], best[2], best[0])
    raise NoConvergenceError(
        f"no parameters within tolerance {tol:g} after {iters} Newton steps "
        f"(best residual {best[0]:.3g})",
        trace=trace or [{"phase": "exhausted", "s": best[1], "amp": best[2], "residual": best[0]}],
    )


# ---------------------------------------------------------------------------
# Hull-aware solver façade
# ---------------------------------------------------------------------------

class Inverter:
    """Shared geometry and probe caches for repeated inversions against one
    sensor / reference / gluing combination."""

    def __init__(
        self,
        sensor: Sensor,
        reference: Density,
        gluing: TorusParam | None = None,
        *,
        a_max: float = A_MAX_DEFAULT,
        shape: PeriodicShape | None = None,
    ):
        self.sensor = sensor
        self.reference = reference
        self.gluing = gluing
        self.a_max = float(a_max)
        self.shape = shape
        self.scene = Scene.build(sensor, reference, gluing)
        self.locus = sample_locus(sensor, sensor.grid.n)
        pts2 = self.locus.plane_points
        self._hull_idx = convex_hull(pts2)
        self._hull_pts = pts2[self._hull_idx]
        self._vm_probe: ProbeTable | None = None
        self._step_probe: ProbeTable | None = None

    # -- geometry ------------------------------------------------------------

    def hull_depth(self, chroma) -> float:
        q2 = to_plane(_chroma_vec(chroma))
        return float(_signed_depths(self._hull_pts, q2[None, :])[0])

    def _nearest_boundary(self, chroma) -> dict:
        """Parametrize the closest hull boundary point: either a wavelength
        on the locus or a fraction along a closing chord."""
        q2 = to_plane(_chroma_vec(chroma))
        hull = self._hull_pts
        idx = self._hull_idx
        lams = self.locus.lambdas
        best = (np.inf, {})
        m = len(hull)
        for e in range(m):
            i, j = int(idx[e]), int(idx[(e + 1) % m])
            a, b = hull[e], hull[(e + 1) % m]
            d = b - a
            denom = float(d @ d)
            frac = 0.0 if denom == 0 else float(np.clip((q2 - a) @ d / denom, 0.0, 1.0))
            dist = float(np.hypot(*(q2 - a - frac * d)))
            if dist >= best[0]:
                continue
            if abs(j - i) == 1:
                lam = float(lams[i] + frac * (lams[j] - lams[i]))
                best = (dist, {"kind": "locus", "wavelength": lam, "distance": dist})
            else:
                best = (
                    dist,
                    {
                        "kind": "chord",
                        "endpoints": (float(lams[i]), float(lams[j])),
                        "fraction": frac,
                        "distance": dist,
                    },
                )
        return best[1]

    def _precheck(self, target: InversionTarget) -> None:
        depth = self.hull_depth(target.chroma)
        if depth < -EXTERIOR_TOL:
            raise ExteriorTargetError(
                f"target lies outside the color triangle "
                f"(plane distance {-depth:.3g})",
                distance=-depth,
            )
        if depth <= BOUNDARY_DEPTH:
            raise BoundaryTargetError(
                f"target sits on the triangle boundary (hull depth {depth:.3g}); "
                "no finite-amplitude density reaches it",
                nearest=self._nearest_boundary(target.chroma),
            )

    # -- forward maps ----------------------------------------------------------

    def von_mises_chroma(self, s: float, a: float) -> FloatArray:
        return self.scene.peak_moment(a, s, self.shape)

    def step_chroma(self, s: float, delta: float) -> FloatArray:
        return self.scene.step_moment(s, delta)

    def _step_forward_t(self, s: float, t: float) -> FloatArray:
        # amplitude coordinate: t = 1 - delta, so t = 0 is the flat window
        return self.scene.step_moment(s, max(1.0 - t, DELTA_FLOOR))

    # -- solves ----------------------------------------------------------------

    def ensure_probe(self, kind: str) -> ProbeTable:
        """Build and cache the probe table for ``kind``.

        The solvers call this lazily; batch drivers call it up front so the
        shared table exists before worker threads start.
        """
        if kind == "von_mises":
            if self._vm_probe is None:
                self._vm_probe = ProbeTable(self.von_mises_chroma, self.a_max)
            probe = self._vm_probe
        elif kind == "step":
            if self._step_probe is None:
                # window widths from near-full (close to white) down to
                # slivers hugging the locus, denser toward the boundary
                deltas = np.concatenate(
                    [1.0 - 0.5 ** np.arange(1, 5), 0.5 ** np.arange(1, 18)]
                )
                self._step_probe = ProbeTable(
                    self._step_forward_t, 1.0 - DELTA_FLOOR, amps=1.0 - deltas
                )
            probe = self._step_probe
        else:
            raise SensorDataError(f"unknown model kind {kind!r}")
        probe._table()
        return probe

    def invert_von_mises(self, target: InversionTarget, *, keep_trace: bool = False) -> InversionResult:
        self._precheck(target)
        probe = self.ensure_probe("von_mises")
        s, a, res, iters, trace = _continuation(
            self.von_mises_chroma,
            target,
            amp_max=self.a_max,
            probe=probe,
            init=None,
            keep_trace=keep_trace,
        )
        width = self.scene.width
        b = -self.scene.log_partition(a, s, self.shape)
        if self.shape is None:
            params: ModelParams = VonMisesParams(a=a, b=b, s=s * width, width=width)
        else:
            params = GeneralizedPeakParams(shape=self.shape, a=a, b=b, s=s * width, width=width)
        return InversionResult(params, res, iters, trace)

    def _step_boundary_seeds(self, target: InversionTarget) -> list[tuple[float, float]]:
        """Fallback window seeds for targets hugging the triangle boundary.

        As the window shrinks onto the locus the amplitude column of the
        Jacobian collapses with it, so the generic probe grids can stall
        on a sliver cell.  Windows covering the nearest boundary point are
        scanned over width and off-center split; the residual valley is
        narrow in the split, so each width gets one refinement pass and
        its own ranked seed rather than one global winner.
        """
        info = self._nearest_boundary(target.chroma)
        sc = self.scene
        if info["kind"] == "locus":
            anchor = float(np.interp(info["wavelength"], sc.lams, sc.tau))
        else:
            # both chord feet land on one cyclic coordinate (seam or glue joint)
            anchor = float(np.interp(info["endpoints"][0], sc.lams, sc.tau)) % 1.0
        t3 = _chroma_vec(target.chroma)

        def resid(s: float, d: float) -> float:
            return float(np.abs(sc.step_moment(s % 1.0, d) - t3).sum())

        ranked: list[tuple[float, float, float]] = []
        coarse = np.linspace(0.0, 1.0, 17)
        for delta in np.geomspace(2e-4, 0.75, 28):
            r0, x0 = min((resid(anchor - x * delta, delta), x) for x in coarse)
            lo, hi = max(x0 - 0.0625, 0.0), min(x0 + 0.0625, 1.0)
            r1, x1 = min(
                (resid(anchor - x * delta, delta), x)
                for x in np.linspace(lo, hi, 21)
            )
            ranked.append((min(r0, r1), (anchor - (x1 if r1 <= r0 else x0) * delta) % 1.0, delta))
        ranked.sort(key=lambda c: c[0])
        return [(s, 1.0 - d) for _, s, d in ranked[:5]]

    def invert_step(self, target: InversionTarget, *, keep_trace: bool = False) -> InversionResult:
        self._precheck(target)
        probe = self.ensure_probe("step")
        try:
            s, t, res, iters, trace = _continuation(
                self._step_forward_t,
                target,
                amp_max=1.0 - DELTA_FLOOR,
                probe=probe,
                init=None,
                keep_trace=keep_trace,
            )
        except NoConvergenceError as first:
            err = first
            for init in self._step_boundary_seeds(target):
                try:
                    s, t, res, iters, trace = _continuation(
                        self._step_forward_t,
                        target,
                        amp_max=1.0 - DELTA_FLOOR,
                        probe=None,
                        init=init,
                        keep_trace=keep_trace,
                    )
                    break
                except NoConvergenceError as exc:
                    err = exc
            else:
                raise err
        return InversionResult(StepParams(s=s, delta=1.0 - t), res, iters, trace)


def invert_von_mises(
    sensor: Sensor,
    reference: Density,
    gluing: TorusParam | None,
    target: InversionTarget,
    *,
    a_max: float = A_MAX_DEFAULT,
    shape: PeriodicShape | None = None,
    keep_trace: bool = False,
) -> InversionResult:
    """One-shot peaked-exponential inversion; see Inverter for batch use."""
    inv = Inverter(sensor, reference, gluing, a_max=a_max, shape=shape)
    return inv.invert_von_mises(target, keep_trace=keep_trace)


def invert_step(
    sensor: Sensor,
    reference: Density,
    gluing: TorusParam | None,
    target: InversionTarget,
    *,
    keep_trace: bool = False,
) -> InversionResult:
    """One-shot two-sided step inversion; see Inverter for batch use."""
    inv = Inverter(sensor, reference, gluing)
    return inv.invert_step(target, keep_trace=keep_trace)


# ---------------------------------------------------------------------------
# Banded construction from a column matrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandedAssignment:
    """Disjoint wavelength sets realizing the columns of a matrix.

    ``sets[i]`` is a tuple of closed wavelength intervals; the reweighted
    reference conditioned on it has chromaticity within ``errors[i]`` (l1)
    of column i.  All sets carry the same reference mass ``1 / mass_scale``
    of the total.
    """

    sets: tuple[tuple[tuple[float, float], ...], ...]
    errors: FloatArray
    n_superblocks: int
    mass_scale: float


def banded_from_matrix(
    sensor: Sensor,
    reference: Density,
    matrix,
    eps: float,
    *,
    max_superblocks: int = 4096,
) -> BandedAssignment:
    """Build disjoint interleaved wavelength sets whose conditional
    chromaticities match the matrix columns within eps.

    Each column is first realized as a normalized window density by step
    inversion (columns on the boundary are pulled slightly toward white
    first), then the window's mass is re-laid into one reserved block per
    superblock; doubling the superblock count until the directly measured
    centroid error clears eps.
    """
    if not eps > 0:
        raise SensorDataError("eps must be positive")
    if reference.atoms:
        raise SensorDataError("banded construction needs an atomless reference")
    cols = np.asarray(matrix, dtype=float)
    if cols.ndim != 2 or cols.shape[0] != sensor.d:
        raise SensorDataError(
            f"matrix must be ({sensor.d}, n) with chromaticity columns"
        )
    sums = cols.sum(axis=0)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise SensorDataError("matrix columns must have unit component sum")
    n = cols.shape[1]

    inv = Inverter(sensor, reference)
    scene = inv.scene
    white = scene.white

    # realize every column as a window density, nudging boundary columns
    # into the interior (distance 0.45*eps, within the eps/2 proxy budget)
    windows: list[tuple[float, float]] = []
    for i in range(n):
        c = cols[:, i]
        depth = inv.hull_depth(c)
        if depth < -EXTERIOR_TOL:
            raise ExteriorTargetError(
                f"column {i} is outside the color cone and cannot be "
                f"approximated: any achievable chromaticity differs by at "
                f"least {-depth:.3g} (l1 lower bound)",
                distance=-depth,
            )
        if depth <= BOUNDARY_DEPTH:
            pull = c - white
            c = c - 0.45 * eps * pull / float(np.abs(pull).sum())
        tol = min(1e-10, 0.04 * eps)
        result = inv.invert_step(InversionTarget(Chromaticity(c), tolerance=tol))
        windows.append((result.params.s, result.params.delta))

    tau_k, cm, cv = scene._cumulatives()

    def mass_between(x0: float, x1: float) -> float:
        return float(np.interp(x1, tau_k, cm) - np.interp(x0, tau_k, cm))

    def moment_between(x0: float, x1: float) -> FloatArray:
        hi = np.array([np.interp(x1, tau_k, cv[:, j]) for j in range(cv.shape[1])])
        lo = np.array([np.interp(x0, tau_k, cv[:, j]) for j in range(cv.shape[1])])
        return hi - lo

    def window_pieces(s: float, d: float) -> list[tuple[float, float]]:
        s = s % 1.0
        return [(s, s + d)] if s + d <= 1.0 else [(s, 1.0), (0.0, s + d - 1.0)]

    n_super = max(2, int(np.ceil(2.0 / (n * eps))))
    while True:
        if n_super > max_superblocks:
            raise ResolutionExceededError(
                f"eps {eps:g} needs more than {max_superblocks} superblocks; "
                "the reference grid cannot support it"
            )
        n_blocks = n * n_super
        levels = np.linspace(0.0, 1.0, n_blocks + 1)
        q = np.interp(levels, cm, tau_k)   # equal-mass block boundaries
        q[0], q[-1] = 0.0, 1.0
        block_mass = 1.0 / n_blocks

        # mass of each window inside each superblock
        m = np.zeros((n, n_super))
        for i, (s, d) in enumerate(windows):
            wmass = sum(mass_between(a, b) for a, b in window_pieces(s, d))
            for k in range(n_super):
                lo, hi = q[k * n], q[(k + 1) * n]
                got = 0.0
                for a, b in window_pieces(s, d):
                    aa, bb = max(a, lo), min(b, hi)
                    if bb > aa:
                        got += mass_between(aa, bb)
                m[i, k] = got / wmass
        scale = float(m.max() / block_mass) * (1.0 + 1e-9)

        sets: list[tuple[tuple[float, float], ...]] = []
        errors = np.empty(n)
        for i in range(n):
            intervals: list[tuple[float, float]] = []
            total_mass = 0.0
            total_vec = np.zeros(scene.eta.shape[1])
            for k in range(n_super):
                need = m[i, k] / scale
                if need <= 0.0:
                    continue
                lo, hi = q[k * n + i], q[k * n + i + 1]
                # leftmost subinterval of the block with the needed mass,
                # located by bisection on its right endpoint
                r_lo, r_hi = lo, hi
                for _ in range(60):
                    mid = 0.5 * (r_lo + r_hi)
                    if mass_between(lo, mid) < need:
                        r_lo = mid
                    else:
                        r_hi = mid
                r = r_hi
                intervals.append((lo, r))
                total_mass += mass_between(lo, r)
                total_vec += moment_between(lo, r)
            centroid = total_vec / total_mass
            errors[i] = float(np.abs(centroid - cols[:, i]).sum())
            width = scene.width
            torus = scene.torus
            lam_ints = tuple(
                (float(torus.from_torus(a * width)), float(torus.from_torus(b * width)))
                for a, b in intervals
            )
            sets.append(lam_ints)

        if errors.max() <= eps:
            return BandedAssignment(tuple(sets), errors, n_super, scale)
        n_super *= 2


# ---------------------------------------------------------------------------
# Log-linear (exponential-family) inversion
# ---------------------------------------------------------------------------

def invert_log_linear(
    sensor: Sensor,
    reference: Density,
    basis,
    target: Color,
    *,
    tolerance: float = 1e-8,
    max_iterations: int = 100,
) -> LogLinearParams:
    """Solve for p with color-of-density(exp(sum p_k * basis_k)) = target.

    The basis must be three functions on the sensor grid (arrays or
    callables of wavelength) that are linearly independent and span the
    constants.  Newton uses the analytic Jacobian of the moment map; the
    target is a full color vector, so the overall density scale is solved
    for, not normalized away.
    """
    if sensor.d != 3:
        raise SensorDataError("log-linear inversion needs a three-channel sensor")
    scene = Scene.build(sensor, reference)
    grid = scene.lams
    rows = []
    for fn in basis:
        arr = np.asarray(fn(grid) if callable(fn) else fn, dtype=float)
        if arr.shape != grid.shape:
            raise SensorDataError(
                "each basis function must be sampled on the sensor grid"
            )
        rows.append(arr)
    B = np.vstack(rows)
    if B.shape[0] != 3:
        raise SensorDataError("log-linear basis must have exactly 3 functions")

    w = np.sqrt(scene.mass)
    if np.linalg.matrix_rank(B * w, tol=1e-10) < 3:
        raise SensorDataError("rank-deficient basis")
    coef, res, *_ = np.linalg.lstsq((B * w).T, w, rcond=None)
    fit = (B * w).T @ coef
    if float(np.abs(fit - w).max()) > 1e-8:
        raise SensorDataError("basis span must contain the constants")

    t = _chroma_vec(target)
    mass3 = scene.raw_total * scene.mass
    eta = scene.eta

    p = np.zeros(3)
    best = (np.inf, p.copy())
    for it in range(max_iterations):
        expo = np.clip(p @ B, -700.0, 700.0)
        dens = np.exp(expo) * mass3
        F = dens @ eta - t
        r1 = float(np.abs(F).sum())
        if r1 < best[0]:
            best = (r1, p.copy())
        if r1 <= tolerance:
            return LogLinearParams(coeffs=p, basis=B, grid=grid)
        J = np.einsum("j,ji,kj->ik", dens, eta, B)
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise NoConvergenceError(
                f"singular moment Jacobian at iteration {it}",
                trace=[{"p": p.tolist(), "residual": r1}],
            )
        lam = 1.0
        for _ in range(30):
            p_try = p + lam * step
            expo = np.clip(p_try @ B, -700.0, 700.0)
            r_try = float(np.abs(np.exp(expo) * mass3 @ eta - t).sum())
            if r_try < r1:
                p = p_try
                break
            lam *= 0.5
        else:
            break
    raise NoConvergenceError(
        f"log-linear solve stalled at residual {best[0]:.3g} "
        f"(tolerance {tolerance:g})",
        trace=[{"p": best[1].tolist(), "residual": best[0]}],
    )
