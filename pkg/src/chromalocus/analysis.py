"""Batch studies over a fixed sensor: coverage maps, limit tables, closure.

Three desk-scale experiments, all deterministic:

* ``coverage_map`` sweeps a barycentric grid of interior chromaticities and
  inverts every node with one model family, recording per-cell outcomes.
  Failures are data, not exceptions; the report re-verifies each solved
  cell's forward image independently of the solver's own residual claim.
* ``gaussian_convergence`` measures how fast cosine-exponent peak densities
  approach log-quadratic ones as the circular width grows past the domain,
  worst-cased over a small parameter grid.
* ``closure_report`` grades sampled function families on whether projected
  sums and products of random members stay in the family.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryTargetError,
    ExteriorTargetError,
    NoConvergenceError,
    SensorDataError,
)
from .geometry import TorusParam, _signed_depths, to_plane
from .inversion import A_MAX_DEFAULT, InversionTarget, Inverter
from .models import (
    FAMILIES,
    ClosureFamily,
    StepParams,
    VonMisesParams,
    closure_residual,
    gaussian_limit_coeffs,
)
from .sensor import Density, Sensor

FloatArray = np.ndarray

INTERIOR_DEPTH = 1e-4   # hull-depth band excluded from coverage grids
MIN_RESOLUTION = 16

CLOSED_TOLERANCE = 1e-8
OPEN_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# Barycentric grids
# ---------------------------------------------------------------------------

def _lattice_index_pairs(resolution: int) -> list[tuple[int, int]]:
    return [
        (i, j)
        for i in range(resolution + 1)
        for j in range(resolution + 1 - i)
    ]


def simplex_lattice(resolution: int) -> FloatArray:
    """Barycentric grid over the full simplex, ``resolution`` steps per axis.

    Returns an ``(m, 3)`` array of weight triples ``(i, j, k) / resolution``
    in row-major ``(i, j)`` order; ``m = (resolution+1)(resolution+2)/2``.
    """
    if resolution < 1:
        raise SensorDataError("lattice resolution must be at least 1")
    ij = np.array(_lattice_index_pairs(resolution), dtype=float)
    k = resolution - ij[:, 0] - ij[:, 1]
    return np.column_stack([ij[:, 0], ij[:, 1], k]) / resolution


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageCell:
    """Outcome at one grid node.

    ``amplitude`` holds the peak amplitude for von Mises runs and the window
    width delta for step runs.  ``residual`` is recomputed from the returned
    parameters, not copied from the solver.
    """

    row: int
    col: int
    chroma: tuple[float, float, float]
    solved: bool
    s: float | None
    amplitude: float | None
    residual: float | None
    error: str | None


@dataclass(frozen=True)
class CoverageReport:
    model_kind: str
    grid_resolution: int
    n_targets: int
    n_solved: int
    max_residual: float
    failures: tuple[tuple[tuple[float, float, float], str], ...]
    heatmap: tuple[CoverageCell, ...]

    def __post_init__(self):
        if self.n_solved + len(self.failures) != self.n_targets:
            raise SensorDataError(
                "coverage bookkeeping broken: "
                f"{self.n_solved} solved + {len(self.failures)} failed "
                f"!= {self.n_targets} targets"
            )

    @property
    def solved_fraction(self) -> float:
        return self.n_solved / self.n_targets if self.n_targets else 1.0

    def heatmap_rows(self) -> list[tuple]:
        """Rows of (row, col, solved, s, a, residual) for CSV export."""
        return [
            (c.row, c.col, int(c.solved), c.s, c.amplitude, c.residual)
            for c in self.heatmap
        ]

    def to_json_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "grid_resolution": self.grid_resolution,
            "n_targets": self.n_targets,
            "n_solved": self.n_solved,
            "solved_fraction": self.solved_fraction,
            "max_residual": self.max_residual,
            "failures": [
                {"chromaticity": list(ch), "error": kind}
                for ch, kind in self.failures
            ],
        }


_FAILURE_KINDS = {
    NoConvergenceError: "no_convergence",
    BoundaryTargetError: "boundary_target",
    ExteriorTargetError: "exterior_target",
}
_FAILURE_CLASSES = tuple(_FAILURE_KINDS)


def coverage_map(
    sensor: Sensor,
    reference: Density,
    model_kind: str,
    resolution: int,
    *,
    gluing: TorusParam | None = None,
    a_max: float = A_MAX_DEFAULT,
    tolerance: float = 1e-8,
    threads: int = 1,
) -> CoverageReport:
    """Invert every interior node of a barycentric chromaticity grid.

    Nodes within ``INTERIOR_DEPTH`` of the hull boundary are excluded: the
    models only reach the open interior at finite amplitude.  The grid is
    seed-free, so reports are deterministic; ``threads`` only splits the
    per-node solves after the shared probe table is built.
    """
    kind = model_kind.replace("-", "_")
    if kind not in ("von_mises", "step"):
        raise SensorDataError(f"unknown coverage model kind {model_kind!r}")
    if resolution < MIN_RESOLUTION:
        raise SensorDataError(
            f"coverage grid needs resolution >= {MIN_RESOLUTION}, got {resolution}"
        )

    inverter = Inverter(sensor, reference, gluing, a_max=a_max)
    bary = simplex_lattice(resolution)
    pairs = _lattice_index_pairs(resolution)
    depths = _signed_depths(inverter._hull_pts, to_plane(bary))
    keep = np.flatnonzero(depths > INTERIOR_DEPTH)

    inverter.ensure_probe(kind)
    if kind == "von_mises":
        solve = inverter.invert_von_mises
    else:
        solve = inverter.invert_step

    def run(node_index: int) -> CoverageCell:
        i, j = pairs[node_index]
        node = bary[node_index]
        chroma = (float(node[0]), float(node[1]), float(node[2]))
        target = InversionTarget(node, tolerance=tolerance)
        try:
            result = solve(target)
        except _FAILURE_CLASSES as exc:
            return CoverageCell(
                i, j, chroma, False, None, None, None, _FAILURE_KINDS[type(exc)]
            )
        p = result.params
        if isinstance(p, StepParams):
            s, amp = p.s, p.delta
            image = inverter.step_chroma(p.s, p.delta)
        else:
            # peak families store s in torus-position units (sigma * width)
            s, amp = p.s, p.a
            image = inverter.von_mises_chroma(p.s / p.width, p.a)
        residual = float(np.abs(np.asarray(image) - node).sum())
        return CoverageCell(i, j, chroma, True, float(s), float(amp), residual, None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(run, keep))
    else:
        cells = [run(int(n)) for n in keep]

    failures = tuple(
        (c.chroma, c.error) for c in cells if not c.solved
    )
    solved_res = [c.residual for c in cells if c.solved]
    return CoverageReport(
        model_kind=kind,
        grid_resolution=resolution,
        n_targets=len(cells),
        n_solved=len(solved_res),
        max_residual=float(max(solved_res)) if solved_res else 0.0,
        failures=failures,
        heatmap=tuple(cells),
    )


# ---------------------------------------------------------------------------
# Wide-domain limit study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    width: float
    sup_gap: float
    ratio: float | None  # gap / previous gap; None on the first row


@dataclass(frozen=True)
class ConvergenceTable:
    amplitude_bound: float
    domain: tuple[float, float]
    rows: tuple[ConvergenceRow, ...]

    def __post_init__(self):
        widths = [r.width for r in self.rows]
        if any(b <= a for a, b in zip(widths, widths[1:])):
            raise SensorDataError("convergence rows must have increasing widths")

    def to_json_dict(self) -> dict:
        return {
            "amplitude_bound": self.amplitude_bound,
            "domain": list(self.domain),
            "rows": [
                {"width": r.width, "sup_gap": r.sup_gap, "ratio": r.ratio}
                for r in self.rows
            ],
        }

    def csv_rows(self) -> list[tuple]:
        return [(r.width, r.sup_gap, r.ratio) for r in self.rows]


def gaussian_convergence(
    D: float,
    widths,
    domain: tuple[float, float],
) -> ConvergenceTable:
    """Worst-case gap between peak densities and their log-quadratic limits.

    For each circular width, takes the sup-norm gap reported by
    ``gaussian_limit_coeffs`` and maximizes it over amplitudes in [0, D],
    offsets in {-D, 0, D}, and 17 peak positions across the domain.  No
    randomness anywhere, so tables reproduce bit for bit.
    """
    D = float(D)
    if D < 0:
        raise SensorDataError("amplitude bound must be nonnegative")
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= lo:
        raise SensorDataError("domain must have positive length")
    ws = sorted(float(w) for w in widths)
    if not ws:
        raise SensorDataError("need at least one width")
    if any(b <= a for a, b in zip(ws, ws[1:])):
        raise SensorDataError("widths must be distinct")
    if ws[0] <= hi - lo:
        raise SensorDataError("every width must exceed the domain length")

    a_vals = np.linspace(0.0, D, 5)
    b_vals = list(dict.fromkeys((-D, 0.0, D)))
    s_vals = np.linspace(lo, hi, 17)

    rows: list[ConvergenceRow] = []
    prev = None
    for w in ws:
        gap = 0.0
        for a in a_vals:
            for b in b_vals:
                for s in s_vals:
                    p = VonMisesParams(a=float(a), b=float(b), s=float(s), width=w)
                    _, g = gaussian_limit_coeffs(p, (lo, hi))
                    gap = max(gap, g)
        ratio = None if prev is None or prev == 0.0 else gap / prev
        rows.append(ConvergenceRow(width=w, sup_gap=gap, ratio=ratio))
        prev = gap
    return ConvergenceTable(amplitude_bound=D, domain=(lo, hi), rows=tuple(rows))


# ---------------------------------------------------------------------------
# Closure summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosureVerdict:
    family: str
    operation: str  # "product" | "sum"
    max_residual: float
    median_residual: float
    verdict: str  # "closed" | "open" | "ambiguous"


@dataclass(frozen=True)
class ClosureReport:
    trials: int
    closed_tolerance: float
    open_floor: float
    rows: tuple[ClosureVerdict, ...]

    def to_json_dict(self) -> dict:
        return {
            "trials": self.trials,
            "closed_tolerance": self.closed_tolerance,
            "open_floor": self.open_floor,
            "rows": [
                {
                    "family": r.family,
                    "operation": r.operation,
                    "max_residual": r.max_residual,
                    "median_residual": r.median_residual,
                    "verdict": r.verdict,
                }
                for r in self.rows
            ],
        }


def closure_report(
    families,
    trials: int = 100,
    *,
    seed: int = 0,
    closed_tolerance: float = CLOSED_TOLERANCE,
    open_floor: float = OPEN_FLOOR,
) -> ClosureReport:
    """Grade families on closure under pointwise products and sums.

    A family counts as closed under an operation when the worst projection
    residual over all trials stays at numerical-noise level, and as open
    when the median residual is macroscopic; the thresholds are far enough
    apart that no sampled family lands between them.
    """
    rows: list[ClosureVerdict] = []
    for fam in families:
        if isinstance(fam, str):
            if fam not in FAMILIES:
                raise SensorDataError(
                    f"unknown family {fam!r}; known: {', '.join(sorted(FAMILIES))}"
                )
            family: ClosureFamily = FAMILIES[fam]()
        else:
            family = fam
        for stats in closure_residual(family, n_trials=trials, seed=seed):
            if stats.max_residual <= closed_tolerance:
                verdict = "closed"
            elif stats.median_residual >= open_floor:
                verdict = "open"
            else:
                verdict = "ambiguous"
            rows.append(
                ClosureVerdict(
                    family=stats.family,
                    operation=stats.operation,
                    max_residual=stats.max_residual,
                    median_residual=stats.median_residual,
                    verdict=verdict,
                )
            )
    return ClosureReport(
        trials=trials,
        closed_tolerance=closed_tolerance,
        open_floor=open_floor,
        rows=tuple(rows),
    )
