"""Parametric spectral density families and their algebra.

Families
--------
* von Mises: ``exp(b + a*cos(2*pi*(x - s)/width))`` on a circular coordinate.
  Closed under pointwise products (phasor addition of the cosine terms).
* generalized peak: ``exp(b + a*h(x - s))`` for a smooth 1-periodic shape
  ``h`` with a single strict maximum.
* Gaussian: ``exp(alpha*x^2 + beta*x + gamma)``, the wide-domain limit of the
  von Mises family.
* step: normalized indicator of a cyclic window, in circular units.
* banded: piecewise constant over a fixed family of disjoint intervals.
* log-linear: ``exp(sum_k p_k * P_k(x))`` over a fixed rank-3 basis.

The normalization routine and the sign-change counter work against a Scene
(sensor + reference + gluing), everything else is plain function algebra.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from .errors import SensorDataError
from .geometry import TorusParam
from .scene import Scene
from .sensor import Density, Sensor

FloatArray = NDArray[np.floating]
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# Shape functions for the generalized family
# ---------------------------------------------------------------------------

class PeriodicShape:
    """Smooth 1-periodic shape from dense samples, cubic interpolation.

    Must attain a single strict maximum per period; plateaus at the top are
    rejected because they break peak identifiability.
    """

    def __init__(self, samples: FloatArray):
        vals = np.asarray(samples, dtype=float)
        if vals.ndim != 1 or vals.size < 8:
            raise SensorDataError("shape needs at least 8 samples over one period")
        if not np.all(np.isfinite(vals)):
            raise SensorDataError("shape samples must be finite")
        n = vals.size
        top = vals.max()
        at_top = np.isclose(vals, top, rtol=0, atol=1e-12 * max(1.0, abs(top)))
        if at_top.sum() > 1:
            raise SensorDataError("shape has a plateau at its maximum; peak is ambiguous")
        left = np.roll(vals, 1)
        right = np.roll(vals, -1)
        n_max = int(np.count_nonzero((vals > left) & (vals > right)))
        if n_max != 1:
            raise SensorDataError(f"shape must have exactly one local maximum, found {n_max}")
        x = np.arange(n + 1) / n
        self._spline = CubicSpline(x, np.append(vals, vals[0]), bc_type="periodic")
        self.samples = vals

    def __call__(self, u) -> FloatArray:
        return self._spline(np.mod(u, 1.0))


def cosine_shape(u) -> FloatArray:
    return np.cos(TWO_PI * np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VonMisesParams:
    """log f = b + a*cos(2*pi*(x - s)/width); a >= 0, s taken mod width."""

    a: float
    b: float
    s: float
    width: float

    def __post_init__(self):
        if self.a < 0:
            raise SensorDataError("von Mises amplitude must be nonnegative")
        if self.width <= 0:
            raise SensorDataError("von Mises width must be positive")

    @property
    def sigma(self) -> float:
        """Peak location in circular units [0, 1)."""
        return float(np.mod(self.s / self.width, 1.0))


@dataclass(frozen=True)
class GeneralizedPeakParams:
    """log f = b + a*h((x - s)/width) with h a PeriodicShape."""

    shape: PeriodicShape
    a: float
    b: float
    s: float
    width: float

    def __post_init__(self):
        if self.a < 0:
            raise SensorDataError("amplitude must be nonnegative")
        if self.width <= 0:
            raise SensorDataError("width must be positive")


@dataclass(frozen=True)
class GaussianParams:
    """log f = alpha*x^2 + beta*x + gamma (reciprocal bump when alpha > 0)."""

    alpha: float
    beta: float
    gamma: float


@dataclass(frozen=True)
class StepParams:
    """Normalized indicator of the cyclic window [s, s + delta], circular units."""

    s: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise SensorDataError("step width must lie in (0, 1]")


@dataclass(frozen=True)
class BandedParams:
    """Piecewise constant: value[i] on band i, zero elsewhere.

    ``bands`` is a tuple of disjoint (lo, hi) intervals in ascending order;
    a band may itself be a union, given as a tuple of intervals.
    """

    bands: tuple
    values: tuple

    def __post_init__(self):
        bands = []
        for b in self.bands:
            first = b[0]
            ivs = (b,) if np.isscalar(first) else tuple(b)
            ivs = tuple((float(lo), float(hi)) for lo, hi in ivs)
            for lo, hi in ivs:
                if hi <= lo:
                    raise SensorDataError("band intervals must have positive width")
            bands.append(ivs)
        flat = sorted(iv for band in bands for iv in band)
        for (_, h0), (l1, _) in zip(flat, flat[1:]):
            if l1 < h0 - 1e-12:
                raise SensorDataError("band intervals must be disjoint")
        values = tuple(float(v) for v in self.values)
        if len(values) != len(bands):
            raise SensorDataError("need one value per band")
        if any(v < 0 for v in values):
            raise SensorDataError("band values must be nonnegative")
        object.__setattr__(self, "bands", tuple(bands))
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LogLinearParams:
    """log f = sum_k coeffs[k] * basis[k](x), basis sampled on a grid."""

    coeffs: FloatArray
    basis: FloatArray   # (k, n)
    grid: FloatArray    # (n,)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        basis = np.asarray(self.basis, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        if basis.ndim != 2 or coeffs.shape != (basis.shape[0],) or grid.shape != (basis.shape[1],):
            raise SensorDataError("log-linear arrays have inconsistent shapes")
        for arr in (coeffs, basis, grid):
            arr.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "grid", grid)


ModelParams = (
    VonMisesParams
    | GeneralizedPeakParams
    | GaussianParams
    | StepParams
    | BandedParams
    | LogLinearParams
)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def log_eval(params: ModelParams, x) -> FloatArray:
    """Log density at ``x`` (wavelength or circular coordinate, see each type).

    Step and banded models are not log-representable at their zeros; they
    return -inf there.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(params, VonMisesParams):
        # reduce the shift first so s and s + width give identical floats
        s = np.mod(params.s, params.width)
        return params.b + params.a * np.cos(TWO_PI * (x - s) / params.width)
    if isinstance(params, GeneralizedPeakParams):
        s = np.mod(params.s, params.width)
        return params.b + params.a * params.shape((x - s) / params.width)
    if isinstance(params, GaussianParams):
        return params.alpha * x**2 + params.beta * x + params.gamma
    if isinstance(params, StepParams):
        # raw cyclic indicator; measure-true normalization lives in
        # Scene.step_density
        u = np.mod(x - np.mod(params.s, 1.0), 1.0)
        with np.errstate(divide="ignore"):
            return np.where(u <= params.delta, 0.0, -np.inf)
    if isinstance(params, BandedParams):
        out = np.full(x.shape, -np.inf)
        for ivs, v in zip(params.bands, params.values):
            inside = np.zeros(x.shape, dtype=bool)
            for lo, hi in ivs:
                inside |= (x >= lo) & (x <= hi)
            with np.errstate(divide="ignore"):
                out = np.where(inside, np.log(v) if v > 0 else -np.inf, out)
        return out
    if isinstance(params, LogLinearParams):
        rows = np.stack(
            [np.interp(x, params.grid, params.basis[k]) for k in range(params.basis.shape[0])]
        )
        return params.coeffs @ rows
    raise SensorDataError(f"unknown model params {type(params)!r}")


def eval_model(params: ModelParams, x) -> FloatArray:
    with np.errstate(over="ignore"):
        return np.exp(log_eval(params, x))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def normalization_b(
    sensor: Sensor,
    reference: Density,
    a: float,
    s: float,
    gluing: TorusParam | None = None,
    shape: PeriodicShape | None = None,
) -> float:
    """Offset b making exp(b + a*h((t-s)/width)) integrate to one against the
    reweighted, unit-mass reference on the glued coordinate.

    Computed in the log domain with a max shift.  Raises if the peak falls
    below what the wavelength grid can resolve.
    """
    scene = Scene.build(sensor, reference, gluing)
    return normalization_b_scene(scene, a, s / scene.width, shape)


def normalization_b_scene(
    scene: Scene, a: float, sigma: float, shape: PeriodicShape | None = None
) -> float:
    scene.check_resolution(a, sigma, shape)
    return -scene.log_partition(a, sigma, shape)


# ---------------------------------------------------------------------------
# Product structure of the von Mises family
# ---------------------------------------------------------------------------

def multiply_von_mises(p: VonMisesParams, q: VonMisesParams) -> VonMisesParams:
    """Exact pointwise product: cosine terms add as phasors, offsets add."""
    if not np.isclose(p.width, q.width, rtol=1e-12, atol=0):
        raise SensorDataError("cannot multiply von Mises densities with different widths")
    w = p.width
    zp = p.a * np.exp(1j * TWO_PI * p.s / w)
    zq = q.a * np.exp(1j * TWO_PI * q.s / w)
    z = zp + zq
    a = float(abs(z))
    s = float(np.mod(np.angle(z), TWO_PI) / TWO_PI * w) if a > 0 else 0.0
    return VonMisesParams(a=a, b=p.b + q.b, s=s, width=w)


# ---------------------------------------------------------------------------
# Wide-domain Gaussian limit
# ---------------------------------------------------------------------------

def gaussian_limit_coeffs(
    p: VonMisesParams, domain: tuple[float, float], n_eval: int = 4096
) -> tuple[GaussianParams, float]:
    """Second-order expansion of the cosine exponent around x = 0.

    Returns the Gaussian coefficients and the sup-norm gap between the two
    densities over ``domain``.  Valid when the circular width exceeds the
    domain length; the gap then shrinks like the cube of 1/width.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if hi <= lo:
        raise SensorDataError("domain must have positive length")
    if p.width <= hi - lo:
        raise SensorDataError("width must exceed the domain length")
    A = TWO_PI / p.width
    As = A * p.s
    gauss = GaussianParams(
        alpha=-(A**2) * p.a / 2.0 * np.cos(As),
        beta=A * p.a * np.sin(As),
        gamma=p.b + p.a * np.cos(As),
    )
    x = np.linspace(lo, hi, int(n_eval))
    gap = float(np.max(np.abs(eval_model(p, x) - eval_model(gauss, x))))
    return gauss, gap


# ---------------------------------------------------------------------------
# Sign-change counting (injectivity witness)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignChangeResult:
    kind: str  # "twice_cyclic" | "other"
    count: int
    positive_interval: tuple[float, float] | None = None  # circular coords, may wrap


def count_sign_changes(scene: Scene, f: FloatArray, g: FloatArray) -> SignChangeResult:
    """Cyclic sign structure of f - g at the scene nodes.

    Both densities must have unit mass against the scene (tolerance 1e-9).
    Values within 1e-12 of the common scale count as zero and belong to the
    nonnegative side.  "twice_cyclic" means {f >= g} is a single cyclic
    interval whose two sides both carry positive mass.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != scene.tau.shape or g.shape != scene.tau.shape:
        raise SensorDataError("densities must be sampled at the scene nodes")
    for name, vals in (("f", f), ("g", g)):
        total = float(np.sum(scene.mass * vals))
        if abs(total - 1.0) > 1e-9:
            raise SensorDataError(f"{name} must have unit mass, got {total!r}")
    u = f - g
    scale = max(float(np.max(np.abs(f))), float(np.max(np.abs(g))))
    if np.max(np.abs(u)) <= 1e-12 * scale:
        raise SensorDataError("densities are identical; sign structure undefined")
    # zeros belong to {f - g >= 0}, so they merge into the positive side
    tol = 1e-12 * scale
    filled = np.where(u > tol, 1, np.where(u < -tol, -1, 1))

    flips = int(np.count_nonzero(filled != np.roll(filled, 1)))
    pos_mass = float(scene.mass[filled > 0].sum())
    neg_mass = float(scene.mass[filled < 0].sum())
    if flips == 2 and pos_mass > 0 and neg_mass > 0:
        pos = np.nonzero(filled > 0)[0]
        # locate the single cyclic run of +1
        starts = pos[(np.roll(filled, 1) < 0)[pos]]
        ends = pos[(np.roll(filled, -1) < 0)[pos]]
        i0, i1 = int(starts[0]), int(ends[0])
        return SignChangeResult(
            "twice_cyclic", 2, (float(scene.tau[i0]), float(scene.tau[i1]))
        )
    return SignChangeResult("other", flips, None)


# ---------------------------------------------------------------------------
# Closure of a family under sums and products
# ---------------------------------------------------------------------------

class ClosureFamily:
    """A sampled function family with a best-fit projection.

    Members are positive functions on a uniform circular grid; ``project``
    returns the family's least-squares fit to an arbitrary positive sample
    vector.  Residuals of projected sums and products measure closure.
    """

    name: str
    grid: FloatArray

    def sample(self, rng: np.random.Generator) -> FloatArray:
        raise NotImplementedError

    def project(self, values: FloatArray) -> FloatArray:
        raise NotImplementedError


class VonMisesFamily(ClosureFamily):
    """Cosine-exponent peaks on the unit circle; log-space linear fit."""

    def __init__(self, n_grid: int = 512):
        self.name = "von_mises"
        self.grid = np.arange(n_grid) / n_grid
        self._design = np.column_stack(
            [np.ones(n_grid), np.cos(TWO_PI * self.grid), np.sin(TWO_PI * self.grid)]
        )

    def sample(self, rng: np.random.Generator) -> FloatArray:
        a = rng.uniform(0.5, 4.0)
        b = rng.uniform(-1.0, 1.0)
        s = rng.uniform(0.0, 1.0)
        return np.exp(b + a * np.cos(TWO_PI * (self.grid - s)))

    def project(self, values: FloatArray) -> FloatArray:
        if np.any(values <= 0):
            raise SensorDataError("von Mises projection needs positive values")
        coef, *_ = np.linalg.lstsq(self._design, np.log(values), rcond=None)
        return np.exp(self._design @ coef)


class BandedFamily(ClosureFamily):
    """Piecewise constant over fixed equal bands; per-band mean projection."""

    def __init__(self, n_grid: int = 512, n_bands: int = 4):
        if n_grid % n_bands:
            raise SensorDataError("grid must split evenly into bands")
        self.name = "banded"
        self.grid = np.arange(n_grid) / n_grid
        self._band_of = (np.arange(n_grid) * n_bands) // n_grid
        self._n_bands = n_bands

    def sample(self, rng: np.random.Generator) -> FloatArray:
        vals = rng.lognormal(0.0, 0.6, self._n_bands)
        return vals[self._band_of]

    def project(self, values: FloatArray) -> FloatArray:
        means = np.array(
            [values[self._band_of == k].mean() for k in range(self._n_bands)]
        )
        return means[self._band_of]


class LinearSpanFamily(ClosureFamily):
    """Nonnegative span of three fixed bumps; ordinary least squares."""

    def __init__(self, n_grid: int = 512):
        self.name = "linear3"
        self.grid = np.arange(n_grid) / n_grid
        centers = (0.2, 0.5, 0.8)
        self._design = np.column_stack(
            [np.exp(-((self.grid - c) / 0.16) ** 2) for c in centers]
        )

    def sample(self, rng: np.random.Generator) -> FloatArray:
        coeffs = rng.uniform(0.2, 2.0, 3)
        return self._design @ coeffs

    def project(self, values: FloatArray) -> FloatArray:
        coef, *_ = np.linalg.lstsq(self._design, values, rcond=None)
        return self._design @ coef


FAMILIES = {
    "banded": BandedFamily,
    "von_mises": VonMisesFamily,
    "linear3": LinearSpanFamily,
}


@dataclass(frozen=True)
class ClosureStats:
    family: str
    operation: str  # "product" | "sum"
    max_residual: float
    mean_residual: float
    median_residual: float


def closure_residual(
    family: ClosureFamily, n_trials: int = 100, seed: int = 0
) -> tuple[ClosureStats, ClosureStats]:
    """Relative L2 residuals of projected products and sums of random pairs.

    Each trial draws an independent pair from its own child generator, so
    trial k is reproducible regardless of how many trials run.
    """
    prod_res = np.empty(n_trials)
    sum_res = np.empty(n_trials)
    root = np.random.SeedSequence(seed)
    for k, child in enumerate(root.spawn(n_trials)):
        rng = np.random.default_rng(child)
        fa = family.sample(rng)
        fb = family.sample(rng)
        for out, target in ((prod_res, fa * fb), (sum_res, fa + fb)):
            fit = family.project(target)
            out[k] = float(
                np.linalg.norm(fit - target) / np.linalg.norm(target)
            )
    mk = lambda op, arr: ClosureStats(
        family.name,
        op,
        float(arr.max()),
        float(arr.mean()),
        float(np.median(arr)),
    )
    return mk("product", prod_res), mk("sum", sum_res)


# ---------------------------------------------------------------------------
# JSON serialization (tagged unions)
# ---------------------------------------------------------------------------

def params_to_dict(params: ModelParams) -> dict:
    if isinstance(params, VonMisesParams):
        return {
            "type": "von_mises",
            "a": params.a,
            "b": params.b,
            "s": params.s,
            "width": params.width,
        }
    if isinstance(params, GeneralizedPeakParams):
        return {
            "type": "generalized_peak",
            "a": params.a,
            "b": params.b,
            "s": params.s,
            "width": params.width,
            "shape_samples": params.shape.samples.tolist(),
        }
    if isinstance(params, GaussianParams):
        return {
            "type": "gaussian",
            "alpha": params.alpha,
            "beta": params.beta,
            "gamma": params.gamma,
        }
    if isinstance(params, StepParams):
        return {"type": "step", "s": params.s, "delta": params.delta}
    if isinstance(params, BandedParams):
        return {
            "type": "banded",
            "bands": [[list(iv) for iv in band] for band in params.bands],
            "values": list(params.values),
        }
    if isinstance(params, LogLinearParams):
        return {
            "type": "log_linear",
            "coeffs": params.coeffs.tolist(),
            "basis": params.basis.tolist(),
            "grid": params.grid.tolist(),
        }
    raise SensorDataError(f"cannot serialize {type(params)!r}")


def params_from_dict(data: dict) -> ModelParams:
    kind = data.get("type")
    if kind == "von_mises":
        return VonMisesParams(data["a"], data["b"], data["s"], data["width"])
    if kind == "generalized_peak":
        return GeneralizedPeakParams(
            PeriodicShape(np.asarray(data["shape_samples"])),
            data["a"],
            data["b"],
            data["s"],
            data["width"],
        )
    if kind == "gaussian":
        return GaussianParams(data["alpha"], data["beta"], data["gamma"])
    if kind == "step":
        return StepParams(data["s"], data["delta"])
    if kind == "banded":
        bands = tuple(tuple((lo, hi) for lo, hi in band) for band in data["bands"])
        return BandedParams(bands, tuple(data["values"]))
    if kind == "log_linear":
        return LogLinearParams(
            np.asarray(data["coeffs"]),
            np.asarray(data["basis"]),
            np.asarray(data["grid"]),
        )
    raise SensorDataError(f"unknown model type {kind!r}")
