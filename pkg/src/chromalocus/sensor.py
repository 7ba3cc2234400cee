"""Sensor responses, spectral densities, and the maps between them.

A sensor is a matrix of nonnegative channel responses sampled on a uniform
wavelength grid.  Integrating a spectral density against the channels gives
a response vector ("color"); projecting that vector onto the unit-sum plane
gives a chromaticity.  The per-wavelength chromaticity trace is the spectral
locus consumed by :mod:`chromalocus.geometry`.

Quadrature is the uniform-grid trapezoid rule throughout, plus exact point
terms for any atoms a density carries.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSensorError, GridMismatchError, SensorDataError

FloatArray = NDArray[np.floating]

# Support trim: channels below this fraction of their own peak count as dead.
SUPPORT_TRIM_REL = 1e-12
# Smallest grid accepted for trapezoid quadrature.
MIN_GRID_SAMPLES = 16


def _as_float_array(values, name: str) -> FloatArray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SensorDataError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniformly spaced, strictly increasing wavelength samples."""

    samples: FloatArray

    def __post_init__(self):
        samples = _as_float_array(self.samples, "wavelength grid")
        if samples.ndim != 1:
            raise SensorDataError("wavelength grid must be one-dimensional")
        if samples.size < MIN_GRID_SAMPLES:
            raise SensorDataError(
                f"wavelength grid needs at least {MIN_GRID_SAMPLES} samples, got {samples.size}"
            )
        steps = np.diff(samples)
        if np.any(steps <= 0):
            raise SensorDataError("wavelength grid must be strictly increasing")
        h = steps[0]
        if not np.allclose(steps, h, rtol=1e-9, atol=1e-9 * max(h, 1.0)):
            raise SensorDataError("wavelength grid must be uniformly spaced")
        if samples[0] < 0:
            raise SensorDataError("wavelengths must be nonnegative")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def uniform(cls, lambda_min: float, lambda_max: float, n: int) -> "WavelengthGrid":
        return cls(np.linspace(float(lambda_min), float(lambda_max), int(n)))

    @property
    def lambda_min(self) -> float:
        return float(self.samples[0])

    @property
    def lambda_max(self) -> float:
        return float(self.samples[-1])

    @property
    def spacing(self) -> float:
        return float(self.samples[1] - self.samples[0])

    @property
    def n(self) -> int:
        return int(self.samples.size)

    @property
    def span(self) -> float:
        return self.lambda_max - self.lambda_min


@dataclass(frozen=True)
class Sensor:
    """Channel responses on a shared grid.

    ``channels`` has shape (d, n) with d >= 2.  Responses must be
    nonnegative, at least one channel must be strictly positive at every
    grid point, and the rows must span all d dimensions (otherwise every
    color collapses into a subspace and chromaticity is meaningless).
    """

    grid: WavelengthGrid
    channels: FloatArray

    def __post_init__(self):
        channels = _as_float_array(self.channels, "sensor channels")
        if channels.ndim != 2:
            raise SensorDataError("sensor channels must be a 2-d array (d, n)")
        d, n = channels.shape
        if d < 2:
            raise SensorDataError("sensor needs at least 2 channels")
        if n != self.grid.n:
            raise SensorDataError(
                f"channel sample count {n} does not match grid length {self.grid.n}"
            )
        if channels.min() < -1e-9:
            raise SensorDataError("sensor responses must be nonnegative")
        channels = np.clip(channels, 0.0, None)
        sums = channels.sum(axis=0)
        if np.any(sums[1:-1] <= 0.0):
            where = self.grid.samples[1:-1][sums[1:-1] <= 0.0][0]
            raise DegenerateSensorError(
                f"sensor response vanishes inside its support (near {where:g})"
            )
        peak = channels.max(axis=1)
        if np.any(peak <= 0.0):
            raise DegenerateSensorError("sensor has an identically zero channel")
        if np.linalg.matrix_rank(channels) < d:
            raise DegenerateSensorError("sensor channels are linearly dependent; color cone is degenerate")
        channels.setflags(write=False)
        object.__setattr__(self, "channels", channels)

    @property
    def d(self) -> int:
        return int(self.channels.shape[0])

    @property
    def support(self) -> tuple[float, float]:
        return (self.grid.lambda_min, self.grid.lambda_max)

    @property
    def channel_sum(self) -> FloatArray:
        """Total response per grid point (the reweighting factor)."""
        return self.channels.sum(axis=0)


@dataclass(frozen=True)
class Density:
    """Nonnegative spectral density: values on a grid plus optional atoms.

    Atoms are (wavelength, weight) point masses and enter every integral as
    exact point terms.
    """

    grid: WavelengthGrid
    values: FloatArray
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        values = _as_float_array(self.values, "density values")
        if values.shape != (self.grid.n,):
            raise SensorDataError("density values must match the grid length")
        if values.min() < -1e-12:
            raise SensorDataError("density values must be nonnegative")
        values = np.clip(values, 0.0, None)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        atoms = tuple((float(l), float(w)) for (l, w) in self.atoms)
        for lam, w in atoms:
            if not (self.grid.lambda_min <= lam <= self.grid.lambda_max):
                raise SensorDataError(f"atom at {lam:g} lies outside the grid")
            if w < 0 or not np.isfinite(w) or not np.isfinite(lam):
                raise SensorDataError("atom weights must be finite and nonnegative")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def uniform(cls, grid: WavelengthGrid, value: float = 1.0) -> "Density":
        return cls(grid, np.full(grid.n, float(value)))


@dataclass(frozen=True)
class Color:
    """Sensor response vector, componentwise nonnegative."""

    components: FloatArray

    def __post_init__(self):
        comp = _as_float_array(self.components, "color")
        if comp.ndim != 1 or comp.size < 2:
            raise SensorDataError("color must be a vector of length >= 2")
        if comp.min() < -1e-9:
            raise SensorDataError("color components must be nonnegative")
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @property
    def total(self) -> float:
        return float(self.components.sum())


@dataclass(frozen=True)
class Chromaticity:
    """Point of the unit-sum plane.  Components sum to one (tolerance 1e-12);
    physically realizable points are additionally nonnegative, but plane
    points built for geometric probing may dip below zero."""

    components: FloatArray

    def __post_init__(self):
        comp = _as_float_array(self.components, "chromaticity")
        if comp.ndim != 1 or comp.size < 2:
            raise SensorDataError("chromaticity must be a vector of length >= 2")
        if abs(comp.sum() - 1.0) > 1e-12:
            raise SensorDataError(
                f"chromaticity components must sum to 1 (got {comp.sum()!r})"
            )
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)


def trapezoid_weights(samples: FloatArray) -> FloatArray:
    """Trapezoid quadrature weights for (possibly non-uniform) samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return np.zeros_like(samples)
    w = np.empty_like(samples)
    gaps = np.diff(samples)
    w[0] = gaps[0] / 2.0
    w[-1] = gaps[-1] / 2.0
    w[1:-1] = (gaps[:-1] + gaps[1:]) / 2.0
    return w


# ---------------------------------------------------------------------------
# CSV interface
#
# Layout: header "wavelength,ch0,ch1,..." followed by one row per grid
# point.  Lines of the form "# atom,<wavelength>,<weight>" carry point
# masses (densities only).  Other "#" lines are comments.
# ---------------------------------------------------------------------------

def _read_table(source) -> tuple[list[str], FloatArray, list[tuple[float, float]]]:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise SensorDataError(f"cannot read {source}: {exc}") from exc
    elif isinstance(source, io.TextIOBase):
        text = source.read()
    else:
        raise SensorDataError(f"unsupported source type {type(source)!r}")

    header: list[str] | None = None
    rows: list[list[float]] = []
    atoms: list[tuple[float, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("atom"):
                parts = [p.strip() for p in body.split(",")]
                if len(parts) != 3:
                    raise SensorDataError(f"line {lineno}: malformed atom line {raw!r}")
                try:
                    atoms.append((float(parts[1]), float(parts[2])))
                except ValueError as exc:
                    raise SensorDataError(f"line {lineno}: bad atom numbers") from exc
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            try:
                float(cells[0])
            except ValueError:
                header = cells
                continue
            header = []
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise SensorDataError(f"line {lineno}: non-numeric cell in {raw!r}") from exc
    if not rows:
        raise SensorDataError("no data rows found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise SensorDataError("ragged rows in table")
    return (header or [], np.asarray(rows, dtype=float), atoms)


def load_sensor(source) -> Sensor:
    """Read a sensor table and trim dead margins.

    The kept support is the smallest closed interval outside which every
    channel falls below ``SUPPORT_TRIM_REL`` of its own peak.
    """
    _, data, atoms = _read_table(source)
    if atoms:
        raise SensorDataError("sensor tables cannot carry atom lines")
    if data.shape[1] < 3:
        raise SensorDataError("sensor table needs a wavelength column plus >= 2 channels")
    lam = data[:, 0]
    channels = data[:, 1:].T
    if np.any(np.diff(lam) <= 0):
        raise SensorDataError("sensor wavelengths must be strictly increasing")
    if channels.min() < -1e-9:
        raise SensorDataError("sensor responses must be nonnegative")
    channels = np.clip(channels, 0.0, None)

    thresh = SUPPORT_TRIM_REL * channels.max(axis=1, keepdims=True)
    alive = np.any(channels >= thresh, axis=0) & (channels.sum(axis=0) > 0.0)
    idx = np.nonzero(alive)[0]
    if idx.size == 0:
        raise SensorDataError("sensor is identically zero")
    lo, hi = idx[0], idx[-1]
    lam, channels = lam[lo : hi + 1], channels[:, lo : hi + 1]
    if lam.size < MIN_GRID_SAMPLES:
        raise SensorDataError("sensor support too short after trimming dead margins")
    return Sensor(WavelengthGrid(lam), channels)


def load_density(source, grid: WavelengthGrid | None = None) -> Density:
    """Read a density table (wavelength plus one value column, atoms allowed)."""
    _, data, atoms = _read_table(source)
    if data.shape[1] != 2:
        raise SensorDataError("density table needs exactly wavelength and value columns")
    parsed = Density(WavelengthGrid(data[:, 0]), data[:, 1], tuple(atoms))
    if grid is not None:
        parsed = resample_density(parsed, grid)
    return parsed


def save_sensor_csv(sensor: Sensor, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("wavelength," + ",".join(f"ch{i}" for i in range(sensor.d)) + "\n")
        for j in range(sensor.grid.n):
            cells = [format(sensor.grid.samples[j], ".17g")]
            cells += [format(sensor.channels[i, j], ".17g") for i in range(sensor.d)]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# Core maps
# ---------------------------------------------------------------------------

def resample_density(density: Density, grid: WavelengthGrid) -> Density:
    """Linear-interpolation resample; values outside the old range become 0.
    Atoms are kept but must land inside the new grid."""
    vals = np.interp(grid.samples, density.grid.samples, density.values, left=0.0, right=0.0)
    for lam, _ in density.atoms:
        if not (grid.lambda_min <= lam <= grid.lambda_max):
            raise GridMismatchError(f"atom at {lam:g} falls outside the target grid")
    return Density(grid, vals, density.atoms)


def _interp_channels(sensor: Sensor, lams: FloatArray) -> FloatArray:
    """Channel responses at arbitrary wavelengths, shape (d, len(lams))."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams < sensor.grid.lambda_min - 1e-12) or np.any(
        lams > sensor.grid.lambda_max + 1e-12
    ):
        raise GridMismatchError("wavelength outside sensor support")
    out = np.empty((sensor.d, lams.size))
    for i in range(sensor.d):
        out[i] = np.interp(lams, sensor.grid.samples, sensor.channels[i])
    return out


def tristimulus(sensor: Sensor, spd: Density) -> Color:
    """Response vector of a density: trapezoid integral plus atom terms."""
    if spd.grid.samples.shape == sensor.grid.samples.shape and np.allclose(
        spd.grid.samples, sensor.grid.samples, rtol=0, atol=1e-9
    ):
        vals = spd.values
    else:
        vals = resample_density(spd, sensor.grid).values
    w = trapezoid_weights(sensor.grid.samples)
    comp = sensor.channels @ (w * vals)
    for lam, weight in spd.atoms:
        comp = comp + weight * _interp_channels(sensor, lam)[:, 0]
    return Color(comp)


def locus_matrix(sensor: Sensor) -> FloatArray:
    """Normalized response at every grid point, shape (n, d), rows sum to 1.

    Where the total response vanishes at a support endpoint the row is the
    one-sided linear extension of the two innermost well-defined rows,
    renormalized to unit sum.
    """
    sums = sensor.channel_sum
    tiny = sums.max() * 1e-300
    valid = sums > tiny
    eta = np.zeros((sensor.grid.n, sensor.d))
    eta[valid] = (sensor.channels[:, valid] / sums[valid]).T
    bad = np.nonzero(~valid)[0]
    if bad.size:
        good = np.nonzero(valid)[0]
        if good.size < 2:
            raise DegenerateSensorError("not enough live samples to extend the locus")
        lam = sensor.grid.samples
        for j in bad:
            if j < good[0]:
                i0, i1 = good[0], good[1]
            elif j > good[-1]:
                i0, i1 = good[-2], good[-1]
            else:
                raise DegenerateSensorError(
                    f"sensor response vanishes inside support at {lam[j]:g}"
                )
            t = (lam[j] - lam[i0]) / (lam[i1] - lam[i0])
            row = eta[i0] + t * (eta[i1] - eta[i0])
            s = row.sum()
            if s <= 0:
                raise DegenerateSensorError("locus extension failed: degenerate endpoint")
            eta[j] = row / s
    return eta


def normalized_response(sensor: Sensor, lam: float) -> Chromaticity:
    """Chromaticity of the sensor at one wavelength (locus point)."""
    lam = float(lam)
    chi = _interp_channels(sensor, lam)[:, 0]
    s = chi.sum()
    if s > sensor.channel_sum.max() * 1e-12:
        return Chromaticity(chi / s)
    # Vanishing total: fall back to the endpoint-extended locus table.
    eta = locus_matrix(sensor)
    row = np.array([np.interp(lam, sensor.grid.samples, eta[:, i]) for i in range(sensor.d)])
    s = row.sum()
    if s <= 0:
        raise DegenerateSensorError(f"response vanishes at {lam:g} with no usable extension")
    return Chromaticity(row / s)


def reweighted_density(sensor: Sensor, spd: Density) -> Density:
    """Density multiplied by the total channel response (pointwise)."""
    if spd.grid.samples.shape == sensor.grid.samples.shape and np.allclose(
        spd.grid.samples, sensor.grid.samples, rtol=0, atol=1e-9
    ):
        base = spd
    else:
        base = resample_density(spd, sensor.grid)
    vals = base.values * sensor.channel_sum
    atoms = tuple(
        (lam, w * float(_interp_channels(sensor, lam).sum())) for lam, w in base.atoms
    )
    return Density(sensor.grid, vals, atoms)


def color_of_density(sensor: Sensor, reference: Density, f: FloatArray) -> Color:
    """Response of ``f`` times the reference measure.

    ``f`` is sampled on the sensor grid.  Atom terms of the reference pick
    up the interpolated value of ``f`` at the atom wavelength.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (sensor.grid.n,):
        raise GridMismatchError("f must be sampled on the sensor grid")
    if not np.all(np.isfinite(f)):
        raise SensorDataError("f contains non-finite values")
    if f.min() < -1e-12:
        raise SensorDataError("f must be nonnegative")
    f = np.clip(f, 0.0, None)
    ref = (
        reference
        if reference.grid.samples.shape == sensor.grid.samples.shape
        and np.allclose(reference.grid.samples, sensor.grid.samples, rtol=0, atol=1e-9)
        else resample_density(reference, sensor.grid)
    )
    w = trapezoid_weights(sensor.grid.samples)
    comp = sensor.channels @ (w * ref.values * f)
    for lam, weight in ref.atoms:
        fval = float(np.interp(lam, sensor.grid.samples, f))
        comp = comp + weight * fval * _interp_channels(sensor, lam)[:, 0]
    return Color(comp)


def chromaticity(color: Color) -> Chromaticity:
    """Project a color onto the unit-sum plane."""
    total = color.total
    if not total > 0.0:
        raise SensorDataError("cannot normalize a zero color")
    return Chromaticity(color.components / total)


def white_point(sensor: Sensor, reference: Density) -> Chromaticity:
    """Chromaticity of the reference itself (f identically one)."""
    return chromaticity(color_of_density(sensor, reference, np.ones(sensor.grid.n)))
