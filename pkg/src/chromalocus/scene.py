"""Quadrature-ready bundle of sensor, reference measure, and gluing.

A Scene restricts the reweighted reference measure to the glued wavelength
segments and precomputes everything the spectral-model kernels need: node
wavelengths, circular coordinates, per-node masses (normalized to total one),
locus rows, and cumulative arrays for sliding-window integrals.

Peaked-exponential moments are evaluated in the log domain with a max shift,
so amplitudes up to the grid's resolving power never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import ResolutionExceededError, SensorDataError
from .geometry import TorusParam
from .sensor import Density, Sensor, resample_density, trapezoid_weights

FloatArray = NDArray[np.floating]

TWO_PI = 2.0 * np.pi


def _cos_shape(u: FloatArray) -> FloatArray:
    return np.cos(TWO_PI * u)


@dataclass(frozen=True)
class Scene:
    lams: FloatArray       # node wavelengths, ordered by glued coordinate
    tau: FloatArray        # circular coordinate of each node, in [0, 1]
    mass: FloatArray       # reweighted reference mass per node, sums to 1
    point_mass: NDArray[np.bool_]  # nodes that are atoms rather than quadrature
    eta: FloatArray        # locus row per node (n, d)
    torus: TorusParam
    raw_total: float       # mass of the reweighted reference before normalizing

    @property
    def width(self) -> float:
        return self.torus.total_width

    @property
    def white(self) -> FloatArray:
        return self.mass @ self.eta

    @property
    def has_atoms(self) -> bool:
        return bool(self.point_mass.any())

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        sensor: Sensor,
        reference: Density,
        gluing: TorusParam | None = None,
    ) -> "Scene":
        torus = gluing or TorusParam.identity(*sensor.support)
        grid = sensor.grid.samples
        ref = (
            reference
            if reference.grid.samples.shape == grid.shape
            and np.allclose(reference.grid.samples, grid, rtol=0, atol=1e-9)
            else resample_density(reference, sensor.grid)
        )
        from .sensor import locus_matrix

        eta_grid = locus_matrix(sensor)
        chsum = sensor.channel_sum

        lam_parts: list[FloatArray] = []
        mass_parts: list[FloatArray] = []
        for _, _, l0, l1 in torus.pieces:
            inner = grid[(grid > l0 + 1e-12) & (grid < l1 - 1e-12)]
            nodes = np.concatenate([[l0], inner, [l1]])
            w = trapezoid_weights(nodes)
            rho = np.interp(nodes, grid, ref.values * chsum)
            lam_parts.append(nodes)
            mass_parts.append(w * rho)
        lams = np.concatenate(lam_parts)
        mass = np.concatenate(mass_parts)
        point = np.zeros(lams.size, dtype=bool)

        covered = torus.segments
        for alam, aw in ref.atoms:
            if not any(a - 1e-12 <= alam <= b + 1e-12 for a, b in covered):
                continue
            chs = float(np.interp(alam, grid, chsum))
            lams = np.append(lams, alam)
            mass = np.append(mass, aw * chs)
            point = np.append(point, True)

        t = torus.to_torus(lams)
        if np.any(np.isnan(t)):
            raise SensorDataError("scene node fell outside the glued segments")
        order = np.argsort(t, kind="stable")
        lams, mass, point, t = lams[order], mass[order], point[order], t[order]

        eta = np.empty((lams.size, sensor.d))
        for i in range(sensor.d):
            eta[:, i] = np.interp(lams, grid, eta_grid[:, i])
        eta /= eta.sum(axis=1, keepdims=True)

        raw_total = float(mass.sum())
        if not raw_total > 0:
            raise SensorDataError("reference measure has no mass on the glued segments")
        mass = mass / raw_total
        tau = t / torus.total_width
        return cls(lams, tau, mass, point, eta, torus, raw_total)

    # -- cumulative window machinery (piecewise linear in tau) --------------

    def _cumulatives(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        cached = getattr(self, "_cum_cache", None)
        if cached is not None:
            return cached
        tau = np.concatenate([[0.0], self.tau, [1.0]])
        cm = np.concatenate([[0.0], np.cumsum(self.mass)])
        cm = np.concatenate([cm, [cm[-1]]])
        cv = np.vstack(
            [np.zeros((1, self.eta.shape[1])), np.cumsum(self.mass[:, None] * self.eta, axis=0)]
        )
        cv = np.vstack([cv, cv[-1:]])
        # interp needs strictly increasing knots: glue seams duplicate tau
        for i in range(1, tau.size):
            if tau[i] <= tau[i - 1]:
                tau[i] = np.nextafter(tau[i - 1], 2.0)
        cached = (tau, cm, cv)
        object.__setattr__(self, "_cum_cache", cached)
        return cached

    def window_mass_moment(self, sigma: float, delta: float) -> tuple[float, FloatArray]:
        """Mass and first locus moment of the cyclic window [sigma, sigma+delta]."""
        if not 0.0 < delta <= 1.0:
            raise SensorDataError("window width must lie in (0, 1]")
        tau, cm, cv = self._cumulatives()
        s = float(np.mod(sigma, 1.0))
        e = s + float(delta)

        def at(x: float) -> tuple[float, FloatArray]:
            m = float(np.interp(x, tau, cm))
            v = np.array([np.interp(x, tau, cv[:, i]) for i in range(cv.shape[1])])
            return m, v

        if e <= 1.0:
            m1, v1 = at(s)
            m2, v2 = at(e)
            return m2 - m1, v2 - v1
        m1, v1 = at(s)
        m2, v2 = at(1.0)
        m3, v3 = at(e - 1.0)
        return (m2 - m1) + m3, (v2 - v1) + v3

    # -- peaked-exponential kernels ------------------------------------------

    def log_weights(self, a: float, sigma: float, shape=None) -> FloatArray:
        h = shape or _cos_shape
        return float(a) * h(np.mod(self.tau - float(sigma), 1.0))

    def log_partition(self, a: float, sigma: float, shape=None) -> float:
        """log of the mass-weighted integral of exp(a*h(tau - sigma))."""
        if a < 0:
            raise SensorDataError("amplitude must be nonnegative")
        lw = self.log_weights(a, sigma, shape)
        m = lw.max()
        z = float(np.sum(self.mass * np.exp(lw - m)))
        return m + np.log(z)

    def peak_density(self, a: float, sigma: float, shape=None) -> FloatArray:
        """Node values of the normalized peaked density (unit mass)."""
        lw = self.log_weights(a, sigma, shape)
        m = lw.max()
        w = np.exp(lw - m)
        return w / float(np.sum(self.mass * w))

    def peak_moment(self, a: float, sigma: float, shape=None) -> FloatArray:
        """Chromaticity of the normalized peaked density."""
        lw = self.log_weights(a, sigma, shape)
        m = lw.max()
        w = self.mass * np.exp(lw - m)
        return (w @ self.eta) / float(w.sum())

    def effective_nodes(self, a: float, sigma: float, shape=None) -> int:
        """Nodes within two e-folds of the peak; quadrature sanity measure."""
        lw = self.log_weights(a, sigma, shape)
        return int(np.count_nonzero(lw >= lw.max() - 2.0))

    def check_resolution(self, a: float, sigma: float, shape=None) -> None:
        if self.effective_nodes(a, sigma, shape) < 2:
            raise ResolutionExceededError(
                f"amplitude {a:g} concentrates below the wavelength grid resolution"
            )

    def step_moment(self, sigma: float, delta: float) -> FloatArray:
        """Chromaticity of the normalized indicator window."""
        m, v = self.window_mass_moment(sigma, delta)
        if m <= 0:
            raise SensorDataError("window has zero reference mass")
        return v / m

    def step_density(self, sigma: float, delta: float) -> FloatArray:
        """Node values of the normalized window density.

        Normalized against the nodal masses so that sum(mass * f) == 1
        exactly; edge cells are included whole.
        """
        s = float(np.mod(sigma, 1.0))
        e = s + float(delta)
        inside = (self.tau >= s) & (self.tau <= e)
        if e > 1.0:
            inside |= self.tau <= e - 1.0
        m = float(self.mass[inside].sum())
        if m <= 0:
            raise SensorDataError("window has zero reference mass")
        return inside.astype(float) / m
