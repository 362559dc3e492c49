"""Two-sided power-law jump kernels and the nonlocal generator.

The generator acting on a function u sampled on a uniform grid is

    G_k u(x) = integral of [u(x+z) - u(x) - u'(x) z] * k(z) |z|^(-alpha-1) dz

with separate intensities k_minus on z < 0 and k_plus on z > 0, and the
extremal operator is the max of G_k over a finite family of intensity
pairs.  The singular integral is split into three ranges:

* |z| < r_cut: second-order Taylor replacement using a centered second
  difference and the analytic small-jump second moment;
* r_cut <= |z| <= z_max: bin-centroid quadrature on log-spaced bins
  (exact mass and first moment per bin), with linear interpolation of u
  and constant extension outside the grid;
* |z| > z_max: constant far-field values u(x_min), u(x_max) with the
  analytic tail mass and first moment.

The first-moment (drift) compensation is discretized with a centered
difference when that keeps every off-diagonal weight nonnegative, and
falls back to upwinding otherwise, so the assembled operator is always
monotone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve


class KernelDomainError(ValueError):
    """Raised when an evaluation point or parameter is outside the domain."""


@dataclass(frozen=True)
class KernelPair:
    """One intensity pair (k_minus, k_plus) of the jump kernel."""

    k_minus: float
    k_plus: float

    def __post_init__(self):
        if not (self.k_minus > 0.0 and self.k_plus > 0.0):
            raise ValueError("kernel intensities must be positive")


@dataclass(frozen=True)
class UncertaintySet:
    """Finite family of kernel pairs with shared stability exponent.

    ``lam`` and ``Lam`` are the ellipticity bounds: every intensity of
    every pair must lie strictly between them.
    """

    alpha: float
    pairs: tuple[KernelPair, ...]
    lam: float
    Lam: float

    def __post_init__(self):
        if not (1.0 < self.alpha < 2.0):
            raise ValueError("alpha must lie strictly in (1, 2)")
        if not (0.0 < self.lam < self.Lam):
            raise ValueError("require 0 < lam < Lam")
        if len(self.pairs) == 0:
            raise ValueError("pairs must be nonempty")
        for p in self.pairs:
            if not (self.lam < p.k_minus < self.Lam and self.lam < p.k_plus < self.Lam):
                raise ValueError(
                    f"pair {p} violates the ellipticity bounds ({self.lam}, {self.Lam})"
                )

    @property
    def k_sum_max(self) -> float:
        return max(p.k_minus + p.k_plus for p in self.pairs)


@dataclass(frozen=True)
class Grid:
    """Uniform space-time lattice with quadrature split parameters.

    ``r_cut`` is the small-jump radius below which the Taylor replacement
    is used; ``z_max`` the far-field truncation radius; ``nq_band`` the
    number of log-spaced quadrature bins per side on [r_cut, z_max].
    """

    x_min: float
    x_max: float
    nx: int
    t_max: float
    nt: int
    r_cut: float
    z_max: float
    nq_band: int = 128

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.nx >= 3 and self.nt >= 1):
            raise ValueError("degenerate grid")
        if not (0.0 < self.r_cut < 1.0 < self.z_max):
            raise ValueError("require 0 < r_cut < 1 < z_max")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)


@dataclass
class Surface:
    """Solution field u(t_i, x_j) on a grid; row 0 is time ``t0``."""

    grid: Grid
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nt + 1, self.grid.nx):
            raise ValueError("values shape does not match grid")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.grid.dt * np.arange(self.grid.nt + 1)


def levy_density(k: KernelPair, alpha: float, z: float) -> float:
    """Density of the jump measure at z (z must be nonzero)."""
    if z == 0.0:
        raise KernelDomainError("jump density is singular at z = 0")
    if not (1.0 < alpha < 2.0):
        raise KernelDomainError("alpha must lie in (1, 2)")
    intensity = k.k_plus if z > 0 else k.k_minus
    return intensity * abs(z) ** (-alpha - 1.0)


def drift_b(k: KernelPair, alpha: float) -> float:
    """First moment of the kernel over |z| >= 1, (k_minus - k_plus)/(alpha - 1)."""
    if not (1.0 < alpha < 2.0):
        raise KernelDomainError("alpha must lie in (1, 2)")
    return (k.k_minus - k.k_plus) / (alpha - 1.0)


def small_jump_second_moment(k: KernelPair, alpha: float, r: float) -> float:
    """Second moment of the kernel over |z| < r, analytic."""
    if r <= 0.0:
        raise KernelDomainError("radius must be positive")
    return (k.k_minus + k.k_plus) * r ** (2.0 - alpha) / (2.0 - alpha)


def band_bins(r_lo: float, z_hi: float, n_bins: int, alpha: float):
    """Log-spaced bins on [r_lo, z_hi] with exact unit-intensity mass and centroid.

    Returns (weights, centroids) for intensity 1; weights scale linearly
    with the kernel intensity.  The centroid is the first-moment center,
    so the rule integrates affine functions of z exactly on each bin.
    """
    edges = np.geomspace(r_lo, z_hi, n_bins + 1)
    lo, hi = edges[:-1], edges[1:]
    mass = (lo ** (-alpha) - hi ** (-alpha)) / alpha
    mom1 = (lo ** (1.0 - alpha) - hi ** (1.0 - alpha)) / (alpha - 1.0)
    return mass, mom1 / mass


@dataclass(frozen=True)
class _BandGeometry:
    """Grid-aligned interpolation data for the band quadrature nodes."""

    weights0: np.ndarray      # unit-intensity bin masses
    centroids: np.ndarray     # bin centroid jump sizes (positive)
    idx_lo: np.ndarray        # floor offset in grid cells
    frac: np.ndarray          # fractional part of centroid / dx
    moment1: float            # unit-intensity first moment over the band
    tail_mass0: float         # unit-intensity mass beyond z_max
    tail_mom0: float          # unit-intensity first moment beyond z_max


@lru_cache(maxsize=64)
def _band_geometry(grid: Grid, alpha: float) -> _BandGeometry:
    w0, zc = band_bins(grid.r_cut, grid.z_max, grid.nq_band, alpha)
    pos = zc / grid.dx
    idx_lo = np.floor(pos).astype(np.int64)
    frac = pos - idx_lo
    tail_mass0 = grid.z_max ** (-alpha) / alpha
    tail_mom0 = grid.z_max ** (1.0 - alpha) / (alpha - 1.0)
    return _BandGeometry(
        weights0=w0,
        centroids=zc,
        idx_lo=idx_lo,
        frac=frac,
        moment1=float(np.sum(w0 * zc)),
        tail_mass0=tail_mass0,
        tail_mom0=tail_mom0,
    )


@dataclass(frozen=True)
class GeneratorStencil:
    """Discrete generator as a translation-invariant stencil plus a
    rank-one far-field term.

    ``taps[m]`` multiplies u(x + (m - half) * dx), with constant extension
    of u beyond the grid.  The far tail (|z| > z_max) contributes
    ``tail_plus * (u(x_max) - u(x)) + tail_minus * (u(x_min) - u(x))``.
    """

    taps: np.ndarray
    half: int
    tail_plus: float
    tail_minus: float

    @property
    def diag_magnitude(self) -> float:
        return float(-self.taps[self.half] + self.tail_plus + self.tail_minus)

    def apply(self, u: np.ndarray) -> np.ndarray:
        u_pad = np.pad(u, self.half, mode="edge")
        out = fftconvolve(u_pad, self.taps[::-1], mode="valid")
        out += self.tail_plus * (u[-1] - u) + self.tail_minus * (u[0] - u)
        return out


@lru_cache(maxsize=256)
def generator_stencil(grid: Grid, k: KernelPair, alpha: float) -> GeneratorStencil:
    """Assemble the monotone stencil for one kernel pair on a grid."""
    geo = _band_geometry(grid, alpha)
    dx = grid.dx
    half = int(np.max(geo.idx_lo)) + 2
    taps = np.zeros(2 * half + 1)
    c = half  # center index

    # Taylor term: 0.5 * sigma2 * centered second difference.
    sigma2 = small_jump_second_moment(k, alpha, grid.r_cut)
    c2 = 0.5 * sigma2 / dx ** 2
    taps[c - 1] += c2
    taps[c + 1] += c2
    taps[c] -= 2.0 * c2

    # Band quadrature, both sides: w * [u(x +/- zc) - u(x)], with the
    # centroid split linearly between its two neighboring grid offsets.
    for sign, intensity in ((+1, k.k_plus), (-1, k.k_minus)):
        w = intensity * geo.weights0
        np.add.at(taps, c + sign * geo.idx_lo, w * (1.0 - geo.frac))
        np.add.at(taps, c + sign * (geo.idx_lo + 1), w * geo.frac)
        taps[c] -= float(np.sum(w))

    # Drift compensation -C * u'(x) with C the signed first moment of the
    # kernel over |z| >= r_cut (band quadrature moments + analytic tail).
    C = (k.k_plus - k.k_minus) * (geo.moment1 + geo.tail_mom0)
    if C != 0.0:
        if min(taps[c - 1], taps[c + 1]) >= abs(C) / (2.0 * dx):
            taps[c - 1] += C / (2.0 * dx)
            taps[c + 1] -= C / (2.0 * dx)
        elif C > 0.0:
            taps[c - 1] += C / dx
            taps[c] -= C / dx
        else:
            taps[c + 1] -= C / dx
            taps[c] += C / dx

    return GeneratorStencil(
        taps=taps,
        half=half,
        tail_plus=k.k_plus * geo.tail_mass0,
        tail_minus=k.k_minus * geo.tail_mass0,
    )


def _check_row(u_row: np.ndarray, grid: Grid) -> np.ndarray:
    u = np.asarray(u_row, dtype=float)
    if u.shape != (grid.nx,):
        raise ValueError("row length does not match grid")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite values in input row")
    return u


def apply_generator_row(u_row: np.ndarray, grid: Grid, k: KernelPair,
                        alpha: float) -> np.ndarray:
    """Generator applied at every node of a row (boundary rows included,
    using constant extension; callers supply their own boundary policy)."""
    u = _check_row(u_row, grid)
    return generator_stencil(grid, k, alpha).apply(u)


def apply_generator(u_row: np.ndarray, grid: Grid, k: KernelPair, alpha: float,
                    j: int) -> float:
    """Generator at interior node j."""
    if not (0 < j < grid.nx - 1):
        raise KernelDomainError("j must be an interior node index")
    return float(apply_generator_row(u_row, grid, k, alpha)[j])


def apply_sup_generator_row(u_row: np.ndarray, grid: Grid,
                            uset: UncertaintySet) -> np.ndarray:
    """Nodewise max of the generator over the uncertainty set."""
    u = _check_row(u_row, grid)
    out = generator_stencil(grid, uset.pairs[0], uset.alpha).apply(u)
    for p in uset.pairs[1:]:
        np.maximum(out, generator_stencil(grid, p, uset.alpha).apply(u), out=out)
    return out


def apply_sup_generator(u_row: np.ndarray, grid: Grid, uset: UncertaintySet,
                        j: int) -> float:
    if not (0 < j < grid.nx - 1):
        raise KernelDomainError("j must be an interior node index")
    return float(apply_sup_generator_row(u_row, grid, uset)[j])


def scheme_stability_constant(grid: Grid, uset: UncertaintySet) -> float:
    """Largest diagonal magnitude of the generator over the set.

    Explicit Euler with dt * constant <= 1 keeps the update monotone.
    """
    return max(
        generator_stencil(grid, p, uset.alpha).diag_magnitude for p in uset.pairs
    )
