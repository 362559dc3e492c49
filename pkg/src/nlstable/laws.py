"""Mean-zero laws with exact Pareto tails and a smooth interior patch.

Each law has density b^alpha * k_minus * |z|^(-alpha-1) on z <= -z0 and
b^alpha * k_plus * z^(-alpha-1) on z >= z0, so the tail-deviation
functions beta1, beta2 vanish identically beyond z0.  The interior on
(-z0, z0) is a cubic matched in value and slope to the tails at both
junctions, plus two compactly supported bump terms: an even one carrying
the mass that normalization requires, and an odd one whose amplitude
(the tilt) is calibrated by root finding so the mean is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .kernels import KernelPair, band_bins

_TAIL_FAR = 1e8     # outer edge of the explicit tail quadrature bins
_TAIL_BINS = 2048


class LawBuildError(ValueError):
    """Raised when the requested tail parameters admit no valid density."""


def _tail_scale(law: "AttractedLaw") -> float:
    return law.b_scale ** law.alpha


@dataclass(frozen=True)
class AttractedLaw:
    """One member law: Pareto tails beyond z0, polynomial interior."""

    pair: KernelPair
    alpha: float
    b_scale: float
    z0: float
    cubic: tuple[float, float, float, float]
    bump: float
    tilt: float
    _poly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z0 = self.z0
        even = Polynomial([1.0, 0.0, -2.0 / z0**2, 0.0, 1.0 / z0**4])
        odd = Polynomial([0.0, 1.0 / z0, 0.0, -2.0 / z0**3, 0.0,
                          1.0 / z0**5])
        p = Polynomial(list(self.cubic)) + self.bump * even + self.tilt * odd
        object.__setattr__(self, "_poly", p)

    def density(self, z):
        """Probability density, vectorized; continuous and C1 at +-z0."""
        z = np.asarray(z, dtype=float)
        c = _tail_scale(self)
        out = np.where(
            np.abs(z) < self.z0,
            self._poly(np.clip(z, -self.z0, self.z0)),
            np.where(z < 0.0, self.pair.k_minus, self.pair.k_plus)
            * c * np.abs(np.where(z == 0.0, 1.0, z)) ** (-self.alpha - 1.0),
        )
        return out if out.ndim else float(out)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        c = _tail_scale(self)
        a = self.alpha
        lo_mass = c * self.pair.k_minus / (a * self.z0**a)
        anti = self._poly.integ()
        interior = lo_mass + anti(np.clip(z, -self.z0, self.z0)) \
            - anti(-self.z0)
        zs = np.abs(np.where(z == 0.0, 1.0, z))
        left = c * self.pair.k_minus / (a * zs ** a)
        right = 1.0 - c * self.pair.k_plus / (a * zs ** a)
        out = np.where(z <= -self.z0, left,
                       np.where(z >= self.z0, right, interior))
        return out if out.ndim else float(out)

    @property
    def tail_mass(self) -> float:
        c = _tail_scale(self)
        return c * (self.pair.k_minus + self.pair.k_plus) \
            / (self.alpha * self.z0 ** self.alpha)


def build_law(pair: KernelPair, alpha: float, b_scale: float = 1.0,
              z0: float = 2.0) -> AttractedLaw:
    """Construct and calibrate a law for one kernel pair.

    The cubic is pinned by the four C1 junction conditions; the even
    bump amplitude restores unit mass and the tilt is solved by Brent
    root finding on the mean (affine in the tilt, so this converges in
    a couple of iterations).
    """
    if not (1.0 < alpha < 2.0):
        raise LawBuildError("alpha must lie in (1, 2)")
    if b_scale <= 0.0 or z0 <= 0.0:
        raise LawBuildError("b_scale and z0 must be positive")
    c = b_scale ** alpha
    k_m, k_p = pair.k_minus, pair.k_plus
    tail_mass = c * (k_m + k_p) / (alpha * z0 ** alpha)
    if tail_mass >= 1.0:
        raise LawBuildError(
            f"tail mass {tail_mass:.4f} >= 1 leaves no interior mass; "
            "increase z0 or decrease b_scale")
    tail_moment_pre = c * (k_p - k_m) * z0 ** (1.0 - alpha) / (alpha - 1.0)
    if abs(tail_moment_pre) >= z0 * (1.0 - tail_mass):
        raise LawBuildError(
            f"tail first moment {tail_moment_pre:.4f} exceeds what any "
            f"interior density on (-{z0}, {z0}) can cancel; increase z0")

    # value and slope of the tail density at the junctions
    f_m = c * k_m * z0 ** (-alpha - 1.0)
    f_p = c * k_p * z0 ** (-alpha - 1.0)
    g_m = c * k_m * (alpha + 1.0) * z0 ** (-alpha - 2.0)
    g_p = -c * k_p * (alpha + 1.0) * z0 ** (-alpha - 2.0)
    mat = np.array([
        [1.0, -z0, z0**2, -(z0**3)],
        [1.0, z0, z0**2, z0**3],
        [0.0, 1.0, -2.0 * z0, 3.0 * z0**2],
        [0.0, 1.0, 2.0 * z0, 3.0 * z0**2],
    ])
    c0, c1, c2, c3 = np.linalg.solve(mat, [f_m, f_p, g_m, g_p])

    cubic_mass = 2.0 * c0 * z0 + (2.0 / 3.0) * c2 * z0**3
    bump = (1.0 - tail_mass - cubic_mass) / (16.0 * z0 / 15.0)

    cubic_moment = (2.0 / 3.0) * c1 * z0**3 + (2.0 / 5.0) * c3 * z0**5
    tail_moment = c * (k_p - k_m) * z0 ** (1.0 - alpha) / (alpha - 1.0)
    tilt_gain = 16.0 * z0**2 / 105.0

    def mean_of(tilt):
        return cubic_moment + tail_moment + tilt * tilt_gain

    guess = -(cubic_moment + tail_moment) / tilt_gain
    radius = max(1.0, abs(guess))
    tilt = brentq(mean_of, guess - radius, guess + radius,
                  xtol=1e-15, rtol=1e-15)

    law = AttractedLaw(pair, alpha, b_scale, z0,
                       (float(c0), float(c1), float(c2), float(c3)),
                       float(bump), float(tilt))
    zz = np.linspace(-z0, z0, 4001)
    low = float(np.min(law._poly(zz)))
    if low < -1e-12:
        raise LawBuildError(
            f"interior density dips to {low:.3e} at z={zz[np.argmin(law._poly(zz))]:.3f}; "
            "increase z0")
    return law


def beta_functions(law: AttractedLaw, z: float) -> tuple[float, float]:
    """Tail-deviation pair (beta1, beta2); the off-side entry is nan.

    beta1(z) = F(z)|z|^alpha - b^alpha k_minus/alpha for z < 0 and
    beta2(z) = (1 - F(z)) z^alpha - b^alpha k_plus/alpha for z > 0.
    Both vanish identically for |z| >= z0.
    """
    if z == 0.0:
        raise ValueError("beta functions are undefined at z = 0")
    c = _tail_scale(law)
    if z < 0.0:
        return (float(law.cdf(z) * abs(z) ** law.alpha
                      - c * law.pair.k_minus / law.alpha), float("nan"))
    return (float("nan"),
            float((1.0 - law.cdf(z)) * z ** law.alpha
                  - c * law.pair.k_plus / law.alpha))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _growth_guard(phi, law: AttractedLaw) -> None:
    probes = np.array([_TAIL_FAR, 4.0 * _TAIL_FAR])
    for sgn in (1.0, -1.0):
        v = np.abs(np.asarray(phi(sgn * probes), dtype=float))
        if v[0] > 1e-300 and v[1] > v[0]:
            p = np.log(v[1] / v[0]) / np.log(4.0)
            if p >= law.alpha - 0.02:
                raise ValueError(
                    f"phi grows like |z|^{p:.2f} at infinity, not "
                    f"integrable against alpha={law.alpha} tails")


def law_expectation(phi, law: AttractedLaw) -> float:
    """Integral of phi against the law.

    Interior: Gauss-Legendre against the exact polynomial density
    (exact for polynomial phi up to high degree).  Tails: log-spaced
    bins evaluated at their density-weighted centroids, which makes the
    rule exact for affine phi; the remainder beyond the outermost bin
    is collapsed to a single centroid node so linear phi picks up the
    analytic tail first moment exactly.
    """
    _growth_guard(phi, law)
    z0, a = law.z0, law.alpha
    nodes = 0.5 * z0 * (_GL_NODES + 1.0)  # (0, z0); mirror for the left
    w = 0.5 * z0 * _GL_WEIGHTS
    interior = float(
        np.sum(w * np.asarray(phi(nodes), dtype=float) * law._poly(nodes))
        + np.sum(w * np.asarray(phi(-nodes), dtype=float) * law._poly(-nodes))
    )

    masses, cents = band_bins(z0, _TAIL_FAR, _TAIL_BINS, a)
    c = _tail_scale(law)
    far_mass = _TAIL_FAR ** (-a) / a
    far_cent = (_TAIL_FAR ** (1.0 - a) / (a - 1.0)) / far_mass
    m = np.concatenate([masses, [far_mass]])
    zc = np.concatenate([cents, [far_cent]])
    right = c * law.pair.k_plus * float(np.dot(m, np.asarray(phi(zc), float)))
    left = c * law.pair.k_minus * float(np.dot(m, np.asarray(phi(-zc), float)))
    return interior + right + left


def describe_law(law: AttractedLaw) -> str:
    """Structured text record; round-trips bit-exactly via parse_law."""
    lines = [
        f"alpha={law.alpha:.17g}",
        f"k_minus={law.pair.k_minus:.17g}",
        f"k_plus={law.pair.k_plus:.17g}",
        f"b={law.b_scale:.17g}",
        f"z0={law.z0:.17g}",
        "cubic=" + ",".join(f"{v:.17g}" for v in law.cubic),
        f"bump={law.bump:.17g}",
        f"tilt={law.tilt:.17g}",
    ]
    return "\n".join(lines) + "\n"


def parse_law(text: str) -> AttractedLaw:
    fields = {}
    for line in text.strip().splitlines():
        key, _, val = line.partition("=")
        fields[key.strip()] = val.strip()
    cubic = tuple(float(v) for v in fields["cubic"].split(","))
    if len(cubic) != 4:
        raise ValueError("cubic record must have four coefficients")
    return AttractedLaw(
        KernelPair(float(fields["k_minus"]), float(fields["k_plus"])),
        float(fields["alpha"]), float(fields["b"]), float(fields["z0"]),
        cubic, float(fields["bump"]), float(fields["tilt"]))
