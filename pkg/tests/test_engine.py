"""Nested-supremum dynamic program for normalized sums."""

import numpy as np
import pytest
from scipy.signal import fftconvolve

from nlstable.kernels import Grid, KernelPair, UncertaintySet
from nlstable.laws import build_law, law_expectation
from nlstable.engine import (
    LawFamily,
    NarrowGridError,
    NormalizedSumSpec,
    convergence_table,
    clt_error,
    dp_grid_for,
    nested_sum_expectation,
    sup_expectation,
    table_to_csv,
)

from conftest import gaussian

ALPHA = 1.5


def make_family(pairs, alpha=ALPHA, z0=2.0, lam=0.05, big=4.0):
    uset = UncertaintySet(alpha, tuple(KernelPair(*p) for p in pairs),
                          lam, big)
    laws = tuple(build_law(p, alpha, 1.0, z0) for p in uset.pairs)
    return LawFamily(laws, uset)


@pytest.fixture(scope="module")
def fam_sym():
    return make_family([(1.0, 1.0)])


@pytest.fixture(scope="module")
def fam_small():
    # low-intensity pairs keep the DP grid small in the escape check
    return make_family([(0.1, 0.1), (0.12, 0.12)])


def dp_grid(half=320.0, dx=0.1):
    n = int(round(half / dx))
    return Grid(-n * dx, n * dx, 2 * n + 1, 1.0, 1, 0.5, 4.0)


class TestFamilyAndSpec:
    def test_pair_mismatch_rejected(self):
        uset = UncertaintySet(ALPHA, (KernelPair(1.0, 1.0),), 0.05, 4.0)
        law = build_law(KernelPair(0.5, 0.5), ALPHA, 1.0, 2.0)
        with pytest.raises(ValueError, match="does not match"):
            LawFamily((law,), uset)

    def test_count_mismatch_rejected(self, fam_sym):
        uset2 = UncertaintySet(ALPHA, (KernelPair(1.0, 1.0),
                                       KernelPair(0.5, 0.5)), 0.05, 4.0)
        with pytest.raises(ValueError, match="one law per"):
            LawFamily(fam_sym.laws, uset2)

    def test_normalization_identity(self):
        for n in (1, 7, 64, 1000):
            spec = NormalizedSumSpec(n, 1.3, ALPHA)
            assert n * 1.3 ** ALPHA * spec.B_n ** ALPHA \
                == pytest.approx(1.0, rel=1e-12)

    def test_bad_n_rejected(self):
        with pytest.raises(ValueError):
            NormalizedSumSpec(0, 1.0, ALPHA)


class TestSupExpectation:
    def test_singleton_reduces(self, fam_sym):
        assert sup_expectation(gaussian, fam_sym) \
            == law_expectation(gaussian, fam_sym.laws[0])

    def test_mean_zero_both_signs(self, fam_small):
        assert abs(sup_expectation(lambda z: z, fam_small)) < 1e-10
        assert abs(sup_expectation(lambda z: -z, fam_small)) < 1e-10

    def test_two_law_max(self, fam_small):
        phi = lambda z: np.maximum(z, 0.0)
        singles = [law_expectation(phi, law) for law in fam_small.laws]
        assert sup_expectation(phi, fam_small) == max(singles)


class TestNestedSum:
    def test_one_step_unrolls(self, fam_sym):
        spec = NormalizedSumSpec(1, 1.0, ALPHA)
        grid = dp_grid(half=1280.0, dx=0.05)
        val = nested_sum_expectation(gaussian, fam_sym, spec, grid)
        ref = law_expectation(lambda y: gaussian(spec.B_n * y),
                              fam_sym.laws[0])
        assert val == pytest.approx(ref, abs=2e-4)

    def test_constant_fixed_point(self, fam_small):
        for n in (1, 8):
            spec = NormalizedSumSpec(n, 1.0, ALPHA)
            val = nested_sum_expectation(lambda x: np.full_like(x, 2.5),
                                         fam_small, spec, dp_grid())
            assert val == pytest.approx(2.5, abs=1e-10)

    def test_narrow_grid_rejected(self, fam_sym):
        spec = NormalizedSumSpec(16, 1.0, ALPHA)
        with pytest.raises(NarrowGridError, match="widen the grid"):
            nested_sum_expectation(gaussian, fam_sym, spec, dp_grid(half=40.0))

    def test_singleton_matches_direct_convolution(self, fam_sym):
        """n = 4 classical cross-check: convolve the law density four
        times on a fine wide lattice and integrate psi(B_4 s) against it."""
        n = 4
        spec = NormalizedSumSpec(n, 1.0, ALPHA)
        law = fam_sym.laws[0]

        dx = 0.05
        half = 400.0
        s = np.arange(-half, half + dx / 2, dx)
        f = law.density(s)
        f /= np.sum(f) * dx  # absorb truncated tail mass (~2.5e-5)
        conv = f.copy()
        for _ in range(n - 1):
            conv = fftconvolve(conv, f, mode="same") * dx
        ref = np.sum(gaussian(spec.B_n * s) * conv) * dx

        val = nested_sum_expectation(gaussian, fam_sym, spec,
                                     dp_grid(half=1280.0, dx=0.02))
        assert val == pytest.approx(ref, abs=1e-3)


class TestAxiomsSmall:
    """Spot checks of the sublinear-expectation axioms at n = 4; the
    acceptance suite sweeps 20 generated triples at n = 8."""

    def axioms_setup(self, fam_small):
        return NormalizedSumSpec(4, 1.0, ALPHA), dp_grid()

    def test_monotone(self, fam_small):
        spec, grid = self.axioms_setup(fam_small)
        lo = nested_sum_expectation(gaussian, fam_small, spec, grid)
        hi = nested_sum_expectation(lambda x: gaussian(x) + 0.3 * gaussian(x - 1),
                                    fam_small, spec, grid)
        assert lo <= hi + 1e-12

    def test_subadditive(self, fam_small):
        spec, grid = self.axioms_setup(fam_small)
        psi1, psi2 = gaussian, lambda x: 1.0 / (1.0 + (x - 0.5) ** 2)
        both = nested_sum_expectation(lambda x: psi1(x) + psi2(x),
                                      fam_small, spec, grid)
        split = nested_sum_expectation(psi1, fam_small, spec, grid) \
            + nested_sum_expectation(psi2, fam_small, spec, grid)
        assert both <= split + 1e-6 * spec.n

    def test_positively_homogeneous(self, fam_small):
        spec, grid = self.axioms_setup(fam_small)
        base = nested_sum_expectation(gaussian, fam_small, spec, grid)
        scaled = nested_sum_expectation(lambda x: 7.0 * gaussian(x),
                                        fam_small, spec, grid)
        assert scaled == pytest.approx(7.0 * base, rel=1e-12)


class TestTables:
    def test_clt_error_constant(self, fam_small):
        spec = NormalizedSumSpec(4, 1.0, ALPHA)
        err = clt_error(lambda x: np.full_like(x, 1.5), fam_small,
                        fam_small.source_set, spec, dp_grid(), 1.5)
        assert err < 1e-10

    def test_clt_error_pair_mismatch(self, fam_small, fam_sym):
        spec = NormalizedSumSpec(4, 1.0, ALPHA)
        with pytest.raises(ValueError, match="share pairs"):
            clt_error(gaussian, fam_small, fam_sym.source_set, spec,
                      dp_grid(), 0.0)

    def test_dp_grid_refines_with_n(self):
        g8 = dp_grid_for(NormalizedSumSpec(8, 1.0, ALPHA), 2.0, 320.0, 0.1)
        g64 = dp_grid_for(NormalizedSumSpec(64, 1.0, ALPHA), 2.0, 320.0, 0.1)
        assert g64.dx < g8.dx
        assert g64.x_max >= 320.0 and g8.x_max >= 320.0

    def test_convergence_table_csv(self, fam_small):
        rows = convergence_table(gaussian, fam_small, (2, 4), dp_grid(),
                                 0.7, refine=True)
        assert [r[0] for r in rows] == [2, 4]
        text = table_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "n,B_n,nested_value,pide_value,abs_error"
        n, b_n, val, pide, err = lines[1].split(",")
        assert float(pide) == 0.7
        assert float(err) == abs(float(val) - 0.7)
