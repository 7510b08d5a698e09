import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import IntegrationWarning, quad
from scipy.stats import kstest

from convpuf.sram_model import (
    L_MAX,
    CellArray,
    ModelParams,
    SramCell,
    cdf_p_e,
    cdf_p_one,
    combine_readouts,
    estimate_cells,
    ignored_fraction,
    majority_vote,
    mean_p_e,
    p_one_from_uniform,
    pdf_p_e,
    pdf_p_one,
    readout,
    readouts,
    sample_cell,
    sample_cells,
    select_cells,
    soft_value,
    soft_values,
)

P = ModelParams()
unit = st.floats(min_value=1e-6, max_value=1 - 1e-6)


def _total_mass(pdf, upper=1.0):
    # integrable x**(lambda1**2 - 1) singularities at the endpoints make
    # QUADPACK warn about roundoff; the estimate is still well inside 1e-6
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        pts = [0.5] if upper > 0.5 else None
        val, _ = quad(pdf, 0.0, upper, points=pts, limit=400)
    return val


def _mp_cdf(x, lam1=0.51, lam2=0.0):
    mp.mp.dps = 40
    phi = lambda v: (1 + mp.erf(v / mp.sqrt(2))) / 2
    inv = mp.sqrt(2) * mp.erfinv(2 * mp.mpf(x) - 1)
    return float(phi(mp.mpf(lam1) * inv - lam2))


class TestCdfPdf:
    def test_center(self):
        assert cdf_p_one(0.5) == pytest.approx(0.5, abs=1e-15)

    def test_limits(self):
        assert cdf_p_one(1e-12) < 1e-3
        assert cdf_p_one(1 - 1e-12) > 1 - 1e-3

    @pytest.mark.parametrize("x", [0.25, 0.01, 0.7, 0.93])
    def test_against_high_precision_erf(self, x):
        assert cdf_p_one(x) == pytest.approx(_mp_cdf(x), rel=1e-12)

    def test_frozen_quarter(self):
        # mpmath, 40 digits
        assert cdf_p_one(0.25) == pytest.approx(0.36542698878424611, rel=1e-13)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            cdf_p_one(bad)
        with pytest.raises(ValueError):
            pdf_p_one(bad)

    def test_pdf_normalised(self):
        assert _total_mass(pdf_p_one) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("x", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_pdf_is_cdf_derivative(self, x):
        h = 1e-5
        fd = (cdf_p_one(x + h) - cdf_p_one(x - h)) / (2 * h)
        assert pdf_p_one(x) == pytest.approx(fd, abs=1e-6)

    @given(unit)
    def test_pdf_symmetric_without_skew(self, x):
        assert pdf_p_one(x) == pytest.approx(pdf_p_one(1 - x), rel=1e-9)

    @given(unit)
    def test_cdf_symmetry(self, x):
        assert cdf_p_one(x) + cdf_p_one(1 - x) == pytest.approx(1.0, abs=1e-12)

    @given(unit, unit)
    def test_cdf_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert cdf_p_one(lo) <= cdf_p_one(hi)

    def test_skewed_params(self):
        p = ModelParams(0.8, 0.3)
        assert cdf_p_one(0.4, p) == pytest.approx(_mp_cdf(0.4, 0.8, 0.3), rel=1e-12)
        assert _total_mass(lambda x: pdf_p_one(x, p)) == pytest.approx(1.0, abs=1e-6)

    def test_lambda1_positive(self):
        with pytest.raises(ValueError):
            ModelParams(lambda1=0.0)


class TestErrorProbability:
    def test_pdf_zero_above_half(self):
        assert pdf_p_e(0.6) == 0.0
        assert pdf_p_e(0.5) == 0.0
        assert np.all(pdf_p_e(np.linspace(0.5, 1.0, 11)) == 0.0)

    def test_cdf_at_half(self):
        assert cdf_p_e(0.5) == pytest.approx(1.0, abs=1e-15)
        assert cdf_p_e(0.0) == 0.0

    def test_pdf_normalised(self):
        assert _total_mass(pdf_p_e, upper=0.5) == pytest.approx(1.0, abs=1e-6)

    def test_mean(self):
        # closed form for lambda2 = 0: arctan(lambda1) / pi
        assert mean_p_e() == pytest.approx(math.atan(0.51) / math.pi, abs=1e-8)
        assert abs(mean_p_e() - 0.15) < 0.01

    def test_domain(self):
        with pytest.raises(ValueError):
            cdf_p_e(1.2)
        with pytest.raises(ValueError):
            pdf_p_e(-0.1)


class TestSampling:
    def test_center(self):
        assert p_one_from_uniform(0.5) == pytest.approx(0.5)

    # near 1 the one-probability carries only absolute double precision
    @given(st.floats(min_value=1e-12, max_value=0.999))
    def test_inverse_transform(self, u):
        assert cdf_p_one(p_one_from_uniform(u)) == pytest.approx(u, abs=1e-9)

    def test_ks_against_cdf(self):
        cells = sample_cells(np.random.default_rng(1), 1_000_000)
        stat = kstest(cells.p_one, lambda x: cdf_p_one(np.clip(x, 1e-300, 1 - 1e-16))).statistic
        assert stat < 0.002

    def test_mean_error_probability(self):
        cells = sample_cells(np.random.default_rng(2), 1_000_000)
        assert abs(cells.p_e.mean() - 0.15) < 0.005

    def test_upper_tail_mirrors_lower(self):
        u = np.array([1e-12, 1e-8, 1e-5])
        assert np.allclose(1 - p_one_from_uniform(1 - u), p_one_from_uniform(u), rtol=0, atol=1e-15)

    def test_sample_cell_fields(self, rng):
        c = sample_cell(rng)
        assert 0 < c.p_one < 1
        assert c.p_e <= 0.5
        assert c.ref_bit == int(c.p_one > 0.5)

    def test_ref_bit_tie(self):
        assert SramCell(0.5).ref_bit == 0

    def test_cell_domain(self):
        with pytest.raises(ValueError):
            SramCell(1.0)
        with pytest.raises(ValueError):
            CellArray(np.array([0.2, 0.0]))


class TestReadout:
    def _within(self, frac, p, n):
        return abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / n) + 1e-12

    def test_nearly_stable_cell(self, rng):
        eps = 1e-3
        c = SramCell(1 - eps)
        n = 100_000
        frac = np.mean([readout(c, rng) for _ in range(n)])
        assert self._within(frac, 1 - eps, n)

    def test_balanced_cell(self, rng):
        r = readouts(CellArray(np.array([0.5])), rng, 100_000)
        assert self._within(r.mean(), 0.5, r.size)

    def test_mismatch_rate(self, rng):
        cells = CellArray(np.array([0.9]))
        r = readouts(cells, rng, 100_000)[:, 0]
        assert self._within(np.mean(r != cells.ref_bits[0]), 0.1, r.size)


class TestSelection:
    def test_all_at_half(self, rng):
        cells = sample_cells(rng, 1000)
        assert np.array_equal(select_cells(cells, 0.5), np.arange(1000))

    def test_direct(self):
        cells = [SramCell(0.05), SramCell(0.75), SramCell(0.85)]
        assert list(select_cells(cells, 0.2)) == [0, 2]

    def test_empty_is_legal(self):
        assert select_cells([SramCell(0.4)], 0.1).size == 0

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            select_cells([SramCell(0.4)], 0.6)

    def test_ignored_fraction_values(self):
        assert ignored_fraction(0.5) == pytest.approx(0.0, abs=1e-12)
        # 2 * Phi(0.51 * Phi^-1(0.8)) - 1 via mpmath
        assert ignored_fraction(0.2) == pytest.approx(0.33224183983445165, rel=1e-10)

    def test_ignored_fraction_matches_sampling(self):
        cells = sample_cells(np.random.default_rng(3), 1_000_000)
        assert abs(np.mean(cells.p_e >= 0.1) - ignored_fraction(0.1)) < 0.005
        assert abs(len(select_cells(cells, 0.2)) / len(cells) - (1 - ignored_fraction(0.2))) < 0.005

    @given(st.floats(min_value=1e-4, max_value=0.5), st.floats(min_value=1e-4, max_value=0.5))
    def test_ignored_fraction_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert ignored_fraction(lo) >= ignored_fraction(hi)

    def test_ignored_fraction_domain(self):
        with pytest.raises(ValueError):
            ignored_fraction(0.0)


class TestSoftValues:
    def test_half_is_zero(self):
        for h in (0, 1):
            for r in (0, 1):
                assert soft_value(h, r, 0.5) == 0.0

    def test_unit_magnitude(self):
        assert soft_value(1, 1, 1 / (1 + math.e)) == pytest.approx(1.0, rel=1e-12)

    def test_mismatch(self):
        assert soft_value(0, 1, 0.1) == pytest.approx(-2.1972245773362196, rel=1e-12)

    def test_clamped(self):
        assert soft_value(0, 0, 1e-30) == L_MAX
        assert soft_value(1, 0, 0.0) == -L_MAX

    @given(st.integers(0, 1), st.integers(0, 1), st.floats(min_value=1e-12, max_value=0.4999))
    def test_sign(self, h, r, p):
        v = soft_value(h, r, p)
        assert (v > 0) == (h ^ r == 0)
        assert soft_value(h ^ 1, r, p) == -v

    @given(st.floats(min_value=1e-12, max_value=0.4999), st.floats(min_value=1e-12, max_value=0.4999))
    def test_magnitude_decreasing(self, a, b):
        lo, hi = sorted((a, b))
        if hi - lo > 1e-9:
            assert soft_value(0, 0, lo) >= soft_value(0, 0, hi)
            if soft_value(0, 0, lo) < L_MAX:
                assert soft_value(0, 0, lo) > soft_value(0, 0, hi)

    def test_vector_matches_scalar(self, rng):
        h = rng.integers(0, 2, 50)
        r = rng.integers(0, 2, 50)
        p = rng.uniform(1e-6, 0.5, 50)
        v = soft_values(h, r, p)
        assert np.allclose(v, [soft_value(a, b, c) for a, b, c in zip(h, r, p)], rtol=0, atol=1e-15)


class TestCombine:
    def test_identity(self, rng):
        v = rng.normal(size=20)
        assert np.array_equal(combine_readouts([v]), v)

    def test_linear(self, rng):
        v = rng.normal(size=20)
        assert np.allclose(combine_readouts([v, v, v]), 3 * v)

    def test_cancel(self):
        assert np.array_equal(combine_readouts([[2.0, 1.0], [-2.0, 1.0]]), [0.0, 2.0])

    def test_clamp(self):
        assert combine_readouts([[30.0], [30.0]])[0] == L_MAX

    def test_mismatch(self):
        with pytest.raises(ValueError):
            combine_readouts([[1.0, 2.0], [1.0]])
        with pytest.raises(ValueError):
            combine_readouts([])

    def test_majority(self):
        bits = np.array([[1, 0, 1, 1], [1, 0, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0]])
        assert list(majority_vote(bits)) == [1, 0, 0, 0]
        assert list(majority_vote(bits[:3])) == [1, 0, 1, 1]


def test_estimate_cells_laplace():
    r = np.array([[1, 0, 0], [1, 0, 1], [1, 0, 0]])
    est = estimate_cells(r)
    assert np.allclose(est.p_one, [4 / 5, 1 / 5, 2 / 5])
    assert list(est.ref_bits) == [1, 0, 0]
