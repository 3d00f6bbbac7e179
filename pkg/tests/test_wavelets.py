import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f2w.lattice import ScalingMatrix2, order_basis
from f2w.wavelets import (FrequencyEvaluator, WaveletFamily, cascade_evaluate, daubechies_filter,
                          expansion_bounds, haar_scaling_hat, haar_wavelet_hat, refinement_symbol,
                          scaling_fourier, wavelet_fourier, wavelet_symbol)

PS = list(range(1, 11))


def test_haar_filter():
    assert np.allclose(daubechies_filter(1), [np.sqrt(2) / 2] * 2, atol=1e-15)


@pytest.mark.parametrize("p", [0, 11, 2.5])
def test_filter_range(p):
    with pytest.raises(ValueError):
        daubechies_filter(p)


@pytest.mark.parametrize("p", PS)
def test_filter_invariants(p):
    h = daubechies_filter(p)
    assert len(h) == 2 * p
    assert abs(h.sum() - np.sqrt(2)) <= 1e-12
    for k in range(p):
        s = np.dot(h[: len(h) - 2 * k], h[2 * k:])
        assert abs(s - (k == 0)) <= 1e-12
    n = np.arange(len(h), dtype=float)
    sign = (-1.0) ** n
    for q in range(p):
        # relative to the size of the terms being cancelled
        assert abs(np.sum(sign * n**q * h)) <= 1e-10 * max(1.0, np.sum(np.abs(n**q * h)))


def test_filter_minimum_phase():
    # energy concentrated at the start of the filter
    for p in (2, 3, 4):
        h = daubechies_filter(p)
        assert h[0] > 0 and np.cumsum(h**2)[p - 1] > 0.5


@pytest.mark.parametrize("p", [1, 2, 3, 5])
@settings(max_examples=25, deadline=None)
@given(xi=st.floats(-4, 4))
def test_qmf_identity(p, xi):
    fam = WaveletFamily.daubechies(p)
    s = abs(refinement_symbol(fam, xi)) ** 2 + abs(refinement_symbol(fam, xi + 0.5)) ** 2
    assert abs(s - 1) <= 1e-12
    assert abs(refinement_symbol(fam, xi) - refinement_symbol(fam, xi + 1)) <= 1e-12


def test_symbol_values():
    haar = WaveletFamily.haar()
    assert refinement_symbol(haar, 0.0) == pytest.approx(1)
    assert abs(refinement_symbol(haar, 0.5)) <= 1e-15
    assert refinement_symbol(haar, 0.25) == pytest.approx((1 - 1j) / 2, abs=1e-15)
    for p in PS:
        assert refinement_symbol(WaveletFamily.daubechies(p), 0.0) == pytest.approx(1, abs=1e-12)


def test_haar_highpass_is_step():
    haar = WaveletFamily.haar()
    assert np.allclose(haar.g, [np.sqrt(2) / 2, -np.sqrt(2) / 2])
    assert abs(wavelet_symbol(haar, 0.0)) <= 1e-15


def test_haar_product_matches_closed_form():
    ev = FrequencyEvaluator(WaveletFamily.haar())
    xi = np.linspace(-64, 64, 4001)
    assert np.max(np.abs(scaling_fourier(ev, xi) - haar_scaling_hat(xi))) <= 1e-10
    assert np.max(np.abs(ev.wavelet_hat(xi) - haar_wavelet_hat(xi))) <= 1e-10
    assert scaling_fourier(ev, 0.5) == pytest.approx(-2j / np.pi, abs=1e-12)
    assert scaling_fourier(ev, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_haar_wavelet_closed_form_shape():
    xi = np.linspace(0.01, 10, 500)
    ref = 1j * np.exp(-1j * np.pi * xi) * np.sin(np.pi * xi / 2) ** 2 / (np.pi * xi / 2)
    assert np.max(np.abs(haar_wavelet_hat(xi) - ref)) <= 1e-14


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_scaling_hat_normalised_and_decaying(p):
    ev = FrequencyEvaluator(WaveletFamily.daubechies(p))
    assert abs(ev.scaling_hat(0.0) - 1) <= 1e-12
    xi = np.logspace(0, 4, 200)
    decay = np.abs(ev.scaling_hat(xi)) * (1 + xi)
    assert np.all(np.isfinite(decay)) and decay.max() < 10


@pytest.mark.parametrize("p", [1, 2, 3])
def test_periodisation_sum(p):
    ev = FrequencyEvaluator(WaveletFamily.daubechies(p))
    xi = np.linspace(-0.5, 0.5, 11)
    partial = np.abs(ev.scaling_hat(xi)) ** 2
    prev = partial.copy()
    for s in range(1, 400):
        partial = partial + np.abs(ev.scaling_hat(xi + s)) ** 2 + np.abs(ev.scaling_hat(xi - s)) ** 2
        assert np.all(partial >= prev - 1e-15)
        prev = partial.copy()
    assert np.max(np.abs(partial - 1)) <= 2e-3


def test_product_matches_cascade_quadrature():
    fam = WaveletFamily.daubechies(2)
    c = cascade_evaluate(fam, 12)
    ev = FrequencyEvaluator(fam)
    for xi in (0.3, 1.7, -2.2):
        quad = c.step * np.sum(c.phi * np.exp(-2j * np.pi * xi * c.x))
        assert abs(quad - ev.scaling_hat(xi)) <= 1e-6


def test_wavelet_generators():
    for p in (1, 2, 3):
        ev = FrequencyEvaluator(WaveletFamily.daubechies(p))
        for k in (1, 2, 3):
            assert abs(wavelet_fourier(ev, k, np.array([0.0, 0.0]))) <= 1e-12
        a, b = 0.37, -1.21
        assert ev.wavelet_hat_2d(1, a, b) == pytest.approx(ev.wavelet_hat_2d(2, b, a), abs=1e-15)
    ev = FrequencyEvaluator(WaveletFamily.haar())
    x = np.array([0.4, 2.3])
    assert abs(wavelet_fourier(ev, 3, x) - haar_wavelet_hat(0.4) * haar_wavelet_hat(2.3)) <= 1e-10
    with pytest.raises(ValueError):
        ev.wavelet_hat_2d(4, 0.1, 0.1)


def test_cascade_haar():
    c = cascade_evaluate(WaveletFamily.haar(), 6)
    inside = c.x < 1
    assert np.all(c.phi[inside] == 1.0)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_cascade_partition_and_orthogonality(p):
    fam = WaveletFamily.daubechies(p)
    # Db2 is only Hoelder-0.55, so the Riemann sum needs a fine grid
    c = cascade_evaluate(fam, 14)
    step = 2**14
    x = np.linspace(0.0, 1.0, 17)[:-1]
    total = sum(c(x + n) for n in range(-2 * p, 2 * p + 1))
    assert np.max(np.abs(total - 1)) <= 1e-8
    shifted = np.concatenate([c.phi[step:], np.zeros(step)])
    assert abs(c.step * np.sum(c.phi * shifted)) <= 1e-6
    assert abs(c.step * np.sum(c.phi**2) - 1) <= 1e-6


def test_cascade_rejects_bad_level():
    with pytest.raises(ValueError):
        cascade_evaluate(WaveletFamily.haar(), 0)


def test_centered_family_support():
    fam = WaveletFamily.daubechies(3, centered=True)
    assert fam.support == (-2, 3)
    c = cascade_evaluate(fam, 8)
    assert abs(c.step * np.sum(c.phi) - 1) <= 1e-6


def _brute_rectangle(A, a, J):
    """Scale-J translates whose support box overlaps some element support (diagonal A)."""
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for b in order_basis(A, a, J):
        D = np.diag(A.power(J - b.scale)).astype(float)
        slo = D * np.array([b.m1, b.m2])
        shi = D * (np.array([b.m1, b.m2]) + a)
        # l + (0, a) overlaps (slo, shi) iff slo - a < l < shi
        lo = np.minimum(lo, np.floor(slo - a) + 1)
        hi = np.maximum(hi, np.ceil(shi) - 1)
    return int(hi[0]), int(hi[1]), int(lo[0]), int(lo[1])


@pytest.mark.parametrize("A", [ScalingMatrix2.diag(2, 2), ScalingMatrix2.diag(2, 3)])
def test_expansion_bounds_contain_brute_force(A):
    for a in (1, 2, 3):
        for J in range(4):
            L1, L2, L3, L4 = expansion_bounds(A, a, J)
            b1, b2, b3, b4 = _brute_rectangle(A, a, J)
            assert L3 <= b3 and L4 <= b4 and b1 <= L1 and b2 <= L2


def test_expansion_bounds_inside_loose_form():
    A = ScalingMatrix2.diag(2, 2)
    for a in (1, 2, 3):
        for J in range(6):
            L1, L2, L3, L4 = expansion_bounds(A, a, J)
            assert L1 <= 2**J * (3 * a - 1) and L2 <= 2**J * (3 * a - 1)
            assert L3 >= -a + 2**J * (-a + 1) and L4 >= -a + 2**J * (-a + 1)
    L1, L2, L3, L4 = expansion_bounds(A, 1, 0)
    assert L3 <= 0 <= L1 and L4 <= 0 <= L2
