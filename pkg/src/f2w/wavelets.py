"""Daubechies filters, Fourier transforms of scaling/wavelet functions,
cascade evaluation and scale-J expansion bounds."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, floor, ceil

import mpmath
import numpy as np

from .lattice import ScalingMatrix2

SQRT2 = np.sqrt(2.0)
MAX_P = 10


def daubechies_filter(p: int) -> np.ndarray:
    """Orthonormal Daubechies lowpass filter with p vanishing moments.

    Spectral factorisation of cos^{2p}(pi xi) P(sin^2(pi xi)); the roots of the
    polynomial factor are taken outside the unit circle in z = exp(-2 pi i xi),
    which gives the usual minimum-phase ordering h_0, ..., h_{2p-1}.
    """
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_P:
        raise ValueError(f"vanishing moments p must be an integer in [1, {MAX_P}], got {p!r}")
    p = int(p)
    if p == 1:
        return np.array([1.0, 1.0]) / SQRT2
    with mpmath.workdps(60):
        # z^{p-1} P(y) with y = (2 - z - 1/z)/4, so y z = (-1 + 2z - z^2)/4
        yz = [mpmath.mpf(-1) / 4, mpmath.mpf(2) / 4, mpmath.mpf(-1) / 4]
        q = [mpmath.mpf(0)] * (2 * p - 1)  # ascending powers of z
        for k in range(p):
            term = [mpmath.mpf(comb(p - 1 + k, k))]
            for _ in range(k):
                term = _polymul(term, yz)
            # shift by z^{p-1-k}
            for i, c in enumerate(term):
                q[i + p - 1 - k] += c
        roots = mpmath.polyroots(q[::-1], maxsteps=500, extraprec=200)
        outer = [r for r in roots if abs(r) > 1]
        if len(outer) != p - 1:
            raise ArithmeticError("spectral factorisation failed to split roots")
        poly = [mpmath.mpc(1)]
        for _ in range(p):
            poly = _polymul(poly, [mpmath.mpc(1), mpmath.mpc(1)])
        for r in outer:
            poly = _polymul(poly, [-r, mpmath.mpc(1)])
        s = sum(poly)
        h = [mpmath.re(c / s) * mpmath.sqrt(2) for c in poly]
    return np.array([float(c) for c in h])


def _polymul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


@dataclass(frozen=True)
class WaveletFamily:
    """1D orthonormal Daubechies family.

    ``offset`` is the index of the first filter tap: 0 puts supp(phi) in
    [0, 2p-1], ``-(p-1)`` centres it at [-p+1, p].
    """

    p: int
    h: tuple
    offset: int = 0

    @classmethod
    def daubechies(cls, p: int, centered: bool = False) -> "WaveletFamily":
        return cls(p, tuple(daubechies_filter(p)), -(p - 1) if centered else 0)

    @classmethod
    def haar(cls) -> "WaveletFamily":
        return cls.daubechies(1)

    def recentered(self) -> "WaveletFamily":
        return WaveletFamily(self.p, self.h, -(self.p - 1))

    @property
    def a(self) -> int:
        return 2 * self.p - 1

    @property
    def support(self) -> tuple[int, int]:
        return self.offset, self.offset + 2 * self.p - 1

    @cached_property
    def taps(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)

    @cached_property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.h))

    @cached_property
    def g(self) -> np.ndarray:
        """Highpass taps on the same index set as ``h``.

        g_n = (-1)^n h_{K-n} with K = 2*offset + 2p - 1, so psi has the same
        support as phi.
        """
        K = 2 * self.offset + 2 * self.p - 1
        n = self.indices
        return ((-1.0) ** np.abs(n)) * self.taps[K - n - self.offset]

    @cached_property
    def moments(self) -> np.ndarray:
        """Moments int x^k phi(x) dx, k = 0..2p+2, from the refinement equation."""
        kmax = 2 * self.p + 3
        n = self.indices.astype(float)
        mom = np.zeros(kmax)
        mom[0] = 1.0
        for k in range(1, kmax):
            acc = 0.0
            for r in range(k):
                acc += comb(k, r) * np.sum(self.taps * n ** (k - r)) * mom[r]
            mom[k] = acc * 2.0 ** (-k - 0.5) / (1 - 2.0 ** (-k))
        return mom


def refinement_symbol(family: WaveletFamily, xi) -> np.ndarray:
    """m0(xi) = 2^{-1/2} sum_n h_n exp(-2 pi i n xi)."""
    xi = np.asarray(xi, dtype=float)
    ph = np.exp(-2j * np.pi * np.multiply.outer(xi, family.indices))
    return ph @ family.taps / SQRT2


def wavelet_symbol(family: WaveletFamily, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    ph = np.exp(-2j * np.pi * np.multiply.outer(xi, family.indices))
    return ph @ family.g / SQRT2


class FrequencyEvaluator:
    """Evaluates phi-hat and psi-hat through the truncated infinite product."""

    def __init__(self, family: WaveletFamily, depth: int = 40):
        self.family = family
        self.depth = depth
        mom = family.moments
        self._m1, self._m2 = mom[1], mom[2]

    def _tail(self, eta):
        # second-order Taylor of phi-hat near zero
        w = 2 * np.pi * eta
        return 1 - 1j * w * self._m1 - 0.5 * w * w * self._m2

    def scaling_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        scale = 2.0 ** -self.depth
        out = np.asarray(self._tail(xi * scale), dtype=complex)
        h, n = self.family.taps / SQRT2, self.family.indices
        for k in range(1, self.depth + 1):
            x = xi * 2.0 ** -k
            out *= np.exp(-2j * np.pi * np.multiply.outer(x, n)) @ h
        return out

    def truncation_bound(self, xi) -> np.ndarray:
        """Rough bound on the error of the tail model at depth ``depth``."""
        eta = np.abs(np.asarray(xi, dtype=float)) * 2.0 ** -self.depth
        m3 = np.abs(self.family.moments[3]) + 1.0
        return (2 * np.pi * eta) ** 3 * m3

    def wavelet_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return wavelet_symbol(self.family, xi / 2) * self.scaling_hat(xi / 2)

    # separable 2D generators: 1 = phi x psi, 2 = psi x phi, 3 = psi x psi
    def scaling_hat_2d(self, xi1, xi2):
        return self.scaling_hat(xi1) * self.scaling_hat(xi2)

    def wavelet_hat_2d(self, k: int, xi1, xi2):
        if k == 1:
            return self.scaling_hat(xi1) * self.wavelet_hat(xi2)
        if k == 2:
            return self.wavelet_hat(xi1) * self.scaling_hat(xi2)
        if k == 3:
            return self.wavelet_hat(xi1) * self.wavelet_hat(xi2)
        raise ValueError(f"generator index must be 1, 2 or 3, got {k}")


def scaling_fourier(evaluator: FrequencyEvaluator, xi):
    return evaluator.scaling_hat(xi)


def wavelet_fourier(evaluator: FrequencyEvaluator, k: int, xi):
    xi = np.asarray(xi, dtype=float)
    return evaluator.wavelet_hat_2d(k, xi[..., 0], xi[..., 1])


def haar_scaling_hat(xi):
    xi = np.asarray(xi, dtype=float)
    return np.exp(-1j * np.pi * xi) * np.sinc(xi)


def haar_wavelet_hat(xi):
    xi = np.asarray(xi, dtype=float)
    half = xi / 2
    return 1j * np.exp(-1j * np.pi * xi) * np.sin(np.pi * half) * np.sinc(half)


@dataclass(frozen=True)
class CascadeSamples:
    family: WaveletFamily
    level: int
    x: np.ndarray
    phi: np.ndarray

    @property
    def step(self) -> float:
        return 2.0 ** -self.level

    def psi(self) -> tuple[np.ndarray, np.ndarray]:
        """psi on the grid of spacing 2^{-(level-1)} over the same support."""
        fam, L = self.family, self.level
        lo, hi = fam.support
        k = np.arange((hi - lo) * 2 ** (L - 1) + 1)
        x = lo + k * 2.0 ** -(L - 1)
        out = np.zeros(len(k))
        for gn, n in zip(fam.g, fam.indices):
            # phi(2x - n) sits on the level-L grid
            idx = (2 * x - n - lo) * 2**L
            idx = np.rint(idx).astype(int)
            ok = (idx >= 0) & (idx < len(self.phi))
            out[ok] += SQRT2 * gn * self.phi[idx[ok]]
        return x, out

    def __call__(self, x) -> np.ndarray:
        """Linear interpolation between dyadic samples (zero off support)."""
        return np.interp(x, self.x, self.phi, left=0.0, right=0.0)


def cascade_evaluate(family: WaveletFamily, levels: int, tol: float = 1e-10,
                     max_iter: int = 5000) -> CascadeSamples:
    """Fixed-point iteration of the refinement equation on the 2^-L grid."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    lo, hi = family.support
    scale = 2**levels
    k = np.arange((hi - lo) * scale + 1)
    x = lo + k / scale
    phi = ((x >= lo) & (x < lo + 1)).astype(float)
    # phi_new[k] = sqrt2 sum_n h_n phi_old[2k - (n - lo) * scale + lo*scale]
    src = []
    for hn, n in zip(family.taps, family.indices):
        idx = 2 * k + (lo - n) * scale
        ok = (idx >= 0) & (idx < len(k))
        src.append((SQRT2 * hn, ok, idx[ok]))
    for _ in range(max_iter):
        new = np.zeros_like(phi)
        for w, ok, idx in src:
            new[ok] += w * phi[idx]
        diff = np.max(np.abs(new - phi))
        phi = new
        if diff < tol:
            return CascadeSamples(family, levels, x, phi)
    raise ArithmeticError(f"cascade did not converge in {max_iter} iterations (last change {diff:.3e})")


def expansion_bounds(A: ScalingMatrix2, a: int, J: int) -> tuple[int, int, int, int]:
    """Scale-J translate ranges (L1, L2, L3, L4) with L3 <= l1 <= L1, L4 <= l2 <= L2.

    Every element of V_0 + W_0 + ... + W_{J-1} (generators supported in
    [0,a]^2) has nonzero inner product with phi_{J,l} only for l in this box.
    """
    boxes = [(0, np.array([-a + 1, -a + 1]), np.array([a - 1, a - 1]))]
    for j in range(J):
        P = A.power(j)
        boxes.append((j, np.array([-a + 1, -a + 1]),
                      np.array([a * (P[0, 0] + P[0, 1]) - 1, a * (P[1, 0] + P[1, 1]) - 1])))
    lo = np.array([np.inf, np.inf])
    hi = -lo
    for j, blo, bhi in boxes:
        # element support A^{-j}([0,a]^2 + m); in y = A^J x it is A^{J-j}(...),
        # and A^{J-j} has non-negative entries so box corners map to corners
        B = A.power(J - j).astype(float)
        lo = np.minimum(lo, B @ blo)
        hi = np.maximum(hi, B @ (bhi + a))
    l_lo = [floor(v - a) + 1 for v in lo]
    l_hi = [ceil(v) - 1 for v in hi]
    return l_hi[0], l_hi[1], l_lo[0], l_lo[1]
