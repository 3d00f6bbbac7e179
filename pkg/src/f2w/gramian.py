"""Fourier sampling, measurements and the wavelet/Fourier cross-Gramian."""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import LinearOperator

from .lattice import BasisIndex, ScalingMatrix2
from .wavelets import (FrequencyEvaluator, WaveletFamily, cascade_evaluate,
                       haar_scaling_hat, haar_wavelet_hat)

DEFAULT_MAX_BYTES = 4 * 2**30


@dataclass(frozen=True)
class SamplingScheme:
    epsilon: float
    M1: int
    M2: int
    T1: float | None = None
    T2: float | None = None
    boundary: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.M1 < 0 or self.M2 < 0:
            raise ValueError("half-widths must be non-negative")
        if self.boundary:
            if self.epsilon > 1 + 1e-15:
                raise ValueError("boundary mode needs epsilon <= 1")
        elif self.T1 is not None and self.T2 is not None:
            if self.epsilon > 1.0 / (self.T1 + self.T2) + 1e-15:
                raise ValueError(f"epsilon {self.epsilon} exceeds 1/(T1+T2) = {1 / (self.T1 + self.T2)}")

    @property
    def total(self) -> int:
        return (2 * self.M1 + 1) * (2 * self.M2 + 1)

    @property
    def axis1(self) -> np.ndarray:
        return np.arange(-self.M1, self.M1 + 1)

    @property
    def axis2(self) -> np.ndarray:
        return np.arange(-self.M2, self.M2 + 1)

    def frequencies(self) -> np.ndarray:
        """Sample indices l, row-major with l1 outer."""
        l1, l2 = np.meshgrid(self.axis1, self.axis2, indexing="ij")
        return np.column_stack([l1.ravel(), l2.ravel()])


def measure(f, scheme: SamplingScheme, domain: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """m(f)_l = eps * fhat(eps l), flattened like ``frequencies``."""
    eps = scheme.epsilon
    if hasattr(f, "fx") and hasattr(f.fx, "fourier"):
        a = f.fx.fourier(eps * scheme.axis1)
        b = f.fy.fourier(eps * scheme.axis2)
        return eps * np.outer(a, b).ravel()
    if hasattr(f, "fourier"):
        l = scheme.frequencies()
        return eps * f.fourier(eps * l[:, 0], eps * l[:, 1])
    return eps * _quadrature_fourier(f, eps * scheme.frequencies(), domain)


def _quadrature_fourier(f, w: np.ndarray, domain, tol=1e-11, n0=32, nmax=1024) -> np.ndarray:
    lo, hi = domain
    prev = None
    n = n0
    while n <= nmax:
        x, wt = np.polynomial.legendre.leggauss(n)
        x = lo + (x + 1) * (hi - lo) / 2
        wt = wt * (hi - lo) / 2
        X, Y = np.meshgrid(x, x, indexing="ij")
        F = f(X, Y) * np.outer(wt, wt)
        ex = np.exp(-2j * np.pi * np.outer(w[:, 0], x))
        ey = np.exp(-2j * np.pi * np.outer(w[:, 1], x))
        val = np.einsum("ka,ab,kb->k", ex, F, ey)
        if prev is not None and np.max(np.abs(val - prev)) < tol:
            return val
        prev = val
        n *= 2
    raise ArithmeticError("quadrature for the Fourier transform did not converge")


# --------------------------------------------------------------------------
# generators

class SeparableGenerators:
    """Tensor generators phi x phi, phi x psi, psi x phi, psi x psi (A = diag(2,2))."""

    n_wavelets = 3
    separable = True

    def __init__(self, family: WaveletFamily, depth: int = 40):
        self.family = family
        self.evaluator = FrequencyEvaluator(family, depth)

    def axis_hat(self, kind: str, xi):
        return self.evaluator.scaling_hat(xi) if kind == "phi" else self.evaluator.wavelet_hat(xi)

    def scaling_hat(self, xi1, xi2):
        return self.evaluator.scaling_hat_2d(xi1, xi2)

    def wavelet_hat(self, k, xi1, xi2):
        return self.evaluator.wavelet_hat_2d(k, xi1, xi2)


AXIS_KINDS = {0: ("phi", "phi"), 1: ("phi", "psi"), 2: ("psi", "phi"), 3: ("psi", "psi")}


class GaussianGenerators:
    """Synthetic non-MRA generators used only to exercise general-A plumbing."""

    separable = False

    def __init__(self, n_wavelets: int):
        self.n_wavelets = n_wavelets

    def scaling_hat(self, xi1, xi2):
        return np.exp(-np.pi * (xi1**2 + xi2**2))

    def wavelet_hat(self, k, xi1, xi2):
        r2 = xi1**2 + xi2**2
        return (1 - np.exp(-r2)) * np.exp(-np.pi * r2 / k) * np.exp(-2j * np.pi * k * xi1)


def interior_entry(index: BasisIndex, l, scheme: SamplingScheme, generators,
                   A: ScalingMatrix2) -> np.ndarray:
    """eps |det A|^{-j/2} exp(-2 pi i <xi, m>) ghat(xi), xi = eps (A^{-j})^T l."""
    l = np.asarray(l, dtype=float)
    j = index.scale
    Bt = A.inverse_power(j).T
    xi = scheme.epsilon * l @ Bt.T
    phase = np.exp(-2j * np.pi * (xi[..., 0] * index.m1 + xi[..., 1] * index.m2))
    amp = scheme.epsilon * abs(A.det) ** (-j / 2)
    if index.kind == "scaling":
        g = generators.scaling_hat(xi[..., 0], xi[..., 1])
    else:
        g = generators.wavelet_hat(index.generator, xi[..., 0], xi[..., 1])
    return amp * phase * g


def haar_entry(index: BasisIndex, l, eps: float) -> np.ndarray:
    """Closed-form Haar entry for A = diag(2,2)."""
    l = np.asarray(l, dtype=float)
    j = index.scale
    xi = eps * l / 2**j
    kx, ky = AXIS_KINDS[index.generator if index.kind == "wavelet" else 0]
    fx = haar_scaling_hat if kx == "phi" else haar_wavelet_hat
    fy = haar_scaling_hat if ky == "phi" else haar_wavelet_hat
    phase = np.exp(-2j * np.pi * (xi[..., 0] * index.m1 + xi[..., 1] * index.m2))
    return eps * 2.0**-j * phase * fx(xi[..., 0]) * fy(xi[..., 1])


class QuadratureOracle:
    """Fourier transforms of phi/psi by trapezoidal sums over cascade samples."""

    def __init__(self, family: WaveletFamily, level: int = 15):
        c = cascade_evaluate(family, level, tol=1e-13)
        self.piecewise_constant = family.p == 1
        self.x_phi, self.phi = c.x, c.phi
        self.h_phi = c.step
        self.x_psi, self.psi = c.psi()
        self.h_psi = 2 * c.step

    def hat(self, kind: str, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, float))
        x, v, h = (self.x_phi, self.phi, self.h_phi) if kind == "phi" else (self.x_psi, self.psi, self.h_psi)
        if self.piecewise_constant:
            # exact for functions constant on grid cells [x_k, x_k + h)
            return np.array([h * np.sinc(w * h) * np.sum(v[:-1] * np.exp(-2j * np.pi * w * (x[:-1] + h / 2)))
                             for w in xi])
        return np.array([h * np.sum(v * np.exp(-2j * np.pi * w * x)) for w in xi])

    def entry(self, index: BasisIndex, l, eps: float) -> complex:
        l1, l2 = l
        j = index.scale
        kx, ky = AXIS_KINDS[index.generator if index.kind == "wavelet" else 0]
        x1, x2 = eps * l1 / 2**j, eps * l2 / 2**j
        ph = np.exp(-2j * np.pi * (x1 * index.m1 + x2 * index.m2))
        return complex(eps * 2.0**-j * ph * self.hat(kx, x1)[0] * self.hat(ky, x2)[0])


# --------------------------------------------------------------------------
# cross-Gramian storage

class CrossGramian:
    """Common interface for the M_total x N matrix u_ij = <r_j, s_i>."""

    mode = "abstract"

    def __init__(self, shape, meta=None):
        self.shape = shape
        self.meta = dict(meta or {})

    def matvec(self, alpha):
        raise NotImplementedError

    def rmatvec(self, y):
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        N = self.shape[1]
        return np.column_stack([self.matvec(e) for e in np.eye(N, dtype=complex)])

    def gram(self) -> np.ndarray:
        """U^H U as a dense N x N matrix."""
        D = self.to_dense()
        return D.conj().T @ D

    def column_norms(self) -> np.ndarray:
        return np.sqrt(np.real(np.diag(self.gram())))

    def operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.rmatvec, dtype=complex)

    @property
    def has_dense(self) -> bool:
        return False


class DenseGramian(CrossGramian):
    mode = "dense"

    def __init__(self, matrix: np.ndarray, meta=None):
        super().__init__(matrix.shape, meta)
        self.matrix = matrix

    def matvec(self, alpha):
        return self.matrix @ alpha

    def rmatvec(self, y):
        return self.matrix.conj().T @ y

    def to_dense(self):
        return self.matrix

    @property
    def has_dense(self) -> bool:
        return True


class FactoredGramian(CrossGramian):
    """Separable structure: U[(a,b), c] = X[a, ix_c] * Y[b, iy_c]."""

    mode = "factored"

    def __init__(self, X: np.ndarray, Y: np.ndarray, ix: np.ndarray, iy: np.ndarray, meta=None):
        super().__init__((X.shape[0] * Y.shape[0], len(ix)), meta)
        self.X, self.Y = X, Y
        self.ix, self.iy = np.asarray(ix), np.asarray(iy)

    def _coef_matrix(self, alpha):
        C = np.zeros((self.X.shape[1], self.Y.shape[1]), dtype=complex)
        np.add.at(C, (self.ix, self.iy), alpha)
        return C

    def matvec(self, alpha):
        return (self.X @ self._coef_matrix(alpha) @ self.Y.T).ravel()

    def rmatvec(self, y):
        Ym = np.asarray(y).reshape(self.X.shape[0], self.Y.shape[0])
        G = self.X.conj().T @ Ym @ self.Y.conj()
        return G[self.ix, self.iy]

    def to_dense(self):
        return (self.X[:, None, self.ix] * self.Y[None, :, self.iy]).reshape(self.shape)

    def gram(self):
        gx = self.X.conj().T @ self.X
        gy = self.Y.conj().T @ self.Y
        return gx[np.ix_(self.ix, self.ix)] * gy[np.ix_(self.iy, self.iy)]

    def truncated(self, N: int) -> "FactoredGramian":
        return FactoredGramian(self.X, self.Y, self.ix[:N], self.iy[:N], self.meta)


# --------------------------------------------------------------------------
# assembly

def ordering_hash(basis: Sequence[BasisIndex]) -> str:
    h = hashlib.sha256()
    for b in basis:
        h.update(f"{b.kind},{b.generator},{b.scale},{b.m1},{b.m2};".encode())
    return h.hexdigest()[:16]


def assemble(scheme: SamplingScheme, basis: Sequence[BasisIndex], generators,
             A: ScalingMatrix2, workers: int = 1, max_bytes: int = DEFAULT_MAX_BYTES,
             meta=None) -> DenseGramian:
    """Dense cross-Gramian filled in row blocks; identical for any ``workers``."""
    rows, cols = scheme.total, len(basis)
    need = rows * cols * 16
    if need > max_bytes:
        raise MemoryError(f"dense cross-Gramian needs {need} bytes, cap is {max_bytes}")
    l = scheme.frequencies().astype(float)
    out = np.empty((rows, cols), dtype=complex)
    groups: dict = {}
    for c, b in enumerate(basis):
        groups.setdefault((b.kind, b.generator, b.scale), []).append(c)
    eps = scheme.epsilon

    def fill(block):
        lb = l[block]
        for (kind, gen, j), cs in groups.items():
            xi = eps * lb @ A.inverse_power(j)
            # xi = eps (A^{-j})^T l, row vector form l A^{-j}
            if kind == "scaling":
                g = generators.scaling_hat(xi[:, 0], xi[:, 1])
            else:
                g = generators.wavelet_hat(gen, xi[:, 0], xi[:, 1])
            m = np.array([[basis[c].m1, basis[c].m2] for c in cs], dtype=float)
            ph = np.exp(-2j * np.pi * (xi @ m.T))
            out[block[0]:block[-1] + 1, cs] = (eps * abs(A.det) ** (-j / 2)) * ph * g[:, None]

    blocks = np.array_split(np.arange(rows), max(1, min(rows, 8 * workers)))
    blocks = [b for b in blocks if len(b)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(fill, blocks))
    else:
        for b in blocks:
            fill(b)
    info = {"epsilon": eps, "A": A.entries, "J": max((b.scale for b in basis), default=-1) + 1,
            "ordering": ordering_hash(basis)}
    info.update(meta or {})
    return DenseGramian(out, info)


def axis_table(generators: SeparableGenerators, keys: list[tuple[str, int, int]],
               eps: float, ls: np.ndarray) -> np.ndarray:
    """Columns sqrt(eps) 2^{-j/2} e^{-2 pi i eps l m / 2^j} ghat(eps l / 2^j) per key."""
    out = np.empty((len(ls), len(keys)), dtype=complex)
    cache = {}
    for c, (kind, j, m) in enumerate(keys):
        if (kind, j) not in cache:
            cache[(kind, j)] = generators.axis_hat(kind, eps * ls / 2**j)
        xi = eps * ls / 2**j
        out[:, c] = np.sqrt(eps) * 2.0 ** (-j / 2) * np.exp(-2j * np.pi * xi * m) * cache[(kind, j)]
    return out


def axis_keys(basis: Sequence[BasisIndex]):
    """1D factor keys for each element and the unique key lists per axis."""
    kx, ky = {}, {}
    ix, iy = [], []
    for b in basis:
        ax, ay = AXIS_KINDS[b.generator if b.kind == "wavelet" else 0]
        a = (ax, b.scale, b.m1)
        c = (ay, b.scale, b.m2)
        ix.append(kx.setdefault(a, len(kx)))
        iy.append(ky.setdefault(c, len(ky)))
    return list(kx), list(ky), np.array(ix), np.array(iy)


def separable_gramian(scheme: SamplingScheme, basis: Sequence[BasisIndex],
                      generators: SeparableGenerators) -> FactoredGramian:
    """Factored cross-Gramian for A = diag(2,2) and tensor generators."""
    keys_x, keys_y, ix, iy = axis_keys(basis)
    X = axis_table(generators, keys_x, scheme.epsilon, scheme.axis1.astype(float))
    Y = axis_table(generators, keys_y, scheme.epsilon, scheme.axis2.astype(float))
    meta = {"epsilon": scheme.epsilon, "A": (2, 0, 0, 2), "ordering": ordering_hash(basis),
            "J": max((b.scale for b in basis), default=-1) + 1}
    return FactoredGramian(X, Y, ix, iy, meta)


# --------------------------------------------------------------------------
# fast operator: synthesis to scale J then FFT evaluation

def expand_to_scale(family: WaveletFamily, kind: str, j: int, m: int, J: int) -> tuple[int, np.ndarray]:
    """Scale-J coefficients (start index, values) of phi_{j,m} or psi_{j,m}."""
    if j > J or (kind == "psi" and j == J):
        raise ValueError("element lives above the target scale")
    vec, start = np.array([1.0]), m
    for step in range(J - j):
        taps = family.g if (kind == "psi" and step == 0) else family.taps
        up = np.zeros(2 * len(vec) - 1)
        up[::2] = vec
        vec = np.convolve(up, taps)
        start = 2 * start + family.offset
    return start, vec


class FFTGramian(CrossGramian):
    """Implicit U for A = diag(2,2): DWT synthesis plus a K x K FFT, K = 2^J / eps."""

    mode = "implicit"

    def __init__(self, scheme: SamplingScheme, basis: Sequence[BasisIndex], generators: SeparableGenerators,
                 J: int | None = None):
        if not isinstance(generators, SeparableGenerators):
            raise ValueError("the FFT operator needs separable tensor generators")
        if J is None:
            J = max(1, max(b.scale for b in basis) + 1)
        K = 2**J / scheme.epsilon
        if abs(K - round(K)) > 1e-9:
            raise ValueError("2^J / epsilon must be an integer for the FFT operator")
        super().__init__((scheme.total, len(basis)), {"epsilon": scheme.epsilon, "J": J})
        self.K = int(round(K))
        self.scheme, self.J = scheme, J
        fam = generators.family
        keys_x, keys_y, self.ix, self.iy = axis_keys(basis)
        self.Sx, self.lo_x = self._synthesis(fam, keys_x, J)
        self.Sy, self.lo_y = self._synthesis(fam, keys_y, J)
        eps = scheme.epsilon
        zx = eps * scheme.axis1 / 2**J
        zy = eps * scheme.axis2 / 2**J
        self.wx = np.sqrt(eps) * 2.0 ** (-J / 2) * generators.evaluator.scaling_hat(zx)
        self.wy = np.sqrt(eps) * 2.0 ** (-J / 2) * generators.evaluator.scaling_hat(zy)

    @staticmethod
    def _synthesis(fam, keys, J):
        cols = [expand_to_scale(fam, kind, j, m, J) for kind, j, m in keys]
        lo = min(s for s, _ in cols)
        hi = max(s + len(v) for s, v in cols)
        r, c, v = [], [], []
        for k, (s, vec) in enumerate(cols):
            r.extend(range(s - lo, s - lo + len(vec)))
            c.extend([k] * len(vec))
            v.extend(vec)
        return csr_matrix((v, (r, c)), shape=(hi - lo, len(keys))), lo

    def _fold(self, n_lo, size):
        return (np.arange(n_lo, n_lo + size)) % self.K

    def matvec(self, alpha):
        C = np.zeros((self.Sx.shape[1], self.Sy.shape[1]), dtype=complex)
        np.add.at(C, (self.ix, self.iy), alpha)
        c = np.asarray(self.Sx @ C)
        c = np.asarray(self.Sy @ c.T).T  # scale-J coefficients
        K = self.K
        F = np.zeros((K, K), dtype=complex)
        np.add.at(F, (self._fold(self.lo_x, c.shape[0])[:, None], self._fold(self.lo_y, c.shape[1])[None, :]), c)
        F = np.fft.fft2(F)
        i1 = self.scheme.axis1 % K
        i2 = self.scheme.axis2 % K
        return (self.wx[:, None] * self.wy[None, :] * F[np.ix_(i1, i2)]).ravel()

    def rmatvec(self, y):
        K = self.K
        Y = np.asarray(y).reshape(len(self.wx), len(self.wy)) * np.conj(self.wx)[:, None] * np.conj(self.wy)[None, :]
        bins = np.zeros((K, K), dtype=complex)
        np.add.at(bins, ((self.scheme.axis1 % K)[:, None], (self.scheme.axis2 % K)[None, :]), Y)
        D = np.fft.ifft2(bins) * (K * K)
        D = D[np.ix_(self._fold(self.lo_x, self.Sx.shape[0]), self._fold(self.lo_y, self.Sy.shape[0]))]
        G = np.asarray(self.Sx.T @ D)
        G = np.asarray(self.Sy.T @ G.T).T
        return G[self.ix, self.iy]


def implicit_operator(scheme: SamplingScheme, basis: Sequence[BasisIndex], generators,
                      A: ScalingMatrix2 | None = None) -> FFTGramian:
    if A is not None and A.entries != (2, 0, 0, 2):
        raise ValueError("the FFT operator supports A = diag(2,2) only")
    return FFTGramian(scheme, basis, generators)


# --------------------------------------------------------------------------
# dump format

def dump_gramian(U: CrossGramian, path: str | Path, a: int, J: int, det: int) -> None:
    D = U.to_dense()
    rows, cols = D.shape
    eps = U.meta.get("epsilon", float("nan"))
    with open(path, "w") as fh:
        fh.write(f"gramian v1 {rows} {cols} {eps:.17g} {a} {J} {det}\n")
        for z in D.ravel():
            fh.write(f"{z.real:.17g} {z.imag:.17g}\n")


def load_gramian(path: str | Path) -> tuple[dict, np.ndarray]:
    with open(path) as fh:
        head = fh.readline().split()
        if head[:2] != ["gramian", "v1"]:
            raise ValueError("not a gramian v1 file")
        rows, cols = int(head[2]), int(head[3])
        info = {"rows": rows, "cols": cols, "epsilon": float(head[4]), "a": int(head[5]),
                "J": int(head[6]), "det": int(head[7])}
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows * cols, 2):
        raise ValueError("entry count does not match the header")
    return info, (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)
