"""Wavelets on [0,1] built from edge functions (Cohen-Daubechies-Vial style).

Every function is stored as coefficients over the restricted translates
R_{j,t}(x) = 2^{j/2} phi(2^j x - t) chi_[0,1](x), t = -p+1 .. 2^j+p-2, of the
Daubechies scaling function with support [-p+1, p]. Inner products and
Fourier transforms of restricted translates come from the refinement
equation, so no quadrature enters the basis itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import ceil, comb, log2
from pathlib import Path

import numpy as np
import scipy.linalg
from numpy.polynomial import Chebyshev, Polynomial

from .gramian import AXIS_KINDS, FactoredGramian
from .lattice import BasisIndex
from .wavelets import SQRT2, WaveletFamily, cascade_evaluate

_TAYLOR_ORDER = 6
_MOMENT_ORDER = 24


@dataclass(frozen=True)
class EdgeTable:
    """Edge function k = sum_n coeffs[k, n] phi(x - translates[n]) on [0, inf)."""

    p: int
    coeffs: np.ndarray
    translates: np.ndarray


def build_edge_functions(p: int) -> EdgeTable:
    n = np.arange(2 * p - 1)
    coeffs = np.array([[comb(int(i), k) for i in n] for k in range(p)], dtype=float)
    # phi(x + n - p + 1) = phi(x - t) with t = p - 1 - n
    return EdgeTable(p, coeffs, p - 1 - n)


class BoundaryFamily:
    def __init__(self, p: int):
        self.p = p
        self.base = WaveletFamily.daubechies(p, centered=True)
        self.h = dict(zip(self.base.indices.tolist(), self.base.taps.tolist()))
        self.g = dict(zip(self.base.indices.tolist(), self.base.g.tolist()))
        self.J0 = self.coarsest_scale(p)
        self._half = self._solve_half_line_gram()
        self._mu = self._solve_truncated_moments(_MOMENT_ORDER)

    @staticmethod
    def coarsest_scale(p: int) -> int:
        """Smallest j with 2^j >= 2p, so left and right edges do not interact."""
        j = 0
        while 2**j < 2 * p:
            j += 1
        return j

    # ---- half-line integrals ------------------------------------------------
    def _solve_half_line_gram(self) -> dict:
        """a(s,t) = int_0^inf phi(x-s) phi(x-t) dx for translates straddling 0."""
        p = self.p
        U = list(range(-p + 1, p - 1))
        if not U:
            return {}
        pos = {(s, t): i for i, (s, t) in enumerate((s, t) for s in U for t in U)}
        n = len(pos)
        Mx = np.eye(n)
        rhs = np.zeros(n)
        for (s, t), i in pos.items():
            for k, hk in self.h.items():
                for k2, hk2 in self.h.items():
                    u, v = 2 * s + k, 2 * t + k2
                    if (u, v) in pos:
                        Mx[i, pos[(u, v)]] -= hk * hk2
                    else:
                        rhs[i] += hk * hk2 * self._a_known(u, v)
        sol = np.linalg.solve(Mx, rhs)
        return {key: sol[i] for key, i in pos.items()}

    def _a_known(self, s, t):
        p = self.p
        if s + p <= 0 or t + p <= 0:
            return 0.0
        if s >= p - 1 or t >= p - 1:
            return float(s == t)
        raise KeyError((s, t))

    def half_line_gram(self, s: int, t: int) -> float:
        p = self.p
        if s + p <= 0 or t + p <= 0:
            return 0.0
        if s >= p - 1 or t >= p - 1:
            return float(s == t)
        return self._half[(s, t)]

    def _solve_truncated_moments(self, nmax: int) -> np.ndarray:
        """mu[s, n] = int_s^inf u^n phi(u) du for s = -p+2 .. p-1."""
        p = self.p
        S = list(range(-p + 2, p))
        full = self.base.moments if nmax < len(self.base.moments) else self._full_moments(nmax)
        mu = np.zeros((len(S), nmax + 1))
        idx = {s: i for i, s in enumerate(S)}

        def look(s, r):
            if s <= -p + 1:
                return full[r]
            if s >= p:
                return 0.0
            return mu[idx[s], r]

        for n in range(nmax + 1):
            c = 2.0 ** (-n - 0.5)
            Mx = np.eye(len(S))
            rhs = np.zeros(len(S))
            for s in S:
                i = idx[s]
                for k, hk in self.h.items():
                    u = 2 * s - k
                    for r in range(n):
                        rhs[i] += c * hk * comb(n, r) * float(k) ** (n - r) * look(u, r)
                    if u in idx:
                        Mx[i, idx[u]] -= c * hk
                    else:
                        rhs[i] += c * hk * look(u, n)
            if S:
                mu[:, n] = np.linalg.solve(Mx, rhs)
        self._full = full
        return mu

    def _full_moments(self, nmax):
        n = self.base.indices.astype(float)
        h = self.base.taps
        mom = np.zeros(nmax + 1)
        mom[0] = 1.0
        for k in range(1, nmax + 1):
            acc = sum(comb(k, r) * np.sum(h * n ** (k - r)) * mom[r] for r in range(k))
            mom[k] = acc * 2.0 ** (-k - 0.5) / (1 - 2.0 ** (-k))
        return mom

    def truncated_moment(self, s: int, n: int) -> float:
        p = self.p
        if s <= -p + 1:
            return self._full[n]
        if s >= p:
            return 0.0
        return self._mu[s + p - 2, n]

    def truncated_hat(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """(T, phihat): T[i] = int_{s_i}^inf phi(u) e^{-2 pi i xi u} du for s_i = -p+2 .. p-1."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        p = self.p
        S = list(range(-p + 2, p))
        top = float(np.max(np.abs(xi))) if xi.size else 0.0
        K = max(0, ceil(log2(top / 1e-4))) if top > 1e-4 else 0
        eta = xi * 2.0**-K
        z = -2j * np.pi * eta
        T = np.zeros((len(S), xi.size), dtype=complex)
        F = np.zeros(xi.size, dtype=complex)
        fact = 1.0
        zp = np.ones_like(z)
        for q in range(_TAYLOR_ORDER + 1):
            if q:
                fact *= q
                zp = zp * z
            F += zp / fact * self._full[q]
            for i, s in enumerate(S):
                T[i] += zp / fact * self.truncated_moment(s, q)
        for level in range(K, 0, -1):
            w = xi * 2.0 ** -(level - 1)
            newT = np.zeros_like(T)
            newF = np.zeros_like(F)
            for k, hk in self.h.items():
                ph = hk / SQRT2 * np.exp(-1j * np.pi * w * k)
                newF += ph * F
                for i, s in enumerate(S):
                    u = 2 * s - k
                    if u <= -p + 1:
                        newT[i] += ph * F
                    elif u < p:
                        newT[i] += ph * T[u + p - 2]
            T, F = newT, newF
        return T, F

    # ---- restricted translates --------------------------------------------
    def translates(self, j: int) -> np.ndarray:
        return np.arange(-self.p + 1, 2**j + self.p - 1)

    @lru_cache(maxsize=None)
    def restricted_gram(self, j: int) -> np.ndarray:
        t = self.translates(j)
        G = np.empty((len(t), len(t)))
        for a, s in enumerate(t):
            for b, u in enumerate(t):
                G[a, b] = self.half_line_gram(s, u) - self.half_line_gram(s - 2**j, u - 2**j)
        return G

    @lru_cache(maxsize=None)
    def half_gram(self, j: int) -> np.ndarray:
        """Inner products of scale-j restricted translates over [0, 1/2] (j >= 1)."""
        t = self.translates(j)
        mid = 2 ** (j - 1)
        G = np.empty((len(t), len(t)))
        for a, s in enumerate(t):
            for b, u in enumerate(t):
                G[a, b] = self.half_line_gram(s, u) - self.half_line_gram(s - mid, u - mid)
        return G

    @lru_cache(maxsize=None)
    def refinement(self, j: int) -> np.ndarray:
        """Rows: scale-j translates, columns: scale-(j+1) translates."""
        t0, t1 = self.translates(j), self.translates(j + 1)
        R = np.zeros((len(t0), len(t1)))
        lo = t1[0]
        for a, t in enumerate(t0):
            for k, hk in self.h.items():
                u = 2 * t + k - lo
                if 0 <= u < len(t1):
                    R[a, u] = hk
        return R

    def restricted_fourier(self, j: int, omega) -> np.ndarray:
        """Matrix F[w, t] = int_0^1 R_{j,t}(x) e^{-2 pi i omega_w x} dx."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        p = self.p
        xi = omega / 2**j
        T, F = self.truncated_hat(xi)

        def look(s):
            if s <= -p + 1:
                return F
            if s >= p:
                return np.zeros_like(F)
            return T[s + p - 2]

        out = np.empty((omega.size, len(self.translates(j))), dtype=complex)
        for c, t in enumerate(self.translates(j)):
            out[:, c] = 2.0 ** (-j / 2) * np.exp(-2j * np.pi * xi * t) * (look(-t) - look(2**j - t))
        return out

    def restricted_inner(self, j: int, g, degree: int = 16) -> np.ndarray:
        """<g, R_{j,t}> over [0,1] for a smooth real function g."""
        p = self.p
        out = np.empty(len(self.translates(j)))
        for c, t in enumerate(self.translates(j)):
            lo, hi = max(-t, -p + 1), min(2**j - t, p)
            G = Chebyshev.interpolate(lambda u, t=t: g((u + t) / 2**j), degree, domain=[-p + 1, p])
            coef = G.convert(kind=Polynomial).coef
            val = sum(cn * (self.truncated_moment(lo, n) - self.truncated_moment(hi, n))
                      for n, cn in enumerate(coef))
            out[c] = 2.0 ** (-j / 2) * val
        return out

    # ---- interval bases -------------------------------------------------------
    def _check_scale(self, j):
        if j < self.J0:
            raise ValueError(f"scale {j} is below the coarsest admissible scale J0={self.J0}")

    @lru_cache(maxsize=None)
    def scaling_basis(self, j: int) -> np.ndarray:
        """2^j x n_t coefficients of phi^int_{j,n}, n = 0..2^j-1, orthonormal on [0,1]."""
        self._check_scale(j)
        p = self.p
        t = self.translates(j)
        lo = t[0]
        G = self.restricted_gram(j)
        edge = build_edge_functions(p)
        left = np.zeros((p, len(t)))
        right = np.zeros((p, len(t)))
        for k in range(p):
            for n, c in enumerate(edge.coeffs[k]):
                left[k, p - 1 - n - lo] = c
                right[k, 2**j - p + n - lo] = c
        left = gram_schmidt(left, G)
        right = gram_schmidt(right, G)
        if np.max(np.abs(left @ G @ right.T)) > 1e-13:
            # edges overlap at the coarsest scale: symmetric orthonormalisation
            both = np.vstack([left, right])
            W = both @ G @ both.T
            ev, V = np.linalg.eigh(W)
            both = (V @ np.diag(ev**-0.5) @ V.T) @ both
            left, right = both[:p], both[p:]
        interior = np.zeros((2**j - 2 * p, len(t)))
        for i, n in enumerate(range(p, 2**j - p)):
            interior[i, n - lo] = 1.0
        return np.vstack([left, interior, right[::-1]])

    @lru_cache(maxsize=None)
    def wavelet_basis(self, j: int) -> np.ndarray:
        """2^j x n_t(j+1) coefficients of psi^int_{j,n} over scale-(j+1) translates."""
        self._check_scale(j)
        p = self.p
        G1 = self.restricted_gram(j + 1)
        S1 = self.scaling_basis(j + 1)
        P0 = self.scaling_basis(j) @ self.refinement(j)
        t1 = self.translates(j + 1)
        lo = t1[0]
        inner = np.zeros((2**j - 2 * p, len(t1)))
        for i, n in enumerate(range(p, 2**j - p)):
            for k, gk in self.g.items():
                inner[i, 2 * n + k - lo] = gk
        coords = np.vstack([P0, inner]) @ G1 @ S1.T
        Z = scipy.linalg.null_space(coords, rcond=1e-10)
        if Z.shape[1] != 2 * p:
            raise ArithmeticError(f"complement has dimension {Z.shape[1]}, expected {2 * p}")
        E = Z.T @ S1 @ self.half_gram(j + 1) @ S1.T @ Z
        ev, V = np.linalg.eigh(E)
        vecs = (Z @ V).T @ S1  # ascending energy on [0, 1/2]
        for r in range(len(vecs)):
            mag = np.abs(vecs[r])
            i = np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0]  # first of near-ties
            if vecs[r, i] < 0:
                vecs[r] *= -1
        left = vecs[::-1][:p]
        right = vecs[:p]  # right[0] is the most right-localised
        return np.vstack([left, inner, right[::-1]])

    def lift(self, coeffs: np.ndarray, j: int, J: int) -> np.ndarray:
        """Re-express scale-j coefficients over scale-J translates."""
        out = coeffs
        for s in range(j, J):
            out = out @ self.refinement(s)
        return out

    @cached_property
    def cascade(self):
        return cascade_evaluate(self.base, 14, tol=1e-12)

    def evaluate(self, coeffs: np.ndarray, j: int, x) -> np.ndarray:
        """Values at x in [0,1] of functions given by scale-j coefficients (rows)."""
        x = np.asarray(x, dtype=float)
        t = self.translates(j)
        B = np.empty((x.size, len(t)))
        inside = (x >= 0) & (x <= 1)
        for c, tt in enumerate(t):
            B[:, c] = 2.0 ** (j / 2) * self.cascade(2**j * x - tt) * inside
        return coeffs @ B.T

    def export_table(self, path: str | Path, j: int | None = None) -> None:
        j = self.J0 if j is None else j
        S = self.scaling_basis(j)
        t = self.translates(j)
        p = self.p
        rows = [("left", k, S[k]) for k in range(p)] + [("right", k, S[2**j - 1 - k]) for k in range(p)]
        with open(path, "w") as fh:
            fh.write(f"# boundary scaling functions p={p} scale={j}; pairs: translate t of 2^(j/2) phi(2^j x - t), coefficient\n")
            for side, k, vec in rows:
                nz = np.nonzero(np.abs(vec) > 0)[0]
                pairs = " ".join(f"{t[i] if side == 'left' else t[i] - 2**j} {vec[i]:.17g}" for i in nz)
                fh.write(f"{side} {k} {pairs}\n")


def gram_schmidt(V: np.ndarray, G: np.ndarray, cond_limit: float = 1e12) -> np.ndarray:
    """Orthonormalise rows of V in the inner product x^T G y (modified Gram-Schmidt)."""
    W = V @ G @ V.T
    ev = np.linalg.eigvalsh(W)
    if ev[0] <= 0 or ev[-1] / ev[0] > cond_limit:
        raise np.linalg.LinAlgError(f"edge Gram matrix is numerically singular (condition {ev[-1] / max(ev[0], 1e-300):.3e})")
    out = V.astype(float).copy()
    for i in range(len(out)):
        for k in range(i):
            out[i] -= (out[i] @ G @ out[k]) * out[k]
        out[i] /= np.sqrt(out[i] @ G @ out[i])
    return out


def gram_schmidt_boundary(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Left boundary functions on the half line as coefficients over phi(x - t).

    Returns (coeffs, translates); the right functions are the mirror-image
    construction at x = 1 (see ``BoundaryFamily.scaling_basis``).
    """
    fam = BoundaryFamily(p)
    edge = build_edge_functions(p)
    t = edge.translates
    G = np.array([[fam.half_line_gram(a, b) for b in t] for a in t])
    return gram_schmidt(edge.coeffs, G), t


# --------------------------------------------------------------------------
# 2D basis

def enumerate_boundary_basis(p: int, J: int) -> list[BasisIndex]:
    fam_J0 = BoundaryFamily.coarsest_scale(p)
    if J < fam_J0:
        raise ValueError(f"J={J} is below J0={fam_J0}")
    out, pos = [], 1
    for n1 in range(2**fam_J0):
        for n2 in range(2**fam_J0):
            out.append(BasisIndex("scaling", 0, fam_J0, n1, n2, pos))
            pos += 1
    for j in range(fam_J0, J):
        for k in (1, 2, 3):
            for n1 in range(2**j):
                for n2 in range(2**j):
                    out.append(BasisIndex("wavelet", k, j, n1, n2, pos))
                    pos += 1
    return out


class BoundarySystem:
    """Tensor basis of V_J on [0,1]^2 in multiscale order, with its 1D factors."""

    def __init__(self, p: int, J: int, family: BoundaryFamily | None = None):
        self.family = family or BoundaryFamily(p)
        self.p, self.J = p, J
        self.basis = enumerate_boundary_basis(p, J)
        fam = self.family
        keys, rows = [], []
        for n in range(2**fam.J0):
            keys.append(("phi", fam.J0, n))
        for j in range(fam.J0, J):
            for n in range(2**j):
                keys.append(("phi", j, n))
            for n in range(2**j):
                keys.append(("psi", j, n))
        keys = list(dict.fromkeys(keys))
        for kind, j, n in keys:
            if kind == "phi":
                rows.append(fam.lift(fam.scaling_basis(j)[n], j, J))
            else:
                rows.append(fam.lift(fam.wavelet_basis(j)[n], j + 1, J))
        self.keys = keys
        self.key_index = {k: i for i, k in enumerate(keys)}
        self.factors = np.array(rows)  # (n_keys, n_translates at scale J)
        ix, iy = [], []
        for b in self.basis:
            ax, ay = AXIS_KINDS[b.generator if b.kind == "wavelet" else 0]
            ix.append(self.key_index[(ax, b.scale, b.m1)])
            iy.append(self.key_index[(ay, b.scale, b.m2)])
        self.ix, self.iy = np.array(ix), np.array(iy)

    @property
    def N(self) -> int:
        return len(self.basis)

    def factor_gram(self) -> np.ndarray:
        return self.factors @ self.family.restricted_gram(self.J) @ self.factors.T

    def axis_table(self, eps: float, M: int) -> np.ndarray:
        ls = np.arange(-M, M + 1)
        F = self.family.restricted_fourier(self.J, eps * ls)
        return np.sqrt(eps) * F @ self.factors.T

    def gramian(self, eps: float, M1: int, M2: int, N: int | None = None) -> FactoredGramian:
        N = self.N if N is None else N
        X = self.axis_table(eps, M1)
        Y = X if M2 == M1 else self.axis_table(eps, M2)
        return FactoredGramian(X, Y, self.ix[:N], self.iy[:N],
                               {"epsilon": eps, "J": self.J, "p": self.p, "boundary": True})

    def inner_products(self, f) -> np.ndarray:
        """<f, r_i> for a separable f = fx(x) fy(y)."""
        bx = self.factors @ self.family.restricted_inner(self.J, _smooth(f.fx))
        by = bx if f.fy is f.fx else self.factors @ self.family.restricted_inner(self.J, _smooth(f.fy))
        return bx[self.ix] * by[self.iy]

    def factor_values(self, x) -> np.ndarray:
        return self.family.evaluate(self.factors, self.J, x)

    def synthesize(self, alpha: np.ndarray, x, y=None) -> np.ndarray:
        y = x if y is None else y
        vx = self.factor_values(x)
        vy = vx if y is x else self.factor_values(y)
        C = np.zeros((len(self.keys), len(self.keys)), dtype=complex)
        np.add.at(C, (self.ix[:len(alpha)], self.iy[:len(alpha)]), alpha)
        return vx.T @ C @ vy


def _smooth(factor):
    return factor.smooth if getattr(factor, "smooth", None) is not None else factor.value


def boundary_gramian_entry(system: BoundarySystem, index: BasisIndex, l, eps: float) -> complex:
    if index.scale >= system.J and index.kind == "wavelet" or index.scale > system.J:
        raise ValueError("element is not expandable at the system scale")
    ax, ay = AXIS_KINDS[index.generator if index.kind == "wavelet" else 0]
    F = system.family.restricted_fourier(system.J, eps * np.asarray(l, dtype=float))
    vx = system.factors[system.key_index[(ax, index.scale, index.m1)]]
    vy = system.factors[system.key_index[(ay, index.scale, index.m2)]]
    return complex(eps * (F[0] @ vx) * (F[1] @ vy))
