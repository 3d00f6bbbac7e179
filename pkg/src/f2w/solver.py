"""Generalized sampling solves, stable sampling rate search and the
supporting inequality checks (grid Parseval, MZ bound, tail mass, epsilon transfer)."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from math import ceil, exp, pi, sqrt
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg, eigsh

from .gramian import CrossGramian, DenseGramian

DENSE_SVD_LIMIT = 4000
DENSE_QR_LIMIT = 2000


@dataclass
class GSResult:
    alpha: np.ndarray
    residual_norm: float
    sigma_min: float
    sigma_max: float
    iterations: int

    @property
    def constant(self) -> float:
        return float("inf") if self.sigma_min == 0 else 1.0 / self.sigma_min


def singular_extremes(U: CrossGramian) -> tuple[float, float]:
    """(sigma_min, sigma_max) of U."""
    rows, cols = U.shape
    if cols == 0:
        return 1.0, 1.0
    if U.has_dense and cols <= DENSE_SVD_LIMIT:
        s = scipy.linalg.svdvals(U.to_dense())
        smin = 0.0 if rows < cols else float(s[-1])
        return smin, float(s[0])
    if cols <= DENSE_SVD_LIMIT or U.mode == "factored":
        ev = scipy.linalg.eigvalsh(U.gram())
        smin = 0.0 if rows < cols else sqrt(max(ev[0], 0.0))
        return smin, sqrt(max(ev[-1], 0.0))
    op = LinearOperator((cols, cols), matvec=lambda v: U.rmatvec(U.matvec(v)), dtype=complex)
    lo = eigsh(op, k=1, which="SA", tol=1e-12, maxiter=20 * cols, return_eigenvectors=False)
    hi = eigsh(op, k=1, which="LA", tol=1e-12, maxiter=20 * cols, return_eigenvectors=False)
    smin = 0.0 if rows < cols else sqrt(max(float(lo[0]), 0.0))
    return smin, sqrt(max(float(hi[0]), 0.0))


def smallest_singular_value(U: CrossGramian) -> float:
    """sigma_min(U) = cos of the angle between reconstruction and sampling spaces."""
    return singular_extremes(U)[0]


def gs_solve(U: CrossGramian, m: np.ndarray, tol: float = 1e-12, maxiter: int | None = None,
             method: str = "auto") -> GSResult:
    """Least-squares solution of U alpha = m."""
    m = np.asarray(m, dtype=complex)
    rows, cols = U.shape
    if m.shape != (rows,):
        raise ValueError(f"measurement vector has shape {m.shape}, expected ({rows},)")
    smin, smax = singular_extremes(U)
    if smin <= 1e-13 * max(smax, 1.0):
        raise np.linalg.LinAlgError(f"cross-Gramian is rank deficient (sigma_min = {smin:.3e})")
    if method == "auto":
        method = "qr" if cols <= DENSE_QR_LIMIT else "cg"
    if method == "qr":
        D = U.to_dense()
        Q, R = scipy.linalg.qr(D, mode="economic")
        alpha = scipy.linalg.solve_triangular(R, Q.conj().T @ m)
        its = 0
    elif method == "cg":
        b = U.rmatvec(m)
        if not np.any(b):
            alpha, its = np.zeros(cols, dtype=complex), 0
        else:
            op = LinearOperator((cols, cols), matvec=lambda v: U.rmatvec(U.matvec(v)), dtype=complex)
            count = [0]
            alpha, info = cg(op, b, rtol=tol, atol=0.0, maxiter=maxiter or 10 * cols,
                             callback=lambda _: count.__setitem__(0, count[0] + 1))
            if info != 0:
                raise ArithmeticError(f"CG did not converge within {maxiter or 10 * cols} iterations")
            its = count[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.linalg.norm(U.matvec(alpha) - m))
    return GSResult(alpha, res, smin, smax, its)


# --------------------------------------------------------------------------
# stable sampling rate

@dataclass
class RatePoint:
    N: int
    M1: int
    M2: int
    sigma_min: float

    @property
    def total(self) -> int:
        return (2 * self.M1 + 1) * (2 * self.M2 + 1)


@dataclass
class RateCurve:
    theta_inv: float
    epsilon: float
    points: list[RatePoint] = field(default_factory=list)
    trace: list[tuple[int, int, int, float]] = field(default_factory=list)
    context: dict = field(default_factory=dict)

    HEADER = ("N", "M_total", "M1", "M2", "sigma_min", "theta_inv", "epsilon")

    def rows(self):
        return [(p.N, p.total, p.M1, p.M2, p.sigma_min) for p in self.points]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for p in self.points:
            w.writerow([p.N, p.total, p.M1, p.M2, f"{p.sigma_min:.17g}", f"{self.theta_inv:.17g}",
                        f"{self.epsilon:.17g}"])
        return buf.getvalue()

    def linear_reference(self) -> float:
        """Slope of f(N) = (M_max / N_max) N."""
        if not self.points:
            return float("nan")
        last = max(self.points, key=lambda p: p.N)
        return last.total / last.N


class RateSearchError(RuntimeError):
    pass


def stable_sampling_rate(build: Callable[[int, int, int], CrossGramian], ladder: Sequence[int],
                         theta_inv: float, epsilon: float, aspect: tuple[float, float] = (1.0, 1.0),
                         refine: bool = False, s_max: int = 4096,
                         sigma: Callable[[CrossGramian], float] = smallest_singular_value) -> RateCurve:
    """Minimal sample block with sigma_min >= theta_inv for each N in ``ladder``.

    ``build(N, M1, M2)`` returns the cross-Gramian of the first N elements.
    The scalar s is bisected along the aspect direction; ``refine`` then
    decrements M1 and M2 one at a time while the criterion still holds.
    """
    if not 0 < theta_inv < 1:
        raise ValueError("need theta > 1, i.e. 0 < 1/theta < 1")
    d = np.asarray(aspect, float) / max(aspect)
    curve = RateCurve(theta_inv, epsilon)

    def M_of(s):
        return max(1, ceil(s * d[0] - 1e-12)), max(1, ceil(s * d[1] - 1e-12))

    cache: dict = {}

    def ok(N, M1, M2):
        key = (N, M1, M2)
        if key not in cache:
            val = sigma(build(N, M1, M2))
            cache[key] = val
            curve.trace.append((N, M1, M2, val))
        return cache[key] >= theta_inv, cache[key]

    s_lo = 1
    for N in ladder:
        # smallest s with ok(s); bracket then bisect
        s = s_lo
        if ok(N, *M_of(s))[0]:
            hi = s
            lo = s - 1
        else:
            lo = s
            hi = 2 * s
            while not ok(N, *M_of(hi))[0]:
                lo = hi
                hi *= 2
                if hi > s_max:
                    M1, M2 = M_of(lo)
                    raise RateSearchError(f"N={N}: no acceptable M up to s={lo} (sigma_min={cache[(N, M1, M2)]:.6g})")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(N, *M_of(mid))[0]:
                hi = mid
            else:
                lo = mid
        M1, M2 = M_of(hi)
        if refine:
            changed = True
            while changed:
                changed = False
                for axis in (0, 1):
                    cand = [M1, M2]
                    cand[axis] -= 1
                    if cand[axis] >= 1 and ok(N, *cand)[0]:
                        M1, M2 = cand
                        changed = True
        curve.points.append(RatePoint(N, M1, M2, ok(N, M1, M2)[1]))
        s_lo = max(1, hi)
    return curve


def loglog_slope(curve: RateCurve) -> float:
    n = np.log([p.N for p in curve.points])
    t = np.log([p.total for p in curve.points])
    return float(np.polyfit(n, t, 1)[0])


# --------------------------------------------------------------------------
# quasi-optimality

def quasi_optimality_check(U: CrossGramian, m: np.ndarray, beta: np.ndarray, f_norm_sq: float,
                           tol: float = 1e-5) -> dict:
    """Sandwich ||f - P f|| <= ||f - G f|| <= ||f - P f|| / sigma_min.

    ``beta`` holds the inner products <f, r_j> with the orthonormal basis, so
    ||f - Pf||^2 = ||f||^2 - |beta|^2 and ||f - Gf||^2 = ||f - Pf||^2 + |alpha - beta|^2.
    """
    res = gs_solve(U, m)
    best = sqrt(max(f_norm_sq - float(np.vdot(beta, beta).real), 0.0))
    gs = sqrt(best**2 + float(np.linalg.norm(res.alpha - beta) ** 2))
    rhs = best / res.sigma_min
    return {"lhs": best, "gs": gs, "rhs": rhs, "mu_bound": res.constant,
            "holds": bool(best <= gs + tol and gs <= rhs + tol), "alpha": res.alpha}


# --------------------------------------------------------------------------
# grid Parseval, MZ bound

def trig_poly(alpha: np.ndarray, k0: int, l0: int, z1, z2) -> np.ndarray:
    """Phi(z) = sum alpha_{k,l} exp(2 pi i (k z1 + l z2)), indices starting at (k0, l0)."""
    k = np.arange(k0, k0 + alpha.shape[0])
    l = np.arange(l0, l0 + alpha.shape[1])
    E1 = np.exp(2j * np.pi * np.multiply.outer(np.asarray(z1, float), k))
    E2 = np.exp(2j * np.pi * np.multiply.outer(np.asarray(z2, float), l))
    return E1 @ alpha @ E2.T


def grid_parseval_check(alpha: np.ndarray, L1: int, L2: int, k0: int = 0, l0: int = 0) -> float:
    """|grid mean of |Phi|^2 - sum |alpha|^2| on the (2L1) x (2L2) grid."""
    alpha = np.asarray(alpha, dtype=complex)
    w1, w2 = alpha.shape
    if 2 * L1 < w1 or 2 * L2 < w2:
        raise ValueError(f"grid {2 * L1}x{2 * L2} too small for a {w1}x{w2} coefficient block")
    n1, n2 = 2 * L1, 2 * L2
    F = np.zeros((n1, n2), dtype=complex)
    F[:w1, :w2] = alpha
    vals = np.fft.ifft2(F) * (n1 * n2)
    # shift of the index origin is a unimodular factor
    lhs = float(np.sum(np.abs(vals) ** 2)) / (n1 * n2)
    return abs(lhs - float(np.sum(np.abs(alpha) ** 2)))


def mz_lower_bound(delta: float, L: Sequence[int], mu: float) -> tuple[float, bool]:
    """C = 1 - (exp(2 pi delta max|L_i|) - 1) sqrt(mu); flag False when C <= 0."""
    lmax = max(abs(v) for v in L)
    C = 1.0 - (exp(2 * pi * delta * lmax) - 1.0) * sqrt(mu)
    if C <= 0:
        warnings.warn("mesh norm above the MZ threshold; bound is vacuous", RuntimeWarning)
    return C, C > 0


def polynomial_norm_sq(alpha: np.ndarray, k0: int, l0: int, B: np.ndarray, M: tuple[int, int]) -> float:
    """Integral of |Phi|^2 over B [-M1,M1] x [-M2,M2] (Phi uses e^{-2 pi i <x, n>})."""
    k = np.arange(k0, k0 + alpha.shape[0])
    l = np.arange(l0, l0 + alpha.shape[1])
    K, Lg = np.meshgrid(k, l, indexing="ij")
    n = np.column_stack([K.ravel(), Lg.ravel()]).astype(float)
    a = alpha.ravel()
    d = n[:, None, :] - n[None, :, :]
    w = d @ B  # (B^T d)
    kern = (2 * M[0]) * np.sinc(2 * M[0] * w[..., 0]) * (2 * M[1]) * np.sinc(2 * M[1] * w[..., 1])
    return float(abs(np.linalg.det(B)) * np.real(np.conj(a) @ kern @ a))


def mz_discrete_sum(alpha: np.ndarray, k0: int, l0: int, B: np.ndarray, M: tuple[int, int]) -> float:
    """sum_l |det B| |Phi(B l)|^2 over |l_i| <= M_i."""
    l1, l2 = np.meshgrid(np.arange(-M[0], M[0] + 1), np.arange(-M[1], M[1] + 1), indexing="ij")
    x = (B @ np.vstack([l1.ravel(), l2.ravel()])).T
    k = np.arange(k0, k0 + alpha.shape[0])
    l = np.arange(l0, l0 + alpha.shape[1])
    E1 = np.exp(-2j * np.pi * np.outer(x[:, 0], k))
    E2 = np.exp(-2j * np.pi * np.outer(x[:, 1], l))
    vals = np.einsum("pk,kl,pl->p", E1, alpha, E2)
    return float(abs(np.linalg.det(B)) * np.sum(np.abs(vals) ** 2))


# --------------------------------------------------------------------------
# tail mass and epsilon transfer

def tail_mass_S(evaluator, theta: float, grid: int = 64, S_max: int = 4096) -> int:
    """Minimal S with min over a xi grid of sum_{|s|,|t|<S} |phihat(xi+(s,t))|^2 >= 1/theta."""
    if theta <= 1:
        raise ValueError("theta must exceed 1")
    xi = (np.arange(grid) + 0.5) / grid - 0.5
    target = 1.0 / theta
    partial = np.abs(evaluator.scaling_hat(xi)) ** 2
    S = 1
    while True:
        # separable: the 2D minimum over a product grid is the square of the 1D minimum
        if np.min(partial) ** 2 >= target:
            return S
        S += 1
        if S > S_max:
            raise RuntimeError(f"tail mass target {target} not reached for S <= {S_max}")
        partial = partial + np.abs(evaluator.scaling_hat(xi + (S - 1))) ** 2 + np.abs(evaluator.scaling_hat(xi - (S - 1))) ** 2


def transfer_constraint(gamma: float, theta: float, C: float) -> float:
    """Left side minus right side of the transfer constraint (must be > 0)."""
    if C == 1:
        raise ZeroDivisionError("C(gamma) = 1 makes the constraint singular")
    inner = 1.0 / theta**2 - 16.0 / (pi**4 * (C - 1) ** 2)
    if inner < 0:
        return -float("inf")
    return sqrt(inner) - sqrt(max(1.0 - 1.0 / theta, 0.0)) - 1.0 / gamma


def minimal_transfer_C(gamma: float, theta: float) -> float:
    """Infimum of feasible C(gamma) for the given theta (feasible means strictly above)."""
    r = 1.0 / gamma + sqrt(max(1.0 - 1.0 / theta, 0.0))
    gap = 1.0 / theta**2 - r * r
    if gap <= 0:
        raise ValueError("no C satisfies the constraint for this theta")
    return 1.0 + 4.0 / (pi * pi * sqrt(gap))


def epsilon_transfer(gamma: float, eps1: float, eps2: float, M: tuple[int, int], theta: float,
                     C: float) -> tuple[int, int]:
    if transfer_constraint(gamma, theta, C) <= 0:
        raise ValueError("theta(gamma), C(gamma) violate the transfer constraint")
    return (int(ceil(C * M[0] * eps1 / eps2 - 1e-12)), int(ceil(C * M[1] * eps1 / eps2 - 1e-12)))
