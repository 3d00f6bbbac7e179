"""Integer dilation matrices, element counting/ordering, mesh norm,
Voronoi cell measures and the sampling-density assumption."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import ceil, log, pi, sqrt

import numpy as np
from scipy.spatial import cKDTree
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class ScalingMatrix2:
    """A = [[l1, l2], [l3, l4]] with non-negative integer entries."""

    l1: int
    l2: int
    l3: int
    l4: int
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        ent = (self.l1, self.l2, self.l3, self.l4)
        if any(int(e) != e or e < 0 for e in ent):
            raise ValueError(f"entries must be non-negative integers, got {ent}")
        ev = np.linalg.eigvals(np.array([[self.l1, self.l2], [self.l3, self.l4]], float))
        if np.min(np.abs(ev)) <= 1:
            raise ValueError(f"eigenvalues {ev} must all have modulus > 1")

    @classmethod
    def diag(cls, d1: int, d2: int) -> "ScalingMatrix2":
        return cls(d1, 0, 0, d2)

    @classmethod
    def from_string(cls, text: str) -> "ScalingMatrix2":
        vals = [int(v) for v in text.replace(",", " ").split()]
        if len(vals) != 4:
            raise ValueError("a scaling matrix needs four integers l1 l2 l3 l4")
        return cls(*vals)

    @property
    def entries(self) -> tuple[int, int, int, int]:
        return (self.l1, self.l2, self.l3, self.l4)

    @property
    def det(self) -> int:
        return self.l1 * self.l4 - self.l2 * self.l3

    @property
    def is_diagonal(self) -> bool:
        return self.l2 == 0 and self.l3 == 0

    def power_entries(self, j: int) -> tuple[int, int, int, int]:
        if j < 0:
            raise ValueError("power must be non-negative")
        if j in self._cache:
            return self._cache[j]
        out = (1, 0, 0, 1)
        base = self.entries
        k = j
        while k:
            if k & 1:
                out = _mul(out, base)
            k >>= 1
            if k:
                base = _mul(base, base)
        if max(out) > INT64_MAX:
            raise OverflowError(f"A^{j} has entries beyond the 64-bit range")
        self._cache[j] = out
        return out

    def power(self, j: int) -> np.ndarray:
        return np.array(self.power_entries(j), dtype=np.int64).reshape(2, 2)

    def det_power(self, j: int) -> int:
        return self.det**j

    def inverse_power(self, j: int) -> np.ndarray:
        """A^{-j} as floats."""
        return np.linalg.inv(self.power(j).astype(float))


def _mul(x, y):
    a, b, c, d = x
    e, f, g, h = y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def matrix_power(A: ScalingMatrix2, j: int) -> tuple[tuple[int, int, int, int], int]:
    """Entries of A^j and det A^j."""
    return A.power_entries(j), A.det_power(j)


# --------------------------------------------------------------------------
# reconstruction elements

@dataclass(frozen=True)
class BasisIndex:
    kind: str  # "scaling" or "wavelet"
    generator: int  # 0 for scaling
    scale: int
    m1: int
    m2: int
    position: int  # 1-based


def _wavelet_ranges(A: ScalingMatrix2, a: int, j: int):
    P = A.power_entries(j)
    return range(-a + 1, a * (P[0] + P[1])), range(-a + 1, a * (P[2] + P[3]))


def count_elements(A: ScalingMatrix2, a: int, J: int) -> int:
    if a < 1 or J < 0:
        raise ValueError("need a >= 1 and J >= 0")
    n = (2 * a - 1) ** 2
    for j in range(J):
        r1, r2 = _wavelet_ranges(A, a, j)
        n += (abs(A.det) - 1) * len(r1) * len(r2)
    return n


def count_elements_diag2(a: int, J: int) -> int:
    """Closed form for A = diag(2,2)."""
    return (4**J - 1) * a * a + 6 * a * (a - 1) * (2**J - 1) + 3 * J * (a - 1) ** 2 + (2 * a - 1) ** 2


def order_basis(A: ScalingMatrix2, a: int, J: int) -> list[BasisIndex]:
    out = []
    pos = 1
    for m1 in range(-a + 1, a):
        for m2 in range(-a + 1, a):
            out.append(BasisIndex("scaling", 0, 0, m1, m2, pos))
            pos += 1
    for j in range(J):
        r1, r2 = _wavelet_ranges(A, a, j)
        for g in range(1, abs(A.det)):
            for m1 in r1:
                for m2 in r2:
                    out.append(BasisIndex("wavelet", g, j, m1, m2, pos))
                    pos += 1
    return out


# --------------------------------------------------------------------------
# node geometry

def node_matrix(A: ScalingMatrix2, J: int, eps: float) -> np.ndarray:
    """B with nodes x_l = B l, B = eps (A^{-J})^T."""
    return eps * A.inverse_power(J).T


def _reduce_basis(B: np.ndarray) -> np.ndarray:
    """Lagrange-Gauss reduction of the lattice basis (columns of B)."""
    b1, b2 = B[:, 0].copy(), B[:, 1].copy()
    if b1 @ b1 > b2 @ b2:
        b1, b2 = b2, b1
    while True:
        mu = round((b1 @ b2) / (b1 @ b1))
        b2 = b2 - mu * b1
        if b2 @ b2 >= b1 @ b1:
            return np.column_stack([b1, b2])
        b1, b2 = b2, b1


def linf_covering_radius(B: np.ndarray) -> float:
    """max_x min_l ||x - B l||_inf for the full lattice B Z^2 (exact).

    The distance function is piecewise linear; its maximum sits where three
    linear pieces x_i - p_i = s t meet. Candidates are enumerated from nearby
    lattice points and kept if the true distance matches.
    """
    R = _reduce_basis(np.asarray(B, float))
    rng = range(-2, 3)
    pts = np.array([R @ np.array([i, j]) for i in rng for j in rng])
    wide = np.array([R @ np.array([i, j]) for i in range(-4, 5) for j in range(-4, 5)])
    pieces = [(p, ax, s) for p in pts for ax in (0, 1) for s in (1.0, -1.0)]
    best = 0.0
    n = len(pieces)
    rows = np.zeros((n, 3))
    rhs = np.zeros(n)
    for k, (p, ax, s) in enumerate(pieces):
        rows[k, ax] = 1.0
        rows[k, 2] = -s
        rhs[k] = p[ax]
    combos = np.array(list(itertools.combinations(range(n), 3)))
    Ms = rows[combos]
    bs = rhs[combos]
    det = np.linalg.det(Ms)
    good = np.abs(det) > 1e-12
    sol = np.linalg.solve(Ms[good], bs[good][..., None])[..., 0]
    t = sol[:, 2]
    keep = t > 0
    sol, t = sol[keep], t[keep]
    # only points in the Voronoi neighbourhood of the origin matter
    dist = np.min(np.max(np.abs(sol[:, None, :2] - wide[None]), axis=2), axis=1)
    ok = np.abs(dist - t) <= 1e-12 * max(1.0, np.max(np.abs(R)))
    if np.any(ok):
        best = float(np.max(t[ok]))
    return best


def _contains_integer_lattice(B: np.ndarray) -> bool:
    Binv = np.linalg.inv(B)
    return bool(np.allclose(Binv, np.rint(Binv), atol=1e-9))


def mesh_norm(A: ScalingMatrix2, J: int, eps: float, M: tuple[int, int]) -> float:
    """Mesh norm of the nodes eps (A^{-J})^T l, |l_i| <= M_i, over their region.

    Computed as the l_inf covering radius of the node lattice. When the
    lattice contains Z^2 the quotient metric sees every node class and the
    value is exact; for diagonal A it is exact on the region as well.
    """
    if min(M) < 1 or eps <= 0:
        raise ValueError("need M_i >= 1 and eps > 0")
    return linf_covering_radius(node_matrix(A, J, eps))


def mesh_norm_dense(A: ScalingMatrix2, J: int, eps: float, M: tuple[int, int],
                    resolution: int = 2048) -> float:
    """Dense-grid oracle: max over a grid on the region of the quotient distance."""
    B = node_matrix(A, J, eps)
    M1, M2 = M
    step = max(np.abs(B @ np.array([2 * M1, 0]))) / resolution + max(np.abs(B @ np.array([0, 2 * M2]))) / resolution
    spacing = min(np.linalg.norm(_reduce_basis(B), ord=np.inf, axis=0))
    if step > spacing:
        raise ValueError(f"grid step {step:.3g} is coarser than the node spacing {spacing:.3g}")
    l1, l2 = np.meshgrid(np.arange(-M1, M1 + 1), np.arange(-M2, M2 + 1), indexing="ij")
    nodes = (B @ np.vstack([l1.ravel(), l2.ravel()])).T % 1.0
    tree = cKDTree(nodes, boxsize=1.0)
    u = np.linspace(-M1, M1, resolution + 1)
    v = np.linspace(-M2, M2, resolution + 1)
    best = 0.0
    for chunk in np.array_split(u, max(1, len(u) // 256)):
        U, V = np.meshgrid(chunk, v, indexing="ij")
        x = (B @ np.vstack([U.ravel(), V.ravel()])).T % 1.0
        d, _ = tree.query(x, p=np.inf)
        best = max(best, float(d.max()))
    return best


def region_measure(A: ScalingMatrix2, J: int, eps: float, M: tuple[int, int]) -> float:
    """mu(Omega) for Omega = eps (A^{-J})^T [-M1,M1] x [-M2,M2]."""
    return eps * eps * 4 * M[0] * M[1] / abs(A.det_power(J))


def _square(c, r):
    return box(c[0] - r, c[1] - r, c[0] + r, c[1] + r)


def _closer_region(a, b, window) -> Polygon:
    """{x in window : ||x-a||_inf <= ||x-b||_inf} as a union of convex pieces."""
    big = 4 * max(window.bounds[2] - window.bounds[0], window.bounds[3] - window.bounds[1]) + 4 * np.max(np.abs(a - b))
    def cones(c):
        cx, cy = c
        return [  # (polygon, axis, sign): on the cone ||x-c|| = s (x_axis - c_axis)
            (Polygon([(cx, cy), (cx + big, cy - big), (cx + big, cy + big)]), 0, 1.0),
            (Polygon([(cx, cy), (cx - big, cy + big), (cx - big, cy - big)]), 0, -1.0),
            (Polygon([(cx, cy), (cx + big, cy + big), (cx - big, cy + big)]), 1, 1.0),
            (Polygon([(cx, cy), (cx - big, cy - big), (cx + big, cy - big)]), 1, -1.0),
        ]
    parts = []
    for ca, ia, sa in cones(a):
        pa = ca.intersection(window)
        if pa.is_empty:
            continue
        for cb, ib, sb in cones(b):
            piece = pa.intersection(cb)
            if piece.is_empty or piece.area == 0:
                continue
            # sa (x_ia - a_ia) <= sb (x_ib - b_ib) as a half plane
            coef = np.zeros(2)
            coef[ia] += sa
            coef[ib] -= sb
            const = sa * a[ia] - sb * b[ib]  # coef . x <= const
            hp = _half_plane(coef, const, piece.bounds)
            if hp is None:
                parts.append(piece)
            elif not hp.is_empty:
                parts.append(piece.intersection(hp))
    return unary_union(parts)


def _half_plane(coef, const, bounds):
    """Polygon of {x : coef.x <= const} covering ``bounds``; None means whole plane."""
    x0, y0, x1, y1 = bounds
    span = 2 * (x1 - x0 + y1 - y0) + 1
    if np.allclose(coef, 0):
        return None if const >= 0 else Polygon()
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    pad = span
    bb = box(x0 - pad, y0 - pad, x1 + pad, y1 + pad)
    n = coef / np.linalg.norm(coef)
    c = const / np.linalg.norm(coef)
    # point on the line and its direction
    p0 = n * c
    d = np.array([-n[1], n[0]])
    L = 10 * (span + np.max(np.abs(corners)) + abs(c))
    poly = Polygon([p0 + d * L, p0 - d * L, p0 - d * L - n * L, p0 + d * L - n * L])
    return poly.intersection(bb)


def voronoi_measures(A: ScalingMatrix2, J: int, eps: float, M: tuple[int, int]) -> np.ndarray:
    """l_inf Voronoi cell areas of the nodes clipped to Omega.

    Nodes are ordered row-major (l1 outer); ties go to the earliest node.
    """
    # scale nodes to integers (l_inf is invariant under scalar scaling)
    scale = abs(A.det_power(J)) / eps
    B = node_matrix(A, J, eps) * scale
    B = np.rint(B) if np.allclose(B, np.rint(B)) else B
    M1, M2 = M
    omega = Polygon([tuple(B @ np.array(c)) for c in [(-M1, -M2), (M1, -M2), (M1, M2), (-M1, M2)]])
    ls = [(i, j) for i in range(-M1, M1 + 1) for j in range(-M2, M2 + 1)]
    nodes = np.array([B @ np.array(l, float) for l in ls])
    r0 = max(np.max(np.abs(B @ np.array(v))) for v in [(0.5, 0.5), (0.5, -0.5)])
    tree = cKDTree(nodes)
    cells: dict[int, Polygon] = {}
    out = np.zeros(len(nodes))
    for k, y in enumerate(nodes):
        window = _square(y, r0 * (1 + 1e-9)).intersection(omega)
        cell = window
        near = tree.query_ball_point(y, 2 * r0 * 1.0000001 * sqrt(2), p=2)
        for q in near:
            if q == k:
                continue
            cell = cell.intersection(_closer_region(y, nodes[q], window))
            if cell.is_empty:
                break
        earlier = [cells[q] for q in near if q < k and q in cells]
        if earlier and not cell.is_empty:
            cell = cell.difference(unary_union(earlier))
        cells[k] = cell
        out[k] = cell.area / scale**2
    return out


def check_assumption(A: ScalingMatrix2, J: int, eps: float, M: tuple[int, int],
                     L: tuple[int, int, int, int], delta: float | None = None) -> dict:
    """Compare the mesh norm with log(1/sqrt(mu)+1) / (4 pi max|L_i|)."""
    if delta is None:
        delta = mesh_norm(A, J, eps, M)
    mu = region_measure(A, J, eps, M)
    lmax = max(abs(v) for v in L)
    rhs = float("inf") if lmax == 0 else log(1 / sqrt(mu) + 1) / (4 * pi * lmax)
    return {"holds": bool(delta < rhs), "lhs": float(delta), "rhs": float(rhs), "mu": mu}


def theorem_M(A: ScalingMatrix2, J: int, eps: float, S: int = 1) -> tuple[int, int]:
    """M = ceil((A^J)^T (S,S) / eps) componentwise."""
    v = A.power(J).T @ np.array([S, S])
    return int(ceil(v[0] / eps - 1e-12)), int(ceil(v[1] / eps - 1e-12))
