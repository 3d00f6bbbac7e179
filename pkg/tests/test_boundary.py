import numpy as np
import pytest

from f2w.boundary import (BoundaryFamily, BoundarySystem, boundary_gramian_entry, build_edge_functions,
                          enumerate_boundary_basis, gram_schmidt, gram_schmidt_boundary)
from f2w.gramian import SamplingScheme, SeparableGenerators, haar_entry, interior_entry
from f2w.lattice import BasisIndex, ScalingMatrix2
from f2w.wavelets import WaveletFamily, cascade_evaluate

D2 = ScalingMatrix2.diag(2, 2)


@pytest.fixture(scope="module")
def families():
    return {p: BoundaryFamily(p) for p in (1, 2, 3)}


def _half_line_quadrature(p, level=14):
    """<phi(.-s) chi_[0,inf), phi(.-t)> by trapezoid sums on the cascade grid."""
    c = cascade_evaluate(WaveletFamily.daubechies(p, centered=True), level, tol=1e-13)
    h = c.step
    x = np.arange(0, (3 * p + 2) * 2**level + 1) * h
    w = np.full(len(x), h)
    w[0] = w[-1] = h / 2

    def ip(s, t):
        return float(np.sum(w * c(x - s) * c(x - t)))
    return ip


def test_edge_table():
    e1 = build_edge_functions(1)
    assert e1.coeffs.tolist() == [[1.0]] and e1.translates.tolist() == [0]
    e2 = build_edge_functions(2)
    assert e2.coeffs.tolist() == [[1, 1, 1], [0, 1, 2]]
    assert e2.translates.tolist() == [1, 0, -1]


@pytest.mark.parametrize("p", [1, 2, 3])
def test_edges_orthogonal_to_interior(families, p):
    fam = families[p]
    e = build_edge_functions(p)
    ip = _half_line_quadrature(p)
    for m in range(p, p + 4):
        exact = e.coeffs @ np.array([fam.half_line_gram(t, m) for t in e.translates])
        quad = e.coeffs @ np.array([ip(t, m) for t in e.translates])
        assert np.max(np.abs(exact)) <= 1e-12
        assert np.max(np.abs(quad)) <= 1e-6


@pytest.mark.parametrize("p", [2, 3])
def test_half_line_gram_against_quadrature(families, p):
    fam = families[p]
    ip = _half_line_quadrature(p)
    for s in range(-p + 1, p):
        for t in range(-p + 1, p):
            assert abs(fam.half_line_gram(s, t) - ip(s, t)) <= 1e-4


@pytest.mark.parametrize("p", [1, 2, 3])
def test_gram_schmidt_left(families, p):
    coeffs, t = gram_schmidt_boundary(p)
    fam = families[p]
    G = np.array([[fam.half_line_gram(a, b) for b in t] for a in t])
    assert np.max(np.abs(coeffs @ G @ coeffs.T - np.eye(p))) <= 1e-12
    ip = _half_line_quadrature(p)
    Gq = np.array([[ip(a, b) for b in t] for a in t])
    assert np.max(np.abs(coeffs @ Gq @ coeffs.T - np.eye(p))) <= 1e-4
    if p == 1:
        assert coeffs.tolist() == [[1.0]]


def test_gram_schmidt_rejects_singular():
    with pytest.raises(np.linalg.LinAlgError):
        gram_schmidt(np.array([[1.0, 0.0], [2.0, 0.0]]), np.eye(2))


@pytest.mark.parametrize("p", [1, 2, 3])
def test_scaling_basis_orthonormal(families, p):
    fam = families[p]
    for j in range(fam.J0, fam.J0 + 3):
        S = fam.scaling_basis(j)
        assert S.shape[0] == 2**j
        G = S @ fam.restricted_gram(j) @ S.T
        assert np.max(np.abs(G - np.eye(2**j))) <= 1e-12


@pytest.mark.parametrize("p", [2, 3])
def test_scaling_basis_orthonormal_by_quadrature(families, p):
    fam = families[p]
    j = fam.J0
    x = np.linspace(0, 1, 2**13 + 1)
    w = np.full(len(x), x[1])
    w[0] = w[-1] = x[1] / 2
    V = fam.evaluate(fam.scaling_basis(j), j, x)
    G = (V * w) @ V.T
    assert np.max(np.abs(G - np.eye(2**j))) <= 1e-3


@pytest.mark.parametrize("p", [2, 3])
def test_left_right_edges(families, p):
    fam = families[p]
    j = fam.J0 + 1
    n = 2**j
    S = fam.scaling_basis(j)
    G = S @ fam.restricted_gram(j) @ S.T
    left, right = G[:p, :p], G[n - p:, n - p:]
    assert np.max(np.abs(left - right)) <= 1e-12
    x = np.linspace(0, 0.5, 257)
    V = fam.evaluate(S, j, x)
    assert np.max(np.abs(V[n - p:])) <= 1e-12
    assert np.max(np.abs(fam.evaluate(S, j, 1 - x)[:p])) <= 1e-12


@pytest.mark.parametrize("p", [1, 2, 3])
def test_wavelets_complement(families, p):
    fam = families[p]
    for j in range(fam.J0, fam.J0 + 2):
        W = fam.wavelet_basis(j)
        S1 = fam.lift(fam.scaling_basis(j), j, j + 1)
        G = fam.restricted_gram(j + 1)
        assert W.shape[0] == 2**j
        assert np.max(np.abs(W @ G @ W.T - np.eye(2**j))) <= 1e-12
        assert np.max(np.abs(W @ G @ S1.T)) <= 1e-12


@pytest.mark.parametrize("p", [1, 2, 3])
def test_nesting(families, p):
    fam = families[p]
    j = fam.J0
    coarse = fam.lift(fam.scaling_basis(j), j, j + 1)
    fine = fam.scaling_basis(j + 1)
    G = fam.restricted_gram(j + 1)
    proj = (coarse @ G @ fine.T) @ fine
    resid = coarse - proj
    assert np.sqrt(np.max(np.diag(resid @ G @ resid.T))) <= 1e-5


def test_polynomials_reproduced(families):
    # x^k for k < p lies in the scale-J0 space
    fam = families[3]
    j = fam.J0
    S = fam.scaling_basis(j)
    G = fam.restricted_gram(j)
    x = np.linspace(0.01, 0.99, 41)
    V = fam.evaluate(S, j, x)
    for k in range(3):
        c = fam.restricted_inner(j, lambda t, k=k: t**k)
        coef = S @ c
        approx = coef @ V
        assert np.max(np.abs(approx - x**k)) <= 1e-4


def test_enumeration_counts():
    assert len(enumerate_boundary_basis(1, 1)) == 4
    assert len(enumerate_boundary_basis(2, 3)) == 64
    b = enumerate_boundary_basis(3, 3)
    assert len(b) == 64 and all(x.kind == "scaling" for x in b)
    for p in (1, 2, 3):
        j0 = BoundaryFamily.coarsest_scale(p)
        for J in range(j0, j0 + 3):
            b = enumerate_boundary_basis(p, J)
            assert len(b) == 4**J
            assert sum(x.kind == "scaling" for x in b) == 4**j0
    with pytest.raises(ValueError):
        enumerate_boundary_basis(3, 2)


@pytest.mark.parametrize("p", [2, 3])
def test_2d_basis_orthonormal(families, p):
    j0 = families[p].J0
    for J in (j0, j0 + 1):
        S = BoundarySystem(p, J, families[p])
        F = S.factor_gram()
        G = F[np.ix_(S.ix, S.ix)] * F[np.ix_(S.iy, S.iy)]
        assert np.max(np.abs(G - np.eye(S.N))) <= 1e-10


def test_haar_matches_interior(families):
    S = BoundarySystem(1, 3, families[1])
    for b in S.basis[::7]:
        for l in [(0, 0), (1, 2), (-5, 3)]:
            assert abs(boundary_gramian_entry(S, b, l, 0.5) - haar_entry(b, l, 0.5)) <= 1e-12


@pytest.mark.parametrize("p", [2, 3])
def test_interior_elements_match_analytic(families, p):
    fam = families[p]
    S = BoundarySystem(p, fam.J0 + 2, fam)
    gens = SeparableGenerators(WaveletFamily.daubechies(p, centered=True))
    j = fam.J0 + 1
    sch = SamplingScheme(0.5, 20, 20)
    rng = np.random.default_rng(0)
    for _ in range(20):
        n1, n2 = rng.integers(p, 2**j - p, size=2)
        kind = ["scaling", "wavelet"][int(rng.integers(2))]
        g = 0 if kind == "scaling" else int(rng.integers(1, 4))
        b = BasisIndex(kind, g, j, int(n1), int(n2), 1)
        l = rng.integers(-20, 21, size=2)
        assert abs(boundary_gramian_entry(S, b, l, 0.5) - interior_entry(b, l, sch, gens, D2)) <= 1e-10


def test_left_edge_entry_at_zero(families):
    fam = families[3]
    S = BoundarySystem(3, fam.J0, fam)
    b = S.basis[0]  # left x left scaling element
    x = np.linspace(0, 1, 2**14 + 1)
    w = np.full(len(x), x[1])
    w[0] = w[-1] = x[1] / 2
    v = fam.evaluate(fam.scaling_basis(fam.J0)[0], fam.J0, x)
    integral = float(np.sum(w * v))
    assert abs(boundary_gramian_entry(S, b, (0, 0), 1.0) - integral**2) <= 1e-6


def test_boundary_fourier_decay(families):
    fam = families[3]
    j = fam.J0
    xi = np.logspace(0, 3, 60)
    F = fam.restricted_fourier(j, xi) @ fam.scaling_basis(j).T
    decay = np.abs(F) * (1 + xi)[:, None]
    assert np.all(np.isfinite(decay)) and decay.max() < 50


def test_element_above_scale_rejected(families):
    S = BoundarySystem(2, 2, families[2])
    with pytest.raises(ValueError):
        boundary_gramian_entry(S, BasisIndex("wavelet", 1, 2, 0, 0, 1), (0, 0), 0.5)


def test_export_table(families, tmp_path):
    fam = families[2]
    path = tmp_path / "t.txt"
    fam.export_table(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert [ln.split()[0] for ln in lines[1:]] == ["left", "left", "right", "right"]
    first = lines[1].split()
    assert len(first[2:]) % 2 == 0
    assert len(first[3].replace("-", "").replace(".", "").split("e")[0]) >= 16
