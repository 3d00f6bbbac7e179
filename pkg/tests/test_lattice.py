import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from f2w.lattice import (BasisIndex, ScalingMatrix2, check_assumption, count_elements, count_elements_diag2,
                         matrix_power, mesh_norm, mesh_norm_dense, node_matrix, order_basis, region_measure,
                         theorem_M, voronoi_measures)
from f2w.wavelets import expansion_bounds

D2 = ScalingMatrix2.diag(2, 2)
SHEAR = ScalingMatrix2(2, 1, 0, 2)
MATRICES = [D2, ScalingMatrix2.diag(2, 3), SHEAR]


def test_rejects_non_expanding():
    with pytest.raises(ValueError):
        ScalingMatrix2(1, 0, 0, 2)
    with pytest.raises(ValueError):
        ScalingMatrix2(2, -1, 0, 2)


def test_powers():
    assert matrix_power(D2, 3) == ((8, 0, 0, 8), 64)
    assert matrix_power(SHEAR, 0) == ((1, 0, 0, 1), 1)
    assert matrix_power(SHEAR, 2) == ((4, 4, 0, 4), 16)


@pytest.mark.parametrize("A", MATRICES)
def test_power_recurrence_and_det(A):
    for j in range(1, 9):
        p, q = A.power_entries(j), A.power_entries(j - 1)
        assert p[0] + p[1] == q[0] * (A.l1 + A.l2) + q[1] * (A.l3 + A.l4)
        assert p[2] + p[3] == q[2] * (A.l1 + A.l2) + q[3] * (A.l3 + A.l4)
        assert A.det_power(j) == A.det ** j
        assert np.array_equal(A.power(j), np.linalg.matrix_power(A.power(1), j))


def test_power_overflow_detected():
    with pytest.raises(OverflowError):
        D2.power_entries(80)


def test_counts():
    assert [count_elements(D2, 1, J) for J in range(1, 6)] == [4, 16, 64, 256, 1024]
    assert [count_elements(D2, 3, J) for J in range(1, 5)] == [100, 292, 880, 2908]
    for A in MATRICES:
        assert count_elements(A, 1, 0) == 1


@pytest.mark.parametrize("A", MATRICES)
def test_count_matches_enumeration(A):
    for a in (1, 2, 3):
        for J in range(5):
            brute = (2 * a - 1) ** 2
            for j in range(J):
                P = A.power_entries(j)
                brute += (abs(A.det) - 1) * sum(1 for m1 in range(-a + 1, a * (P[0] + P[1]))
                                                for m2 in range(-a + 1, a * (P[2] + P[3])))
            assert count_elements(A, a, J) == brute == len(order_basis(A, a, J))


@given(st.integers(1, 6), st.integers(0, 8))
def test_closed_form_count(a, J):
    assert count_elements(D2, a, J) == count_elements_diag2(a, J)


def test_growth_constant_bounded():
    for a in (1, 2, 3):
        ratios = []
        for J in range(1, 9):
            P = D2.power_entries(J)
            ratios.append(count_elements(D2, a, J) / ((P[0] + P[1]) * (P[2] + P[3])))
        # bounded and settling to a^2 from above
        assert all(b <= r for r, b in zip(ratios, ratios[1:]))
        assert a * a <= ratios[-1] <= a * a + 1


def test_ordering_haar():
    b = order_basis(D2, 1, 1)
    assert [(x.kind, x.generator, x.scale, x.m1, x.m2, x.position) for x in b] == [
        ("scaling", 0, 0, 0, 0, 1), ("wavelet", 1, 0, 0, 0, 2),
        ("wavelet", 2, 0, 0, 0, 3), ("wavelet", 3, 0, 0, 0, 4)]
    b2 = order_basis(D2, 1, 2)
    assert b2[:4] == b
    tail = b2[4:]
    assert len(tail) == 12 and all(x.scale == 1 for x in tail)
    assert [(x.generator, x.m1, x.m2) for x in tail[:4]] == [(1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
    assert order_basis(D2, 1, 0) == [BasisIndex("scaling", 0, 0, 0, 0, 1)]


@pytest.mark.parametrize("A", MATRICES)
def test_ordering_positions_bijective(A):
    b = order_basis(A, 2, 3)
    assert [x.position for x in b] == list(range(1, len(b) + 1))
    assert len({(x.kind, x.generator, x.scale, x.m1, x.m2) for x in b}) == len(b)


def test_mesh_norm_values():
    assert mesh_norm(D2, 3, 0.5, (8, 8)) <= 0.5 / 8
    assert mesh_norm(D2, 3, 0.5, (8, 8)) == pytest.approx(1 / 32, abs=1e-14)
    assert mesh_norm(D2, 0, 1.0, (4, 4)) == pytest.approx(0.5, abs=1e-14)


def test_mesh_norm_against_dense_grid():
    exact = mesh_norm(SHEAR, 1, 0.25, (8, 8))
    dense = mesh_norm_dense(SHEAR, 1, 0.25, (8, 8), resolution=2048)
    assert abs(exact - dense) <= 1 / 2048


def test_mesh_norm_dense_rejects_coarse_grid():
    with pytest.raises(ValueError):
        mesh_norm_dense(D2, 4, 0.5, (8, 8), resolution=4)


def test_mesh_norm_shrinks_with_epsilon():
    vals = [mesh_norm(D2, 2, 2.0 ** -k, (4, 4)) for k in range(1, 8)]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-2


@pytest.mark.parametrize("A,J,eps", [(D2, 1, 0.5), (SHEAR, 1, 0.25), (ScalingMatrix2.diag(2, 3), 1, 0.5)])
def test_voronoi_partition(A, J, eps):
    M = (3, 3)
    mu = voronoi_measures(A, J, eps, M)
    cap = eps**2 / abs(A.det_power(J))
    assert np.all(mu <= cap + 1e-12)
    assert abs(mu.sum() - region_measure(A, J, eps, M)) <= 1e-12


def test_voronoi_unit_grid():
    mu = voronoi_measures(D2, 0, 1.0, (2, 2))
    assert mu[len(mu) // 2] == pytest.approx(1.0, abs=1e-12)


def test_assumption_example_chain():
    eps = 1 / (8 * math.pi)
    for J in range(1, 7):
        r = check_assumption(D2, J, eps, theorem_M(D2, J, eps), expansion_bounds(D2, 1, J))
        assert r["holds"], (J, r)


def test_assumption_degenerate_and_violation():
    r = check_assumption(D2, 1, 0.5, (1, 1), (1, 1, 0, 0), delta=0.0)
    assert r["holds"]
    bad = check_assumption(D2, 4, 0.5, theorem_M(D2, 4, 0.5), expansion_bounds(D2, 1, 4))
    assert not bad["holds"]
    assert bad["lhs"] == pytest.approx(1 / 64, abs=1e-14)
    # mu = (1/4) 4 * 32 * 32 / 256 = 4 and max|L| = 15
    assert bad["mu"] == pytest.approx(4.0)
    assert bad["rhs"] == pytest.approx(math.log(1.5) / (60 * math.pi), rel=1e-12)


def test_node_matrix():
    assert np.allclose(node_matrix(D2, 2, 0.5), np.eye(2) / 8)
    B = node_matrix(SHEAR, 1, 1.0)
    assert np.allclose(B, np.linalg.inv(SHEAR.power(1)).T)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MATRICES), st.integers(0, 3), st.sampled_from([1.0, 0.5, 0.25]))
def test_mesh_norm_bounded_by_cell(A, J, eps):
    B = node_matrix(A, J, eps)
    d = mesh_norm(A, J, eps, (3, 3))
    assert 0 <= d <= 0.5 * np.abs(B).sum(axis=1).max() + 1e-12


@pytest.mark.parametrize("A,J,eps", [(SHEAR, 1, 0.25), (D2, 1, 0.5)])
def test_voronoi_matches_raster(A, J, eps):
    M = (2, 2)
    mu = voronoi_measures(A, J, eps, M)
    B = node_matrix(A, J, eps)
    nodes = np.array([B @ np.array([i, j], float) for i in range(-2, 3) for j in range(-2, 3)])
    n = 400
    u = (np.arange(n) + 0.5) / n * 2 - 1
    U1, U2 = np.meshgrid(u * M[0], u * M[1], indexing="ij")
    pts = np.column_stack([U1.ravel(), U2.ravel()]) @ B.T
    d = np.max(np.abs(pts[:, None, :] - nodes[None, :, :]), axis=2)
    owner = np.argmin(d, axis=1)
    raster = np.bincount(owner, minlength=len(nodes)) * region_measure(A, J, eps, M) / len(pts)
    assert np.max(np.abs(raster - mu)) <= 0.02 * mu.max()
