import numpy as np
import pytest

from shiftkrylov import oracle
from shiftkrylov.qcd import (CRITICAL_HOPPING, FamilyOperator, ReducedOperator, StructureError,
                             back_substitute, bipartite_parity, critical_hopping,
                             family_from_hoppings, hopping_shifts, lattice_parity, load_manifest,
                             odd_even_split, reduce, wilson_hopping_matrix)
from shiftkrylov.shift_engine import shifted_bicgstab, sqmrcgstab
from shiftkrylov.sparsela import SparseComplexMatrix, norm2

from conftest import random_bipartite

SWAP = SparseComplexMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_split_2x2():
    sp = odd_even_split(SWAP, lambda i: i % 2)
    np.testing.assert_array_equal(sp.D_eo.toarray(), [[1]])
    np.testing.assert_array_equal(sp.D_oe.toarray(), [[1]])
    np.testing.assert_array_equal(sp.even, [0])
    np.testing.assert_array_equal(sp.odd, [1])


def test_split_ring():
    # 4-cycle 0-1-2-3-0 with distinct weights
    D = np.zeros((4, 4), dtype=complex)
    for i, w in zip(range(4), [1, 2, 3, 4]):
        j = (i + 1) % 4
        D[i, j] = w
        D[j, i] = 10 * w
    sp = odd_even_split(SparseComplexMatrix.from_dense(D), np.arange(4) % 2)
    # rows (0, 2), columns (1, 3)
    np.testing.assert_array_equal(sp.D_eo.toarray(), [[1, 40], [20, 3]])
    np.testing.assert_array_equal(sp.D_oe.toarray(), [[10, 2], [4, 30]])


def test_split_partitions_and_reconstructs(rng):
    D, par = random_bipartite(40, rng)
    sp = odd_even_split(D, par)
    assert sorted(np.concatenate([sp.even, sp.odd]).tolist()) == list(range(40))
    R = sp.reconstruct()
    np.testing.assert_array_equal(R.toarray(), D.toarray())
    assert R.nnz == D.nnz


def test_split_rejects_same_parity_coupling():
    D = SparseComplexMatrix.from_dense(np.array([[0, 0, 1.0], [0, 0, 0], [1.0, 0, 0]]))
    with pytest.raises(StructureError):
        odd_even_split(D, [0, 1, 0])


def test_bipartite_parity_matches_given(rng):
    D, par = random_bipartite(30, rng, density=0.5)
    colour = bipartite_parity(D)
    odd_even_split(D, colour)  # valid split
    rows, cols, _ = D.triplets()
    assert np.all(colour[rows] != colour[cols])


def test_bipartite_parity_detects_odd_cycle():
    tri = SparseComplexMatrix.from_dense(np.ones((3, 3)) - np.eye(3))
    with pytest.raises(StructureError):
        bipartite_parity(tri)


def test_reduce_hand_example():
    sys_ = reduce(odd_even_split(SWAP, [0, 1]), 0.5, np.array([1.0, 1.0]))
    op = sys_.operator
    # (k^-2 - 1) x_o = k^-2 (1 + k)
    assert (op @ np.array([1.0 + 0j]))[0] == pytest.approx(3.0)
    assert sys_.rhs_reduced[0] == pytest.approx(6.0)
    x = back_substitute(odd_even_split(SWAP, [0, 1]), 0.5, [1.0, 1.0], [2.0])
    np.testing.assert_allclose(x, [2.0, 2.0])


def test_reduce_zero_rhs(rng):
    D, par = random_bipartite(10, rng)
    sys_ = reduce(odd_even_split(D, par), 0.1, np.zeros(10))
    assert not np.any(sys_.rhs_reduced)


def _dense_reduced(split, k):
    M = split.D_oe.toarray() @ split.D_eo.toarray()
    return np.eye(M.shape[0]) / k ** 2 - M


def test_reduction_with_back_substitution(rng):
    for _ in range(10):
        n = int(rng.integers(4, 65))
        D, par = random_bipartite(n, rng)
        k = 0.5 / np.linalg.norm(D.toarray(), 2)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        sp = odd_even_split(D, par)
        x_o = oracle.dense_solve(_dense_reduced(sp, k), reduce(sp, k, b).rhs_reduced)
        x = back_substitute(sp, k, b, x_o)
        assert norm2(x - k * (D @ x) - b) <= 1e-10 * norm2(b)


def test_operator_equivalence(rng):
    D, par = random_bipartite(30, rng)
    sp = odd_even_split(D, par)
    M = ReducedOperator(sp)
    fam = family_from_hoppings(sp, [0.2, 0.15, 0.1], np.ones(30)).family()
    v = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
    for k, sigma in zip([0.2, 0.15, 0.1], fam.shifts):
        lhs = fam.A @ v + sigma * v
        rhs = k ** -2 * v - M @ v
        assert norm2(lhs - rhs) <= 1e-14 * norm2(rhs) * 10


@pytest.mark.parametrize("ks, expected", [([0.2], [0.0]),
                                          ([0.2, 0.196], [0.0, 1.0308]),
                                          ([0.2, 0.176], [0.0, 7.2831])])
def test_hopping_shifts(ks, expected):
    k_seed, shifts = hopping_shifts(ks)
    assert k_seed == 0.2
    np.testing.assert_allclose(shifts, expected, atol=1e-4)
    assert all(s > 0 for s in shifts[1:])


def test_hopping_shift_validation():
    with pytest.raises(ValueError):
        hopping_shifts([])
    with pytest.raises(ValueError):
        hopping_shifts([0.2, -0.1])
    with pytest.raises(ValueError):
        FamilyOperator(None, 0.0)


def test_manifest():
    m = load_manifest()
    for name, kc in CRITICAL_HOPPING.items():
        assert m[name].n_rows == m[name].n_cols == 3072
        assert m[name].kc == kc
    assert m["circuit-binary-1960"].n_rows == 1960
    assert m["circuit-unsym-1879"].kc is None


def test_small_lattice_structure():
    D = wilson_hopping_matrix((2, 2, 2, 2), disorder=0.5, rng=3)
    assert D.shape == (192, 192)
    assert not np.any(D.diagonal())
    par = bipartite_parity(D)
    np.testing.assert_array_equal(par, lattice_parity((2, 2, 2, 2)))
    sp = odd_even_split(D, par)
    assert sp.even.size == sp.odd.size == 96


def test_free_field_critical_hopping():
    D = wilson_hopping_matrix((4, 4, 4, 4), disorder=0.0)
    assert critical_hopping(D) == pytest.approx(0.125, rel=1e-6)


@pytest.mark.parametrize("solve", [shifted_bicgstab, sqmrcgstab])
def test_reduced_family_solutions_lift_to_full_systems(solve):
    D = wilson_hopping_matrix((2, 2, 2, 2), disorder=0.6, rng=5)
    sp = odd_even_split(D, bipartite_parity(D))
    b = np.zeros(D.shape[0], dtype=complex)
    b[0] = 1.0
    red = family_from_hoppings(sp, [0.2, 0.15], b)
    res = solve(red.family(), tol=1e-12)
    assert res.converged
    # seed system: x_o lifts to a solution of (I - k D) x = b
    x = back_substitute(sp, 0.2, b, res.solutions[0])
    assert norm2(x - 0.2 * (D @ x) - b) <= 1e-9
    # shifted system solves k_i^-2 y - M y = rhs
    y = res.solutions[1]
    M = ReducedOperator(sp)
    assert norm2(0.15 ** -2 * y - M @ y - red.rhs_reduced) <= 1e-9 * norm2(red.rhs_reduced)


@pytest.mark.parametrize("ks", [[0.2, 0.196], [0.2, 0.176]])
def test_synthetic_lattice_ordering(ks):
    """Stand-in for the 4^4 QCD configurations: random SU(3) links, k_c near 0.203."""
    from shiftkrylov.bench import smoothness_metric

    D = wilson_hopping_matrix((4, 4, 4, 4), disorder=0.6, rng=1)
    sp = odd_even_split(D, bipartite_parity(D))
    assert sp.odd.size == 1536
    b = np.zeros(D.shape[0], dtype=complex)
    b[0] = 1.0
    fam = family_from_hoppings(sp, ks, b).family()
    runs = [solve(fam, tol=1e-8, true_res_every=1) for solve in (shifted_bicgstab, sqmrcgstab)]
    for res in runs:
        assert res.converged
        seed, shifted = res.tracks
        assert shifted.matvecs <= seed.matvecs
        assert all(tr.true_relres <= 1e-8 for tr in res.tracks)
    assert smoothness_metric(runs[1].tracks[1].history) < smoothness_metric(runs[0].tracks[1].history)
