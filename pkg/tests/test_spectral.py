import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cycsync.spectral import (CouplingMatrix, EmptyDescriptor, NotDiagonalizable,
                              NotMetzler, PolynomialOperator, ReducibleCoupling,
                              RowSumViolation, TabulatedKernel, analyze, complete,
                              coupling_instability, coupling_sweep, directed_cycle,
                              jordan_verdict, network_monodromy, operator_symbol,
                              read_edge_list, read_matrix_csv, reduce_network, ring,
                              standardized_laplacian, two_node, write_matrix_csv)

DATA = __import__("pathlib").Path(__file__).resolve().parents[1] / "data"


@st.composite
def metzler(draw, min_m=2, max_m=10, density=0.6):
    m = draw(st.integers(min_m, max_m))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.1, 2.0, (m, m)) * (rng.random((m, m)) < density)
    for j in range(m):  # a directed cycle keeps the matrix irreducible
        a[j, (j + 1) % m] = max(a[j, (j + 1) % m], 0.2)
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return CouplingMatrix(a)


def test_three_node_example_spectrum():
    spec = analyze(read_matrix_csv(DATA / "three_node.csv"))
    np.testing.assert_allclose(spec.eigenvalues.real, [-5, -3, 0], atol=1e-12)
    assert spec.is_metzler and spec.is_irreducible and spec.diagonalizable


def test_directed_cycle_spectrum_on_circle():
    m = 6
    spec = analyze(directed_cycle(m))
    expected = np.exp(2j * np.pi * np.arange(m) / m) - 1
    got = np.sort_complex(spec.eigenvalues)
    np.testing.assert_allclose(got, np.sort_complex(expected), atol=1e-12)


def test_complete_and_ring_spectra():
    np.testing.assert_allclose(np.sort(analyze(complete(5)).eigenvalues.real),
                               [-5, -5, -5, -5, 0], atol=1e-12)
    m = 7
    ring_vals = np.sort(2 * np.cos(2 * np.pi * np.arange(m) / m) - 2)
    np.testing.assert_allclose(np.sort(analyze(ring(m)).eigenvalues.real), ring_vals,
                               atol=1e-12)
    blk = [b for b in analyze(complete(5)).structure if abs(b.value + 5) < 1e-9][0]
    assert blk.algebraic == 4 and blk.geometric == 4


@settings(deadline=None, max_examples=50)
@given(metzler())
def test_structural_invariants(C):
    spec = analyze(C)
    lam = spec.eigenvalues
    c = spec.gershgorin_radius
    # Gershgorin: every eigenvalue lies in the disc |z + c| <= c
    assert np.all(np.abs(lam + c) <= c * (1 + 1e-9) + 1e-9)
    # closed under conjugation
    np.testing.assert_allclose(np.sort_complex(lam), np.sort_complex(np.conj(lam)), atol=1e-8)
    # zero is an eigenvalue and the Perron eigenvalue is simple
    zeros = [b for b in spec.structure if abs(b.value) < 1e-8]
    assert len(zeros) == 1 and zeros[0].algebraic == 1
    assert np.all(lam.real <= 1e-9)
    _, _, ok = standardized_laplacian(C)
    assert ok


@settings(deadline=None, max_examples=30)
@given(metzler(max_m=7), st.randoms(use_true_random=False))
def test_spectrum_is_permutation_invariant(C, rnd):
    perm = list(range(C.m))
    rnd.shuffle(perm)
    a = np.sort_complex(analyze(C).eigenvalues)
    b = np.sort_complex(analyze(C.permuted(perm)).eigenvalues)
    np.testing.assert_allclose(a, b, atol=1e-8)


@settings(deadline=None, max_examples=30)
@given(metzler(max_m=8))
def test_symmetric_coupling_has_real_spectrum(C):
    sym = CouplingMatrix(0.5 * (C.entries + C.entries.T)
                         - np.diag(0.5 * (C.entries + C.entries.T).sum(axis=1)))
    assert np.all(np.abs(analyze(sym).eigenvalues.imag) < 1e-10)


def test_argument_bound_is_sharp_for_directed_cycle():
    for m in (3, 4, 8):
        scale, L, ok = standardized_laplacian(directed_cycle(m))
        assert ok and scale == m
        mu = np.linalg.eigvals(L)
        upper = mu[(mu.imag > 1e-12)]
        assert np.angle(upper).max() == pytest.approx(math.pi / 2 - math.pi / m, abs=1e-12)


def test_not_metzler():
    with pytest.raises(NotMetzler):
        standardized_laplacian(CouplingMatrix([[1.0, -1.0], [-1.0, 1.0]]))


def test_row_sum_violation():
    with pytest.raises(RowSumViolation):
        CouplingMatrix([[-1.0, 1.0], [1.0, -0.5]])


def test_matrix_shape_and_finiteness():
    with pytest.raises(ValueError):
        CouplingMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        CouplingMatrix([[np.inf, -np.inf], [0, 0]])


def test_entries_are_read_only():
    C = two_node()
    with pytest.raises(ValueError):
        C.entries[0, 0] = 3.0


def test_jordan_block_detected():
    with pytest.warns(ReducibleCoupling):
        spec = analyze(read_matrix_csv(DATA / "jordan3.csv"))
    assert not spec.diagonalizable
    blk = [b for b in spec.structure if abs(b.value + 2) < 1e-9][0]
    assert blk.algebraic == 2 and blk.geometric == 1 and blk.blocks == (2,)


def test_reducible_matrix_warns():
    with pytest.warns(ReducibleCoupling):
        analyze(CouplingMatrix([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))


def test_reduction_matches_direct_monodromy(ref_orbit, rng):
    C = two_node()
    for D in (0.15, 0.1922, rng.uniform(0, 0.3)):
        red = reduce_network(C, ref_orbit, (D, 0, 0))
        direct = np.linalg.eigvals(network_monodromy(C, ref_orbit, (D, 0, 0)))
        mine = np.concatenate([s.multipliers for s in red.spectra])
        np.testing.assert_allclose(np.sort_complex(mine), np.sort_complex(direct),
                                   atol=1e-6)


def test_reduction_verdicts_two_node(ref_orbit):
    assert reduce_network(two_node(), ref_orbit, (0.1922, 0, 0)).unstable
    assert not reduce_network(two_node(), ref_orbit, (0.15, 0, 0)).unstable


def test_reduction_handles_complex_pairs(ref_orbit):
    C = directed_cycle(4, 1 / math.sqrt(2))
    red = reduce_network(C, ref_orbit, (0.04, 0, 0))
    direct = np.linalg.eigvals(network_monodromy(C, ref_orbit, (0.04, 0, 0)))
    mine = np.concatenate([s.multipliers for s in red.spectra])
    big = lambda z: np.sort_complex(z[np.abs(z) > 1e-6])
    np.testing.assert_allclose(big(mine), big(direct), atol=1e-6)
    assert red.unstable and abs(red.leading_eigenvalue.imag) > 0


def test_jordan_matrix_needs_jordan_verdict(ref_orbit):
    C = read_matrix_csv(DATA / "jordan3.csv")
    with pytest.raises(NotDiagonalizable):
        reduce_network(C, ref_orbit, (0.01, 0, 0))
    assert jordan_verdict(C, ref_orbit, (0.01, 0, 0)) == "stable-diagonal-blocks"
    assert jordan_verdict(C, ref_orbit, (0.1922, 0, 0)) == "unstable"


def test_coupling_sweep_shapes(ref_orbit):
    C = read_matrix_csv(DATA / "three_node.csv")
    vals, mods = coupling_sweep(C, ref_orbit, [0.05, 0.1])
    assert sorted(np.round(vals.real, 9)) == [-5, -3]
    assert mods.shape == (2, 2)


def test_coupling_instability_two_node_band(ref_orbit):
    # lam = -2, so the D band is half the k^2 band
    iv = coupling_instability(two_node(), ref_orbit, 0.3, resolution=200, tol=1e-5)
    assert len(iv) == 1
    assert iv[0][0] == pytest.approx(0.37770 / 2, abs=2e-4)
    assert iv[0][1] == pytest.approx(0.39754 / 2, abs=2e-4)


def test_polynomial_symbol_diffusion():
    op = PolynomialOperator(((0, 0, 1.0), (0, 0, 0.5), ()))
    om = operator_symbol(op, 2.0)
    assert om == (-4.0, -2.0, 0.0)


def test_polynomial_symbol_advection_is_imaginary():
    om = operator_symbol(PolynomialOperator(((0, 1.0), (), ())), 3.0)
    assert om[0] == 3j


def test_tabulated_kernel_interpolates():
    k = np.linspace(0, 2, 5)
    g = np.vstack([-k ** 2, np.zeros(5), 1j * k])
    op = TabulatedKernel(k, g)
    om = operator_symbol(op, 1.0)
    assert om == (-1.0, 0.0, 1j)
    with pytest.raises(ValueError):
        operator_symbol(op, 3.0)


def test_empty_descriptors():
    with pytest.raises(EmptyDescriptor):
        operator_symbol(PolynomialOperator(((), (), ())), 1.0)
    with pytest.raises(EmptyDescriptor):
        operator_symbol(TabulatedKernel(np.zeros(0), np.zeros((3, 0))), 1.0)
    with pytest.raises(EmptyDescriptor):
        operator_symbol("laplacian", 1.0)


def test_edge_list_reader():
    C = read_edge_list(DATA / "cycle4_edges.txt", complete_diagonal=True)
    np.testing.assert_array_equal(C.entries, directed_cycle(4).entries)
    with pytest.raises(RowSumViolation):
        read_edge_list(DATA / "cycle4_edges.txt")


def test_edge_list_rejects_bad_lines(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n")
    with pytest.raises(ValueError):
        read_edge_list(p)
    p.write_text("0,5,1.0\n")
    with pytest.raises(ValueError):
        read_edge_list(p, m=3, complete_diagonal=True)


def test_matrix_csv_round_trip(tmp_path):
    C = directed_cycle(4, 1 / math.sqrt(2))
    p = tmp_path / "c.csv"
    write_matrix_csv(C, p)
    np.testing.assert_array_equal(read_matrix_csv(p).entries, C.entries)
