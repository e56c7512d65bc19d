import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collardeform.tensor_core import (
    Frame4,
    curvature_operator_matrix,
    kulkarni_nomizu,
    orthonormal_basis,
    quadratic_form,
    scalar_curvature,
    sphere_curvature,
    sym_eigen,
    symmetrize_curvature,
    symmetry_defect,
    to_frame,
    two_positivity,
    two_vector_norm2,
    wedge,
)


def random_sym(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_kn_identity_component():
    R = kulkarni_nomizu(np.eye(3), np.eye(3))
    assert R[0, 1, 0, 1] == 2.0


def test_kn_diag_component():
    R = kulkarni_nomizu(np.diag([1.0, 2.0, 3.0]), np.eye(3))
    assert R[0, 1, 0, 1] == 3.0


def test_kn_dimension_mismatch():
    with pytest.raises(ValueError):
        kulkarni_nomizu(np.eye(3), np.eye(4))


@given(seeds, st.integers(2, 6))
def test_kn_symmetries_exact(seed, n):
    rng = np.random.default_rng(seed)
    R = kulkarni_nomizu(random_sym(rng, n), random_sym(rng, n))
    assert symmetry_defect(R) < 1e-12


def test_quadratic_form_zero_tensor():
    phi = wedge(np.array([1.0, 2j, 0.0]), np.array([0.0, 1.0, 1.0]))
    assert quadratic_form(np.zeros((3,) * 4), phi) == 0.0


def test_quadratic_form_sphere_unit_two_vector():
    g = np.eye(3)
    phi = np.zeros((3, 3), dtype=complex)
    phi[0, 1], phi[1, 0] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert two_vector_norm2(phi, g) == pytest.approx(1.0)
    assert quadratic_form(sphere_curvature(g), phi, g) == pytest.approx(2.0)


@given(seeds, st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_quadratic_form_scales_by_modulus_squared(seed, c):
    rng = np.random.default_rng(seed)
    n = 4
    R = symmetrize_curvature(rng.standard_normal((n,) * 4))
    phi = wedge(rng.standard_normal(n) + 1j * rng.standard_normal(n), rng.standard_normal(n))
    base = quadratic_form(R, phi)
    assert quadratic_form(R, c * phi) == pytest.approx(abs(c) ** 2 * base, rel=1e-9, abs=1e-9)


@given(seeds)
def test_quadratic_form_imaginary_part_vanishes(seed):
    rng = np.random.default_rng(seed)
    n = 5
    R = symmetrize_curvature(rng.standard_normal((n,) * 4))
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    phi = A - A.T
    val = np.einsum("ij,kl,ijkl->", phi, phi.conj(), R)
    assert abs(val.imag) < 1e-10 * max(1.0, abs(val))


@given(seeds)
def test_decomposable_real_two_vector(seed):
    rng = np.random.default_rng(seed)
    n = 4
    R = symmetrize_curvature(rng.standard_normal((n,) * 4))
    X, Y = rng.standard_normal(n), rng.standard_normal(n)
    direct = np.einsum("ijkl,i,j,k,l->", R, X, Y, X, Y)
    assert quadratic_form(R, wedge(X, Y)) == pytest.approx(4 * direct, rel=1e-10, abs=1e-10)


def test_curvature_operator_flat():
    assert np.all(curvature_operator_matrix(np.zeros((4,) * 4), np.eye(4)) == 0)


def test_curvature_operator_sphere_is_twice_identity():
    g = random_spd(np.random.default_rng(1), 3)
    M = curvature_operator_matrix(sphere_curvature(g), g)
    assert np.allclose(M, 2 * np.eye(3), atol=1e-12)


def test_curvature_operator_kn_square():
    # Basis two-vectors e_i ^ e_j give 2 S_ii S_jj under the sphere = 2 I convention.
    S = np.diag([1.0, 2.0, 3.0])
    ev = np.sort(np.linalg.eigvalsh(curvature_operator_matrix(0.5 * kulkarni_nomizu(S, S), np.eye(3))))
    assert np.allclose(ev, [4.0, 6.0, 12.0])


def test_curvature_operator_rejects_indefinite_metric():
    with pytest.raises(ValueError):
        curvature_operator_matrix(np.zeros((3,) * 4), np.diag([1.0, -1.0, 1.0]))


@given(seeds)
def test_curvature_operator_matches_rayleigh_quotient(seed):
    rng = np.random.default_rng(seed)
    n = 4
    g = random_spd(rng, n)
    R = symmetrize_curvature(rng.standard_normal((n,) * 4))
    M = curvature_operator_matrix(R, g)
    A = rng.standard_normal((n, n))
    phi = A - A.T
    ratio = quadratic_form(R, phi) / two_vector_norm2(phi, g)
    ev = np.linalg.eigvalsh(M)
    assert ev[0] - 1e-9 <= ratio <= ev[-1] + 1e-9


def test_sym_eigen_examples():
    assert np.allclose(sym_eigen(np.eye(3) * 2.0, np.eye(3) * 2.0), 1.0)
    ev = sym_eigen(np.diag([-1.0, 3.0, 3.0]))
    assert np.allclose(ev, [-1, 3, 3])
    assert two_positivity(np.diag([-1.0, 3.0, 3.0])) == pytest.approx(2.0)


def test_sym_eigen_rejects_indefinite():
    with pytest.raises(ValueError):
        sym_eigen(np.eye(2), np.diag([1.0, -1.0]))


@given(seeds)
def test_sym_eigen_matches_characteristic_roots(seed):
    rng = np.random.default_rng(seed)
    S = random_sym(rng, 3)
    roots = np.sort(np.roots(np.poly(S)).real)
    assert np.allclose(sym_eigen(S), roots, atol=1e-10)


@settings(max_examples=30)
@given(seeds)
def test_weakly_positive_product_nonnegative(seed):
    # Weakly positive forms give a nonnegative pairing on every complex two-vector.
    rng = np.random.default_rng(seed)
    n = 4
    A, B = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    R = kulkarni_nomizu(A.T @ A, B.T @ B)
    Z = rng.standard_normal((300, n, n)) + 1j * rng.standard_normal((300, n, n))
    phis = Z - np.swapaxes(Z, 1, 2)
    vals = np.einsum("bij,bkl,ijkl->b", phis, phis.conj(), R).real
    norms = np.einsum("bij,bij->b", phis, phis.conj()).real
    assert np.min(vals / norms) >= -1e-10


@given(seeds)
def test_symmetrize_is_projection(seed):
    rng = np.random.default_rng(seed)
    R = symmetrize_curvature(rng.standard_normal((4,) * 4))
    assert symmetry_defect(R) < 1e-12
    assert np.allclose(symmetrize_curvature(R), R, atol=1e-14)


def test_orthonormal_basis_and_frame_transform():
    rng = np.random.default_rng(3)
    g = random_spd(rng, 5)
    E = orthonormal_basis(g)
    assert np.allclose(E.T @ g @ E, np.eye(5), atol=1e-12)
    assert np.allclose(to_frame(g, E), np.eye(5), atol=1e-12)


def test_scalar_curvature_sphere():
    g = random_spd(np.random.default_rng(2), 4)
    assert scalar_curvature(sphere_curvature(g), g) == pytest.approx(12.0)


def test_frame4_defect():
    fr = Frame4(np.eye(5)[:4], lam=0.5, mu=1.0)
    assert fr.orthonormality_defect(np.eye(5)) == 0.0
    z, w = fr.z_w()
    assert z[1] == 1j and w[3] == 0.5j
