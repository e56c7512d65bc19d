r"""Pointwise multilinear algebra on a single tangent space.

Tensors are plain numpy arrays in a fixed frame:

* symmetric forms ``S[i, j]``,
* algebraic curvature tensors ``R[i, j, k, l]``,
* complex two-vectors stored as full antisymmetric coefficient matrices
  ``phi[i, j] = -phi[j, i]``.

Curvature sign convention: the unit round sphere has
``R_ijkl = d_ik d_jl - d_il d_jk`` in orthonormal frames, so that
``R(X, Y, X, Y)`` is the sectional curvature of the plane ``X ^ Y``.
The pairing of a curvature tensor with two-vectors is
``Q(phi) = phi^ij conj(phi)^kl R_ijkl`` summed over all ordered index pairs.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg


__all__ = [
    "Frame4",
    "kulkarni_nomizu",
    "quadratic_form",
    "two_vector_norm2",
    "wedge",
    "curvature_operator_matrix",
    "sym_eigen",
    "two_positivity",
    "symmetry_defect",
    "symmetrize_curvature",
    "orthonormal_basis",
    "to_frame",
    "scalar_curvature",
    "sphere_curvature",
    "check_positive_definite",
]


@dataclass(frozen=True)
class Frame4:
    """Orthonormal 4-frame plus the two plane parameters.

    The frame encodes the complex vectors ``z = e1 + i mu e2`` and
    ``w = e3 + i lam e4``.  ``vectors`` has shape ``(4, n)`` and holds
    coordinate components.
    """

    vectors: np.ndarray
    lam: float = 1.0
    mu: float = 1.0

    def z_w(self):
        e1, e2, e3, e4 = self.vectors
        return e1 + 1j * self.mu * e2, e3 + 1j * self.lam * e4

    def orthonormality_defect(self, g):
        gram = self.vectors @ g @ self.vectors.T
        return float(np.max(np.abs(gram - np.eye(4))))


def _check_same_dim(*arrays):
    dims = {a.shape[0] for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def check_positive_definite(g, what="metric"):
    """Raise ``ValueError`` unless ``g`` is symmetric positive definite."""
    g = np.asarray(g, dtype=float)
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} is not positive definite") from None


def kulkarni_nomizu(S, T):
    r"""Kulkarni-Nomizu product of two symmetric forms.

    ``(S ^ T)_ijkl = S_ik T_jl + S_jl T_ik - S_il T_jk - S_jk T_il``.
    With this convention ``g ^ g / 2`` is the unit-sphere tensor and
    ``(S ^ T)(phi, conj phi) = 4 phi^ij conj(phi)^kl S_ik T_jl``.
    """
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    if S.shape != T.shape:
        raise ValueError(f"dimension mismatch: {S.shape} vs {T.shape}")
    a = np.einsum("...ik,...jl->...ijkl", S, T)
    b = np.einsum("...il,...jk->...ijkl", S, T)
    # The symmetric partner terms are the (i<->j, k<->l) transposes.
    return a + np.swapaxes(np.swapaxes(a, -4, -3), -2, -1) - b - np.swapaxes(
        np.swapaxes(b, -4, -3), -2, -1)


def sphere_curvature(g):
    """Constant-curvature-one tensor ``(g ^ g) / 2`` for the metric ``g``."""
    return 0.5 * kulkarni_nomizu(g, g)


def wedge(z, w):
    """Coefficient matrix of ``z ^ w`` (both orderings stored)."""
    return np.multiply.outer(z, w) - np.multiply.outer(w, z)


def quadratic_form(R, phi, g=None):
    """``Re(phi^ij conj(phi)^kl R_ijkl)`` for a complex two-vector."""
    R = np.asarray(R)
    phi = np.asarray(phi)
    if g is not None:
        _check_same_dim(R, phi, np.asarray(g))
    elif R.shape[0] != phi.shape[0]:
        raise ValueError("dimension mismatch")
    value = np.einsum("ij,kl,ijkl->", phi, phi.conj(), R)
    return float(value.real)


def two_vector_norm2(phi, g):
    """``|phi|_g^2 = phi^ij conj(phi)^kl g_ik g_jl``."""
    value = np.einsum("ij,kl,ik,jl->", phi, np.conj(phi), g, g)
    return float(value.real)


def orthonormal_basis(g):
    """Columns form a ``g``-orthonormal basis (inverse-transpose Cholesky)."""
    L = check_positive_definite(g)
    return scipy.linalg.solve_triangular(L, np.eye(len(g)), lower=True).T


def to_frame(T, E):
    """Components of a covariant tensor ``T`` in the frame with columns ``E``."""
    out = np.asarray(T)
    for _ in range(out.ndim):
        # Contract the leading index and rotate it to the back.
        out = np.tensordot(out, E, axes=([0], [0]))
    return out


def _pair_indices(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def curvature_operator_matrix(R, g):
    """Matrix of ``Q(phi) / |phi|_g^2`` on two-vectors.

    The basis is ``{e_i ^ e_j / sqrt(2)}_{i<j}`` built from a
    ``g``-orthonormal frame, so the unit sphere gives ``2 * identity``.
    """
    R = np.asarray(R, dtype=float)
    g = np.asarray(g, dtype=float)
    n = _check_same_dim(R, g)
    Ro = to_frame(R, orthonormal_basis(g))
    pairs = _pair_indices(n)
    idx_i = np.array([p[0] for p in pairs])
    idx_j = np.array([p[1] for p in pairs])
    M = 2.0 * Ro[idx_i[:, None], idx_j[:, None], idx_i[None, :], idx_j[None, :]]
    return 0.5 * (M + M.T)


def sym_eigen(S, g=None):
    """Generalized eigenvalues of ``S`` relative to ``g``, ascending."""
    S = np.asarray(S, dtype=float)
    if g is None:
        g = np.eye(len(S))
    g = np.asarray(g, dtype=float)
    _check_same_dim(S, g)
    check_positive_definite(g)
    return scipy.linalg.eigh(0.5 * (S + S.T), g, eigvals_only=True)


def two_positivity(S, g=None):
    """Sum of the two smallest eigenvalues of ``S`` relative to ``g``."""
    ev = sym_eigen(S, g)
    return float(ev[0] + ev[1])


def symmetry_defect(R):
    """Largest violation of the algebraic curvature symmetries."""
    R = np.asarray(R)
    anti1 = R + R.transpose(1, 0, 2, 3)
    anti2 = R + R.transpose(0, 1, 3, 2)
    pair = R - R.transpose(2, 3, 0, 1)
    bianchi = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
    return float(max(np.max(np.abs(t)) for t in (anti1, anti2, pair, bianchi)))


def symmetrize_curvature(R):
    """Project a 4-tensor onto algebraic curvature tensors."""
    R = np.asarray(R, dtype=float)
    R = 0.5 * (R - R.transpose(1, 0, 2, 3))
    R = 0.5 * (R - R.transpose(0, 1, 3, 2))
    R = 0.5 * (R + R.transpose(2, 3, 0, 1))
    b = R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
    return R - b / 3.0


def scalar_curvature(R, g):
    ginv = np.linalg.inv(g)
    return float(np.einsum("ik,jl,ijkl->", ginv, ginv, R))
