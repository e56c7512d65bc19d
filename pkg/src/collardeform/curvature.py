r"""Levi-Civita connection, curvature and the perturbed-curvature formula.

All quantities are coordinate components at a single point computed from a
:class:`~collardeform.metric_fields.MetricJet`.  Index layout follows the
jets: derivative indices come first, so ``dGamma[m, k, i, j]`` is
``d_m Gamma^k_ij`` and ``Dh[m, i, j]`` is ``(D_m h)_ij``.

Curvature convention: ``R_ijkl = g(D_j D_i d_k - D_i D_j d_k, d_l)``, which
gives ``R_ijkl = g_ik g_jl - g_il g_jk`` on the unit sphere.
"""

from dataclasses import dataclass

import numpy as np

from .metric_fields import MetricJet, collar_point
from .tensor_core import (
    check_positive_definite,
    scalar_curvature as _scalar_from_tensor,
    sym_eigen,
    symmetry_defect,
    symmetrize_curvature,
)


__all__ = [
    "christoffel",
    "christoffel_derivative",
    "riemann",
    "scalar_curvature",
    "second_fundamental_form",
    "BoundaryShape",
    "covariant_derivative",
    "tensor_norm",
    "lemma21_rhs",
    "PreconditionError",
]


class PreconditionError(ValueError):
    """Raised when a pointwise hypothesis of a formula is violated."""


def christoffel(jet):
    """``Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)``."""
    check_positive_definite(jet.g)
    ginv = np.linalg.inv(jet.g)
    dg = jet.dg
    lowered = 0.5 * (dg.transpose(0, 1, 2) + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))
    # lowered[i, j, l] = Gamma_{ij,l}
    return np.einsum("kl,ijl->kij", ginv, lowered)


def christoffel_derivative(jet):
    """``d_m Gamma^k_ij`` from the second derivatives of the metric."""
    ginv = np.linalg.inv(jet.g)
    dg, ddg = jet.dg, jet.ddg
    lowered = 0.5 * (dg.transpose(0, 1, 2) + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0))
    # d_m Gamma_{ij,l}, with ddg[m, p, a, b] = d_m d_p g_ab
    dlowered = 0.5 * (ddg.transpose(0, 1, 2, 3) + ddg.transpose(0, 2, 1, 3)
                      - ddg.transpose(0, 2, 3, 1))
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    return (np.einsum("mkl,ijl->mkij", dginv, lowered)
            + np.einsum("kl,mijl->mkij", ginv, dlowered))


def riemann(jet, check=True):
    """Covariant curvature tensor, symmetrized onto algebraic curvature tensors."""
    gamma = christoffel(jet)
    dgamma = christoffel_derivative(jet)
    # Rop[i, j, k, m] = (R(d_i, d_j) d_k)^m
    Rop = (np.einsum("imjk->ijkm", dgamma) - np.einsum("jmik->ijkm", dgamma)
           + np.einsum("pjk,mip->ijkm", gamma, gamma)
           - np.einsum("pik,mjp->ijkm", gamma, gamma))
    R = -np.einsum("ijkm,ml->ijkl", Rop, jet.g)
    if check:
        scale = max(1.0, float(np.max(np.abs(R))))
        defect = symmetry_defect(R)
        if defect > 1e-10 * scale:
            raise ArithmeticError(f"curvature symmetry defect {defect:.3e}")
    return symmetrize_curvature(R)


def scalar_curvature(jet):
    return _scalar_from_tensor(riemann(jet), jet.g)


@dataclass(frozen=True)
class BoundaryShape:
    """Second fundamental form of the boundary at one boundary point."""

    A: np.ndarray
    g_boundary: np.ndarray
    principal: np.ndarray

    @property
    def mean_curvature(self):
        return float(self.principal.sum())

    @property
    def two_convexity(self):
        return float(self.principal[0] + self.principal[1]) if len(self.principal) > 1 \
            else float(self.principal[0])


def second_fundamental_form(field, x_boundary, fermi_tol=1e-12):
    """``A = -D^2 rho`` on the boundary; equals ``-1/2 d_s g_ab`` in Fermi gauge."""
    jet_like = field.derivatives(collar_point(x_boundary, 0.0), 1)
    g, dg = jet_like[0], jet_like[1]
    n = g.shape[0]
    off = max(abs(g[-1, -1] - 1.0), float(np.max(np.abs(g[-1, :-1]))))
    if off > fermi_tol:
        raise ValueError(f"field is not in Fermi gauge at the boundary (defect {off:.2e})")
    A = -0.5 * dg[n - 1, : n - 1, : n - 1]
    gb = g[: n - 1, : n - 1]
    return BoundaryShape(A, gb, sym_eigen(A, gb))


def covariant_derivative(h_jet, g_jet):
    """First and second covariant derivatives of a symmetric 2-tensor.

    ``h_jet`` carries ``h``, ``d h`` and ``d d h`` in the jet layout.  Returns
    ``(Dh, DDh)`` with ``Dh[m, i, j] = (D_m h)_ij`` and
    ``DDh[p, m, i, j] = (D_p D h)(d_m; d_i, d_j)``.
    """
    h, dh, ddh = h_jet.g, h_jet.dg, h_jet.ddg
    G = christoffel(g_jet)
    dG = christoffel_derivative(g_jet)
    Dh = dh - np.einsum("qmi,qj->mij", G, h) - np.einsum("qmj,iq->mij", G, h)
    d_Dh = (ddh
            - np.einsum("pqmi,qj->pmij", dG, h) - np.einsum("qmi,pqj->pmij", G, dh)
            - np.einsum("pqmj,iq->pmij", dG, h) - np.einsum("qmj,piq->pmij", G, dh))
    DDh = (d_Dh
           - np.einsum("qpm,qij->pmij", G, Dh)
           - np.einsum("qpi,mqj->pmij", G, Dh)
           - np.einsum("qpj,miq->pmij", G, Dh))
    return Dh, DDh


def tensor_norm(h, g):
    ginv = np.linalg.inv(g)
    return float(np.sqrt(max(np.einsum("ik,jl,ij,kl->", ginv, ginv, h, h), 0.0)))


def lemma21_rhs(R, h, Dh, DDh, g, g_hat=None, swapped_index=False):
    r"""Curvature of ``g + h`` from data of ``g`` and covariant derivatives of ``h``.

    ``R + 1/2 g^pq R_ijkp h_ql - 1/2 g^pq R_ijlp h_kq + E + F`` where ``E`` holds
    the second covariant derivatives of ``h`` and ``F`` the quadratic
    first-derivative terms contracted with the inverse of ``g + h``.

    ``swapped_index=True`` uses ``(D^2_{i,l} h)_jl`` in the second term of
    ``E`` instead of ``(D^2_{i,l} h)_jk``; that variant breaks the
    antisymmetry in ``(k, l)`` and is kept only to demonstrate the difference.
    """
    if g_hat is None:
        g_hat = g + h
    if tensor_norm(h, g) > 0.5:
        raise PreconditionError("|h|_g exceeds 1/2")
    ginv = np.linalg.inv(g)
    ghinv = np.linalg.inv(g_hat)
    ricci_terms = (0.5 * np.einsum("pq,ijkp,ql->ijkl", ginv, R, h)
                   - 0.5 * np.einsum("pq,ijlp,kq->ijkl", ginv, R, h))
    # DDh[i, k, j, l] = (D^2_{i,k} h)_jl
    second = np.einsum("ikjl->ijkl", DDh)
    if swapped_index:
        # (D^2_{i,l} h)_jl has no k dependence; broadcast it along k.
        term2 = np.broadcast_to(np.einsum("iljl->ijl", DDh)[:, :, None, :], R.shape)
    else:
        term2 = np.einsum("iljk->ijkl", DDh)
    E = 0.5 * (-second + term2 + np.einsum("jkil->ijkl", DDh) - np.einsum("jlik->ijkl", DDh))
    # C[a, b, p] = (D_a h)_bp + (D_b h)_ap - (D_p h)_ab
    C = Dh + Dh.transpose(1, 0, 2) - Dh.transpose(1, 2, 0)
    F = 0.25 * (np.einsum("pq,jkp,ilq->ijkl", ghinv, C, C)
                - np.einsum("pq,ikp,jlq->ijkl", ghinv, C, C))
    return R + ricci_terms + E + F
