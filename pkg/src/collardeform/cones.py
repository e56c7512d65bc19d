r"""Curvature-cone checks by eigenvalues and by searching orthonormal 4-frames.

For an orthonormal frame ``e1..e4`` and ``lam, mu in [0, 1]`` put
``z = e1 + i mu e2`` and ``w = e3 + i lam e4``.  Then

    Re R(z, w, conj z, conj w) = R1313 + lam^2 R1414 + mu^2 R2323
                                 + lam^2 mu^2 R2424 - 2 lam mu R1234

and the cones are: PIC with ``lam = mu = 1``, PIC1 with ``mu = 1``, PIC2 with
both free.  CO uses the smallest eigenvalue of the curvature operator and PSC
the scalar curvature; neither needs a frame search.

Frame searches run in a ``g``-orthonormal basis, where frames are simply
orthonormal 4-tuples of ``R^n``.  They are deterministic given ``seed``.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.optimize

from .tensor_core import (
    Frame4,
    curvature_operator_matrix,
    orthonormal_basis,
    scalar_curvature,
    sym_eigen,
    to_frame,
)
from .curvature import riemann, tensor_norm
from .deformation import DeformationData, hat_metric_jet


__all__ = [
    "ConditionKind",
    "BoundaryKind",
    "CheckReport",
    "BoundaryReport",
    "STRICT_TOL",
    "q_frame",
    "q_direct",
    "min_over_frames",
    "nested_minima",
    "boundary_class",
]

STRICT_TOL = 1e-7


class ConditionKind(str, Enum):
    CO = "CO"
    PIC = "PIC"
    PIC1 = "PIC1"
    PIC2 = "PIC2"
    PSC = "PSC"


class BoundaryKind(str, Enum):
    CONVEX = "convex"
    TWO_CONVEX = "two_convex"
    MEAN_CONVEX = "mean_convex"
    TOTALLY_GEODESIC = "totally_geodesic"


FRAME_KINDS = (ConditionKind.PIC, ConditionKind.PIC1, ConditionKind.PIC2)


@dataclass
class CheckReport:
    """Outcome of one minimization.

    ``frame`` holds coordinate components; ``point`` and ``log_s`` are filled
    in by grid-level checks.
    """

    kind: ConditionKind
    min_value: float
    frame: Frame4 = None
    evaluations: int = 0
    tol: float = STRICT_TOL
    strict: bool = True
    point: np.ndarray = None
    log_s: float = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        if self.strict:
            return self.min_value > self.tol
        return self.min_value >= -self.tol

    def weak(self, tol=None):
        """Same report judged as a weak (non-strict) inequality."""
        return CheckReport(self.kind, self.min_value, self.frame, self.evaluations,
                           self.tol if tol is None else tol, False, self.point, self.log_s,
                           dict(self.meta))


def q_frame(R, g, frame, normalized=False):
    """Frame formula for ``Re R(z, w, conj z, conj w)``.

    With ``normalized=True`` returns ``Q(phi) / |phi|_g^2`` for
    ``phi = z ^ w``, i.e. ``2 q / ((1 + lam^2)(1 + mu^2))``.
    """
    e = np.asarray(frame.vectors, dtype=float)
    lam, mu = frame.lam, frame.mu

    def comp(a, b, c, d):
        return float(np.einsum("ijkl,i,j,k,l->", R, e[a], e[b], e[c], e[d]))

    q = (comp(0, 2, 0, 2) + lam**2 * comp(0, 3, 0, 3) + mu**2 * comp(1, 2, 1, 2)
         + lam**2 * mu**2 * comp(1, 3, 1, 3) - 2.0 * lam * mu * comp(0, 1, 2, 3))
    if normalized:
        q *= 2.0 / ((1.0 + lam**2) * (1.0 + mu**2))
    return q


def q_direct(R, z, w):
    """``Re R(z, w, conj z, conj w)`` with complex vectors."""
    return float(np.einsum("ijkl,i,j,k,l->", R, z, w, np.conj(z), np.conj(w)).real)


# ---------------------------------------------------------------- frame search

def _pair_matrix(Ro):
    n = Ro.shape[0]
    iu, ju = np.triu_indices(n, 1)
    return Ro[iu[:, None], ju[:, None], iu[None, :], ju[None, :]], (iu, ju)


def _bivectors(a, b, pairs):
    iu, ju = pairs
    return a[..., iu] * b[..., ju] - a[..., ju] * b[..., iu]


def _components(M, pairs, F):
    """The five frame components for a batch ``F`` of shape ``(B, 4, n)``."""
    e1, e2, e3, e4 = F[:, 0], F[:, 1], F[:, 2], F[:, 3]
    P13 = _bivectors(e1, e3, pairs)
    P14 = _bivectors(e1, e4, pairs)
    P23 = _bivectors(e2, e3, pairs)
    P24 = _bivectors(e2, e4, pairs)
    P12 = _bivectors(e1, e2, pairs)
    P34 = _bivectors(e3, e4, pairs)

    def form(P, Q):
        return np.einsum("bp,pq,bq->b", P, M, Q)

    return np.stack([form(P13, P13), form(P14, P14), form(P23, P23), form(P24, P24),
                     form(P12, P34)], axis=1)


def _q_values(C, lam, mu, normalized):
    """``C`` is ``(B, 5)``; ``lam``/``mu`` flat parameter arrays of length ``K``."""
    a, b, c, d, e = (C[:, i : i + 1] for i in range(5))
    q = a + lam**2 * b + mu**2 * c + lam**2 * mu**2 * d - 2.0 * lam * mu * e
    if normalized:
        q = q * (2.0 / ((1.0 + lam**2) * (1.0 + mu**2)))
    return q


def _param_grid(kind):
    if kind is ConditionKind.PIC:
        return np.array([1.0]), np.array([1.0])
    if kind is ConditionKind.PIC1:
        lam = np.linspace(0.0, 1.0, 33)
        return lam, np.ones_like(lam)
    lam, mu = np.meshgrid(np.linspace(0.0, 1.0, 17), np.linspace(0.0, 1.0, 17))
    return lam.ravel(), mu.ravel()


def _objective(M, pairs, F, kind, normalized):
    lam, mu = _param_grid(kind)
    vals = _q_values(_components(M, pairs, F), lam, mu, normalized)
    idx = np.argmin(vals, axis=1)
    return vals[np.arange(len(F)), idx], lam[idx], mu[idx]


def _polish(M, pairs, F, kind, lam0, mu0, normalized):
    """Smooth joint refinement of a ``(4, n)`` frame and ``(lam, mu)``.

    The frame is moved by ``F expm(Omega)`` with ``Omega`` antisymmetric, so it
    stays orthonormal.
    """
    n = F.shape[1]
    iu, ju = np.triu_indices(n, 1)
    m = len(iu)

    def frames_of(P):
        Om = np.zeros((len(P), n, n))
        Om[:, iu, ju] = P[:, :m]
        Om[:, ju, iu] = -P[:, :m]
        return F @ np.array([scipy.linalg.expm(o) for o in Om])

    def values(P):
        C = _components(M, pairs, frames_of(P))
        return _q_values(C, P[:, m : m + 1], P[:, m + 1 : m + 2], normalized)[:, 0]

    def fun_and_grad(p):
        # Central differences evaluated as one batch.
        h = 1e-7
        P = np.vstack([p, p + h * np.eye(len(p)), p - h * np.eye(len(p))])
        v = values(P)
        k = len(p)
        return float(v[0]), (v[1 : k + 1] - v[k + 1 :]) / (2.0 * h)

    def f(p):
        return float(values(np.asarray(p, dtype=float)[None])[0])

    fixed = {ConditionKind.PIC: [(1.0, 1.0), (1.0, 1.0)],
             ConditionKind.PIC1: [(0.0, 1.0), (1.0, 1.0)],
             ConditionKind.PIC2: [(0.0, 1.0), (0.0, 1.0)]}[kind]
    p0 = np.concatenate([np.zeros(m), [lam0, mu0]])
    res = scipy.optimize.minimize(fun_and_grad, p0, jac=True, method="L-BFGS-B",
                                  bounds=[(None, None)] * m + fixed,
                                  options={"ftol": 1e-15, "gtol": 1e-10})
    if res.fun < f(p0):
        Fp = frames_of(res.x[None])[0]
        return _reorthonormalize(Fp), float(res.x[m]), float(res.x[m + 1]), res.nfev
    return F, lam0, mu0, res.nfev


def _random_frames(rng, count, n):
    G = rng.standard_normal((count, n, 4))
    Qm, Rm = np.linalg.qr(G)
    # Fix column signs so the map from Gaussian to frame is well defined.
    Qm = Qm * np.sign(np.diagonal(Rm, axis1=1, axis2=2))[:, None, :]
    return np.swapaxes(Qm, 1, 2)


def _reorthonormalize(F):
    Qm, Rm = np.linalg.qr(np.swapaxes(F, -1, -2))
    Qm = Qm * np.sign(np.diagonal(Rm, axis1=-2, axis2=-1))[..., None, :]
    return np.swapaxes(Qm, -1, -2)


def _givens_moves(F, step):
    """All rotations of the ``(4, n)`` frame ``F`` by ``+-step`` in coordinate planes."""
    n = F.shape[-1]
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            for ang in (step, -step):
                c, s = np.cos(ang), np.sin(ang)
                G = F.copy()
                G[:, i] = c * F[:, i] - s * F[:, j]
                G[:, j] = s * F[:, i] + c * F[:, j]
                out.append(G)
    return np.array(out)


def _local_descent(M, pairs, F, value, kind, normalized, budget):
    step = 0.3
    used = 0
    best_lam = best_mu = None
    while used < budget and step > 1e-9:
        moves = _givens_moves(F, step)
        vals, lams, mus = _objective(M, pairs, moves, kind, normalized)
        used += len(moves)
        k = int(np.argmin(vals))
        if vals[k] < value:
            F, value = _reorthonormalize(moves[k]), float(vals[k])
            best_lam, best_mu = float(lams[k]), float(mus[k])
        else:
            step *= 0.5
    return F, value, best_lam, best_mu, used


def min_over_frames(R, g, kind, budget=2000, seed=0, extra_starts=(), normalized=False):
    """Minimize the cone functional of ``kind`` for the curvature tensor ``R`` at metric ``g``.

    ``extra_starts`` are coordinate :class:`Frame4` objects that are evaluated
    and used as additional starting points; the result is never larger than
    the functional at any of them.  ``normalized`` divides by ``|phi|_g^2`` so
    that values are comparable to curvature-operator eigenvalues.
    """
    kind = ConditionKind(kind)
    R = np.asarray(R, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if kind is ConditionKind.CO:
        return _co_report(R, g)
    if kind is ConditionKind.PSC:
        return CheckReport(kind, scalar_curvature(R, g), evaluations=1)
    if n < 4:
        raise ValueError(f"{kind.value} needs dimension >= 4, got {n}")

    E = orthonormal_basis(g)
    Einv = E.T @ g
    Ro = to_frame(R, E)
    M, pairs = _pair_matrix(Ro)
    rng = np.random.default_rng(seed)

    n_random = max(1, int(round(0.7 * budget)))
    F = _random_frames(rng, n_random, n)
    vals, lams, mus = _objective(M, pairs, F, kind, normalized)
    candidates = [(float(v), f, float(l), float(m)) for v, f, l, m in zip(vals, F, lams, mus)]

    for fr in extra_starts:
        Fs = _reorthonormalize((Einv @ np.asarray(fr.vectors, dtype=float).T).T[None])[0]
        v, l, m = _objective(M, pairs, Fs[None], kind, normalized)
        candidates.append((float(v[0]), Fs, float(l[0]), float(m[0])))
        lam_s, mu_s = _project_params(kind, fr.lam, fr.mu)
        vs = float(_q_values(_components(M, pairs, Fs[None]), np.array([lam_s]),
                             np.array([mu_s]), normalized)[0, 0])
        candidates.append((vs, Fs, lam_s, mu_s))

    candidates.sort(key=lambda c: c[0])
    evaluations = n_random + 2 * len(extra_starts)
    remaining = max(0, budget - n_random)
    top = candidates[:4]
    refined = []
    for v, f, l, m in top:
        share = remaining // len(top)
        F1, v1, l1, m1, used = _local_descent(M, pairs, f, v, kind, normalized, share)
        evaluations += used
        refined.append((v1, F1, l if l1 is None else l1, m if m1 is None else m1))
    refined.extend(candidates[:1])
    refined.sort(key=lambda c: c[0])
    v, Fb, lam, mu = refined[0]

    Fb, lam, mu, nfev = _polish(M, pairs, Fb, kind, lam, mu, normalized)
    evaluations += nfev
    frame = Frame4((E @ Fb.T).T, lam=lam, mu=mu)
    value = q_frame(R, g, frame, normalized)
    return CheckReport(kind, value, frame, evaluations, meta={"search_value": v})


def _project_params(kind, lam, mu):
    lam = float(np.clip(lam, 0.0, 1.0))
    mu = float(np.clip(mu, 0.0, 1.0))
    if kind is ConditionKind.PIC:
        return 1.0, 1.0
    if kind is ConditionKind.PIC1:
        return lam, 1.0
    return lam, mu


def _co_report(R, g):
    Mop = curvature_operator_matrix(R, g)
    return CheckReport(ConditionKind.CO, float(np.linalg.eigvalsh(Mop)[0]), evaluations=1)


def nested_minima(R, g, budget=2000, seed=0, normalized=False):
    """PIC, PIC1, PIC2 minima, each search seeded with the previous witness.

    Seeding makes ``PIC2 <= PIC1 <= PIC`` hold for the reported values.
    """
    out = {}
    starts = ()
    for kind in FRAME_KINDS:
        rep = min_over_frames(R, g, kind, budget, seed, extra_starts=starts, normalized=normalized)
        out[kind] = rep
        starts = (rep.frame,)
    return out


# -------------------------------------------------------------- boundary class

@dataclass(frozen=True)
class BoundaryReport:
    min_eigenvalue: float
    min_two_sum: float
    trace: float
    norm: float

    @property
    def convex(self):
        return self.min_eigenvalue > 0

    @property
    def two_convex(self):
        return self.min_two_sum > 0

    @property
    def mean_convex(self):
        return self.trace > 0

    @property
    def totally_geodesic(self):
        return self.norm <= 1e-10

    def flags(self):
        return {
            BoundaryKind.CONVEX.value: self.convex,
            BoundaryKind.TWO_CONVEX.value: self.two_convex,
            BoundaryKind.MEAN_CONVEX.value: self.mean_convex,
            BoundaryKind.TOTALLY_GEODESIC.value: self.totally_geodesic,
        }


def boundary_class(A, g_boundary):
    """Eigenvalue summary and convexity flags of a second fundamental form."""
    A = np.asarray(A, dtype=float)
    gb = np.asarray(g_boundary, dtype=float)
    if A.shape != gb.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {gb.shape}")
    ev = sym_eigen(A, gb)
    two = float(ev[0] + ev[1]) if len(ev) > 1 else float(ev[0])
    return BoundaryReport(float(ev[0]), two, float(ev.sum()), tensor_norm(A, gb))


# --------------------------------------------------------------- region checks

def _point_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _difference_report(kind, R_hat, g_hat, R_ref, g_ref, budget, seed, eps):
    if kind is ConditionKind.PSC:
        value = scalar_curvature(R_hat, g_hat) - scalar_curvature(R_ref, g_ref)
        rep = CheckReport(kind, value, evaluations=1)
    else:
        rep = min_over_frames(R_hat - R_ref, g_ref, kind, budget, seed, normalized=True)
    rep.tol, rep.strict = eps, False
    return rep


def region_check(target, kinds, grid, budget=600, seed=0, eps=0.05):
    """Worst absolute and difference values of each condition over a collar grid.

    ``target`` is either a :class:`~collardeform.deformation.DeformationData`
    or a plain metric field.  ``grid`` is a sequence of ``(x, log_s)`` pairs.
    For a deformation, points with ``log_s >= -lam^2`` form the ``"chi"``
    region and are compared with ``g``; deeper points form the ``"beta"``
    region and are compared with ``g~``.  Difference values are normalized by
    ``|phi|_g^2`` of the reference metric and judged as ``>= -eps``.

    Returns ``{region: {kind: {"absolute": CheckReport, "difference": CheckReport}}}``.
    """
    kinds = [ConditionKind(k) for k in kinds]
    if not len(grid):
        raise ValueError("grid is empty")
    deformed = isinstance(target, DeformationData)
    out = {}
    for idx, (x, log_s) in enumerate(grid):
        x = np.asarray(x, dtype=float)
        if deformed:
            jet = hat_metric_jet(target, x, log_s)
            x = x.copy()
            x[-1] = np.exp(log_s)
            region = "chi" if log_s >= target.log_interface else "beta"
            ref = (target.g if region == "chi" else target.g_tilde).jet(x)
        else:
            jet = target.jet(x)
            ref = jet
            region = "field"
        R_hat = riemann(jet)
        R_ref = riemann(ref) if deformed else R_hat
        pseed = _point_seed(seed, idx)
        slot = out.setdefault(region, {})
        for kind in kinds:
            absolute = min_over_frames(R_hat, jet.g, kind, budget, pseed)
            diff = _difference_report(kind, R_hat, jet.g, R_ref, ref.g, budget, pseed, eps)
            for label, rep in (("absolute", absolute), ("difference", diff)):
                rep.point, rep.log_s = x, float(log_s)
                cur = slot.setdefault(kind, {}).get(label)
                if cur is None or rep.min_value < cur.min_value:
                    slot[kind][label] = rep
    return out
