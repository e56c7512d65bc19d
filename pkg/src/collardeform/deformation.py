r"""Cutoff profiles and the two-branch boundary deformation family.

For a pair of Fermi-gauge metrics ``g``, ``g~`` that agree on the boundary,
write ``g~ = g + rho S`` near the boundary and set

    g_lam = g + chi(lam rho) S / lam              for rho >= exp(-lam^2)
    g_lam = g~ - lam rho^2 beta(log(rho) / lam^2) S   for rho <  exp(-lam^2)

Jets of ``g_lam`` are assembled by the chain rule from the jets of ``g``,
``g~`` and ``S``.  Points below the interface are addressed through
``log(rho)`` so that layers far below double-precision range
(``exp(-lam^2)`` underflows for ``lam > 27``) are still evaluated exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .metric_fields import MetricField, MetricJet, collar_point
from .tensor_core import check_positive_definite
from .curvature import tensor_norm


__all__ = [
    "smooth_step",
    "CutoffChi",
    "CutoffBeta",
    "zeta",
    "QuotientTensor",
    "build_S",
    "DeformationData",
    "StructuralError",
    "hat_metric_jet",
    "branch_jet",
    "DeformedField",
    "interface_residual",
    "deformation_norms",
]

_GL_T, _GL_W = np.polynomial.legendre.leggauss(24)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


class StructuralError(ValueError):
    """The deformation parameter is below the structural threshold."""


def smooth_step(t):
    """``sigma(t) = psi(t) / (psi(t) + psi(1 - t))`` with ``psi(t) = exp(-1/t)``.

    Returns ``(sigma, sigma', sigma'')``; sigma is 0 for ``t <= 0`` and 1 for
    ``t >= 1`` with all derivatives flat at both ends.
    """
    t = np.asarray(t, dtype=float)
    inner = (t > 0.0) & (t < 1.0)
    tc = np.where(inner, t, 0.5)
    a = np.exp(-1.0 / tc)
    b = np.exp(-1.0 / (1.0 - tc))
    a1 = a / tc**2
    b1 = -b / (1.0 - tc) ** 2
    a2 = a * (1.0 / tc**4 - 2.0 / tc**3)
    b2 = b * (1.0 / (1.0 - tc) ** 4 - 2.0 / (1.0 - tc) ** 3)
    d = a + b
    N = a1 * b - a * b1
    sig = np.where(inner, a / d, np.where(t >= 1.0, 1.0, 0.0))
    sig1 = np.where(inner, N / d**2, 0.0)
    sig2 = np.where(inner, (a2 * b - a * b2) / d**2 - 2.0 * N * (a1 + b1) / d**3, 0.0)
    return sig, sig1, sig2


def _bump(s, lo=0.55, hi=0.95):
    s = np.asarray(s, dtype=float)
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = (s - c) / r
    inside = np.abs(u) < 1.0
    uc = np.where(inside, u, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - uc**2)), 0.0)


class CutoffChi:
    """Concave profile: ``s - s^2/2`` on ``[0, 1/2]``, constant for ``s >= 1``.

    On ``[1/2, 1]`` the second derivative is ``-G`` with
    ``G(s) = 1 - sigma(2s - 1) + a B(s)``; the bump ``B`` is supported in
    ``(0.55, 0.95)`` and ``a`` makes ``chi'(1) = 0``.
    """

    panels = 8
    breaks = (0.55, 0.95)

    def __init__(self):
        step_part = self._integrate(lambda u: smooth_step(2.0 - 2.0 * u)[0], 0.5, 1.0)
        bump_part = self._integrate(_bump, 0.5, 1.0)
        self.a = (0.5 - step_part) / bump_part
        self.value_at_one = float(self._bridge(np.array([1.0]))[0][0])

    @classmethod
    def _integrate(cls, f, lo, hi, weight=None):
        # Panels never straddle the bump's support edges, where G is only flat-smooth.
        cuts = [lo] + [b for b in cls.breaks if lo < b < hi] + [hi]
        edges = np.concatenate([np.linspace(a, b, cls.panels + 1)[:-1] for a, b in
                                zip(cuts[:-1], cuts[1:])] + [[hi]])
        width = np.diff(edges)
        u = (edges[:-1, None] + width[:, None] * _GL_T).ravel()
        vals = f(u) if weight is None else f(u) * weight(u)
        return float(np.sum(width * (vals.reshape(len(width), -1) @ _GL_W)))

    def G(self, s):
        # 1 - sigma(2s - 1) written as sigma(2 - 2s) keeps the tail positive near s = 1.
        return smooth_step(2.0 - 2.0 * np.asarray(s))[0] + self.a * _bump(s)

    def _bridge(self, s):
        out0, out1 = [], []
        for si in np.atleast_1d(s):
            # a normalises the integral of G over [1/2, 1] to 1/2, so chi' is the tail integral;
            # this avoids cancellation as s approaches 1.
            moment = self._integrate(self.G, 0.5, si, weight=lambda u, si=si: si - u)
            out1.append(self._integrate(self.G, si, 1.0))
            out0.append(0.375 + 0.5 * (si - 0.5) - moment)
        return np.array(out0), np.array(out1)

    def __call__(self, s):
        """``(chi, chi', chi'')`` at scalar or array ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("chi is defined for s >= 0")
        flat = np.atleast_1d(s)
        c0 = np.empty_like(flat)
        c1 = np.empty_like(flat)
        c2 = np.empty_like(flat)
        low = flat <= 0.5
        high = flat >= 1.0
        mid = ~(low | high)
        c0[low] = flat[low] - 0.5 * flat[low] ** 2
        c1[low] = 1.0 - flat[low]
        c2[low] = -1.0
        c0[high] = self.value_at_one
        c1[high] = 0.0
        c2[high] = 0.0
        if np.any(mid):
            b0, b1 = self._bridge(flat[mid])
            c0[mid] = b0
            c1[mid] = b1
            c2[mid] = -self.G(flat[mid])
        if s.ndim == 0:
            return float(c0[0]), float(c1[0]), float(c2[0])
        return c0, c1, c2


class CutoffBeta:
    """``beta(t) = sigma(t + 2) / 2``: 1/2 on ``[-1, 0]``, 0 on ``(-inf, -2]``."""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > 0):
            raise ValueError("beta is defined for t <= 0")
        s0, s1, s2 = smooth_step(t + 2.0)
        if t.ndim == 0:
            return 0.5 * float(s0), 0.5 * float(s1), 0.5 * float(s2)
        return 0.5 * s0, 0.5 * s1, 0.5 * s2


def zeta(u):
    """Support cutoff, 1 on ``[0, 1/3]`` and 0 on ``[2/3, inf)``; returns value and two derivatives."""
    s0, s1, s2 = smooth_step(2.0 - 3.0 * np.asarray(u, dtype=float))
    return float(s0), -3.0 * float(s1), 9.0 * float(s2)


class QuotientTensor:
    """``S = zeta(s/delta) (g~ - g) / s`` with exact jets.

    The quotient is evaluated as ``int_0^1 d_s(g~ - g)(x, t s) dt`` (and the
    analogous integrals for its derivatives), which stays exact at ``s = 0``
    where the direct quotient cancels catastrophically.
    """

    def __init__(self, g, g_tilde, delta):
        self.g = g
        self.g_tilde = g_tilde
        self.delta = float(delta)
        self.n = g.n
        self._cache = {}

    @property
    def support(self):
        return 2.0 * self.delta / 3.0

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key not in self._cache:
            if len(self._cache) > 20000:
                self._cache.clear()
            self._cache[key] = self._jet(x)
        return self._cache[key]

    def _jet(self, x):
        n = self.n
        s = x[-1]
        zero = MetricJet(np.zeros((n, n)), np.zeros((n, n, n)), np.zeros((n, n, n, n)))
        if s >= self.support:
            return zero
        N = n - 1
        q = np.zeros((n, n))
        dq = np.zeros((n, n, n))
        ddq = np.zeros((n, n, n, n))
        for t, w in zip(_GL_T, _GL_W):
            y = collar_point(x[:-1], t * s)
            dt = self.g_tilde.derivatives(y, 3)
            d0 = self.g.derivatives(y, 3)
            D1 = dt[1][N] - d0[1][N]
            D2 = dt[2][:, N] - d0[2][:, N]
            D3 = dt[3][:, :, N] - d0[3][:, :, N]
            c = np.ones(n)
            c[N] = t
            q += w * D1
            dq += w * c[:, None, None] * D2
            ddq += w * np.multiply.outer(c, c)[:, :, None, None] * D3
        z0, z1, z2 = zeta(s / self.delta)
        z1 /= self.delta
        z2 /= self.delta**2
        e = np.zeros(n)
        e[N] = 1.0
        S = z0 * q
        dS = z0 * dq + z1 * np.multiply.outer(e, q)
        ddS = (z0 * ddq + z1 * (np.multiply.outer(e, dq) + np.multiply.outer(e, dq).swapaxes(0, 1))
               + z2 * np.multiply.outer(np.outer(e, e), q))
        return MetricJet(S, dS, ddS)


def build_S(g, g_tilde, delta, tol=1e-12, probes=None):
    """Quotient tensor of a boundary-matching pair; checks ``g = g~`` on the boundary."""
    n = g.n
    if probes is None:
        probes = [np.zeros(n - 1), np.linspace(-0.7, 0.7, n - 1), np.full(n - 1, 0.4)]
    for xb in probes:
        p = collar_point(xb, 0.0)
        diff = np.max(np.abs(g.derivatives(p, 0)[0] - g_tilde.derivatives(p, 0)[0]))
        if diff > tol:
            raise ValueError(f"g and g~ differ on the boundary by {diff:.3e}")
    return QuotientTensor(g, g_tilde, delta)


@dataclass(frozen=True)
class DeformationData:
    """Everything defining the deformed metric at one value of ``lam``."""

    g: MetricField
    g_tilde: MetricField
    S: QuotientTensor
    delta: float
    lam: float
    chi: CutoffChi
    beta: CutoffBeta

    @classmethod
    def build(cls, g, g_tilde, lam, delta=None, chi=None):
        if delta is None:
            delta = min(g.chart.delta, g_tilde.chart.delta)
        data = cls(g, g_tilde, build_S(g, g_tilde, delta), float(delta), float(lam),
                   chi or CutoffChi(), CutoffBeta())
        data.check_structural()
        return data

    def with_lambda(self, lam):
        data = DeformationData(self.g, self.g_tilde, self.S, self.delta, float(lam),
                               self.chi, self.beta)
        data.check_structural()
        return data

    @property
    def log_interface(self):
        return -self.lam**2

    def check_structural(self):
        lam = self.lam
        if lam <= 0:
            raise StructuralError("lambda must be positive")
        if math.log(lam) - lam**2 >= math.log(0.5):
            raise StructuralError(f"lambda={lam}: lam*exp(-lam^2) must be < 1/2")
        if -lam**2 >= math.log(self.delta / 3.0):
            raise StructuralError(f"lambda={lam}: exp(-lam^2) must be < delta/3")


def _normal(n):
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def _combine(base, Sj, u, u1, u2, sign):
    n = base.n
    e = _normal(n)
    S, dS, ddS = Sj.g, Sj.dg, Sj.ddg
    eS = np.multiply.outer(e, dS)
    h = u * S
    dh = u * dS + u1 * np.multiply.outer(e, S)
    ddh = u * ddS + u1 * (eS + eS.swapaxes(0, 1)) + u2 * np.multiply.outer(np.outer(e, e), S)
    return MetricJet(base.g + sign * h, base.dg + sign * dh, base.ddg + sign * ddh)


def _point_and_log(x, log_s):
    x = np.array(x, dtype=float)
    if log_s is None:
        s = x[-1]
        log_s = math.log(s) if s > 0 else -math.inf
    else:
        x[-1] = math.exp(log_s)
    return x, log_s


def branch_jet(data, x, log_s=None, branch=None):
    """Jet of one branch formula, regardless of which side of the interface ``x`` is on."""
    x, log_s = _point_and_log(x, log_s)
    lam = data.lam
    if branch is None:
        branch = "chi" if log_s >= data.log_interface else "beta"
    Sj = data.S.jet(x)
    s = x[-1]
    if branch == "chi":
        c0, c1, c2 = data.chi(lam * s)
        return _combine(data.g.jet(x), Sj, c0 / lam, c1, lam * c2, 1.0)
    if log_s > 0:
        raise ValueError("beta branch needs rho <= 1")
    b0, b1, b2 = data.beta(log_s / lam**2)
    u = lam * s * s * b0
    u1 = s * (2.0 * lam * b0 + b1 / lam)
    u2 = 2.0 * lam * b0 + 3.0 * b1 / lam + b2 / lam**3
    return _combine(data.g_tilde.jet(x), Sj, u, u1, u2, -1.0)


def hat_metric_jet(data, x, log_s=None):
    """Jet of the deformed metric at ``x`` (normal coordinate optionally given as ``log s``)."""
    x, log_s = _point_and_log(x, log_s)
    if x[-1] >= data.S.support:
        return data.g.jet(x)
    jet = branch_jet(data, x, log_s)
    check_positive_definite(jet.g, "deformed metric")
    return jet


class DeformedField(MetricField):
    """The deformed metric viewed as a field on the chart of ``g``."""

    def __init__(self, data):
        self.data = data
        self.chart = data.g.chart

    def derivatives(self, x, order=2):
        if order > 2:
            raise ValueError("deformed metric jets are available up to second order")
        x = self._check_point(x)
        jet = hat_metric_jet(self.data, x)
        return [jet.g, jet.dg, jet.ddg][: order + 1]

    def jet_at(self, x, log_s=None):
        return hat_metric_jet(self.data, x, log_s)


def interface_residual(data, boundary_points=None):
    """Largest mismatch of the two branch formulas at ``rho = exp(-lam^2)``.

    Returns a dict with the value, first-jet and second-jet residuals.
    """
    data.check_structural()
    n = data.g.n
    if boundary_points is None:
        boundary_points = [np.zeros(n - 1), np.linspace(-0.5, 0.5, n - 1)]
    res = {"value": 0.0, "first": 0.0, "second": 0.0}
    for xb in boundary_points:
        x = collar_point(xb, 0.0)
        a = branch_jet(data, x, data.log_interface, "chi")
        b = branch_jet(data, x, data.log_interface, "beta")
        res["value"] = max(res["value"], float(np.max(np.abs(a.g - b.g))))
        res["first"] = max(res["first"], float(np.max(np.abs(a.dg - b.dg))))
        res["second"] = max(res["second"], float(np.max(np.abs(a.ddg - b.ddg))))
    return res


def deformation_norms(data, boundary_points, normal_samples=400, alpha=0.5):
    """Sup norm of ``g_lam - g`` and its ``alpha``-Hoelder seminorm along normal lines."""
    support = data.S.support
    s_lin = np.linspace(0.0, support, normal_samples)
    s_log = np.exp(np.linspace(-2.0 * data.lam**2, math.log(support), normal_samples // 2))
    s_all = np.unique(np.concatenate([s_lin, s_log[np.isfinite(s_log)]]))
    sup = 0.0
    hoelder = 0.0
    for xb in boundary_points:
        diffs, gs = [], []
        for s in s_all:
            x = collar_point(xb, s)
            jet = hat_metric_jet(data, x)
            g0 = data.g.derivatives(x, 0)[0]
            diffs.append(jet.g - g0)
            gs.append(g0)
            sup = max(sup, tensor_norm(jet.g - g0, g0))
        diffs = np.array(diffs)
        for i in range(len(s_all)):
            dist = np.abs(s_all[i + 1:] - s_all[i])
            if not len(dist):
                continue
            delta_h = diffs[i + 1:] - diffs[i]
            ginv = np.linalg.inv(gs[i])
            norms = np.sqrt(np.einsum("ik,jl,bij,bkl->b", ginv, ginv, delta_h, delta_h))
            hoelder = max(hoelder, float(np.max(norms / dist**alpha)))
    return {"sup": sup, "hoelder": hoelder, "alpha": alpha}
