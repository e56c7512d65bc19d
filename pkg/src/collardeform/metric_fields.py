"""Metrics on a boundary collar with exact derivative jets.

Coordinates are ``(x^1, ..., x^{n-1}, s)``: tangential coordinates first,
the normal coordinate ``s`` (distance to the boundary) last.  Fields in
Fermi gauge have ``g_nn = 1`` and ``g_an = 0``.

Every field exposes ``derivatives(x, order)`` returning the list
``[g, dg, ddg, ...]`` where ``d^k g`` has shape ``(n,)*k + (n, n)`` with the
derivative indices first, so ``dg[m, i, j] = d_m g_ij``.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .tensor_core import check_positive_definite


__all__ = [
    "CollarChart",
    "MetricJet",
    "MetricField",
    "CosineProfile",
    "PolyProfile",
    "WarpedProductField",
    "PolynomialField",
    "WarpedCollarField",
    "ShiftedField",
    "builtin_spherical_cap",
    "builtin_round_cylinder",
    "builtin_euclidean_ball",
    "builtin_poly_random",
    "poly_tensor_field",
    "warped_collar",
    "collar_point",
]

MAX_ORDER = 3


@dataclass(frozen=True)
class CollarChart:
    n: int
    delta: float
    boundary_coords: str = "stereographic"


@dataclass(frozen=True)
class MetricJet:
    """Metric value and first two coordinate derivatives at one point."""

    g: np.ndarray
    dg: np.ndarray
    ddg: np.ndarray

    @property
    def n(self):
        return self.g.shape[0]

    def symmetry_defect(self):
        return max(
            float(np.max(np.abs(self.g - self.g.T))),
            float(np.max(np.abs(self.dg - self.dg.swapaxes(1, 2)))),
            float(np.max(np.abs(self.ddg - self.ddg.swapaxes(2, 3)))),
            float(np.max(np.abs(self.ddg - self.ddg.swapaxes(0, 1)))),
        )

    def __add__(self, other):
        return MetricJet(self.g + other.g, self.dg + other.dg, self.ddg + other.ddg)


def collar_point(x_boundary, s):
    return np.append(np.asarray(x_boundary, dtype=float), float(s))


class CosineProfile:
    """``F(s) = a + b cos(omega s + phase)``."""

    def __init__(self, a, b, omega, phase):
        self.a, self.b, self.omega, self.phase = float(a), float(b), float(omega), float(phase)

    def derivs(self, s, order):
        u = self.omega * s + self.phase
        out = [self.a + self.b * math.cos(u)]
        for k in range(1, order + 1):
            out.append(self.b * self.omega**k * math.cos(u + k * math.pi / 2))
        return np.array(out)


class PolyProfile:
    """Polynomial profile with coefficients in increasing degree."""

    def __init__(self, coeffs):
        self.poly = np.polynomial.Polynomial(coeffs)

    def derivs(self, s, order):
        return np.array([self.poly.deriv(k)(s) if k else self.poly(s)
                         for k in range(order + 1)])


def _separable_derivs(f_s, tang, n, order):
    """Mixed partials of ``f(s) * T(x)`` up to ``order``.

    ``f_s[m]`` is the m-th s-derivative of the scalar factor; ``tang[j]`` is
    the j-th tangential derivative tensor of ``T`` (shape ``(n,)*j + trailing``,
    zero whenever a derivative index is ``s``).  Each derivative acts on the
    factor owning its coordinate, so a term is a choice of which derivative
    slots are normal.
    """
    e = np.zeros(n)
    e[-1] = 1.0
    out = []
    for k in range(order + 1):
        total = np.zeros((n,) * k + tang[0].shape)
        for m in range(k + 1):
            if f_s[m] == 0.0:
                continue
            base = tang[k - m]
            for _ in range(m):
                base = np.multiply.outer(e, base)
            # base has the m normal slots first; scatter them over all placements.
            for slots in itertools.combinations(range(k), m):
                rest = [p for p in range(k) if p not in slots]
                perm = list(slots) + rest
                inv = np.argsort(perm)
                axes = list(inv) + list(range(k, base.ndim))
                total += f_s[m] * base.transpose(axes)
        out.append(total)
    return out


class MetricField:
    """A metric on a collar chart with exact jets up to third order."""

    chart: CollarChart
    fermi = True

    @property
    def n(self):
        return self.chart.n

    def contains(self, x):
        s = x[-1]
        return 0.0 <= s < self.chart.delta

    def _check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point must have {self.n} coordinates, got {x.shape}")
        if not self.contains(x):
            raise ValueError(f"point {x} outside chart (delta={self.chart.delta})")
        return x

    def derivatives(self, x, order=2):
        raise NotImplementedError

    def jet(self, x):
        g, dg, ddg = self.derivatives(x, 2)
        check_positive_definite(g)
        return MetricJet(g, dg, ddg)

    def boundary_metric(self, x_boundary):
        g = self.derivatives(collar_point(x_boundary, 0.0), 0)[0]
        return g[:-1, :-1]


def _sphere_factor_derivs(x, order):
    """Conformal factor ``4 / (1 + |x|^2)^2`` of the stereographic round metric."""
    m = len(x)
    r2 = float(x @ x)
    u = 1.0 + r2
    out = [np.array(4.0 / u**2)]
    if order >= 1:
        out.append(-16.0 * x / u**3)
    if order >= 2:
        I = np.eye(m)
        out.append(-16.0 * I / u**3 + 96.0 * np.multiply.outer(x, x) / u**4)
    if order >= 3:
        I = np.eye(m)
        sym = (np.einsum("ij,k->ijk", I, x) + np.einsum("ik,j->ijk", I, x)
               + np.einsum("jk,i->ijk", I, x))
        xxx = np.einsum("i,j,k->ijk", x, x, x)
        out.append(96.0 * sym / u**4 - 768.0 * xxx / u**5)
    return out


def _flat_factor_derivs(x, order):
    m = len(x)
    return [np.array(1.0)] + [np.zeros((m,) * k) for k in range(1, order + 1)]


def _pad_tangential(t, n):
    """Embed a tangential derivative tensor into n-dim index slots."""
    k = t.ndim
    out = np.zeros((n,) * k)
    out[(slice(0, n - 1),) * k] = t
    return out


class WarpedProductField(MetricField):
    """``g = ds^2 + F(s) * base`` with base a round unit sphere or flat metric."""

    def __init__(self, n, profile, delta, base="sphere", label=""):
        if n < 2:
            raise ValueError("n must be at least 2")
        self.chart = CollarChart(n, float(delta), "stereographic" if base == "sphere" else "flat")
        self.profile = profile
        self.base = base
        self.label = label
        self._tmask = np.zeros((n, n))
        self._tmask[: n - 1, : n - 1] = np.eye(n - 1)
        self._nn = np.zeros((n, n))
        self._nn[-1, -1] = 1.0

    def derivatives(self, x, order=2):
        x = self._check_point(x)
        n = self.n
        factor = _sphere_factor_derivs if self.base == "sphere" else _flat_factor_derivs
        phis = [_pad_tangential(p, n) for p in factor(x[:-1], order)]
        f_s = self.profile.derivs(x[-1], order)
        scalars = _separable_derivs(f_s, phis, n, order)
        out = [np.multiply.outer(p, self._tmask) for p in scalars]
        out[0] = out[0] + self._nn
        return out


class WarpedCollarField(MetricField):
    """``ds^2 + cos^2(theta s) g_boundary`` built from a Fermi-gauge field."""

    def __init__(self, g, theta):
        if theta <= 0:
            raise ValueError("theta must be positive")
        self.g = g
        self.theta = float(theta)
        width = g.chart.delta * min(1.0, self.theta ** -3)
        self.chart = CollarChart(g.n, width, g.chart.boundary_coords)
        self.profile = CosineProfile(0.5, 0.5, 2.0 * self.theta, 0.0)
        self._nn = np.zeros((g.n, g.n))
        self._nn[-1, -1] = 1.0

    def derivatives(self, x, order=2):
        x = self._check_point(x)
        n = self.n
        base = self.g.derivatives(collar_point(x[:-1], 0.0), order)
        tang = []
        for k, d in enumerate(base):
            t = np.zeros_like(d)
            sl = (slice(0, n - 1),) * (k + 2)
            t[sl] = d[sl]
            tang.append(t)
        out = _separable_derivs(self.profile.derivs(x[-1], order), tang, n, order)
        out[0] = out[0] + self._nn
        return out


class PolynomialField(MetricField):
    """``g(y) = I + A + B.y + C.y.y + D.y.y.y`` around a centre point.

    Not in Fermi gauge in general; used for identity tests.
    """

    fermi = False

    def __init__(self, coeffs, center, delta, radius=1.0, offset=True):
        self.coeffs = coeffs
        self.offset = offset
        self.center = np.asarray(center, dtype=float)
        n = len(self.center)
        self.chart = CollarChart(n, float(delta), "cartesian")
        self.radius = float(radius)

    def contains(self, x):
        return float(np.max(np.abs(x - self.center))) <= self.radius

    def derivatives(self, x, order=2):
        x = self._check_point(x)
        y = x - self.center
        A, B, C, D = self.coeffs
        n = self.n
        g = np.eye(n) * self.offset + A + np.einsum("kij,k->ij", B, y) + np.einsum(
            "klij,k,l->ij", C, y, y) + np.einsum("klmij,k,l,m->ij", D, y, y, y)
        out = [g]
        if order >= 1:
            out.append(B + 2 * np.einsum("klij,l->kij", C, y)
                       + 3 * np.einsum("klmij,l,m->kij", D, y, y))
        if order >= 2:
            out.append(2 * C + 6 * np.einsum("klmij,m->klij", D, y))
        if order >= 3:
            out.append(6 * D)
        return out


def _sym_coeffs(rng, n, k):
    """Random coefficients symmetric in the k derivative slots and in (i, j)."""
    T = rng.standard_normal((n,) * k + (n, n))
    T = 0.5 * (T + T.swapaxes(-1, -2))
    if k >= 2:
        perms = list(itertools.permutations(range(k)))
        T = sum(T.transpose(list(p) + [k, k + 1]) for p in perms) / len(perms)
    return T


def builtin_poly_random(n, seed, magnitude, delta=0.3, center=None, radius=1.0):
    """Random cubic metric ``I + P(y)`` on the box ``|y|_inf <= radius``.

    Degree-k coefficients are ``magnitude * N(0, 1) / n^k`` so the size of the
    perturbation does not grow with the dimension.
    """
    rng = np.random.default_rng(seed)
    coeffs = [magnitude * _sym_coeffs(rng, n, k) / n**k for k in range(4)]
    bound = sum(radius**k * np.linalg.norm(c.reshape(-1, n, n), ord=2, axis=(1, 2)).sum()
                for k, c in enumerate(coeffs))
    if bound >= 0.9:
        raise ValueError(f"magnitude {magnitude} too large for positive definiteness")
    if center is None:
        center = np.zeros(n)
    return PolynomialField(coeffs, center, delta, radius)


def poly_tensor_field(n, seed, magnitude, delta=0.3, center=None, radius=1.0):
    """Random cubic symmetric 2-tensor field (no identity part, not a metric)."""
    rng = np.random.default_rng(seed)
    coeffs = [magnitude * _sym_coeffs(rng, n, k) / n**k for k in range(4)]
    if center is None:
        center = np.zeros(n)
    return PolynomialField(coeffs, center, delta, radius, offset=False)


def builtin_spherical_cap(n, r0, delta=0.3):
    """Geodesic ball of radius ``r0`` in the unit sphere, ``ds^2 + sin^2(r0 - s) g_S``."""
    if n < 3:
        raise ValueError("spherical cap needs n >= 3")
    if not 0.0 < r0 <= math.pi / 2:
        raise ValueError("r0 must lie in (0, pi/2]")
    if delta >= r0:
        raise ValueError("collar width must be smaller than r0")
    profile = CosineProfile(0.5, -0.5, -2.0, 2.0 * r0)
    return WarpedProductField(n, profile, delta, "sphere", label=f"cap(r0={r0})")


def builtin_round_cylinder(n, radius, delta=0.3):
    if radius <= 0:
        raise ValueError("radius must be positive")
    return WarpedProductField(n, PolyProfile([radius**2]), delta, "sphere",
                              label=f"cylinder(radius={radius})")


def builtin_euclidean_ball(n, delta=0.3):
    """Unit ball, ``ds^2 + (1 - s)^2 g_S``."""
    if delta >= 1.0:
        raise ValueError("collar width must be smaller than 1")
    return WarpedProductField(n, PolyProfile([1.0, -2.0, 1.0]), delta, "sphere",
                              label="ball")


def warped_collar(g, theta):
    """Warped collar metric on ``{s < delta * theta^-3}`` with totally geodesic boundary."""
    if not g.fermi:
        raise ValueError("warped collar needs a Fermi-gauge field")
    return WarpedCollarField(g, theta)


class ShiftedField(MetricField):
    """``g + s T`` for a constant symmetric matrix ``T``; agrees with ``g`` on the boundary."""

    def __init__(self, g, T):
        T = np.asarray(T, dtype=float)
        if T.shape != (g.n, g.n) or np.max(np.abs(T - T.T)) > 0:
            raise ValueError("shift must be a symmetric n x n matrix")
        self.g = g
        self.T = T
        self.chart = g.chart
        self.fermi = g.fermi and not np.any(T[-1])

    def contains(self, x):
        return self.g.contains(x)

    def derivatives(self, x, order=2):
        x = self._check_point(x)
        out = [np.array(d, copy=True) for d in self.g.derivatives(x, order)]
        out[0] += x[-1] * self.T
        if order >= 1:
            out[1][-1] += self.T
        return out
