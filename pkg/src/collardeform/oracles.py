"""Self-checks comparing library routines against independent computations.

Each trial draws its inputs from ``rng`` and returns the error it measured.
``run_oracle`` aggregates trials into a small summary dict.
"""

import numpy as np

from .cones import q_direct, q_frame
from .curvature import covariant_derivative, lemma21_rhs, riemann, tensor_norm
from .metric_fields import (
    MetricJet,
    builtin_poly_random,
    builtin_round_cylinder,
    collar_point,
    poly_tensor_field,
    warped_collar,
)
from .tensor_core import Frame4, symmetrize_curvature


__all__ = ["lemma21_trial", "warped_trial", "warped_closed_form", "qframe_trial",
           "ORACLES", "run_oracle"]


def lemma21_trial(rng, n=None):
    """Curvature of ``g + h`` two ways; returns the max abs difference."""
    if n is None:
        n = int(rng.choice([3, 4]))
    mag_h = 0.15 if n == 3 else 0.12
    seeds = rng.integers(0, 2**31, size=2)
    g = builtin_poly_random(n, int(seeds[0]), 0.08)
    hf = poly_tensor_field(n, int(seeds[1]), mag_h)
    x = rng.uniform(-0.5, 0.5, size=n)
    x[-1] = abs(x[-1]) * 0.5
    gj = g.jet(x)
    hj = MetricJet(*hf.derivatives(x, 2))
    size = tensor_norm(hj.g, gj.g)
    if size > 0.45:
        k = 0.45 / size
        hj = MetricJet(k * hj.g, k * hj.dg, k * hj.ddg)
    Dh, DDh = covariant_derivative(hj, gj)
    rhs = lemma21_rhs(riemann(gj), hj.g, Dh, DDh, gj.g)
    return float(np.max(np.abs(rhs - riemann(gj + hj))))


def warped_closed_form(theta, s, gamma, n):
    """Curvature of ``ds^2 + cos^2(theta s) gamma`` for a unit-sphere ``gamma``."""
    c2 = np.cos(theta * s) ** 2
    sn2 = np.sin(theta * s) ** 2
    m = n - 1
    R = np.zeros((n,) * 4)
    unit = (np.einsum("ac,bd->abcd", gamma, gamma) - np.einsum("ad,bc->abcd", gamma, gamma))
    R[:m, :m, :m, :m] = c2 * unit - theta**2 * sn2 * c2 * unit
    nb = theta**2 * c2 * gamma
    R[m, :m, m, :m] = nb
    R[:m, m, :m, m] = nb
    R[m, :m, :m, m] = -nb
    R[:m, m, m, :m] = -nb
    return R


def warped_trial(rng, theta=None, n=4, s_frac=None):
    """Relative error of the engine against the closed-form warped-collar curvature."""
    if theta is None:
        theta = float(rng.choice([1.0, 5.0, 20.0]))
    base = builtin_round_cylinder(n, 1.0, 0.3)
    gt = warped_collar(base, theta)
    if s_frac is None:
        s_frac = rng.uniform(0.0, 0.99)
    xb = rng.uniform(-0.8, 0.8, size=n - 1)
    x = collar_point(xb, s_frac * gt.chart.delta)
    gamma = base.boundary_metric(xb)
    R = riemann(gt.jet(x))
    ref = warped_closed_form(theta, x[-1], gamma, n)
    return float(np.max(np.abs(R - ref)) / np.max(np.abs(ref)))


def qframe_trial(rng, n=None):
    """Frame formula versus direct complex evaluation on a random tensor."""
    if n is None:
        n = int(rng.integers(4, 7))
    R = symmetrize_curvature(rng.standard_normal((n,) * 4))
    A = rng.standard_normal((n, n))
    g = A @ A.T + n * np.eye(n)
    L = np.linalg.cholesky(g)
    Q = np.linalg.qr(rng.standard_normal((n, 4)))[0]
    # Columns of inv(L^T) Q are g-orthonormal.
    vecs = np.linalg.solve(L.T, Q).T
    frame = Frame4(vecs, float(rng.uniform()), float(rng.uniform()))
    z, w = frame.z_w()
    return abs(q_frame(R, g, frame) - q_direct(R, z, w))


ORACLES = {
    "lemma21": (lemma21_trial, 1e-8),
    "warped": (warped_trial, 1e-9),
    "qframe": (qframe_trial, 1e-11),
}


def run_oracle(name, seed=0, trials=100):
    if name not in ORACLES:
        raise ValueError(f"unknown oracle {name!r}")
    trial, tol = ORACLES[name]
    rng = np.random.default_rng(seed)
    errors = [trial(rng) for _ in range(trials)]
    worst = max(errors) if errors else 0.0
    return {"test": name, "seed": seed, "trials": trials, "max_error": worst,
            "tolerance": tol, "pass": worst < tol}
