"""Kähler metric of u = -log(-r), its Ricci form, the Laplace-Beltrami
operator, and Rayleigh quotients for the bottom of the spectrum on the ball.

The Laplacian is normalised as ``-4 sum g^{i jbar} d_i d_jbar``, so its
quadratic form is ``4 g^{i jbar} f_i f_jbar`` against ``dV_g = det g dLeb``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import jets
from .expr import DomainSpec, ExprAst
from .fefferman import complex_hessian_jet, log_hessian

__all__ = ["MetricData", "metric_at", "ricci_at", "einstein_defect", "laplacian",
           "cutoff", "test_function", "rayleigh_quotient", "rayleigh_scan",
           "rayleigh_mc", "RayleighPoint"]


@dataclass(frozen=True)
class MetricData:
    point: np.ndarray
    g: np.ndarray
    ginv: np.ndarray  # g^{i jbar}, i.e. (g^{-1})^T
    det: float


def metric_at(domain: DomainSpec, point) -> MetricData:
    """Complex Hessian of ``-log(-r)`` at an interior point."""
    point = np.asarray(point, dtype=float)
    w = jets.wirtinger(jets.jet_eval(domain.ast, point, 2))
    if w.r >= 0:
        raise ValueError("metric needs an interior point (r < 0)")
    g = log_hessian(w)
    g = 0.5 * (g + g.conj().T)
    if np.linalg.eigvalsh(g)[0] <= 0:
        raise ValueError("metric is not positive definite: -log(-r) not strictly psh here")
    return MetricData(point, g, np.linalg.inv(g).T, float(np.linalg.det(g).real))


def ricci_at(domain: DomainSpec, point) -> np.ndarray:
    """``R_{k lbar} = -d_k d_lbar log det g`` by jet differentiation."""
    rjet = jets.jet_eval(domain.ast, np.asarray(point, dtype=float), 4)
    if rjet.value >= 0:
        raise ValueError("Ricci form needs an interior point (r < 0)")
    u = -jets.jlog(-rjet)
    detg = jets.det(complex_hessian_jet(u)).real
    return -jets.jlog(detg).hessian_z()


def einstein_defect(domain: DomainSpec, point) -> float:
    """``||R + (n+1) g|| / ||g||`` (Frobenius)."""
    m = metric_at(domain, point)
    R = ricci_at(domain, point)
    return float(np.linalg.norm(R + (domain.n + 1) * m.g) / np.linalg.norm(m.g))


def laplacian(domain: DomainSpec, f: ExprAst, point) -> float:
    """``-4 sum g^{i jbar} f_{i jbar}`` at an interior point."""
    if f.n != domain.n:
        raise ValueError("function and domain dimensions differ")
    m = metric_at(domain, point)
    F = jets.jet_eval(f, np.asarray(point, dtype=float), 2).hessian_z()
    return float(-4 * np.einsum("ij,ij->", m.ginv, F).real)


# ---------------------------------------------------------- test functions

def cutoff(x: jets.Jet, eps: float) -> jets.Jet:
    """Smooth step in ``x``: 0 for x <= eps, 1 for x >= 2 eps, built from the flat bump."""
    lo = jets.bump_jet(x - eps, eps)          # exp(-eps/(2 eps - x)), zero for x >= 2 eps
    hi = jets.bump_jet(2 * eps - x, eps)      # exp(-eps/(x - eps)), zero for x <= eps
    return hi / (lo + hi)


def test_function(x, s: float, eps: float):
    """``x^s chi_eps(x)`` and its x-derivative, with ``x = -rho = 1 - |z|^2``."""
    x = np.asarray(x, dtype=float)
    X = jets.variables(x[..., None], 1)[0]
    F = jets.jpow(X, s) * cutoff(X, eps)
    return F.value, F.c[..., 1]


def _integrands(n, s, eps):
    # x = 1 - t; Lebesgue measure ~ t^{n-1} dt; det g = x^{-(n+1)}
    def num(x):
        _, dF = test_function(x, s, eps)
        t = 1 - x
        return float(4 * dF ** 2 * t * x ** 2 * x ** (-(n + 1)) * t ** (n - 1))

    def den(x):
        F, _ = test_function(x, s, eps)
        t = 1 - x
        return float(F ** 2 * x ** (-(n + 1)) * t ** (n - 1))

    return num, den


@dataclass(frozen=True)
class RayleighPoint:
    s: float
    quotient: float
    stderr: float


def rayleigh_quotient(n: int, s: float, eps: float = 1e-4, limit: int = 200) -> RayleighPoint:
    """Radial quadrature of the Rayleigh quotient of ``(-rho)^s chi_eps`` on the ball.

    ``stderr`` propagates quad's absolute error estimates.
    """
    if s <= n / 2:
        raise ValueError(f"(-rho)^s is not square integrable for s <= n/2 = {n / 2}")
    num, den = _integrands(n, s, eps)
    pts = [eps, 2 * eps, 1.0]
    N = E_N = D = E_D = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(num, a, b, limit=limit, epsabs=0, epsrel=1e-11)
        N, E_N = N + v, E_N + e
        v, e = integrate.quad(den, a, b, limit=limit, epsabs=0, epsrel=1e-11)
        D, E_D = D + v, E_D + e
    Q = N / D
    return RayleighPoint(float(s), float(Q), float(abs(Q) * (E_N / abs(N) + E_D / abs(D))))


def rayleigh_scan(n: int, s_grid, eps: float = 1e-4, limit: int = 200,
                  threads: int = 1) -> list[RayleighPoint]:
    """Quotients over an exponent grid (each one an upper bound for the bottom of the spectrum)."""
    s_grid = [float(s) for s in s_grid]
    work = lambda s: rayleigh_quotient(n, s, eps, limit)
    if threads == 1:
        return [work(s) for s in s_grid]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(work, s_grid))


def _ball_uniform(rng, count, dim):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = rng.random(count) ** (1.0 / dim)
    return g * radius[:, None]


def rayleigh_mc(n: int, s: float, eps: float = 1e-4, samples: int = 1_000_000,
                seed: int = 0, batches: int = 20, threads: int = 1) -> RayleighPoint:
    """Monte Carlo estimate of the same quotient from uniform points of the ball.

    Each batch has its own generator spawned from ``seed``; batch sums are
    combined in batch order, so the result does not depend on ``threads``.
    The standard error is the delta-method error of the ratio of means.
    """
    if s <= n / 2:
        raise ValueError(f"(-rho)^s is not square integrable for s <= n/2 = {n / 2}")
    seeds = np.random.SeedSequence(seed).spawn(batches)
    sizes = [samples // batches + (k < samples % batches) for k in range(batches)]

    def batch(k):
        rng = np.random.default_rng(seeds[k])
        z = _ball_uniform(rng, sizes[k], 2 * n)
        t = np.sum(z * z, axis=1)
        x = 1 - t
        F, dF = test_function(x, s, eps)
        detg = x ** (-(n + 1))
        a = 4 * dF ** 2 * t * x ** 2 * detg
        b = F ** 2 * detg
        return a, b

    if threads == 1:
        parts = [batch(k) for k in range(batches)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(batch, range(batches)))
    a = np.concatenate([p[0] for p in parts])
    b = np.concatenate([p[1] for p in parts])
    ma, mb = a.mean(), b.mean()
    cov = np.cov(a, b)
    var = (cov[0, 0] / mb ** 2 - 2 * ma * cov[0, 1] / mb ** 3 + ma ** 2 * cov[1, 1] / mb ** 4) / len(a)
    return RayleighPoint(float(s), float(ma / mb), float(math.sqrt(max(var, 0.0))))
