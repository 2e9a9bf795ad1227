"""Boundary sampling along rays, inward normals and complex tangent frames."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from . import jets
from .expr import DomainSpec

__all__ = ["BoundarySample", "SampleSet", "directions", "sample_boundary",
           "tangent_frame", "project_to_boundary", "default_threads"]

MARCH_STEPS = 64
BISECT_TOL = 1e-12
CHUNK = 16


def default_threads() -> int:
    import os
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BoundarySample:
    index: int
    point: np.ndarray
    residual: float
    normal: np.ndarray  # unit inward normal in R^{2n}
    frame: np.ndarray   # columns span the complex tangent space, shape (n, n-1)


@dataclass(frozen=True)
class SampleSet:
    samples: list
    requested: int
    skipped: list = field(default_factory=list)

    @property
    def points(self) -> np.ndarray:
        return np.array([s.point for s in self.samples])

    @property
    def shortfall(self) -> int:
        return self.requested - len(self.samples)


def directions(dim: int, count: int, seed: int) -> np.ndarray:
    """Coordinate axes (-e_k, +e_k) first, then scrambled Halton points mapped to the sphere."""
    axes = []
    for k in range(dim):
        for s in (-1.0, 1.0):
            e = np.zeros(dim)
            e[k] = s
            axes.append(e)
    axes = np.array(axes[:count]).reshape(-1, dim)
    rest = count - len(axes)
    if rest <= 0:
        return axes
    u = qmc.Halton(d=dim, scramble=True, seed=seed).random(rest)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([axes, g])


def _box_exit(d, box):
    """Largest s with ``s d`` inside the cube of half-width ``box``."""
    return float(box / np.abs(d).max())


def _ray_hit(domain: DomainSpec, origin, d):
    """Boundary point on the ray origin + s d, or None when it leaves the box."""
    s_max = _box_exit(d, domain.box)
    ss = np.linspace(0.0, s_max, MARCH_STEPS + 1)
    vals = domain.r(origin[None, :] + ss[:, None] * d[None, :])
    out = np.flatnonzero(vals >= 0)
    if out.size == 0:
        return None
    lo, hi = ss[out[0] - 1], ss[out[0]]
    while hi - lo > BISECT_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if float(domain.r(origin + mid * d)) < 0:
            lo = mid
        else:
            hi = mid
    return origin + 0.5 * (lo + hi) * d


def project_to_boundary(domain: DomainSpec, x, steps: int = 2) -> np.ndarray:
    """Newton steps along the real gradient: x <- x - r grad r / |grad r|^2."""
    x = np.asarray(x, dtype=float)
    for _ in range(steps):
        jet = jets.jet_eval(domain.ast, x, 1)
        g = jet.c[..., 1:]
        x = x - (jet.value / np.sum(g * g, axis=-1))[..., None] * g
    return x


def tangent_frame(r_i) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : sum_j r_j v_j = 0}``.

    ``r_i`` is the holomorphic gradient ``(dr/dz_1, ..., dr/dz_n)``.
    """
    r_i = np.asarray(r_i, dtype=complex)
    norm_ = np.linalg.norm(r_i)
    if norm_ == 0:
        raise ValueError("vanishing gradient: no tangent frame")
    n = r_i.size
    nu = np.conj(r_i) / norm_  # unit normal direction: v tangent iff <v, nu> = 0
    basis = []
    for k in np.argsort(np.abs(nu), kind="stable"):
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        for u in [nu] + basis:
            v = v - u * np.vdot(u, v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == n - 1:
            break
    # one more pass of re-orthogonalisation for 1e-15 level tangency
    out = []
    for v in basis:
        for u in [nu] + out:
            v = v - u * np.vdot(u, v)
        out.append(v / np.linalg.norm(v))
    return np.array(out).T.reshape(n, n - 1)


def _sample_one(domain: DomainSpec, index: int, d):
    hit = _ray_hit(domain, domain.interior_point, d)
    if hit is None:
        return None
    x = project_to_boundary(domain, hit, steps=2)
    jet = jets.jet_eval(domain.ast, x, 1)
    g = jet.c[1:]
    normal = -g / np.linalg.norm(g)
    r_i = 0.5 * (g[0::2] - 1j * g[1::2])
    return BoundarySample(index, x, float(abs(jet.value)), normal, tangent_frame(r_i))


def sample_boundary(domain: DomainSpec, count: int, seed: int = 0,
                    threads: int | None = None) -> SampleSet:
    """``count`` boundary points hit by rays from the domain's interior point.

    Rays that leave the sampling box without a sign change are skipped and
    reported.  The result does not depend on ``threads``.
    """
    if count < 1:
        raise ValueError("count must be positive")
    dirs = directions(domain.dim, count, seed)
    threads = threads or default_threads()
    chunks = [range(i, min(i + CHUNK, count)) for i in range(0, count, CHUNK)]

    def work(idx):
        return [_sample_one(domain, i, dirs[i]) for i in idx]

    if threads == 1:
        results = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, chunks))
    flat = [s for chunk in results for s in chunk]
    samples = [s for s in flat if s is not None]
    skipped = [i for i, s in enumerate(flat) if s is None]
    return SampleSet(samples, count, skipped)
