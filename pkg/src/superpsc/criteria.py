"""Boundary criteria: L2, the error term E~, det H(rho) on the boundary,
the planar convexity functional, the convexity certificate, pseudo-Ricci
curvature, and the sampling classifier built from them.

All pointwise functions take a :class:`BoundaryData` bundle, which evaluates
the Wirtinger tensors, raised indices and log J derivatives once per batch.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .calculus import RaisedData, raise_indices, tilde_grad_norm_sq, tilde_laplacian, R_op
from .expr import DomainSpec
from .fefferman import (J_bordered, LogJDerivatives, auto_shift, logJ_derivatives)
from .geometry import sample_boundary, tangent_frame
from .jets import Jet, WirtingerData

__all__ = [
    "BoundaryData", "boundary_data", "L2", "L2_decomposition", "E_tilde",
    "detH_rho_boundary", "S_r", "convex_sufficient", "convex_companion",
    "S_r_general", "pseudo_ricci", "pseudo_ricci_min", "tangent_hessian_min_eig",
    "real_hessian_min_eig", "curvature_2d", "Verdict", "classify",
    "evaluate_points", "L2_VARIANTS", "TIE_TOL", "CONVEX_TOL",
]

L2_VARIANTS = ("eq311", "def12")
TIE_TOL = 1e-7
CONVEX_TOL = 1e-8
FORM_AGREEMENT = 1e-6
COND_LIMIT = 1e10
CHUNK = 16


@dataclass(frozen=True)
class BoundaryData:
    """Everything the boundary criteria contract, for a batch of points."""

    jet: Jet
    w: WirtingerData
    rd: RaisedData
    logJ: LogJDerivatives
    J: np.ndarray

    @property
    def n(self) -> int:
        return self.w.n

    @property
    def lap_r_k(self) -> np.ndarray:
        """``tilde-Laplacian of r_k = a^{i jbar} r_{i jbar k}``."""
        return np.einsum("...ij,...ijk->...k", self.rd.a, self.w.r_ijbk)

    @property
    def lap_r_kl(self) -> np.ndarray:
        """``a^{i jbar} r_{i jbar k lbar}``."""
        return np.einsum("...ij,...ijkl->...kl", self.rd.a, self.w.r_ijbklb)

    @property
    def up_rik(self) -> np.ndarray:
        """``r^i r_{ik}``."""
        return np.einsum("...i,...ik->...k", self.rd.up, self.w.r_ij)

    @property
    def lap_logJ(self) -> np.ndarray:
        return tilde_laplacian(self.rd, self.logJ.hessian)

    @property
    def grad_logJ_sq(self) -> np.ndarray:
        return tilde_grad_norm_sq(self.rd, self.logJ.gradient)

    @property
    def R_logJ(self) -> np.ndarray:
        return R_op(self.rd, self.logJ.gradient)

    def __getitem__(self, idx) -> BoundaryData:
        if not isinstance(idx, tuple):
            idx = (idx,)
        lj = LogJDerivatives(self.logJ.value[idx], self.logJ.gradient[idx], self.logJ.hessian[idx])
        return BoundaryData(self.jet[idx], self.w[idx], self.rd[idx], lj, self.J[idx])


def boundary_data(rjet: Jet) -> BoundaryData:
    """Bundle order-4 data of ``r`` at (batched) boundary points."""
    if rjet.order < 4:
        raise ValueError("boundary criteria need jets of order >= 4")
    rjet = rjet.truncate(4)
    w = jets.wirtinger(rjet)
    rd = raise_indices(w)
    return BoundaryData(rjet, w, rd, logJ_derivatives(rjet, rd), J_bordered(w))


# ---------------------------------------------------------------- L2

def L2(bd: BoundaryData, variant: str = "eq311") -> np.ndarray:
    """The super-pseudoconvexity functional.

    ``eq311`` weights the gradient term by ``|dr|_r^2 / (n+1)^2`` (the weight
    under which L2 factors det H(rho)); ``def12`` uses ``|dr|_r^2``.
    """
    if variant not in L2_VARIANTS:
        raise ValueError(f"unknown L2 variant {variant!r}")
    n, G = bd.n, bd.rd.grad_sq
    weight = G / (n + 1) ** 2 if variant == "eq311" else G
    return (1 + G * bd.lap_logJ / (n * (n + 1))
            - 2 * bd.R_logJ.real / (n + 1)
            - weight * bd.grad_logJ_sq)


def E_tilde(bd: BoundaryData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``E~`` with its lower and upper bounds built from third/fourth derivatives."""
    n, rd, w = bd.n, bd.rd, bd.w
    G = rd.grad_sq
    c = G / (n * (n + 1))
    lk = bd.lap_r_k
    shift = 2 * np.einsum("...k,...k->...", rd.up, lk).real / (n + 1)
    value = c * (bd.lap_logJ - n * bd.grad_logJ_sq / (n + 1)) - shift

    a, inv = rd.a, rd.inv
    t3, t3b = w.r_ijbk, w.r_ijbkb  # r_{i jbar k}, r_{p qbar lbar}
    core = np.einsum("...kl,...kl->...", a, bd.lap_r_kl)
    cross = np.einsum("...kl,...iq,...pj,...ijk,...pql->...", a, a, inv, t3, t3b)
    grad2 = np.einsum("...kl,...k,...l->...", a, lk, np.conj(lk))
    u = bd.up_rik
    ur = np.einsum("...kl,...k,...l->...", a, u, np.conj(u))
    lower = c * (core - cross - grad2 - n * ur / G ** 2).real - shift

    cross_up = np.einsum("...kl,...iq,...p,...j,...ijk,...pql->...",
                         a, a, rd.up, rd.upbar, t3, t3b)
    hol = np.einsum("...kl,...iq,...ik,...ql->...", a, a, w.r_ij, w.r_ibjb)
    upper = c * (core + cross_up + 2 * hol / G).real - shift
    return value, lower, upper


def L2_decomposition(bd: BoundaryData) -> np.ndarray:
    """``1 - 2 Re(r^k r^i r_ik) / ((n+1)|dr|_r^2) + E~`` (equals L2 on the boundary)."""
    n, G = bd.n, bd.rd.grad_sq
    t = np.einsum("...k,...k->...", bd.rd.up, bd.up_rik).real
    return 1 - 2 * t / ((n + 1) * G) + E_tilde(bd)[0]


def detH_rho_boundary(bd: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    """Boundary value of det H(rho) two ways.

    The first is ``det H(r) L2 / J^{n/(n+1)}``; the second the determinant of
    ``H(r)`` corrected by the rank-two terms in ``d log J`` and ``dB``, using
    ``dB = -B0 dr`` on the boundary.
    """
    n = bd.n
    scale = bd.J ** (-n / (n + 1))
    primary = np.linalg.det(bd.w.H).real * L2(bd, "eq311") * scale
    r_i, L = bd.w.r_i, bd.logJ.gradient
    B0 = tilde_laplacian(bd.rd, bd.logJ.hessian) / (2 * n * (n + 1))
    outer = lambda x, y: np.einsum("...i,...j->...ij", x, np.conj(y))
    M = (bd.w.H - (outer(r_i, L) + outer(L, r_i)) / (n + 1)
         + 2 * B0[..., None, None] * outer(r_i, r_i))
    return primary, np.linalg.det(M).real * scale


def S_r(w: WirtingerData) -> np.ndarray:
    """Planar convexity functional ``r_{1 1bar} - Re(r_11 conj(r_1)^2 / |r_1|^2)``.

    This is ``r_{1 1bar} - Re r_11`` after rotating so that ``r_1 > 0``; it does
    not need the Laplacian of r to be positive and is unchanged by the shift
    ``r + (a/2) r^2`` on the boundary.
    """
    if w.n != 1:
        raise ValueError("S_r is defined for n = 1")
    r1 = w.r_i[..., 0]
    if np.any(r1 == 0):
        raise ValueError("degenerate defining function: r_1 = 0 on the boundary")
    H = w.H[..., 0, 0].real
    return H - (w.r_ij[..., 0, 0] * np.conj(r1) ** 2 / np.abs(r1) ** 2).real


def S_r_general(bd: BoundaryData) -> np.ndarray:
    """``det H(r) (1 - 2 Re(r^k r^i r_ik) / ((n+1) |dr|_r^2))``; equals S_r when n = 1."""
    n, G = bd.n, bd.rd.grad_sq
    t = np.einsum("...k,...k->...", bd.rd.up, bd.up_rik).real
    return np.linalg.det(bd.w.H).real * (1 - 2 * t / ((n + 1) * G))


def convex_sufficient(bd: BoundaryData) -> np.ndarray:
    """Left side of the convexity-based certificate (positive => strictly super-psc on convex D)."""
    n, rd, w = bd.n, bd.rd, bd.w
    G = rd.grad_sq
    a, lk = rd.a, bd.lap_r_k
    core = np.einsum("...kl,...kl->...", a, bd.lap_r_kl)
    cross = np.einsum("...kl,...iq,...pj,...ijk,...pql->...", a, a, rd.inv, w.r_ijbk, w.r_ijbkb)
    grad2 = np.einsum("...kl,...k,...l->...", a, lk, np.conj(lk))
    shift = 2 * np.einsum("...k,...k->...", rd.up, lk).real / (n + 1)
    return (n - 1) / (n + 1) + G / (n * (n + 1)) * (core - cross - grad2).real - shift


def convex_companion(bd: BoundaryData) -> np.ndarray:
    """Quantity that is non-negative on the boundary of a convex domain."""
    n, rd = bd.n, bd.rd
    G = rd.grad_sq
    u = bd.up_rik
    t = np.einsum("...k,...k->...", rd.up, u).real
    ur = np.einsum("...kl,...k,...l->...", rd.a, u, np.conj(u)).real
    return 2 / (n + 1) - 2 * t / ((n + 1) * G) - ur / ((n + 1) * G)


# ------------------------------------------------------------ pseudo-Ricci

def _ricci_matrix(bd: BoundaryData, simplified: bool = False) -> np.ndarray:
    n = bd.n
    factor = n * np.linalg.det(bd.w.H).real / bd.J
    M = factor[..., None, None] * bd.w.H
    return M if simplified else M - bd.logJ.hessian


def pseudo_ricci(bd: BoundaryData, w_vec, v_vec, simplified: bool = False,
                 tol: float = 1e-8) -> complex:
    """``Ric(w, vbar)`` at a single boundary point, for tangent ``w`` and ``v``.

    ``simplified`` drops the log J Hessian term (valid when J = 1 + O(r^2)).
    """
    w_vec = np.asarray(w_vec, dtype=complex)
    v_vec = np.asarray(v_vec, dtype=complex)
    r_i = bd.w.r_i
    for vec in (w_vec, v_vec):
        if abs(np.dot(r_i, vec)) > tol:
            raise ValueError("vector is not in the complex tangent space")
    M = _ricci_matrix(bd, simplified)
    return complex(np.einsum("kl,k,l->", M, w_vec, np.conj(v_vec)))


def pseudo_ricci_min(bd: BoundaryData, simplified: bool = False) -> np.ndarray:
    """Smallest eigenvalue of Ric on unit tangent vectors (NaN for n = 1)."""
    n = bd.n
    M = _ricci_matrix(bd, simplified)
    out = np.full(M.shape[:-2], np.nan)
    if n == 1:
        return out
    flatM = M.reshape(-1, n, n)
    flat_ri = bd.w.r_i.reshape(-1, n)
    vals = []
    for Mk, ri in zip(flatM, flat_ri):
        E = tangent_frame(ri)
        Q = E.T @ Mk @ np.conj(E)
        vals.append(np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[0])
    return np.array(vals).reshape(M.shape[:-2])


# ------------------------------------------------------------- convexity

def real_hessian_min_eig(rjet: Jet) -> np.ndarray:
    """Smallest eigenvalue of the full real Hessian of r."""
    return np.linalg.eigvalsh(rjet.derivative_tensor(2))[..., 0]


def tangent_hessian_min_eig(rjet: Jet) -> np.ndarray:
    """Smallest eigenvalue of the real Hessian restricted to the real tangent hyperplane."""
    Hr = rjet.derivative_tensor(2)
    g = rjet.derivative_tensor(1)
    m = g.shape[-1]
    flatH, flatg = Hr.reshape(-1, m, m), g.reshape(-1, m)
    out = []
    for Hk, gk in zip(flatH, flatg):
        # right singular vectors beyond the first span the orthogonal complement
        _, _, vt = np.linalg.svd(gk[None, :])
        T = vt[1:].T
        out.append(np.linalg.eigvalsh(T.T @ Hk @ T)[0])
    return np.array(out).reshape(g.shape[:-1])


def curvature_2d(rjet: Jet) -> np.ndarray:
    """Signed curvature of a planar level curve from real derivatives (positive = convex)."""
    g = rjet.derivative_tensor(1)
    H = rjet.derivative_tensor(2)
    rx, ry = g[..., 0], g[..., 1]
    num = ry ** 2 * H[..., 0, 0] - 2 * rx * ry * H[..., 0, 1] + rx ** 2 * H[..., 1, 1]
    return num / np.hypot(rx, ry) ** 3


# ---------------------------------------------------------- classification

POINT_FIELDS = (
    "residual", "J", "cond", "L2", "L2_def12", "L2_decomposition", "E_tilde",
    "E_lower", "E_upper", "detH_rho", "detH_rho_rank", "S_r", "conv_crit_lhs",
    "conv_companion", "pseudo_ricci_min", "tangent_hessian_min", "real_hessian_min",
)


def evaluate_points(domain: DomainSpec, points, shift: float | None = None) -> dict:
    """All criteria at boundary points of ``domain`` for ``r + (shift/2) r^2``.

    ``shift=None`` picks the smallest admissible shift for these points.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    rjet = jets.jet_eval(domain.ast, points, 4)
    if shift is None:
        shift, _ = auto_shift(jets.wirtinger(rjet.truncate(2)))
    if shift:
        rjet = rjet + rjet * rjet * (0.5 * shift)
    bd = boundary_data(rjet)
    n = domain.n
    nan = np.full(len(points), np.nan)
    val, lo, hi = E_tilde(bd)
    primary, rank = detH_rho_boundary(bd)
    return {
        "residual": np.abs(rjet.value),
        "J": bd.J,
        "cond": bd.rd.cond,
        "L2": L2(bd, "eq311"),
        "L2_def12": L2(bd, "def12"),
        "L2_decomposition": L2_decomposition(bd),
        "E_tilde": val, "E_lower": lo, "E_upper": hi,
        "detH_rho": primary, "detH_rho_rank": rank,
        "S_r": S_r(bd.w) if n == 1 else nan,
        "conv_crit_lhs": convex_sufficient(bd) if n > 1 else nan,
        "conv_companion": convex_companion(bd),
        "pseudo_ricci_min": pseudo_ricci_min(bd),
        "tangent_hessian_min": tangent_hessian_min_eig(rjet),
        "real_hessian_min": real_hessian_min_eig(rjet),
    }


@dataclass
class Verdict:
    classification: str
    margin: float
    convexity: str
    worst_point: list
    worst_index: int
    at_tolerance: bool = False
    reason: str | None = None
    variant: str = "eq311"
    shift: float = 0.0
    n_samples: int = 0
    warnings: list = field(default_factory=list)


def _convexity(min_eigs) -> str:
    m = float(np.min(min_eigs))
    if m > CONVEX_TOL:
        return "strictly_convex"
    if m >= -CONVEX_TOL:
        return "convex"
    return "not_convex"


def _argmin_first(values, tol=1e-12) -> int:
    m = np.min(values)
    return int(np.flatnonzero(values <= m + tol)[0])


def classify(domain: DomainSpec, n_samples: int = 200, seed: int = 0,
             variant: str = "eq311", threads: int | None = None,
             tol_boundary: float = 1e-10) -> tuple[Verdict, dict, object]:
    """Sample the boundary and classify the given defining function.

    Returns the verdict, the per-sample criteria table and the sample set.
    The verdict refers to this defining function only: a negative margin
    means this r fails, not that every defining function does.
    """
    if variant not in L2_VARIANTS:
        raise ValueError(f"unknown L2 variant {variant!r}")
    samples = sample_boundary(domain, n_samples, seed, threads)
    if not samples.samples:
        raise RuntimeError("boundary sampling failed: no ray crossed the boundary")
    pts = samples.points
    warnings = []
    if samples.shortfall:
        warnings.append(f"{samples.shortfall} rays left the sampling box without a boundary crossing")

    w = jets.wirtinger(jets.jet_eval(domain.ast, pts, 2))
    shift, _ = auto_shift(w)
    if shift:
        warnings.append(f"complex Hessian not positive definite at some samples; using r + ({shift:g}/2) r^2")

    chunks = [slice(i, min(i + CHUNK, len(pts))) for i in range(0, len(pts), CHUNK)]
    work = lambda sl: evaluate_points(domain, pts[sl], shift)
    threads = threads or 1
    if threads == 1:
        parts = [work(sl) for sl in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, chunks))
    table = {k: np.concatenate([p[k] for p in parts]) for k in POINT_FIELDS}

    crit = table["L2"] if variant == "eq311" else table["L2_def12"]
    other = table["L2_def12"] if variant == "eq311" else table["L2"]
    k = _argmin_first(crit)
    margin = float(crit[k])
    convexity = _convexity(table["tangent_hessian_min"])

    problems = []
    if np.any(table["residual"] > tol_boundary):
        problems.append(f"{int(np.sum(table['residual'] > tol_boundary))} samples off the boundary tolerance")
    if np.any(table["J"] <= 0):
        problems.append("J(r) <= 0 at some samples")
    if np.any(table["cond"] > COND_LIMIT):
        problems.append("ill-conditioned complex Hessian at some samples")
    rel = np.abs(table["detH_rho"] - table["detH_rho_rank"]) / np.maximum(np.abs(table["detH_rho"]), 1e-300)
    if np.any(rel > FORM_AGREEMENT):
        problems.append("the two boundary det H(rho) forms disagree beyond 1e-6")
    if np.any(np.sign(crit) != np.sign(other)):
        warnings.append("L2 variants eq311 and def12 disagree in sign at some samples")

    at_tol = False
    reason = None
    if margin < -TIE_TOL and not (table["cond"][k] > COND_LIMIT or table["J"][k] <= 0):
        cls = "not_super_psc"
    elif problems:
        cls, reason = "inconclusive", "; ".join(problems)
    elif abs(margin) < TIE_TOL:
        cls, at_tol = "super_psc", True
    elif margin > 0:
        cls = "strictly_super_psc"
    else:
        cls, reason = "inconclusive", "negative margin at an unreliable sample"
    warnings.extend(problems if cls != "inconclusive" else [])
    verdict = Verdict(cls, margin, convexity, [float(x) for x in pts[k]], int(samples.samples[k].index),
                      at_tol, reason, variant, float(shift), len(pts), warnings)
    return verdict, table, samples
