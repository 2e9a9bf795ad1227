"""Fefferman's operator, the log-level identities, the correction B and rho_1.

Pointwise quantities take :class:`WirtingerData`.  Anything that needs
derivatives of J (log J's Hessian, B, rho_1 and its defect) is composed at jet
level from a jet of ``r``: every step costs two orders, so a jet of order K
yields J and log J to order K-2 and B, rho_1 to order K-4.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import jets
from .calculus import RaisedData, raise_indices, tilde_laplacian
from .expr import DomainSpec
from .jets import Jet, WirtingerData

__all__ = [
    "J_bordered", "J_product", "product_data", "psh_shift", "auto_shift",
    "shift_identity_residual", "log_hessian", "log_level_identity_check",
    "logJ_gradient", "logJ_derivatives", "LogJDerivatives", "B_and_B0",
    "B_trace_form", "FeffermanJets", "fefferman_jets", "J_jet",
    "complex_hessian_jet", "rho1", "DefectScan", "defect_scan",
    "AffineMap", "transport_rho", "transport_detH",
]

MAX_SHIFT = 2.0 ** 20


def _bordered(r, r_i, H):
    n = H.shape[-1]
    M = np.empty(H.shape[:-2] + (n + 1, n + 1), dtype=complex)
    M[..., 0, 0] = r
    M[..., 0, 1:] = np.conj(r_i)
    M[..., 1:, 0] = r_i
    M[..., 1:, 1:] = H
    return M


def J_bordered(w: WirtingerData) -> np.ndarray:
    """``-det [[r, dbar r], [(dbar r)^*, H(r)]]``."""
    return -np.linalg.det(_bordered(w.r, w.r_i, w.H)).real


def J_product(w: WirtingerData, rd: RaisedData) -> np.ndarray:
    """``det H(r) (-r + |dr|_r^2)``."""
    return np.linalg.det(w.H).real * rd.denom


# ------------------------------------------------------------- the shift

def product_data(f: WirtingerData, g: WirtingerData) -> WirtingerData:
    """Wirtinger tensors of ``f g`` by the Leibniz rule."""
    K = min(f.order, g.order)
    letters = "abcdefgh"
    out = []
    for k in range(K + 1):
        idx = letters[:k]
        acc = 0
        for s in range(k + 1):
            for S in itertools.combinations(range(k), s):
                rest = [p for p in range(k) if p not in S]
                fi = "".join(idx[p] for p in S)
                gi = "".join(idx[p] for p in rest)
                acc = acc + np.einsum(f"...{fi},...{gi}->...{idx}", f.d[s], g.d[k - s])
        out.append(acc)
    return WirtingerData(f.n, tuple(out))


def psh_shift(w: WirtingerData, a: float) -> WirtingerData:
    """Data of ``r + (a/2) r^2``; the zero set and gradient on it are unchanged."""
    if a < 0:
        raise ValueError("shift parameter must be non-negative")
    if a == 0:
        return w
    sq = product_data(w, w)
    return WirtingerData(w.n, tuple(x + 0.5 * a * y for x, y in zip(w.d, sq.d)))


def _is_pd(H):
    Hs = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    return np.linalg.eigvalsh(Hs)[..., 0] > 0


def auto_shift(w: WirtingerData, a_max: float = MAX_SHIFT):
    """Smallest ``a`` in {0, 1, 2, 4, ...} with ``H(r[a])`` positive definite everywhere in ``w``."""
    a = 0.0
    while a <= a_max:
        shifted = psh_shift(w, a)
        if np.all(_is_pd(shifted.H)):
            return a, shifted
        a = 1.0 if a == 0 else 2 * a
    raise ValueError(f"no shift a <= {a_max:g} makes the complex Hessian positive definite")


def shift_identity_residual(w: WirtingerData, a: float) -> np.ndarray:
    """Relative residual of ``J(r) = (1+ar)^{-n} det H(r[a]) (-r + (1+2ar) q)``.

    ``q`` contracts the original ``dr`` with the inverse Hessian of ``r[a]``.
    """
    n, r = w.n, w.r
    Ha = psh_shift(w, a).H
    q = np.einsum("...i,...ij,...j->...", np.conj(w.r_i), np.linalg.inv(Ha), w.r_i).real
    rhs = (1 + a * r) ** (-n) * np.linalg.det(Ha).real * (-r + (1 + 2 * a * r) * q)
    J = J_bordered(w)
    return np.abs(rhs - J) / np.abs(J)


# ------------------------------------------------------ log-level identity

def log_hessian(w: WirtingerData) -> np.ndarray:
    """Complex Hessian of ``-log(-r)`` at interior points."""
    r = w.r[..., None, None]
    outer = np.einsum("...i,...j->...ij", w.r_i, np.conj(w.r_i))
    return w.H / (-r) + outer / r ** 2


def log_level_identity_check(w: WirtingerData, rd: RaisedData | None = None) -> np.ndarray:
    """Relative residual of ``det H(-log(-r)) = J(r) exp((n+1)(-log(-r)))``."""
    if np.any(w.r >= 0):
        raise ValueError("log-level identity needs interior points (r < 0)")
    if rd is None:
        rd = raise_indices(w)
    lhs = np.linalg.det(log_hessian(w)).real
    rhs = J_product(w, rd) / (-w.r) ** (w.n + 1)
    return np.abs(lhs - rhs) / np.abs(rhs)


def logJ_gradient(w: WirtingerData, rd: RaisedData) -> np.ndarray:
    """``d log J / dz_k`` in closed form from third-order data."""
    t1 = np.einsum("...ij,...ijk->...k", rd.a, w.r_ijbk)
    t2 = np.einsum("...i,...ik->...k", rd.up, w.r_ij) / rd.denom[..., None]
    return t1 + t2


# ----------------------------------------------------------- jet level

def _grad_jet(rjet: Jet) -> Jet:
    n = rjet.m // 2
    return jets.stack([rjet.dz(i) for i in range(n)], axis=-1)


def complex_hessian_jet(fjet: Jet) -> Jet:
    """Jet matrix ``[d^2 f / dz_i dzbar_j]`` of order K-2."""
    n = fjet.m // 2
    rows = []
    for i in range(n):
        di = fjet.dz(i)
        rows.append(jets.stack([di.dzbar(j) for j in range(n)], axis=-1))
    return jets.stack(rows, axis=-2)


def _bordered_jet(rjet: Jet) -> Jet:
    K = rjet.order - 2
    r = rjet.truncate(K) * (1 + 0j)
    g = _grad_jet(rjet).truncate(K)
    H = complex_hessian_jet(rjet)
    n = rjet.m // 2
    top = jets.stack([r] + [g[..., j].conj() for j in range(n)], axis=-1)
    rows = [top]
    for i in range(n):
        rows.append(jets.stack([g[..., i]] + [H[..., i, j] for j in range(n)], axis=-1))
    return jets.stack(rows, axis=-2)


def J_jet(rjet: Jet) -> Jet:
    """Jet of ``J(r)`` (order K-2) from a jet of ``r`` (order K >= 2)."""
    return -jets.det(_bordered_jet(rjet)).real


@dataclass(frozen=True)
class FeffermanJets:
    r: Jet
    J: Jet
    logJ: Jet
    a: Jet | None
    B0: Jet | None
    B: Jet | None
    rho0: Jet
    rho1: Jet | None


def _raised_a_jet(rjet: Jet) -> Jet:
    K = rjet.order - 2
    H = complex_hessian_jet(rjet)
    inv = jets.inv(H).swap(-2, -1)
    g = _grad_jet(rjet).truncate(K)
    gb = g.conj()
    up = (inv * gb.expand(-2)).sum(-1)
    grad_sq = (up * g).sum(-1).real
    denom = grad_sq - rjet.truncate(K)
    outer = up.expand(-1) * up.conj().expand(-2)
    return inv - outer * jets.reciprocal(denom).expand(-1).expand(-1)


def fefferman_jets(rjet: Jet) -> FeffermanJets:
    """Compose jets of J, log J, B_0, B, rho_0 and rho_1 from a jet of r."""
    n = rjet.m // 2
    J = J_jet(rjet)
    logJ = jets.jlog(J)
    r2 = rjet.truncate(J.order)
    rho0 = r2 * jets.jpow(J, -1.0 / (n + 1))
    if rjet.order < 4:
        return FeffermanJets(rjet, J, logJ, None, None, None, rho0, None)
    a = _raised_a_jet(rjet)
    L = complex_hessian_jet(logJ)
    lap = (a.truncate(L.order) * L).sum(-1).sum(-1).real
    B0 = lap * (1.0 / (2 * n * (n + 1)))
    B = -rjet.truncate(B0.order) * B0
    rho1 = rho0.truncate(B.order) * jets.jexp(-B)
    return FeffermanJets(rjet, J, logJ, a, B0, B, rho0, rho1)


@dataclass(frozen=True)
class LogJDerivatives:
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def logJ_derivatives(rjet: Jet, rd: RaisedData | None = None) -> LogJDerivatives:
    """log J with its gradient (closed form) and complex Hessian (jet level).

    Needs a jet of order >= 4.
    """
    if rjet.order < 4:
        raise ValueError("log J Hessian needs a jet of order >= 4")
    w = jets.wirtinger(rjet.truncate(4))
    if rd is None:
        rd = raise_indices(w)
    J = J_jet(rjet.truncate(4))
    if np.any(J.value <= 0):
        raise ValueError("J(r) <= 0: log J undefined (u = -log(-r) not plurisubharmonic here)")
    logJ = jets.jlog(J)
    return LogJDerivatives(logJ.value, logJ_gradient(w, rd), logJ.hessian_z())


def B_and_B0(rd: RaisedData, logJ_hessian) -> tuple[np.ndarray, np.ndarray]:
    """``B0 = tilde-Laplacian(log J) / (2n(n+1))`` and ``B = (-r) B0``."""
    n = rd.n
    B0 = tilde_laplacian(rd, logJ_hessian) / (2 * n * (n + 1))
    return -rd.r * B0, B0


def B_trace_form(w: WirtingerData, logJ_hessian) -> np.ndarray:
    """``tr(H(-log(-r))^{-1} H(log J)) / (2n(n+1))`` at interior points."""
    n = w.n
    Hl = log_hessian(w)
    t = np.einsum("...ji,...ij->...", np.linalg.inv(Hl), logJ_hessian).real
    return t / (2 * n * (n + 1))


def rho1(rjet: Jet) -> np.ndarray:
    """Value of ``r J^{-1/(n+1)} exp(-B)``; needs a jet of order >= 4."""
    fj = fefferman_jets(rjet)
    if np.any(fj.J.value <= 0):
        raise ValueError("J(r) <= 0: rho_1 undefined")
    return fj.rho1.value


# ----------------------------------------------------------- defect scan

@dataclass(frozen=True)
class DefectScan:
    depths: np.ndarray
    r: np.ndarray
    defect_rho1: np.ndarray
    defect_rho0: np.ndarray
    slope_rho1: float | None
    slope_rho0: float | None

    @property
    def exact(self) -> bool:
        return self.slope_rho1 is None


EXACT_DEFECT = 1e-13


def _slope(r, defect):
    if np.all(defect <= EXACT_DEFECT):
        return None
    ok = defect > EXACT_DEFECT
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(np.abs(r[ok])), np.log(defect[ok]), 1)[0])


def inward_normal(domain: DomainSpec, point) -> np.ndarray:
    g = jets.jet_eval(domain.ast, np.asarray(point, dtype=float), 1).c[..., 1:]
    return -g / np.linalg.norm(g, axis=-1, keepdims=True)


def defect_scan(domain: DomainSpec, boundary_point, depths, order: int = 6) -> DefectScan:
    """``|J(rho) - 1|`` for rho_1 and rho_0 along the inward normal.

    Points are ``boundary_point + t * inward_normal``.  The slopes are least
    squares fits of log defect against log|r|; ``None`` marks an exact
    (below 1e-13) defect.
    """
    if order < 6:
        raise ValueError("J(rho_1) needs jets of r of order >= 6")
    p = np.asarray(boundary_point, dtype=float)
    depths = np.asarray(depths, dtype=float)
    pts = p + depths[:, None] * inward_normal(domain, p)[None, :]
    rjet = jets.jet_eval(domain.ast, pts, order)
    if np.any(rjet.value >= 0):
        raise ValueError("scan left the domain; use smaller depths")
    fj = fefferman_jets(rjet)
    d1 = np.abs(J_jet(fj.rho1.truncate(2)).value - 1)
    d0 = np.abs(J_jet(fj.rho0.truncate(2)).value - 1)
    r = rjet.value
    return DefectScan(depths, r, d1, d0, _slope(r, d1), _slope(r, d0))


# ------------------------------------------------ affine biholomorphisms

def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


@dataclass(frozen=True)
class AffineMap:
    """``z -> A z + b`` on C^n."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=complex).reshape(A.shape[0]))
        if A.shape[0] != A.shape[1] or abs(np.linalg.det(A)) == 0:
            raise ValueError("affine map needs an invertible square matrix")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def jacobian(self) -> complex:
        return complex(np.linalg.det(self.A))

    def __call__(self, x) -> np.ndarray:
        """Apply to real interleaved points."""
        return to_real(to_complex(x) @ self.A.T + self.b)


def transport_rho(rho, phi: AffineMap):
    """Defining function of the preimage domain, ``rho(phi(z)) |det phi'|^{-2/(n+1)}``."""
    if not isinstance(phi, AffineMap):
        raise TypeError("only affine holomorphic maps are supported")
    k = abs(phi.jacobian) ** (-2.0 / (phi.n + 1))
    return lambda x: np.asarray(rho(phi(x))) * k


def transport_detH(detH_values, phi: AffineMap) -> np.ndarray:
    """``det H`` of the transported function: ``|det phi'|^{2/(n+1)}`` times the pulled-back values."""
    if not isinstance(phi, AffineMap):
        raise TypeError("only affine holomorphic maps are supported")
    return abs(phi.jacobian) ** (2.0 / (phi.n + 1)) * np.asarray(detH_values)
