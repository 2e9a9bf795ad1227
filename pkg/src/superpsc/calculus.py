"""Raised-index quantities of a defining function and the operators built on them.

Index conventions (all arrays may carry leading batch axes):

* ``H[i, j] = r_{i jbar}`` is the complex Hessian.
* ``inv[i, j] = r^{i jbar}`` satisfies ``sum_j r^{i jbar} r_{k jbar} = delta_ik``,
  i.e. ``inv = (H^{-1})^T``.
* ``up[i] = r^i = sum_j r^{i jbar} r_jbar`` and ``upbar = conj(up)``.
* ``a[i, j] = r^{i jbar} - r^i r^jbar / (-r + |dr|_r^2)``; this is the degenerate
  inverse whose contraction defines the tilde-Laplacian.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import WirtingerData

__all__ = [
    "SingularHessianError", "UnusableDefiningFunctionError", "RaisedData",
    "raise_indices", "tilde_laplacian", "R_op", "tilde_grad_norm_sq",
]

BOUNDARY_TOL = 1e-10


class SingularHessianError(np.linalg.LinAlgError):
    pass


class UnusableDefiningFunctionError(ValueError):
    """``-r + |dr|_r^2 <= 0``: the point cannot be handled with this r."""


@dataclass(frozen=True)
class RaisedData:
    n: int
    r: np.ndarray
    r_i: np.ndarray
    H: np.ndarray
    inv: np.ndarray
    up: np.ndarray
    grad_sq: np.ndarray
    denom: np.ndarray
    a: np.ndarray
    detH: np.ndarray
    cond: np.ndarray
    positive: np.ndarray  # H positive definite

    @property
    def r_ib(self) -> np.ndarray:
        return np.conj(self.r_i)

    @property
    def upbar(self) -> np.ndarray:
        return np.conj(self.up)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.cond) & (self.denom > 0)

    def __getitem__(self, idx) -> RaisedData:
        if not isinstance(idx, tuple):
            idx = (idx,)
        return RaisedData(self.n, *(getattr(self, f)[idx] for f in (
            "r", "r_i", "H", "inv", "up", "grad_sq", "denom", "a", "detH", "cond", "positive")))


def _hermitian_inverse(H):
    """Inverse via Cholesky where H is positive definite, LU elsewhere."""
    Hs = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
    eig = np.linalg.eigvalsh(Hs)
    positive = eig[..., 0] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.abs(eig).max(axis=-1) / np.abs(eig).min(axis=-1)
    cond = np.where(np.isfinite(cond) & (cond < 1e15), cond, np.inf)
    Hinv = np.full(H.shape, np.nan, dtype=complex)
    pd = positive & np.isfinite(cond)
    if np.any(pd):
        L = np.linalg.cholesky(Hs[pd])
        Linv = np.linalg.inv(L)
        Hinv[pd] = np.conj(np.swapaxes(Linv, -1, -2)) @ Linv
    other = ~positive & np.isfinite(cond)
    if np.any(other):
        Hinv[other] = np.linalg.inv(Hs[other])
    return Hinv, cond, positive, np.prod(eig, axis=-1)


def raise_indices(w: WirtingerData, check: bool = True) -> RaisedData:
    """Raise indices with the complex Hessian of ``r``.

    With ``check`` set, a singular Hessian or a non-positive ``-r + |dr|_r^2`` at
    any point raises; otherwise those points carry NaNs / flags and callers
    consult ``RaisedData.valid``.
    """
    H = w.H
    Hinv, cond, positive, detH = _hermitian_inverse(H)
    if check and not np.all(np.isfinite(cond)):
        raise SingularHessianError("complex Hessian of r is singular")
    inv = np.swapaxes(Hinv, -1, -2)
    r_i = w.r_i
    up = np.einsum("...ij,...j->...i", inv, np.conj(r_i))
    grad_sq = np.einsum("...i,...i->...", up, r_i).real
    denom = -w.r + grad_sq
    if check and np.any(denom <= 0):
        raise UnusableDefiningFunctionError("-r + |dr|_r^2 <= 0; r is not usable here")
    with np.errstate(divide="ignore", invalid="ignore"):
        a = inv - np.einsum("...i,...j->...ij", up, np.conj(up)) / denom[..., None, None]
    return RaisedData(w.n, w.r, r_i, H, inv, up, grad_sq, denom, a, detH, cond, positive)


def tilde_laplacian(rd: RaisedData, f_hessian) -> np.ndarray:
    """``sum a^{i jbar} f_{i jbar}`` with ``f_hessian[..., i, j] = f_{i jbar}``."""
    return np.einsum("...ij,...ij->...", rd.a, f_hessian).real


def R_op(rd: RaisedData, f_gradient) -> np.ndarray:
    """``sum_j r^j df/dz_j``."""
    return np.einsum("...j,...j->...", rd.up, f_gradient)


def tilde_grad_norm_sq(rd: RaisedData, f_gradient) -> np.ndarray:
    """``sum a^{i jbar} f_i conj(f_j)`` for a real function with ``f_gradient = (f_i)``."""
    f = np.asarray(f_gradient)
    return np.einsum("...ij,...i,...j->...", rd.a, f, np.conj(f)).real
