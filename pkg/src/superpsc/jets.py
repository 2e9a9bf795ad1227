"""Truncated Taylor jets over R^m and their Wirtinger derivatives.

A :class:`Jet` of order ``K`` stores, for every monomial ``h^alpha`` with
``|alpha| <= K``, the coefficient ``D^alpha f(p) / alpha!``.  Coefficients live
on the last axis; any leading axes are batch (points) or matrix axes and
broadcast like numpy arrays.  Arithmetic is exact truncated-polynomial algebra,
so jets of polynomials are exact up to roundoff.

Real coordinates are interleaved ``(x1, y1, ..., xn, yn)``; Wirtinger tensors
index ``2n`` complex directions, ``0..n-1`` for ``d/dz_j`` and ``n..2n-1`` for
``d/dzbar_j``.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .expr import ExprAst, EvaluationError, fold, to_source

__all__ = [
    "MonomialBasis", "basis", "Jet", "jet_eval", "variables", "compose",
    "reciprocal", "jlog", "jexp", "jpow", "bump_jet", "matmul", "const_matmul",
    "inv", "det", "trace", "stack", "WirtingerData", "wirtinger",
    "wirtinger_matrix", "fd_oracle", "fd_wirtinger", "MAX_COMPLEX_DIM",
]

MAX_COMPLEX_DIM = 8


class MonomialBasis:
    """Monomials of degree <= ``order`` in ``m`` variables, graded lex order.

    The order-``K'`` basis is a prefix of the order-``K`` one for ``K' < K``,
    which makes truncation a slice.
    """

    def __init__(self, m: int, order: int):
        self.m = m
        self.order = order
        exps = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(m), d):
                e = [0] * m
                for v in combo:
                    e[v] += 1
                exps.append(tuple(e))
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), m)
        self.index = {e: k for k, e in enumerate(exps)}
        self.degree = self.exponents.sum(axis=1)
        self.size = len(exps)
        self.sizes = [int(np.sum(self.degree <= d)) for d in range(order + 1)]

    @functools.cached_property
    def product_table(self):
        rows = []
        exps = [tuple(e) for e in self.exponents]
        for i, ei in enumerate(exps):
            di = self.degree[i]
            for j in range(self.sizes[self.order - di]):
                k = self.index[tuple(a + b for a, b in zip(ei, exps[j]))]
                rows.append((k, i, j))
        rows.sort()
        t = np.array(rows, dtype=np.int64)
        starts = np.flatnonzero(np.r_[True, t[1:, 0] != t[:-1, 0]])
        return t[:, 1], t[:, 2], starts

    @functools.lru_cache(maxsize=None)
    def derivative_table(self, var: int):
        """Gather indices/factors taking this basis to the order-1 lower one."""
        lower = basis(self.m, self.order - 1)
        src = np.empty(lower.size, dtype=np.int64)
        fac = np.empty(lower.size)
        for k, e in enumerate(lower.exponents):
            e = list(e)
            e[var] += 1
            src[k] = self.index[tuple(e)]
            fac[k] = e[var]
        return src, fac

    @functools.lru_cache(maxsize=None)
    def tensor_table(self, k: int):
        """Gather indices/factors for the full order-k derivative tensor."""
        shape = (self.m,) * k
        idx = np.empty(shape, dtype=np.int64)
        fac = np.empty(shape)
        for tup in itertools.product(range(self.m), repeat=k):
            e = [0] * self.m
            for v in tup:
                e[v] += 1
            idx[tup] = self.index[tuple(e)]
            fac[tup] = math.prod(math.factorial(a) for a in e)
        return idx, fac


@functools.lru_cache(maxsize=None)
def basis(m: int, order: int) -> MonomialBasis:
    return MonomialBasis(m, order)


def _coeffs(x, order_shape):
    """Lift a plain array of values to constant-jet coefficients."""
    x = np.asarray(x)
    c = np.zeros(x.shape + (order_shape,), dtype=np.result_type(x, float))
    c[..., 0] = x
    return c


class Jet:
    """Truncated Taylor polynomial in ``m`` real variables (batched)."""

    __array_priority__ = 1000

    def __init__(self, coeffs, m: int, order: int):
        self.c = np.asarray(coeffs)
        self.m = m
        self.order = order
        if self.c.shape[-1] != basis(m, order).size:
            raise ValueError("coefficient axis does not match the monomial basis")

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, value, m: int, order: int) -> Jet:
        return cls(_coeffs(value, basis(m, order).size), m, order)

    @property
    def basis(self) -> MonomialBasis:
        return basis(self.m, self.order)

    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __repr__(self):
        return f"Jet(m={self.m}, order={self.order}, shape={self.shape})"

    # structure ------------------------------------------------------------
    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        if order == self.order:
            return self
        return Jet(self.c[..., : basis(self.m, order).size], self.m, order)

    def __getitem__(self, idx) -> Jet:
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[idx + (slice(None),)], self.m, self.order)

    def conj(self) -> Jet:
        return Jet(np.conj(self.c), self.m, self.order)

    @property
    def real(self) -> Jet:
        return Jet(self.c.real, self.m, self.order)

    def nilpotent(self) -> Jet:
        c = self.c.copy()
        c[..., 0] = 0
        return Jet(c, self.m, self.order)

    def sum(self, axis: int) -> Jet:
        """Sum over a leading axis."""
        nd = self.c.ndim - 1
        return Jet(self.c.sum(axis=axis % nd), self.m, self.order)

    def expand(self, axis: int) -> Jet:
        """Insert a length-1 leading axis (negative axes count from the coefficients)."""
        nd = self.c.ndim - 1
        ax = axis if axis >= 0 else nd + 1 + axis
        return Jet(np.expand_dims(self.c, ax), self.m, self.order)

    def swap(self, a: int, b: int) -> Jet:
        """Swap two leading axes."""
        nd = self.c.ndim - 1
        return Jet(np.swapaxes(self.c, a % nd, b % nd), self.m, self.order)

    # arithmetic -----------------------------------------------------------
    def _align(self, other):
        if isinstance(other, Jet):
            if other.m != self.m:
                raise ValueError("jets over different variable counts")
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, other

    def __add__(self, other):
        a, b = self._align(other)
        if isinstance(b, Jet):
            return Jet(a.c + b.c, a.m, a.order)
        c = np.array(a.c, dtype=np.result_type(a.c, np.asarray(b)), copy=True)
        c = np.broadcast_to(c, np.broadcast_shapes(c.shape[:-1], np.shape(b)) + c.shape[-1:]).copy()
        c[..., 0] += b
        return Jet(c, a.m, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.m, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._align(other)
        if not isinstance(b, Jet):
            return Jet(a.c * np.asarray(b)[..., None], a.m, a.order)
        i, j, starts = a.basis.product_table
        prod = a.c[..., i] * b.c[..., j]
        return Jet(np.add.reduceat(prod, starts, axis=-1), a.m, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.c / np.asarray(other)[..., None], self.m, self.order)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            return jpow(self, k)
        out = Jet.constant(np.ones(self.shape), self.m, self.order)
        for _ in range(k):
            out = out * self
        return out

    # calculus -------------------------------------------------------------
    def d(self, var: int) -> Jet:
        """Partial derivative in real variable ``var``; the order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.basis.derivative_table(var)
        return Jet(self.c[..., src] * fac, self.m, self.order - 1)

    def dz(self, j: int) -> Jet:
        return 0.5 * (self.d(2 * j) - 1j * self.d(2 * j + 1))

    def dzbar(self, j: int) -> Jet:
        return 0.5 * (self.d(2 * j) + 1j * self.d(2 * j + 1))

    def derivative_tensor(self, k: int) -> np.ndarray:
        """Full symmetric tensor of order-k real partial derivatives."""
        idx, fac = self.basis.tensor_table(k)
        return self.c[..., idx] * fac

    def wirtinger_tensor(self, k: int) -> np.ndarray:
        """Order-k Wirtinger derivative tensor over the 2n complex directions."""
        T = self.derivative_tensor(k)
        P = wirtinger_matrix(self.m // 2)
        lead = T.ndim - k
        for ax in range(lead, lead + k):
            T = np.moveaxis(np.tensordot(T, P, axes=([ax], [1])), -1, ax)
        return T

    def gradient_z(self) -> np.ndarray:
        """Holomorphic gradient ``(df/dz_1, ..., df/dz_n)`` at the base point."""
        n = self.m // 2
        return self.wirtinger_tensor(1)[..., :n]

    def hessian_z(self) -> np.ndarray:
        """Complex Hessian ``H[i, j] = d^2 f / dz_i dzbar_j`` at the base point."""
        n = self.m // 2
        return self.wirtinger_tensor(2)[..., :n, n:]


@functools.lru_cache(maxsize=None)
def wirtinger_matrix(n: int) -> np.ndarray:
    """Rows express d/dz_j and d/dzbar_j in terms of d/dx, d/dy."""
    P = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        P[j, 2 * j], P[j, 2 * j + 1] = 0.5, -0.5j
        P[n + j, 2 * j], P[n + j, 2 * j + 1] = 0.5, 0.5j
    return P


def variables(point, order: int) -> list[Jet]:
    """Coordinate jets ``x_k`` at ``point`` (shape ``(..., m)``)."""
    point = np.asarray(point, dtype=float)
    m = point.shape[-1]
    size = basis(m, order).size
    out = []
    for k in range(m):
        c = np.zeros(point.shape[:-1] + (size,))
        c[..., 0] = point[..., k]
        if order >= 1:
            c[..., 1 + k] = 1.0
        out.append(Jet(c, m, order))
    return out


def stack(jets, axis: int = 0) -> Jet:
    jets = list(jets)
    k = min(j.order for j in jets)
    jets = [j.truncate(k) for j in jets]
    nd = jets[0].c.ndim
    ax = axis if axis >= 0 else axis + nd
    return Jet(np.stack([j.c for j in jets], axis=ax), jets[0].m, k)


# -------------------------------------------------- univariate composition

def compose(x: Jet, coeffs) -> Jet:
    """Evaluate ``sum_k coeffs[..., k] h^k`` with ``h = x - x(p)``.

    ``coeffs[..., k]`` must be the k-th Taylor coefficient of the outer
    function at the value of ``x``; missing orders are treated as zero.
    """
    coeffs = np.asarray(coeffs)
    h = x.nilpotent()
    K = min(x.order, coeffs.shape[-1] - 1)
    out = Jet.constant(coeffs[..., K], x.m, x.order)
    for k in range(K - 1, -1, -1):
        out = out * h + coeffs[..., k]
    return out


def _ks(order):
    return np.arange(order + 1)


def reciprocal(x: Jet) -> Jet:
    x0 = x.value
    if np.any(x0 == 0):
        raise ZeroDivisionError("reciprocal of a jet with zero value")
    k = _ks(x.order)
    coeffs = (-1.0) ** k / x0[..., None] ** (k + 1)
    return compose(x, coeffs)


def jlog(x: Jet) -> Jet:
    x0 = x.value
    k = _ks(x.order)[1:]
    rest = (-1.0) ** (k + 1) / (k * x0[..., None] ** k)
    return compose(x, np.concatenate([np.log(x0)[..., None], rest], axis=-1))


def jexp(x: Jet) -> Jet:
    e = np.exp(x.value)[..., None]
    fact = np.array([math.factorial(k) for k in range(x.order + 1)], dtype=float)
    return compose(x, e / fact)


def jpow(x: Jet, p: float) -> Jet:
    """``x**p`` for real ``p`` (principal branch)."""
    x0 = x.value
    coeffs = [np.ones_like(x0)]
    for k in range(1, x.order + 1):
        coeffs.append(coeffs[-1] * (p - k + 1) / k)
    base = np.stack([x0 ** (p - k) for k in range(x.order + 1)], axis=-1)
    return compose(x, np.stack(coeffs, axis=-1) * base)


def _series_exp(w, order):
    """Taylor coefficients of exp(W(h)) for W with W(0) = 0."""
    E = [np.ones_like(w[..., 0])]
    for k in range(1, order + 1):
        acc = sum(j * w[..., j] * E[k - j] for j in range(1, k + 1))
        E.append(acc / k)
    return np.stack(E, axis=-1)


def bump_coefficients(t0, delta: float, order: int) -> np.ndarray:
    """Taylor coefficients of ``exp(-delta/(delta - t))`` at ``t0`` (zero for t0 >= delta)."""
    t0 = np.asarray(t0, dtype=float)
    inside = t0 < delta
    s = np.where(inside, delta - t0, 1.0)
    k = _ks(order)
    w = -delta / s[..., None] ** (k + 1)  # Taylor coefficients of -delta/(s - h)
    with np.errstate(under="ignore"):
        scale = np.where(inside, np.exp(w[..., 0]), 0.0)
    w = np.where(scale[..., None] > 0, w, 0.0)
    w[..., 0] = 0.0
    E = _series_exp(w, order)
    return scale[..., None] * E


def bump_jet(t: Jet, delta: float) -> Jet:
    return compose(t, bump_coefficients(t.value, delta, t.order))


# ------------------------------------------------------ matrices of jets

def const_matmul(M, A: Jet) -> Jet:
    """Constant matrix (…, n, k) times jet matrix (…, k, p)."""
    return Jet(np.einsum("...il,...ljp->...ijp", M, A.c), A.m, A.order)


def matmul_const(A: Jet, M) -> Jet:
    return Jet(np.einsum("...ilp,...lj->...ijp", A.c, M), A.m, A.order)


def matmul(A: Jet, B: Jet) -> Jet:
    A, B = A._align(B)
    i, j, starts = A.basis.product_table
    prod = np.einsum("...ilp,...ljp->...ijp", A.c[..., i], B.c[..., j])
    return Jet(np.add.reduceat(prod, starts, axis=-1), A.m, A.order)


def trace(A: Jet) -> Jet:
    return Jet(np.trace(A.c, axis1=-3, axis2=-2), A.m, A.order)


def inv(A: Jet) -> Jet:
    """Inverse of a square jet matrix by the nilpotent Neumann series."""
    A0 = A.value
    A0inv = np.linalg.inv(A0)
    X = -const_matmul(A0inv, A.nilpotent())
    n = A0.shape[-1]
    eye = np.broadcast_to(np.eye(n), A0.shape)
    S = Jet.constant(eye.astype(np.result_type(A.c, float)), A.m, A.order)
    term = S
    for _ in range(A.order):
        term = matmul(term, X)
        S = S + term
    return matmul_const(S, A0inv)


def det(A: Jet) -> Jet:
    """Determinant of a square jet matrix, ``det(A0) exp(tr log(I + A0^-1 N))``."""
    A0 = A.value
    Y = const_matmul(np.linalg.inv(A0), A.nilpotent())
    logdet = Jet.constant(np.zeros(A0.shape[:-2], dtype=Y.c.dtype), A.m, A.order)
    term = None
    for k in range(1, A.order + 1):
        term = Y if term is None else matmul(term, Y)
        logdet = logdet + trace(term) * ((-1.0) ** (k + 1) / k)
    return jexp(logdet) * np.linalg.det(A0)


# ----------------------------------------------------------- AST to jets

def jet_eval(ast: ExprAst, point, order: int = 4) -> Jet:
    """Order-``order`` Taylor jet of ``ast`` at ``point`` (shape ``(..., 2n)``)."""
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != ast.dim:
        raise ValueError(f"point has {point.shape[-1]} coordinates, expected {ast.dim}")
    if ast.n > MAX_COMPLEX_DIM:
        raise ValueError(f"jets support n <= {MAX_COMPLEX_DIM}, got n = {ast.n}")
    xs = variables(point, order)
    m = ast.dim

    def check(den, node):
        v = den.value if isinstance(den, Jet) else np.asarray(den)
        if np.any(v == 0):
            raise EvaluationError(f"division by zero in '{to_source(node)}'")

    out = fold(
        ast.root,
        var=lambda k: xs[k],
        const=lambda v: Jet.constant(np.full(point.shape[:-1], v), m, order),
        bump=bump_jet,
        on_divide=check,
    )
    return out


# ---------------------------------------------------------- Wirtinger data

@dataclass(frozen=True)
class WirtingerData:
    """Wirtinger derivatives of a real function up to some order.

    ``d[k]`` is the order-k tensor over the 2n complex directions (holomorphic
    indices first).  Named accessors slice it: ``r_ijbk[i, j, k]`` is
    ``d^3 r / dz_i dzbar_j dz_k`` and so on.
    """

    n: int
    d: tuple

    @property
    def order(self) -> int:
        return len(self.d) - 1

    @property
    def r(self) -> np.ndarray:
        return self.d[0].real

    @property
    def r_i(self) -> np.ndarray:
        return self.d[1][..., : self.n]

    @property
    def r_ib(self) -> np.ndarray:
        return self.d[1][..., self.n:]

    @property
    def H(self) -> np.ndarray:
        """Complex Hessian, ``H[..., i, j] = r_{i jbar}``."""
        return self.d[2][..., : self.n, self.n:]

    @property
    def r_ij(self) -> np.ndarray:
        return self.d[2][..., : self.n, : self.n]

    @property
    def r_ibjb(self) -> np.ndarray:
        return self.d[2][..., self.n:, self.n:]

    @property
    def r_ijbk(self) -> np.ndarray:
        n = self.n
        return self.d[3][..., :n, n:, :n]

    @property
    def r_ijbkb(self) -> np.ndarray:
        n = self.n
        return self.d[3][..., :n, n:, n:]

    @property
    def r_ijbklb(self) -> np.ndarray:
        n = self.n
        return self.d[4][..., :n, n:, :n, n:]

    def __getitem__(self, idx) -> WirtingerData:
        """Select points from a batched instance."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        return WirtingerData(self.n, tuple(t[idx] for t in self.d))


def wirtinger(jet: Jet) -> WirtingerData:
    """Convert a real-variable jet to Wirtinger derivative tensors."""
    if jet.m % 2:
        raise ValueError("Wirtinger conversion needs an even number of real variables")
    d = tuple(jet.wirtinger_tensor(k) for k in range(jet.order + 1))
    return WirtingerData(jet.m // 2, d)


# ---------------------------------------------------- finite differences

_STENCILS = {
    0: ([0], [1.0]),
    1: ([-1, 1], [-0.5, 0.5]),
    2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
    3: ([-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5]),
    4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
}


def _fd_once(f, point, alpha, h):
    offsets, weights = [], []
    axes = []
    for v, k in enumerate(alpha):
        if k:
            axes.append((v, *_STENCILS[k]))
    pts, ws = [], []
    for combo in itertools.product(*[list(zip(o, w)) for _, o, w in axes]):
        p = np.array(point, dtype=float)
        wt = 1.0
        for (v, _, _), (o, w) in zip(axes, combo):
            p[v] += o * h
            wt *= w
        pts.append(p)
        ws.append(wt)
    vals = np.asarray(f(np.array(pts)), dtype=float)
    return float(np.dot(ws, vals)) / h ** sum(alpha)


def fd_oracle(f, point, alpha, h: float = 1e-2) -> float:
    """Central finite-difference estimate of ``D^alpha f(point)``.

    ``f`` is an :class:`ExprAst` or a vectorised callable on ``(k, m)`` arrays;
    ``alpha`` is a multi-index (one entry per real variable, total order <= 4).
    Each axis uses the second-order central stencil for its derivative order,
    and one Richardson step (h, h/2) removes the h^2 term, leaving an O(h^4)
    truncation error plus roundoff of order eps*|f|/h^|alpha|.
    """
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) > 4:
        raise ValueError("finite-difference oracle supports total order <= 4")
    if sum(alpha) == 0:
        return float(np.asarray(f(np.asarray(point, dtype=float)[None]))[0])
    fun = f if callable(f) and not isinstance(f, ExprAst) else (lambda p, a=f: a(p))
    coarse = _fd_once(fun, point, alpha, h)
    fine = _fd_once(fun, point, alpha, h / 2)
    return (4 * fine - coarse) / 3


def fd_wirtinger(f, point, holo, anti, h: float = 1e-2) -> complex:
    """Mixed Wirtinger derivative by expanding it into real FD derivatives.

    ``holo`` and ``anti`` list the (0-based) complex indices differentiated in
    ``z`` and ``zbar`` respectively.
    """
    m = len(point)
    terms = {(0,) * m: 1.0 + 0j}
    for j, sign in [(j, -1) for j in holo] + [(j, 1) for j in anti]:
        new = {}
        for e, c in terms.items():
            for var, w in ((2 * j, 0.5), (2 * j + 1, 0.5j * sign)):
                e2 = list(e)
                e2[var] += 1
                new[tuple(e2)] = new.get(tuple(e2), 0) + c * w
        terms = new
    return sum(c * fd_oracle(f, point, e, h) for e, c in terms.items() if c != 0)
