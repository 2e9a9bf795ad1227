import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superpsc import jets
from superpsc.expr import builtin, parse

MONOMIALS = ["x1", "y1", "x2", "y2"]


@st.composite
def polynomials(draw):
    terms = []
    for _ in range(draw(st.integers(1, 6))):
        c = draw(st.floats(-2, 2, allow_nan=False).filter(lambda v: abs(v) > 1e-3))
        powers = [draw(st.integers(0, 2)) for _ in MONOMIALS]
        if sum(powers) > 4:
            powers = [min(p, 1) for p in powers]
        factors = [f"{v}^{p}" for v, p in zip(MONOMIALS, powers) if p]
        terms.append(f"({c!r})" + "".join("*" + f for f in factors))
    return " + ".join(terms)


POINT = np.array([0.3, -0.2, 0.1, 0.4])
MULTI = [(2, 0, 0, 0), (1, 1, 0, 0), (0, 1, 1, 0), (1, 0, 1, 1), (2, 0, 0, 2), (1, 1, 1, 1), (0, 0, 0, 3)]


@settings(max_examples=200, deadline=None)
@given(polynomials())
def test_jets_match_finite_differences(src):
    ast = parse(src, 2)
    jet = jets.jet_eval(ast, POINT, 4)
    for alpha in MULTI:
        want = jets.fd_oracle(ast, POINT, alpha, h=0.05)
        assert derivative(jet, alpha) == pytest.approx(want, abs=1e-7 * (1 + abs(want)))


def derivative(jet, alpha):
    return jet.c[..., jet.basis.index[tuple(alpha)]] * np.prod([math.factorial(a) for a in alpha])


@pytest.mark.parametrize("name", ["ellipsoid", "example51", "example52", "disc_perturbed"])
def test_wirtinger_tensors_are_hermitian(name):
    d = builtin(name)
    p = d.interior_point + 0.05
    w = jets.wirtinger(jets.jet_eval(d.ast, p, 4))
    n = d.n
    np.testing.assert_allclose(w.H, w.H.conj().T, atol=1e-12)
    # swapping holomorphic and antiholomorphic slots conjugates a real function's derivatives
    perm = np.r_[n:2 * n, 0:n]
    for k in range(1, 5):
        t = w.d[k]
        flipped = t[np.ix_(*[perm] * k)]
        np.testing.assert_allclose(flipped, t.conj(), atol=1e-10)
        for axes in [(0, 1)] if k > 1 else []:
            np.testing.assert_allclose(t, np.swapaxes(t, *axes), atol=1e-10)


def test_wirtinger_against_fd():
    d = builtin("example52")
    p = np.array([0.1, 0.2, -0.3, 0.1])
    w = jets.wirtinger(jets.jet_eval(d.ast, p, 4))
    assert w.r_ijbk[0, 1, 1] == pytest.approx(jets.fd_wirtinger(d.ast, p, [0, 1], [1]), abs=1e-7)
    assert w.r_ijbklb[0, 0, 0, 0] == pytest.approx(jets.fd_wirtinger(d.ast, p, [0, 0], [0, 0]), abs=1e-6)
    assert w.r_ij[1, 1] == pytest.approx(jets.fd_wirtinger(d.ast, p, [1, 1], []), abs=1e-8)


def test_arithmetic_and_functions_against_scalar_calculus():
    x = jets.variables(np.array([0.7]), 4)[0]
    e = np.exp(0.7)
    cases = [
        (jets.jexp(x), [e, e, e / 2, e / 6, e / 24]),
        (jets.jlog(x), [math.log(0.7), 1 / 0.7, -1 / (2 * 0.49), 1 / (3 * 0.343), -1 / (4 * 0.2401)]),
        (jets.reciprocal(x), [1 / 0.7 ** (k + 1) * (-1) ** k for k in range(5)]),
        (jets.jpow(x, 0.5), [math.sqrt(0.7) * math.comb(1, 0)] + [None] * 4),
    ]
    for jet, coeffs in cases:
        for k, c in enumerate(coeffs):
            if c is not None:
                assert jet.c[k] == pytest.approx(c, rel=1e-12)
    q = (x * x + 1) / (x - 3)
    assert q.value == pytest.approx((0.49 + 1) / (0.7 - 3))


def test_matrix_inverse_and_det():
    rng = np.random.default_rng(1)
    xs = jets.variables(np.array([0.1, -0.2]), 3)
    A0 = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    A1, A2 = rng.normal(size=(2, 3, 3))
    A = jets.stack([jets.stack([xs[0] * A1[i, j] + xs[1] * xs[1] * A2[i, j] + A0[i, j]
                                for j in range(3)], axis=-1) for i in range(3)], axis=-2)
    Ainv = jets.inv(A)
    prod = jets.matmul(A, Ainv)
    np.testing.assert_allclose(prod.c[..., 0], np.eye(3), atol=1e-12)
    np.testing.assert_allclose(prod.c[..., 1:], 0, atol=1e-11)
    D = jets.det(A)
    f = lambda p: np.linalg.det(A0 + p[:, 0, None, None] * A1 + (p[:, 1] ** 2)[:, None, None] * A2)
    assert D.value == pytest.approx(f(np.array([[0.1, -0.2]]))[0], rel=1e-12)
    assert D.d(0).value == pytest.approx(jets.fd_oracle(f, [0.1, -0.2], (1, 0)), rel=1e-8)


def test_bump_jet_matches_fd():
    ast = parse("bump(abs2(z1), 0.5)", 1)
    p = np.array([0.3, 0.2])
    j = jets.jet_eval(ast, p, 4)
    for alpha in [(1, 0), (2, 0), (1, 1), (2, 2), (0, 4)]:
        want = jets.fd_oracle(ast, p, alpha, h=5e-3)
        assert derivative(j, alpha) == pytest.approx(want, rel=1e-5, abs=1e-8)


def test_jet_eval_rejects_large_dimension():
    ast = parse(" + ".join(f"abs2(z{j})" for j in range(1, 10)), 9)
    with pytest.raises(ValueError):
        jets.jet_eval(ast, np.zeros(18))


def test_batched_equals_pointwise():
    d = builtin("example51")
    pts = np.random.default_rng(2).normal(size=(6, 4)) * 0.1
    batch = jets.jet_eval(d.ast, pts, 4)
    for k in range(6):
        np.testing.assert_allclose(batch.c[k], jets.jet_eval(d.ast, pts[k], 4).c, rtol=1e-13, atol=1e-15)
