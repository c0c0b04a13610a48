import numpy as np
from hypothesis import given, settings, strategies as st

from thinfilm.banded import periodic_dense, periodic_matvec, solve_periodic_pentadiagonal


def _diags(rng, B, M, dominance=6.0):
    a, b, d, e = (rng.normal(size=(B, M)) for _ in range(4))
    c = dominance + np.abs(rng.normal(size=(B, M)))
    return a, b, c, d, e


def _dense_from_stencil(diags, p):
    a, b, c, d, e = (q[p] for q in diags)
    M = c.size
    A = np.zeros((M, M))
    for i in range(M):
        for off, coef in zip((-2, -1, 0, 1, 2), (a, b, c, d, e)):
            A[i, (i + off) % M] += coef[i]
    return A


def test_dense_matrix_matches_stencil():
    rng = np.random.default_rng(0)
    diags = _diags(rng, 2, 9)
    for p in range(2):
        assert np.array_equal(periodic_dense(diags, p), _dense_from_stencil(diags, p))


def test_matvec_matches_dense():
    rng = np.random.default_rng(1)
    diags = _diags(rng, 3, 12)
    x = rng.normal(size=(3, 12))
    for p in range(3):
        assert np.allclose(periodic_matvec(diags, x)[p], _dense_from_stencil(diags, p) @ x[p], atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(8, 40), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_cyclic_solve_matches_dense(M, B, seed):
    rng = np.random.default_rng(seed)
    diags = _diags(rng, B, M)
    rhs = rng.normal(size=(B, M))
    x = solve_periodic_pentadiagonal(diags, rhs)
    for p in range(B):
        ref = np.linalg.solve(_dense_from_stencil(diags, p), rhs[p])
        assert np.max(np.abs(x[p] - ref)) < 1e-11 * (1 + np.max(np.abs(ref)))
