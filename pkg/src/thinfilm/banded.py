"""Cyclic pentadiagonal linear solves, batched over a stack of systems.

A periodic five-point operator is stored as five coefficient arrays
``(a, b, c, d, e)``, each of shape ``(B, M)``, so that row ``i`` of system
``p`` reads::

    a[p,i] x[i-2] + b[p,i] x[i-1] + c[p,i] x[i] + d[p,i] x[i+1] + e[p,i] x[i+2]

with indices taken modulo ``M``.  The non-periodic band of every system is
packed into one block-diagonal banded matrix and factorised by a single
LAPACK call; the six wrap-around corner entries are folded back in with a
rank-4 Woodbury correction per system.  Systems never interact, so the
solution for one system does not depend on which others share the batch.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .errors import SingularSystem

DENSE_FALLBACK_MAX_M = 512


def periodic_matvec(diags, x: np.ndarray) -> np.ndarray:
    """Apply the periodic operator to ``x`` of shape ``(B, M)``."""
    a, b, c, d, e = diags
    return (a * np.roll(x, 2, axis=-1) + b * np.roll(x, 1, axis=-1) + c * x
            + d * np.roll(x, -1, axis=-1) + e * np.roll(x, -2, axis=-1))


def periodic_dense(diags, p: int = 0) -> np.ndarray:
    """Dense ``(M, M)`` matrix of system ``p``; for checks and small-M fallback."""
    a, b, c, d, e = (np.asarray(q)[p] for q in diags)
    M = c.shape[-1]
    A = np.zeros((M, M))
    rows = np.arange(M)
    for offset, coef in zip((-2, -1, 0, 1, 2), (a, b, c, d, e)):
        np.add.at(A, (rows, (rows + offset) % M), coef)
    return A


def _corner_products(diags, Z: np.ndarray) -> np.ndarray:
    """``C @ Z`` where ``C`` (4 x M) holds the wrap-around entries."""
    a, b, _, d, e = diags
    M = a.shape[-1]
    out = np.empty(Z.shape[:1] + (4,) + Z.shape[2:])
    lead = (slice(None),) + (None,) * (Z.ndim - 2)
    out[:, 0] = a[:, 0][lead] * Z[:, M - 2] + b[:, 0][lead] * Z[:, M - 1]
    out[:, 1] = a[:, 1][lead] * Z[:, M - 1]
    out[:, 2] = e[:, M - 2][lead] * Z[:, 0]
    out[:, 3] = d[:, M - 1][lead] * Z[:, 0] + e[:, M - 1][lead] * Z[:, 1]
    return out


def solve_periodic_pentadiagonal(diags, rhs: np.ndarray) -> np.ndarray:
    """Solve the batch of cyclic pentadiagonal systems ``A_p x_p = rhs_p``.

    Parameters
    ----------
    diags : sequence of five arrays, each ``(B, M)``
        Coefficients of ``x[i-2] .. x[i+2]`` in row ``i``.
    rhs : ndarray, shape ``(B, M)``

    Raises
    ------
    SingularSystem
        If the banded factorisation or a Woodbury capacitance matrix is
        singular or produces non-finite values.
    """
    a, b, c, d, e = (np.asarray(q, dtype=float) for q in diags)
    rhs = np.asarray(rhs, dtype=float)
    B, M = rhs.shape

    ab = np.zeros((5, B, M))
    ab[0, :, 2:] = e[:, :-2]
    ab[1, :, 1:] = d[:, :-1]
    ab[2] = c
    ab[3, :, :-1] = b[:, 1:]
    ab[4, :, :-2] = a[:, 2:]

    stacked = np.zeros((B, M, 5))
    stacked[:, :, 0] = rhs
    for col, row in enumerate((0, 1, M - 2, M - 1), start=1):
        stacked[:, row, col] = 1.0
    try:
        sol = solve_banded((2, 2), ab.reshape(5, B * M), stacked.reshape(B * M, 5),
                           check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    sol = sol.reshape(B, M, 5)
    y = sol[:, :, 0]
    Z = sol[:, :, 1:]

    cap = np.eye(4) + _corner_products((a, b, c, d, e), Z)
    cy = _corner_products((a, b, c, d, e), y)
    try:
        w = np.linalg.solve(cap, cy[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    x = y - np.einsum("bmk,bk->bm", Z, w)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution of periodic system")
    return x


def solve_dense(diags, rhs: np.ndarray) -> np.ndarray:
    """Reference dense solve of every system in the batch."""
    rhs = np.asarray(rhs, dtype=float)
    out = np.empty_like(rhs)
    for p in range(rhs.shape[0]):
        try:
            out[p] = np.linalg.solve(periodic_dense(diags, p), rhs[p])
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    return out
