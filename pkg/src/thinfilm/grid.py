"""Periodic uniform grid on the torus [0, L) and discrete spatial calculus.

Fields hold cell-centred samples ``x_i = (i + 1/2) dx``.  Face quantities
(forward differences, fluxes) are stored at index ``i`` for the face
``i + 1/2``.  All operators act on the last axis, so the array-level
helpers work unchanged on a stack of fields with shape ``(..., M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``M`` cells on a torus of length ``L``."""

    L: float
    M: int

    def __post_init__(self):
        if not float(self.L) > 0:
            raise ValueError(f"grid length must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < 8:
            raise ValueError(f"grid needs an integer M >= 8, got {self.M}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "M", int(self.M))

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def x(self) -> np.ndarray:
        """Cell centres."""
        return (np.arange(self.M) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        """Face positions ``x_i + dx/2`` matching forward-difference storage."""
        return (np.arange(self.M) + 1.0) * self.dx

    def field(self, values) -> "Field":
        return Field(self, values)

    def sample(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Evaluate ``fn`` at the cell centres."""
        return Field(self, np.broadcast_to(fn(self.x), (self.M,)))


@dataclass(frozen=True)
class Field:
    """Grid function on a :class:`Grid`; the value array is read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __len__(self):
        return self.grid.M

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


# -- array-level stencils (last axis is space) ------------------------------

def forward_difference(v: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(v, -1, axis=-1) - v) / dx


def backward_difference(v: np.ndarray, dx: float) -> np.ndarray:
    return (v - np.roll(v, 1, axis=-1)) / dx


def third_difference(v: np.ndarray, dx: float) -> np.ndarray:
    """Face-centred ``(v[i+2] - 3 v[i+1] + 3 v[i] - v[i-1]) / dx**3``."""
    vp1 = np.roll(v, -1, axis=-1)
    vp2 = np.roll(v, -2, axis=-1)
    vm1 = np.roll(v, 1, axis=-1)
    # grouped so that constants give exactly zero
    return ((vp2 - vm1) - 3.0 * (vp1 - v)) / dx**3


def rectangle_sum(v: np.ndarray, dx: float) -> np.ndarray:
    return dx * np.sum(v, axis=-1)


def periodic_shift(v: np.ndarray, s: float, L: float) -> np.ndarray:
    """Trigonometric interpolant of ``v`` evaluated at ``x - s``.

    Shifts that are an integer number of cells reduce to ``np.roll`` so that
    grid-aligned shifts are exact.
    """
    M = v.shape[-1]
    dx = L / M
    cells = s / dx
    k = round(cells)
    if abs(cells - k) <= 1e-12 * max(1.0, abs(cells)):
        return np.roll(v, k, axis=-1)
    wavenumbers = 2.0 * np.pi * np.fft.rfftfreq(M, d=dx)
    coeffs = np.fft.rfft(v, axis=-1)
    coeffs = coeffs * np.exp(-1j * wavenumbers * s)
    # irfft drops the imaginary part of the Nyquist coefficient (even M).
    return np.fft.irfft(coeffs, n=M, axis=-1)


# -- Field-level operations --------------------------------------------------

def diff_forward(f: Field) -> Field:
    """Forward difference ``(f[i+1] - f[i]) / dx`` with periodic wrap."""
    return f.with_values(forward_difference(f.values, f.grid.dx))


def diff_backward(f: Field) -> Field:
    """Backward difference ``(f[i] - f[i-1]) / dx``; the discrete divergence
    of a face field."""
    return f.with_values(backward_difference(f.values, f.grid.dx))


def third_diff(f: Field) -> Field:
    """Discrete third derivative at faces ``i + 1/2``."""
    return f.with_values(third_difference(f.values, f.grid.dx))


def integrate(f: Field) -> float:
    """Rectangle rule ``dx * sum(f)``, exact for trigonometric polynomials
    resolved by the grid."""
    return float(rectangle_sum(f.values, f.grid.dx))


def shift_interpolate(f: Field, s: float) -> Field:
    """Return ``f(x - s)`` on the torus using spectral interpolation."""
    return f.with_values(periodic_shift(f.values, float(s), f.grid.L))
