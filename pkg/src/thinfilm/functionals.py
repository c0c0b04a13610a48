"""Scalar diagnostics of a film height field: mass, energy, entropy, sup norms.

The array-level helpers accept a stack ``(B, M)`` and reduce over the last
axis; the :class:`~thinfilm.grid.Field` versions wrap them for single states.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
import math

import numpy as np

from .grid import Field, Grid, forward_difference

CSV_COLUMNS = ("t", "mass", "energy", "entropy", "min_u", "sup_u", "sup_dev", "eta", "beta")


def format_number(x: float) -> str:
    """Round-trip decimal text with 17 significant digits."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class DiagnosticPoint:
    """Diagnostics of one state at time ``t``.

    ``entropy`` holds ``int u^(2-n)`` (the quantity bounded in expectation),
    not the entropy functional ``int G(u)``; it is ``inf`` when ``n > 2`` and
    the state touches zero.
    """

    t: float
    mass: float
    energy: float
    entropy: float
    min_u: float
    sup_u: float
    sup_dev: float
    eta: float
    beta: float = 0.0

    def csv_row(self) -> str:
        return ",".join(format_number(v) for v in astuple(self))

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_COLUMNS)

    @classmethod
    def from_row(cls, row: str) -> "DiagnosticPoint":
        return cls(*(float(s) for s in row.strip().split(",")))


# -- array level -------------------------------------------------------------

def mass_array(V, dx):
    return dx * np.sum(V, axis=-1)


def energy_array(V, dx):
    g = forward_difference(V, dx)
    return 0.5 * dx * np.sum(g * g, axis=-1)


def power_integral_array(V, q, dx):
    """``dx * sum(V^q)``; ``inf`` for rows with a non-positive entry when ``q < 0``."""
    V = np.asarray(V, dtype=float)
    if q >= 0:
        return dx * np.sum(V**q, axis=-1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = dx * np.sum(V**q, axis=-1)
    return np.where(np.all(V > 0, axis=-1), out, np.inf)


def sup_deviation_array(V, target):
    """``max_i |V_i - target|`` with ``target`` broadcast per row."""
    return np.max(np.abs(V - np.asarray(target, dtype=float)[..., None]), axis=-1)


# -- Field level -------------------------------------------------------------

def mass(u: Field) -> float:
    """``int u dx`` by the rectangle rule."""
    return float(mass_array(u.values, u.grid.dx))


def energy(u: Field) -> float:
    """Dirichlet energy ``J[u] = 1/2 * dx * sum(((u[i+1] - u[i]) / dx)^2)``."""
    return float(energy_array(u.values, u.grid.dx))


def entropy_density(r, n: float):
    """``G(r) = r^(2-n) / ((2-n)(1-n))`` for ``n > 2``."""
    return np.asarray(r, dtype=float) ** (2.0 - n) / ((2.0 - n) * (1.0 - n))


def entropy(u: Field, n: float) -> float:
    """``dx * sum(G(u_i))``; returns ``inf`` if any ``u_i <= 0``.

    Raises ``ValueError`` for ``n <= 2`` where ``G`` is not defined by this formula.
    """
    if not n > 2:
        raise ValueError(f"entropy needs n > 2, got {n}")
    if np.any(u.values <= 0):
        return math.inf
    return float(u.grid.dx * np.sum(entropy_density(u.values, n)))


def sup_deviation(u: Field, u0_mean: float, eta: float) -> float:
    """``max_i |u_i - u0_mean * eta|``."""
    return float(np.max(np.abs(u.values - u0_mean * eta)))


def poincare_constant(grid: Grid) -> float:
    """Constant ``C`` with ``sup_dev^2 <= C (J[u] + L (mass/L - c)^2)`` on the grid.

    From ``max_i |u_i - mean| <= sum_i |u_{i+1} - u_i| <= sqrt(2 L J[u])`` and
    ``(a + b)^2 <= 2a^2 + 2b^2`` one gets ``C = max(4 L, 2 / L)``.
    """
    return max(4.0 * grid.L, 2.0 / grid.L)


def diagnostics(u: Field, t: float, u0_mean: float, eta: float, n: float, beta: float = 0.0) -> DiagnosticPoint:
    """Evaluate all diagnostics of ``u`` at time ``t``."""
    v = u.values
    dx = u.grid.dx
    return DiagnosticPoint(
        t=float(t),
        mass=float(mass_array(v, dx)),
        energy=float(energy_array(v, dx)),
        entropy=float(power_integral_array(v, 2.0 - n, dx)),
        min_u=float(np.min(v)),
        sup_u=float(np.max(v)),
        sup_dev=float(np.max(np.abs(v - u0_mean * eta))),
        eta=float(eta),
        beta=float(beta),
    )


def diagnostics_batch(V, dx, t, u0_mean, eta, n, beta=None) -> dict:
    """Column arrays of :class:`DiagnosticPoint` fields for a ``(B, M)`` stack."""
    V = np.asarray(V, dtype=float)
    B = V.shape[0]
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (B,))
    target = np.broadcast_to(np.asarray(u0_mean, dtype=float), (B,)) * eta
    return {
        "t": np.full(B, float(t)),
        "mass": mass_array(V, dx),
        "energy": energy_array(V, dx),
        "entropy": power_integral_array(V, 2.0 - n, dx),
        "min_u": np.min(V, axis=-1),
        "sup_u": np.max(V, axis=-1),
        "sup_dev": sup_deviation_array(V, target),
        "eta": np.array(eta, dtype=float),
        "beta": np.zeros(B) if beta is None else np.broadcast_to(np.asarray(beta, dtype=float), (B,)).copy(),
    }


def write_csv(points, path) -> None:
    """Write ``DiagnosticPoint`` rows with a header, LF line endings."""
    with open(path, "w", newline="\n") as fh:
        fh.write(DiagnosticPoint.csv_header() + "\n")
        for p in points:
            fh.write(p.csv_row() + "\n")


def read_csv(path) -> list[DiagnosticPoint]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != DiagnosticPoint.csv_header():
        raise ValueError(f"{path}: not a diagnostics CSV")
    return [DiagnosticPoint.from_row(line) for line in lines[1:] if line]
