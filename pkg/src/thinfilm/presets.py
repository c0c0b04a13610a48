"""Text descriptors for coefficients and initial data, and named experiment presets.

Coefficients:  ``const:c``, ``exp:a,lam`` (``a e^(-lam t)``), ``pow:a,p``
(``a (1+t)^(-p)``), ``file:path`` (two columns ``t value``).

Initial data:  ``cos:mean,amp[,mode]`` (``mean + amp cos(2 pi mode x / L)``),
``flat:c``, ``file:path`` (one value per cell).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
import json
import math

import numpy as np

from .detstep import DetSolverConfig, MobilityParams
from .grid import Field, Grid
from .montecarlo import EnsembleConfig
from .splitting import SplittingConfig
from .stochstep import CoefficientFn


def _numbers(text: str, kind: str, counts) -> list[float]:
    parts = [p for p in text.split(",")] if text else []
    if len(parts) not in counts:
        raise ValueError(f"{kind}: expected {' or '.join(map(str, counts))} parameters, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"{kind}: parameters must be numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"{kind}: parameters must be finite")
    return vals


def _load_table(path: str) -> np.ndarray:
    delimiter = "," if path.endswith(".csv") else None
    try:
        return np.loadtxt(path, delimiter=delimiter, ndmin=1)
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from None


def parse_coefficient(text: str) -> CoefficientFn:
    """Parse a ``kind:params`` coefficient descriptor; raises ``ValueError`` on bad input."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ValueError(f"coefficient {text!r} lacks a 'kind:' prefix")
    if kind == "const":
        (c,) = _numbers(rest, "const", (1,))
        return CoefficientFn.constant(c)
    if kind == "exp":
        a, lam = _numbers(rest, "exp", (2,))
        return CoefficientFn.exp_decay(a, lam)
    if kind == "pow":
        a, p = _numbers(rest, "pow", (2,))
        return CoefficientFn.power(a, p)
    if kind == "file":
        table = _load_table(rest)
        if table.ndim != 2 or table.shape[1] != 2:
            raise ValueError(f"{rest}: tabulated coefficient needs two columns (t, value)")
        return CoefficientFn.tabulated(table[:, 0], table[:, 1])
    raise ValueError(f"unknown coefficient kind {kind!r}")


def format_coefficient(f: CoefficientFn) -> str:
    """Inverse of :func:`parse_coefficient` for the closed-form kinds."""
    if f.kind == "const":
        return f"const:{f.a!r}"
    if f.kind == "exp":
        return f"exp:{f.a!r},{f.rate!r}"
    if f.kind == "pow":
        return f"pow:{f.a!r},{f.rate!r}"
    raise ValueError("tabulated coefficients have no inline descriptor")


def parse_u0(text: str, grid: Grid) -> Field:
    """Build the initial field from a descriptor; raises ``ValueError`` on bad input."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ValueError(f"initial data {text!r} lacks a 'kind:' prefix")
    if kind == "cos":
        vals = _numbers(rest, "cos", (2, 3))
        mean, amp = vals[0], vals[1]
        mode = vals[2] if len(vals) == 3 else 1.0
        values = mean + amp * np.cos(2.0 * np.pi * mode * grid.x / grid.L)
    elif kind == "flat":
        (c,) = _numbers(rest, "flat", (1,))
        values = np.full(grid.M, c)
    elif kind == "file":
        values = _load_table(rest).ravel()
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}")
    if values.shape != (grid.M,):
        raise ValueError(f"initial data has {values.size} values, grid has {grid.M}")
    if np.any(values < 0):
        raise ValueError("initial data must be non-negative")
    return grid.field(values)


@dataclass(frozen=True)
class ExperimentPreset:
    """Complete, serialisable parameter bundle of an ensemble run."""

    name: str
    L: float
    grid: int
    n: float
    eps: float
    T: float
    N: int
    gamma: str
    alpha: str
    u0: str
    paths: int
    seed: int
    record_every: int = 1
    dt_init: float = 1e-4

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPreset":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown preset keys: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentPreset":
        d = asdict(self)
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentPreset(**d)

    def build_grid(self) -> Grid:
        return Grid(self.L, self.grid)

    def build_u0(self) -> Field:
        return parse_u0(self.u0, self.build_grid())

    def build_splitting(self) -> SplittingConfig:
        det = DetSolverConfig(mobility=MobilityParams(n=self.n, eps=self.eps), dt_init=self.dt_init)
        return SplittingConfig(T=self.T, gamma=parse_coefficient(self.gamma), alpha=parse_coefficient(self.alpha),
                               N=self.N, det=det, record_every=self.record_every)

    def build_ensemble(self, workers: int = 1) -> EnsembleConfig:
        return EnsembleConfig(self.build_u0(), self.build_splitting(), paths=self.paths,
                              base_seed=self.seed, workers=workers)


# L = 2 pi keeps the slowest relaxation rate of order one, so the flattening
# is visible over t in [1, 10] rather than finished before the first record.
PRESETS = {
    "thm25": ExperimentPreset(name="thm25", L=2.0 * math.pi, grid=128, n=4.0, eps=1e-8, T=10.0, N=19,
                              gamma="exp:1.0,1.0", alpha="exp:1.0,1.0", u0="cos:1,0.5,1",
                              paths=4096, seed=20250),
    "thm23i": ExperimentPreset(name="thm23i", L=2.0 * math.pi, grid=128, n=4.0, eps=1e-8, T=20.0, N=19,
                               gamma="const:-0.5", alpha="exp:1.0,1.0", u0="cos:1,0.5,1",
                               paths=1024, seed=20231),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
