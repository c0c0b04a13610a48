"""Thin film with quadratic mobility driven by transport noise.

The noise ``u_x dbeta`` is removed by the random shift ``v(t, x) = u(t, x - beta(t))``:
``v`` then solves the deterministic thin-film equation with ``n = 2``, so
``u(t, .) = v(t, . + beta(t))``.  The deterministic solution does not
depend on the path and is computed once; each path only draws its
Brownian values at the record times and shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .detstep import DetSolverConfig, MobilityParams, det_trajectory, uniform_record_times
from .errors import InsufficientDecayWindow
from .functionals import DiagnosticPoint, diagnostics, energy_array
from .grid import Field, shift_interpolate
from .stochstep import RngStream

MIN_POINTS = 10
ENERGY_FLOOR = 1e-12


@dataclass(frozen=True)
class QuadMobConfig:
    """Horizon, record spacing and solver settings; the mobility exponent is forced to 2."""

    T: float = 5.0
    record_dt: float = 5e-4
    det: DetSolverConfig = field(default_factory=lambda: DetSolverConfig(mobility=MobilityParams(n=2.0)))
    field_every: int = 0
    zero_noise: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0 < self.record_dt <= self.T:
            raise ValueError("record_dt must lie in (0, T]")
        if self.det.mobility.n != 2.0:
            object.__setattr__(self, "det", replace(self.det, mobility=replace(self.det.mobility, n=2.0)))

    def record_times(self) -> np.ndarray:
        return uniform_record_times(self.T, self.record_dt)


@dataclass
class DetSolution:
    """Deterministic ``n = 2`` solution at the record times, shared by all paths."""

    times: np.ndarray
    states: list[Field] = field(repr=False)


@dataclass
class QuadMobTrajectory:
    """One path: diagnostics at every record time, ``u`` on a sparse subset."""

    times: np.ndarray
    beta: np.ndarray
    points: list[DiagnosticPoint]
    energy_v: np.ndarray
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def energy(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])


def solve_deterministic(u0: Field, cfg: QuadMobConfig) -> DetSolution:
    times = cfg.record_times()
    states, _ = det_trajectory(u0, times, cfg.det)
    return DetSolution(times, states)


def brownian_path(times: np.ndarray, rng: RngStream) -> np.ndarray:
    """``beta`` at ``times`` (starting at 0) from exact ``N(0, dt)`` increments."""
    z = rng.normal(len(times) - 1)
    return np.concatenate([[0.0], np.cumsum(np.sqrt(np.diff(times)) * z)])


def run_quadmob(u0: Field, cfg: QuadMobConfig, rng: RngStream, det: DetSolution | None = None) -> QuadMobTrajectory:
    """Simulate one path as ``u(t) = shift_interpolate(v(t), -beta(t))``.

    ``det`` may carry a precomputed deterministic solution for the same
    ``u0`` and config; it is computed here otherwise.
    """
    if np.any(u0.values < 0):
        raise ValueError("u0 must be non-negative")
    det = solve_deterministic(u0, cfg) if det is None else det
    times = det.times
    beta = np.zeros(len(times)) if cfg.zero_noise else brownian_path(times, rng)
    m0 = float(np.sum(u0.values) * u0.grid.dx)
    mean0 = m0 / u0.grid.L
    points, ev = [], []
    kept = {}
    for i, (t, v, b) in enumerate(zip(times, det.states, beta)):
        u = shift_interpolate(v, -b)
        points.append(diagnostics(u, t, mean0, 1.0, 2.0, beta=b))
        ev.append(float(energy_array(v.values, u0.grid.dx)))
        if cfg.field_every and (i % cfg.field_every == 0 or i == len(times) - 1):
            kept[float(t)] = u
    if not cfg.field_every:
        kept[float(times[-1])] = shift_interpolate(det.states[-1], -beta[-1])
    return QuadMobTrajectory(times, beta, points, np.array(ev), kept)


def energy_decay_rate(traj: QuadMobTrajectory) -> float:
    """Least-squares slope of ``ln J[u(t)]`` over the record points with ``J > 1e-12``.

    The window is the longest initial run of such points (energy decays, so
    it starts at ``t = 0``).

    Raises
    ------
    InsufficientDecayWindow
        If fewer than ten record points qualify.
    """
    J = traj.energy
    above = J > ENERGY_FLOOR
    stop = int(np.argmin(above)) if not np.all(above) else len(J)
    if stop < MIN_POINTS:
        raise InsufficientDecayWindow(
            f"only {stop} record points with energy above {ENERGY_FLOOR:g}; need {MIN_POINTS}")
    slope, _ = np.polyfit(traj.times[:stop], np.log(J[:stop]), 1)
    return float(slope)
