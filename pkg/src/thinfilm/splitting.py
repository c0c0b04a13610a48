"""Trotter-Kato splitting of the stochastic thin-film equation.

On the partition ``t_j = j * delta``, ``delta = T / (N + 1)``, every interval
``[t_{j-1}, t_j]`` is covered twice: first by the deterministic flow (D),
started from the state handed over by the previous stochastic leg, then by
the linear stochastic flow (S), started from the end of the D leg.  The S
leg multiplies the state by the exact lognormal factor of the interval, so
mass changes only through that factor and ``int u(t_j) = eta(t_j) int u0``
holds path by path.

The batched driver :func:`run_paths` advances many independent paths as one
``(B, M)`` stack and keeps only diagnostics; :func:`run_path` keeps every
leg so the concatenated approximant can be reconstructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .detstep import DetSolverConfig, evolve_batch
from .errors import NonnegativityViolation
from .functionals import CSV_COLUMNS, DiagnosticPoint, diagnostics_batch
from .grid import Field
from .stochstep import CoefficientFn, EtaState, IntervalIntegrals, RngStream, antiderivatives

NEGATIVE_TOL = 1e-14


def default_partitions(T: float) -> int:
    """Smallest ``N`` with ``T / (N + 1) <= 0.05 T``."""
    return 19


@dataclass(frozen=True)
class SplittingConfig:
    """Horizon, partition and coefficients of a splitting run.

    ``N=None`` selects :func:`default_partitions`.  Diagnostics are recorded
    at ``t = 0``, at every ``record_every``-th partition point and at ``T``.
    """

    T: float
    gamma: CoefficientFn
    alpha: CoefficientFn
    N: int | None = None
    det: DetSolverConfig = field(default_factory=DetSolverConfig)
    record_every: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.N is None:
            object.__setattr__(self, "N", default_partitions(self.T))
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")

    @property
    def delta(self) -> float:
        return self.T / (self.N + 1)

    @property
    def intervals(self) -> int:
        return self.N + 1

    def record_indices(self) -> list[int]:
        """Partition indices ``j`` (``t = j delta``) at which diagnostics are kept."""
        idx = [j for j in range(0, self.intervals + 1) if j % self.record_every == 0]
        if idx[-1] != self.intervals:
            idx.append(self.intervals)
        return idx

    def record_times(self) -> np.ndarray:
        return np.array([self._time(j) for j in self.record_indices()])

    def _time(self, j: int) -> float:
        return self.T if j == self.intervals else j * self.delta

    def interval_integrals(self) -> list[IntervalIntegrals]:
        return [IntervalIntegrals.of(self.gamma, self.alpha, self._time(j - 1), self._time(j))
                for j in range(1, self.intervals + 1)]


@dataclass(frozen=True)
class PathState:
    """State of one path at a partition point."""

    t: float
    u: Field
    beta: float
    eta: float
    diagnostics: DiagnosticPoint


@dataclass(frozen=True)
class Leg:
    """One interval ``[t0, t1]``: the D leg from ``d_start`` to ``d_end``, then the S factor."""

    j: int
    t0: float
    t1: float
    d_start: np.ndarray = field(repr=False)
    d_start_dt: float
    d_end: np.ndarray = field(repr=False)
    integrals: IntervalIntegrals
    z1: float
    log_factor: float
    flux: float
    accepted: int
    rejected: int


@dataclass
class Trajectory:
    """Full record of a single splitting path."""

    u0: Field
    cfg: SplittingConfig
    legs: list[Leg]
    states: list[PathState]

    @property
    def diagnostics(self) -> list[DiagnosticPoint]:
        return [s.diagnostics for s in self.states]

    @property
    def final(self) -> PathState:
        return self.states[-1]


@dataclass
class PathBatch:
    """Diagnostics of ``B`` paths at the record times.

    ``columns[name]`` has shape ``(R, B)`` for every CSV column name.
    """

    times: np.ndarray
    columns: dict
    final: np.ndarray = field(repr=False)
    flux: np.ndarray = field(repr=False)


def draw_normals(rng: RngStream, cfg: SplittingConfig) -> np.ndarray:
    """Standard normals for one path: per interval one for ``int alpha dbeta``, one for ``beta``."""
    return rng.normal((cfg.intervals, 2))


def _check_nonnegative(U, first_row=0):
    low = np.min(U, axis=-1)
    if np.any(low < -NEGATIVE_TOL):
        k = int(np.argmin(low))
        raise NonnegativityViolation(f"path row {first_row + k}: min u = {low[k]:.3e}")


def _advance(U, normals, cfg: SplittingConfig, dx, on_interval):
    """Shared interval loop; ``on_interval`` sees every completed interval."""
    B = U.shape[0]
    dt = np.full(B, cfg.det.dt_init)
    ints = cfg.interval_integrals()
    log_eta = np.zeros(B)
    beta = np.zeros(B)
    flux = np.zeros(B)
    for j, iv in enumerate(ints, start=1):
        start, start_dt = U, dt
        V, rep = evolve_batch(U, iv.t1 - iv.t0, cfg.det, dx, dt0=dt)
        dt = rep.final_dt
        flux += rep.flux_integral
        z1, z2 = normals[:, j - 1, 0], normals[:, j - 1, 1]
        log_factor = iv.int_gamma - 0.5 * iv.int_alpha2 + math.sqrt(iv.int_alpha2) * z1
        U = V * np.exp(log_factor)[:, None]
        _check_nonnegative(U)
        log_eta = log_eta + log_factor
        beta = beta + np.array([iv.brownian_increment(a, b) for a, b in zip(z1, z2)])
        on_interval(j, iv, start, start_dt, V, U, log_factor, log_eta, beta, rep)
    return U, flux


def run_paths(U0, dx: float, cfg: SplittingConfig, normals: np.ndarray, n: float | None = None) -> PathBatch:
    """Run ``B`` independent paths stacked as rows of ``U0``.

    ``normals`` has shape ``(B, N + 1, 2)`` (see :func:`draw_normals`).
    Rows never interact, so the result for a path does not depend on which
    other paths share the batch.
    """
    U0 = np.array(U0, dtype=float)
    if U0.ndim != 2:
        raise ValueError("U0 must have shape (B, M)")
    if normals.shape != (U0.shape[0], cfg.intervals, 2):
        raise ValueError(f"normals must have shape {(U0.shape[0], cfg.intervals, 2)}")
    _check_nonnegative(U0)
    n = cfg.det.mobility.n if n is None else n
    L = dx * U0.shape[1]
    u0_mean = np.sum(U0, axis=-1) * dx / L
    wanted = set(cfg.record_indices())
    rows = []
    times = []

    def record(j, U, log_eta, beta):
        d = diagnostics_batch(U, dx, cfg._time(j), u0_mean, np.exp(log_eta), n, beta)
        rows.append(d)
        times.append(cfg._time(j))

    record(0, U0, np.zeros(U0.shape[0]), np.zeros(U0.shape[0]))

    def on_interval(j, iv, start, start_dt, V, U, log_factor, log_eta, beta, rep):
        if j in wanted:
            record(j, U, log_eta, beta)

    final, flux = _advance(U0, normals, cfg, dx, on_interval)
    columns = {name: np.stack([r[name] for r in rows]) for name in CSV_COLUMNS}
    return PathBatch(np.array(times), columns, final, flux)


def run_path(u0: Field, cfg: SplittingConfig, rng: RngStream) -> Trajectory:
    """Run one splitting path from ``u0`` and keep every leg.

    Raises
    ------
    NonnegativityViolation
        If a state entry drops below ``-1e-14``.
    ValueError
        If ``u0`` has a negative entry or vanishes identically.
    """
    if np.any(u0.values < 0) or not np.any(u0.values > 0):
        raise ValueError("u0 must be non-negative and not identically zero")
    normals = draw_normals(rng, cfg)[None]
    return _trajectory_from_normals(u0, cfg, normals)


def _trajectory_from_normals(u0: Field, cfg: SplittingConfig, normals) -> Trajectory:
    dx = u0.grid.dx
    n = cfg.det.mobility.n
    m0_mean = float(np.sum(u0.values) * dx / u0.grid.L)
    legs, states = [], []
    wanted = set(cfg.record_indices())

    def state(j, U, log_eta, beta):
        d = diagnostics_batch(U, dx, cfg._time(j), m0_mean, np.exp(log_eta), n, beta)
        point = DiagnosticPoint(**{k: float(v[0]) for k, v in d.items()})
        return PathState(cfg._time(j), u0.with_values(U[0]), float(beta[0]), point.eta, point)

    states.append(state(0, u0.values[None], np.zeros(1), np.zeros(1)))

    def on_interval(j, iv, start, start_dt, V, U, log_factor, log_eta, beta, rep):
        legs.append(Leg(j, iv.t0, iv.t1, start[0].copy(), float(start_dt[0]), V[0].copy(), iv,
                        float(normals[0, j - 1, 0]), float(log_factor[0]), float(rep.flux_integral[0]),
                        int(rep.accepted[0]), int(rep.rejected[0])))
        if j in wanted:
            states.append(state(j, U, log_eta, beta))

    _advance(u0.values[None].copy(), normals, cfg, dx, on_interval)
    return Trajectory(u0, cfg, legs, states)


def concatenated_uN(traj: Trajectory, t: float) -> Field:
    """The concatenated approximant ``u_N(t)`` with time compression by two.

    On ``[t_{j-1}, t_{j-1/2}]`` it is the D leg at leg time ``2 (t - t_{j-1})``;
    on ``[t_{j-1/2}, t_j]`` it is the S leg at leg time ``2 (t - t_{j-1}) - delta``.
    Intermediate D states are recomputed from the stored leg start with the
    stored step size.  Intermediate S states use the conditional mean of the
    partial Wiener integral given the realised interval total, so the S leg
    interpolates continuously between the D leg end and the interval end.
    """
    cfg = traj.cfg
    t = float(t)
    if not 0.0 <= t <= cfg.T:
        raise ValueError(f"t={t} outside [0, {cfg.T}]")
    delta = cfg.delta
    scale = 1e-12 * max(1.0, cfg.T)
    k = round(t / delta)
    if abs(t - k * delta) <= scale:
        if k == 0:
            return traj.u0
        leg = traj.legs[k - 1]
        return traj.u0.with_values(leg.d_end * math.exp(leg.log_factor))
    leg = traj.legs[min(int(t // delta), cfg.N)]
    tau = 2.0 * (t - leg.t0)
    if abs(tau - delta) <= scale:
        return traj.u0.with_values(leg.d_end)
    if tau < delta:
        V, _ = evolve_batch(leg.d_start[None], tau, cfg.det, traj.u0.grid.dx, dt0=[leg.d_start_dt])
        return traj.u0.with_values(V[0])
    s = tau - delta
    g, _ = antiderivatives(cfg.gamma, leg.t0, leg.t0 + s)
    _, a2 = antiderivatives(cfg.alpha, leg.t0, leg.t0 + s)
    total = leg.integrals.wiener_integral(leg.z1)
    frac = a2 / leg.integrals.int_alpha2 if leg.integrals.int_alpha2 > 0 else 0.0
    return traj.u0.with_values(leg.d_end * math.exp(g - 0.5 * a2 + frac * total))


def flux_diagnostic(traj: Trajectory) -> float:
    """``int int u^(2n) (u_xxx)^2 dx dt`` accumulated over the D legs in leg time."""
    return float(sum(leg.flux for leg in traj.legs))


def leg_fluxes(traj: Trajectory) -> np.ndarray:
    """Per-interval contributions to :func:`flux_diagnostic`."""
    return np.array([leg.flux for leg in traj.legs])


def with_partitions(cfg: SplittingConfig, N: int) -> SplittingConfig:
    return replace(cfg, N=N)
