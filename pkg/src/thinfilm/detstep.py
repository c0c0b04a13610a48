"""Deterministic thin-film flow ``v_t = -(f_eps(v) v_xxx)_x`` on the torus.

Each step is semi-implicit in conservative flux form: the face mobility is
lagged, the fourth-order part is implicit.  Writing the unknown as the
increment ``w = v^{k+1} - v^k`` gives the cyclic pentadiagonal system::

    w + dt D_-( m (D^3 w) ) = -dt D_-( m (D^3 v^k) ),     m = f_eps(face mean)

whose right-hand side telescopes to zero, so mass is conserved up to the
rounding of the solve.  Summation by parts against ``-Laplacian(v^{k+1})``
shows that the discrete Dirichlet energy cannot increase for any ``dt``;
the energy check in the adaptive loop therefore only guards round-off and
solver trouble.

The stepping core works on a stack of states with shape ``(B, M)``, each
row carrying its own time, step size and acceptance counters.  Rows never
interact, which is what lets the ensemble driver batch independent paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .banded import DENSE_FALLBACK_MAX_M, periodic_matvec, solve_dense, solve_periodic_pentadiagonal
from .errors import MassDrift, SingularSystem, StepRejected, StepSizeUnderflow
from .grid import Field, backward_difference, forward_difference, third_difference

RESIDUAL_TOL = 1e-12
SOLVERS = ("compiled", "banded", "dense")


@dataclass(frozen=True)
class MobilityParams:
    """Exponent ``n`` and regularisation ``eps`` of ``f_eps(s) = s^(n+4) / (eps s^n + s^4)``."""

    n: float = 4.0
    eps: float = 1e-8

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"mobility exponent must be positive, got {self.n}")
        if not self.eps >= 0:
            raise ValueError(f"regularisation must be non-negative, got {self.eps}")


@dataclass(frozen=True)
class DetSolverConfig:
    """Step-size control for :func:`det_evolve`.

    ``energy_tol=None`` selects the relative default
    ``1e-12 * (1 + ||D+ v||^2)`` evaluated at the start of each step.
    """

    mobility: MobilityParams = field(default_factory=MobilityParams)
    dt_init: float = 1e-4
    dt_min: float = 1e-14
    dt_max: float = math.inf
    energy_tol: float | None = None
    mass_tol: float = 1e-9
    max_rejects: int = 40
    grow_every: int = 10
    grow_factor: float = 1.2
    reject_negative: bool = True
    solver: str = "compiled"

    def __post_init__(self):
        if not self.dt_min > 0:
            raise ValueError("dt_min must be positive")
        if not self.dt_init >= self.dt_min:
            raise ValueError("dt_init must be at least dt_min")
        if self.energy_tol is not None and self.energy_tol < 0:
            raise ValueError("energy_tol must be non-negative")
        if self.mass_tol < 0:
            raise ValueError("mass_tol must be non-negative")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}")

    def with_dt(self, dt_init: float) -> "DetSolverConfig":
        return replace(self, dt_init=max(float(dt_init), self.dt_min))


@dataclass
class StepReport:
    """Bookkeeping of one :func:`det_evolve` call."""

    accepted: int = 0
    rejected: int = 0
    final_dt: float = math.nan
    mass_drift: float = 0.0
    flux_integral: float = 0.0
    energy_history: list = field(default_factory=list)
    entropy_history: list = field(default_factory=list)


def mobility(s, p: MobilityParams):
    """Regularised mobility ``f_eps(s)``; equals ``s**n`` when ``eps == 0``.

    Raises ``ValueError`` for negative arguments.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("mobility is defined for s >= 0 only")
    out = _mobility(s_arr, p.n, p.eps)
    return float(out) if out.ndim == 0 else out


def _mobility(s: np.ndarray, n: float, eps: float) -> np.ndarray:
    if eps == 0.0:
        return s**n
    # s^(n+4) / (eps s^n + s^4) rewritten to avoid overflow of s^(n+4)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = s**n / (1.0 + eps * s ** (n - 4.0))
    return np.where(s > 0, out, 0.0)


def dirichlet_norm2(v: np.ndarray, dx: float) -> np.ndarray:
    """``||D+ v||^2 = dx * sum((D+ v)^2)`` along the last axis."""
    g = forward_difference(v, dx)
    return dx * np.sum(g * g, axis=-1)


@dataclass
class _Candidate:
    values: np.ndarray
    energy_before: np.ndarray
    energy_after: np.ndarray
    ok: np.ndarray
    flux: np.ndarray


def _system(V, dt, dx, p: MobilityParams):
    faces = 0.5 * (V + np.roll(V, -1, axis=-1))
    m = _mobility(np.maximum(faces, 0.0), p.n, p.eps)
    cm = (dt[:, None] / dx**4) * m
    cmm = np.roll(cm, 1, axis=-1)
    diags = (cmm, -(cm + 3.0 * cmm), 1.0 + 3.0 * (cm + cmm), -(3.0 * cm + cmm), cm)
    rhs = -dt[:, None] * backward_difference(m * third_difference(V, dx), dx)
    return diags, rhs, faces


def _solve(diags, rhs, solver):
    M = rhs.shape[-1]
    if solver == "dense":
        return solve_dense(diags, rhs)
    w = solve_periodic_pentadiagonal(diags, rhs)
    scale = np.max(np.abs(rhs), axis=-1) + np.max(np.abs(diags[2]), axis=-1) * np.max(np.abs(w), axis=-1)
    resid = np.max(np.abs(periodic_matvec(diags, w) - rhs), axis=-1)
    bad = resid > RESIDUAL_TOL * scale
    if np.any(bad):
        # one round of iterative refinement, then the dense route
        w = w - solve_periodic_pentadiagonal(diags, periodic_matvec(diags, w) - rhs)
        resid = np.max(np.abs(periodic_matvec(diags, w) - rhs), axis=-1)
        bad = resid > RESIDUAL_TOL * scale
        if np.any(bad):
            if M > DENSE_FALLBACK_MAX_M:
                raise SingularSystem(f"residual {resid.max():.3e} above tolerance")
            idx = np.flatnonzero(bad)
            w[idx] = solve_dense(tuple(q[idx] for q in diags), rhs[idx])
    return w


def _increment_numpy(V, dt, dx, cfg: DetSolverConfig):
    p = cfg.mobility
    diags, rhs, faces = _system(V, dt, dx, p)
    w = _solve(diags, rhs, cfg.solver)
    w -= np.mean(w, axis=-1, keepdims=True)
    Vn = V + w
    d3 = third_difference(Vn, dx)
    flux = dt * dx * np.sum(np.abs(faces) ** (2.0 * p.n) * d3 * d3, axis=-1)
    return Vn, dirichlet_norm2(V, dx), dirichlet_norm2(Vn, dx), flux


def _increment_compiled(V, dt, dx, cfg: DetSolverConfig):
    from ._kernels import step_rows

    p = cfg.mobility
    Vn, e0, e1, flux, resid_ok = step_rows(np.ascontiguousarray(V), np.ascontiguousarray(dt, dtype=float),
                                           float(dx), float(p.n), float(p.eps), RESIDUAL_TOL)
    if not np.all(resid_ok):
        # pivoted LAPACK route for rows the unpivoted elimination could not resolve
        idx = np.flatnonzero(~resid_ok)
        Vn[idx], e0[idx], e1[idx], flux[idx] = _increment_numpy(V[idx], dt[idx], dx, replace(cfg, solver="banded"))
    return Vn, e0, e1, flux


def _step_batch(V, dt, dx, cfg: DetSolverConfig) -> _Candidate:
    if cfg.solver == "compiled":
        Vn, e0, e1, flux = _increment_compiled(V, dt, dx, cfg)
    else:
        Vn, e0, e1, flux = _increment_numpy(V, dt, dx, cfg)
    tol = 1e-12 * (1.0 + e0) if cfg.energy_tol is None else np.full_like(e0, cfg.energy_tol)
    ok = e1 <= e0 + tol
    if cfg.reject_negative:
        ok &= ~((np.min(Vn, axis=-1) < 0) & (np.min(V, axis=-1) >= 0))
    ok &= np.all(np.isfinite(Vn), axis=-1)
    return _Candidate(Vn, e0, e1, ok, flux)


def det_step(v: Field, dt: float, cfg: DetSolverConfig) -> Field:
    """Advance ``v`` by one semi-implicit step of size ``dt``.

    Raises :class:`StepRejected` when the step would raise the discrete
    energy by more than the tolerance (or create negative values from a
    non-negative state); the caller is expected to retry with ``dt / 2``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.any(v.values < 0):
        raise ValueError("det_step needs a non-negative state")
    cand = _step_batch(v.values[None, :], np.array([float(dt)]), v.grid.dx, cfg)
    values = cand.values[0]
    if not cand.ok[0]:
        raise StepRejected(
            f"step dt={dt:.3e} rejected (energy {cand.energy_before[0]:.6e} -> {cand.energy_after[0]:.6e})",
            candidate=v.with_values(values) if np.all(np.isfinite(values)) else None,
            energy_before=float(cand.energy_before[0]),
            energy_after=float(cand.energy_after[0]),
        )
    return v.with_values(values)


@dataclass
class BatchReport:
    """Per-row counters of :func:`evolve_batch`."""

    accepted: np.ndarray
    rejected: np.ndarray
    final_dt: np.ndarray
    mass_drift: np.ndarray
    flux_integral: np.ndarray
    energy_history: list | None = None
    entropy_history: list | None = None

    def row(self, i: int) -> StepReport:
        return StepReport(
            accepted=int(self.accepted[i]),
            rejected=int(self.rejected[i]),
            final_dt=float(self.final_dt[i]),
            mass_drift=float(self.mass_drift[i]),
            flux_integral=float(self.flux_integral[i]),
            energy_history=list(self.energy_history[i]) if self.energy_history else [],
            entropy_history=list(self.entropy_history[i]) if self.entropy_history else [],
        )


def evolve_batch(V0, t_span: float, cfg: DetSolverConfig, dx: float, dt0=None,
                 history: bool = False) -> tuple[np.ndarray, BatchReport]:
    """Evolve every row of ``V0`` (shape ``(B, M)``) over ``t_span``.

    Each row runs its own adaptive step sequence: halve ``dt`` on rejection,
    grow it by ``grow_factor`` after ``grow_every`` consecutive accepted
    steps.  ``dt0`` seeds the per-row step size (default ``cfg.dt_init``);
    the proposal in force at the end is returned as ``final_dt`` so that
    consecutive calls can continue where the previous one stopped.

    With ``history=True`` the report lists ``(t, ||D+ v||^2)`` and
    ``(t, sum(v^(2-n)) dx)`` after every accepted step of every row.
    """
    V = np.array(V0, dtype=float, copy=True)
    if V.ndim != 2:
        raise ValueError("evolve_batch expects a (B, M) array")
    B = V.shape[0]
    t_span = float(t_span)
    if t_span < 0:
        raise ValueError("t_span must be non-negative")
    dt = np.full(B, cfg.dt_init, dtype=float) if dt0 is None else np.array(dt0, dtype=float).reshape(B).copy()
    dt = np.clip(dt, cfg.dt_min, cfg.dt_max)
    t = np.zeros(B)
    streak = np.zeros(B, dtype=int)
    consecutive = np.zeros(B, dtype=int)
    accepted = np.zeros(B, dtype=int)
    rejected = np.zeros(B, dtype=int)
    flux = np.zeros(B)
    mass0 = np.sum(V, axis=-1)
    drift = np.zeros(B)
    n = cfg.mobility.n
    energy_hist = [[(0.0, float(e))] for e in dirichlet_norm2(V, dx)] if history else None
    entropy_hist = [[(0.0, float(s))] for s in _entropy_sum(V, n, dx)] if history else None

    active = np.flatnonzero(t < t_span)
    while active.size:
        remaining = t_span - t[active]
        h = np.minimum(dt[active], remaining)
        cand = _step_batch(V[active], h, dx, cfg)
        good = cand.ok
        acc = active[good]
        rej = active[~good]
        if acc.size:
            V[acc] = cand.values[good]
            lands = h[good] >= remaining[good]
            t[acc] = np.where(lands, t_span, t[acc] + h[good])
            flux[acc] += cand.flux[good]
            accepted[acc] += 1
            consecutive[acc] = 0
            streak[acc] += 1
            grow = acc[streak[acc] >= cfg.grow_every]
            dt[grow] = np.minimum(dt[grow] * cfg.grow_factor, cfg.dt_max)
            streak[grow] = 0
            m_now = np.sum(V[acc], axis=-1)
            drift[acc] = np.abs(m_now - mass0[acc]) / np.where(mass0[acc] != 0, np.abs(mass0[acc]), 1.0)
            if np.any(drift[acc] > cfg.mass_tol):
                worst = acc[np.argmax(drift[acc])]
                raise MassDrift(f"relative mass drift {drift[worst]:.3e} exceeds {cfg.mass_tol:.1e}")
            if history:
                e_now = cand.energy_after[good]
                s_now = _entropy_sum(V[acc], n, dx)
                for k, i in enumerate(acc):
                    energy_hist[i].append((float(t[i]), float(e_now[k])))
                    entropy_hist[i].append((float(t[i]), float(s_now[k])))
        if rej.size:
            rejected[rej] += 1
            consecutive[rej] += 1
            streak[rej] = 0
            dt[rej] *= 0.5
            if np.any(dt[rej] < cfg.dt_min) or np.any(consecutive[rej] > cfg.max_rejects):
                raise StepSizeUnderflow(
                    f"step size fell to {dt[rej].min():.3e} after {consecutive[rej].max()} rejections")
        active = np.flatnonzero(t < t_span)

    report = BatchReport(accepted, rejected, dt, drift, flux, energy_hist, entropy_hist)
    return V, report


def _entropy_sum(V, n, dx):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = dx * np.sum(V ** (2.0 - n), axis=-1)
    return np.where(np.all(V > 0, axis=-1), out, np.inf)


def det_evolve(v0: Field, t_span: float, cfg: DetSolverConfig,
               history: bool = True) -> tuple[Field, StepReport]:
    """Evolve ``v0`` over ``t_span`` with adaptive step control.

    Returns the final field and a :class:`StepReport` with accepted and
    rejected step counts, the final step-size proposal, cumulative relative
    mass drift, the flux integral ``int int v^(2n) (v_xxx)^2`` and, with
    ``history=True``, the energy and entropy after each accepted step.
    """
    if np.any(v0.values < 0):
        raise ValueError("det_evolve needs a non-negative initial state")
    V, rep = evolve_batch(v0.values[None, :], t_span, cfg, v0.grid.dx, history=history)
    return v0.with_values(V[0]), rep.row(0)


def uniform_record_times(t_end: float, record_dt: float) -> np.ndarray:
    """``0, record_dt, 2 record_dt, ...`` closed off exactly at ``t_end``."""
    t_end = float(t_end)
    if t_end < 0 or not record_dt > 0:
        raise ValueError("need t_end >= 0 and record_dt > 0")
    if t_end == 0:
        return np.zeros(1)
    k = int(math.floor(t_end / record_dt + 1e-9))
    times = np.arange(k + 1) * float(record_dt)
    if t_end - times[-1] > 1e-12 * t_end:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def det_trajectory(v0: Field, record_times, cfg: DetSolverConfig) -> tuple[list[Field], list[StepReport]]:
    """Run :func:`det_evolve` across consecutive record times.

    The step-size proposal is carried from one record interval to the next.
    ``record_times`` must start at 0 and be non-decreasing.
    """
    times = np.asarray(record_times, dtype=float)
    if times.size == 0 or times[0] != 0.0 or np.any(np.diff(times) < 0):
        raise ValueError("record_times must start at 0 and be non-decreasing")
    states = [v0]
    reports = []
    V = v0.values[None, :]
    dt = None
    for t0, t1 in zip(times[:-1], times[1:]):
        V, rep = evolve_batch(V, t1 - t0, cfg, v0.grid.dx, dt0=dt)
        dt = rep.final_dt
        states.append(v0.with_values(V[0]))
        reports.append(rep.row(0))
    return states, reports
