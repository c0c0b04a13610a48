import math

import numpy as np
import pytest

from thinfilm.detstep import DetSolverConfig, det_trajectory, evolve_batch
from thinfilm.errors import NonnegativityViolation
from thinfilm.grid import Grid
from thinfilm.splitting import (SplittingConfig, concatenated_uN, default_partitions, draw_normals, flux_diagnostic,
                                leg_fluxes, run_path, run_paths)
from thinfilm.stochstep import CoefficientFn as C, RngStream

ZERO = C.constant(0.0)
DECAY = C.exp_decay(1.0, 1.0)


@pytest.fixture
def wide_cosine():
    g = Grid(2 * math.pi, 64)
    return g.sample(lambda x: 1 + 0.5 * np.cos(x))


def test_config_defaults_and_validation():
    cfg = SplittingConfig(T=4.0, gamma=ZERO, alpha=ZERO)
    assert cfg.N == default_partitions(4.0)
    assert cfg.delta <= 0.05 * cfg.T
    assert cfg.record_times()[-1] == 4.0 and cfg.record_times()[0] == 0.0
    assert SplittingConfig(T=1.0, gamma=ZERO, alpha=ZERO, N=4, record_every=2).record_indices() == [0, 2, 4, 5]
    with pytest.raises(ValueError):
        SplittingConfig(T=1.0, gamma=ZERO, alpha=ZERO, N=0)
    with pytest.raises(ValueError):
        SplittingConfig(T=0.0, gamma=ZERO, alpha=ZERO)


def test_noise_free_splitting_is_deterministic_flow(wide_cosine):
    cfg = SplittingConfig(T=2.0, gamma=ZERO, alpha=ZERO, N=7)
    traj = run_path(wide_cosine, cfg, RngStream(1))
    states, _ = det_trajectory(wide_cosine, cfg.record_times(), cfg.det)
    for s, ref in zip(traj.states, states):
        assert np.array_equal(s.u.values, ref.values)
    assert all(s.eta == 1.0 for s in traj.states)


def test_constant_data_tracks_eta():
    g = Grid(1.0, 32)
    u0 = g.field(np.full(32, 0.6))
    cfg = SplittingConfig(T=3.0, gamma=C.constant(0.2), alpha=C.power(0.8, 0.5), N=11)
    traj = run_path(u0, cfg, RngStream(4))
    for s in traj.states:
        assert np.allclose(s.u.values, 0.6 * s.eta, rtol=1e-13, atol=0)


def test_pathwise_mass_identity_and_positivity(wide_cosine):
    cfg = SplittingConfig(T=5.0, gamma=C.constant(-0.2), alpha=C.constant(0.7))
    m0 = wide_cosine.values.sum() * wide_cosine.grid.dx
    for seed in range(3):
        traj = run_path(wide_cosine, cfg, RngStream(seed))
        for s in traj.states:
            assert abs(s.diagnostics.mass - s.eta * m0) <= 1e-8 * m0
            assert s.diagnostics.min_u > 0


def test_record_points_chain_the_legs(wide_cosine):
    cfg = SplittingConfig(T=1.0, gamma=DECAY, alpha=DECAY, N=4)
    traj = run_path(wide_cosine, cfg, RngStream(3))
    for prev, leg in zip(traj.states[:-1], traj.legs):
        assert np.array_equal(leg.d_start, prev.u.values)
    for leg, s in zip(traj.legs, traj.states[1:]):
        assert np.array_equal(leg.d_end * math.exp(leg.log_factor), s.u.values)


def test_concatenated_approximant(wide_cosine):
    cfg = SplittingConfig(T=1.0, gamma=DECAY, alpha=DECAY, N=4)
    traj = run_path(wide_cosine, cfg, RngStream(8))
    d = cfg.delta
    assert np.array_equal(concatenated_uN(traj, 0.0).values, wide_cosine.values)
    for j, s in enumerate(traj.states):
        assert np.array_equal(concatenated_uN(traj, j * d).values, s.u.values)
    for leg in traj.legs:
        seam = leg.t0 + 0.5 * d
        # recomputing the D leg to its end reproduces the stored endpoint
        re, _ = evolve_batch(leg.d_start[None], d, cfg.det, wide_cosine.grid.dx, dt0=[leg.d_start_dt])
        assert np.max(np.abs(re[0] - leg.d_end)) < 1e-12
        assert np.max(np.abs(concatenated_uN(traj, seam).values - leg.d_end)) < 1e-12
        right = concatenated_uN(traj, seam + 1e-9).values
        assert np.max(np.abs(right - leg.d_end)) < 1e-6
    with pytest.raises(ValueError):
        concatenated_uN(traj, 1.5)


def test_concatenated_s_leg_interpolates_factor(wide_cosine):
    cfg = SplittingConfig(T=1.0, gamma=ZERO, alpha=C.constant(1.0), N=1)
    traj = run_path(wide_cosine, cfg, RngStream(2))
    leg = traj.legs[0]
    mid = concatenated_uN(traj, leg.t0 + 0.75 * cfg.delta).values
    # quarter of the interval: drift -s/2 and half of the realised Wiener integral
    s = 0.5 * cfg.delta
    expected = leg.d_end * math.exp(-0.5 * s + 0.5 * leg.integrals.wiener_integral(leg.z1))
    assert np.allclose(mid, expected, rtol=1e-13)


def test_flux_diagnostic():
    g = Grid(2 * math.pi, 64)
    flat = run_path(g.field(np.full(64, 1.2)), SplittingConfig(T=1.0, gamma=ZERO, alpha=ZERO), RngStream(0))
    assert flux_diagnostic(flat) == 0.0
    totals = []
    for M in (64, 128):
        grid = Grid(2 * math.pi, M)
        u0 = grid.sample(lambda x: 1 + 0.5 * np.cos(x))
        traj = run_path(u0, SplittingConfig(T=2.0, gamma=ZERO, alpha=ZERO), RngStream(0))
        legs = leg_fluxes(traj)
        assert np.all(np.isfinite(legs)) and np.all(np.diff(legs) < 0)
        totals.append(flux_diagnostic(traj))
    assert abs(totals[1] / totals[0] - 1) < 0.1


def test_batched_paths_match_single_paths(wide_cosine):
    cfg = SplittingConfig(T=1.0, gamma=DECAY, alpha=DECAY, N=4)
    normals = np.stack([draw_normals(RngStream(k), cfg) for k in range(3)])
    batch = run_paths(np.tile(wide_cosine.values, (3, 1)), wide_cosine.grid.dx, cfg, normals)
    for k in range(3):
        traj = run_path(wide_cosine, cfg, RngStream(k))
        assert np.array_equal(batch.final[k], traj.final.u.values)
        assert np.array_equal(batch.columns["eta"][:, k], [s.eta for s in traj.states])


def test_negative_state_is_rejected(wide_cosine):
    cfg = SplittingConfig(T=1.0, gamma=ZERO, alpha=ZERO, N=1)
    U0 = wide_cosine.values.copy()
    U0[3] = -1e-10
    with pytest.raises(NonnegativityViolation):
        run_paths(U0[None], wide_cosine.grid.dx, cfg, np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        run_path(wide_cosine.with_values(np.zeros(64)), cfg, RngStream(0))


def _final_energy(u0, T, N):
    cfg = SplittingConfig(T=T, gamma=DECAY, alpha=ZERO, N=N)
    return run_path(u0, cfg, RngStream(0)).final.diagnostics.energy


def test_splitting_self_consistency():
    g = Grid(2 * math.pi, 128)
    u0 = g.sample(lambda x: 1 + 0.5 * np.cos(x))
    N = default_partitions(0.5)
    e1, e2 = _final_energy(u0, 0.5, N), _final_energy(u0, 0.5, 2 * N + 1)
    assert abs(e2 / e1 - 1) < 0.05


def test_splitting_converges_at_first_order():
    g = Grid(2 * math.pi, 128)
    u0 = g.sample(lambda x: 1 + 0.5 * np.cos(x))
    e = [_final_energy(u0, 1.0, N) for N in (39, 79, 159)]
    d1, d2 = abs(e[1] - e[0]), abs(e[2] - e[1])
    assert 0.4 < d2 / d1 < 0.65
