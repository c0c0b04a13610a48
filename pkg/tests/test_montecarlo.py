import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import thinfilm.montecarlo as mc
from thinfilm.detstep import det_trajectory
from thinfilm.errors import PathFailure, StepSizeUnderflow
from thinfilm.grid import Grid
from thinfilm.montecarlo import (EnsembleConfig, estimate_sup_dev2, run_ensemble, summarize, tree_sum,
                                 workers_from_env)
from thinfilm.splitting import SplittingConfig, draw_normals, run_path
from thinfilm.stochstep import CoefficientFn as C, RngStream

ZERO = C.constant(0.0)


@pytest.fixture
def small_u0():
    g = Grid(2 * math.pi, 32)
    return g.sample(lambda x: 1 + 0.5 * np.cos(x))


def test_config_validation(small_u0):
    split = SplittingConfig(T=1.0, gamma=ZERO, alpha=ZERO)
    with pytest.raises(ValueError):
        EnsembleConfig(small_u0, split, paths=0)
    with pytest.raises(ValueError):
        EnsembleConfig(small_u0, split, base_seed=-1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=70))
def test_tree_sum_is_accurate(xs):
    x = np.array(xs)
    assert tree_sum(x) == pytest.approx(math.fsum(xs), abs=1e-9 * (1 + np.sum(np.abs(x))))


def test_summary_statistics():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(3, 50))
    s = summarize(v)
    assert np.allclose(s["mean"], v.mean(axis=1), rtol=1e-14)
    assert np.allclose(s["var"], v.var(axis=1, ddof=1), rtol=1e-12)
    assert np.allclose(s["se"], np.sqrt(s["var"] / 50))
    assert np.all(s["var"] >= 0)
    inf = summarize(np.array([[1.0, np.inf]]))
    assert inf["mean"][0] == math.inf and inf["var"][0] >= 0


def test_single_path_equals_trajectory(small_u0):
    split = SplittingConfig(T=1.0, gamma=C.exp_decay(1, 1), alpha=C.exp_decay(1, 1), N=4)
    stats = run_ensemble(EnsembleConfig(small_u0, split, paths=1, base_seed=11))
    traj = run_path(small_u0, split, RngStream.for_path(11, 0))
    assert np.array_equal(stats.column("energy"), [s.diagnostics.energy for s in traj.states])
    assert np.all(stats.column("energy", "var") == 0)


def test_noise_free_ensemble_has_no_spread(small_u0):
    split = SplittingConfig(T=1.0, gamma=C.constant(-0.3), alpha=ZERO, N=4)
    stats = run_ensemble(EnsembleConfig(small_u0, split, paths=8))
    for name in ("mass", "energy", "sup_dev", "eta"):
        assert np.all(stats.column(name, "var") == 0)


def test_mass_second_moment_matches_closed_form():
    g = Grid(1.0, 8)
    u0 = g.field(np.ones(8))
    split = SplittingConfig(T=1.0, gamma=ZERO, alpha=C.constant(1.0))
    stats = run_ensemble(EnsembleConfig(u0, split, paths=10**4, base_seed=3))
    mean, se = stats.column("mass2")[-1], stats.column("mass2", "se")[-1]
    assert abs(mean - math.e) < 4 * se


def test_results_do_not_depend_on_workers_or_chunking(small_u0):
    split = SplittingConfig(T=0.5, gamma=C.exp_decay(1, 1), alpha=C.exp_decay(1, 1), N=3)
    base = EnsembleConfig(small_u0, split, paths=12, base_seed=5, chunk=3)
    one = run_ensemble(base)
    four = run_ensemble(replace(base, workers=4))
    big = run_ensemble(replace(base, chunk=256))
    assert one.to_csv() == four.to_csv() == big.to_csv()


def test_failed_path_aborts_with_index(small_u0, monkeypatch):
    split = SplittingConfig(T=0.5, gamma=ZERO, alpha=C.constant(0.5), N=3)
    cfg = EnsembleConfig(small_u0, split, paths=6, base_seed=1, chunk=4)
    bad = draw_normals(RngStream.for_path(1, 5), split)
    real = mc.run_paths

    def flaky(U0, dx, s, normals):
        if any(np.array_equal(n, bad) for n in normals):
            raise StepSizeUnderflow("forced")
        return real(U0, dx, s, normals)

    monkeypatch.setattr(mc, "run_paths", flaky)
    with pytest.raises(PathFailure) as info:
        run_ensemble(cfg)
    assert info.value.path_index == 5
    assert isinstance(info.value.cause, StepSizeUnderflow)


def test_sup_dev_estimate_for_constant_data():
    g = Grid(1.0, 16)
    u0 = g.field(np.full(16, 0.8))
    split = SplittingConfig(T=2.0, gamma=C.constant(0.1), alpha=C.constant(0.6), N=3)
    stats = run_ensemble(EnsembleConfig(u0, split, paths=16))
    for t in stats.times:
        est, se = estimate_sup_dev2(stats, t)
        assert est <= 1e-26
    with pytest.raises(ValueError):
        estimate_sup_dev2(stats, 0.123)


def test_sup_dev_estimate_follows_deterministic_flattening(small_u0):
    split = SplittingConfig(T=2.0, gamma=ZERO, alpha=ZERO, N=3)
    stats = run_ensemble(EnsembleConfig(small_u0, split, paths=4))
    states, _ = det_trajectory(small_u0, split.record_times(), split.det)
    mean0 = small_u0.values.mean()
    for t, s in zip(stats.times, states):
        assert estimate_sup_dev2(stats, t)[0] == pytest.approx(np.max(np.abs(s.values - mean0)) ** 2, rel=1e-12)
    assert estimate_sup_dev2(stats, 2.0)[0] < estimate_sup_dev2(stats, 0.5)[0]


def test_stats_csv_layout(small_u0):
    split = SplittingConfig(T=0.5, gamma=ZERO, alpha=C.constant(0.3), N=1)
    stats = run_ensemble(EnsembleConfig(small_u0, split, paths=3))
    text = stats.to_csv()
    lines = text.split("\n")
    header = lines[0].split(",")
    assert header[0] == "t" and header[1:5] == ["mass_mean", "mass_se", "mass_min", "mass_max"]
    assert "sup_dev2_mean" in header and "\r" not in text
    assert len(lines) == len(stats.times) + 2 and lines[-1] == ""


def test_workers_from_env(monkeypatch):
    monkeypatch.delenv("THINFILM_WORKERS", raising=False)
    assert workers_from_env(3) == 3
    monkeypatch.setenv("THINFILM_WORKERS", "4")
    assert workers_from_env() == 4
    monkeypatch.setenv("THINFILM_WORKERS", "0")
    with pytest.raises(ValueError):
        workers_from_env()
