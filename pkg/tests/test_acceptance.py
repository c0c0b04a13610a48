"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (the verdict lines
are printed even without ``-s``).
"""

import json
import math
import pathlib
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from thinfilm.asymptotics import classify, energy_bound, entropy_bound, mass_moment2
from thinfilm.cli import main
from thinfilm.detstep import DetSolverConfig, MobilityParams, det_evolve
from thinfilm.functionals import energy, mass, power_integral_array
from thinfilm.grid import Grid
from thinfilm.montecarlo import estimate_sup_dev2, run_ensemble
from thinfilm.presets import get_preset
from thinfilm.quadmob import QuadMobConfig, energy_decay_rate, run_quadmob, solve_deterministic
from thinfilm.stochstep import CoefficientFn as C, RngStream, sample_eta_increment

GOLDEN = pathlib.Path(__file__).parent / "golden" / "thm25_pilot.json"


@pytest.fixture
def report(capsys):
    def _report(k, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return _report


def _cosine(g):
    return g.sample(lambda x: 1 + 0.5 * np.cos(2 * np.pi * x / g.L))


@pytest.fixture(scope="module")
def ensembles():
    """Full preset ensembles with per-path samples, computed once."""
    out = {}
    for name in ("thm25", "thm23i"):
        cfg = replace(get_preset(name).build_ensemble(), keep_paths=True)
        start = time.perf_counter()
        st = run_ensemble(cfg)
        out[name] = (cfg, st, time.perf_counter() - start)
    return out


def test_criterion_01_deterministic_core(report):
    g = Grid(1.0, 128)
    u0 = _cosine(g)
    cfg = DetSolverConfig(mobility=MobilityParams(n=4.0, eps=1e-8))
    start = time.perf_counter()
    v, rep = det_evolve(u0, 5.0, cfg)
    elapsed = time.perf_counter() - start
    drift = abs(mass(v) - mass(u0)) / mass(u0)
    e = np.array([E for _, E in rep.energy_history])  # starts with the initial energy
    rise = float(np.max(np.diff(e)))
    dev = float(np.max(np.abs(v.values - u0.values.mean())))
    ok = drift < 1e-9 and rise <= 1e-12 * e[0] and dev < 1e-3 and elapsed < 30
    report(1, ok, f"mass drift {drift:.2e}, max energy rise {rise:.2e} over {rep.accepted} steps, "
                  f"sup dev {dev:.2e}, {elapsed:.1f} s")


def test_criterion_02_exact_stochastic_step(report):
    start = time.perf_counter()
    rng = RngStream(20242)
    eta = np.array([sample_eta_increment(C.constant(0.0), C.constant(1.0), 0.0, 1.0, rng)[0]
                    for _ in range(10**5)])
    elapsed = time.perf_counter() - start
    m2 = eta**2
    se = m2.std(ddof=1) / math.sqrt(m2.size)
    z = abs(m2.mean() - math.e) / se
    ks = sps.kstest(np.log(eta), "norm", args=(-0.5, 1.0))
    ok = z < 4 and ks.pvalue > 1e-3 and elapsed < 5
    report(2, ok, f"E eta^2 = {m2.mean():.4f} ({z:.2f} SE from e), KS p = {ks.pvalue:.3f}, {elapsed:.2f} s")


def test_criterion_03_pathwise_mass_identity(ensembles, report):
    worst = 0.0
    for cfg, st, _ in ensembles.values():
        m0 = mass(cfg.u0)
        worst = max(worst, float(np.max(np.abs(st.samples["mass"] - st.samples["eta"] * m0)) / m0))
    report(3, worst <= 1e-8, f"max |int u - eta int u0| / int u0 = {worst:.2e} on both presets")


def test_criterion_04_positivity(report):
    preset = get_preset("thm25").replace(T=5.0, paths=256)
    cfg = replace(preset.build_ensemble(), keep_paths=True)
    assert np.all(cfg.u0.values > 0)
    st = run_ensemble(cfg)
    low = float(st.samples["min_u"].min())
    report(4, low > 0, f"min u over 256 paths and {len(st.times)} record times = {low:.3e}")


def test_criterion_05_flattening_regime(ensembles, report):
    cfg, st, elapsed = ensembles["thm25"]
    golden = json.loads(GOLDEN.read_text())
    e1, _ = estimate_sup_dev2(st, 1.0)
    e10, se10 = estimate_sup_dev2(st, 10.0)
    matches = np.allclose(st.column("sup_dev2"), golden["sup_dev2_mean"], rtol=1e-8, atol=0)
    ok = e10 < e1 and e10 < golden["threshold_t10"] and matches and elapsed < 600
    report(5, ok, f"E sup_dev^2: t=1 {e1:.4g}, t=10 {e10:.4g} +- {se10:.1g} "
                  f"(threshold {golden['threshold_t10']:g}, golden match {matches}), {elapsed:.0f} s")


def test_criterion_06_almost_sure_decay(ensembles, report):
    cfg, st, elapsed = ensembles["thm23i"]
    sup_T = float(st.samples["sup_u"][-1].max())
    bound = 0.1 * float(cfg.u0.values.max())
    s = cfg.splitting
    regime = classify(s.gamma, s.alpha).regime
    ok = st.times[-1] == 20.0 and sup_T < bound and regime == "as_stable_i" and elapsed < 600
    report(6, ok, f"max_paths sup u(20) = {sup_T:.3e} < {bound:.3g}, verdict {regime}, {elapsed:.0f} s")


def test_criterion_07_moment_envelopes(ensembles, report):
    lines, ok = [], True
    for name, (cfg, st, _) in ensembles.items():
        s, u0, n = cfg.splitting, cfg.u0, cfg.splitting.det.mobility.n
        m0, e0 = mass(u0), energy(u0)
        s0 = float(power_integral_array(u0.values, 2.0 - n, u0.grid.dx))
        curves = {
            "mass2": [mass_moment2(s.gamma, s.alpha, m0, t) for t in st.times],
            "energy": [energy_bound(s.gamma, s.alpha, e0, t) for t in st.times],
            "entropy": [entropy_bound(s.gamma, s.alpha, n, s0, t) for t in st.times],
        }
        for f, b in curves.items():
            b = np.array(b)
            mean, se = st.column(f), st.column(f, "se")
            good = bool(np.all(mean <= b * (1 + 5 * se)) and np.all(mean <= b + 5 * se))
            ok &= good
            lines.append(f"{name}/{f} max mean/bound (t > 0) {np.max(mean[1:] / b[1:]):.4f}")
    report(7, ok, "; ".join(lines))


HAND_PAIRS = [
    (C.constant(-1.0), C.exp_decay(1.0, 1.0), "as_stable_i"),
    (C.constant(0.0), C.constant(1.0), "as_stable_ii"),
    (C.constant(0.5), C.constant(1.0), "inconclusive"),
    (C.constant(0.0), C.exp_decay(1.0, 1.0), "bounded_regime"),
    (C.exp_decay(1.0, 1.0), C.exp_decay(1.0, 1.0), "bounded_regime"),
    (C.power(-1.0, 1.0), C.exp_decay(2.0, 0.5), "as_stable_i"),
    (C.constant(1.0), C.exp_decay(1.0, 1.0), "inconclusive"),
    (C.constant(-1.0), C.constant(1.0), "as_stable_ii"),
]


def test_criterion_08_classifier_suite(report):
    start = time.perf_counter()
    got = [classify(g, a).regime for g, a, _ in HAND_PAIRS]
    elapsed = time.perf_counter() - start
    wrong = [i for i, (r, (_, _, want)) in enumerate(zip(got, HAND_PAIRS)) if r != want]
    ok = not wrong and elapsed < 1
    report(8, ok, f"{len(HAND_PAIRS) - len(wrong)}/{len(HAND_PAIRS)} verdicts exact, {elapsed * 1e3:.1f} ms")


def test_criterion_09_quadratic_mobility(report):
    g = Grid(1.0, 128)
    u0 = _cosine(g)
    cfg = QuadMobConfig(T=5.0)
    start = time.perf_counter()
    det = solve_deterministic(u0, cfg)
    slopes, jgap, devs = [], 0.0, []
    for k in range(16):
        traj = run_quadmob(u0, cfg, RngStream.for_path(0, k), det)
        slopes.append(energy_decay_rate(traj))
        jgap = max(jgap, float(np.max(np.abs(traj.energy - traj.energy_v))))
        devs.append(traj.points[-1].sup_dev)
    elapsed = time.perf_counter() - start
    ok = max(slopes) < 0 and jgap <= 1e-9 and max(devs) < 1e-3 and elapsed < 120
    report(9, ok, f"slopes in [{min(slopes):.1f}, {max(slopes):.1f}], max |J[u]-J[v]| {jgap:.1e}, "
                  f"max sup dev {max(devs):.1e}, {elapsed:.1f} s")


def test_criterion_10_reproducibility(tmp_path, report):
    argv = ["sde", "--preset", "thm25", "--grid", "64", "--t-end", "2", "--N", "3", "--paths", "24",
            "--seed", "7", "--chunk", "4"]
    outs = []
    for w in (1, 4):
        path = tmp_path / f"w{w}.csv"
        assert main(argv + ["--workers", str(w), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    repeat = tmp_path / "again.csv"
    assert main(argv + ["--workers", "1", "--out", str(repeat)]) == 0
    ok = outs[0] == outs[1] == repeat.read_bytes()
    report(10, ok, f"workers 1 vs 4 and a repeat run: byte-identical CSV ({len(outs[0])} bytes)")
