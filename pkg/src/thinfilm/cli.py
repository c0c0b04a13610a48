"""Command-line driver: ``thinfilm {det,sde,stability,quadmob}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
import json
import os
import sys

from .asymptotics import classify, energy_bound, entropy_bound, mass_moment2
from .detstep import DetSolverConfig, MobilityParams, det_trajectory, uniform_record_times
from .errors import InsufficientDecayWindow, ThinFilmError
from .functionals import DiagnosticPoint, diagnostics, energy, mass, power_integral_array, write_csv
from .grid import Grid
from .montecarlo import run_ensemble, workers_from_env
from .presets import PRESETS, ExperimentPreset, get_preset, parse_coefficient, parse_u0
from .quadmob import QuadMobConfig, energy_decay_rate, run_quadmob, solve_deterministic
from .stochstep import RngStream

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", newline="\n")


def _emit(text: str, path) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _points_csv(points) -> str:
    return DiagnosticPoint.csv_header() + "\n" + "".join(p.csv_row() + "\n" for p in points)


def _det_config(args, n) -> DetSolverConfig:
    return DetSolverConfig(mobility=MobilityParams(n=n, eps=args.eps), dt_init=args.dt_init)


# -- det ---------------------------------------------------------------------

def cmd_det(args) -> int:
    grid = Grid(args.L, args.grid)
    u0 = parse_u0(args.u0, grid)
    cfg = _det_config(args, args.n)
    record_dt = args.record_dt if args.record_dt else (args.t_end / 100 if args.t_end > 0 else 1.0)
    times = uniform_record_times(args.t_end, record_dt)
    states, _ = det_trajectory(u0, times, cfg)
    mean0 = mass(u0) / grid.L
    points = [diagnostics(v, t, mean0, 1.0, args.n) for t, v in zip(times, states)]
    _emit(_points_csv(points), args.out)
    return EXIT_OK


# -- sde ---------------------------------------------------------------------

def _resolve_preset(args):
    if args.preset_file:
        with open(args.preset_file) as fh:
            base = ExperimentPreset.from_json(fh.read())
    else:
        base = get_preset(args.preset)
    preset = base.replace(L=args.L, grid=args.grid, n=args.n, eps=args.eps, T=args.t_end, N=args.N,
                          gamma=args.gamma, alpha=args.alpha, u0=args.u0, paths=args.paths, seed=args.seed,
                          record_every=args.record_every)
    # validate descriptors up front so malformed input is a config error
    parse_coefficient(preset.gamma)
    parse_coefficient(preset.alpha)
    preset.build_u0()
    return preset


def _sidecar(preset, stats) -> dict:
    u0 = preset.build_u0()
    split = preset.build_splitting()
    g, a = split.gamma, split.alpha
    m0, e0 = mass(u0), energy(u0)
    times = [float(t) for t in stats.times]
    out = {
        "preset": json.loads(preset.to_json()),
        "verdict": classify(g, a).to_dict(),
        "times": times,
        "mass_moment2": [mass_moment2(g, a, m0, t) for t in times],
        "energy_bound": [energy_bound(g, a, e0, t) for t in times],
    }
    if preset.n > 2:
        s0 = float(power_integral_array(u0.values, 2.0 - preset.n, u0.grid.dx))
        out["entropy_bound"] = [entropy_bound(g, a, preset.n, s0, t) for t in times]
    return out


def cmd_sde(args) -> int:
    preset = _resolve_preset(args)
    if args.save_preset:
        _emit(preset.to_json() + "\n", args.save_preset)
    workers = args.workers if args.workers is not None else workers_from_env(1)
    stats = run_ensemble(replace(preset.build_ensemble(workers=workers), chunk=args.chunk))
    _emit(stats.to_csv(), args.out)
    if args.json:
        _emit(json.dumps(_sidecar(preset, stats), indent=2, sort_keys=True) + "\n", args.json)
    return EXIT_OK


# -- stability -----------------------------------------------------------------

def cmd_stability(args) -> int:
    verdict = classify(parse_coefficient(args.gamma), parse_coefficient(args.alpha), args.horizon)
    _emit(verdict.to_json() + "\n", args.out)
    return EXIT_OK


# -- quadmob -------------------------------------------------------------------

def cmd_quadmob(args) -> int:
    grid = Grid(args.L, args.grid)
    u0 = parse_u0(args.u0, grid)
    if args.paths < 1:
        raise ValueError("--paths must be >= 1")
    cfg = QuadMobConfig(T=args.t_end, record_dt=args.record_dt, det=_det_config(args, 2.0),
                        zero_noise=args.zero_noise)
    det = solve_deterministic(u0, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    rates = {}
    for k in range(args.paths):
        traj = run_quadmob(u0, cfg, RngStream.for_path(args.seed, k), det)
        write_csv(traj.points, os.path.join(args.out_dir, f"path_{k:04d}.csv"))
        try:
            rates[str(k)] = energy_decay_rate(traj)
        except InsufficientDecayWindow as exc:
            print(f"warning: path {k}: {exc}", file=sys.stderr)
            rates[str(k)] = None
    with open(os.path.join(args.out_dir, "rates.json"), "w", newline="\n") as fh:
        json.dump({"seed": args.seed, "paths": args.paths, "slopes": rates}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _grid_flags(p, L=None, grid=None, n=None, eps=None, u0=None):
    p.add_argument("--L", type=float, default=L, help="torus length")
    p.add_argument("--grid", type=int, default=grid, help="number of cells M")
    if n is not False:
        p.add_argument("--n", type=float, default=n, help="mobility exponent")
    p.add_argument("--eps", type=float, default=eps, help="mobility regularisation")
    p.add_argument("--u0", default=u0, help="initial data: cos:mean,amp[,mode] | flat:c | file:path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thinfilm", description="Stochastic thin-film simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("det", help="deterministic thin-film evolution")
    _grid_flags(p, L=1.0, grid=128, n=4.0, eps=1e-8, u0="cos:1,0.5,1")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--record-dt", type=float, default=None, help="record spacing (default t_end/100)")
    p.add_argument("--dt-init", type=float, default=1e-4)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("sde", help="splitting ensemble")
    p.add_argument("--preset", default="thm25", choices=sorted(PRESETS))
    p.add_argument("--preset-file", default=None, help="load a preset saved with --save-preset")
    p.add_argument("--save-preset", default=None, help="write the resolved preset as JSON")
    _grid_flags(p)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--N", type=int, default=None, help="partition count, delta = T/(N+1)")
    p.add_argument("--gamma", default=None, help="const:c | exp:a,lam | pow:a,p | file:path")
    p.add_argument("--alpha", default=None, help="const:c | exp:a,lam | pow:a,p | file:path")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--workers", type=int, default=None, help="default: THINFILM_WORKERS or 1")
    p.add_argument("--chunk", type=int, default=256, help="paths per batch (does not affect results)")
    p.add_argument("--out", default="-", help="statistics CSV path, '-' for stdout")
    p.add_argument("--json", default=None, help="sidecar with verdict and bound curves")
    p.set_defaults(func=cmd_sde)

    p = sub.add_parser("stability", help="classify the long-time regime of (gamma, alpha)")
    p.add_argument("--gamma", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("quadmob", help="quadratic mobility with transport noise")
    _grid_flags(p, L=1.0, grid=128, n=False, eps=1e-8, u0="cos:1,0.5,1")
    p.add_argument("--t-end", type=float, default=5.0)
    p.add_argument("--record-dt", type=float, default=5e-4)
    p.add_argument("--dt-init", type=float, default=1e-4)
    p.add_argument("--paths", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-noise", action="store_true", help="beta = 0 on every path")
    p.add_argument("--out-dir", default="quadmob_out")
    p.set_defaults(func=cmd_quadmob)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"thinfilm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThinFilmError as exc:
        print(f"thinfilm: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"thinfilm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
