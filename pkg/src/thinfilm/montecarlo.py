"""Ensemble driver for splitting paths.

Paths are split into chunks whose size is part of the configuration and
never depends on the worker count; each chunk is advanced as one batched
stack, and the per-path diagnostics are reassembled in path order before any reduction.  Means and variances
are then formed by a fixed pairwise tree over the path index, so the
statistics are bit-identical for every worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing as mp
import os

import numpy as np

from .errors import PathFailure, ThinFilmError
from .functionals import CSV_COLUMNS, format_number
from .grid import Field
from .splitting import PathBatch, SplittingConfig, draw_normals, run_paths
from .stochstep import RngStream

CHUNK = 256
EXTRA_COLUMNS = ("mass2", "sup_dev2")
STAT_FIELDS = CSV_COLUMNS + EXTRA_COLUMNS
STAT_KINDS = ("mean", "var", "se", "min", "max")


@dataclass(frozen=True)
class EnsembleConfig:
    """``paths`` independent runs of ``splitting`` from ``u0``; path ``k`` is seeded ``base_seed ^ k``."""

    u0: Field
    splitting: SplittingConfig
    paths: int = 1
    base_seed: int = 0
    workers: int = 1
    keep_paths: bool = False
    chunk: int = CHUNK

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError("paths must be an integer >= 1")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        if int(self.chunk) < 1:
            raise ValueError("chunk must be >= 1")


@dataclass
class EnsembleStats:
    """Per-record-time statistics over paths.

    ``stats[field][kind]`` is an array over record times for each field in
    :data:`STAT_FIELDS` and each kind in :data:`STAT_KINDS`.  With
    ``keep_paths`` the raw ``(R, P)`` columns are kept in ``samples``.
    """

    times: np.ndarray
    paths: int
    stats: dict
    samples: dict | None = field(default=None, repr=False)

    def column(self, name: str, kind: str = "mean") -> np.ndarray:
        return self.stats[name][kind]

    def index_of(self, t: float) -> int:
        hits = np.flatnonzero(np.abs(self.times - t) <= 1e-12 * max(1.0, abs(t)))
        if hits.size == 0:
            raise ValueError(f"t={t} is not a record time")
        return int(hits[0])

    def csv_header(self) -> str:
        cols = ["t"] + [f"{f}_{k}" for f in STAT_FIELDS if f != "t" for k in ("mean", "se", "min", "max")]
        return ",".join(cols)

    def to_csv(self) -> str:
        lines = [self.csv_header()]
        for i, t in enumerate(self.times):
            vals = [t] + [self.stats[f][k][i] for f in STAT_FIELDS if f != "t"
                          for k in ("mean", "se", "min", "max")]
            lines.append(",".join(format_number(v) for v in vals))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())


def tree_sum(x: np.ndarray) -> np.ndarray:
    """Sum over axis 0 by a fixed pairwise tree (depends only on ``len(x)``)."""
    x = np.asarray(x, dtype=float)
    while x.shape[0] > 1:
        if x.shape[0] % 2:
            x = np.concatenate([x, np.zeros((1,) + x.shape[1:])])
        x = x[0::2] + x[1::2]
    return x[0]


def summarize(values: np.ndarray) -> dict:
    """Statistics of ``values`` with shape ``(R, P)`` over the path axis."""
    P = values.shape[1]
    x = values.T  # paths first for the tree
    with np.errstate(invalid="ignore", over="ignore"):
        mean = tree_sum(x) / P
        finite = np.isfinite(mean)
        dev = np.where(finite, x - np.where(finite, mean, 0.0), 0.0)
        var = tree_sum(dev * dev) / (P - 1) if P > 1 else np.zeros_like(mean)
    var = np.where(finite, np.maximum(var, 0.0), np.inf)
    return {"mean": mean, "var": var, "se": np.sqrt(var / P),
            "min": np.min(values, axis=1), "max": np.max(values, axis=1)}


def _normals_for(cfg: EnsembleConfig, lo: int, hi: int) -> np.ndarray:
    return np.stack([draw_normals(RngStream.for_path(cfg.base_seed, k), cfg.splitting) for k in range(lo, hi)])


def _run_chunk(cfg: EnsembleConfig, lo: int, hi: int):
    """Advance paths ``lo..hi-1``; returns ``(batch, None)`` or ``(None, (k, exc))``."""
    normals = _normals_for(cfg, lo, hi)
    U0 = np.tile(cfg.u0.values, (hi - lo, 1))
    try:
        return run_paths(U0, cfg.u0.grid.dx, cfg.splitting, normals), None
    except (ThinFilmError, ValueError, FloatingPointError) as exc:
        # locate the first failing path so the error names it
        for k in range(lo, hi):
            try:
                run_paths(U0[:1], cfg.u0.grid.dx, cfg.splitting, normals[k - lo:k - lo + 1])
            except (ThinFilmError, ValueError, FloatingPointError) as single:
                return None, (k, single)
        return None, (lo, exc)


def _chunks(P: int, size: int):
    return [(lo, min(lo + size, P)) for lo in range(0, P, size)]


def run_ensemble(cfg: EnsembleConfig) -> EnsembleStats:
    """Run all paths and aggregate their diagnostics.

    Raises
    ------
    PathFailure
        Carrying the index of the first failed path; the ensemble is
        abandoned rather than resampled.
    """
    chunks = _chunks(cfg.paths, cfg.chunk)
    workers = min(int(cfg.workers), len(chunks))
    if workers <= 1:
        results = [_run_chunk(cfg, lo, hi) for lo, hi in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("spawn")) as pool:
            futures = [pool.submit(_run_chunk, cfg, lo, hi) for lo, hi in chunks]
            results = [f.result() for f in futures]
    failures = [err for _, err in results if err is not None]
    if failures:
        k, exc = min(failures, key=lambda e: e[0])
        raise PathFailure(k, exc)
    batches: list[PathBatch] = [b for b, _ in results]
    samples = {name: np.concatenate([b.columns[name] for b in batches], axis=1) for name in CSV_COLUMNS}
    samples["mass2"] = samples["mass"] ** 2
    samples["sup_dev2"] = samples["sup_dev"] ** 2
    stats = {name: summarize(samples[name]) for name in STAT_FIELDS}
    return EnsembleStats(batches[0].times.copy(), cfg.paths, stats, samples if cfg.keep_paths else None)


def estimate_sup_dev2(stats: EnsembleStats, t: float) -> tuple[float, float]:
    """Sample mean and standard error of ``sup_dev^2`` at record time ``t``."""
    i = stats.index_of(t)
    s = stats.stats["sup_dev2"]
    return float(s["mean"][i]), float(s["se"][i])


def workers_from_env(default: int = 1) -> int:
    """Worker count from ``THINFILM_WORKERS`` if set, else ``default``."""
    raw = os.environ.get("THINFILM_WORKERS")
    if raw is None or raw.strip() == "":
        return default
    value = int(raw)
    if value < 1:
        raise ValueError("THINFILM_WORKERS must be a positive integer")
    return value
