"""Exact sampling of the linear multiplicative-noise flow ``dw = gamma w dt + alpha w dbeta``.

Because ``alpha`` is deterministic, the Wiener integral ``int alpha dbeta``
over an interval is Gaussian with variance ``int alpha^2``.  The flow
therefore multiplies the state by a lognormal factor that can be drawn
without any time-discretisation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import QuadratureFailure
from .grid import Field

COEFFICIENT_KINDS = ("const", "exp", "pow", "tabulated")
QUAD_TOL = 1e-12
QUAD_MAX_EVALS = 1_000_000


@dataclass(frozen=True)
class CoefficientFn:
    """Time-dependent coefficient ``gamma(t)`` or ``alpha(t)``.

    Kinds
    -----
    ``const``      ``a``
    ``exp``        ``a * exp(-rate * t)`` with ``rate > 0``
    ``pow``        ``a * (1 + t)**(-rate)`` with ``rate >= 0``
    ``tabulated``  piecewise-linear interpolation of ``(times, values)``,
                   held constant outside the sampled range
    """

    kind: str
    a: float = 0.0
    rate: float = 0.0
    times: tuple = field(default=(), repr=False)
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        for name in ("a", "rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient parameter {name} must be finite")
        if self.kind == "exp" and not self.rate > 0:
            raise ValueError("exp decay needs a positive rate")
        if self.kind == "pow" and not self.rate >= 0:
            raise ValueError("power decay needs a non-negative exponent")
        if self.kind == "tabulated":
            ts = tuple(float(t) for t in self.times)
            vs = tuple(float(v) for v in self.values)
            if len(ts) < 1 or len(ts) != len(vs):
                raise ValueError("tabulated coefficient needs matching, non-empty times and values")
            if any(t1 <= t0 for t0, t1 in zip(ts[:-1], ts[1:])):
                raise ValueError("tabulated sample times must be strictly increasing")
            if not all(math.isfinite(v) for v in ts + vs):
                raise ValueError("tabulated samples must be finite")
            object.__setattr__(self, "times", ts)
            object.__setattr__(self, "values", vs)

    @classmethod
    def constant(cls, c: float) -> "CoefficientFn":
        return cls("const", a=float(c))

    @classmethod
    def exp_decay(cls, a: float, lam: float) -> "CoefficientFn":
        return cls("exp", a=float(a), rate=float(lam))

    @classmethod
    def power(cls, a: float, p: float) -> "CoefficientFn":
        return cls("pow", a=float(a), rate=float(p))

    @classmethod
    def tabulated(cls, times, values) -> "CoefficientFn":
        return cls("tabulated", times=tuple(times), values=tuple(values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            out = np.full_like(t, self.a)
        elif self.kind == "exp":
            out = self.a * np.exp(-self.rate * t)
        elif self.kind == "pow":
            out = self.a * (1.0 + t) ** (-self.rate)
        else:
            out = np.interp(t, self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def negated(self) -> "CoefficientFn":
        if self.kind == "tabulated":
            return CoefficientFn.tabulated(self.times, [-v for v in self.values])
        return CoefficientFn(self.kind, a=-self.a, rate=self.rate)

    @property
    def is_zero(self) -> bool:
        if self.kind == "tabulated":
            return all(v == 0.0 for v in self.values)
        return self.a == 0.0


# -- antiderivatives ---------------------------------------------------------

def _exp_integral(a, lam, t0, t1):
    """``int_t0^t1 a exp(-lam s) ds`` without cancellation for short intervals."""
    if math.isinf(t1):
        return a * math.exp(-lam * t0) / lam
    return -a * math.exp(-lam * t0) * math.expm1(-lam * (t1 - t0)) / lam


def _pow_integral(a, q, t0, t1):
    """``int_t0^t1 a (1+s)^(-q) ds``."""
    if math.isinf(t1):
        if q <= 1:
            return math.copysign(math.inf, a) if a != 0 else 0.0
        return a * (1.0 + t0) ** (1.0 - q) / (q - 1.0)
    r = math.log1p(t1) - math.log1p(t0)
    if q == 1.0:
        return a * r
    # (1+t0)^(1-q) * (exp((1-q) r) - 1) / (1-q)
    return a * (1.0 + t0) ** (1.0 - q) * math.expm1((1.0 - q) * r) / (1.0 - q)


def _adaptive_simpson(fn, a, b, tol, budget):
    """Adaptive Simpson on ``[a, b]``; ``budget`` is a one-element eval counter."""
    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    budget[0] += 3
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fn(lm), fn(rm)
        budget[0] += 2
        if budget[0] > QUAD_MAX_EVALS:
            raise QuadratureFailure(f"adaptive Simpson exceeded {QUAD_MAX_EVALS} evaluations")
        left = (mid - lo) * (flo + 4.0 * flm + fmid) / 6.0
        right = (hi - mid) * (fmid + 4.0 * frm + fhi) / 6.0
        delta = left + right - s
        if abs(delta) <= 15.0 * eps or hi - lo <= 1e-15 * max(1.0, abs(hi)):
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps))
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps))
    return total


def _tabulated_integrals(f: CoefficientFn, t0, t1):
    if math.isinf(t1):
        last = f.values[-1]
        if last != 0.0:
            return math.copysign(math.inf, last), math.inf
        i1, i2 = _tabulated_integrals(f, t0, max(t0, f.times[-1]))
        return i1, i2
    # split at the sample times so every Simpson panel sees a smooth piece
    knots = [t0] + [t for t in f.times if t0 < t < t1] + [t1]
    width = max(t1 - t0, 1e-300)
    budget = [0]
    i1 = i2 = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        share = QUAD_TOL * (hi - lo) / width
        i1 += _adaptive_simpson(lambda s: float(np.interp(s, f.times, f.values)), lo, hi, share, budget)
        i2 += _adaptive_simpson(lambda s: float(np.interp(s, f.times, f.values)) ** 2, lo, hi, share, budget)
    return i1, i2


def antiderivatives(f: CoefficientFn, t0: float, t1: float) -> tuple[float, float]:
    """Return ``(int_t0^t1 f ds, int_t0^t1 f^2 ds)``.

    Closed forms are used for the ``const``, ``exp`` and ``pow`` kinds;
    tabulated coefficients go through adaptive Simpson quadrature with
    absolute tolerance ``1e-12``.  ``t1 = inf`` is accepted and yields
    ``+-inf`` for divergent integrals.

    Raises
    ------
    QuadratureFailure
        If the quadrature needs more than ``10**6`` function evaluations.
    """
    t0, t1 = float(t0), float(t1)
    if not t0 <= t1:
        raise ValueError(f"need t0 <= t1, got [{t0}, {t1}]")
    if t0 == t1:
        return 0.0, 0.0
    if f.kind == "const":
        if math.isinf(t1):
            return (math.copysign(math.inf, f.a) if f.a else 0.0), (math.inf if f.a else 0.0)
        return f.a * (t1 - t0), f.a * f.a * (t1 - t0)
    if f.kind == "exp":
        return _exp_integral(f.a, f.rate, t0, t1), _exp_integral(f.a * f.a, 2.0 * f.rate, t0, t1)
    if f.kind == "pow":
        return _pow_integral(f.a, f.rate, t0, t1), _pow_integral(f.a * f.a, 2.0 * f.rate, t0, t1)
    return _tabulated_integrals(f, t0, t1)


def integral_to_infinity(f: CoefficientFn, squared: bool = False) -> float:
    """``int_0^inf f`` (or ``f^2``), decided symbolically per kind; may be ``+-inf``."""
    i1, i2 = antiderivatives(f, 0.0, math.inf)
    return i2 if squared else i1


def limit_at_infinity(f: CoefficientFn) -> float:
    """``lim_{t -> inf} f(t)``."""
    if f.kind == "const":
        return f.a
    if f.kind == "exp":
        return 0.0
    if f.kind == "pow":
        return f.a if f.rate == 0 else 0.0
    return f.values[-1]


# -- the eta process ---------------------------------------------------------

@dataclass(frozen=True)
class EtaState:
    """Accumulated integrals defining ``eta(t) = exp(int(gamma - alpha^2/2) + int alpha dbeta)``."""

    t: float = 0.0
    int_gamma: float = 0.0
    int_alpha2: float = 0.0
    int_alpha_dbeta: float = 0.0

    @property
    def log_eta(self) -> float:
        return self.int_gamma - 0.5 * self.int_alpha2 + self.int_alpha_dbeta

    @property
    def eta(self) -> float:
        return math.exp(self.log_eta)

    def advanced(self, t1, d_gamma, d_alpha2, d_alpha_dbeta) -> "EtaState":
        return EtaState(t1, self.int_gamma + d_gamma, self.int_alpha2 + d_alpha2,
                        self.int_alpha_dbeta + d_alpha_dbeta)


class RngStream:
    """Counter-based normal stream (Philox keyed by ``seed``).

    Two streams with the same seed produce the same draws regardless of
    which process or thread consumes them.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    @classmethod
    def for_path(cls, base_seed: int, k: int) -> "RngStream":
        return cls(int(base_seed) ^ int(k))

    @property
    def counter(self) -> int:
        """Philox block counter; advances as normals are consumed."""
        return int(self._gen.bit_generator.state["state"]["counter"][0])

    def normal(self, size=None):
        return self._gen.standard_normal(size)


@dataclass(frozen=True)
class IntervalIntegrals:
    """Deterministic integrals of the coefficients over one interval."""

    t0: float
    t1: float
    int_gamma: float
    int_alpha: float
    int_alpha2: float

    @classmethod
    def of(cls, gamma: CoefficientFn, alpha: CoefficientFn, t0: float, t1: float) -> "IntervalIntegrals":
        g1, _ = antiderivatives(gamma, t0, t1)
        a1, a2 = antiderivatives(alpha, t0, t1)
        return cls(float(t0), float(t1), g1, a1, a2)

    def wiener_integral(self, z1):
        """``int alpha dbeta`` realised from a standard normal ``z1``."""
        return math.sqrt(self.int_alpha2) * z1

    def brownian_increment(self, z1, z2):
        """``beta(t1) - beta(t0)`` jointly distributed with :meth:`wiener_integral`.

        ``Cov(int alpha dbeta, dbeta) = int alpha``, so the increment is the
        regression on ``z1`` plus an independent residual from ``z2``.
        """
        h = self.t1 - self.t0
        if self.int_alpha2 <= 0.0:
            return math.sqrt(h) * z2
        s = math.sqrt(self.int_alpha2)
        rho = self.int_alpha / s
        resid = max(h - rho * rho, 0.0)
        return rho * z1 + math.sqrt(resid) * z2

    def log_factor(self, z1):
        return self.int_gamma - 0.5 * self.int_alpha2 + self.wiener_integral(z1)


def sample_eta_increment(gamma: CoefficientFn, alpha: CoefficientFn, t0: float, t1: float,
                         rng: RngStream) -> tuple[float, float]:
    """Draw the exact multiplier of the linear flow over ``[t0, t1]``.

    Returns ``(eta_factor, dbeta_int)`` with ``dbeta_int = sqrt(int alpha^2) Z``
    and ``eta_factor = exp(int gamma - int alpha^2 / 2 + dbeta_int)``.  One
    normal is consumed per call.
    """
    ints = IntervalIntegrals.of(gamma, alpha, t0, t1)
    z = float(rng.normal())
    dbeta_int = ints.wiener_integral(z)
    return math.exp(ints.int_gamma - 0.5 * ints.int_alpha2 + dbeta_int), dbeta_int


def stoch_step(w: Field, eta_factor: float) -> Field:
    """Multiply every entry of ``w`` by ``eta_factor > 0``."""
    if not eta_factor > 0 or not math.isfinite(eta_factor):
        raise ValueError(f"eta factor must be positive and finite, got {eta_factor}")
    return w.with_values(w.values * eta_factor)


def eta_moment(gamma: CoefficientFn, alpha: CoefficientFn, t: float, p: float) -> float:
    """Closed-form ``E eta(t)^p = exp(p int(gamma - alpha^2/2) + p^2/2 int alpha^2)``; any real ``p``."""
    if not t >= 0:
        raise ValueError("t must be non-negative")
    g, _ = antiderivatives(gamma, 0.0, t)
    _, a2 = antiderivatives(alpha, 0.0, t)
    return math.exp(p * (g - 0.5 * a2) + 0.5 * p * p * a2)
