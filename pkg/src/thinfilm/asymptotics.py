"""Long-time predictors computed from the coefficients alone.

:func:`classify` applies the Khasminskii criteria for almost sure stability
of the scalar linear SDE ``dX = gamma X dt + alpha X dbeta`` obeyed by the
mass, and the drift condition under which the film converges to its
rescaled mean.  The remaining functions give closed-form moment curves that
bound the ensemble means of mass squared, energy and ``int u^(2-n)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import json
import math

from .stochstep import CoefficientFn, antiderivatives, integral_to_infinity, limit_at_infinity

REGIMES = ("as_stable_i", "as_stable_ii", "bounded_regime", "inconclusive")
LADDER = (10.0, 1e2, 1e3, 1e4)
TAIL = 2          # limsup estimate uses the last TAIL ladder points
MARGIN = 0.1      # required gap below -1


@dataclass
class StabilityVerdict:
    """Regime label plus the numbers it was decided from.

    ``limsup_ratio`` is ``None`` unless ``int alpha^2`` diverges;
    ``drift_limit`` is ``lim (2 gamma + alpha^2)`` when it exists.
    """

    regime: str
    int_alpha2: float
    int_gamma: float
    limsup_ratio: float | None = None
    drift_limit: float | None = None
    ratio_ladder: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "as_stable_i" and not self.int_alpha2 < math.inf:
            raise ValueError("as_stable_i requires a finite int alpha^2")
        if self.regime == "as_stable_ii" and self.int_alpha2 != math.inf:
            raise ValueError("as_stable_ii requires a divergent int alpha^2")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("int_alpha2", "int_gamma", "limsup_ratio", "drift_limit"):
            d[k] = _encode(d[k])
        d["ratio_ladder"] = [[t, _encode(r)] for t, r in self.ratio_ladder]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityVerdict":
        d = dict(d)
        for k in ("int_alpha2", "int_gamma", "limsup_ratio", "drift_limit"):
            d[k] = _decode(d.get(k))
        d["ratio_ladder"] = [(t, _decode(r)) for t, r in d.get("ratio_ladder", [])]
        return cls(**d)


def _encode(x):
    """JSON has no infinities; spell them out."""
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode(x):
    if x is None or isinstance(x, (int, float)):
        return x
    return float(x)


def khasminskii_ratio(gamma: CoefficientFn, alpha: CoefficientFn, t: float) -> float | None:
    """``int_0^t (gamma - alpha^2/2) / sqrt(2 A ln ln A)`` with ``A = int_0^t alpha^2``.

    ``None`` where ``ln ln A`` is not positive (``A <= e``).
    """
    g, _ = antiderivatives(gamma, 0.0, t)
    _, a2 = antiderivatives(alpha, 0.0, t)
    if not a2 > math.e:
        return None
    return (g - 0.5 * a2) / math.sqrt(2.0 * a2 * math.log(math.log(a2)))


def classify(gamma: CoefficientFn, alpha: CoefficientFn, horizon: float = 1e4) -> StabilityVerdict:
    """Predict the long-time regime of the stochastic film from ``(gamma, alpha)``.

    * ``int alpha^2 < inf`` and ``int gamma = -inf``: ``as_stable_i``.
    * ``int alpha^2 = inf``: the ratio of :func:`khasminskii_ratio` is
      evaluated on the ladder ``10, 10^2, 10^3, 10^4`` (capped at
      ``horizon``); its largest value over the last two rungs estimates the
      limsup, and ``as_stable_ii`` needs an estimate below ``-1.1``.
    * both integrals finite and ``2 gamma + alpha^2 -> 0``: ``bounded_regime``.
    * anything else: ``inconclusive``.

    Divergence is decided per coefficient kind, not by quadrature.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    a2 = integral_to_infinity(alpha, squared=True)
    g = integral_to_infinity(gamma)
    notes = []
    try:
        drift = 2.0 * limit_at_infinity(gamma) + limit_at_infinity(alpha) ** 2
    except (OverflowError, ValueError):
        drift = None

    if a2 < math.inf:
        if g == -math.inf:
            notes.append("stability condition uses int gamma = -inf; decay of the mean mass "
                         "forces the drift integral to -inf, so a printed '= +inf' is read as '-inf'")
            return StabilityVerdict("as_stable_i", a2, g, None, drift, [], notes)
        if math.isfinite(g) and drift == 0.0:
            return StabilityVerdict("bounded_regime", a2, g, None, drift, [], notes)
        if g == math.inf:
            notes.append("int gamma = +inf with finite int alpha^2: mass grows almost surely")
        return StabilityVerdict("inconclusive", a2, g, None, drift, [], notes)

    ladder = [t for t in LADDER if t <= horizon] or [float(horizon)]
    values = [(t, khasminskii_ratio(gamma, alpha, t)) for t in ladder]
    tail = [r for _, r in values[-TAIL:] if r is not None]
    estimate = max(tail) if tail else None
    if estimate is None:
        notes.append("int alpha^2 stays below e on the ladder; ratio undefined")
    if estimate is not None and estimate < -1.0 - MARGIN:
        return StabilityVerdict("as_stable_ii", a2, g, estimate, drift, values, notes)
    return StabilityVerdict("inconclusive", a2, g, estimate, drift, values, notes)


def _integral_2g_a2(gamma, alpha, t):
    g, _ = antiderivatives(gamma, 0.0, t)
    _, a2 = antiderivatives(alpha, 0.0, t)
    return g, a2


def mass_moment2(gamma: CoefficientFn, alpha: CoefficientFn, u0_mass: float, t: float) -> float:
    """``E (int u)^2 = m0^2 exp(int_0^t (2 gamma + alpha^2))``."""
    g, a2 = _integral_2g_a2(gamma, alpha, t)
    return u0_mass * u0_mass * math.exp(2.0 * g + a2)


def energy_bound(gamma: CoefficientFn, alpha: CoefficientFn, energy0: float, t: float) -> float:
    """Mean of the energy comparison process, ``energy0 exp(int_0^t (2 gamma + alpha^2))``."""
    g, a2 = _integral_2g_a2(gamma, alpha, t)
    return energy0 * math.exp(2.0 * g + a2)


def entropy_bound(gamma: CoefficientFn, alpha: CoefficientFn, n: float, entropy0: float, t: float) -> float:
    """``entropy0 exp(int_0^t [(2-n) gamma + (1-n)(2-n)/2 alpha^2])`` for ``n > 2``.

    ``entropy0`` is ``int u0^(2-n)``.
    """
    if not n > 2:
        raise ValueError("entropy bound needs n > 2")
    g, a2 = _integral_2g_a2(gamma, alpha, t)
    return entropy0 * math.exp((2.0 - n) * g + 0.5 * (1.0 - n) * (2.0 - n) * a2)
