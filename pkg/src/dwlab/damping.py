"""Catalog of time-dependent damping coefficients b(t).

All coefficients are immutable evaluation objects: closed forms or
table-backed interpolants, never sample arrays, so integrators can evaluate
them at arbitrary adaptive steps.  Each entry carries optional envelope
metadata asserting ``m_env/t <= b(t) <= M_env/t``, which downstream bound
checkers rely on.

The model catalog covers:

* the six named model coefficients (integrable tail, ``1/(t log t)``,
  ``m/t``, ``1/t^p``, ``t``, inverse-integrable tail),
* the fast-oscillation coefficient ``(a + r sin(t^alpha))/t``,
* seeded random coefficients pinched between ``m/t`` and ``M/t``,
* custom piecewise blends between two power-law envelopes (used, e.g., to
  explore coefficients pinched between ``m/t`` and ``M/t^(m-1)``).

The resonant coefficient, built from an auxiliary phase ODE, is constructed
in :mod:`dwlab.resonance` and reuses this module's representation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rk


class Kind(enum.IntEnum):
    """Coefficient families; values match the compiled evaluator's codes."""

    CONSTANT = _rk.KIND_CONSTANT
    POWER_LAW = _rk.KIND_POWER
    LOG_MODEL = _rk.KIND_LOG_OVER_T
    FAST_OSCILLATION = _rk.KIND_FAST_OSC
    PINCHED_RANDOM = _rk.KIND_BLEND_CONST
    PINCHED_RANDOM_LINEAR = _rk.KIND_BLEND_LINEAR
    RESONANT = _rk.KIND_RESONANT


class Table1Row(str, enum.Enum):
    """Named rows of the model-coefficient table."""

    INTEGRABLE_TAIL = "integrable"
    LOG = "log"
    MT = "mt"
    TP = "tp"
    LINEAR = "linear"
    INVERSE_INTEGRABLE_TAIL = "inverse"


_EMPTY = np.empty(0)


class DampingDomainError(ValueError):
    """Raised when coefficient parameters violate a declared constraint."""


@dataclass(frozen=True)
class DampingCoefficient:
    """Evaluable damping coefficient b(t) with envelope metadata.

    Evaluation is a pure, deterministic function of t, valid on
    ``[t0, t_max]`` (``t_max`` is ``inf`` for closed forms and the table end
    for table-backed coefficients).  ``envelope=(m_env, M_env)``, when
    present, asserts ``m_env/t <= b(t) <= M_env/t`` on the validity window.
    """

    kind: Kind
    params: tuple[float, ...]
    t0: float
    label: str
    envelope: tuple[float, float] | None = None
    seed: int | None = None
    knots: np.ndarray = field(default_factory=lambda: _EMPTY, repr=False)
    vals: np.ndarray = field(default_factory=lambda: _EMPTY, repr=False)
    derivs: np.ndarray = field(default_factory=lambda: _EMPTY, repr=False)
    t_max: float = math.inf
    spec: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.t0 > 0 and math.isfinite(self.t0)):
            raise DampingDomainError(f"t0 must be positive and finite, got {self.t0}")
        for a in ("knots", "vals", "derivs"):
            arr = getattr(self, a)
            if arr.flags.writeable:
                arr = np.ascontiguousarray(arr, dtype=np.float64)
                arr.setflags(write=False)
                object.__setattr__(self, a, arr)

    def __call__(self, t):
        """Vectorized evaluation; scalar in, scalar out."""
        t_arr = np.asarray(t, dtype=np.float64)
        out = self._eval_array(np.atleast_1d(t_arr))
        if t_arr.ndim == 0:
            return float(out[0])
        return out.reshape(t_arr.shape)

    def _eval_array(self, t: np.ndarray) -> np.ndarray:
        p = self.params
        k = self.kind
        if k == Kind.CONSTANT:
            return np.full_like(t, p[0])
        if k == Kind.POWER_LAW:
            return p[0] * t ** (-p[1])
        if k == Kind.LOG_MODEL:
            return p[0] / (t * np.log(t))
        if k == Kind.FAST_OSCILLATION:
            return (p[0] + p[1] * np.sin(t ** p[2])) / t
        if k in (Kind.PINCHED_RANDOM, Kind.PINCHED_RANDOM_LINEAR):
            lo = p[0] * t ** (-p[1])
            hi = p[2] * t ** (-p[3])
            idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, None)
            if k == Kind.PINCHED_RANDOM:
                w = self.vals[idx]
            else:
                w = np.interp(t, self.knots, self.vals)
            return (1.0 - w) * lo + w * hi
        if k == Kind.RESONANT:
            a, r, lam = p[0], p[1], p[2]
            drift = hermite_eval(self.knots, self.vals, self.derivs, t)
            return (a + r * np.cos(2.0 * (lam * t + drift))) / t
        raise DampingDomainError(f"unknown kind {k}")

    @property
    def rk_args(self) -> tuple:
        """(kind, params, knots, vals, derivs) for the compiled integrator."""
        return (
            int(self.kind),
            np.asarray(self.params, dtype=np.float64),
            self.knots,
            self.vals,
            self.derivs,
        )

    def breakpoints(self) -> np.ndarray:
        """Times where b has jumps or kinks; integrations restart there."""
        if self.kind in (Kind.PINCHED_RANDOM, Kind.PINCHED_RANDOM_LINEAR):
            return self.knots
        return _EMPTY

    def to_json(self) -> dict:
        """Round-trippable generating spec (tables are rebuilt, not stored)."""
        if self.spec is None:
            raise DampingDomainError(f"coefficient {self.label!r} has no serializable spec")
        return dict(self.spec)


def hermite_eval(knots, vals, derivs, t):
    """Cubic Hermite interpolation on a sorted knot table, vectorized."""
    t = np.asarray(t, dtype=np.float64)
    i = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
    x0 = knots[i]
    dx = knots[i + 1] - x0
    w = (t - x0) / dx
    w2 = w * w
    w3 = w2 * w
    return (
        (2.0 * w3 - 3.0 * w2 + 1.0) * vals[i]
        + (w3 - 2.0 * w2 + w) * dx * derivs[i]
        + (-2.0 * w3 + 3.0 * w2) * vals[i + 1]
        + (w3 - w2) * dx * derivs[i + 1]
    )


@dataclass(frozen=True)
class PinchedRandomSpec:
    """Generator spec for a random coefficient with t*b(t) pinched in [m, M].

    The same seed always reproduces the same coefficient, bit for bit.
    """

    m: float
    M: float
    segment_count: int = 100
    seed: int = 0
    scheme: str = "constant"  # "constant" | "linear"
    horizon_decades: float = 6.0

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise DampingDomainError(f"m must be positive, got {self.m}")
        if self.M < self.m:
            raise DampingDomainError(f"M must be >= m, got M={self.M} < m={self.m}")
        if self.segment_count < 1:
            raise DampingDomainError("segment_count must be a positive integer")
        if self.scheme not in ("constant", "linear"):
            raise DampingDomainError(f"unknown scheme {self.scheme!r}")


def make_constant(b0: float, t0: float = 1.0) -> DampingCoefficient:
    """b(t) = b0 >= 0."""
    if b0 < 0:
        raise DampingDomainError(f"constant damping must be >= 0, got {b0}")
    return DampingCoefficient(
        kind=Kind.CONSTANT,
        params=(float(b0),),
        t0=float(t0),
        label=f"const:{b0:g}",
        spec={"kind": "constant", "params": {"b0": float(b0)}, "t0": float(t0)},
    )


def make_power(amp: float, p: float, t0: float = 1.0, label: str | None = None,
               envelope: tuple[float, float] | None = None) -> DampingCoefficient:
    """b(t) = amp / t^p."""
    if amp < 0:
        raise DampingDomainError(f"amplitude must be >= 0, got {amp}")
    return DampingCoefficient(
        kind=Kind.POWER_LAW,
        params=(float(amp), float(p)),
        t0=float(t0),
        label=label or f"power:{amp:g}/t^{p:g}",
        envelope=envelope,
        spec={"kind": "power", "params": {"amp": float(amp), "p": float(p)}, "t0": float(t0)},
    )


def make_table1_coefficient(row: Table1Row | str, t0: float = 1.0, *,
                            m: float | None = None,
                            p: float | None = None,
                            amp: float = 1.0) -> DampingCoefficient:
    """Build one of the named model coefficients.

    Rows and their parameter constraints:

    * ``integrable``: b = amp/t^2 (finite total damping, no decay),
    * ``log``: b = amp/(t log t), requires t0 > 1,
    * ``mt``: b = m/t with m > 0 (the scale-invariant critical family),
    * ``tp``: b = amp/t^p with p in (-1, 1),
    * ``linear``: b = amp*t,
    * ``inverse``: b = amp*t^2 (finite total inverse damping, no decay).

    Raises :class:`DampingDomainError` when a parameter leaves the row's
    declared range, naming the violated constraint.
    """
    row = Table1Row(row)
    if row == Table1Row.INTEGRABLE_TAIL:
        return make_power(amp, 2.0, t0, label="integrable:1/t^2")
    if row == Table1Row.LOG:
        if t0 <= 1.0:
            raise DampingDomainError("log row requires t0 > 1 so that log(t) > 0")
        return DampingCoefficient(
            kind=Kind.LOG_MODEL,
            params=(float(amp),),
            t0=float(t0),
            label="log:1/(t log t)",
            spec={"kind": "log", "params": {"amp": float(amp)}, "t0": float(t0)},
        )
    if row == Table1Row.MT:
        if m is None or not m > 0:
            raise DampingDomainError(f"row m/t requires m > 0, got {m}")
        return make_power(m, 1.0, t0, label=f"mt:{m:g}", envelope=(m, m))
    if row == Table1Row.TP:
        if p is None or not (-1.0 < p < 1.0):
            raise DampingDomainError(f"row 1/t^p requires p in (-1, 1), got {p}")
        return make_power(amp, p, t0, label=f"tp:{p:g}")
    if row == Table1Row.LINEAR:
        return make_power(amp, -1.0, t0, label="linear:t")
    if row == Table1Row.INVERSE_INTEGRABLE_TAIL:
        return make_power(amp, -2.0, t0, label="inverse:t^2")
    raise DampingDomainError(f"unknown row {row}")


def make_fast_oscillation(a: float, r: float, alpha: float, t0: float = 1.0) -> DampingCoefficient:
    """b(t) = (a + r sin(t^alpha))/t with a > 0, 0 <= r <= a, alpha > 1."""
    if not a > 0:
        raise DampingDomainError(f"fast oscillation requires a > 0, got a={a}")
    if not (0 <= r <= a):
        raise DampingDomainError(f"fast oscillation requires 0 <= r <= a, got r={r}, a={a}")
    if not alpha > 1:
        raise DampingDomainError(f"fast oscillation requires alpha > 1, got alpha={alpha}")
    return _fast_oscillation_unchecked(a, r, alpha, t0)


def _fast_oscillation_unchecked(a, r, alpha, t0):
    # also used for the exploratory classic model with alpha = 1
    return DampingCoefficient(
        kind=Kind.FAST_OSCILLATION,
        params=(float(a), float(r), float(alpha)),
        t0=float(t0),
        label=f"fastosc:a={a:g},r={r:g},alpha={alpha:g}",
        envelope=(a - r, a + r),
        spec={
            "kind": "fastosc",
            "params": {"a": float(a), "r": float(r), "alpha": float(alpha)},
            "t0": float(t0),
        },
    )


def make_pinched_random(spec: PinchedRandomSpec, t0: float = 1.0) -> DampingCoefficient:
    """Seeded random coefficient b(t) = c(t)/t with c piecewise in [m, M].

    Segment breakpoints are log-uniform over ``[t0, t0*10^horizon_decades]``
    because decay behavior is governed by log-time structure; the last value
    is held beyond the final breakpoint so b is defined on all of
    ``[t0, inf)``.
    """
    rng = np.random.default_rng(spec.seed)
    inner = np.sort(rng.uniform(0.0, spec.horizon_decades, spec.segment_count - 1)) if spec.segment_count > 1 else np.empty(0)
    knots = t0 * 10.0 ** np.concatenate(([0.0], inner))
    nvals = spec.segment_count if spec.scheme == "constant" else spec.segment_count + 1
    c = rng.uniform(spec.m, spec.M, nvals)
    # weights in [0, 1] against the (m/t, M/t) envelope pair
    if spec.M > spec.m:
        w = (c - spec.m) / (spec.M - spec.m)
    else:
        w = np.zeros_like(c)
    if spec.scheme == "linear":
        knots = np.concatenate((knots, [t0 * 10.0 ** spec.horizon_decades]))
    kind = Kind.PINCHED_RANDOM if spec.scheme == "constant" else Kind.PINCHED_RANDOM_LINEAR
    return DampingCoefficient(
        kind=kind,
        params=(spec.m, 1.0, spec.M, 1.0),
        t0=float(t0),
        label=f"pinched:m={spec.m:g},M={spec.M:g},seed={spec.seed}",
        envelope=(spec.m, spec.M),
        seed=spec.seed,
        knots=knots,
        vals=w,
        spec={
            "kind": "pinched",
            "params": {
                "m": spec.m,
                "M": spec.M,
                "segment_count": spec.segment_count,
                "scheme": spec.scheme,
                "horizon_decades": spec.horizon_decades,
            },
            "t0": float(t0),
            "seed": spec.seed,
        },
    )


def make_custom_blend(lo_amp: float, lo_p: float, hi_amp: float, hi_p: float,
                      knots: np.ndarray, weights: np.ndarray, t0: float = 1.0,
                      scheme: str = "constant", label: str = "custom") -> DampingCoefficient:
    """Piecewise blend b = (1-w(t))*lo_amp/t^lo_p + w(t)*hi_amp/t^hi_p.

    Weights must lie in [0, 1]; the blend then stays pinched between the two
    power-law envelopes.  This is the escape hatch for user-defined piecewise
    coefficients, including envelopes like (m/t, M/t^(m-1)).
    """
    knots = np.asarray(knots, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0) or np.any(weights > 1):
        raise DampingDomainError("blend weights must lie in [0, 1]")
    if np.any(np.diff(knots) <= 0):
        raise DampingDomainError("blend knots must be strictly increasing")
    expected = len(knots) if scheme == "linear" else len(knots)
    if len(weights) != expected:
        raise DampingDomainError(
            f"need one weight per knot ({expected}), got {len(weights)}"
        )
    kind = Kind.PINCHED_RANDOM if scheme == "constant" else Kind.PINCHED_RANDOM_LINEAR
    return DampingCoefficient(
        kind=kind,
        params=(float(lo_amp), float(lo_p), float(hi_amp), float(hi_p)),
        t0=float(t0),
        label=label,
        knots=knots,
        vals=weights,
        spec={
            "kind": "custom",
            "params": {
                "lo_amp": float(lo_amp),
                "lo_p": float(lo_p),
                "hi_amp": float(hi_amp),
                "hi_p": float(hi_p),
                "knots": [float(x) for x in knots],
                "weights": [float(x) for x in weights],
                "scheme": scheme,
            },
            "t0": float(t0),
        },
    )


def envelope_extrema(coef: DampingCoefficient, t_lo: float, t_hi: float,
                     n: int = 100_000) -> tuple[float, float]:
    """(min, max) of t*b(t) on a log-spaced grid; the envelope check primitive."""
    t = np.geomspace(t_lo, t_hi, n)
    tb = t * coef(t)
    return float(tb.min()), float(tb.max())


def from_json(obj: dict) -> DampingCoefficient:
    """Rebuild a coefficient from its generating spec (inverse of to_json)."""
    kind = obj["kind"]
    p = obj.get("params", {})
    t0 = float(obj.get("t0", 1.0))
    if kind == "constant":
        return make_constant(p["b0"], t0)
    if kind == "power":
        return make_power(p["amp"], p["p"], t0)
    if kind == "log":
        return make_table1_coefficient(Table1Row.LOG, t0, amp=p.get("amp", 1.0))
    if kind == "fastosc":
        return make_fast_oscillation(p["a"], p["r"], p["alpha"], t0)
    if kind == "pinched":
        spec = PinchedRandomSpec(
            m=p["m"],
            M=p["M"],
            segment_count=int(p.get("segment_count", 100)),
            seed=int(obj.get("seed", 0)),
            scheme=p.get("scheme", "constant"),
            horizon_decades=float(p.get("horizon_decades", 6.0)),
        )
        return make_pinched_random(spec, t0)
    if kind == "custom":
        return make_custom_blend(
            p["lo_amp"], p["lo_p"], p["hi_amp"], p["hi_p"],
            np.asarray(p["knots"]), np.asarray(p["weights"]), t0,
            scheme=p.get("scheme", "constant"),
        )
    if kind == "resonant":
        from . import resonance

        rd = resonance.build_resonant(
            p["a"], p["r"], p["lambda_star"], t0, p.get("t_end", 1e6 * t0)
        )
        return rd.coefficient
    raise DampingDomainError(f"unknown coefficient kind {kind!r}")


def catalog(t0: float = 1.0) -> list[DampingCoefficient]:
    """The standard coefficient catalog used by equivalence sweeps.

    One representative per family: the six model rows, a fast-oscillation
    entry, and a seeded pinched-random entry.
    """
    return [
        make_table1_coefficient(Table1Row.INTEGRABLE_TAIL, t0),
        make_table1_coefficient(Table1Row.LOG, max(t0, math.e)),
        make_table1_coefficient(Table1Row.MT, t0, m=1.0),
        make_table1_coefficient(Table1Row.MT, t0, m=3.0),
        make_table1_coefficient(Table1Row.TP, t0, p=0.5),
        make_table1_coefficient(Table1Row.LINEAR, t0),
        make_table1_coefficient(Table1Row.INVERSE_INTEGRABLE_TAIL, t0),
        make_fast_oscillation(2.0, 1.0, 1.5, t0),
        make_pinched_random(PinchedRandomSpec(m=0.5, M=1.5, seed=42), t0),
    ]
