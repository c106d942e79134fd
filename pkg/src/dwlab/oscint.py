"""Quadrature of oscillating integrals and the explicit bounds they satisfy.

The integrals all have the shape trig(phase(s)) * modulation(s) / s, where the
phase advances roughly linearly and the modulation drifts slowly.  Naive
adaptive quadrature misses cancellation across periods, so the integrator
seeds panels no longer than a quarter of the locally dominant period and then
refines adaptively with an embedded Gauss-Legendre pair per panel.

Also hosts the slow-decay weight gamma(m, t0, t) = integral of (t0/s)^m and
its pointwise inequality against t0^2 (t0/t)^(mu - 2), mu = min(m, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class QuadratureError(RuntimeError):
    """Tolerance not reached within the panel budget."""

    def __init__(self, message, best_estimate, error_bound):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


class PreconditionError(ValueError):
    """A declared derivative bound failed its verification scan."""


_NODES_HI, _WEIGHTS_HI = np.polynomial.legendre.leggauss(16)
_NODES_LO, _WEIGHTS_LO = np.polynomial.legendre.leggauss(8)


def _panel_estimates(f, lo, hi):
    """Vectorized high/low Gauss-Legendre estimates for a batch of panels."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x_hi = mid[:, None] + half[:, None] * _NODES_HI[None, :]
    x_lo = mid[:, None] + half[:, None] * _NODES_LO[None, :]
    v_hi = half * (np.asarray(f(x_hi)) @ _WEIGHTS_HI)
    v_lo = half * (np.asarray(f(x_lo)) @ _WEIGHTS_LO)
    return v_hi, np.abs(v_hi - v_lo)


def _initial_edges(a, b, freq, cap=65_536):
    """Panel edges equidistributed in accumulated phase of the local frequency.

    ``freq`` is the dominant angular frequency: a positive scalar, a
    vectorized callable of t, or None for an oscillation-free integrand.
    Panels target at most half a period each, capped at ``cap`` seed panels;
    adaptive refinement supplies any resolution still missing.
    """
    if freq is None:
        return np.linspace(a, b, 9)
    if callable(freq):
        s = np.linspace(a, b, 2049)
        w = np.maximum(np.asarray(freq(s), dtype=np.float64), 0.0)
    else:
        s = np.asarray([a, b])
        w = np.asarray([float(freq), float(freq)])
    phase = np.concatenate(([0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(s))))
    n = int(min(cap, max(8, math.ceil(phase[-1] / math.pi))))
    edges = np.interp(np.linspace(0.0, phase[-1], n + 1), phase, s)
    edges[0], edges[-1] = a, b
    return np.unique(edges)


def osc_quad(f, t0: float, t: float, tol: float = 1e-9, freq_hint=None,
             max_panels: int = 2_000_000) -> float:
    """Integral of f over [t0, t] with estimated error at most tol.

    ``f`` must accept numpy arrays.  ``freq_hint`` exposes the dominant
    angular frequency so panel subdivision respects the oscillation period.
    Raises :class:`QuadratureError` with the best estimate attached when the
    budget runs out.
    """
    if t == t0:
        return 0.0
    sign = 1.0
    if t < t0:
        t0, t, sign = t, t0, -1.0
    edges = _initial_edges(t0, t, freq_hint)
    lo, hi = edges[:-1], edges[1:]
    val, err = _panel_estimates(f, lo, hi)
    for _ in range(60):
        total_err = float(err.sum())
        if total_err <= tol:
            return sign * float(val.sum())
        if len(lo) > max_panels:
            break
        # split every panel that overspends its share of the tolerance
        bad = err > tol / len(lo)
        if not bad.any():
            return sign * float(val.sum())
        mid = 0.5 * (lo[bad] + hi[bad])
        new_lo = np.concatenate((lo[~bad], lo[bad], mid))
        new_hi = np.concatenate((hi[~bad], mid, hi[bad]))
        keep_val, keep_err = val[~bad], err[~bad]
        split_val, split_err = _panel_estimates(
            f, np.concatenate((lo[bad], mid)), np.concatenate((mid, hi[bad]))
        )
        lo, hi = new_lo, new_hi
        val = np.concatenate((keep_val, split_val))
        err = np.concatenate((keep_err, split_err))
    raise QuadratureError(
        f"quadrature tolerance {tol:g} not reached on [{t0:g}, {t:g}] "
        f"({len(lo)} panels, error {float(err.sum()):g})",
        best_estimate=sign * float(val.sum()),
        error_bound=float(err.sum()),
    )


def cumulative_quad(f, times, tol: float = 1e-9, freq_hint=None) -> np.ndarray:
    """Integrals of f from times[0] to each later grid point (cumulative)."""
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    pieces = [
        osc_quad(f, times[i], times[i + 1], tol=tol, freq_hint=freq_hint)
        for i in range(len(times) - 1)
    ]
    return np.concatenate(([0.0], np.cumsum(pieces)))


@dataclass(frozen=True)
class PhaseAmplitudeSpec:
    """Phase/modulation pair with declared derivative bounds.

    ``phi0`` bounds |phi'| from below and ``Psi0`` bounds |psi'(t)| by
    Psi0/t on the window; both declarations are verified by a grid scan
    before any bound that relies on them is asserted.  ``convex_phase``
    additionally requires phi'' >= 0.
    """

    phi: object
    dphi: object
    psi: object
    dpsi: object
    phi0: float
    Psi0: float
    window: tuple[float, float]
    d2phi: object | None = None
    convex_phase: bool = True

    def validate(self, n: int = 4096) -> None:
        a, b = self.window
        t = np.geomspace(a, b, n)
        slack = 1.0 + 1e-9
        dphi = np.asarray(self.dphi(t))
        if np.any(np.abs(dphi) * slack < self.phi0):
            bad = t[np.abs(dphi) * slack < self.phi0][0]
            raise PreconditionError(
                f"|phi'({bad:g})| = {abs(float(self.dphi(bad))):g} < phi0 = {self.phi0:g}"
            )
        dpsi = np.asarray(self.dpsi(t))
        if np.any(np.abs(dpsi) > slack * self.Psi0 / t):
            bad = t[np.abs(dpsi) > slack * self.Psi0 / t][0]
            raise PreconditionError(
                f"|psi'({bad:g})| exceeds Psi0/t with Psi0 = {self.Psi0:g}"
            )
        if self.convex_phase and self.d2phi is not None:
            d2 = np.asarray(self.d2phi(t))
            if np.any(d2 < -1e-12 * np.maximum(1.0, np.abs(dphi))):
                bad = t[d2 < -1e-12 * np.maximum(1.0, np.abs(dphi))][0]
                raise PreconditionError(f"phi''({bad:g}) < 0 violates convexity")


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of checking one explicit bound over a time grid."""

    bound_name: str
    bound: float
    max_ratio: float
    worst_t: float
    passed: bool
    details: dict | None = None

    def to_json(self) -> dict:
        return {
            "bound": self.bound,
            "max_ratio": self.max_ratio,
            "worst_t": self.worst_t,
            "pass": self.passed,
        }


_TRIG = {"cos": np.cos, "sin": np.sin}


def check_lemma_int_phi_psi(spec: PhaseAmplitudeSpec, trig_pair=("cos", "sin"),
                            t_grid=None, tol: float = 1e-9) -> LemmaReport:
    """Check |int trig(phi) trig(psi) / s| <= (4 + Psi0) / (phi0 * t0).

    Holds for any cos/sin combination in the numerator when phi is convex
    with |phi'| >= phi0 and |psi'| <= Psi0/t on the window.
    """
    spec.validate()
    t0, t_hi = spec.window
    if t_grid is None:
        t_grid = np.geomspace(t0, t_hi, 64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    f1, f2 = _TRIG[trig_pair[0]], _TRIG[trig_pair[1]]

    def integrand(s):
        return f1(spec.phi(s)) * f2(spec.psi(s)) / s

    freq = lambda s: np.abs(np.asarray(spec.dphi(s)))
    times = np.concatenate(([t0], t_grid[t_grid > t0]))
    partials = cumulative_quad(integrand, times, tol=tol, freq_hint=freq)
    bound = (4.0 + spec.Psi0) / (spec.phi0 * t0)
    ratios = np.abs(partials) / bound
    i = int(np.argmax(ratios))
    return LemmaReport(
        bound_name="phase_modulation_integral",
        bound=bound,
        max_ratio=float(ratios[i]),
        worst_t=float(times[i]),
        passed=bool(ratios[i] <= 1.0),
    )


def _scan_drift_bound(h, dh, H0, t0, t_hi, n=4096):
    t = np.geomspace(t0, t_hi, n)
    viol = np.abs(np.asarray(dh(t))) > (1.0 + 1e-9) * H0 / t
    if viol.any():
        bad = t[viol][0]
        raise PreconditionError(
            f"|h'({bad:g})| = {abs(float(dh(bad))):g} exceeds H0/t with H0 = {H0:g}"
        )


def check_lemma_osc_int(h, dh, H0: float, lam: float, n: int, t0: float,
                        t_grid, dyads: int = 0, tol: float = 1e-9) -> LemmaReport:
    """Check |int cos(n lam s + n h(s)) / s| <= 2 (H0 + 4) / (lam t0).

    Requires the drift bound |h'(t)| <= H0/t, verified by scan.  With
    ``dyads`` > 0 the report also carries partial integrals at t = 2^k t0,
    whose shrinking successive differences witness convergence of the
    improper integral.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    t_hi = float(t_grid.max()) if dyads == 0 else max(t_grid.max(), t0 * 2.0**dyads)
    _scan_drift_bound(h, dh, H0, t0, t_hi)

    def integrand(s):
        return np.cos(n * lam * s + n * np.asarray(h(s))) / s

    freq = n * lam + n * H0 / t0
    times = np.concatenate(([t0], t_grid[t_grid > t0]))
    partials = cumulative_quad(integrand, times, tol=tol, freq_hint=freq)
    bound = 2.0 * (H0 + 4.0) / (lam * t0)
    ratios = np.abs(partials) / bound
    i = int(np.argmax(ratios))
    details = None
    if dyads > 0:
        dyad_times = t0 * 2.0 ** np.arange(dyads + 1)
        dyad_partials = cumulative_quad(integrand, dyad_times, tol=tol, freq_hint=freq)
        details = {
            "dyad_times": dyad_times.tolist(),
            "dyad_partials": dyad_partials.tolist(),
            "dyad_diffs": np.abs(np.diff(dyad_partials)).tolist(),
        }
    return LemmaReport(
        bound_name="oscillation_integral",
        bound=bound,
        max_ratio=float(ratios[i]),
        worst_t=float(times[i]),
        passed=bool(ratios[i] <= 1.0),
        details=details,
    )


def check_lemma_s_alpha(h, dh, H0: float, lam: float, alpha: float, t0: float,
                        t_grid, tol: float = 1e-9) -> LemmaReport:
    """Check |int sin(s^alpha) cos(2 lam s + 2 h(s)) / s| against its bound.

    The bound is 5 (H0 + 2) / (lam t0) + log(3) / (alpha - 1); the second
    term pays for the window where the combined phase s^alpha - 2 lam s is
    nearly stationary, i.e. where alpha s^(alpha-1) lies in [lam, 3 lam].
    """
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    _scan_drift_bound(h, dh, H0, t0, float(t_grid.max()))

    def integrand(s):
        return np.sin(s**alpha) * np.cos(2.0 * lam * s + 2.0 * np.asarray(h(s))) / s

    def freq(s):
        return alpha * s ** (alpha - 1.0) + 2.0 * lam + 2.0 * H0 / t0

    times = np.concatenate(([t0], t_grid[t_grid > t0]))
    partials = cumulative_quad(integrand, times, tol=tol, freq_hint=freq)
    bound = 5.0 * (H0 + 2.0) / (lam * t0) + math.log(3.0) / (alpha - 1.0)
    ratios = np.abs(partials) / bound
    i = int(np.argmax(ratios))
    t1_star = (lam / alpha) ** (1.0 / (alpha - 1.0))
    t2_star = (3.0 * lam / alpha) ** (1.0 / (alpha - 1.0))
    return LemmaReport(
        bound_name="mixed_phase_integral",
        bound=bound,
        max_ratio=float(ratios[i]),
        worst_t=float(times[i]),
        passed=bool(ratios[i] <= 1.0),
        details={"stationary_window": (t1_star, t2_star)},
    )


def gamma_fn(m: float, t0: float, t):
    """gamma(m, t0, t) = integral over [t0, t] of (t0/s)^m ds.

    Closed form t0 * expm1((1-m) log(t/t0)) / (1-m), with the logarithm
    limit at m = 1; expm1 keeps the near-critical case m ~ 1 free of
    cancellation.
    """
    if not (m > 0 and t0 > 0):
        raise ValueError(f"need m > 0 and t0 > 0, got m={m}, t0={t0}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < t0 * (1 - 1e-15)):
        raise ValueError(f"t must be >= t0 = {t0}, got min {t_arr.min()}")
    L = np.log(np.maximum(t_arr / t0, 1.0))
    if abs(1.0 - m) < 1e-14:
        out = t0 * L
    else:
        out = t0 * np.expm1((1.0 - m) * L) / (1.0 - m)
    if np.ndim(t) == 0:
        return float(out)
    return out


def check_gamma_inequality(m_grid, t0_grid, t_factor_grid) -> LemmaReport:
    """Check (t0/t)^2 gamma^2 <= t0^2 (t0/t)^mu on a parameter grid.

    ``t_factor_grid`` holds multiples of t0, so every checked t satisfies
    t >= t0 for all t0 in the grid.
    """
    m_grid = np.asarray(m_grid, dtype=np.float64)
    t0_grid = np.asarray(t0_grid, dtype=np.float64)
    fac = np.asarray(t_factor_grid, dtype=np.float64)
    if np.any(fac < 1.0):
        raise ValueError("t factors must be >= 1 so that t >= t0")
    worst = -1.0
    worst_at = (math.nan, math.nan, math.nan)
    for m in m_grid:
        mu = min(m, 2.0)
        for t0 in t0_grid:
            t = t0 * fac
            g = gamma_fn(m, t0, t)
            lhs = (t0 / t) ** 2 * g**2
            rhs = t0**2 * (t0 / t) ** mu
            ratio = lhs / rhs
            i = int(np.argmax(ratio))
            if ratio[i] > worst:
                worst = float(ratio[i])
                worst_at = (float(m), float(t0), float(t[i]))
    return LemmaReport(
        bound_name="gamma_weight_inequality",
        bound=1.0,
        max_ratio=worst,
        worst_t=worst_at[2],
        passed=bool(worst <= 1.0),
        details={"worst_m": worst_at[0], "worst_t0": worst_at[1]},
    )
