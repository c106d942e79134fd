import math

import numpy as np
import pytest

from dwlab import damping, modeode, resonance
from dwlab.modeode import IntegratorConfig, OutputGrid, integrate_polar
from dwlab.resonance import (
    build_resonant,
    measure_resonant_decay,
    verify_limit_B,
    verify_theta_equals_eta,
)


class TestConstruction:
    def test_initial_value(self, resonant_14_dyads):
        # eta(t0) = pi/2 makes cos(2 eta) = -1, so b(t0) = (a - r)/t0
        assert resonant_14_dyads.b(1.0) == pytest.approx(0.5, rel=1e-12)

    def test_vanishing_oscillation_reduces_to_power_law(self):
        rd = build_resonant(1.0, 1e-12, 1.0, 1.0, t_end=1e3)
        t = np.geomspace(1.0, 1e3, 512)
        assert np.max(np.abs(rd.b(t) * t - 1.0)) <= 1e-10

    def test_pinching_on_dense_grid(self, resonant_14_dyads):
        rd = resonant_14_dyads
        t = np.geomspace(rd.t0, rd.t_end, 100_000)
        tb = t * rd.b(t)
        assert tb.min() >= 0.5 - 1e-9
        assert tb.max() <= 1.5 + 1e-9

    def test_drift_growth_bounded_by_integrated_envelope(self, resonant_14_dyads):
        # |eta(t) - lam t - (eta(t0) - lam t0)| <= int (a+r)/(2s) = 0.75 log t
        rd = resonant_14_dyads
        t = np.geomspace(1.0, 1e4, 4096)
        drift0 = 0.5 * math.pi - rd.lambda_star * rd.t0
        dev = np.abs(rd.drift(t) - drift0)
        assert np.all(dev <= 0.75 * np.log(t) + 1e-9)

    def test_interpolation_matches_ode_solution(self):
        # re-solving on a shifted window must agree with the stored table
        rd = build_resonant(1.0, 0.5, 1.0, 1.0, t_end=64.0)
        rd2 = build_resonant(1.0, 0.5, 1.0, 1.0, t_end=64.0,
                             cfg=IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14))
        t = np.linspace(1.0, 64.0, 2048)
        assert np.max(np.abs(rd.eta(t) - rd2.eta(t))) <= 1e-7

    def test_hypothesis_validation(self):
        with pytest.raises(ValueError):
            build_resonant(1.0, 2.0, 1.0)
        with pytest.raises(ValueError):
            build_resonant(1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            build_resonant(1.0, 0.5, -1.0)

    def test_requests_beyond_table_rejected(self, resonant_14_dyads):
        rd = resonant_14_dyads
        with pytest.raises(ValueError, match="defined up to"):
            modeode.integrate_mode(rd.coefficient, 1.0, 0.0, 1.0, 1.0, 1e6)

    def test_serialization_round_trip(self):
        rd = build_resonant(1.0, 0.5, 1.0, 1.0, t_end=128.0)
        rebuilt = damping.from_json(rd.coefficient.to_json())
        t = np.geomspace(1.0, 128.0, 257)
        assert np.array_equal(rd.coefficient(t), rebuilt(t))


class TestPhaseIdentity:
    def test_polar_phase_tracks_construction_phase(self, resonant_14_dyads):
        rep = verify_theta_equals_eta(resonant_14_dyads)
        assert rep.passed and rep.max_abs_dev <= 1e-6

    def test_shared_initial_condition(self, resonant_14_dyads):
        rd = resonant_14_dyads
        assert rd.eta(rd.t0) == pytest.approx(0.5 * math.pi, abs=1e-13)

    def test_tiny_oscillation_still_tracks(self):
        rd = build_resonant(1.0, 1e-12, 1.0, 1.0, t_end=1e3)
        rep = verify_theta_equals_eta(rd)
        assert rep.passed


class TestLimit:
    def test_vanishing_oscillation_limit_is_one(self):
        rd = build_resonant(1.0, 1e-12, 1.0, 1.0, t_end=2.0**10)
        rep = verify_limit_B(rd, dyads=10)
        assert np.max(np.abs(rep.dyad_values - 1.0)) <= 1e-10

    def test_resonant_limit_converges(self, resonant_14_dyads):
        rep = verify_limit_B(resonant_14_dyads, dyads=14)
        assert rep.passed
        assert rep.limit_estimate > 0
        assert rep.last_diff < 1e-3

    def test_boundary_amplitude_allowed(self):
        rd = build_resonant(1.0, 1.0, 1.0, 1.0, t_end=2.0**10)
        rep = verify_limit_B(rd, dyads=10)
        assert rep.passed and math.isfinite(rep.limit_estimate)

    def test_needs_table_coverage(self):
        rd = build_resonant(1.0, 0.5, 1.0, 1.0, t_end=100.0)
        with pytest.raises(ValueError):
            verify_limit_B(rd, dyads=14)


class TestSlowDecay:
    def test_classic_parameters_hit_three_quarters(self, resonant_14_dyads):
        res = measure_resonant_decay(resonant_14_dyads)
        assert res.fit.exponent == pytest.approx(0.75, abs=0.05)

    def test_normalized_energy_stays_up(self, resonant_14_dyads):
        res = measure_resonant_decay(resonant_14_dyads)
        assert res.gamma3_estimate > 0
        assert res.later_min_ratio >= 0.9

    def test_vanishing_oscillation_full_rate(self):
        rd = build_resonant(1.0, 1e-12, 1.0, 1.0, t_end=1e4)
        res = measure_resonant_decay(rd)
        assert res.fit.exponent == pytest.approx(1.0, abs=0.05)

    def test_boundary_pair_slows_to_half_a(self):
        rd = build_resonant(2.0, 2.0, 1.0, 1.0, t_end=1e4)
        res = measure_resonant_decay(rd)
        assert res.fit.exponent == pytest.approx(1.0, abs=0.05)

    def test_contrast_with_plain_power_law(self, resonant_14_dyads, default_cfg):
        rd = resonant_14_dyads
        coef = damping.make_table1_coefficient("mt", 1.0, m=rd.a)
        grid = OutputGrid.log_spaced(points_per_decade=32)
        traj = integrate_polar(coef, rd.lambda_star, 1.0, -0.5 * math.pi, 1.0, 1e4,
                               default_cfg.with_grid(grid))
        from dwlab.analysis import fit_decay_exponent

        contrast = fit_decay_exponent(traj.t, traj.energy).exponent
        resonant = measure_resonant_decay(rd).fit.exponent
        assert contrast >= rd.a - 0.05
        assert contrast > rd.a - rd.r / 2 + 0.05
        assert resonant < contrast - 0.1


class TestExport:
    def test_eta_table_csv(self, tmp_path):
        rd = build_resonant(1.0, 0.5, 1.0, 1.0, t_end=64.0)
        path = tmp_path / "eta.csv"
        rd.export_table(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,eta,b"
        first = [float(x) for x in lines[1].split(",")]
        assert first[0] == 1.0
        assert first[1] == pytest.approx(0.5 * math.pi)
        assert first[2] == pytest.approx(0.5)
