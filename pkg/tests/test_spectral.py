import json
import math

import numpy as np
import pytest

from dwlab import analysis, damping, spectral
from dwlab.modeode import IntegratorConfig
from dwlab.spectral import (
    InitialData,
    SpectralModel,
    build_resonant_pde_data,
    energy_operator_norm,
    synthesize_energy,
)


@pytest.fixture(scope="module")
def fast_cfg():
    return IntegratorConfig(rel_tol=1e-8, abs_tol=1e-12)


class TestSpectralModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            SpectralModel(np.array([]), np.array([]))
        with pytest.raises(ValueError):
            SpectralModel(np.array([2.0, 1.0]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            SpectralModel(np.array([1.0]), np.array([0.0]))

    def test_coercivity_flag(self):
        assert SpectralModel(np.array([1.0, 2.0]), np.array([1.0, 1.0])).coercive
        assert not SpectralModel(np.array([0.0, 2.0]), np.array([1.0, 1.0])).coercive

    def test_json_round_trip(self):
        model = SpectralModel.log_spaced(n=5, lo=0.1, hi=10.0)
        again = SpectralModel.from_json(json.loads(json.dumps(model.to_json())))
        assert np.array_equal(model.lambdas, again.lambdas)
        assert np.array_equal(model.weights, again.weights)

    def test_from_json_sorts_modes(self):
        obj = {"modes": [{"lambda": 2.0, "weight": 1.0}, {"lambda": 1.0, "weight": 3.0}]}
        model = SpectralModel.from_json(obj)
        assert list(model.lambdas) == [1.0, 2.0]
        assert list(model.weights) == [3.0, 1.0]

    def test_empty_model_rejected(self):
        with pytest.raises(ValueError):
            SpectralModel.from_json({"modes": []})


class TestSynthesizeEnergy:
    def test_single_mode_conservation(self, fast_cfg):
        model = SpectralModel(np.array([1.0]), np.array([1.0]))
        data = InitialData(np.array([0.0]), np.array([1.0]))
        coef = damping.make_constant(0.0)
        e = synthesize_energy(model, data, coef, np.geomspace(1, 100, 17), fast_cfg)
        assert np.allclose(e, 1.0, atol=1e-7)

    def test_sum_linearity_single_support(self, fast_cfg):
        model = SpectralModel(np.array([0.5, 2.0]), np.array([1.0, 3.0]))
        coef = damping.make_table1_coefficient("mt", 1.0, m=1.0)
        t = np.geomspace(1, 1e3, 33)
        both = synthesize_energy(
            model, InitialData(np.array([0.0, 0.3]), np.array([0.0, 0.8])), coef, t, fast_cfg
        )
        single_model = SpectralModel(np.array([2.0]), np.array([3.0]))
        single = synthesize_energy(
            single_model, InitialData(np.array([0.3]), np.array([0.8])), coef, t, fast_cfg
        )
        assert np.allclose(both, single, rtol=1e-10)

    def test_low_frequency_data_effective_rate(self, fast_cfg):
        # strong damping 3/t with data on low modes decays at the saturated
        # rate 2 while the frequency grid resolves the sup (t <= 1/lambda_min)
        model = SpectralModel.log_spaced(n=16, lo=1e-3, hi=10.0)
        v0 = np.where(model.lambdas <= 0.1, 1.0, 0.0)
        data = InitialData(np.zeros(16), v0)
        coef = damping.make_table1_coefficient("mt", 1.0, m=3.0)
        t = np.geomspace(1.0, 1e3, 65)
        e = synthesize_energy(model, data, coef, t, fast_cfg)
        fit = analysis.fit_decay_exponent(t, e)
        assert fit.exponent == pytest.approx(2.0, abs=0.2)

    def test_dimension_mismatch(self, fast_cfg):
        model = SpectralModel(np.array([1.0]), np.array([1.0]))
        data = InitialData(np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            synthesize_energy(model, data, damping.make_constant(0.0), [1.0, 2.0], fast_cfg)


class TestEnergyOperatorNorm:
    def test_identity_at_start(self, fast_cfg):
        model = SpectralModel.log_spaced(n=8, lo=0.1, hi=10.0)
        coef = damping.make_table1_coefficient("mt", 1.0, m=1.0)
        norm = energy_operator_norm(model, coef, np.array([1.0, 2.0]), fast_cfg)
        assert norm[0] == pytest.approx(1.0, rel=1e-12)

    def test_undamped_norm_constant(self, fast_cfg):
        model = SpectralModel.log_spaced(n=6, lo=0.5, hi=5.0)
        coef = damping.make_constant(0.0)
        norm = energy_operator_norm(model, coef, np.geomspace(1, 100, 9), fast_cfg)
        assert np.allclose(norm, 1.0, atol=1e-7)

    def test_effective_rate_saturates_at_two(self, fast_cfg):
        model = spectral.SpectralModel.log_spaced(n=33, lo=1e-3, hi=10.0)
        coef = damping.make_table1_coefficient("mt", 1.0, m=3.0)
        t = np.geomspace(1.0, 1e3, 65)
        norm = energy_operator_norm(model, coef, t, fast_cfg)
        fit = analysis.fit_decay_exponent(t, norm)
        assert fit.exponent == pytest.approx(2.0, abs=0.1)

    def test_norm_dominates_random_unit_data(self, fast_cfg):
        model = SpectralModel.log_spaced(n=10, lo=0.05, hi=5.0)
        coef = damping.make_fast_oscillation(1.0, 0.5, 1.5, 1.0)
        t = np.geomspace(1.0, 300.0, 17)
        norm = energy_operator_norm(model, coef, t, fast_cfg)
        rng = np.random.default_rng(2)
        for _ in range(5):
            u0 = rng.normal(size=10)
            v0 = rng.normal(size=10)
            data = InitialData(u0, v0)
            scale = math.sqrt(data.constraint_norm_sq(model))
            data = InitialData(u0 / scale, v0 / scale)
            e = synthesize_energy(model, data, coef, t, fast_cfg)
            assert np.all(e <= norm * (1.0 + 1e-9))

    def test_coercive_modes_keep_hyperbolic_rate(self, fast_cfg):
        from dwlab.modeode import batched_mode_energies

        lams = np.geomspace(1.0, 10.0, 6)
        t = np.geomspace(1.0, 1e3, 97)
        for m in (1.0, 3.0):
            coef = damping.make_table1_coefficient("mt", 1.0, m=m)
            energies = batched_mode_energies(coef, lams, np.zeros(6), np.ones(6), t, 1.0, fast_cfg)
            for j in range(len(lams)):
                fit = analysis.fit_decay_exponent(t, energies[:, j])
                assert fit.exponent >= m - 0.05, (m, lams[j])


class TestResonantPdeData:
    def test_single_mode_band(self):
        model = SpectralModel(np.array([0.5, 1.0, 2.0]), np.array([1.0, 2.0, 1.0]))
        data = build_resonant_pde_data(model, 1.0, 0.1)
        assert data.v0[0] == 0.0 and data.v0[2] == 0.0
        assert data.v0[1] == pytest.approx(1.0 / math.sqrt(2.0))
        assert np.all(data.u0 == 0.0)

    def test_uniform_share_across_band(self):
        model = SpectralModel(np.array([0.9, 1.0, 1.1]), np.array([1.0, 1.0, 1.0]))
        data = build_resonant_pde_data(model, 1.0, 0.2)
        assert np.allclose(data.v0, 1.0 / math.sqrt(3.0))

    def test_constraint_norm_is_one(self):
        model = SpectralModel.log_spaced(n=12, lo=0.1, hi=10.0)
        data = build_resonant_pde_data(model, 1.0, 0.5)
        assert data.constraint_norm_sq(model) == pytest.approx(1.0, rel=1e-12)

    def test_empty_band_rejected(self):
        model = SpectralModel(np.array([10.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            build_resonant_pde_data(model, 1.0, 0.5)


class TestTheoremDomination:
    def test_general_bound_pde(self, fast_cfg):
        coef = damping.make_pinched_random(
            damping.PinchedRandomSpec(m=1.0, M=3.0, seed=5), 1.0
        )
        model = SpectralModel.log_spaced(n=8, lo=0.1, hi=10.0)
        rng = np.random.default_rng(3)
        u0, v0 = rng.normal(size=8), rng.normal(size=8)
        data = InitialData(u0, v0)
        s = math.sqrt(data.constraint_norm_sq(model))
        data = InitialData(u0 / s, v0 / s)
        rep = analysis.verify_pde_general(coef, model, data,
                                          np.geomspace(1, 1e3, 33), fast_cfg)
        assert rep.passed

    def test_fast_bound_pde(self, fast_cfg):
        model = SpectralModel.log_spaced(n=8, lo=0.1, hi=10.0)
        rng = np.random.default_rng(4)
        u0, v0 = rng.normal(size=8), rng.normal(size=8)
        data = InitialData(u0, v0)
        s = math.sqrt(data.constraint_norm_sq(model))
        data = InitialData(u0 / s, v0 / s)
        rep = analysis.verify_pde_fast(1.0, 1.0, 2.0, model, data, 1.0,
                                       np.geomspace(1, 300, 33), fast_cfg)
        assert rep.passed
