import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dwlab import damping
from dwlab.damping import (
    DampingDomainError,
    PinchedRandomSpec,
    envelope_extrema,
    from_json,
    make_custom_blend,
    make_fast_oscillation,
    make_pinched_random,
    make_table1_coefficient,
)


class TestTable1Factory:
    def test_mt_direct_evaluation(self):
        coef = make_table1_coefficient("mt", 1.0, m=1.0)
        assert coef(2.0) == 0.5

    def test_log_model_at_e(self):
        coef = make_table1_coefficient("log", math.e)
        assert coef(math.e) == pytest.approx(1.0 / math.e, rel=1e-15)

    def test_mt_envelope_metadata(self):
        coef = make_table1_coefficient("mt", 1.0, m=3.0)
        assert coef.envelope == (3.0, 3.0)

    def test_linear_and_tails(self):
        assert make_table1_coefficient("linear", 1.0)(4.0) == 4.0
        assert make_table1_coefficient("integrable", 1.0)(2.0) == 0.25
        assert make_table1_coefficient("inverse", 1.0)(3.0) == 9.0

    @pytest.mark.parametrize(
        "row, kwargs",
        [
            ("mt", {"m": -1.0}),
            ("mt", {}),
            ("tp", {"p": 1.0}),
            ("tp", {"p": -1.0}),
            ("tp", {}),
        ],
    )
    def test_out_of_range_parameters(self, row, kwargs):
        with pytest.raises(DampingDomainError):
            make_table1_coefficient(row, 1.0, **kwargs)

    def test_log_requires_t0_above_one(self):
        with pytest.raises(DampingDomainError, match="t0 > 1"):
            make_table1_coefficient("log", 1.0)


class TestFastOscillation:
    def test_zero_amplitude_matches_power_law(self):
        osc = make_fast_oscillation(1.0, 0.0, 2.0, 1.0)
        ref = make_table1_coefficient("mt", 1.0, m=1.0)
        t = np.geomspace(1.0, 1e4, 1000)
        assert np.array_equal(osc(t), ref(t))

    def test_peak_value(self):
        # sin(t^2) = 1 at t = sqrt(pi/2)
        coef = make_fast_oscillation(1.0, 1.0, 2.0, 1.0)
        t = math.sqrt(math.pi / 2.0)
        assert coef(t) == pytest.approx(2.0 / t, rel=1e-14)

    def test_envelope_holds_on_grid(self):
        coef = make_fast_oscillation(2.0, 1.0, 1.5, 1.0)
        lo, hi = envelope_extrema(coef, 1.0, 1e4, n=100_000)
        assert lo >= 1.0 - 1e-12
        assert hi <= 3.0 + 1e-12

    @pytest.mark.parametrize("a,r,alpha", [(1, 0, 1.0), (1, 2, 2.0), (-1, 0, 2.0), (1, -0.5, 2.0)])
    def test_hypothesis_violations_rejected(self, a, r, alpha):
        with pytest.raises(DampingDomainError):
            make_fast_oscillation(a, r, alpha, 1.0)


class TestPinchedRandom:
    def test_degenerate_interval_is_power_law(self):
        coef = make_pinched_random(PinchedRandomSpec(m=1.0, M=1.0, seed=7), 1.0)
        t = np.geomspace(1.0, 1e5, 512)
        assert np.array_equal(coef(t), 1.0 / t)

    def test_same_seed_bit_identical(self):
        spec = PinchedRandomSpec(m=0.5, M=1.5, seed=42, segment_count=100)
        a = make_pinched_random(spec, 1.0)
        b = make_pinched_random(spec, 1.0)
        t = np.geomspace(1.0, 1e6, 4096)
        assert np.array_equal(a(t), b(t))

    def test_grid_scan_respects_pinch(self):
        coef = make_pinched_random(PinchedRandomSpec(m=0.5, M=1.5, seed=42), 1.0)
        lo, hi = envelope_extrema(coef, 1.0, 1e6, n=100_000)
        assert lo >= 0.5 - 1e-12
        assert hi <= 1.5 + 1e-12

    def test_invalid_interval(self):
        with pytest.raises(DampingDomainError):
            PinchedRandomSpec(m=1.5, M=0.5)

    def test_linear_scheme_stays_pinched(self):
        spec = PinchedRandomSpec(m=0.5, M=1.5, seed=3, scheme="linear")
        coef = make_pinched_random(spec, 1.0)
        lo, hi = envelope_extrema(coef, 1.0, 1e6, n=50_000)
        assert lo >= 0.5 - 1e-12 and hi <= 1.5 + 1e-12

    @settings(max_examples=25, deadline=None)
    @given(
        m=st.floats(0.1, 2.0),
        spread=st.floats(0.0, 3.0),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_envelope_soundness_property(self, m, spread, seed):
        spec = PinchedRandomSpec(m=m, M=m + spread, seed=seed, segment_count=17)
        coef = make_pinched_random(spec, 1.0)
        t = np.geomspace(1.0, 1e6, 2048)
        tb = t * coef(t)
        assert np.all(tb >= m - 1e-12)
        assert np.all(tb <= m + spread + 1e-12)


class TestCatalogInvariants:
    def test_envelope_soundness_full_grid(self, catalog):
        # every declared envelope holds on a 1e5-point log grid over [t0, 1e6 t0]
        for coef in catalog:
            if coef.envelope is None:
                continue
            m_env, M_env = coef.envelope
            lo, hi = envelope_extrema(coef, coef.t0, 1e6 * coef.t0, n=100_000)
            assert lo >= m_env - 1e-9 * max(1.0, abs(m_env)), coef.label
            assert hi <= M_env + 1e-9 * max(1.0, abs(M_env)), coef.label

    def test_evaluation_deterministic(self, catalog):
        t = np.geomspace(1.0 * math.e, 1e5, 777)
        for coef in catalog:
            assert np.array_equal(coef(t), coef(t)), coef.label

    def test_scalar_matches_vector_evaluation(self, catalog):
        for coef in catalog:
            ts = np.geomspace(coef.t0, 1e3 * coef.t0, 13)
            vec = coef(ts)
            for i, t in enumerate(ts):
                assert coef(float(t)) == vec[i], coef.label

    def test_compiled_evaluator_agrees_with_numpy(self, catalog):
        from dwlab import _rk

        for coef in catalog:
            kind, params, knots, vals, derivs = coef.rk_args
            ts = np.geomspace(coef.t0, 1e4 * coef.t0, 257)
            ref = coef(ts)
            got = np.array(
                [_rk.eval_damping(t, kind, params, knots, vals, derivs) for t in ts]
            )
            # numpy and libm trig differ by ~ulp(argument) on huge phases, so
            # compare t*b(t), whose error that rounding bounds absolutely
            assert np.max(np.abs(got - ref) * ts) <= 1e-8, coef.label


class TestCustomBlend:
    def test_weights_outside_unit_interval_rejected(self):
        with pytest.raises(DampingDomainError):
            make_custom_blend(1, 1, 2, 0.5, [1.0, 10.0], [0.5, 1.5], 1.0)

    def test_blend_stays_between_envelopes(self):
        rng = np.random.default_rng(0)
        knots = np.concatenate(([1.0], np.sort(rng.uniform(1.0, 1e3, 20))))
        w = rng.uniform(0.0, 1.0, len(knots))
        coef = make_custom_blend(1.0, 1.0, 2.0, 0.2, knots, w, 1.0)
        t = np.geomspace(1.0, 1e4, 4096)
        lo = 1.0 / t
        hi = 2.0 * t**-0.2
        b = coef(t)
        assert np.all(b >= np.minimum(lo, hi) - 1e-12)
        assert np.all(b <= np.maximum(lo, hi) + 1e-12)


class TestSerialization:
    def test_round_trip_closed_forms(self, catalog):
        t = np.geomspace(math.e, 1e4, 101)
        for coef in catalog:
            rebuilt = from_json(json.loads(json.dumps(coef.to_json())))
            assert np.array_equal(coef(t), rebuilt(t)), coef.label

    def test_round_trip_custom_blend(self):
        coef = make_custom_blend(1.0, 1.0, 2.0, 0.5, [1.0, 5.0, 50.0], [0.1, 0.9, 0.4], 1.0)
        rebuilt = from_json(coef.to_json())
        t = np.geomspace(1.0, 1e3, 101)
        assert np.array_equal(coef(t), rebuilt(t))

    def test_unknown_kind_rejected(self):
        with pytest.raises(DampingDomainError):
            from_json({"kind": "nope", "params": {}, "t0": 1.0})
