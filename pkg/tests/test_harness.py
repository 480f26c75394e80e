import math

import numpy as np
import pytest

import fdrelay.harness as harness
from fdrelay.channel import Vec3
from fdrelay.harness import (
    MIN_GROUND_SEPARATION,
    OutputRow,
    Scenario,
    SweepSpec,
    TrialResult,
    _rng,
    _sample_dn,
    aggregate,
    apply_misalignment,
    apply_sweep_value,
    dbm_to_watts,
    run_sweep,
    run_trial,
    run_trials,
)

FAST = Scenario(dn_rule="fixed", trials=4, master_seed=7)


class TestScenario:
    def test_rule_validation(self):
        with pytest.raises(ValueError, match="rule"):
            Scenario(dn_rule="line")

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            Scenario(trials=0)

    def test_negative_misalignment_rejected(self):
        with pytest.raises(ValueError):
            Scenario(delta_m_deg=-1.0)

    def test_budget_and_schedule_derivation(self):
        s = Scenario()
        assert s.budget.n_s2v == 256
        assert s.budget.n_v2d == 256
        assert s.schedule.eta_floor == 3.1622776601683795e-8
        assert s.schedule.kappa == 10.0


class TestDnSampling:
    def test_fixed_rule_exact(self):
        assert _sample_dn(FAST, 3) == Vec3(400.0, 300.0, 0.0)

    def test_disk_rule_in_quadrant_within_radius(self):
        s = Scenario(dn_rule="disk", dn_radius_m=500.0)
        for i in range(50):
            dn = _sample_dn(s, i)
            assert dn.x >= 0 and dn.y >= 0 and dn.z == 0
            r = math.hypot(dn.x, dn.y)
            assert MIN_GROUND_SEPARATION <= r <= 500.0 + 1e-9

    def test_circle_rule_radius_exact(self):
        s = Scenario(dn_rule="circle", dn_radius_m=400.0)
        for i in range(20):
            dn = _sample_dn(s, i)
            assert math.hypot(dn.x, dn.y) == pytest.approx(400.0, rel=1e-12)

    def test_deterministic_per_trial(self):
        s = Scenario(dn_rule="disk")
        assert _sample_dn(s, 5) == _sample_dn(s, 5)
        assert _sample_dn(s, 5) != _sample_dn(s, 6)


class TestMisalignment:
    def _raw_links(self):
        from fdrelay.channel import EnvironmentRealization, build_links

        real = EnvironmentRealization(FAST.env, FAST.master_seed, 0)
        return build_links(
            real,
            FAST.env,
            Vec3(0, 0, 0),
            Vec3(400, 300, 0),
            Vec3(200, 150, 100),
            FAST.upa_s,
            FAST.upa_r,
            FAST.upa_t,
            FAST.upa_d,
        )

    def test_zero_delta_returns_same_object(self):
        links = self._raw_links()
        rng = _rng(FAST, 0, 33)
        assert apply_misalignment(links, 0.0, rng) is links

    def test_offsets_bounded_and_gains_kept(self):
        links = self._raw_links()
        delta = 10.0
        out = apply_misalignment(links, delta, _rng(FAST, 0, 33))
        half = math.radians(delta) / 2
        for before, after in ((links.s2v, out.s2v), (links.v2d, out.v2d)):
            assert len(before.components) == len(after.components)
            for b, a in zip(before.components, after.components):
                assert a.gain == b.gain
                assert a.is_los == b.is_los
                assert abs(a.departure.elevation - b.departure.elevation) <= half + 1e-12
                assert abs(a.arrival.elevation - b.arrival.elevation) <= half + 1e-12

    def test_untouched_channels_pass_through(self):
        links = self._raw_links()
        out = apply_misalignment(links, 5.0, _rng(FAST, 0, 33))
        assert out.si is links.si
        assert out.s2d is links.s2d
        assert out.s2v_angles == links.s2v_angles

    def test_same_rng_state_same_perturbation(self):
        links = self._raw_links()
        out1 = apply_misalignment(links, 10.0, _rng(FAST, 0, 33))
        out2 = apply_misalignment(links, 10.0, _rng(FAST, 0, 33))
        assert np.array_equal(out1.s2v.entries, out2.s2v.entries)
        assert np.array_equal(out1.v2d.entries, out2.v2d.entries)

    def test_entries_change_when_delta_positive(self):
        links = self._raw_links()
        out = apply_misalignment(links, 10.0, _rng(FAST, 0, 33))
        assert not np.array_equal(out.s2v.entries, links.s2v.entries)


class TestRunTrial:
    def test_bit_exact_repeatability(self):
        a = run_trial(FAST, 0)
        b = run_trial(FAST, 0)
        assert a.rates == b.rates
        assert a.rate_trace == b.rate_trace
        assert a.designed_position == b.designed_position
        assert a.powers_proposed == b.powers_proposed

    def test_proposed_rate_is_last_trace_entry_at_zero_delta(self):
        res = run_trial(FAST, 0)
        assert res.rates["proposed"] == res.rate_trace[-1]
        assert res.rates["despos_steer"] == res.rate_trace[0]

    def test_perturbed_evaluation_departs_from_trace(self):
        res = run_trial(Scenario(dn_rule="fixed", trials=1, master_seed=7, delta_m_deg=10.0), 0)
        assert res.rates["proposed"] != res.rate_trace[-1]

    def test_trace_lengths_consistent(self):
        res = run_trial(FAST, 0)
        k = res.iters["proposed"]
        assert len(res.rate_trace) == k + 1
        assert len(res.si_gain_trace) == k + 1
        assert len(res.power_trace) == k + 1

    def test_bounds_ordering(self):
        res = run_trial(FAST, 0)
        assert res.strict_bound_min == min(res.strict_bound_s2v, res.strict_bound_v2d)
        assert res.rates["proposed"] <= res.strict_bound_min + 1e-9

    def test_fallback_flag_via_blocked_search(self, monkeypatch):
        from fdrelay.positioning import NoLosPositionError

        def always_blocked(*args, **kwargs):
            raise NoLosPositionError("no LoS position found")

        monkeypatch.setattr(harness, "los_adjusted_position", always_blocked)
        res = run_trial(FAST, 0)
        assert res.fallback is True
        # the designed position falls back to the unadjusted optimum
        assert res.designed_position == Vec3(200.0, 150.0, 100.0)


class TestRunTrials:
    def test_results_sorted_and_complete(self):
        results = run_trials(FAST)
        assert [r.trial_index for r in results] == [0, 1, 2, 3]

    def test_explicit_count_overrides_scenario(self):
        assert len(run_trials(FAST, trials=2)) == 2

    def test_worker_pool_matches_serial(self):
        serial = run_trials(FAST)
        parallel = run_trials(Scenario(dn_rule="fixed", trials=4, master_seed=7, workers=2))
        for a, b in zip(serial, parallel):
            assert a.rates == b.rates
            assert a.rate_trace == b.rate_trace


class TestAggregate:
    def _results(self):
        return run_trials(FAST)

    def test_row_schema(self):
        rows = aggregate(self._results(), "p_s_tot_dbm", 20.0)
        assert [r.scheme for r in rows] == [
            "proposed",
            "randpos_ais",
            "despos_steer",
            "strict_bound",
        ]
        assert all(r.sweep_param == "p_s_tot_dbm" and r.sweep_value == 20.0 for r in rows)
        assert all(r.n_trials == 4 for r in rows)
        assert len({r.fallback_frac for r in rows}) == 1

    def test_mean_and_stderr_formulas(self):
        results = self._results()
        rows = aggregate(results, "x", 0.0)
        vals = [r.rates["proposed"] for r in results]
        assert rows[0].mean_rate_bps_hz == pytest.approx(np.mean(vals))
        assert rows[0].stderr == pytest.approx(np.std(vals, ddof=1) / math.sqrt(len(vals)))

    def test_iteration_counts(self):
        rows = aggregate(self._results(), "x", 0.0)
        assert rows[0].mean_iters > 0
        by_scheme = {r.scheme: r for r in rows}
        assert by_scheme["despos_steer"].mean_iters == 0.0
        assert by_scheme["strict_bound"].mean_iters == 0.0


class TestSweeps:
    def test_dbm_conversion(self):
        assert dbm_to_watts(20.0) == pytest.approx(0.1)
        assert dbm_to_watts(30.0) == pytest.approx(1.0)
        assert dbm_to_watts(-110.0) == pytest.approx(1e-14)

    def test_apply_power_sweep(self):
        s = apply_sweep_value(FAST, "p_s_tot_dbm", 10.0)
        assert s.p_s_tot == pytest.approx(0.01)
        assert s.p_v_tot == FAST.p_v_tot

    def test_apply_distance_sweep_switches_rule(self):
        s = apply_sweep_value(FAST, "distance_m", 600.0)
        assert s.dn_rule == "circle"
        assert s.dn_radius_m == 600.0

    def test_apply_array_sweep(self):
        s = apply_sweep_value(FAST, "array", 8)
        assert s.upa_s.rows == s.upa_s.cols == 8
        assert s.budget.n_s2v == 64 * 64
        with pytest.raises(ValueError):
            apply_sweep_value(FAST, "array", 2.5)

    def test_apply_misalignment_sweep(self):
        s = apply_sweep_value(FAST, "delta_m_deg", 10.0)
        assert s.delta_m_deg == 10.0

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValueError, match="sweep"):
            apply_sweep_value(FAST, "altitude", 1.0)
        with pytest.raises(ValueError, match="sweep"):
            SweepSpec(param="altitude", values=(1.0,), base=FAST)
        with pytest.raises(ValueError):
            SweepSpec(param="array", values=(), base=FAST)

    def test_run_sweep_row_layout(self):
        spec = SweepSpec(param="p_v_tot_dbm", values=(10.0, 20.0), base=FAST)
        rows = run_sweep(spec)
        assert len(rows) == 8
        assert [r.sweep_value for r in rows] == [10.0] * 4 + [20.0] * 4
        assert all(isinstance(r, OutputRow) for r in rows)
