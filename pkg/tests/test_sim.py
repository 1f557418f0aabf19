import numpy as np
import pytest

from dnem.model import (
    BessSpec,
    CommunityScenario,
    DeviceUtility,
    Member,
    PriceZone,
    RateSchedule,
)
from dnem.pricing import nem_payment
from dnem.sim import (
    folded_generation,
    build_welfare_report,
    random_scenario,
    rate_ratio_sweep,
    run,
    solar_day_scenario,
)
from dnem.welfare import axiom_audit

DEV_A = DeviceUtility(2.0, 1.0, 0.0, 2.0)


def tiny_scenario(g=1.7):
    member = Member("m1", (DEV_A,), np.array([g]))
    return CommunityScenario(
        members=(member,), rates=RateSchedule.flat(0.4, 0.2, 1), horizon=1
    )


class TestRunBasics:
    def test_single_member_net_zero_interval(self):
        records, summary = run(tiny_scenario(), "dnem")
        assert len(records) == 1
        r = records[0]
        assert r.price.value == pytest.approx(0.3)
        assert r.price.zone == PriceZone.NET_ZERO_IDLE
        assert r.z_n == pytest.approx(0.0, abs=1e-9)
        assert r.per_member[0].payment == pytest.approx(0.0, abs=1e-12)
        assert summary.total_welfare == pytest.approx(1.955)

    def test_sign_based_coincides_at_single_member(self):
        records, summary = run(tiny_scenario(), "sign_based")
        assert records[0].price.value == pytest.approx(0.4)
        assert summary.total_welfare == pytest.approx(1.955)

    def test_standalone_has_no_community_price(self):
        records, summary = run(tiny_scenario(), "standalone")
        assert records[0].price is None
        assert summary.zone_histogram == {}
        assert summary.total_welfare == pytest.approx(1.955)

    def test_zero_generation_community_imports_every_interval(self):
        members = tuple(
            Member(f"m{i}", (DeviceUtility(2.0, 1.0, 0.5, 2.0),), np.zeros(4))
            for i in range(3)
        )
        sc = CommunityScenario(members=members, rates=RateSchedule.flat(0.4, 0.2, 4), horizon=4)
        records, summary = run(sc, "dnem")
        assert summary.zone_histogram == {"NetConsumption": 4}
        for r in records:
            assert r.price.value == 0.4
            for o in r.per_member:
                assert o.consumption == pytest.approx([1.6])

    def test_unknown_mechanism_rejected(self):
        with pytest.raises(ValueError, match="unknown mechanism"):
            run(tiny_scenario(), "vcg")


class TestRunInvariants:
    @pytest.mark.parametrize("seed", range(6))
    def test_interval_identity_and_neutrality(self, seed):
        sc = random_scenario(3000 + seed)
        for mechanism in ("dnem", "sign_based"):
            records, _ = run(sc, mechanism, compute_gains=False)
            for r in records:
                assert r.z_n == pytest.approx(r.d_n + r.b_n - r.g_n, abs=1e-9)
                member_sum = sum(o.net for o in r.per_member)
                assert member_sum == pytest.approx(r.z_n, abs=1e-8)
                buy = float(sc.rates.buy[r.t])
                sell = float(sc.rates.sell[r.t])
                paid = sum(o.payment for o in r.per_member)
                assert abs(paid - nem_payment(buy, sell, r.z_n)) <= 1e-6

    @pytest.mark.parametrize("seed", range(4))
    def test_axiom_audits_pass_every_interval(self, seed):
        sc = random_scenario(3100 + seed)
        gen = folded_generation(sc)
        records, _ = run(sc, "dnem", compute_gains=False)
        for r in records:
            report = axiom_audit(
                list(sc.members),
                gen[:, r.t],
                r.per_member,
                float(sc.rates.buy[r.t]),
                float(sc.rates.sell[r.t]),
            )
            assert report.passed, (r.t, report.failures())

    def test_determinism_bit_identical(self):
        sc = random_scenario(77, with_bess=True, wide_bounds=True)
        rec1, sum1 = run(sc, "dnem")
        rec2, sum2 = run(sc, "dnem")
        assert sum1 == sum2
        for a, b in zip(rec1, rec2):
            assert a.price.value == b.price.value
            assert a.soc == b.soc
            assert a.z_n == b.z_n
            for oa, ob in zip(a.per_member, b.per_member):
                assert oa.payment == ob.payment
                assert tuple(oa.consumption) == tuple(ob.consumption)

    @pytest.mark.parametrize("seed", range(10))
    def test_welfare_dominance_ordering(self, seed):
        sc = random_scenario(3300 + seed)
        welfare = {
            mech: run(sc, mech, compute_gains=False)[1].total_welfare
            for mech in ("dnem", "sign_based", "standalone")
        }
        assert welfare["dnem"] >= welfare["sign_based"] - 1e-9
        assert welfare["sign_based"] >= welfare["standalone"] - 1e-9

    def test_single_member_mechanisms_coincide(self):
        for seed in range(5):
            sc = random_scenario(3200 + seed, n_members=1, allow_central_pv=False)
            welfare = {}
            for mech in ("dnem", "sign_based", "standalone"):
                _, s = run(sc, mech, compute_gains=False)
                welfare[mech] = s.total_welfare
            assert welfare["dnem"] == pytest.approx(welfare["standalone"], abs=1e-9)
            assert welfare["sign_based"] == pytest.approx(welfare["standalone"], abs=1e-9)


class TestStorageRuns:
    def test_soc_stays_in_bounds_and_telescopes(self):
        sc = random_scenario(88, with_bess=True, wide_bounds=True, horizon=24)
        records, _ = run(sc, "dnem", compute_gains=False)
        spec = sc.bess
        soc = spec.initial_soc
        for r in records:
            delta = spec.charge_eff * max(r.b_n, 0) - max(-r.b_n, 0) / spec.discharge_eff
            soc = soc + delta
            assert r.soc == pytest.approx(soc, abs=1e-9)
            assert -1e-8 <= r.soc <= spec.capacity + 1e-8

    def test_net_zero_balance_with_storage(self):
        sc = random_scenario(89, with_bess=True, wide_bounds=True, horizon=24)
        records, _ = run(sc, "dnem", compute_gains=False)
        for r in records:
            if r.price.is_net_zero:
                assert abs(r.z_n) <= 1e-8

    def test_member_battery_shares_sum_to_dispatch(self):
        sc = random_scenario(90, with_bess=True, wide_bounds=True, horizon=12)
        records, _ = run(sc, "dnem", compute_gains=False)
        for r in records:
            share_sum = sum(o.battery for o in r.per_member)
            assert share_sum == pytest.approx(r.b_n, abs=1e-9)


class TestGainsAndSweep:
    def test_gains_are_relative_to_baselines(self):
        sc = solar_day_scenario(42)
        _, summary = run(sc, "dnem")
        _, std = run(sc, "standalone", compute_gains=False)
        expected = 100 * (summary.total_welfare - std.total_welfare) / abs(std.total_welfare)
        assert summary.welfare_gain_vs_standalone == pytest.approx(expected)
        assert summary.welfare_gain_vs_standalone >= 0

    def test_ratio_one_gain_is_zero(self):
        sc = solar_day_scenario(5, flat_buy=True)
        points = rate_ratio_sweep(sc, [1.0])
        assert points[0].welfare_gain_dnem == pytest.approx(0.0, abs=1e-9)
        assert points[0].welfare_gain_sign_based == pytest.approx(0.0, abs=1e-9)

    def test_gains_non_increasing_in_ratio(self):
        sc = solar_day_scenario(6, flat_buy=True)
        points = rate_ratio_sweep(sc, [1.0, 0.8, 0.5, 0.2])
        dn = [p.welfare_gain_dnem for p in points]
        sg = [p.welfare_gain_sign_based for p in points]
        assert all(a <= b + 1e-9 for a, b in zip(dn, dn[1:]))
        assert all(a <= b + 1e-9 for a, b in zip(sg, sg[1:]))
        for p in points:
            assert p.welfare_gain_dnem >= p.welfare_gain_sign_based - 1e-9

    def test_sweep_requires_flat_buy(self):
        sc = solar_day_scenario(7)  # time-of-use buy rate
        with pytest.raises(ValueError, match="flat buy"):
            rate_ratio_sweep(sc, [0.5])

    def test_gamma_infeasible_ratio_raises(self):
        sc = solar_day_scenario(8, flat_buy=True, with_bess=True)
        with pytest.raises(ValueError, match="infeasible"):
            rate_ratio_sweep(sc, [1.0])
        # feasible ratios still work
        points = rate_ratio_sweep(sc, [0.25])
        assert points[0].welfare_gain_dnem is not None


class TestWelfareReport:
    def test_report_fields(self):
        sc = solar_day_scenario(9)
        report = build_welfare_report(sc, "dnem")
        assert report.centralized_welfare == pytest.approx(
            report.decentralized_welfare, abs=1e-6
        )
        assert abs(report.profit_gap) <= 1e-6
        assert len(report.per_member_gains) == len(sc.members)
        for _, gain in report.per_member_gains:
            assert gain is None or gain >= -1e-9

    def test_bess_report_has_no_closed_form(self):
        sc = solar_day_scenario(10, with_bess=True)
        report = build_welfare_report(sc, "dnem")
        assert report.centralized_welfare is None


class TestGenerators:
    def test_random_scenario_is_deterministic(self):
        a = random_scenario(123)
        b = random_scenario(123)
        assert a.horizon == b.horizon
        assert len(a.members) == len(b.members)
        for ma, mb in zip(a.members, b.members):
            assert tuple(ma.pv_trace) == tuple(mb.pv_trace)
            assert ma.devices == mb.devices

    def test_max_total_devices_cap(self):
        for seed in range(10):
            sc = random_scenario(seed, max_total_devices=4)
            assert sum(len(m.devices) for m in sc.members) <= 4

    def test_solar_day_crosses_zones(self):
        sc = solar_day_scenario(42)
        _, summary = run(sc, "dnem", compute_gains=False)
        zones = summary.zone_histogram
        assert zones.get("NetConsumption", 0) > 0
        assert zones.get("NetProduction", 0) > 0
