import numpy as np
import pytest

from dnem.bess import (
    StorageLimitError,
    dispatch_thresholds,
    effective_limits,
    generalized_dnem_price,
    myopic_dispatch,
    soc_step,
)
from dnem.curves import AggregateResponseCurve
from dnem.model import NET_ZERO_ZONES, BessSpec, DeviceUtility, PriceZone
from dnem.pricing import dnem_price, nem_payment
from dnem.sim import random_scenario

from oracles import quad_utility

CURVE = AggregateResponseCurve([DeviceUtility(2.0, 1.0, 0.0, 2.0)])
SPEC = BessSpec(2.0, 0.95, 0.95, max_charge=0.5, max_discharge=0.5, initial_soc=1.0)


class TestEffectiveLimits:
    def test_mid_soc(self):
        assert effective_limits(SPEC, 1.0) == (pytest.approx(0.5), pytest.approx(0.5))

    def test_empty_battery_cannot_discharge(self):
        discharge, charge = effective_limits(SPEC, 0.0)
        assert discharge == 0.0
        assert charge == 0.5

    def test_full_battery_cannot_charge(self):
        discharge, charge = effective_limits(SPEC, 2.0)
        assert discharge == 0.5
        assert charge == 0.0

    def test_energy_limited_regimes(self):
        discharge, charge = effective_limits(SPEC, 0.3)
        assert discharge == pytest.approx(0.95 * 0.3)
        discharge, charge = effective_limits(SPEC, 1.9)
        assert charge == pytest.approx(0.1 / 0.95)


class TestSocStep:
    def test_charge(self):
        assert soc_step(SPEC, 1.0, 0.285) == pytest.approx(1.27075)

    def test_idle(self):
        assert soc_step(SPEC, 1.0, 0.0) == 1.0

    def test_discharge(self):
        assert soc_step(SPEC, 1.0, -0.5) == pytest.approx(1 - 0.5 / 0.95)

    def test_limit_violation_raises(self):
        with pytest.raises(StorageLimitError):
            soc_step(SPEC, 1.0, 0.6)
        with pytest.raises(StorageLimitError):
            soc_step(SPEC, 0.1, -0.5)


class TestMyopicDispatch:
    def test_threshold_values(self):
        _, th = myopic_dispatch(CURVE, 1.0, SPEC, 1.0, 0.3, 0.4, 0.2)
        assert th.sigma_plus == pytest.approx(2 - 0.3 / 0.95 - 0.5)
        assert th.sigma_plus_z == pytest.approx(2 - 0.3 / 0.95)
        assert th.sigma_minus_z == pytest.approx(2 - 0.95 * 0.3)
        assert th.sigma_minus == pytest.approx(2 - 0.95 * 0.3 + 0.5)
        assert (
            th.sigma_plus <= th.sigma_plus_z <= th.sigma_minus_z <= th.sigma_minus
        )

    def test_five_pieces(self):
        cases = [
            (1.0, -0.5),            # below sigma_plus: full discharge
            (1.5, 1.5 - 1.6842105263157894),  # partial discharge follows generation
            (1.7, 0.0),             # idle band
            (2.0, 2.0 - 1.715),     # partial charge follows generation
            (3.0, 0.5),             # above sigma_minus: full charge
        ]
        for g, expected in cases:
            b, _ = myopic_dispatch(CURVE, g, SPEC, 1.0, 0.3, 0.4, 0.2)
            assert b == pytest.approx(expected, abs=1e-9), f"g={g}"

    def test_action_always_feasible(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            soc = float(rng.uniform(0, SPEC.capacity))
            g = float(rng.uniform(0, 4))
            b, _ = myopic_dispatch(CURVE, g, SPEC, soc, 0.3, 0.4, 0.2)
            soc_step(SPEC, soc, b)  # must not raise

    def test_incompatible_salvage_raises(self):
        with pytest.raises(ValueError, match="salvage"):
            myopic_dispatch(CURVE, 1.0, SPEC, 1.0, 0.5, 0.4, 0.2)


class TestGeneralizedPrice:
    def test_worked_zones(self):
        cases = [
            (0.5, 0.4, PriceZone.NET_CONSUMPTION),
            (1.15, 0.35, PriceZone.NET_ZERO_DISCHARGE_DYNAMIC),
            (1.5, 0.3 / 0.95, PriceZone.NET_ZERO_DISCHARGE_FLAT),
            (1.7, 0.3, PriceZone.NET_ZERO_IDLE),
            (2.0, 0.95 * 0.3, PriceZone.NET_ZERO_CHARGE_FLAT),
            (2.25, 0.25, PriceZone.NET_ZERO_CHARGE_DYNAMIC),
            (2.5, 0.2, PriceZone.NET_PRODUCTION),
        ]
        for g, value, zone in cases:
            price, _ = generalized_dnem_price(CURVE, g, SPEC, 1.0, 0.3, 0.4, 0.2)
            assert price.value == pytest.approx(value, abs=1e-9), f"g={g}"
            assert price.zone == zone, f"g={g}"

    def test_energy_balance_in_discharge_dynamic_zone(self):
        price, b = generalized_dnem_price(CURVE, 1.15, SPEC, 1.0, 0.3, 0.4, 0.2)
        induced = CURVE.response(price.value)
        assert induced + b - 1.15 == pytest.approx(0.0, abs=1e-9)
        assert b == pytest.approx(-0.5)

    def test_energy_balance_across_all_net_zero_zones(self):
        sweep = np.linspace(0.0, 3.2, 1500)
        seen = set()
        for g in sweep:
            price, b = generalized_dnem_price(CURVE, float(g), SPEC, 1.0, 0.3, 0.4, 0.2)
            if price.zone in NET_ZERO_ZONES:
                seen.add(price.zone)
                z = CURVE.response(price.value) + b - g
                assert abs(z) <= 1e-8
        assert seen == NET_ZERO_ZONES

    def test_price_continuous_and_monotone_over_sweep(self):
        sweep = np.linspace(0.0, 3.5, 4000)
        values = np.array(
            [generalized_dnem_price(CURVE, float(g), SPEC, 1.0, 0.3, 0.4, 0.2)[0].value for g in sweep]
        )
        assert np.all(np.diff(values) <= 1e-12)
        step = sweep[1] - sweep[0]
        # the steepest dynamic segment has slope 1/|f'| = beta = 1
        assert np.all(np.abs(np.diff(values)) <= 1.0 * step + 1e-9)
        assert np.all(values >= 0.2 - 1e-12)
        assert np.all(values <= 0.4 + 1e-12)

    def test_zone_boundary_continuity(self):
        th = dispatch_thresholds(CURVE, SPEC, 1.0, 0.3)
        lower = CURVE.response(0.4) - th.eff_discharge
        upper = CURVE.response(0.2) + th.eff_charge
        boundaries = [
            lower, th.sigma_plus, th.sigma_plus_z,
            th.sigma_minus_z, th.sigma_minus, upper,
        ]
        for g0 in boundaries:
            left, _ = generalized_dnem_price(CURVE, g0 - 1e-9, SPEC, 1.0, 0.3, 0.4, 0.2)
            right, _ = generalized_dnem_price(CURVE, g0 + 1e-9, SPEC, 1.0, 0.3, 0.4, 0.2)
            assert abs(left.value - right.value) <= 1e-6

    def test_dispatch_price_consistency(self):
        for g in np.linspace(0.0, 3.5, 701):
            b_price = generalized_dnem_price(CURVE, float(g), SPEC, 1.0, 0.3, 0.4, 0.2)[1]
            b_dispatch = myopic_dispatch(CURVE, float(g), SPEC, 1.0, 0.3, 0.4, 0.2)[0]
            assert b_price == b_dispatch

    def test_zero_storage_reduces_to_plain_rule(self):
        dead_specs = [
            BessSpec(0.0, 0.95, 0.95, 0.0, 0.0, 0.0),
            BessSpec(2.0, 0.95, 0.95, 0.0, 0.0, 1.0),
        ]
        for spec in dead_specs:
            for g in np.linspace(0.0, 3.0, 301):
                price, b = generalized_dnem_price(CURVE, float(g), spec, spec.initial_soc, 0.3, 0.4, 0.2)
                plain = dnem_price(CURVE, float(g), 0.4, 0.2)
                assert b == 0.0
                assert price.value == plain.value
                assert price.zone == plain.zone

    def test_soc_trajectory_stays_in_bounds_and_telescopes(self):
        rng = np.random.default_rng(15)
        sc = random_scenario(21, with_bess=True, wide_bounds=True, horizon=24)
        curve = AggregateResponseCurve.from_members(sc.members)
        spec = sc.bess
        soc = spec.initial_soc
        total_delta = 0.0
        for t in range(sc.horizon):
            g = float(rng.uniform(0, curve.response(0.0) * 1.4))
            _, b = generalized_dnem_price(
                curve, g, spec, soc, sc.rates.salvage,
                float(sc.rates.buy[t]), float(sc.rates.sell[t]),
            )
            nxt = soc_step(spec, soc, b)
            total_delta += nxt - soc
            soc = nxt
            assert -1e-8 <= soc <= spec.capacity + 1e-8
        assert soc == pytest.approx(spec.initial_soc + total_delta, abs=1e-9)


class TestRelaxedOptimality:
    def test_single_interval_matches_brute_force_grid(self):
        # SoC far from both limits so the effective limits equal the rated
        # power limits; the threshold dispatch solves the relaxed problem
        devices = [(2.0, 1.0, 0.0, 2.0), (3.0, 2.0, 0.0, 1.5)]
        devs = [DeviceUtility(*d) for d in devices]
        curve = AggregateResponseCurve(devs)
        spec = BessSpec(10.0, 0.95, 0.95, max_charge=0.4, max_discharge=0.4, initial_soc=5.0)
        salvage, buy, sell = 0.3, 0.4, 0.2

        def mechanism_value(g):
            price, b = generalized_dnem_price(curve, g, spec, 5.0, salvage, buy, sell)
            d = np.array([max(dv.d_min, min(dv.inverse_marginal(price.value), dv.d_max)) for dv in devs])
            utility = sum(float(quad_utility(a, be, di)) for (a, be, _, _), di in zip(devices, d))
            z = float(np.sum(d)) + b - g
            return utility - nem_payment(buy, sell, z) + salvage * (
                0.95 * max(b, 0.0) - max(-b, 0.0) / 0.95
            )

        axes = [np.linspace(lo, hi, 201) for (_, _, lo, hi) in devices]
        util = (
            quad_utility(2, 1, axes[0])[:, None] + quad_utility(3, 2, axes[1])[None, :]
        )
        total = axes[0][:, None] + axes[1][None, :]

        def grid_value(g):
            best = -np.inf
            for b in np.linspace(-0.4, 0.4, 1001):
                z = total + b - g
                welfare = util - np.where(z >= 0, buy * z, sell * z) + salvage * (
                    0.95 * max(b, 0.0) - max(-b, 0.0) / 0.95
                )
                best = max(best, float(np.max(welfare)))
            return best

        for g in [0.5, 1.5, 2.2, 3.0, 4.2]:
            assert mechanism_value(g) == pytest.approx(grid_value(g), abs=1e-4), f"g={g}"
