"""Multi-interval scenario driver and synthetic scenario generators.

The driver runs a validated scenario under one of three mechanisms:

* ``dnem`` - the community price is announced from the aggregate renewables
  each interval (with the storage-aware rule when a battery is present) and
  every member responds to it;
* ``sign_based`` - members keep their optimal standalone schedules and the
  whole community is billed at the buy or sell rate according to the sign of
  its aggregate net consumption;
* ``standalone`` - no community: every member faces the utility tariff alone.

Intervals of one scenario are evaluated in order because the battery's state
of charge threads through them; runs are deterministic, so identical inputs
give identical outputs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .benchmark import (
    sign_based_interval,
    standalone_optimum,
    standalone_optimum_with_bess,
)
from .bess import generalized_dnem_price, soc_step
from .curves import AggregateResponseCurve
from .model import (
    BessSpec,
    CommunityPrice,
    CommunityScenario,
    DeviceUtility,
    Member,
    RateSchedule,
    fold_central_pv,
    validate_scenario,
)
from .pricing import dnem_price, nem_payment
from .response import MemberOutcome, member_outcome
from .welfare import WelfareReport, centralized_welfare_closed_form, welfare_gain

__all__ = [
    "MECHANISMS",
    "IntervalRecord",
    "RunSummary",
    "run",
    "rate_ratio_sweep",
    "random_scenario",
    "solar_day_scenario",
    "build_welfare_report",
]

MECHANISMS = ("dnem", "sign_based", "standalone")


@dataclass(frozen=True)
class IntervalRecord:
    """Everything that happened in one interval.

    ``soc`` is the community's stored energy at the end of the interval
    (summed over member slices when storage is member-operated).  ``price``
    is ``None`` for standalone runs, which have no community price.
    """

    t: int
    price: Optional[CommunityPrice]
    g_n: float
    d_n: float
    b_n: float
    z_n: float
    soc: float
    per_member: tuple[MemberOutcome, ...]


@dataclass(frozen=True)
class RunSummary:
    """Horizon totals for a run.

    ``total_welfare`` sums member rewards over all intervals; gains are
    percentages against the corresponding baseline run on the same scenario
    and are ``None`` when the baseline welfare is zero.
    """

    mechanism: str
    total_welfare: float
    per_member_surplus: tuple[float, ...]
    welfare_gain_vs_standalone: Optional[float]
    welfare_gain_vs_sign_based: Optional[float]
    zone_histogram: dict[str, int]


def folded_generation(scenario: CommunityScenario) -> np.ndarray:
    """Per-member effective generation, shape (members, horizon)."""
    return np.stack(
        [fold_central_pv(m, scenario.central_pv_trace) for m in scenario.members]
    )


def _storage_delta(outcomes: Sequence[MemberOutcome], charge_eff, discharge_eff) -> float:
    return sum(
        charge_eff * max(o.battery, 0.0) - max(-o.battery, 0.0) / discharge_eff
        for o in outcomes
    )


def _dnem_records(scenario: CommunityScenario, gen: np.ndarray) -> list[IntervalRecord]:
    members = scenario.members
    rates = scenario.rates
    bess = scenario.bess
    curve = AggregateResponseCurve.from_members(members)
    soc = bess.initial_soc if bess is not None else 0.0
    records = []
    for t in range(scenario.horizon):
        buy, sell = float(rates.buy[t]), float(rates.sell[t])
        g_n = float(np.sum(gen[:, t]))
        if bess is not None:
            price, b_n = generalized_dnem_price(
                curve, g_n, bess, soc, rates.salvage, buy, sell
            )
            outcomes = tuple(
                member_outcome(
                    m,
                    price,
                    float(gen[i, t]),
                    m.bess_share * b_n,
                    rates.salvage,
                    bess.charge_eff,
                    bess.discharge_eff,
                )
                for i, m in enumerate(members)
            )
            soc = soc_step(bess, soc, b_n)
        else:
            price = dnem_price(curve, g_n, buy, sell)
            b_n = 0.0
            outcomes = tuple(
                member_outcome(m, price, float(gen[i, t])) for i, m in enumerate(members)
            )
        d_n = sum(o.total_consumption for o in outcomes)
        records.append(
            IntervalRecord(t, price, g_n, d_n, b_n, d_n + b_n - g_n, soc, outcomes)
        )
    return records


def _standalone_schedules(
    scenario: CommunityScenario, gen: np.ndarray
) -> list[list[MemberOutcome]]:
    rates = scenario.rates
    per_member = []
    for i, member in enumerate(scenario.members):
        if scenario.bess is not None:
            spec = scenario.bess.scaled(member.bess_share)
            per_member.append(standalone_optimum_with_bess(member, spec, gen[i], rates))
        else:
            per_member.append(
                [
                    standalone_optimum(
                        member, float(gen[i, t]), float(rates.buy[t]), float(rates.sell[t])
                    )
                    for t in range(scenario.horizon)
                ]
            )
    return per_member


def _baseline_records(
    scenario: CommunityScenario, gen: np.ndarray, mechanism: str
) -> list[IntervalRecord]:
    members = list(scenario.members)
    rates = scenario.rates
    bess = scenario.bess
    charge_eff = bess.charge_eff if bess is not None else 1.0
    discharge_eff = bess.discharge_eff if bess is not None else 1.0
    schedules = _standalone_schedules(scenario, gen)
    soc = bess.initial_soc if bess is not None else 0.0
    records = []
    for t in range(scenario.horizon):
        buy, sell = float(rates.buy[t]), float(rates.sell[t])
        outs = [schedules[i][t] for i in range(len(members))]
        if mechanism == "sign_based":
            price, outs = sign_based_interval(
                members,
                gen[:, t],
                buy,
                sell,
                schedules=outs,
                salvage=rates.salvage,
                charge_eff=charge_eff,
                discharge_eff=discharge_eff,
            )
        else:
            price = None
        g_n = float(np.sum(gen[:, t]))
        d_n = sum(o.total_consumption for o in outs)
        b_n = sum(o.battery for o in outs)
        if bess is not None:
            soc = soc + _storage_delta(outs, charge_eff, discharge_eff)
        records.append(
            IntervalRecord(t, price, g_n, d_n, b_n, d_n + b_n - g_n, soc, tuple(outs))
        )
    return records


def _total_welfare(records: Sequence[IntervalRecord]) -> float:
    return sum(o.reward for r in records for o in r.per_member)


def run(
    scenario: CommunityScenario, mechanism: str = "dnem", compute_gains: bool = True
) -> tuple[list[IntervalRecord], RunSummary]:
    """Simulate a scenario under one mechanism; returns records and summary.

    With ``compute_gains`` the two baseline mechanisms are run on the same
    scenario to fill the summary's welfare-gain fields.
    """
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}; expected one of {MECHANISMS}")
    scenario = validate_scenario(scenario)
    gen = folded_generation(scenario)
    if mechanism == "dnem":
        records = _dnem_records(scenario, gen)
    else:
        records = _baseline_records(scenario, gen, mechanism)

    total = _total_welfare(records)
    per_member = tuple(
        sum(r.per_member[i].reward for r in records)
        for i in range(len(scenario.members))
    )
    histogram: Counter = Counter()
    if mechanism != "standalone":
        histogram.update(r.price.zone.value for r in records)

    gain_std = gain_sgn = None
    if compute_gains:
        baselines = {}
        for other in ("standalone", "sign_based"):
            if other == mechanism:
                baselines[other] = total
            else:
                baselines[other] = _total_welfare(
                    run(scenario, other, compute_gains=False)[0]
                )
        try:
            gain_std = welfare_gain(total, baselines["standalone"])
        except ValueError:
            gain_std = None
        try:
            gain_sgn = welfare_gain(total, baselines["sign_based"])
        except ValueError:
            gain_sgn = None

    summary = RunSummary(
        mechanism=mechanism,
        total_welfare=total,
        per_member_surplus=per_member,
        welfare_gain_vs_standalone=gain_std,
        welfare_gain_vs_sign_based=gain_sgn,
        zone_histogram=dict(sorted(histogram.items())),
    )
    return records, summary


@dataclass(frozen=True)
class SweepPoint:
    ratio: float
    welfare_gain_dnem: Optional[float]
    welfare_gain_sign_based: Optional[float]


def rate_ratio_sweep(
    scenario: CommunityScenario, ratios: Sequence[float]
) -> list[SweepPoint]:
    """Re-run the scenario with the sell rate set to ``ratio * buy`` per ratio.

    Requires a flat buy rate.  When a battery is present, the salvage-rate
    window is re-validated for every ratio and an infeasible ratio raises.
    Gains are relative to the standalone baseline under the same rates.
    """
    scenario = validate_scenario(scenario)
    buy = scenario.rates.buy
    if not np.all(buy == buy[0]):
        raise ValueError("rate ratio sweep requires a flat buy rate")
    points = []
    for ratio in ratios:
        if not 0 <= ratio <= 1:
            raise ValueError(f"rate ratio {ratio} outside [0, 1]")
        rates = RateSchedule(buy, ratio * buy, scenario.rates.salvage)
        candidate = CommunityScenario(
            members=scenario.members,
            rates=rates,
            horizon=scenario.horizon,
            bess=scenario.bess,
            central_pv_trace=scenario.central_pv_trace,
        )
        try:
            validate_scenario(candidate)
        except Exception as exc:
            raise ValueError(f"rate ratio {ratio} infeasible: {exc}") from exc
        _, dnem_summary = run(candidate, "dnem")
        _, sign_summary = run(candidate, "sign_based")
        points.append(
            SweepPoint(
                ratio=float(ratio),
                welfare_gain_dnem=dnem_summary.welfare_gain_vs_standalone,
                welfare_gain_sign_based=sign_summary.welfare_gain_vs_standalone,
            )
        )
    return points


def build_welfare_report(scenario: CommunityScenario, mechanism: str = "dnem") -> WelfareReport:
    """Run a mechanism and compare it against its oracles and baselines."""
    scenario = validate_scenario(scenario)
    records, summary = run(scenario, mechanism)
    std_records, _ = run(scenario, "standalone", compute_gains=False)
    gains = []
    for i, member in enumerate(scenario.members):
        base = sum(r.per_member[i].reward for r in std_records)
        mine = sum(r.per_member[i].reward for r in records)
        try:
            gains.append((member.id, welfare_gain(mine, base)))
        except ValueError:
            gains.append((member.id, None))
    central = None
    if scenario.bess is None:
        central = sum(
            centralized_welfare_closed_form(
                scenario.members,
                r.g_n,
                float(scenario.rates.buy[r.t]),
                float(scenario.rates.sell[r.t]),
            )
            for r in records
        )
    gap = sum(
        sum(o.payment for o in r.per_member)
        - nem_payment(
            float(scenario.rates.buy[r.t]), float(scenario.rates.sell[r.t]), r.z_n
        )
        for r in records
    )
    return WelfareReport(
        decentralized_welfare=summary.total_welfare,
        centralized_welfare=central,
        per_member_gains=tuple(gains),
        profit_gap=gap,
    )


def _random_devices(rng: np.random.Generator, count: int, wide_bounds: bool) -> list[DeviceUtility]:
    devices = []
    for _ in range(count):
        if wide_bounds:
            alpha = float(rng.uniform(0.6, 5.0))
            beta = float(rng.uniform(max(0.1, alpha / 4.5), 3.0))
            d_min, d_max = 0.0, alpha / beta
        else:
            alpha = float(rng.uniform(0.5, 5.0))
            beta = float(rng.uniform(0.1, 3.0))
            d_min = float(rng.uniform(0.0, 1.5))
            d_max = float(min(d_min + rng.uniform(0.3, 3.5), 5.0))
        devices.append(DeviceUtility(alpha, beta, d_min, d_max))
    return devices


def random_scenario(
    seed: int,
    n_members: Optional[int] = None,
    horizon: Optional[int] = None,
    devices_per_member: tuple[int, int] = (1, 3),
    with_bess: bool = False,
    wide_bounds: bool = False,
    max_total_devices: Optional[int] = None,
    allow_central_pv: bool = True,
) -> CommunityScenario:
    """Seeded random scenario for property testing.

    Members number 2-10 with 1-3 devices each, utility intercepts in
    [0.5, 5] $/kWh, slopes in [0.1, 3], consumption bounds nested in [0, 5]
    kWh, and generation traces scaled so the community sweeps all price
    zones over the horizon.  ``wide_bounds`` draws devices whose response
    never clamps above, keeping the aggregate curve strictly decreasing
    (useful for continuity checks).  ``max_total_devices`` caps the community
    device count (the brute-force welfare oracle needs at most 4).
    """
    rng = np.random.default_rng(seed)
    if max_total_devices is not None:
        n = n_members or int(rng.integers(2, max_total_devices + 1))
        counts = [1] * n
        for _ in range(max_total_devices - n):
            if rng.random() < 0.5:
                counts[int(rng.integers(0, n))] += 1
    else:
        n = n_members or int(rng.integers(2, 11))
        lo, hi = devices_per_member
        counts = [int(rng.integers(lo, hi + 1)) for _ in range(n)]
    t_len = horizon or int(rng.integers(1, 25))

    peak = float(rng.uniform(0.3, 0.5))
    off = peak * float(rng.uniform(0.5, 0.9))
    buy = np.where(rng.random(t_len) < 0.5, peak, off)
    if with_bess:
        charge_eff = discharge_eff = 0.95
        cap = 0.85 * charge_eff * discharge_eff * float(np.min(buy))
        sell = rng.uniform(0.2, 1.0, t_len) * cap
        salvage = 0.5 * (float(np.max(sell)) / charge_eff + discharge_eff * float(np.min(buy)))
    else:
        sell = buy * rng.uniform(0.2, 0.8, t_len)
        salvage = 0.0

    all_devices = [_random_devices(rng, c, wide_bounds) for c in counts]
    max_demand = AggregateResponseCurve(
        [d for devs in all_devices for d in devs]
    ).response(0.0)
    scale = max(max_demand, 0.5)
    targets = rng.uniform(0.0, 1.3 * scale, t_len)
    weights = rng.random((n, t_len)) + 0.05
    traces = targets * weights / np.sum(weights, axis=0)

    central = np.zeros(t_len)
    omegas = np.zeros(n)
    if allow_central_pv and rng.random() < 0.3:
        central = 0.3 * targets
        traces = traces * 0.7
        omegas = rng.dirichlet(np.ones(n))

    members = [
        Member(
            id=f"m{i:02d}",
            devices=tuple(all_devices[i]),
            pv_trace=traces[i],
            central_pv_share=float(omegas[i]),
            bess_share=1.0 / n if with_bess else 0.0,
        )
        for i in range(n)
    ]
    bess = None
    if with_bess:
        capacity = float(rng.uniform(0.3, 0.8)) * scale
        power = float(rng.uniform(0.08, 0.3)) * scale
        bess = BessSpec(
            capacity=capacity,
            charge_eff=0.95,
            discharge_eff=0.95,
            max_charge=power,
            max_discharge=power,
            initial_soc=float(rng.uniform(0.1, 0.9)) * capacity,
        )
    return validate_scenario(
        CommunityScenario(
            members=tuple(members),
            rates=RateSchedule(buy, sell, salvage),
            horizon=t_len,
            bess=bess,
            central_pv_trace=central,
        )
    )


def solar_day_scenario(
    seed: int,
    n_members: int = 10,
    horizon: int = 24,
    with_bess: bool = False,
    flat_buy: bool = False,
) -> CommunityScenario:
    """A day-long community with midday-peaked PV and time-of-use rates.

    Buy rate is 0.40 $/kWh in the evening peak and 0.20 off-peak (or flat
    0.40 with ``flat_buy``), sell rate a flat 0.10.  Eight of ten members own
    PV, scaled so the community exports around noon and imports at night,
    crossing every price zone during the day.
    """
    rng = np.random.default_rng(seed)
    all_devices = []
    for _ in range(n_members):
        devs = []
        for _ in range(2):
            alpha = float(rng.uniform(1.0, 4.0))
            beta = float(rng.uniform(max(0.25, alpha / 4.0), 2.5))
            devs.append(DeviceUtility(alpha, beta, 0.0, alpha / beta))
        all_devices.append(devs)

    hours = np.arange(horizon)
    if flat_buy:
        buy = np.full(horizon, 0.40)
    else:
        buy = np.where((hours >= 14) & (hours <= 20), 0.40, 0.20)
    sell = np.full(horizon, 0.10)
    salvage = 0.15 if with_bess else 0.0

    curve = AggregateResponseCurve([d for devs in all_devices for d in devs])
    export_threshold = curve.response(float(np.min(sell)))
    bell = np.exp(-((hours - 12.0) ** 2) / (2 * 3.5**2))
    owners = rng.permutation(n_members)[: max(1, int(0.8 * n_members))]
    scales = np.zeros(n_members)
    scales[owners] = rng.uniform(0.6, 1.4, len(owners))
    total_scale = float(np.sum(scales))
    factor = 1.35 * export_threshold / total_scale
    traces = np.outer(scales * factor, bell)

    members = [
        Member(
            id=f"m{i:02d}",
            devices=tuple(all_devices[i]),
            pv_trace=traces[i],
            bess_share=1.0 / n_members if with_bess else 0.0,
        )
        for i in range(n_members)
    ]
    bess = None
    if with_bess:
        bess = BessSpec(
            capacity=0.6 * export_threshold,
            charge_eff=0.95,
            discharge_eff=0.95,
            max_charge=0.18 * export_threshold,
            max_discharge=0.18 * export_threshold,
            initial_soc=0.3 * export_threshold,
        )
    return validate_scenario(
        CommunityScenario(
            members=tuple(members),
            rates=RateSchedule(buy, sell, salvage),
            horizon=horizon,
            bess=bess,
        )
    )
