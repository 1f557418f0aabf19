"""Energy-community pricing under net energy metering.

A deterministic engine for communities that pool flexible demand, solar and
shared storage behind one utility meter: it computes the community price from
aggregate renewables, members' surplus-maximising responses, centralized
welfare oracles, and battery dispatch, and verifies the mechanism's fairness
properties (budget balance, individual and group rationality, welfare
optimality) as executable checks.
"""

__version__ = "0.1.0"

from .model import (
    BessSpec,
    CommunityPrice,
    CommunityScenario,
    DeviceUtility,
    Member,
    PriceZone,
    RateSchedule,
    ScenarioValidationError,
    fold_central_pv,
    validate_scenario,
)
from .curves import AggregateResponseCurve, aggregate_response, device_response, invert_aggregate
from .pricing import PricingThresholds, compute_thresholds, dnem_price, nem_payment, payment
from .response import MemberOutcome, member_outcome, optimal_consumption
from .benchmark import sign_based_mechanism, standalone_optimum, standalone_optimum_with_bess
from .bess import (
    DispatchThresholds,
    effective_limits,
    generalized_dnem_price,
    myopic_dispatch,
    soc_step,
)
from .welfare import (
    axiom_audit,
    centralized_welfare_bruteforce,
    centralized_welfare_closed_form,
    coalition_audit,
    welfare_gain,
)
from .sim import IntervalRecord, RunSummary, random_scenario, rate_ratio_sweep, run, solar_day_scenario

__all__ = [
    "__version__",
    "BessSpec",
    "CommunityPrice",
    "CommunityScenario",
    "DeviceUtility",
    "Member",
    "PriceZone",
    "RateSchedule",
    "ScenarioValidationError",
    "fold_central_pv",
    "validate_scenario",
    "AggregateResponseCurve",
    "aggregate_response",
    "device_response",
    "invert_aggregate",
    "PricingThresholds",
    "compute_thresholds",
    "dnem_price",
    "nem_payment",
    "payment",
    "MemberOutcome",
    "member_outcome",
    "optimal_consumption",
    "sign_based_mechanism",
    "standalone_optimum",
    "standalone_optimum_with_bess",
    "DispatchThresholds",
    "effective_limits",
    "generalized_dnem_price",
    "myopic_dispatch",
    "soc_step",
    "axiom_audit",
    "centralized_welfare_bruteforce",
    "centralized_welfare_closed_form",
    "coalition_audit",
    "welfare_gain",
    "IntervalRecord",
    "RunSummary",
    "random_scenario",
    "rate_ratio_sweep",
    "run",
    "solar_day_scenario",
]
