"""Community pricing for a storage-free community.

The operator announces one uniform price per interval based on where the
aggregate renewable output sits relative to two thresholds: the aggregate
response at the buy rate and at the sell rate.  Below the lower threshold the
utility's buy rate is passed through; above the upper threshold the sell
rate; in between the price is set so that aggregate flexible demand exactly
absorbs the aggregate generation (the net-zero zone).
"""

from __future__ import annotations

from dataclasses import dataclass

from .curves import AggregateResponseCurve, aggregate_response, invert_aggregate
from .model import CommunityPrice, PriceZone

__all__ = [
    "PricingThresholds",
    "compute_thresholds",
    "dnem_price",
    "payment",
    "nem_payment",
]


@dataclass(frozen=True)
class PricingThresholds:
    """Generation levels (kWh) delimiting the net-zero zone.

    ``lower`` is the aggregate response at the buy rate, ``upper`` at the
    sell rate; ``lower <= upper`` because the response is non-increasing.
    """

    lower: float
    upper: float


def compute_thresholds(
    curve: AggregateResponseCurve, buy: float, sell: float
) -> PricingThresholds:
    """Evaluate the zone thresholds for one interval's rates."""
    return PricingThresholds(
        lower=aggregate_response(curve, buy),
        upper=aggregate_response(curve, sell),
    )


def dnem_price(
    curve: AggregateResponseCurve, g_n: float, buy: float, sell: float
) -> CommunityPrice:
    """Community price for aggregate generation ``g_n`` under rates (buy, sell).

    The net-zero interval is closed on both ends; at its endpoints the solved
    price coincides with the passed-through rate, so the tie-break only
    affects the zone label.
    """
    thresholds = compute_thresholds(curve, buy, sell)
    if g_n < thresholds.lower:
        return CommunityPrice(buy, PriceZone.NET_CONSUMPTION)
    if g_n > thresholds.upper:
        return CommunityPrice(sell, PriceZone.NET_PRODUCTION)
    value = invert_aggregate(curve, g_n, sell, buy)
    return CommunityPrice(value, PriceZone.NET_ZERO_IDLE)


def payment(price: CommunityPrice, z: float) -> float:
    """Member payment ($) for net consumption ``z`` at the community price.

    A single rate applies regardless of the sign of ``z``: net producers are
    compensated at the same price net consumers are charged.
    """
    return price.value * z


def nem_payment(buy: float, sell: float, z: float) -> float:
    """Utility tariff payment ($): buy rate on imports, sell rate on exports."""
    return buy * z if z >= 0 else sell * z
