"""Marginal-utility response curves and their monotone inversion.

The central object is the aggregate response curve: for a price ``y`` it
returns the total consumption that price-taking devices would choose, i.e.
the sum of every device's inverse marginal utility clamped to its bounds.
The curve is continuous, non-increasing and piecewise linear for quadratic
devices, which lets the net-zero price be solved exactly; devices with other
concave utilities fall back to bisection.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .model import DeviceUtility, Member

__all__ = [
    "EPS_PRICE",
    "EPS_QUANTITY",
    "TargetOutsideRangeError",
    "device_response",
    "AggregateResponseCurve",
    "aggregate_response",
    "invert_aggregate",
]

#: Price tolerance of the bisection fallback ($/kWh).
EPS_PRICE = 1e-10
#: Quantity tolerance for bracketing and balance checks (kWh).
EPS_QUANTITY = 1e-8

_MAX_BISECT_ITERS = 200


class TargetOutsideRangeError(ValueError):
    """The requested consumption target is not bracketed on [lo, hi]."""


def device_response(device, price: float) -> float:
    """Consumption a single device picks when facing ``price`` ($/kWh).

    This is the device's inverse marginal utility (already clamped to the
    utility's own support) clipped into ``[d_min, d_max]``.  It is the exact
    maximiser of ``value(d) - price*d`` over the bounds.
    """
    return max(device.d_min, min(device.inverse_marginal(price), device.d_max))


class AggregateResponseCurve:
    """Total price response of a flat collection of devices.

    Immutable after construction.  When every device is a quadratic
    :class:`~dnem.model.DeviceUtility` the evaluation is vectorised and the
    kink prices are known, enabling exact inversion.
    """

    def __init__(self, devices: Iterable):
        self.devices = tuple(devices)
        self._quadratic = all(isinstance(d, DeviceUtility) for d in self.devices)
        if self._quadratic and self.devices:
            self._alpha = np.array([d.alpha for d in self.devices])
            self._beta = np.array([d.beta for d in self.devices])
            self._d_min = np.array([d.d_min for d in self.devices])
            self._d_max = np.array([d.d_max for d in self.devices])

    @classmethod
    def from_members(cls, members: Sequence[Member]) -> "AggregateResponseCurve":
        return cls(dev for m in members for dev in m.devices)

    def response(self, price: float) -> float:
        """Aggregate consumption at ``price`` (kWh); non-increasing in price."""
        if not self.devices:
            return 0.0
        if self._quadratic:
            f = np.clip((self._alpha - price) / self._beta, 0.0, self._alpha / self._beta)
            return float(np.sum(np.clip(f, self._d_min, self._d_max)))
        return sum(device_response(d, price) for d in self.devices)

    def knot_prices(self, lo: float, hi: float) -> np.ndarray | None:
        """Sorted kink prices within ``[lo, hi]`` including the endpoints.

        Returns ``None`` when some device does not expose its kink structure,
        in which case callers must use bisection.
        """
        knots = [lo, hi]
        for dev in self.devices:
            get = getattr(dev, "response_knots", None)
            if get is None:
                return None
            knots.extend(k for k in get() if lo < k < hi)
        return np.unique(np.asarray(knots, dtype=float))


def aggregate_response(curve: AggregateResponseCurve, price: float) -> float:
    """Total consumption induced by ``price`` across all devices (kWh)."""
    return curve.response(price)


def invert_aggregate(
    curve: AggregateResponseCurve, target: float, lo: float, hi: float
) -> float:
    """Price at which the aggregate response equals ``target`` kWh.

    Requires ``response(hi) <= target <= response(lo)`` (the curve is
    non-increasing); raises :class:`TargetOutsideRangeError` otherwise.  When
    the curve is flat at the target over an interval of prices, the midpoint
    of that plateau is returned so results are reproducible.
    """
    if lo > hi:
        raise TargetOutsideRangeError(f"empty price bracket [{lo}, {hi}]")
    v_lo = curve.response(lo)
    v_hi = curve.response(hi)
    if target > v_lo + EPS_QUANTITY or target < v_hi - EPS_QUANTITY:
        raise TargetOutsideRangeError(
            f"target outside range: {target} not in [{v_hi}, {v_lo}] on [{lo}, {hi}]"
        )
    target = min(max(target, v_hi), v_lo)

    knots = curve.knot_prices(lo, hi)
    if knots is None:
        left = _bisect_edge(curve, target, lo, hi, strict=True)
        right = _bisect_edge(curve, target, lo, hi, strict=False)
    else:
        values = np.array([curve.response(y) for y in knots])
        left = _left_edge(knots, values, target)
        right = _right_edge(knots, values, target)
    return 0.5 * (left + right)


def _interp(y_a, v_a, y_b, v_b, target):
    return y_a + (v_a - target) * (y_b - y_a) / (v_a - v_b)


def _left_edge(knots, values, target):
    # Smallest price at which the response has fallen to the target.
    if values[0] <= target:
        return float(knots[0])
    j = int(np.argmax(values <= target)) - 1
    return _interp(knots[j], values[j], knots[j + 1], values[j + 1], target)


def _right_edge(knots, values, target):
    # Largest price at which the response still reaches the target.
    if values[-1] >= target:
        return float(knots[-1])
    j = len(values) - 1 - int(np.argmax(values[::-1] >= target))
    return _interp(knots[j], values[j], knots[j + 1], values[j + 1], target)


def _bisect_edge(curve, target, lo, hi, strict: bool) -> float:
    """Bisect for a plateau edge on a non-increasing curve.

    With ``strict`` the predicate is ``response(y) > target`` (left edge),
    otherwise ``response(y) >= target`` (right edge); both are monotone in
    ``y`` so plain bisection converges unconditionally.
    """

    def above(y):
        v = curve.response(y)
        return v > target if strict else v >= target

    if not above(lo):
        return lo
    if above(hi):
        return hi
    a, b = lo, hi
    for _ in range(_MAX_BISECT_ITERS):
        if b - a <= EPS_PRICE:
            break
        mid = 0.5 * (a + b)
        if above(mid):
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)
