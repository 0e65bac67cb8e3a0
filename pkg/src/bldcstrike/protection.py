"""i^2 t overcurrent protection with exponential cooldown."""

import math
from dataclasses import dataclass

from .validation import check_positive


@dataclass(frozen=True)
class TripState:
    i2t: float = 0.0  # A^2 s above the nominal-current threshold
    tripped: bool = False


def overcurrent_check(trip, current, motor, dt, limit, cooldown=2.0):
    """Integrate ``max(0, i^2 - i_nom^2)``, decaying with time constant ``cooldown``.

    A trip latches: once set it stays set whatever the current does, until
    the caller replaces the state with a fresh one.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    check_positive(limit, "limit")
    if trip.tripped:
        return trip
    acc = _accumulate(trip.i2t, current, motor.nominal_current, dt, cooldown)
    return TripState(acc, acc > limit)


def _accumulate(acc, current, i_nom, dt, cooldown):
    decay = math.exp(-dt / cooldown) if cooldown and math.isfinite(cooldown) else 1.0
    excess = current * current - i_nom * i_nom
    return acc * decay + (excess * dt if excess > 0.0 else 0.0)


def time_to_trip(current, i_nom, limit, cooldown=math.inf):
    """Closed-form trip time for a constant current from a cold start."""
    excess = current * current - i_nom * i_nom
    if excess <= 0:
        return math.inf
    if not math.isfinite(cooldown):
        return limit / excess
    ceiling = excess * cooldown
    if ceiling <= limit:
        return math.inf
    return -cooldown * math.log(1.0 - limit / ceiling)


class OvercurrentMonitor:
    """Mutable monitor used inside the servo loop."""

    __slots__ = ("i_nom", "limit", "cooldown", "i2t", "tripped", "_decay", "_dt")

    def __init__(self, i_nom, limit, cooldown=2.0):
        self.i_nom = i_nom
        self.limit = limit
        self.cooldown = cooldown
        self._dt = None
        self.reset()

    def reset(self):
        self.i2t = 0.0
        self.tripped = False

    def update(self, current, dt):
        if self.tripped:
            return True
        if dt != self._dt:
            self._dt = dt
            self._decay = math.exp(-dt / self.cooldown)
        excess = current * current - self.i_nom * self.i_nom
        self.i2t = self.i2t * self._decay + (excess * dt if excess > 0.0 else 0.0)
        if self.i2t > self.limit:
            self.tripped = True
        return self.tripped

    def rest(self, seconds):
        """Cool down for ``seconds`` at or below nominal current."""
        if not self.tripped:
            self.i2t *= math.exp(-seconds / self.cooldown)

    def state(self):
        return TripState(self.i2t, self.tripped)
