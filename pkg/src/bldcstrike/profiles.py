"""Strike and lift motion profiles driven by MIDI velocity.

A strike profile is the pair (acceleration, position) a drive accepts as a
motion command. Velocity maps linearly onto acceleration ``a`` and the
commanded depth past the key is ``a T^2 / 2``, so position is linear in
acceleration and every stroke lands at the same travel time ``T``.

The reference trajectory the servo follows leaves the rest angle at zero
speed, reaches the coasting speed ``a T`` with zero acceleration by a
minimum-jerk blend, then coasts onto the key during the final
``coast_time`` so that contact occurs at exactly ``T``. Loud strokes wind up
before the blend; soft ones brake into the coast. Coasting makes the impact
speed insensitive to small tracking errors. Past ``T`` the reference keeps
its speed until the commanded depth, so a lagging mallet still lands.
"""

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_midi_velocity, check_positive, check_velocity_array


class Direction(enum.Enum):
    STRIKE = "strike"
    LIFT = "lift"


@dataclass(frozen=True)
class ProfilerConfig:
    a_min: float  # rad/s^2 at velocity 1
    a_max: float  # rad/s^2 at velocity 127
    travel_time: float = 0.015
    lift_time: float = 0.0145
    default_position: float = 1.6107963267948966  # rest angle, above the key
    contact_position: float = 1.5707963267948966
    coast_time: float = 0.002
    # largest |acceleration| the drive can deliver; None skips the check
    max_acceleration: float = None

    def __post_init__(self):
        check_positive(self.a_min, "a_min")
        check_positive(self.a_max, "a_max")
        if self.a_min >= self.a_max:
            raise ValueError("a_min must be smaller than a_max")
        check_positive(self.travel_time, "travel_time")
        check_positive(self.lift_time, "lift_time")
        check_positive(self.coast_time, "coast_time", allow_zero=True)
        if self.coast_time >= self.travel_time:
            raise ValueError("coast_time must be shorter than travel_time")
        if not self.default_position > self.contact_position:
            raise ValueError("default_position must lie above contact_position")
        if self.max_acceleration is not None:
            check_positive(self.max_acceleration, "max_acceleration")

    @property
    def stroke(self):
        """Angular distance from rest to the key."""
        return self.default_position - self.contact_position


@dataclass(frozen=True)
class MotionProfile:
    """One motion command plus the reference trajectory it implies.

    For strikes ``target_position`` is the commanded depth past the key
    (``a T^2 / 2``); for lifts it is the absolute rest angle.
    """

    acceleration: float
    target_position: float
    travel_time: float
    direction: Direction
    start_position: float
    end_position: float
    coast_time: float = 0.0
    _coef: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        check_positive(self.acceleration, "acceleration", allow_zero=True)
        check_positive(self.travel_time, "travel_time")
        dist = abs(self.start_position - self.end_position)
        sign = 1.0 if self.end_position > self.start_position else -1.0
        if self.direction is Direction.STRIKE:
            w = self.acceleration * self.travel_time
            blend = self.travel_time - self.coast_time
            # distance left for the blend once the coast is subtracted
            blend_dist = dist - w * self.coast_time
        else:
            w, blend, blend_dist = 0.0, self.travel_time, dist
        object.__setattr__(self, "_coef", (sign, w, blend, blend_dist))

    @property
    def impact_speed(self):
        return self.acceleration * self.travel_time if self.direction is Direction.STRIKE else 0.0

    @property
    def duration(self):
        """Time until the reference comes to rest."""
        if self.direction is Direction.LIFT:
            return self.travel_time
        w = self.impact_speed
        return self.travel_time + (self.target_position / w if w > 0 else 0.0)

    def reference(self, t):
        """Reference ``(angle, angular velocity, angular acceleration)`` at ``t`` s."""
        sign, w, blend, blend_dist = self._coef
        p0 = self.start_position
        if t <= 0.0:
            return p0, 0.0, 0.0
        if t < blend:
            # rest -> (blend_dist, w, 0) quintic; the w-term is the Hermite
            # basis with unit end slope and zero end value/curvature
            u = t / blend
            u2 = u * u
            u3 = u2 * u
            f = u3 * (10 - 15 * u + 6 * u2)
            df = 30 * u2 * (1 - u) ** 2
            ddf = 60 * u * (1 - 3 * u + 2 * u2)
            h = u3 * (-4 + 7 * u - 3 * u2)
            dh = u2 * (-12 + 28 * u - 15 * u2)
            ddh = u * (-24 + 84 * u - 60 * u2)
            s = blend_dist * f + w * blend * h
            v = blend_dist * df / blend + w * dh
            a = blend_dist * ddf / blend ** 2 + w * ddh / blend
            return p0 + sign * s, sign * v, sign * a
        T = self.travel_time
        if self.direction is Direction.LIFT:
            return self.end_position, 0.0, 0.0
        if t < T:
            return self.end_position - sign * w * (T - t), sign * w, 0.0
        if w <= 0.0:
            return self.end_position, 0.0, 0.0
        extra = min(w * (t - T), self.target_position)
        v = w if extra < self.target_position else 0.0
        return self.end_position + sign * extra, sign * v, 0.0

    def peak_acceleration(self, samples=401):
        """Largest |reference acceleration| over the blend, sampled."""
        blend = self._coef[2]
        return max(abs(self.reference(blend * i / (samples - 1))[2]) for i in range(samples))


def velocity_to_acceleration(vel, cfg):
    vel = check_midi_velocity(vel)
    return cfg.a_min + (vel - 1) / 126.0 * (cfg.a_max - cfg.a_min)


def make_strike_profile(vel, cfg):
    a = velocity_to_acceleration(vel, cfg)
    T = cfg.travel_time
    profile = MotionProfile(
        acceleration=a,
        target_position=0.5 * a * T * T,
        travel_time=T,
        direction=Direction.STRIKE,
        start_position=cfg.default_position,
        end_position=cfg.contact_position,
        coast_time=cfg.coast_time,
    )
    check_strike_feasible(cfg)
    return profile


@functools.lru_cache(maxsize=64)
def check_strike_feasible(cfg):
    """Raise ValueError if some velocity cannot land on the key in ``T``."""
    T = cfg.travel_time
    if cfg.a_max * T * cfg.coast_time >= cfg.stroke:
        raise ValueError("coast distance exceeds the stroke; shorten coast_time")
    if cfg.max_acceleration is not None:
        # the reference acceleration is affine in a at every instant, so its
        # peak over all velocities is attained at one of the two extremes
        worst = max(_strike_peak(cfg, cfg.a_min), _strike_peak(cfg, cfg.a_max))
        if worst > cfg.max_acceleration:
            raise ValueError(
                f"profile needs {worst:.1f} rad/s^2 to reach the key in "
                f"{T * 1e3:.1f} ms; drive limit is {cfg.max_acceleration:.1f}")


def _strike_peak(cfg, a):
    T = cfg.travel_time
    p = MotionProfile(a, 0.5 * a * T * T, T, Direction.STRIKE, cfg.default_position,
                      cfg.contact_position, cfg.coast_time)
    return p.peak_acceleration()


def make_lift_profile(cfg, start_position=None):
    """Rest-to-rest return from the key (or ``start_position``) to the rest angle."""
    start = cfg.contact_position if start_position is None else start_position
    dist = abs(cfg.default_position - start)
    return MotionProfile(
        # peak of the minimum-jerk rest-to-rest move
        acceleration=10 / math.sqrt(3) * dist / cfg.lift_time ** 2,
        target_position=cfg.default_position,
        travel_time=cfg.lift_time,
        direction=Direction.LIFT,
        start_position=start,
        end_position=cfg.default_position,
    )


def impact_speed(profile):
    """Angular speed at the key, ``a T``."""
    if profile.direction is not Direction.STRIKE:
        raise ValueError("impact speed is defined for strike profiles only")
    return profile.impact_speed


def cycle_rate(cfg):
    """Strike-and-lift repetition ceiling in Hz."""
    return 1.0 / (cfg.travel_time + cfg.lift_time)


class StrikeProfiler(TransformerMixin, BaseEstimator):
    """Velocity -> (acceleration, commanded depth, impact speed) transformer.

    ``fit`` only validates the configuration; the map itself is fixed.
    """

    def __init__(self, a_min=1.0, a_max=600.0, travel_time=0.015, lift_time=0.0145,
                 default_position=1.6107963267948966,
                 contact_position=1.5707963267948966, coast_time=0.002,
                 max_acceleration=None):
        self.a_min = a_min
        self.a_max = a_max
        self.travel_time = travel_time
        self.lift_time = lift_time
        self.default_position = default_position
        self.contact_position = contact_position
        self.coast_time = coast_time
        self.max_acceleration = max_acceleration

    @classmethod
    def from_config(cls, cfg):
        return cls(a_min=cfg.a_min, a_max=cfg.a_max, travel_time=cfg.travel_time,
                   lift_time=cfg.lift_time, default_position=cfg.default_position,
                   contact_position=cfg.contact_position, coast_time=cfg.coast_time,
                   max_acceleration=cfg.max_acceleration)

    def fit(self, X=None, y=None):
        self.config_ = ProfilerConfig(**self.get_params())
        check_strike_feasible(self.config_)
        return self

    def profile(self, vel):
        check_is_fitted(self)
        return make_strike_profile(vel, self.config_)

    def transform(self, X):
        check_is_fitted(self)
        vels = check_velocity_array(X)
        cfg = self.config_
        a = cfg.a_min + (vels - 1) / 126.0 * (cfg.a_max - cfg.a_min)
        T = cfg.travel_time
        return np.column_stack([a, 0.5 * a * T * T, a * T])


class ReplannedStrike:
    """A strike re-issued mid-stroke from the measured state.

    From ``t0`` the reference is the quintic that carries the measured
    ``(position, velocity, acceleration)`` onto the original profile's
    coasting state at the end of its blend; from there on it is the original
    profile again, so contact time and impact speed are unchanged.
    ``corrected_acceleration`` is the mean acceleration of the new segment.
    """

    def __init__(self, profile, t0, position, velocity, acceleration=0.0):
        if profile.direction is not Direction.STRIKE:
            raise ValueError("only strike profiles can be replanned")
        sign, w, blend, _ = profile._coef
        tau = blend - t0
        if not tau > 0:
            raise ValueError("replan point must lie inside the blend")
        self.base = profile
        self.t0 = t0
        self.tau = tau
        p1 = profile.end_position - sign * w * profile.coast_time
        v1 = sign * w
        r0 = p1 - (position + velocity * tau + 0.5 * acceleration * tau * tau)
        r1 = v1 - (velocity + acceleration * tau)
        r2 = -acceleration
        self._poly = (position, velocity, 0.5 * acceleration,
                      (10 * r0 - 4 * r1 * tau + 0.5 * r2 * tau * tau) / tau ** 3,
                      (-15 * r0 + 7 * r1 * tau - r2 * tau * tau) / tau ** 4,
                      (6 * r0 - 3 * r1 * tau + 0.5 * r2 * tau * tau) / tau ** 5)
        self.corrected_acceleration = abs(v1 - velocity) / tau

    def __getattr__(self, name):
        return getattr(self.base, name)

    def reference(self, t):
        s = t - self.t0
        if s < 0.0 or s >= self.tau:
            return self.base.reference(t)
        c0, c1, c2, c3, c4, c5 = self._poly
        pos = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))))
        vel = c1 + s * (2 * c2 + s * (3 * c3 + s * (4 * c4 + s * 5 * c5)))
        acc = 2 * c2 + s * (6 * c3 + s * (12 * c4 + s * 20 * c5))
        return pos, vel, acc
