"""Positional PID with integral clamping, as run by the drive's position loop."""

from dataclasses import dataclass

from .validation import check_positive


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float
    integral_limit: float  # Nm, bound on the integral contribution
    output_limit: float  # Nm

    def __post_init__(self):
        for name in ("kp", "ki", "kd", "integral_limit", "output_limit"):
            check_positive(getattr(self, name), name, allow_zero=True)

    def validate_for(self, motor):
        if self.output_limit > motor.peak_torque * (1 + 1e-12):
            raise ValueError("output_limit exceeds the motor's peak torque")
        return self


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0  # integral contribution, Nm
    prev_error: float = None


def _clamp(x, limit):
    return limit if x > limit else (-limit if x < -limit else x)


def pid_step(gains, setpoint, measured, dt, state=None):
    """One PID update. Returns ``(output, new_state)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    state = state or PidState()
    error = setpoint - measured
    integral = _clamp(state.integral + gains.ki * error * dt, gains.integral_limit)
    deriv = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    out = gains.kp * error + integral + gains.kd * deriv
    return _clamp(out, gains.output_limit), PidState(integral, error)


class PidController:
    """Stateful twin of :func:`pid_step` for inner loops."""

    __slots__ = ("gains", "integral", "prev_error")

    def __init__(self, gains):
        self.gains = gains
        self.reset()

    def reset(self):
        self.integral = 0.0
        self.prev_error = None

    def step(self, setpoint, measured, dt):
        g = self.gains
        error = setpoint - measured
        integral = _clamp(self.integral + g.ki * error * dt, g.integral_limit)
        deriv = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.integral = integral
        self.prev_error = error
        return _clamp(g.kp * error + integral + g.kd * deriv, g.output_limit)
