"""Striker activation state machine and the tick-synchronous dispatch loop.

Every striker is advanced one control tick at a time; its drive runs
``oversample`` servo substeps per tick. Notes are dispatched only on tick
boundaries, so a chord whose notes share a tick starts all its strokes in
the same servo sample.
"""

import enum
import heapq
import itertools
import math
import threading
from dataclasses import dataclass, replace

from .profiles import ReplannedStrike, make_lift_profile, make_strike_profile


class StrikerStatus(enum.Enum):
    UNHOMED = "unhomed"
    HOMING = "homing"
    IDLE = "idle"
    STRIKING = "striking"
    LIFTING = "lifting"
    FAULTED = "faulted"


class OrderingError(RuntimeError):
    """A command arrived in a state that cannot accept it."""


class QueueFull(RuntimeError):
    """The scheduler is at capacity; the producer should back off."""


@dataclass(frozen=True)
class StrikeEvent:
    tick: int
    striker: int
    kind: str  # dispatch, contact, idle, fault, drop, homed
    impact_speed: float = 0.0
    time: float = None  # loop time in s, for contacts the latched crossing time
    velocity: int = None
    detail: str = ""

    def log_line(self):
        return f"{self.tick} {self.striker} {self.kind} {self.impact_speed:.6g}"


@dataclass(frozen=True)
class ControllerConfig:
    contact_threshold: float = 0.002  # rad/s, "stopped" for contact detection
    contact_zone: float = 1e-4  # rad above the key where the velocity detector is armed
    checkpoint_tolerance: float = 0.02
    compensate: bool = True
    liveness_factor: float = 3.0
    homing_speed: float = 1.0  # rad/s
    homing_torque: float = 0.15  # Nm, torque limit while seeking the stop
    home_angle: float = 1.5707963267948966 + 0.6  # encoder angle assigned to the stop
    stall_time: float = 0.02
    homing_min_travel: float = 0.05
    homing_timeout: float = 2.0
    approach_time: float = 0.3  # stop -> rest move
    encoder_resolution: float = 2 * math.pi / 2 ** 23
    freeze_after: int = 40  # still substeps before an idle striker is frozen


class _Ramp:
    """Constant-speed reference used while seeking the homing stop."""

    def __init__(self, start, speed):
        self.start = start
        self.speed = speed

    def reference(self, t):
        return self.start + self.speed * t, self.speed, 0.0


class Striker:
    """One BLDC striker: drive, encoder zero and the activation state machine."""

    def __init__(self, index, servo, profiler_cfg, cfg=None):
        self.index = index
        self.servo = servo
        self.profiler = profiler_cfg
        self.cfg = cfg or ControllerConfig()
        self.status = StrikerStatus.UNHOMED
        # power-on: the encoder reads zero wherever the mallet happens to rest
        servo.encoder_offset = servo.plant.theta
        servo.enabled = False
        self._still = 0
        self.frozen = False
        self.replans = 0
        self._clear_stroke()

    def _clear_stroke(self):
        self._dispatch_tick = None
        self._dispatch_time = None
        self._velocity = None
        self._checked = False
        self._impact = None

    @property
    def tick_period(self):
        return self.servo.tick_period

    # -- homing -----------------------------------------------------------

    def home(self):
        """Seek the upper stop, zero the encoder there, and park at the rest angle."""
        if self.status not in (StrikerStatus.UNHOMED, StrikerStatus.IDLE):
            raise OrderingError(f"cannot home from {self.status.value}")
        cfg = self.cfg
        servo = self.servo
        self.status = StrikerStatus.HOMING
        self.frozen = False
        servo.enabled = True
        servo.pid.reset()
        servo.torque_limit = cfg.homing_torque
        start = servo.measured_angle
        servo.command(_Ramp(start, cfg.homing_speed))
        need = int(round(cfg.stall_time / servo.dt))
        still = 0
        for _ in range(int(round(cfg.homing_timeout / servo.dt))):
            servo.substep()
            moved = servo.measured_angle - start > cfg.homing_min_travel
            still = still + 1 if moved and abs(servo.plant.omega) < cfg.contact_threshold else 0
            if still >= need:
                break
        else:
            return self._fault_homing()
        res = cfg.encoder_resolution
        reading = round(servo.measured_angle / res) * res
        servo.encoder_offset += reading - cfg.home_angle
        servo.pid.reset()
        servo.torque_limit = servo.motor.peak_torque
        move = make_lift_profile(self._approach_cfg(), start_position=servo.measured_angle)
        servo.command(move)
        for _ in range(int(round(cfg.approach_time / servo.dt))):
            servo.substep()
        # finish on a whole tick so tick arithmetic stays exact
        while servo.profile_time() < move.duration - 1e-12 or not self._on_tick():
            servo.substep()
        servo.hold_at(self.profiler.default_position)
        self.status = StrikerStatus.FAULTED if servo.tripped else StrikerStatus.IDLE
        self._still = 0
        return self.status

    def _on_tick(self):
        n = self.servo.plant.time / self.servo.tick_period
        return abs(n - round(n)) < 1e-6

    def _approach_cfg(self):
        return replace(self.profiler, lift_time=self.cfg.approach_time)

    def _fault_homing(self):
        self.servo.enabled = False
        self.status = StrikerStatus.FAULTED
        return self.status

    # -- strokes ----------------------------------------------------------

    def dispatch(self, velocity, tick):
        if self.status is not StrikerStatus.IDLE:
            raise OrderingError(f"striker {self.index} is {self.status.value}, not idle")
        profile = make_strike_profile(velocity, self.profiler)
        self.frozen = False
        self._still = 0
        self.servo.command(profile)
        self._dispatch_tick = tick
        self._dispatch_time = self.servo.plant.time
        self._velocity = velocity
        self.status = StrikerStatus.STRIKING
        return StrikeEvent(tick, self.index, "dispatch", 0.0, tick * self.tick_period, velocity)

    def reset(self):
        """Leave Faulted; the striker must be homed again."""
        servo = self.servo
        servo.monitor.reset()
        servo.pid.reset()
        servo.enabled = False
        servo.profile = None
        self._clear_stroke()
        self.status = StrikerStatus.UNHOMED

    @property
    def quiescent(self):
        """True when ticks can be skipped without changing the outcome."""
        return self.status is StrikerStatus.UNHOMED or self.frozen

    def skip(self, ticks):
        seconds = ticks * self.servo.tick_period
        self.servo.plant.time += seconds
        self.servo.monitor.rest(seconds)

    def advance(self, tick):
        """Run one control tick starting at ``tick``; return the events it produced."""
        servo = self.servo
        if self.quiescent:
            self.skip(1)
            return []
        events = []
        for _ in range(servo.oversample):
            impact = servo.substep()
            if servo.tripped and self.status is not StrikerStatus.FAULTED:
                self.status = StrikerStatus.FAULTED
                events.append(StrikeEvent(tick, self.index, "fault",
                                          time=(tick + 1) * self.tick_period,
                                          detail="overcurrent"))
                self._clear_stroke()
                continue
            status = self.status
            if status is StrikerStatus.FAULTED:
                continue
            if status is StrikerStatus.STRIKING:
                if impact > 0.0 and self._impact is None:
                    self._impact = (impact, servo.plant.impact_time)
                ev = self._watch_stroke(tick)
                if ev is not None:
                    events.append(ev)
            elif status is StrikerStatus.LIFTING:
                if servo.profile_time() >= servo.profile.duration - 1e-12:
                    servo.hold_at(self.profiler.default_position)
                    self.status = StrikerStatus.IDLE
                    self._still = 0
                    events.append(StrikeEvent(tick + 1, self.index, "idle",
                                              time=(tick + 1) * self.tick_period))
            elif status is StrikerStatus.IDLE:
                plant = servo.plant
                if plant.omega == 0.0 and abs(plant.current) <= servo.monitor.i_nom:
                    self._still += 1
                else:
                    self._still = 0
        if self.status is StrikerStatus.IDLE and self._still >= self.cfg.freeze_after:
            self.frozen = True
        return events

    def _watch_stroke(self, tick):
        servo = self.servo
        cfg = self.cfg
        prof = self.profiler
        t = servo.profile_time()
        T = prof.travel_time
        if cfg.compensate and not self._checked and t >= 0.5 * T:
            self._checked = True
            self._checkpoint(t)
        angle = servo.measured_angle
        contact = angle <= prof.contact_position
        if not contact and t >= 0.5 * T and angle - prof.contact_position <= cfg.contact_zone:
            contact = abs(servo.plant.omega) < cfg.contact_threshold
        if contact:
            return self._on_contact(tick)
        if t > cfg.liveness_factor * T:
            self.status = StrikerStatus.FAULTED
            servo.enabled = False
            self._clear_stroke()
            return StrikeEvent(tick + 1, self.index, "fault",
                               time=(tick + 1) * self.tick_period, detail="no contact")
        return None

    def _checkpoint(self, t):
        """Mid-stroke velocity check.

        The effective inertia is re-estimated from the impulse delivered since
        dispatch and the measured speed, which corrects the acceleration
        feedforward for the rest of the stroke (and later ones). If the speed
        deviates from the reference beyond tolerance, the remainder of the
        stroke is also re-issued from the measured state.
        """
        servo = self.servo
        pos, vel, acc = servo.reference()
        measured = servo.plant.omega
        if abs(measured) > 0.0:
            estimate = servo.impulse / measured
            if 0.5 * servo.model_inertia < estimate < 2.0 * servo.model_inertia:
                servo.model_inertia = estimate
        if abs(measured - vel) <= self.cfg.checkpoint_tolerance * abs(vel):
            return
        base = servo.profile
        if t >= base.travel_time - base.coast_time:
            return
        start = servo.profile_start
        servo.command(ReplannedStrike(base, t, servo.measured_angle, measured, acc),
                      start_time=start)
        self.replans += 1

    def _on_contact(self, tick):
        servo = self.servo
        tp = self.tick_period
        if self._impact is not None:
            speed, t_hit = self._impact
        else:
            speed, t_hit = 0.0, servo.plant.time
        elapsed = t_hit - self._dispatch_time
        event = StrikeEvent(self._dispatch_tick + int(round(elapsed / tp)), self.index,
                            "contact", speed, self._dispatch_tick * tp + elapsed,
                            self._velocity)
        servo.command(make_lift_profile(self.profiler, start_position=servo.measured_angle))
        self.status = StrikerStatus.LIFTING
        self._clear_stroke()
        return event


class TickScheduler:
    """Thread-safe, bounded queue of notes keyed by dispatch tick.

    ``window`` is the number of ticks one stroke occupies a striker; a note
    that would land inside another note's window on the same striker is the
    later of the two and is dropped.
    """

    def __init__(self, tick_period=1e-3, window=30, capacity=4096, start_tick=0):
        self.tick_period = tick_period
        self.window = window
        self.capacity = capacity
        self.current_tick = start_tick
        self.dropped = 0
        self._heap = []
        self._live = 0
        self._by_striker = {}
        self._seq = itertools.count()
        self._lock = threading.Lock()

    def __len__(self):
        return self._live

    def schedule_note(self, note, striker):
        """Queue ``note`` for ``striker``. Returns False if it was dropped as a conflict."""
        with self._lock:
            if note.tick < self.current_tick:
                raise ValueError(f"note tick {note.tick} is in the past "
                                 f"(now {self.current_tick})")
            if self._live >= self.capacity:
                raise QueueFull(f"scheduler holds {self.capacity} notes")
            # bookings this old can no longer conflict with any future note
            horizon = self.current_tick - self.window
            booked = [e for e in self._by_striker.get(striker, ())
                      if e["tick"] > horizon and not e["cancelled"]]
            self._by_striker[striker] = booked
            for other in booked:
                if abs(other["tick"] - note.tick) >= self.window:
                    continue
                if other["tick"] <= note.tick:
                    self.dropped += 1
                    return False
                other["cancelled"] = True
                self._live -= 1
                self.dropped += 1
            entry = {"tick": note.tick, "cancelled": False}
            booked.append(entry)
            heapq.heappush(self._heap, (note.tick, next(self._seq), (note, striker), entry))
            self._live += 1
            return True

    def next_due(self):
        """Tick of the earliest queued note, or None."""
        with self._lock:
            heap = self._heap
            while heap and heap[0][3]["cancelled"]:
                heapq.heappop(heap)
            return heap[0][0] if heap else None

    def pop_due(self, tick):
        """Remove and return ``(note, striker)`` pairs due at ``tick``."""
        due = []
        with self._lock:
            heap = self._heap
            while heap and heap[0][0] <= tick:
                _, _, item, entry = heapq.heappop(heap)
                if not entry["cancelled"]:
                    due.append(item)
                    self._live -= 1
            self.current_tick = tick + 1
        return due


class TickLoop:
    """Single owner of the strikers: dispatch due notes, then advance every striker.

    ``strikers`` is a sequence (indexed by position) or a mapping from striker
    index to striker.
    """

    def __init__(self, strikers, scheduler, start_tick=None):
        if not isinstance(strikers, dict):
            strikers = dict(enumerate(strikers))
        self.strikers = strikers
        self.scheduler = scheduler
        self.tick = scheduler.current_tick if start_tick is None else start_tick
        scheduler.current_tick = self.tick
        self.dropped = 0
        for s in strikers.values():
            if s.status not in (StrikerStatus.IDLE, StrikerStatus.FAULTED):
                raise OrderingError(f"striker {s.index} is {s.status.value}; home it first")

    def step(self):
        tick = self.tick
        events = []
        for note, idx in self.scheduler.pop_due(tick):
            striker = self.strikers.get(idx)
            if striker is not None and striker.status is StrikerStatus.IDLE:
                events.append(striker.dispatch(note.velocity, tick))
            else:
                self.dropped += 1
                why = "absent" if striker is None else striker.status.value
                events.append(StrikeEvent(tick, idx, "drop", time=tick * self.scheduler.tick_period,
                                          velocity=note.velocity, detail=why))
        for striker in self.strikers.values():
            events.extend(striker.advance(tick))
        self.tick = tick + 1
        return events

    def run(self, ticks):
        events = []
        for _ in range(ticks):
            events.extend(self.step())
        return events

    def quiescent(self):
        return all(s.quiescent for s in self.strikers.values())

    def fast_forward(self, until):
        """Jump to tick ``until`` (or the next due note) if nothing is moving."""
        due = self.scheduler.next_due()
        target = until if due is None else min(until, due)
        if target <= self.tick or not self.quiescent():
            return 0
        n = target - self.tick
        for s in self.strikers.values():
            s.skip(n)
        self.tick = target
        self.scheduler.current_tick = target
        return n

    def run_to(self, tick):
        """Advance to ``tick``, skipping quiescent stretches."""
        events = []
        while self.tick < tick:
            if not self.fast_forward(tick):
                events.extend(self.step())
        return events

    def run_until_idle(self, max_ticks=100000):
        """Step until the queue is empty and no striker is mid-stroke."""
        events = []
        busy = (StrikerStatus.STRIKING, StrikerStatus.LIFTING)
        for _ in range(max_ticks):
            if not len(self.scheduler) and not any(
                    s.status in busy for s in self.strikers.values()):
                return events
            events.extend(self.step())
        raise RuntimeError("loop did not go idle")
