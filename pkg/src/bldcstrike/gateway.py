"""Note ingress: MIDI bytes, UDP datagrams and note files, plus pitch routing.

Datagram wire format (all integers unsigned, big-endian)::

    "RBMP" | version u8 (=1) | count u8 | count x (pitch u8, velocity u8, tick_offset u16)

``tick_offset`` counts ticks from the first tick boundary after receipt, so
offset 0 means "as soon as possible". Records with velocity 0 are note-offs
and are skipped.
"""

import math
import struct
import threading
from dataclasses import dataclass, field

from .validation import check_positive

MAGIC = b"RBMP"
VERSION = 1
HEADER = struct.Struct(">4sBB")
RECORD = struct.Struct(">BBH")
MAX_RECORDS = 255
MAX_DATAGRAM = HEADER.size + MAX_RECORDS * RECORD.size

# data bytes following each status nibble; 0xF0 (sysex) runs to 0xF7
_DATA_LEN = {0x8: 2, 0x9: 2, 0xA: 2, 0xB: 2, 0xC: 1, 0xD: 1, 0xE: 2}
_SYSTEM_LEN = {0xF1: 1, 0xF2: 2, 0xF3: 1}

WHITE_STEPS = (0, 2, 4, 5, 7, 9, 11)


class MidiParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class DatagramError(ValueError):
    pass


class RoutingError(LookupError):
    pass


@dataclass(frozen=True, order=True)
class NoteEvent:
    tick: int
    pitch: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside 0..127")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1..127")
        if self.tick < 0:
            raise ValueError("tick must be nonnegative")


def parse_midi(data):
    """Extract ``(pitch, velocity)`` note-ons from whole MIDI channel messages."""
    data = bytes(data)
    out = []
    i = 0
    n = len(data)
    while i < n:
        status = data[i]
        if status < 0x80:
            raise MidiParseError("data byte without status (running status unsupported)", i)
        if status == 0xF0:
            end = data.find(b"\xf7", i + 1)
            if end < 0:
                raise MidiParseError("unterminated system exclusive", i)
            for j in range(i + 1, end):
                if data[j] >= 0x80:
                    raise MidiParseError("status byte inside system exclusive", j)
            i = end + 1
            continue
        length = _SYSTEM_LEN.get(status, 0) if status >= 0xF0 else _DATA_LEN[status >> 4]
        body = data[i + 1:i + 1 + length]
        if len(body) < length:
            raise MidiParseError("truncated message", i)
        for j, b in enumerate(body):
            if b >= 0x80:
                raise MidiParseError("data byte out of range", i + 1 + j)
        if status >> 4 == 0x9 and body[1] >= 1:
            out.append((body[0], body[1]))
        i += 1 + length
    return out


def parse_datagram(data, receipt_tick):
    """Decode one wire-format datagram into NoteEvents."""
    data = bytes(data)
    if len(data) > MAX_DATAGRAM:
        raise DatagramError(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}")
    if len(data) < HEADER.size:
        raise DatagramError("datagram shorter than its header")
    magic, version, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatagramError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatagramError(f"unsupported version {version}")
    if len(data) != HEADER.size + count * RECORD.size:
        raise DatagramError(f"header announces {count} records, "
                            f"payload holds {(len(data) - HEADER.size) / RECORD.size:g}")
    base = receipt_tick + 1
    events = []
    for k in range(count):
        pitch, vel, offset = RECORD.unpack_from(data, HEADER.size + k * RECORD.size)
        if pitch > 127 or vel > 127:
            raise DatagramError(f"record {k} out of MIDI range")
        if vel:
            events.append(NoteEvent(base + offset, pitch, vel))
    return events


def parse_raw_midi_datagram(data, receipt_tick):
    """Second datagram mode: raw MIDI bytes, every note at the next tick."""
    return [NoteEvent(receipt_tick + 1, p, v) for p, v in parse_midi(data)]


def read_notes(lines):
    """Parse ``tick pitch velocity`` lines (``#`` starts a comment).

    Velocity-0 lines are note-offs and are skipped.
    """
    events = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'tick pitch velocity'")
        try:
            tick, pitch, vel = (int(p) for p in parts)
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field") from None
        if vel == 0:
            continue
        try:
            events.append(NoteEvent(tick, pitch, vel))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return events


def load_notes(path):
    with open(path, encoding="utf-8") as fh:
        return read_notes(fh)


# -- key map --------------------------------------------------------------

def is_white(pitch):
    return pitch % 12 in WHITE_STEPS


@dataclass(frozen=True)
class KeyEntry:
    axis_position: float  # m along the arm's linear axis
    striker_index: int
    key_color: str  # "white" or "black"

    @property
    def arm(self):
        return self.striker_index % 4


@dataclass(frozen=True)
class KeyMap:
    entries: dict
    travel: float = 0.5  # m, length of each arm's axis

    def __post_init__(self):
        for pitch, e in self.entries.items():
            if not 0 <= e.axis_position <= self.travel:
                raise ValueError(f"pitch {pitch} maps outside the axis travel")
            if not 0 <= e.striker_index <= 7:
                raise ValueError(f"pitch {pitch} maps to striker {e.striker_index}")
            lower = e.striker_index < 4
            if (e.key_color == "white") != lower:
                raise ValueError(f"pitch {pitch}: white keys use strikers 0-3, "
                                 "black keys strikers 4-7")

    def with_overrides(self, overrides):
        merged = dict(self.entries)
        merged.update(overrides)
        return KeyMap(merged, self.travel)


def default_keymap(lowest=36, highest=96, arms=4, key_spacing=0.055, travel=0.5):
    """Split the range into ``arms`` contiguous zones of white keys.

    Within a zone a white key sits at ``index * key_spacing`` along the axis
    and plays on the arm's lower striker; a black key sits halfway to the next
    white key and plays on the arm's top striker.
    """
    whites = [p for p in range(lowest, highest + 1) if is_white(p)]
    per_arm = math.ceil(len(whites) / arms)
    entries = {}
    for k, p in enumerate(whites):
        arm, slot = divmod(k, per_arm)
        entries[p] = KeyEntry(slot * key_spacing, arm, "white")
        sharp = p + 1
        if sharp <= highest and not is_white(sharp):
            entries[sharp] = KeyEntry((slot + 0.5) * key_spacing, arm + 4, "black")
    return KeyMap(entries, travel)


def map_pitch(keymap, pitch):
    try:
        return keymap.entries[pitch]
    except KeyError:
        raise RoutingError(f"pitch {pitch} is not on the key map") from None


# -- linear axis ----------------------------------------------------------

@dataclass(frozen=True)
class LinearAxisState:
    position: float
    velocity: float = 0.0
    v_max: float = 1.0
    a_max: float = 10.0
    travel: float = 0.5

    def __post_init__(self):
        check_positive(self.v_max, "v_max")
        check_positive(self.a_max, "a_max")
        if abs(self.velocity) > self.v_max * (1 + 1e-12):
            raise ValueError("velocity exceeds v_max")


def axis_step(state, target, dt):
    """One step of a time-optimal move toward ``target`` within v_max/a_max.

    The commanded speed follows the discrete braking curve, so the axis can
    always stop at the target without exceeding the acceleration limit.
    """
    if not 0 <= target <= state.travel:
        raise ValueError(f"target {target} outside axis travel 0..{state.travel}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    a = state.a_max
    d = target - state.position
    v = state.velocity
    dv = a * dt
    if abs(d) <= 1e-12 and abs(v) <= dv:
        return LinearAxisState(target, 0.0, state.v_max, a, state.travel)
    # braking-curve speed that stops exactly at the target under semi-implicit stepping
    half = 0.5 * dv
    brake = -half + math.sqrt(half * half + 2 * a * abs(d))
    desired = math.copysign(min(state.v_max, brake), d)
    if abs(desired) * dt > abs(d):
        desired = d / dt  # land on the target this step
    new_v = v + max(-dv, min(dv, desired - v))
    pos = state.position + new_v * dt
    if abs(target - pos) <= 1e-12:
        pos = target
    return LinearAxisState(pos, new_v, state.v_max, a, state.travel)


def arrival_time(distance, v_max, a_max):
    """Rest-to-rest trapezoidal move time over ``distance``."""
    d = abs(distance)
    if d == 0:
        return 0.0
    if d >= v_max * v_max / a_max:
        return d / v_max + v_max / a_max
    return 2.0 * math.sqrt(d / a_max)


def arrival_ticks(distance, v_max, a_max, tick_period):
    return int(math.ceil(arrival_time(distance, v_max, a_max) / tick_period - 1e-9))


# -- routing --------------------------------------------------------------

@dataclass(frozen=True)
class LateArrival:
    note: NoteEvent
    striker: int
    arrival_tick: int


@dataclass
class GatewayStats:
    datagrams: int = 0
    rejected: int = 0
    notes: int = 0
    unroutable: int = 0
    late: int = 0
    conflicts: int = 0
    late_log: list = field(default_factory=list)


class Router:
    """Route notes to strikers, plan the arm slides and hand notes to the scheduler.

    A note whose arm cannot arrive in time is struck at the arrival tick
    instead and logged as late.
    """

    def __init__(self, keymap, scheduler, v_max=1.0, a_max=10.0, home_position=0.0):
        self.keymap = keymap
        self.scheduler = scheduler
        self.v_max = v_max
        self.a_max = a_max
        self.stats = GatewayStats()
        self._arms = {}  # arm -> (position, tick from which it is free to move)
        self._home = home_position
        self._lock = threading.Lock()

    def submit(self, note):
        """Route one note; returns the scheduled NoteEvent or None if it was dropped."""
        with self._lock:
            self.stats.notes += 1
            try:
                entry = map_pitch(self.keymap, note.pitch)
            except RoutingError:
                self.stats.unroutable += 1
                return None
            now = self.scheduler.current_tick
            pos, free = self._arms.get(entry.arm, (self._home, now))
            depart = max(free, now)
            arrive = depart + arrival_ticks(entry.axis_position - pos, self.v_max,
                                            self.a_max, self.scheduler.tick_period)
            if arrive > note.tick:
                self.stats.late += 1
                self.stats.late_log.append(LateArrival(note, entry.striker_index, arrive))
                note = NoteEvent(arrive, note.pitch, note.velocity)
            if not self.scheduler.schedule_note(note, entry.striker_index):
                self.stats.conflicts += 1
                return None
            self._arms[entry.arm] = (entry.axis_position, note.tick)
            return note

    def handle_datagram(self, data, receipt_tick, raw_midi=False):
        """Parse and route one datagram; malformed input is counted, never raised."""
        self.stats.datagrams += 1
        try:
            notes = (parse_raw_midi_datagram if raw_midi else parse_datagram)(data, receipt_tick)
        except ValueError:
            self.stats.rejected += 1
            return []
        return [n for n in (self.submit(note) for note in notes) if n is not None]
