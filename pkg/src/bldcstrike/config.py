"""Rig configuration: one INI file with a section per subsystem."""

import configparser
import functools
import math
from dataclasses import dataclass
from importlib import resources

from .acoustics import AcousticConfig
from .controller import ControllerConfig
from .gateway import KeyEntry, default_keymap
from .mallet import MalletGeometry, MotorSpec, StrikeConfig, friction_torque, mallet_inertia
from .pid import PidGains
from .profiles import ProfilerConfig
from .solenoid import SolenoidSpec
from .tuning import auto_tune


@dataclass(frozen=True)
class ServoSettings:
    tick_period: float = 1e-3
    oversample: int = 8
    gains: PidGains = None  # None: relay auto-tune
    i2t_limit: float = math.inf
    i2t_cooldown: float = 1.5
    upper_stop_offset: float = 0.6


@dataclass(frozen=True)
class BenchSettings:
    pitch: int = 36
    strokes_per_velocity: int = 6
    stroke_interval: float = 1.0
    first_stroke: float = 1.0
    tail: float = 1.5
    trial_duration: float = 3.0
    rate_step: float = 0.1
    speed_velocity: int = 127
    bldc_start_rate: float = 31.0
    solenoid_start_rate: float = 7.0
    max_rate: float = 60.0


@dataclass(frozen=True)
class GatewaySettings:
    port: int = 9000
    capacity: int = 4096
    raw_midi: bool = False


@dataclass(frozen=True)
class RigConfig:
    geometry: MalletGeometry
    motor: MotorSpec
    strike: StrikeConfig
    net_torque: float
    envelope: tuple  # (max diameter, max depth), m
    profiler: ProfilerConfig
    servo: ServoSettings
    controller: ControllerConfig
    solenoid: SolenoidSpec
    acoustics: AcousticConfig
    keymap: object
    axis_v_max: float
    axis_a_max: float
    bench: BenchSettings
    gateway: GatewaySettings

    @property
    def gains(self):
        if self.servo.gains is not None:
            return self.servo.gains
        return _tuned_gains(self.geometry, self.motor, self.strike, self.servo.tick_period,
                            self.servo.oversample)

    @property
    def inertia(self):
        return mallet_inertia(self.geometry) + self.motor.rotor_inertia

    @property
    def upper_stop(self):
        return self.strike.contact_angle + self.servo.upper_stop_offset


@functools.lru_cache(maxsize=8)
def _tuned_gains(geom, motor, strike, tick_period, oversample):
    return auto_tune(geom, motor, strike, tick_period=tick_period, oversample=oversample)


def reference_path():
    return resources.files("bldcstrike").joinpath("data/reference.cfg")


def read_parser(path=None):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is None:
        parser.read_string(reference_path().read_text(encoding="utf-8"))
    else:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    return parser


def load_config(path=None):
    """Load a rig file; ``None`` loads the packaged reference rig."""
    return config_from_parser(read_parser(path))


def _floats(section, *names):
    return {n: section.getfloat(n) for n in names}


def config_from_parser(p):
    m = p["mallet"]
    geom = MalletGeometry(**_floats(m, "ball_radius", "ball_mass", "rod_length", "rod_mass"))
    motor = MotorSpec(**_floats(p["motor"], "torque_constant", "no_load_current",
                                "nominal_torque", "max_current", "rotor_inertia",
                                "diameter", "depth"))
    s = p["strike"]
    strike = StrikeConfig(s.getfloat("contact_angle"), s.getfloat("gravity"))

    inertia = mallet_inertia(geom) + motor.rotor_inertia
    gravity_moment = geom.mass_moment * strike.gravity
    # what the drive has left for acceleration after friction and gravity
    headroom = (motor.peak_torque - friction_torque(motor) - gravity_moment) / inertia
    pr = p["profiler"]
    contact = strike.contact_angle
    profiler = ProfilerConfig(
        a_min=pr.getfloat("a_min"), a_max=pr.getfloat("a_max"),
        travel_time=pr.getfloat("travel_time"), lift_time=pr.getfloat("lift_time"),
        default_position=contact + pr.getfloat("stroke"), contact_position=contact,
        coast_time=pr.getfloat("coast_time"), max_acceleration=headroom)

    sv = p["servo"]
    gains = None
    if sv.get("gains", "auto").strip().lower() != "auto":
        gains = PidGains(**_floats(sv, "kp", "ki", "kd", "integral_limit", "output_limit"))
        gains.validate_for(motor)
    servo = ServoSettings(tick_period=sv.getfloat("tick_period"),
                          oversample=sv.getint("oversample"), gains=gains,
                          i2t_limit=sv.getfloat("i2t_limit"),
                          i2t_cooldown=sv.getfloat("i2t_cooldown"),
                          upper_stop_offset=sv.getfloat("upper_stop_offset"))

    c = p["controller"]
    controller = ControllerConfig(
        contact_threshold=c.getfloat("contact_threshold"),
        contact_zone=c.getfloat("contact_zone"),
        checkpoint_tolerance=c.getfloat("checkpoint_tolerance"),
        compensate=c.getboolean("compensate"),
        liveness_factor=c.getfloat("liveness_factor"),
        homing_speed=c.getfloat("homing_speed"),
        homing_torque=c.getfloat("homing_torque"),
        home_angle=contact + servo.upper_stop_offset,
        stall_time=c.getfloat("stall_time"),
        homing_timeout=c.getfloat("homing_timeout"),
        approach_time=c.getfloat("approach_time"),
        encoder_resolution=2 * math.pi / 2 ** c.getint("encoder_bits"))

    so = p["solenoid"]
    solenoid = SolenoidSpec(
        saturation_velocity=so.getint("saturation_velocity"),
        **_floats(so, "max_force_torque", "noise_sigma", "min_spl_floor", "floor_speed",
                  "inertia", "drive_time", "return_time"))

    acoustics = AcousticConfig(**_floats(
        p["acoustics"], "coupling_k", "reference_intensity", "room_noise_db",
        "meter_time_constant", "sample_period", "decay_time", "sample_rate", "resolution_db"))

    k = p["keymap"]
    keymap = default_keymap(k.getint("lowest"), k.getint("highest"), k.getint("arms"),
                            k.getfloat("key_spacing"), k.getfloat("travel"))
    overrides = {}
    for key, value in k.items():
        if key.startswith("override."):
            pos, striker, color = (v.strip() for v in value.split(","))
            overrides[int(key.split(".", 1)[1])] = KeyEntry(float(pos), int(striker), color)
    if overrides:
        keymap = keymap.with_overrides(overrides)

    b = p["bench"]
    bench = BenchSettings(
        pitch=b.getint("pitch"), strokes_per_velocity=b.getint("strokes_per_velocity"),
        speed_velocity=b.getint("speed_velocity"),
        **_floats(b, "stroke_interval", "first_stroke", "tail", "trial_duration", "rate_step",
                  "bldc_start_rate", "solenoid_start_rate", "max_rate"))
    g = p["gateway"]
    gateway = GatewaySettings(g.getint("port"), g.getint("capacity"), g.getboolean("raw_midi"))

    return RigConfig(geom, motor, strike, s.getfloat("net_torque"),
                     (s.getfloat("envelope_diameter"), s.getfloat("envelope_depth")),
                     profiler, servo, controller, solenoid, acoustics, keymap,
                     p["axis"].getfloat("v_max"), p["axis"].getfloat("a_max"), bench, gateway)
