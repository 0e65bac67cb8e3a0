"""Simulated BLDC robotic percussion: mallet dynamics, strike profiles, servo
control, a note gateway, acoustic metering and an experiment bench."""

from .acoustics import AcousticConfig, LiveMeter, SplMeter
from .bench import IntensityLineFit, run_dynamic_sweep, run_speed_sweep
from .config import RigConfig, load_config
from .controller import Striker, StrikeEvent, StrikerStatus, TickLoop, TickScheduler
from .gateway import NoteEvent, Router, default_keymap, parse_datagram, parse_midi
from .profiles import StrikeProfiler
from .servo import ServoAxis
from .tuning import RelayAutoTuner

__version__ = "0.1.0"

__all__ = [
    "AcousticConfig", "LiveMeter", "SplMeter", "IntensityLineFit", "run_dynamic_sweep",
    "run_speed_sweep", "RigConfig", "load_config", "Striker", "StrikeEvent", "StrikerStatus",
    "TickLoop", "TickScheduler", "NoteEvent", "Router", "default_keymap", "parse_datagram",
    "parse_midi", "StrikeProfiler", "ServoAxis", "RelayAutoTuner",
]
