"""Recompute the calibrated constants of a rig file.

Prints the values for [profiler] a_min, [acoustics] coupling_k,
[solenoid] floor_speed / max_force_torque and [servo] i2t_limit. Run it after
changing anything upstream of those numbers and copy the output into the
config by hand.

    python scripts/calibrate.py [rig.cfg]
"""

import copy
import sys
from dataclasses import replace

import numpy as np

from bldcstrike import bench
from bldcstrike.acoustics import contact_impulses, meter_process, reading_after, \
    render_intensity, spl_to_intensity
from bldcstrike.config import load_config

SLOPE = 1.4472e-06  # W/m^2 per velocity step
BLDC_FLOOR_DB = 57.0
SOLENOID_FLOOR_DB = 73.0
SOLENOID_TOP_DB = 83.0
TARGET_RATE = 32.9  # Hz, last rate that must not trip


def excess_per_stroke(cfg, actuator, seed=0):
    """Mean reading intensity above noise per velocity, at unit coupling, unquantized."""
    ac = replace(cfg.acoustics, coupling_k=1.0, resolution_db=1e-9)
    cfg = replace(cfg, acoustics=ac)
    idx = bench.experiment_striker(cfg)
    striker = bench.build_actuator(cfg, actuator, idx, seed)
    loop, router = bench.make_loop(cfg, {idx: striker})
    notes = [router.submit(n) for n in bench.sweep_notes(cfg)]
    end = notes[-1].tick + int(round(cfg.bench.tail / cfg.servo.tick_period))
    events = loop.run_to(end)
    recs = bench.records_from_events(cfg, notes, events, end * cfg.servo.tick_period)
    vels, means, _ = bench.per_velocity(recs, "intensity")
    return vels, means - ac.noise_intensity


def calibrate_bldc(cfg, rounds=4):
    noise = cfg.acoustics.noise_intensity
    floor = spl_to_intensity(BLDC_FLOOR_DB) - noise
    a_min = cfg.profiler.a_min
    for _ in range(rounds):
        cfg = replace(cfg, profiler=replace(cfg.profiler, a_min=a_min))
        vels, excess = excess_per_stroke(cfg, "bldc")
        slope = np.polyfit(vels, excess, 1)[0]
        k = SLOPE / slope
        a_min *= floor / (k * excess[0])
    return a_min, k


def calibrate_solenoid(cfg):
    spec = replace(cfg.solenoid, noise_sigma=0.0)
    cfg = replace(cfg, solenoid=spec)
    vels, excess = excess_per_stroke(cfg, "solenoid")
    k = cfg.acoustics.coupling_k
    noise = cfg.acoustics.noise_intensity
    gain_floor = excess[0] / spec.floor_speed
    top = vels >= spec.saturation_velocity
    gain_top = excess[top].mean() / spec.saturation_speed
    floor_speed = (spl_to_intensity(SOLENOID_FLOOR_DB) - noise) / (k * gain_floor)
    sat_speed = (spl_to_intensity(SOLENOID_TOP_DB) - noise) / (k * gain_top)
    force = sat_speed * spec.inertia / spec.drive_time
    return floor_speed, force


def trial_peak_i2t(cfg, prototype, rate):
    striker = copy.deepcopy(prototype)
    loop, router = bench.make_loop(cfg, {striker.index: striker})
    notes = bench.trial_notes(cfg, rate, loop.tick + 1)
    for n in notes:
        router.submit(n)
    end = notes[-1].tick + bench.stroke_window(cfg) + 1
    peak = 0.0
    while loop.tick < end:
        loop.step()
        peak = max(peak, striker.servo.monitor.i2t)
    return peak


def calibrate_i2t(cfg, rates=(32.5, 32.6, 32.7, 32.8, 32.9, 33.0, 33.1)):
    cfg = replace(cfg, servo=replace(cfg.servo, i2t_limit=float("inf")))
    proto = bench.build_striker(cfg, bench.experiment_striker(cfg))
    peaks = {r: trial_peak_i2t(cfg, proto, r) for r in rates}
    for r, p in peaks.items():
        print(f"  rate {r:5.1f} Hz: peak i2t {p:.6f} A^2 s")
    safe = max(p for r, p in peaks.items() if r <= TARGET_RATE + 1e-9)
    trip = min(p for r, p in peaks.items() if r > TARGET_RATE + 1e-9)
    if trip <= safe:
        print("  warning: peak i2t is not monotone across the target rate")
    return 0.5 * (safe + trip)


def main(argv):
    cfg = load_config(argv[1] if len(argv) > 1 else None)
    a_min, k = calibrate_bldc(cfg)
    print(f"[profiler] a_min = {a_min:.6g}")
    print(f"[acoustics] coupling_k = {k:.6g}")
    cfg = replace(cfg, profiler=replace(cfg.profiler, a_min=a_min),
                  acoustics=replace(cfg.acoustics, coupling_k=k))
    floor_speed, force = calibrate_solenoid(cfg)
    print(f"[solenoid] floor_speed = {floor_speed:.6g}")
    print(f"[solenoid] max_force_torque = {force:.6g}")
    limit = calibrate_i2t(cfg)
    print(f"[servo] i2t_limit = {limit:.6g}")


if __name__ == "__main__":
    main(sys.argv)
