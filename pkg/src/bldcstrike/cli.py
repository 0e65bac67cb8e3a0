"""Command-line entry point: ``bldcstrike <command> ...``."""

import argparse
import sys

from . import bench
from .config import load_config
from .gateway import NoteEvent, RoutingError, load_notes, map_pitch


def _cmd_home(cfg, args):
    striker = bench.build_striker(cfg, args.striker, home=False)
    status = striker.home()
    print(f"striker {args.striker}: {status.value}, "
          f"angle {striker.servo.measured_angle:.6f} rad "
          f"(rest {cfg.profiler.default_position:.6f})")
    return 0 if status.value == "idle" else 1


def _cmd_strike(cfg, args):
    try:
        map_pitch(cfg.keymap, args.pitch)
    except RoutingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    events, _ = bench.play(cfg, [NoteEvent(1, args.pitch, args.vel)], args.actuator, args.seed)
    for e in events:
        print(e.log_line())
    return 0


def _cmd_sweep_dynamics(cfg, args):
    records = bench.run_dynamic_sweep(cfg, args.actuator, args.seed)
    if args.out:
        bench.write_csv(records, args.out)
    if args.plot:
        for label, text in bench.plot_data(records).items():
            with open(f"{args.plot}_{label}.dat", "w", encoding="ascii", newline="\n") as fh:
                fh.write(text)
    lo, hi = bench.spl_range(records)
    limit = cfg.solenoid.saturation_velocity if args.actuator == "solenoid" else None
    fit = bench.fit_intensity_line(records, limit)
    print(f"{len(records)} strokes, SPL {lo:.1f} .. {hi:.1f} dB")
    print(f"slope {fit.slope:.4e} W/m^2 per step, intercept {fit.intercept:.4e}, "
          f"residual norm {fit.residual_norm:.4e}")
    if not args.out:
        sys.stdout.write(bench.format_csv(records))
    return 0


def _cmd_sweep_speed(cfg, args):
    result = bench.run_speed_sweep(cfg, args.actuator, args.seed, args.start)
    for rate, hits, notes, mode in result.trials:
        print(f"{rate:5.1f} Hz  {hits}/{notes} strokes  {mode}")
    print(f"max rate {result.max_rate:.1f} Hz, terminated by {result.failure_mode}")
    return 0


def _cmd_play(cfg, args):
    notes = load_notes(args.file)
    events, router = bench.play(cfg, notes, args.actuator, args.seed)
    for e in events:
        print(e.log_line())
    st = router.stats
    print(f"# notes {st.notes}, unroutable {st.unroutable}, late {st.late}, "
          f"conflicts {st.conflicts}", file=sys.stderr)
    return 0


def _cmd_serve(cfg, args):
    from .service import StrikeService
    try:
        service = StrikeService(cfg, args.port, args.host, sys.stdout, args.csv,
                                raw_midi=args.raw_midi or None)
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 2
    print(f"# listening on {service.address[0]}:{service.address[1]}", file=sys.stderr)
    if args.duration:
        service.start()
        try:
            service._stop.wait(args.duration)
        finally:
            service.stop()
    else:
        service.serve_forever()
    st = service.stats
    print(f"# datagrams {st.datagrams}, rejected {st.rejected}, notes {st.notes}",
          file=sys.stderr)
    return 0


def _cmd_fit(cfg, args):
    records = bench.read_csv(args.file)
    fit = bench.fit_intensity_line(records, args.max_velocity)
    print(f"slope {fit.slope:.6e}")
    print(f"intercept {fit.intercept:.6e}")
    print(f"residual_norm {fit.residual_norm:.6e}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bldcstrike",
                                description="Simulated BLDC mallet striker bench.")
    p.add_argument("--config", help="rig file (default: packaged reference rig)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("home", help="home one striker and report its rest angle")
    s.add_argument("--striker", type=int, default=0)
    s.set_defaults(func=_cmd_home)

    s = sub.add_parser("strike", help="play one note and print the event log")
    s.add_argument("--pitch", type=int, required=True)
    s.add_argument("--vel", type=int, required=True)
    s.set_defaults(func=_cmd_strike)

    s = sub.add_parser("sweep-dynamics", help="velocity 1..127 dynamic-range sweep")
    s.add_argument("--out", help="CSV output (default: stdout)")
    s.add_argument("--plot", help="prefix for gnuplot .dat files")
    s.set_defaults(func=_cmd_sweep_dynamics)

    s = sub.add_parser("sweep-speed", help="repetition-rate sweep")
    s.add_argument("--start", type=float, help="first rate in Hz")
    s.set_defaults(func=_cmd_sweep_speed)

    s = sub.add_parser("play", help="play a 'tick pitch velocity' note file")
    s.add_argument("file")
    s.set_defaults(func=_cmd_play)

    s = sub.add_parser("serve", help="receive notes over UDP and strike in real time")
    s.add_argument("--port", type=int)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--csv", help="event CSV written on shutdown")
    s.add_argument("--raw-midi", action="store_true", help="datagrams carry raw MIDI bytes")
    s.add_argument("--duration", type=float, help="stop after this many seconds")
    s.set_defaults(func=_cmd_serve)

    s = sub.add_parser("fit", help="fit intensity vs velocity from a sweep CSV")
    s.add_argument("file")
    s.add_argument("--max-velocity", type=int)
    s.set_defaults(func=_cmd_fit)

    for name in ("strike", "sweep-dynamics", "sweep-speed", "play"):
        s = sub.choices[name]
        s.add_argument("--actuator", choices=bench.ACTUATORS, default="bldc")
        s.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot load config: {exc}", file=sys.stderr)
        return 2
    return args.func(cfg, args)


if __name__ == "__main__":
    sys.exit(main())
