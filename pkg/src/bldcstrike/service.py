"""Live mode: a UDP receiver thread feeding a real-time-paced tick loop."""

import socket
import threading
import time

from .acoustics import LiveMeter, impact_to_intensity
from .bench import build_actuator, make_loop
from .controller import QueueFull

EVENT_CSV_HEADER = "tick,striker,kind,impact_speed,velocity"


class StrikeService:
    """Receive datagrams, strike, and log events and meter readings.

    ``log`` receives one line per event and per meter reading. ``csv_path``,
    if given, collects every event and is written out on :meth:`stop`.
    """

    def __init__(self, cfg, port=None, host="127.0.0.1", log=None, csv_path=None,
                 raw_midi=None, actuator="bldc", seed=0):
        self.cfg = cfg
        self.log = log
        self.csv_path = csv_path
        self.raw_midi = cfg.gateway.raw_midi if raw_midi is None else raw_midi
        strikers = {i: build_actuator(cfg, actuator, i, seed=(seed, i)) for i in range(8)}
        self.loop, self.router = make_loop(cfg, strikers)
        self.meter = LiveMeter(cfg.acoustics)
        self.events = []
        self.readings = []
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._threads = []
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.bind((host, cfg.gateway.port if port is None else port))
        except OSError:
            self.sock.close()
            raise
        self.sock.settimeout(0.05)

    @property
    def address(self):
        return self.sock.getsockname()

    @property
    def stats(self):
        return self.router.stats

    def start(self):
        for target in (self._receive, self._run):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stop.set()
        for t in self._threads:
            t.join()
        self._threads = []
        self.sock.close()
        if self.csv_path:
            self.write_csv(self.csv_path)

    def serve_forever(self):
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.1)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _receive(self):
        while not self._stop.is_set():
            try:
                data, _ = self.sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                return
            try:
                self.router.handle_datagram(data, self.loop.scheduler.current_tick,
                                            self.raw_midi)
            except (ValueError, QueueFull):
                # the loop moved past the stamped tick while we were parsing
                self.router.stats.rejected += 1

    def _run(self):
        tp = self.cfg.servo.tick_period
        ac = self.cfg.acoustics
        per_tick = max(1, int(round(tp * ac.sample_rate)))
        start = time.perf_counter()
        while not self._stop.is_set():
            due = start + self.loop.tick * tp
            lag = due - time.perf_counter()
            if lag > 0:
                time.sleep(lag)
            events = self.loop.step()
            hits = [(e.time, impact_to_intensity(e.impact_speed, ac))
                    for e in events if e.kind == "contact"]
            for _ in range(per_tick):
                reading = self.meter.advance(hits)
                hits = ()
                if reading is not None:
                    self.readings.append(reading)
                    self._emit(f"spl {reading.time:.3f} {reading.spl:.1f}")
            with self._lock:
                self.events.extend(events)
            for e in events:
                self._emit(e.log_line())

    def _emit(self, line):
        if self.log is not None:
            self.log.write(line + "\n")
            self.log.flush()

    def write_csv(self, path):
        with self._lock:
            rows = [EVENT_CSV_HEADER] + [
                f"{e.tick},{e.striker},{e.kind},{e.impact_speed:.6e},"
                f"{'' if e.velocity is None else e.velocity}" for e in self.events]
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
