import copy

import pytest

from bldcstrike import bench
from bldcstrike.config import load_config


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def geom(cfg):
    return cfg.geometry


@pytest.fixture(scope="session")
def motor(cfg):
    return cfg.motor


@pytest.fixture(scope="session")
def strike_cfg(cfg):
    return cfg.strike


@pytest.fixture(scope="session")
def _homed_prototype(cfg):
    return bench.build_striker(cfg, 0)


@pytest.fixture
def homed(_homed_prototype):
    """Fresh copy of a homed reference striker (homing takes ~0.3 s of CPU)."""
    return copy.deepcopy(_homed_prototype)


@pytest.fixture(scope="session")
def bldc_sweep(cfg):
    return bench.run_dynamic_sweep(cfg, "bldc", 0)


@pytest.fixture(scope="session")
def solenoid_sweep(cfg):
    return bench.run_dynamic_sweep(cfg, "solenoid", 0)


ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Log one acceptance line: ``record_criterion(number, title, passed, detail)``."""
    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
        ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda item: item[0]):
        terminalreporter.write_line(line)
