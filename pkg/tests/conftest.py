import functools

import pytest
from hypothesis import settings

from vocfrt import config
from vocfrt.engine import run
from vocfrt.plant import FaultSpec

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def preset_run(name, dt_us=None):
    """Cached (record, metrics) of a shipped preset, optionally at another step."""
    doc = config.preset(name)
    if dt_us is not None:
        doc = config.set_key(doc, "simulation.dt_us", dt_us)
        doc = config.set_key(doc, "simulation.decimate", int(round(100 / dt_us)))
    return run(config.to_scenario(doc))


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the kernel once so timed runs measure simulation only
    sc = config.to_scenario(config.preset("paper-sec2-frt"))
    run(sc.replace(duration=0.01, fault=FaultSpec()))


@pytest.fixture
def record_criterion():
    def _record(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {key}: {detail}")
