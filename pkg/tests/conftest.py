import pytest

from memloop.devices import ActiveMemristorParams, InternalSourceSpec
from memloop.waveforms import WaveformSpec


@pytest.fixture
def base_spec():
    # 160 steps of 2 s, +-100 mV triangle: a 320 s cycle
    return WaveformSpec(amplitude=0.1, timestep=2.0, samples=160)


@pytest.fixture
def resistor():
    return ActiveMemristorParams.resistor(1e6)


@pytest.fixture
def passive():
    return ActiveMemristorParams(m0=1e6, rate_pos=2e3, rate_neg=2e3)


@pytest.fixture
def two_rate():
    """Small-drift device with rate_neg / rate_pos = 2.88."""
    return ActiveMemristorParams(m0=1e6, rate_pos=200.0, rate_neg=576.0)


@pytest.fixture
def strong_drift():
    """Memristance climbs about 3.5x over one sweep, so the rates stand out of 2 % noise."""
    return ActiveMemristorParams(m0=5e6, rate_pos=2e4, rate_neg=5.76e4,
                                 source=InternalSourceSpec("constant", 2e-9))


@pytest.fixture
def active():
    return ActiveMemristorParams(
        m0=5e6, rate_pos=5e3, rate_neg=1.44e4,
        source=InternalSourceSpec("constant", 2e-9),
    )


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call" and "test_acceptance.py::test_ac" in rep.nodeid:
                lines.append((rep.nodeid.split("::")[-1], outcome.upper()[:4]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
