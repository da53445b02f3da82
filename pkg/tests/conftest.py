import numpy as np
import pytest

from softgt.volume import Volume3D


def random_affine(rng, spacing=None):
    """Random proper/improper rotation scaled by spacing, with a random origin."""
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    sp = rng.uniform(0.3, 3.0, 3) if spacing is None else np.asarray(spacing, dtype=float)
    aff = np.eye(4)
    aff[:3, :3] = q * sp[None, :]
    aff[:3, 3] = rng.uniform(-100, 100, 3)
    return aff


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ramp_volume():
    data = np.arange(4 * 5 * 6, dtype=np.float32).reshape(4, 5, 6)
    return Volume3D(data, spacing=(1.0, 1.0, 1.0))


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def report(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
