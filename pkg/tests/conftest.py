import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("artifact", deadline=None, max_examples=40)
settings.load_profile("artifact")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state_amplitudes(rng, num_modes, cutoff, keep_levels=None):
    """Random normalized amplitudes; optionally zero above ``keep_levels`` per mode."""
    shape = (cutoff,) * num_modes
    amps = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if keep_levels is not None:
        mask = np.ones(shape, dtype=bool)
        for ax in range(num_modes):
            idx = [slice(None)] * num_modes
            idx[ax] = slice(keep_levels, None)
            mask[tuple(idx)] = False
        amps = amps * mask
    amps = amps.ravel()
    return amps / np.linalg.norm(amps)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
