import numpy as np
import pytest

from dnfeq import build_domain, gaussian_kernel, logistic, make_model, proportional


def reference_like(n=41, k=1.0, delays=None, activation=None):
    """Small version of the shipped reference scenario for fast unit tests."""
    dom = build_domain((0, 1), n)
    S = activation or logistic(1.0, 4.0, 0.5)
    return make_model(
        dom, (S, S),
        tau=(1.0, 2.0),
        I_star=(lambda r: 0.5 * np.exp(-((r - 0.3) ** 2) / 0.02), -0.2),
        alpha=1.0,
        z_ref=lambda r: 0.3 + 0.4 * r,
        kernels={"11": gaussian_kernel(2, 0.1), "12": gaussian_kernel(-1.5, 0.15),
                 "21": gaussian_kernel(1.5, 0.15), "22": gaussian_kernel(-0.5, 0.1)},
        delays=delays,
        controller=proportional(k),
    )


@pytest.fixture
def small_model():
    return reference_like()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("acceptance_lines")
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
