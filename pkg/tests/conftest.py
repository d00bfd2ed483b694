import math
import time

import numpy as np
import pytest

from kslab import dispersion, experiment, nonlinear
from kslab.model import ModelParams

FLAGSHIP = ModelParams(mu=1.0, chi=1.0, D=1.0, f=1.0, k=1.0, U_bar=3.0, d=2)
LAMBDA_MAX = (-3.0 + math.sqrt(13.0)) / 2.0
THETA = 0.1

_acceptance_lines = []
_timings = {}


def eval_series(coeffs, points):
    """Brute-force sum of c_q prod cos(q_i x_i) at arbitrary points (shape (..., d))."""
    points = np.asarray(points, dtype=float)
    d = coeffs.ndim
    out = np.zeros(points.shape[:-1])
    for q in np.ndindex(*coeffs.shape):
        c = coeffs[q]
        if c == 0:
            continue
        term = np.full(points.shape[:-1], c)
        for i in range(d):
            term = term * np.cos(q[i] * points[..., i])
        out += term
    return out


@pytest.fixture(scope="session")
def flagship():
    return FLAGSHIP


@pytest.fixture(scope="session")
def flagship_spectrum():
    return dispersion.spectrum_summary(FLAGSHIP, 16)


@pytest.fixture(scope="session")
def flagship_constants(flagship_spectrum):
    return experiment.default_constants(FLAGSHIP, flagship_spectrum, theta_override=THETA)


@pytest.fixture(scope="session")
def flagship_cfg():
    return nonlinear.SolverConfig(N=16, M=32, dt=1e-3)


@pytest.fixture(scope="session")
def flagship_reports(flagship_spectrum, flagship_constants, flagship_cfg):
    """Escape-time runs for dominant-mode data at three amplitudes (shared: slow)."""
    w0 = experiment.dominant_mode_field(flagship_spectrum)
    start = time.perf_counter()
    reports = {
        delta: experiment.run(delta, w0, FLAGSHIP, flagship_cfg, flagship_constants, spectrum=flagship_spectrum)
        for delta in (1e-2, 1e-3, 1e-4)
    }
    _timings["flagship_reports"] = time.perf_counter() - start
    return reports


@pytest.fixture(scope="session")
def timings():
    return _timings


@pytest.fixture
def acceptance():
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _acceptance_lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
