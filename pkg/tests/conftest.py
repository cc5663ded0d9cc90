import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from wavefrontier.bounds import build_bounds, profile_pair  # noqa: E402
from wavefrontier.core import ModelParams, validate  # noqa: E402
from wavefrontier.iteration import solve  # noqa: E402
from wavefrontier.waveops import WaveOperators  # noqa: E402

KPP_MODEL = ModelParams(a=0.0, b=0.0, tau1=0.0, tau2=0.0, tau3=0.0, tau4=0.0)

# criterion number -> one-line outcome, filled by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def model():
    return ModelParams()


@pytest.fixture(scope="session")
def wave(model):
    return validate(model)


@pytest.fixture(scope="session")
def ops(model, wave):
    return WaveOperators(model, wave)


@pytest.fixture(scope="session")
def bound_spec(model, wave):
    return build_bounds(model, wave)


@pytest.fixture(scope="session")
def pair0(bound_spec, wave):
    return profile_pair(bound_spec, wave.L, wave.h, wave.box)


@pytest.fixture(scope="session")
def solved(pair0, ops):
    return solve(pair0, ops, tol_residual=1e-5)


@pytest.fixture(scope="session")
def kpp_solved():
    wave = validate(KPP_MODEL)
    ops = WaveOperators(KPP_MODEL, wave)
    pair = profile_pair(build_bounds(KPP_MODEL, wave), wave.L, wave.h, wave.box)
    return solve(pair, ops, tol_residual=1e-5)
