import numpy as np
import pytest

from ch6opt import ModelParams, build_grid, make_potential
from ch6opt.control import BoxConstraints, ControlProblem, CostConfig
from ch6opt.state import StepperConfig

_ACCEPTANCE = {}
_MEASURED = {}


@pytest.fixture(scope="session")
def grid1d():
    return build_grid(1, [1.0], 32)


@pytest.fixture(scope="session")
def grid2d():
    return build_grid(2, [1.0, 2.0], [16, 12])


@pytest.fixture(scope="session")
def quartic():
    return make_potential("quartic")


@pytest.fixture(scope="session")
def params(quartic):
    return ModelParams(1.0, 0.0, quartic)


@pytest.fixture(scope="session")
def linear_params():
    return ModelParams(0.0, 0.0, make_potential("linear-test"), test_mode=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def reference_problem(dt=1e-3, alpha2=1.0, phi_omega=0.0):
    """Driven 1D problem shared by the gradient, Taylor and duality checks."""
    g = build_grid(1, [1.0], 32)
    x = g.mesh[0]
    from ch6opt.spectral import GridField

    phi0 = GridField(g, 0.3 + 0.2 * np.cos(np.pi * x)).spectral()
    params = ModelParams(1.0, 0.0, make_potential("quartic"))
    cost = CostConfig(1.0, alpha2, 1e-2, phi_Q=0.0, phi_Omega=phi_omega)
    prob = ControlProblem(phi0, params, StepperConfig(dt), 0.1, cost, BoxConstraints(-1.0, 1.0))
    return prob, np.cos(np.pi * x)


@pytest.fixture
def ref_problem():
    return reference_problem()


@pytest.fixture
def measured(request):
    """Record a one-line measurement shown next to the criterion in the summary."""

    def put(text):
        _MEASURED[request.node.nodeid] = text
        print(text)

    return put


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            _ACCEPTANCE[item.nodeid] = (m.args[0], m.args[1], None)


def pytest_runtest_logreport(report):
    if report.nodeid in _ACCEPTANCE and (report.when == "call" or report.outcome != "passed"):
        num, title, prev = _ACCEPTANCE[report.nodeid]
        if prev in (None, "passed"):
            _ACCEPTANCE[report.nodeid] = (num, title, report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    rows = sorted((num, title, outcome, _MEASURED.get(nid, "")) for nid, (num, title, outcome) in _ACCEPTANCE.items())
    for num, title, outcome, value in rows:
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP", None: "NOT RUN"}[outcome]
        tail = f" [{value}]" if value else ""
        terminalreporter.write_line(f"AC{num:<3d}{tag:<8}{title}{tail}")
