import numpy as np
import pytest
from hypothesis import settings

from posecodec.skeleton import default_h36m_skeleton
from posecodec.synth import SynthScenario, generate

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spec():
    return default_h36m_skeleton()


@pytest.fixture(scope="session")
def frames(spec):
    return generate(SynthScenario(seed=101, n_frames=40), spec)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed and not detail:
            detail = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else "error"
        _criteria.append((marker.args[0], "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(_criteria, key=lambda c: c[0]):
        terminalreporter.write_line(f"{status}  {name}: {detail}")
