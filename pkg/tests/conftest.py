import numpy as np
import pytest

from stacklab import MajGameSpec, PnGameSpec

MAJ_REF = dict(r0=2.0, rM=1.0, r=2.0, qM=1.0, q0=1.0, qhat0=1.0, q=1.0)
PN_REF = dict(r0=2.0, q0=1.0, r=2.0, q=1.0)


def _weights(rng, k, low=0.1, high=10.0):
    return np.exp(rng.uniform(np.log(low), np.log(high), size=k))


def random_pn_specs(count, seed=0, n=1):
    rng = np.random.default_rng(seed)
    return [PnGameSpec(*_weights(rng, 4), n=n) for _ in range(count)]


def random_maj_specs(count, seed=0, n=1):
    """Positive weights throughout, so every solver (including the team plan) applies."""
    rng = np.random.default_rng(seed)
    return [MajGameSpec(*_weights(rng, 7), n=n) for _ in range(count)]


@pytest.fixture
def maj_ref():
    return MajGameSpec(**MAJ_REF, n=5)


@pytest.fixture
def pn_ref():
    return PnGameSpec(**PN_REF, n=2)


# one PASS/FAIL line per acceptance criterion in the terminal summary
_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1].split("[")[0]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.failed:
        _CRITERIA[name] = _CRITERIA.get(name, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: int(s.split("_")[2])):
        k, title = name.split("_")[2], " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {k}: {'PASS' if _CRITERIA[name] else 'FAIL'}  ({title})")
