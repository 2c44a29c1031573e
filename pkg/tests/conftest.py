import numpy as np
import pytest

from bnmap.network import make_network

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def chain():
    """A -> B with Pr(A=1)=0.3, Pr(B=1|A=1)=0.8, Pr(B=1|A=0)=0.4."""
    return make_network([
        ("A", ("0", "1"), (), [0.7, 0.3]),
        ("B", ("0", "1"), ("A",), [[0.6, 0.4], [0.2, 0.8]]),
    ], name="chain")


@pytest.fixture
def diamond():
    return make_network([
        ("A", ("f", "t"), (), [0.6, 0.4]),
        ("B", ("f", "t"), ("A",), [[0.3, 0.7], [0.9, 0.1]]),
        ("C", ("f", "t"), ("A",), [[0.5, 0.5], [0.2, 0.8]]),
        ("D", ("f", "t"), ("B", "C"), [[0.99, 0.01], [0.4, 0.6], [0.3, 0.7], [0.05, 0.95]]),
    ], name="diamond")


@pytest.fixture
def five():
    """A -> B -> D -> C -> E: MAP(C, D) admits an interleaved valid order."""
    return make_network([
        ("A", ("0", "1"), (), [0.3, 0.7]),
        ("B", ("0", "1"), ("A",), [[0.9, 0.1], [0.25, 0.75]]),
        ("D", ("0", "1"), ("B",), [[0.6, 0.4], [0.15, 0.85]]),
        ("C", ("0", "1"), ("D",), [[0.45, 0.55], [0.8, 0.2]]),
        ("E", ("0", "1"), ("C",), [[0.35, 0.65], [0.7, 0.3]]),
    ], name="five")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
