import pytest

from ctconsensus import _accel
from ctconsensus.graph import DiGraph

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(params=BACKENDS)
def kernel_backend(request, monkeypatch):
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def three_cycle() -> DiGraph:
    return DiGraph(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def graph_file(tmp_path):
    def write(G: DiGraph, name="g.txt"):
        path = tmp_path / name
        G.save(path)
        return str(path)

    return write
