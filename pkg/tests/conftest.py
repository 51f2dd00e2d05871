import numpy as np
import pytest

from mhtggsp.graph import build_knn_graph, graph_fourier_basis


def random_knn(n, k, seed):
    rng = np.random.default_rng(seed)
    return build_knn_graph(rng.uniform(0, 100, size=(n, 2)), k)


@pytest.fixture
def path2_basis():
    return graph_fourier_basis(build_knn_graph([(0, 0), (1, 0)], 1))


@pytest.fixture
def small_basis():
    """Connected 3-vertex graph (a path), N=3."""
    return graph_fourier_basis(build_knn_graph([(0, 0), (1, 0), (3, 0)], 1))


@pytest.fixture
def basis20():
    return graph_fourier_basis(random_knn(20, 4, seed=5))


# -- acceptance reporting: one PASS/FAIL line per criterion ------------------

_ACCEPTANCE = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    _ACCEPTANCE[number] = (title, call.excinfo is None, call.duration)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok, secs = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} ({secs:.1f}s)")
