import numpy as np
import pytest

from accgraph.graph import EdgeList, build_csr

# Worked example: vertices a..i, undirected weighted edges.
SAMPLE_NAMES = "abcdefghi"
SAMPLE_EDGES = [("a", "b", 5), ("a", "d", 1), ("d", "c", 1), ("d", "e", 2), ("c", "b", 1),
              ("c", "f", 4), ("e", "f", 2), ("e", "g", 3), ("e", "h", 1), ("e", "i", 2)]


def vid(name):
    return SAMPLE_NAMES.index(name)


def names(ids):
    return [SAMPLE_NAMES[i] for i in ids]


@pytest.fixture
def sample_graph():
    src = [vid(s) for s, _, _ in SAMPLE_EDGES]
    dst = [vid(d) for _, d, _ in SAMPLE_EDGES]
    w = [float(x) for _, _, x in SAMPLE_EDGES]
    return build_csr(EdgeList(np.array(src), np.array(dst), np.array(w), directed=False))


@pytest.fixture
def triangle():
    return build_csr(EdgeList(np.array([0, 1, 0]), np.array([1, 2, 2]), directed=False))


ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
