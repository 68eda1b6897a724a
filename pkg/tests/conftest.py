import numpy as np
import pytest

from prescore_attn import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


def random_qkv(seed, n, d, nq=None, dv=None, scale=1.0):
    r = make_rng(seed)
    nq = n if nq is None else nq
    dv = d if dv is None else dv
    return (scale * r.standard_normal((nq, d)), scale * r.standard_normal((n, d)), r.standard_normal((n, dv)))


def rel_fro(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
