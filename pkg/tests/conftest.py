import numpy as np
import pytest

from lecfdr.core import MultiRecord, Record


def make_records(us, errs):
    return [Record(i, float(u), int(e)) for i, (u, e) in enumerate(zip(us, errs))]


def make_multi(rows):
    return [MultiRecord(i, tuple((float(u), int(e)) for u, e in r)) for i, r in enumerate(rows)]


def random_single(rng, n, *, ties=False):
    if ties:
        us = rng.integers(0, max(2, n // 3), n) / 10.0
    else:
        us = rng.random(n)
    # error probability rising with the score, at a random slope
    p = np.clip(rng.uniform(0.0, 0.3) + rng.uniform(0.0, 0.8) * us / max(us.max(), 1e-12), 0, 1)
    errs = (rng.random(n) < p).astype(int)
    return us, errs


def random_rows(rng, n, m, *, ties=False):
    rows = []
    base = rng.uniform(0.0, 0.4, m)
    for _ in range(n):
        pairs = []
        for k in range(m):
            u = rng.integers(0, 8) / 8.0 if ties else rng.random()
            e = int(rng.random() < min(1.0, base[k] + 0.6 * u))
            pairs.append((u, e))
        rows.append(pairs)
    return rows


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the end-of-run summary."""

    def log(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
