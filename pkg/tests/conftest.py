import numpy as np
import pytest

from cpi.data import Dataset, RngStream, Task, write_csv


@pytest.fixture
def rng():
    return RngStream(20240601)


@pytest.fixture
def linear_data():
    """n = 400 linear regression with one strong, one weak and two null features."""
    g = np.random.default_rng(7)
    x = g.standard_normal((400, 4))
    y = 1.5 * x[:, 0] + 0.3 * x[:, 1] + g.standard_normal(400)
    return Dataset(x, y, Task.REGRESSION, ("a", "b", "c", "d"))


@pytest.fixture
def toy_csv(tmp_path, linear_data):
    path = tmp_path / "toy.csv"
    write_csv(path, linear_data.x, linear_data.feature_names, linear_data.y, "y")
    return path


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, passed, detail):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        line = f"criterion {number:>2}: {status}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
