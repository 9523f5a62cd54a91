import numpy as np
import pytest

from shapehom.mesh import generate_disk


@pytest.fixture(scope="session")
def coarse_disk():
    return generate_disk(1.0, 0.25)


@pytest.fixture(scope="session")
def medium_disk():
    # about 700 triangles
    return generate_disk(1.0, 1 / 11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_fd(fun, s, order=1):
    """Central differences of orders 1..4 of a scalar function at 0."""
    if order == 1:
        return (fun(s) - fun(-s)) / (2 * s)
    if order == 2:
        return (fun(s) - 2 * fun(0.0) + fun(-s)) / s ** 2
    if order == 3:
        return (fun(2 * s) - 2 * fun(s) + 2 * fun(-s) - fun(-2 * s)) / (2 * s ** 3)
    if order == 4:
        return (fun(2 * s) - 4 * fun(s) + 6 * fun(0.0) - 4 * fun(-s) + fun(-2 * s)) / s ** 4
    raise ValueError(order)


def observed_order(errors, steps):
    e = np.asarray(errors, dtype=float)
    h = np.asarray(steps, dtype=float)
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def fd_convergence(fun, exact, k, ladder=None):
    """Observed order of the k-th central difference of ``fun`` at 0.

    Steps whose error is not at least ten times the round-off floor of the
    stencil are discarded; the order is fitted on the three smallest
    remaining steps.  Returns ``inf`` when every step is at round-off level
    (the difference is exact, e.g. for low-degree polynomials).
    """
    if ladder is None:
        ladder = [0.32 * 2.0 ** -i for i in range(8)]
    vals = {0.0: fun(0.0)}
    errs, floors = [], []
    for s in ladder:
        errs.append(abs(central_fd(fun, s, k) - exact))
        scale = max(abs(fun(s)), abs(fun(-s)), abs(vals[0.0]), 1e-300)
        floors.append(64 * np.finfo(float).eps * 2 ** k * scale / s ** k)
    good = [i for i in range(len(ladder)) if errs[i] > 10 * floors[i]]
    if len(good) < 3:
        assert all(e <= 100 * f for e, f in zip(errs, floors)), (errs, floors)
        return float("inf")
    pick = good[-3:]
    return observed_order([errs[i] for i in pick], [ladder[i] for i in pick])


# one line per acceptance criterion, printed after the run
_ACCEPTANCE: list = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
