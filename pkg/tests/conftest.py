from __future__ import annotations

import numpy as np
import pytest

from wmgrit.oracle import dense_step_matrix
from wmgrit.problems import build_problem

# criterion number -> list of (part, passed, detail), filled by the acceptance tests
ACCEPTANCE_RESULTS: dict = {}


def record_acceptance(criterion: int, part: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion}{part}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE_RESULTS):
        parts = ACCEPTANCE_RESULTS[crit]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{name + ': ' if name else ''}{text}" for name, _, text in parts)
        terminalreporter.write_line(f"criterion {crit:>2}: {status}  {detail}")


def random_disk(rng: np.random.Generator, radius: float = 1.0) -> complex:
    """Uniform sample from the open disk of the given radius."""
    r = radius * np.sqrt(rng.random())
    return complex(r * np.exp(2j * np.pi * rng.random()))


def dense_space_time(p, dt=None) -> np.ndarray:
    """Assembled block-bidiagonal space-time matrix for a tiny problem."""
    phi = dense_step_matrix(p.step_operator(dt))
    nt = p.nt if dt is None else int(round(p.final_time / dt)) + 1
    nx = p.nx
    a = np.eye(nt * nx)
    for j in range(1, nt):
        a[j * nx : (j + 1) * nx, (j - 1) * nx : j * nx] = -phi
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def tiny_heat():
    return build_problem("heat1d", 3, 9)


@pytest.fixture(params=["heat1d", "adv1d-central", "adv1d-upwind"])
def tiny_problem(request):
    return build_problem(request.param, 4, 9)
