"""The 1D model problems: diffusion and periodic advection.

Each builder returns a :class:`ProblemSetup` holding the spatial operator,
grid, source term and initial data.  ``nx`` always counts unknowns: interior
nodes for the Dirichlet heat problem (``h = L/(nx+1)``) and distinct nodes
for the periodic problems (``h = L/nx``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .timestepping import ButcherTableau, SpatialOperator, StepOperator, make_tableau

__all__ = [
    "PROBLEM_IDS",
    "ProblemSetup",
    "build_heat1d",
    "build_adv1d_central",
    "build_adv1d_upwind",
    "build_problem",
    "spatial_spectrum",
    "heat1d_spectrum",
    "central_spectrum",
    "upwind_spectrum",
]

UPWIND_EPSILON = 0.5


@dataclass(frozen=True)
class ProblemSetup:
    label: str
    spatial_op: SpatialOperator
    nx: int
    nt: int
    length: float
    final_time: float
    hx: float
    x: np.ndarray
    initial_condition: np.ndarray
    source: Optional[Callable[[np.ndarray], np.ndarray]] = None
    exact_solution: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    tableau: ButcherTableau = field(default_factory=lambda: make_tableau("backward-euler"))

    @property
    def dt(self) -> float:
        return self.final_time / (self.nt - 1)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    def step_operator(self, dt: float | None = None, tableau: ButcherTableau | None = None):
        return StepOperator(self.spatial_op, self.dt if dt is None else dt, tableau or self.tableau)

    def rhs(self, step_op: StepOperator | None = None) -> np.ndarray:
        """All right-hand-side rows ``g_0..g_{nt-1}`` as an ``(nt, nx)`` array.

        Row 0 is the initial condition; row ``j`` is the forced part of the
        step from ``t_{j-1}`` to ``t_j``.
        """
        op = step_op or self.step_operator()
        g = np.zeros((self.nt, self.nx))
        g[0] = self.initial_condition
        if self.source is not None:
            t_prev = self.times[:-1]
            stage_f = [self.source(t_prev + c * op.dt) for c in op.tableau.c_nodes]
            g[1:] = op.advance(np.zeros((self.nt - 1, self.nx)), stage_f)
        return g

    def forcing(self, j: int, step_op: StepOperator | None = None) -> np.ndarray:
        """``g_j`` for a single time index."""
        if j == 0:
            return self.initial_condition.copy()
        op = step_op or self.step_operator()
        if self.source is None:
            return np.zeros(self.nx)
        t0 = (j - 1) * op.dt

        def f(t):
            return self.source(np.atleast_1d(t))[0]

        return op.forcing_term(f, t0)


def heat1d_spectrum(nx: int) -> np.ndarray:
    """``-(4/h^2) sin^2(gamma pi / (2(nx+1)))`` with ``h = 1/(nx+1)``."""
    h = 1.0 / (nx + 1)
    gamma = np.arange(1, nx + 1)
    return -(4.0 / h**2) * np.sin(gamma * np.pi / (2 * (nx + 1))) ** 2


def central_spectrum(nx: int) -> np.ndarray:
    """``(i/h) sin(2 pi gamma / nx)`` with ``h = 1/nx``."""
    h = 1.0 / nx
    gamma = np.arange(1, nx + 1)
    return 1j / h * np.sin(2 * np.pi * gamma / nx)


def upwind_spectrum(nx: int, eps: float = UPWIND_EPSILON) -> np.ndarray:
    """Central spectrum plus the dissipative term ``-(4 eps/h) sin^2(gamma pi / (2(nx+1)))``."""
    h = 1.0 / nx
    gamma = np.arange(1, nx + 1)
    return central_spectrum(nx) - (4 * eps / h) * np.sin(gamma * np.pi / (2 * (nx + 1))) ** 2


def _check_sizes(nx, nt):
    if int(nx) != nx or int(nt) != nt or nx < 2 or nt < 2:
        raise ValueError(f"need integer nx, nt >= 2, got nx={nx!r}, nt={nt!r}")


def build_heat1d(nx: int, nt: int, *, final_time: float = 0.625, tableau=None) -> ProblemSetup:
    """``u_t = u_xx + f`` on [0,1] with homogeneous Dirichlet data and exact solution ``sin(pi x) cos t``."""
    _check_sizes(nx, nt)
    length = 1.0
    h = length / (nx + 1)
    x = h * np.arange(1, nx + 1)
    eig = heat1d_spectrum(nx)
    G = SpatialOperator(nx, {-1: 1 / h**2, 0: -2 / h**2, 1: 1 / h**2}, periodic=False, eigenvalues=eig)
    profile = np.sin(np.pi * x)

    # sign chosen so that sin(pi x) cos t is an exact solution of u_t = u_xx + f
    def source(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.outer(np.pi**2 * np.cos(t) - np.sin(t), profile)

    def exact(xs, t):
        return np.sin(np.pi * np.asarray(xs)) * np.cos(t)

    return ProblemSetup(
        label="heat1d",
        spatial_op=G,
        nx=nx,
        nt=nt,
        length=length,
        final_time=final_time,
        hx=h,
        x=x,
        initial_condition=profile.copy(),
        source=source,
        exact_solution=exact,
        tableau=tableau or make_tableau("backward-euler"),
    )


def _gaussian_pulse(x):
    return np.exp(-25.0 * (x - 0.5) ** 2)


def _periodic_setup(label, nx, nt, bands, eig, final_time, tableau):
    h = 1.0 / nx
    x = h * np.arange(nx)
    G = SpatialOperator(nx, bands, periodic=True, eigenvalues=eig)
    return ProblemSetup(
        label=label,
        spatial_op=G,
        nx=nx,
        nt=nt,
        length=1.0,
        final_time=final_time,
        hx=h,
        x=x,
        initial_condition=_gaussian_pulse(x),
        tableau=tableau or make_tableau("backward-euler"),
    )


def build_adv1d_central(nx: int, nt: int, *, final_time: float = 1.0, tableau=None) -> ProblemSetup:
    """``u_t = u_x`` on the periodic unit interval, central differences; purely imaginary spectrum."""
    _check_sizes(nx, nt)
    h = 1.0 / nx
    eig = central_spectrum(nx)
    bands = {-1: -1 / (2 * h), 1: 1 / (2 * h)}
    return _periodic_setup("adv1d-central", nx, nt, bands, eig, final_time, tableau)


def build_adv1d_upwind(nx: int, nt: int, *, final_time: float = 1.0, tableau=None) -> ProblemSetup:
    """Upwinded ``u_t = u_x`` (central advection plus ``eps*h*u_xx`` with ``eps = 1/2``).

    The stored spectrum is the closed form used for the convergence bounds,
    whose dissipative part carries a ``2(nx+1)`` denominator; the assembled
    circulant has ``(2/h) sin^2(pi*gamma/nx)`` there instead.  Only the
    imaginary parts agree exactly.
    """
    _check_sizes(nx, nt)
    h = 1.0 / nx
    eig = upwind_spectrum(nx)
    bands = {0: -1 / h, 1: 1 / h}
    return _periodic_setup("adv1d-upwind", nx, nt, bands, eig, final_time, tableau)


_BUILDERS = {
    "heat1d": build_heat1d,
    "adv1d-central": build_adv1d_central,
    "adv1d-upwind": build_adv1d_upwind,
}
PROBLEM_IDS = tuple(_BUILDERS)


def build_problem(problem_id: str, nx: int, nt: int, **kwargs) -> ProblemSetup:
    try:
        builder = _BUILDERS[problem_id]
    except KeyError:
        raise ValueError(
            f"unknown problem {problem_id!r}; valid ids: {', '.join(PROBLEM_IDS)}"
        ) from None
    return builder(nx, nt, **kwargs)


def spatial_spectrum(p: ProblemSetup) -> np.ndarray:
    """Closed-form eigenvalues ``kappa_gamma`` of ``G``, ``gamma = 1..nx``."""
    return np.asarray(p.spatial_op.eigenvalues).copy()
