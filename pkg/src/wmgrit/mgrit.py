"""Linear multilevel MGRIT with weighted C-relaxation.

States are stored as ``(nt, nx)`` arrays, one row per time point.  Row 0 is
pinned to the initial condition.  F-relaxation updates every F-interval at
once (one stacked solve per position inside the interval) and C-relaxation
updates all C-points at once; per-row arithmetic is the same as a
point-by-point sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import sqrt
from typing import Optional, Sequence

import numpy as np

from .problems import ProblemSetup
from .timestepping import ButcherTableau, StepOperator

__all__ = [
    "PATTERNS",
    "RATE_METHODS",
    "Level",
    "GridHierarchy",
    "RelaxationSpec",
    "ConvergenceReport",
    "build_hierarchy",
    "largest_valid_nt",
    "family_defaults",
    "f_relax",
    "c_relax_weighted",
    "relax",
    "residual",
    "restrict_residual",
    "coarse_correct",
    "v_cycle",
    "forward_solve",
    "sequential_solve",
    "initial_guess",
    "convergence_rate",
    "solve",
]

PATTERNS = ("F", "FCF", "FCFCF")
RATE_METHODS = ("arithmetic-last-5", "geometric-overall")


class PowerStep:
    """``Phi^m`` applied by ``m`` fine steps; the ideal coarse propagator."""

    def __init__(self, fine: StepOperator, m: int):
        self.fine = fine
        self.m = m
        self.dt = fine.dt * m
        self.dimension = fine.dimension

    def apply(self, u):
        for _ in range(self.m):
            u = self.fine.apply(u)
        return u


@dataclass
class Level:
    nt: int
    dt: float
    step_op: StepOperator
    m: Optional[int] = None  # coarsening factor to the next level; None on the coarsest

    @property
    def c_points(self) -> np.ndarray:
        return np.arange(0, self.nt, self.m)


@dataclass
class GridHierarchy:
    levels: list
    m: int
    coarsest_max: int

    def __len__(self):
        return len(self.levels)

    @property
    def sizes(self):
        return [lvl.nt for lvl in self.levels]


@dataclass(frozen=True)
class RelaxationSpec:
    """Relaxation pattern and per-level C-weights.

    ``wc``/``wcc`` list weights for levels 0, 1, ...; a list shorter than the
    hierarchy repeats its last entry.  F-relaxation is never weighted.
    """

    pattern: str = "FCF"
    wc: tuple = (1.0,)
    wcc: tuple = (1.0,)

    def __post_init__(self):
        pattern = self.pattern.upper()
        if pattern not in PATTERNS:
            raise ValueError(f"unknown relaxation pattern {self.pattern!r}; use one of {PATTERNS}")
        object.__setattr__(self, "pattern", pattern)
        wc = tuple(float(w) for w in np.atleast_1d(self.wc))
        wcc = tuple(float(w) for w in np.atleast_1d(self.wcc))
        if not wc or not wcc:
            raise ValueError("weight lists must be nonempty")
        if any(not w > 0 for w in wc + wcc):
            raise ValueError(f"relaxation weights must be > 0, got wc={wc}, wcc={wcc}")
        object.__setattr__(self, "wc", wc)
        object.__setattr__(self, "wcc", wcc)

    def weights(self, level: int):
        return self.wc[min(level, len(self.wc) - 1)], self.wcc[min(level, len(self.wcc) - 1)]


@dataclass
class ConvergenceReport:
    residual_history: list
    iterations: int
    converged: bool
    rate: float
    rate_method: str
    wall_time: float
    tolerance: float = float("nan")
    solution: Optional[np.ndarray] = field(default=None, repr=False)


def _hierarchy_sizes(nt, m, max_levels, coarsest_max):
    sizes = [nt]
    while sizes[-1] > coarsest_max and (max_levels <= 0 or len(sizes) < max_levels):
        n = sizes[-1]
        if n - 1 < m:
            break  # fewer than m intervals left; this level becomes the coarsest
        if (n - 1) % m:
            return sizes, n
        sizes.append((n - 1) // m + 1)
    return sizes, None


def largest_valid_nt(nt: int, m: int, max_levels: int = 0, coarsest_max: int = 4) -> int:
    """Largest ``N <= nt`` that coarsens cleanly into at least two levels (2 if none does)."""
    for n in range(nt, 1, -1):
        sizes, bad = _hierarchy_sizes(n, m, max_levels, coarsest_max)
        if bad is None and len(sizes) >= 2:
            return n
    return 2


def family_defaults(p: ProblemSetup) -> dict:
    """Halting scale, iteration cap and rate method conventional for the problem family."""
    if p.label.startswith("adv"):
        return {"tol_scale": 1e-8, "max_iters": 70, "rate_method": "geometric-overall"}
    return {"tol_scale": 1e-10, "max_iters": 100, "rate_method": "arithmetic-last-5"}


def build_hierarchy(
    p: ProblemSetup,
    m: int,
    max_levels: int = 0,
    coarsest_max: int = 4,
    tableau: ButcherTableau | None = None,
    coarse_op: str = "rediscretize",
) -> GridHierarchy:
    """Temporal grid hierarchy with ``dt`` growing by ``m`` per level.

    ``max_levels <= 0`` coarsens until ``nt <= coarsest_max`` or fewer than
    ``m`` intervals remain.  Coarse propagators are rediscretized with the
    same scheme; ``coarse_op="exact"`` uses ``Phi^m`` instead (only useful
    for testing).
    """
    if int(m) != m or m < 2:
        raise ValueError(f"coarsening factor must be an integer >= 2, got {m!r}")
    if coarse_op not in ("rediscretize", "exact"):
        raise ValueError(f"coarse_op must be 'rediscretize' or 'exact', got {coarse_op!r}")
    tableau = tableau or p.tableau
    sizes, bad = _hierarchy_sizes(p.nt, m, max_levels, coarsest_max)
    if bad is not None:
        suggestion = largest_valid_nt(p.nt, m, max_levels, coarsest_max)
        raise ValueError(
            f"nt-1 = {bad - 1} is not divisible by m = {m} (level with nt = {bad}); "
            f"largest valid nt <= {p.nt} is {suggestion}"
        )
    if len(sizes) < 2:
        raise ValueError(f"nt = {p.nt} is already <= coarsest_max = {coarsest_max}; nothing to coarsen")
    levels = []
    dt = p.dt
    op = p.step_operator(dt, tableau)
    for i, n in enumerate(sizes):
        is_last = i == len(sizes) - 1
        levels.append(Level(nt=n, dt=dt, step_op=op, m=None if is_last else m))
        if not is_last:
            dt = dt * m
            op = PowerStep(op, m) if coarse_op == "exact" else p.step_operator(dt, tableau)
    return GridHierarchy(levels=levels, m=m, coarsest_max=coarsest_max)


# -- relaxation -------------------------------------------------------------


def f_relax(level: Level, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Propagate exactly across every F-interval from its left C-point (in place)."""
    m, n = level.m, level.nt
    starts = np.arange(0, n - 1, m)
    phi = level.step_op
    for p in range(1, m):
        idx = starts + p
        u[idx] = phi.apply(u[idx - 1]) + g[idx]
    return u


def c_relax_weighted(level: Level, u: np.ndarray, g: np.ndarray, w: float) -> np.ndarray:
    """Weighted block-Jacobi update of the C-points ``km, k >= 1`` (in place)."""
    idx = np.arange(level.m, level.nt, level.m)
    if idx.size == 0:
        return u
    update = level.step_op.apply(u[idx - 1]) + g[idx] - u[idx]
    u[idx] = u[idx] + w * update
    return u


def relax(level: Level, u: np.ndarray, g: np.ndarray, spec: RelaxationSpec, level_index: int = 0):
    """F, FCF or FCFCF relaxation with this level's weights."""
    wc, wcc = spec.weights(level_index)
    f_relax(level, u, g)
    if spec.pattern in ("FCF", "FCFCF"):
        c_relax_weighted(level, u, g, wc)
        f_relax(level, u, g)
    if spec.pattern == "FCFCF":
        c_relax_weighted(level, u, g, wcc)
        f_relax(level, u, g)
    return u


# -- residual, transfer, cycling -------------------------------------------


def apply_space_time(step_op, u: np.ndarray) -> np.ndarray:
    """``A u``: rows ``u_0`` and ``u_j - Phi u_{j-1}``."""
    out = np.empty_like(u)
    out[0] = u[0]
    out[1:] = u[1:] - step_op.apply(u[:-1])
    return out


def residual(level: Level, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``g - A u`` over all rows of the level."""
    r = np.empty_like(u)
    r[0] = g[0] - u[0]
    r[1:] = g[1:] + level.step_op.apply(u[:-1]) - u[1:]
    return r


def restrict_residual(level: Level, coarse: Level, u: np.ndarray, g: np.ndarray):
    """Coarse right-hand side ``R_I r + B R_I u`` and the injected initial guess."""
    r = residual(level, u, g)
    u_c = u[:: level.m].copy()
    g_c = r[:: level.m] + apply_space_time(coarse.step_op, u_c)
    return g_c, u_c


def coarse_correct(level: Level, u: np.ndarray, g: np.ndarray, u_coarse: np.ndarray) -> np.ndarray:
    """Overwrite C-points with the coarse solution and F-relax (ideal interpolation)."""
    u[:: level.m] = u_coarse
    return f_relax(level, u, g)


def forward_solve(step_op, g: np.ndarray) -> np.ndarray:
    """Exact solve of ``A u = g`` by time-stepping."""
    u = np.empty_like(g)
    u[0] = g[0]
    for j in range(1, g.shape[0]):
        u[j] = step_op.apply(u[j - 1]) + g[j]
    return u


def v_cycle(hier: GridHierarchy, u: np.ndarray, g: np.ndarray, spec: RelaxationSpec, level_index: int = 0):
    """One V-cycle from ``level_index`` down; updates and returns ``u``."""
    level = hier.levels[level_index]
    if level_index == len(hier.levels) - 1:
        u[:] = forward_solve(level.step_op, g)
        return u
    coarse = hier.levels[level_index + 1]
    relax(level, u, g, spec, level_index)
    g_c, u_c = restrict_residual(level, coarse, u, g)
    v_cycle(hier, u_c, g_c, spec, level_index + 1)
    return coarse_correct(level, u, g, u_c)


# -- drivers ----------------------------------------------------------------


def sequential_solve(p: ProblemSetup, tableau: ButcherTableau | None = None) -> np.ndarray:
    op = p.step_operator(tableau=tableau)
    return forward_solve(op, p.rhs(op))


def initial_guess(p: ProblemSetup, g0: np.ndarray, seed: int) -> np.ndarray:
    """Uniform [0, 1) entries from a seeded PCG64 stream; row 0 set to ``g0``."""
    rng = np.random.default_rng(seed)
    u = rng.random((p.nt, p.nx))
    u[0] = g0
    return u


def convergence_rate(history: Sequence[float], method: str) -> float:
    """Average convergence factor of a residual history ``[r_0, r_1, ..., r_k]``."""
    if method not in RATE_METHODS:
        raise ValueError(f"unknown rate method {method!r}; use one of {RATE_METHODS}")
    k = len(history) - 1
    if k < 1 or history[0] == 0:
        return 0.0
    if method == "geometric-overall":
        return float((history[-1] / history[0]) ** (1.0 / k))
    ratios = [history[i] / history[i - 1] for i in range(max(1, k - 4), k + 1)]
    return float(np.mean(ratios))


def solve(
    p: ProblemSetup,
    m: int = 2,
    levels: int = 0,
    spec: RelaxationSpec | None = None,
    seed: int = 42,
    tol_scale: float = 1e-10,
    max_iters: int = 100,
    rate_method: str = "arithmetic-last-5",
    coarsest_max: int = 4,
    tableau: ButcherTableau | None = None,
    coarse_op: str = "rediscretize",
    keep_solution: bool = False,
    callback=None,
) -> ConvergenceReport:
    """Iterate V-cycles from a random initial guess until ``||r|| <= tol_scale / sqrt(hx dt)``.

    ``callback(k, u)`` is called after the initial guess (``k = 0``) and after
    every cycle, if given.
    """
    spec = spec or RelaxationSpec()
    if rate_method not in RATE_METHODS:
        raise ValueError(f"unknown rate method {rate_method!r}; use one of {RATE_METHODS}")
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    t_start = time.perf_counter()
    hier = build_hierarchy(p, m, levels, coarsest_max, tableau, coarse_op)
    fine = hier.levels[0]
    g = p.rhs(fine.step_op)
    u = initial_guess(p, g[0], seed)
    tol = tol_scale / sqrt(p.hx * p.dt)

    history = [float(np.linalg.norm(residual(fine, u, g)))]
    if callback:
        callback(0, u)
    converged = history[0] <= tol
    iters = 0
    while not converged and iters < max_iters:
        v_cycle(hier, u, g, spec)
        iters += 1
        rnorm = float(np.linalg.norm(residual(fine, u, g)))
        history.append(rnorm)
        if callback:
            callback(iters, u)
        converged = rnorm <= tol
        if not np.isfinite(rnorm):
            break
    return ConvergenceReport(
        residual_history=history,
        iterations=iters,
        converged=bool(converged),
        rate=convergence_rate(history, rate_method),
        rate_method=rate_method,
        wall_time=time.perf_counter() - t_start,
        tolerance=tol,
        solution=u if keep_solution else None,
    )
