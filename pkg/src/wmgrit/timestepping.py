"""One-step propagators for linear ODE systems ``u' = G u + f(t)``.

A :class:`StepOperator` applies the SDIRK (or backward Euler) update for a
fixed step size.  Stage systems ``I - a_ii * dt * G`` are factored once at
construction; tridiagonal and cyclic-tridiagonal operators get an O(N)
LAPACK ``gttrf``/``gttrs`` factorization (with a Sherman-Morrison correction
for the wrap-around entries), anything wider falls back to dense LU.

Vectors may be passed one at a time (shape ``(n,)``) or stacked as rows
(shape ``(k, n)``); stacked rows are advanced independently in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg import lapack

__all__ = [
    "ButcherTableau",
    "SpatialOperator",
    "StepOperator",
    "FactorizationError",
    "TABLEAU_NAMES",
    "make_tableau",
    "factor_step",
    "step",
    "stability_eigenvalue",
]


class FactorizationError(ArithmeticError):
    """A stage matrix ``I - a_ii * dt * G`` is singular."""


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    a_matrix: np.ndarray
    b_weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float)
        b = np.asarray(self.b_weights, dtype=float)
        s = b.shape[0]
        if a.shape != (s, s):
            raise ValueError(f"a_matrix must be {s}x{s}, got {a.shape}")
        if np.any(np.triu(a, 1) != 0.0):
            raise ValueError("a_matrix must be lower triangular (diagonally implicit)")
        if abs(b.sum() - 1.0) > 1e-14:
            raise ValueError(f"b_weights must sum to 1, got {b.sum()!r}")
        diag = np.diag(a)
        if np.ptp(diag) > 1e-14:
            raise ValueError("diagonal entries must be equal (singly diagonal)")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_weights", b)

    @property
    def stages(self) -> int:
        return self.b_weights.shape[0]

    @property
    def gamma(self) -> float:
        return float(self.a_matrix[0, 0])

    @property
    def c_nodes(self) -> np.ndarray:
        return self.a_matrix.sum(axis=1)

    @property
    def stiffly_accurate(self) -> bool:
        """True when ``b`` equals the last row of ``A``, so the update is the last stage."""
        return bool(np.allclose(self.a_matrix[-1], self.b_weights, rtol=0, atol=1e-14))


def _sdirk22() -> ButcherTableau:
    g = 1.0 - 1.0 / sqrt(2.0)
    return ButcherTableau("sdirk22", np.array([[g, 0.0], [1.0 - g, g]]), np.array([1.0 - g, g]))


def _sdirk23() -> ButcherTableau:
    g = (3.0 + sqrt(3.0)) / 6.0
    return ButcherTableau("sdirk23", np.array([[g, 0.0], [1.0 - 2.0 * g, g]]), np.array([0.5, 0.5]))


def _sdirk33() -> ButcherTableau:
    # Alexander's L-stable scheme; gamma is the middle root of 6g^3 - 18g^2 + 9g - 1.
    g = 0.43586652150845899941601945
    b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0
    b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0
    a = np.array([[g, 0.0, 0.0], [(1.0 - g) / 2.0, g, 0.0], [b1, b2, g]])
    return ButcherTableau("sdirk33", a, np.array([b1, b2, g]))


_TABLEAUX = {
    "backward-euler": lambda: ButcherTableau("backward-euler", np.array([[1.0]]), np.array([1.0])),
    "sdirk22": _sdirk22,
    "sdirk23": _sdirk23,
    "sdirk33": _sdirk33,
}
TABLEAU_NAMES = tuple(_TABLEAUX)


def make_tableau(name: str) -> ButcherTableau:
    """Return the Butcher tableau for ``name``.

    Valid names are ``backward-euler``, ``sdirk22``, ``sdirk23`` and ``sdirk33``.
    """
    try:
        return _TABLEAUX[name]()
    except KeyError:
        raise ValueError(
            f"unknown time-stepping scheme {name!r}; valid names: {', '.join(TABLEAU_NAMES)}"
        ) from None


def stability_eigenvalue(tableau: ButcherTableau, z):
    """Runge-Kutta stability function ``1 + z b^T (I - z A)^{-1} 1``.

    ``z`` may be a scalar or an array of complex values.  The lower-triangular
    stage system is solved by forward substitution, elementwise in ``z``.
    """
    z_arr = np.asarray(z, dtype=complex)
    a, b = tableau.a_matrix, tableau.b_weights
    pivots = 1.0 - z_arr * a[0, 0]
    if np.any(np.abs(pivots) < 1e-300):
        raise ZeroDivisionError(f"stage matrix singular: z = 1/{a[0, 0]!r}")
    ys = []
    for i in range(tableau.stages):
        acc = np.ones_like(z_arr)
        for j in range(i):
            acc = acc + z_arr * a[i, j] * ys[j]
        ys.append(acc / (1.0 - z_arr * a[i, i]))
    lam = 1.0 + z_arr * sum(bi * yi for bi, yi in zip(b, ys))
    return complex(lam) if lam.ndim == 0 else lam


@dataclass(frozen=True)
class SpatialOperator:
    """Constant-coefficient banded operator ``G``.

    ``bands`` maps diagonal offset to coefficient, e.g. ``{-1: 1, 0: -2, 1: 1}``.
    With ``periodic=True`` the stencil wraps around; otherwise it is truncated
    at the boundaries (homogeneous Dirichlet).
    """

    dimension: int
    bands: dict
    periodic: bool = False
    eigenvalues: np.ndarray | None = None
    matrix: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.dimension)
        if n < 1:
            raise ValueError("dimension must be positive")
        bands = {int(k): float(v) for k, v in self.bands.items() if v != 0.0}
        if any(abs(k) >= n for k in bands) and not self.periodic:
            raise ValueError("band offset exceeds operator dimension")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "matrix", self._assemble(n, bands, self.periodic))

    @staticmethod
    def _assemble(n, bands, periodic):
        mat = sp.lil_matrix((n, n))
        for off, coef in bands.items():
            for i in range(n):
                j = i + off
                if periodic:
                    mat[i, j % n] += coef
                elif 0 <= j < n:
                    mat[i, j] += coef
        return mat.tocsr()

    @property
    def is_tridiagonal(self) -> bool:
        return all(abs(k) <= 1 for k in self.bands)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``G u`` for a vector or for each row of a stacked array."""
        if u.ndim == 1:
            return self.matrix @ u
        return (self.matrix @ u.T).T

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


class _StageSolver:
    """Factored ``I - scale * G`` with an O(N) solve for (cyclic) tridiagonal ``G``."""

    def __init__(self, op: SpatialOperator, scale: float, diag_entry: float):
        n = op.dimension
        self.n = n
        self._dense = None
        if op.is_tridiagonal and n >= 3:
            lo = -scale * op.bands.get(-1, 0.0)
            di = 1.0 - scale * op.bands.get(0, 0.0)
            up = -scale * op.bands.get(1, 0.0)
            dl, d, du = np.full(n - 1, lo), np.full(n, di), np.full(n - 1, up)
            self._cyclic = op.periodic and (lo != 0.0 or up != 0.0)
            if self._cyclic:
                # M = T' + u v^T with corner entries M[0,n-1] = lo, M[n-1,0] = up
                shift = -d[0] if d[0] != 0.0 else -1.0
                d[0] -= shift
                d[-1] -= lo * up / shift
                self._u = np.zeros(n)
                self._u[0], self._u[-1] = shift, up
                self._v = np.zeros(n)
                self._v[0], self._v[-1] = 1.0, lo / shift
            self._factors = lapack.dgttrf(dl, d, du)
            if self._factors[-1] != 0:
                raise FactorizationError(
                    f"stage matrix singular for diagonal entry a_ii={diag_entry!r}"
                )
            if self._cyclic:
                z = self._tri_solve(self._u[:, None])[:, 0]
                denom = 1.0 + self._v @ z
                if abs(denom) < 1e-14:
                    raise FactorizationError(
                        f"stage matrix singular for diagonal entry a_ii={diag_entry!r}"
                    )
                self._z, self._denom = z, denom
        else:
            mat = np.eye(n) - scale * op.dense()
            lu = scipy.linalg.lu_factor(mat, check_finite=True)
            if np.any(np.abs(np.diag(lu[0])) < 1e-14 * np.abs(mat).max()):
                raise FactorizationError(
                    f"stage matrix singular for diagonal entry a_ii={diag_entry!r}"
                )
            self._dense = lu

    def _tri_solve(self, rhs):
        dl, d, du, du2, ipiv, _ = self._factors
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        return x

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for columns of ``rhs`` (shape ``(n, k)``)."""
        if self._dense is not None:
            return scipy.linalg.lu_solve(self._dense, rhs)
        y = self._tri_solve(rhs)
        if self._cyclic:
            y = y - np.outer(self._z, (self._v @ y) / self._denom)
        return y


class StepOperator:
    """The propagator ``Phi`` for one fixed step ``dt`` of a diagonally implicit scheme.

    Immutable after construction; ``apply`` is reentrant.
    """

    def __init__(self, spatial_op: SpatialOperator, dt: float, tableau: ButcherTableau):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        self.spatial_op = spatial_op
        self.dt = float(dt)
        self.tableau = tableau
        # one factorization per distinct diagonal entry
        self.stage_factorizations = {}
        for a_ii in np.unique(np.diag(tableau.a_matrix)):
            self.stage_factorizations[float(a_ii)] = _StageSolver(
                spatial_op, float(a_ii) * self.dt, float(a_ii)
            )
        self._solvers = [self.stage_factorizations[float(a)] for a in np.diag(tableau.a_matrix)]

    @property
    def dimension(self) -> int:
        return self.spatial_op.dimension

    def advance(self, u: np.ndarray, stage_forcing=None) -> np.ndarray:
        """One step from ``u``; ``stage_forcing[i]`` is ``f`` at stage ``i`` (or None).

        ``u`` has shape ``(n,)`` or ``(k, n)``.  Stage forcing entries must be
        broadcastable to ``u``.
        """
        u = np.asarray(u, dtype=float)
        squeeze = u.ndim == 1
        cols = u[:, None] if squeeze else u.T
        if cols.shape[0] != self.dimension:
            raise ValueError(
                f"vector length {cols.shape[0]} does not match operator dimension {self.dimension}"
            )
        a, b = self.tableau.a_matrix, self.tableau.b_weights
        dt = self.dt
        G = self.spatial_op.matrix
        forcing = None
        if stage_forcing is not None:
            forcing = [np.asarray(f, dtype=float) for f in stage_forcing]
            forcing = [f[:, None] if f.ndim == 1 else f.T for f in forcing]

        # stage values Y_i = u + dt * sum_j a_ij (G Y_j + F_j)
        slopes = []
        last = None
        for i, solver in enumerate(self._solvers):
            rhs = np.array(cols, order="F", copy=True)
            for j in range(i):
                rhs += (dt * a[i, j]) * slopes[j]
            if forcing is not None:
                rhs += (dt * a[i, i]) * forcing[i]
            last = solver.solve(rhs)
            slope = G @ last
            if forcing is not None:
                slope = slope + forcing[i]
            slopes.append(slope)

        if self.tableau.stiffly_accurate:
            out = last
        else:
            out = cols.copy()
            for i in range(len(slopes)):
                out += (dt * b[i]) * slopes[i]
        return out[:, 0] if squeeze else np.ascontiguousarray(out.T)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``Phi u`` (homogeneous part of the step)."""
        return self.advance(u)

    def forcing_term(self, f, t0: float) -> np.ndarray:
        """The forced part ``g`` of one step starting at ``t0``: ``advance(0, f(t0 + c_i dt))``."""
        nodes = self.tableau.c_nodes
        stage_f = [f(t0 + c * self.dt) for c in nodes]
        return self.advance(np.zeros(self.dimension), stage_f)


def factor_step(G: SpatialOperator, dt: float, tableau: ButcherTableau) -> StepOperator:
    return StepOperator(G, dt, tableau)


def step(op: StepOperator, u_prev: np.ndarray, g_j: np.ndarray) -> np.ndarray:
    """``Phi u_prev + g_j``."""
    u_prev = np.asarray(u_prev, dtype=float)
    g_j = np.asarray(g_j, dtype=float)
    if u_prev.shape != g_j.shape:
        raise ValueError(f"shape mismatch: u_prev {u_prev.shape} vs g {g_j.shape}")
    return op.apply(u_prev) + g_j
