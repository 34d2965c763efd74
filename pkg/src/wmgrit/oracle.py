"""Brute-force dense references for the solver and the bounds.

Everything here favours transparency over speed: matrices are assembled
entry by entry or as explicit products of their defining factors.
"""

from __future__ import annotations

import warnings

import numpy as np

from .mgrit import RelaxationSpec
from .problems import ProblemSetup

__all__ = [
    "SpectralNormWarning",
    "assemble_fcf_propagator",
    "assemble_fcfcf_propagator",
    "scalar_space_time",
    "spectral_norm",
    "dense_step_matrix",
    "dense_two_level_error_op",
    "unweighted_two_level_cycle",
    "DENSE_SIZE_LIMIT",
]

DENSE_SIZE_LIMIT = 2000


class SpectralNormWarning(RuntimeWarning):
    """Power iteration hit its iteration cap before reaching the tolerance."""


def assemble_fcf_propagator(lam, mu, m: int, wc: float, n_coarse: int) -> np.ndarray:
    """C-point error propagator of weighted FCF for one eigenmode, entry by entry.

    Lower-triangular Toeplitz with zero diagonal, ``(1-w)(lam^m - mu)`` on
    the first subdiagonal and
    ``(1-w) mu^(k-1) (lam^m - mu) + w mu^(k-2) (lam^m - mu) lam^m`` on the
    ``k``-th, ``k >= 2``.
    """
    if n_coarse < 2:
        raise ValueError("need at least two coarse points")
    lm = complex(lam) ** m
    mu = complex(mu)
    delta = lm - mu
    diag = np.zeros(n_coarse, dtype=complex)
    diag[1] = (1 - wc) * delta
    for k in range(2, n_coarse):
        diag[k] = (1 - wc) * mu ** (k - 1) * delta + wc * mu ** (k - 2) * delta * lm
    out = np.zeros((n_coarse, n_coarse), dtype=complex)
    for k in range(1, n_coarse):
        out += np.diag(np.full(n_coarse - k, diag[k]), -k)
    return out


def scalar_space_time(eig, n: int) -> np.ndarray:
    """Bidiagonal ``I - eig * S`` with ``S`` the down-shift: the scalar space-time matrix."""
    return np.eye(n, dtype=complex) - complex(eig) * np.eye(n, k=-1, dtype=complex)


def assemble_fcfcf_propagator(lam, mu, m: int, wc: float, wcc: float, n_coarse: int) -> np.ndarray:
    """``(I - B^{-1} A)(I - wcc A)(I - wc A)`` for one eigenmode, as a dense product.

    ``A`` uses ``lam^m`` (the Schur complement) and ``B`` uses ``mu``.
    """
    if n_coarse < 2:
        raise ValueError("need at least two coarse points")
    a = scalar_space_time(complex(lam) ** m, n_coarse)
    b = scalar_space_time(mu, n_coarse)
    eye = np.eye(n_coarse, dtype=complex)
    two_level = eye - np.linalg.solve(b, a)
    return two_level @ (eye - wcc * a) @ (eye - wc * a)


def spectral_norm(M, rtol: float = 1e-10, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``M^* M``.

    Warns with :class:`SpectralNormWarning` and returns the last estimate if
    the relative change has not dropped below ``rtol`` within ``max_iter``.
    """
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if M.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    if np.iscomplexobj(M):
        v = v + 1j * rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = M.conj().T @ (M @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= rtol * new:
            return float(np.sqrt(new))
        est = new
    warnings.warn(
        f"power iteration stopped after {max_iter} steps; last estimate {np.sqrt(est):.12g}",
        SpectralNormWarning,
        stacklevel=2,
    )
    return float(np.sqrt(est))


def dense_step_matrix(step_op) -> np.ndarray:
    """``Phi`` as a dense ``nx x nx`` matrix (columns are images of unit vectors)."""
    return step_op.apply(np.eye(step_op.dimension)).T


def _space_time(phi: np.ndarray, nt: int) -> np.ndarray:
    nx = phi.shape[0]
    out = np.eye(nt * nx)
    for j in range(1, nt):
        out[j * nx : (j + 1) * nx, (j - 1) * nx : j * nx] = -phi
    return out


def dense_two_level_error_op(p: ProblemSetup, m: int, spec: RelaxationSpec | None = None) -> np.ndarray:
    """Dense space-time error propagator of one two-level cycle.

    Forms ``P (I - B^{-1} A_c) (I - wcc A_c)(I - wc A_c) R_I`` with ``A_c`` the
    Schur complement (``Phi^m`` couplings), ``B`` its rediscretized
    counterpart, ``R_I`` injection and ``P`` ideal interpolation; the middle
    factors present depend on the relaxation pattern.  Acts on space-time
    error vectors stacked row by row, with the first row held at zero.
    """
    spec = spec or RelaxationSpec()
    nx, nt = p.nx, p.nt
    if nx * nt > DENSE_SIZE_LIMIT:
        raise ValueError(f"nx*nt = {nx * nt} exceeds the dense limit {DENSE_SIZE_LIMIT}")
    if (nt - 1) % m:
        raise ValueError(f"nt-1 = {nt - 1} not divisible by m = {m}")
    nc = (nt - 1) // m + 1
    phi = dense_step_matrix(p.step_operator())
    phi_c = dense_step_matrix(p.step_operator(dt=m * p.dt))
    schur = np.linalg.matrix_power(phi, m)

    a_c = _space_time(schur, nc)
    b_c = _space_time(phi_c, nc)
    pin = np.eye(nc * nx)
    pin[:nx, :nx] = 0.0  # the initial row has no error
    a_c = a_c @ pin
    eye_c = np.eye(nc * nx)
    core = (eye_c - np.linalg.solve(b_c, a_c)) @ pin
    wc, wcc = spec.weights(0)
    if spec.pattern in ("FCF", "FCFCF"):
        core = core @ (eye_c - wc * a_c)
    if spec.pattern == "FCFCF":
        core = core @ (eye_c - wcc * a_c)

    restrict = np.zeros((nc * nx, nt * nx))
    for k in range(nc):
        restrict[k * nx : (k + 1) * nx, k * m * nx : (k * m + 1) * nx] = np.eye(nx)
    interp = np.zeros((nt * nx, nc * nx))
    for j in range(nt):
        k, off = divmod(j, m)
        interp[j * nx : (j + 1) * nx, k * nx : (k + 1) * nx] = np.linalg.matrix_power(phi, off)
    return interp @ core @ restrict


def unweighted_two_level_cycle(p: ProblemSetup, m: int, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Classic two-level FCF cycle written as plain point-by-point loops.

    Shares only the time stepper with the main solver, so it serves as an
    independent reference for the weight-one path.
    """
    fine = p.step_operator()
    coarse = p.step_operator(dt=m * p.dt)
    nt = p.nt
    u = u.copy()

    def f_sweep():
        for j in range(1, nt):
            if j % m:
                u[j] = fine.apply(u[j - 1]) + g[j]

    f_sweep()
    for j in range(m, nt, m):
        u[j] = fine.apply(u[j - 1]) + g[j]
    f_sweep()

    cs = list(range(0, nt, m))
    r = [g[0] - u[0]] + [g[j] + fine.apply(u[j - 1]) - u[j] for j in cs[1:]]
    v = [u[0].copy()]
    for k in range(1, len(cs)):
        rhs_k = r[k] + u[cs[k]] - coarse.apply(u[cs[k - 1]])
        v.append(coarse.apply(v[k - 1]) + rhs_k)
    for k, j in enumerate(cs):
        u[j] = v[k]
    f_sweep()
    return u
