"""Two-level convergence bounds for weighted FCF and FCFCF relaxation.

For one eigenpair ``(lambda, mu)`` of the fine and coarse propagators the
C-point error propagator is a lower-triangular Toeplitz matrix whose
symbol, up to a unimodular factor, is

    F(x) = (lambda^m - mu) / (1 - e^{ix} mu) * P(e^{ix})

with ``P(s) = 1 - w + s w lambda^m`` for FCF and a quadratic in ``s`` for
FCFCF.  ``max_x |F(x)|`` bounds the asymptotic spectral norm.  The FCF
maximum has a closed form (stationary points of a ratio of trigonometric
polynomials); the FCFCF one is found numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .problems import ProblemSetup, spatial_spectrum
from .timestepping import ButcherTableau, stability_eigenvalue

__all__ = [
    "BoundQuery",
    "BoundResult",
    "HeatmapGrid",
    "fcf_symbol",
    "fcfcf_symbol",
    "fcf_bound_exact",
    "fcf_bound_exact_array",
    "fcf_bound_approx",
    "fcfcf_bound_numeric",
    "fcfcf_bound_approx",
    "problem_eigenpairs",
    "problem_bound",
    "modal_bound",
    "heatmap_scan",
    "cell_centers",
]

_DEN_GUARD = 1e-14
_SCAN_POINTS = 4096
_MAX_PEAKS = 8


@dataclass(frozen=True)
class BoundQuery:
    lam: complex
    mu: complex
    m: int
    wc: float
    wcc: Optional[float] = None

    def __post_init__(self):
        if not abs(self.mu) < 1:
            raise ValueError(f"|mu| = {abs(self.mu):.6g} >= 1; the bound needs |mu| < 1")
        if not abs(self.lam) < 1:
            raise ValueError(f"|lambda| = {abs(self.lam):.6g} >= 1; the bound needs |lambda| < 1")


@dataclass(frozen=True)
class BoundResult:
    value: float
    argmax_x: float
    method: str  # exact-closed-form | numeric-scan | approximate


def _as_query(q=None, **kw) -> BoundQuery:
    if isinstance(q, BoundQuery):
        return q
    return BoundQuery(**kw)


def fcf_symbol(x, lam, mu, m, wc):
    """``|F(x)|`` for weighted FCF relaxation."""
    s = np.exp(1j * np.asarray(x))
    lm = lam**m
    return np.abs(lm - mu) * np.abs(1 - wc + s * wc * lm) / np.abs(1 - s * mu)


def fcfcf_symbol(x, lam, mu, m, wc, wcc):
    """``|F(x)|`` for weighted FCFCF relaxation (degree-two weighted Jacobi)."""
    s = np.exp(1j * np.asarray(x))
    lm = lam**m
    poly = (1 - wcc) * (1 - wc) + s * (wcc * (1 - wc) + wc * (1 - wcc)) * lm + s * s * wcc * wc * lm * lm
    return np.abs(lm - mu) * np.abs(poly) / np.abs(1 - s * mu)


def _ratio(x, a, b, c, d, c_lam, c_mu):
    return (c_lam - 2 * a * np.cos(x) + 2 * b * np.sin(x)) / (c_mu - 2 * c * np.cos(x) + 2 * d * np.sin(x))


def fcf_bound_exact_array(lam, mu, m, wc):
    """Vectorized closed-form FCF bound; returns ``(value, argmax_x)`` arrays.

    The squared symbol is ``(C_l - 2a cos x + 2b sin x) / (C_m - 2c cos x + 2d sin x)``.
    Its stationary points solve ``P sin x + Q cos x + R = 0``; with
    ``x = 2 arctan(r)`` both roots of the resulting quadratic are evaluated
    together with ``x = pi`` (the root at ``r = inf``) and the larger value
    kept.  Where the root denominator vanishes the value comes from a dense
    scan instead.
    """
    lam, mu = np.broadcast_arrays(np.asarray(lam, dtype=complex), np.asarray(mu, dtype=complex))
    shape = lam.shape
    lam, mu = lam.ravel(), mu.ravel()
    wc = float(wc)
    lm = lam**m
    a = wc * (wc - 1) * lm.real
    b = wc * (wc - 1) * lm.imag
    c = mu.real
    d = mu.imag
    c_mu = 1 + c * c + d * d
    c_lam = (wc - 1) ** 2 + wc * wc * (lm.real**2 + lm.imag**2)

    p = a * c_mu - c * c_lam
    q = b * c_mu - d * c_lam
    rr = 2 * (a * d - b * c)
    disc = np.sqrt(np.maximum(p * p + q * q - rr * rr, 0.0))
    den = q - rr
    degenerate = np.abs(den) < _DEN_GUARD
    safe_den = np.where(degenerate, 1.0, den)

    candidates = [np.full(lam.shape, np.pi)]
    for sign in (1.0, -1.0):
        r = (p + sign * disc) / safe_den
        candidates.append(np.mod(2 * np.arctan(r), 2 * np.pi))
    xs = np.stack(candidates)
    vals = _ratio(xs, a, b, c, d, c_lam, c_mu)
    best = np.argmax(vals, axis=0)
    x_best = np.take_along_axis(xs, best[None], axis=0)[0]
    v_best = np.take_along_axis(vals, best[None], axis=0)[0]

    if np.any(degenerate):
        grid = np.linspace(0, 2 * np.pi, _SCAN_POINTS, endpoint=False)
        for idx in np.flatnonzero(degenerate):
            x_star, val = _refined_max(
                lambda x, i=idx: _ratio(x, a[i], b[i], c[i], d[i], c_lam[i], c_mu[i]), grid
            )
            if val > v_best[idx]:
                x_best[idx], v_best[idx] = x_star, val
    value = np.abs(lm - mu) * np.sqrt(np.maximum(v_best, 0.0))
    return value.reshape(shape), x_best.reshape(shape)


def fcf_bound_exact(q: BoundQuery | None = None, **kw) -> BoundResult:
    """``max_x |F(x)|`` for weighted FCF via the closed-form stationary points."""
    q = _as_query(q, **kw)
    value, x = fcf_bound_exact_array(q.lam, q.mu, q.m, q.wc)
    return BoundResult(float(value), float(x), "exact-closed-form")


def fcf_bound_approx(q: BoundQuery | None = None, **kw) -> float:
    """Rotation approximation ``|lambda^m - mu| / (1 - |mu|) * |1 - w + w |lambda|^m|``."""
    q = _as_query(q, **kw)
    lm = q.lam**q.m
    return float(abs(lm - q.mu) / (1 - abs(q.mu)) * abs(1 - q.wc + q.wc * abs(lm)))


def _refined_max(fun, grid):
    """Max of a periodic function: dense samples, then golden-section refinement of each local peak."""
    vals = fun(grid)
    n = grid.size
    h = grid[1] - grid[0]
    peaks = np.nonzero((vals >= np.roll(vals, 1)) & (vals >= np.roll(vals, -1)))[0]
    best_x, best_v = float(grid[np.argmax(vals)]), float(vals.max())
    # the symbols have only a handful of genuine local maxima
    peaks = peaks[np.argsort(vals[peaks])[::-1][:_MAX_PEAKS]]
    for i in peaks:
        x0 = grid[i]
        try:
            res = minimize_scalar(lambda x: -fun(x), bracket=(x0 - h, x0, x0 + h), method="golden", tol=1e-12)
        except ValueError:
            # sample tied with a neighbour: no strict bracket, so search the interval instead
            res = minimize_scalar(lambda x: -fun(x), bounds=(x0 - h, x0 + h), method="bounded", options={"xatol": 1e-12})
        # golden section may wander outside the bracket on flat plateaus
        if abs(res.x - x0) <= 2 * h and -res.fun > best_v:
            best_x, best_v = float(np.mod(res.x, 2 * np.pi)), float(-res.fun)
    return best_x, best_v


def fcfcf_bound_numeric(q: BoundQuery | None = None, samples: int = _SCAN_POINTS, **kw) -> BoundResult:
    """``max_x |F(x)|`` for weighted FCFCF by dense sampling plus golden-section refinement."""
    q = _as_query(q, **kw)
    if q.wcc is None:
        raise ValueError("FCFCF bound needs a second weight wcc")
    grid = np.linspace(0, 2 * np.pi, max(samples, _SCAN_POINTS), endpoint=False)
    x, v = _refined_max(lambda x: fcfcf_symbol(x, q.lam, q.mu, q.m, q.wc, q.wcc), grid)
    return BoundResult(v, x, "numeric-scan")


def fcfcf_bound_approx(q: BoundQuery | None = None, **kw) -> float:
    q = _as_query(q, **kw)
    if q.wcc is None:
        raise ValueError("FCFCF bound needs a second weight wcc")
    lm_abs = abs(q.lam) ** q.m
    return fcf_bound_approx(q) * abs(1 - q.wcc + q.wcc * lm_abs)


# -- spectra of model problems ---------------------------------------------


def problem_eigenpairs(p: ProblemSetup, tableau: ButcherTableau, dt: float, m: int):
    """``(lambda_gamma, mu_gamma)`` from the stability function at ``dt*kappa`` and ``m*dt*kappa``."""
    kappa = spatial_spectrum(p)
    lam = stability_eigenvalue(tableau, dt * kappa)
    mu = stability_eigenvalue(tableau, m * dt * kappa)
    return np.atleast_1d(lam), np.atleast_1d(mu)


def problem_bound(p: ProblemSetup, tableau: ButcherTableau, dt: float, m: int, spec, method: str = "exact"):
    """Worst case over the spatial spectrum of the per-mode bound.

    ``spec`` is a :class:`~wmgrit.mgrit.RelaxationSpec`; its finest-level
    weights are used.  ``method`` is ``"exact"`` or ``"approx"``.
    """
    lam, mu = problem_eigenpairs(p, tableau, dt, m)
    bad = np.nonzero((np.abs(mu) >= 1) | (np.abs(lam) >= 1))[0]
    if bad.size:
        g = int(bad[0])
        raise ValueError(
            f"mode gamma={g + 1} has |lambda|={abs(lam[g]):.6g}, |mu|={abs(mu[g]):.6g}; need both < 1"
        )
    return modal_bound(lam, mu, m, spec, method)


def modal_bound(lam, mu, m, spec, method="exact"):
    """Max over modes of the bound for given eigenvalue arrays."""
    wc, wcc = spec.weights(0)
    if spec.pattern == "F":
        wc = 0.0  # F-relaxation alone: no C-sweep
    if spec.pattern == "FCFCF":
        if method == "approx":
            vals = [fcfcf_bound_approx(BoundQuery(l, u, m, wc, wcc)) for l, u in zip(lam, mu)]
        else:
            vals = [fcfcf_bound_numeric(BoundQuery(l, u, m, wc, wcc)).value for l, u in zip(lam, mu)]
        return float(max(vals))
    if method == "approx":
        return float(max(fcf_bound_approx(BoundQuery(l, u, m, wc)) for l, u in zip(lam, mu)))
    return float(np.max(fcf_bound_exact_array(lam, mu, m, wc)[0]))


# -- complex-plane scans -----------------------------------------------------


@dataclass
class HeatmapGrid:
    re_values: np.ndarray
    im_values: np.ndarray
    values: np.ndarray  # shape (len(im_values), len(re_values)); NaN where |lambda| or |mu| >= 1
    scheme: str
    m: int
    wc: float

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.values)


def cell_centers(lo: float, hi: float, steps: int) -> np.ndarray:
    """``steps`` cell midpoints of ``[lo, hi]``; a degenerate range gives ``[lo]``."""
    steps = int(steps)
    if steps < 1 or hi < lo:
        raise ValueError(f"invalid range {lo}:{hi} with {steps} steps")
    width = (hi - lo) / steps
    return lo + width * (np.arange(steps) + 0.5)


def heatmap_scan(tableau: ButcherTableau, m: int, wc: float, re_range, im_range) -> HeatmapGrid:
    """FCF bound at ``z = dt*kappa`` over a grid of cell centres.

    ``re_range``/``im_range`` are ``(min, max, steps)`` triples in raw ``z``.
    """
    re = cell_centers(*re_range)
    im = cell_centers(*im_range)
    z = re[None, :] + 1j * im[:, None]
    lam = stability_eigenvalue(tableau, z)
    mu = stability_eigenvalue(tableau, m * z)
    valid = (np.abs(lam) < 1) & (np.abs(mu) < 1)
    values = np.full(z.shape, np.nan)
    if np.any(valid):
        values[valid] = fcf_bound_exact_array(lam[valid], mu[valid], m, wc)[0]
    return HeatmapGrid(re, im, values, tableau.name, m, float(wc))
