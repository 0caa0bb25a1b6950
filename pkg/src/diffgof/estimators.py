"""Empirical distribution function, local-time density and MLE of (alpha, beta).

Every stochastic integral is a left-endpoint (Ito) sum over the observed
increments ``dX_k = X_{k+1} - X_k``.  Sums of the form
``sum_k 1{X_k < x} h_k`` are evaluated for a whole grid of levels at once by
sorting the path, which keeps each statistic at O(n log n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .errors import EstimationError, ValidationError
from .model import ParametricModel, Regime, Theta, as_theta


class PathIndex:
    """Sorted view of the left endpoints X_0..X_{n-1} of a trajectory."""

    def __init__(self, traj):
        self.traj = traj
        x = traj.values
        self.left = x[:-1]
        self.dx = np.diff(x)
        self.order = np.argsort(self.left, kind="stable")
        self.sorted = self.left[self.order]

    @property
    def n(self):
        return self.left.size

    def count_below(self, levels):
        """#{k : X_k < x} for each level x."""
        return np.searchsorted(self.sorted, levels, side="left")

    def sum_below(self, weights, levels, strict=True):
        """sum_k 1{X_k < x} w_k (``strict``) or 1{X_k <= x} w_k."""
        csum = np.concatenate([[0.0], np.cumsum(np.asarray(weights, dtype=float)[self.order])])
        side = "left" if strict else "right"
        return csum[np.searchsorted(self.sorted, levels, side=side)]


def _levels(x_grid):
    x = np.asarray(x_grid, dtype=float)
    if x.size == 0:
        raise ValidationError("evaluation grid is empty")
    return x


def edf(traj, x_grid, index=None):
    """F_T(x) = (1/T) int 1{X_t < x} dt as the fraction of steps with X_k < x."""
    index = index or PathIndex(traj)
    return index.count_below(_levels(x_grid)) / index.n


def _sigma_at(sigma, x):
    if callable(sigma):
        return np.asarray(sigma(x), dtype=float)
    return np.full_like(np.asarray(x, dtype=float), float(sigma))


def local_time(traj, x_grid, index=None):
    """Tanaka-Meyer local time |X_T - x| - |X_0 - x| - sum sgn(X_k - x) dX_k."""
    x = _levels(x_grid)
    index = index or PathIndex(traj)
    total = index.dx.sum()
    below = index.sum_below(index.dx, x, strict=True)
    at_or_below = index.sum_below(index.dx, x, strict=False)
    sgn_integral = (total - at_or_below) - below
    values = traj.values
    lam = np.abs(values[-1] - x) - np.abs(values[0] - x) - sgn_integral
    return np.maximum(lam, 0.0)


def local_time_density(traj, x_grid, sigma, index=None):
    """Empirical density f_T(x) = Lambda_T(x) / (T sigma(x)^2), clamped at zero."""
    x = _levels(x_grid)
    lam = local_time(traj, x, index=index)
    return lam / (traj.horizon * _sigma_at(sigma, x) ** 2)


@dataclass(frozen=True, eq=False)
class EmpiricalCurves:
    x_grid: np.ndarray
    edf: np.ndarray
    density: np.ndarray


def empirical_curves(traj, x_grid, sigma) -> EmpiricalCurves:
    x = _levels(x_grid)
    index = PathIndex(traj)
    return EmpiricalCurves(x, edf(traj, x, index), local_time_density(traj, x, sigma, index))


# --------------------------------------------------------------------------
# likelihood

def _g(gamma, x, alpha):
    u = x - alpha
    return np.sign(u) * np.abs(u) ** gamma


def log_likelihood(traj, model: ParametricModel, theta) -> float:
    """Girsanov log-likelihood (1/s^2) sum S dX - (1/(2 s^2)) sum S^2 dt."""
    theta = as_theta(theta)
    x = traj.values[:-1]
    dx = np.diff(traj.values)
    s = model.trend(theta, x)
    s2 = model.sigma ** 2
    return float((s @ dx) / s2 - 0.5 * (s @ s) * traj.dt / s2)


class _ProfileSums:
    """A(alpha) = sum g dX / s^2 and B(alpha) = sum g^2 dt / s^2 with fast paths for gamma in {0, 1}."""

    def __init__(self, traj, model):
        self.gamma = model.gamma
        self.s2 = model.sigma ** 2
        self.dt = traj.dt
        self.x = traj.values[:-1]
        self.dx = np.diff(traj.values)
        self.n = self.x.size
        if self.gamma == 1.0:
            self.center = float(self.x.mean())
            xc = self.x - self.center
            self.s_xdx = float(xc @ self.dx)
            self.s_dx = float(self.dx.sum())
            self.s_x2 = float(xc @ xc)
            self.s_x = float(xc.sum())
        elif self.gamma == 0.0:
            self.index = PathIndex(traj)
            self.total = float(self.dx.sum())

    def __call__(self, alphas):
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        if self.gamma == 1.0:
            a = alphas - self.center
            A = (self.s_xdx - a * self.s_dx) / self.s2
            B = (self.s_x2 - 2 * a * self.s_x + self.n * a * a) * self.dt / self.s2
        elif self.gamma == 0.0:
            idx = self.index
            below = idx.sum_below(idx.dx, alphas, strict=True)
            at_or_below = idx.sum_below(idx.dx, alphas, strict=False)
            A = ((self.total - at_or_below) - below) / self.s2
            ties = idx.count_below(np.nextafter(alphas, np.inf)) - idx.count_below(alphas)
            B = (self.n - ties) * self.dt / self.s2
        else:
            chunk = max(1, 4_000_000 // max(self.n, 1))
            A = np.empty(alphas.size)
            B = np.empty(alphas.size)
            for s in range(0, alphas.size, chunk):
                g = _g(self.gamma, self.x[None, :], alphas[s:s + chunk, None])
                A[s:s + chunk] = g @ self.dx / self.s2
                B[s:s + chunk] = np.einsum("ij,ij->i", g, g) * self.dt / self.s2
        return A, B


def _golden_max(fun, a, b, tol):
    """Golden-section search for the maximum of a unimodal function on [a, b]."""
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


@dataclass(frozen=True, eq=False)
class ThetaEstimate:
    theta: Theta
    boundary_hit: tuple
    profile_values: np.ndarray | None = field(default=None, repr=False)
    log_likelihood: float = float("nan")

    @property
    def alpha(self):
        return self.theta.alpha

    @property
    def beta(self):
        return self.theta.beta


def mle(traj, model: ParametricModel, n_grid=None, keep_profile=False,
        tol=None) -> ThetaEstimate:
    """Profile-likelihood MLE over the closed parameter box.

    For fixed alpha the log-likelihood is the concave quadratic
    ``-beta A(alpha) - beta^2 B(alpha) / 2``, so ``beta_hat(alpha)`` is
    ``-A/B`` clamped to ``[b1, b2]``.  alpha is found on a grid and, in the
    high-gamma regime where the profile is smooth, refined by golden-section
    search inside the best grid bracket.
    """
    model.require_supported()
    n_grid = int(n_grid or DEFAULTS["mle_alpha_grid"])
    tol = DEFAULTS["mle_golden_tol"] if tol is None else tol
    (a1, a2), (b1, b2) = model.theta_box
    sums = _ProfileSums(traj, model)

    def profile(alphas):
        A, B = sums(alphas)
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(B > 0, -A / B, np.where(A < 0, b2, b1))
        beta = np.clip(beta, b1, b2)
        return beta, -beta * A - 0.5 * beta * beta * B

    grid = np.linspace(a1, a2, n_grid) if a2 > a1 else np.array([a1])
    A, B = sums(grid)
    if np.all(B <= 0):
        raise EstimationError("degenerate path: B(alpha) = 0 for every alpha")
    betas, values = profile(grid)
    best = int(np.argmax(values))
    alpha, value = float(grid[best]), float(values[best])

    if model.regime is Regime.HIGH and grid.size > 1:
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, grid.size - 1)]
        cand, cand_val = _golden_max(lambda a: float(profile(a)[1][0]), lo, hi, tol)
        if cand_val > value:
            alpha, value = cand, cand_val
    beta = float(profile(alpha)[0][0])

    alpha = float(alpha)
    hits = (alpha in (a1, a2), beta in (b1, b2))
    prof = np.column_stack([grid, values]) if keep_profile else None
    return ThetaEstimate(theta=Theta(alpha, beta), boundary_hit=hits,
                         profile_values=prof, log_likelihood=value)
