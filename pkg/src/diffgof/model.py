"""Invariant laws of the diffusions under test.

Two kinds of null model live here:

* :class:`ParametricModel`, the family with trend
  ``-beta * sgn(x - alpha) * |x - alpha|**gamma`` and constant diffusion
  ``sigma``.  Its invariant law is a generalised normal distribution, so the
  density, distribution function and quantiles have closed forms in terms of
  the (regularised incomplete) gamma function.
* :class:`SimpleModel`, an arbitrary known drift ``S0`` and diffusion
  ``sigma(x)``.  The invariant density
  ``exp(2 * int_0^x S0/sigma**2) / (G * sigma(x)**2)`` is obtained by nested
  Gauss-Legendre quadrature on a truncated support.
"""
from __future__ import annotations

import enum
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from ._defaults import DEFAULTS
from .errors import UnsupportedRegimeError, ValidationError

ArrayLike = "float | np.ndarray"


class Regime(str, enum.Enum):
    LOW = "LowGamma"
    HIGH = "HighGamma"
    UNSUPPORTED = "Unsupported"


def classify_regime(gamma: float) -> Regime:
    """gamma < 1/2 -> LOW, gamma > 1/2 -> HIGH, gamma == 1/2 -> UNSUPPORTED."""
    if gamma < 0.5:
        return Regime.LOW
    if gamma == 0.5:
        return Regime.UNSUPPORTED
    return Regime.HIGH


@dataclass(frozen=True)
class Theta:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValidationError(f"theta must be finite, got ({self.alpha}, {self.beta})")
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")

    def as_tuple(self):
        return (self.alpha, self.beta)


def as_theta(theta) -> Theta:
    if isinstance(theta, Theta):
        return theta
    if hasattr(theta, "theta"):  # ThetaEstimate
        return theta.theta
    alpha, beta = theta
    return Theta(float(alpha), float(beta))


@dataclass(frozen=True)
class StationaryMoments:
    """``a = E|xi|^(2 gamma - 2)`` (None below gamma = 1/2) and ``b = E|xi|^(2 gamma)``."""

    a: float | None
    b: float


def sgn(x):
    # np.sign already maps 0 -> 0
    return np.sign(x)


def _shape(gamma):
    """Power p = gamma + 1 and rate c = 2/(gamma + 1) of the unit density exp(-c|y|^p)."""
    p = gamma + 1.0
    return p, 2.0 / p


def normalizer(gamma: float) -> float:
    """G_gamma = (2/(gamma+1))**(gamma/(gamma+1)) * Gamma(1/(gamma+1))."""
    p, c = _shape(gamma)
    return c ** (gamma / p) * special.gamma(1.0 / p)


def abs_moment(gamma: float, q: float) -> float:
    """E|xi|^q for xi distributed with the unit density f0 of exponent gamma."""
    if q <= -1:
        raise ValidationError(
            f"E|xi|^{q} is not integrable (exponent must exceed -1)")
    p, c = _shape(gamma)
    return math.exp(special.gammaln((q + 1) / p) - special.gammaln(1 / p)
                    - (q / p) * math.log(c))


def stationary_moments(gamma: float) -> StationaryMoments:
    if gamma < 0:
        raise ValidationError(f"gamma must be >= 0, got {gamma}")
    b = abs_moment(gamma, 2 * gamma)
    a = abs_moment(gamma, 2 * gamma - 2) if classify_regime(gamma) is Regime.HIGH else None
    return StationaryMoments(a=a, b=b)


def unit_pdf(gamma, y):
    """f0: invariant density at theta0 = (0, 1), sigma = 1."""
    p, c = _shape(gamma)
    y = np.asarray(y, dtype=float)
    return np.exp(-c * np.abs(y) ** p) / normalizer(gamma)


def unit_cdf(gamma, y):
    """F0 via the regularised upper incomplete gamma function (no cancellation in either tail)."""
    p, c = _shape(gamma)
    y = np.asarray(y, dtype=float)
    tail = 0.5 * special.gammaincc(1.0 / p, c * np.abs(y) ** p)
    return np.where(y < 0, tail, 1.0 - tail)


def unit_quantile(gamma, u):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValidationError("quantile level must lie strictly inside (0, 1)")
    p, c = _shape(gamma)
    lower = u < 0.5
    tail = np.where(lower, 2.0 * u, 2.0 * (1.0 - u))
    r = (special.gammainccinv(1.0 / p, tail) / c) ** (1.0 / p)
    return np.where(lower, -r, r)


@dataclass(frozen=True)
class ParametricModel:
    """The family ``dX = -beta sgn(X - alpha)|X - alpha|^gamma dt + sigma dW``.

    ``theta_box`` is ``((a1, a2), (b1, b2))``; a degenerate box (``a1 == a2``
    or ``b1 == b2``) pins the corresponding coordinate.
    """

    gamma: float
    sigma: float
    theta_box: tuple
    regime: Regime = field(init=False)

    def __post_init__(self):
        (a1, a2), (b1, b2) = self.theta_box
        box = ((float(a1), float(a2)), (float(b1), float(b2)))
        object.__setattr__(self, "theta_box", box)
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValidationError(f"gamma must be >= 0, got {self.gamma}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not all(math.isfinite(v) for pair in box for v in pair):
            raise ValidationError("theta box must be finite")
        if b1 <= 0:
            raise ValidationError(f"box lower beta bound must be positive, got {b1}")
        if a1 > a2 or b1 > b2:
            raise ValidationError(f"empty theta box {box}")
        object.__setattr__(self, "regime", classify_regime(self.gamma))

    @property
    def power(self):
        return self.gamma + 1.0

    def require_supported(self):
        if self.regime is Regime.UNSUPPORTED:
            raise UnsupportedRegimeError(f"unsupported regime gamma={self.gamma:g}")

    def contains(self, theta) -> bool:
        theta = as_theta(theta)
        (a1, a2), (b1, b2) = self.theta_box
        return a1 <= theta.alpha <= a2 and b1 <= theta.beta <= b2

    def trend(self, theta, x):
        theta = as_theta(theta)
        u = np.asarray(x, dtype=float) - theta.alpha
        return -theta.beta * sgn(u) * np.abs(u) ** self.gamma

    def scale(self, theta) -> float:
        """Spatial factor k with y = k (x - alpha)."""
        theta = as_theta(theta)
        p = self.power
        return theta.beta ** (1 / p) * self.sigma ** (-2 / p)

    def standardize(self, theta, x):
        theta = as_theta(theta)
        return self.scale(theta) * (np.asarray(x, dtype=float) - theta.alpha)

    def time_factor(self, theta) -> float:
        """T_*/T = beta^(2/(gamma+1)) sigma^(2(gamma-1)/(gamma+1))."""
        theta = as_theta(theta)
        p = self.power
        return theta.beta ** (2 / p) * self.sigma ** (2 * (self.gamma - 1) / p)

    def pdf(self, theta, x):
        return self.scale(theta) * unit_pdf(self.gamma, self.standardize(theta, x))

    def cdf(self, theta, x):
        return unit_cdf(self.gamma, self.standardize(theta, x))

    def quantile(self, theta, u):
        theta = as_theta(theta)
        return theta.alpha + unit_quantile(self.gamma, u) / self.scale(theta)

    def at(self, theta) -> "FamilyMember":
        theta = as_theta(theta)
        return FamilyMember(self, theta)


@dataclass(frozen=True)
class FamilyMember:
    """One member of a parametric family, exposing the same interface as SimpleModel."""

    family: ParametricModel
    theta: Theta

    @property
    def sigma_const(self):
        return self.family.sigma

    def drift(self, x):
        return self.family.trend(self.theta, x)

    def diffusion(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.family.sigma)

    def pdf(self, x):
        return self.family.pdf(self.theta, x)

    def cdf(self, x):
        return self.family.cdf(self.theta, x)

    def quantile(self, u):
        return self.family.quantile(self.theta, u)


def make_family(gamma: float, sigma: float, theta_box) -> ParametricModel:
    return ParametricModel(float(gamma), float(sigma), tuple(theta_box))


def trend(model: ParametricModel, theta, x):
    return model.trend(theta, x)


def invariant_density(model, theta, x):
    return model.pdf(theta, x)


def invariant_cdf(model, theta, x):
    return model.cdf(theta, x)


def invariant_quantile(model, theta, p):
    return model.quantile(theta, p)


def standardize(model, theta, x):
    return model.standardize(theta, x)


# --------------------------------------------------------------------------
# simple-hypothesis model

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)  # on [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _as_function(f, name):
    if callable(f):
        return f
    value = float(f)
    if not (math.isfinite(value) and value > 0) and name == "diffusion":
        raise ValidationError(f"constant diffusion must be positive, got {value}")

    def const(x):
        return np.full_like(np.asarray(x, dtype=float), value)

    const.constant = value
    return const


class SimpleModel:
    """Known drift ``S0`` and diffusion ``sigma(x)`` with numerically derived invariant law.

    Parameters
    ----------
    drift, diffusion : callable or float
        Vectorised functions of ``x``; a float diffusion is a constant.
    truncation : (float, float)
        Support used for all quadratures.  The estimated invariant mass
        outside it must stay below ``tail_mass``.
    breakpoints : sequence of float
        Points where the drift or diffusion is not smooth; they become
        panel boundaries.  ``0`` is always one.
    tail_radius : float, optional
        Radius beyond which ``sgn(y) S0(y) / sigma(y)**2 < 0`` is checked.
        Defaults to half the smaller truncation half-width.
    """

    def __init__(self, drift, diffusion=1.0, truncation=None, *, breakpoints=(),
                 n_cells=None, tail_mass=None, tail_radius=None, label=None):
        lo, hi = truncation if truncation is not None else DEFAULTS["simple_truncation"]
        lo, hi = float(lo), float(hi)
        if not (lo < hi):
            raise ValidationError(f"invalid truncation [{lo}, {hi}]")
        self.drift = _as_function(drift, "drift")
        self.diffusion = _as_function(diffusion, "diffusion")
        self.truncation = (lo, hi)
        self.label = label
        self.warnings: list[str] = []
        n_cells = int(n_cells or DEFAULTS["simple_cells"])
        tail_mass = DEFAULTS["simple_tail_mass"] if tail_mass is None else tail_mass

        extra = [b for b in list(breakpoints) + [0.0] if lo < b < hi]
        nodes = np.union1d(np.linspace(lo, hi, n_cells + 1), extra)
        self._nodes = nodes
        self._origin = 0.0 if lo < 0.0 < hi else lo

        sig_nodes = self.diffusion(nodes)
        if not np.all(np.isfinite(sig_nodes)) or np.any(sig_nodes <= 0):
            raise ValidationError("diffusion must be positive and finite on the truncation")

        # exponent E(x) = 2 int_origin^x S0/sigma^2 at the nodes
        widths = np.diff(nodes)
        pts = nodes[:-1, None] + widths[:, None] * _GL_NODES
        cell_int = 2.0 * widths * (self._ratio(pts) @ _GL_WEIGHTS)
        expo = np.concatenate([[0.0], np.cumsum(cell_int)])
        expo -= np.interp(self._origin, nodes, expo)  # exact: origin is a node
        if not np.all(np.isfinite(expo)):
            raise ValidationError("drift/diffusion produced non-finite values on the truncation")
        self._expo_nodes = expo
        self._shift = float(expo.max())

        # cell masses of exp(E - shift)/sigma^2 using the nested inner integral
        inner = self._unnormalised(pts.ravel()).reshape(pts.shape)
        cell_mass = widths * (inner @ _GL_WEIGHTS)
        total = float(cell_mass.sum())
        if not (math.isfinite(total) and total > 0):
            raise ValidationError("invariant density is not normalisable on the truncation")
        self._log_norm = math.log(total) + self._shift  # log G
        self._cdf_nodes = np.concatenate([[0.0], np.cumsum(cell_mass)]) / total
        self._cdf_nodes[-1] = 1.0

        # outside-mass estimate from the local exponential decay at each end
        outside = 0.0
        for end, direction in ((lo, -1.0), (hi, 1.0)):
            dens = float(self.pdf(end))
            slope = float(2.0 * self._ratio(np.array([end]))[0]) * direction
            if slope >= 0:
                raise ValidationError(
                    f"invariant density does not decay at truncation end {end:g}; "
                    "mass diverges")
            outside += dens / -slope
        self.outside_mass = outside
        if outside > tail_mass:
            raise ValidationError(
                f"estimated invariant mass outside [{lo:g}, {hi:g}] is {outside:.3g} "
                f"> {tail_mass:g}; widen the truncation")

        radius = tail_radius if tail_radius is not None else 0.5 * min(abs(lo), abs(hi))
        self._tail_sign_check(radius)

        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(nodes).tobytes())
        digest.update(np.ascontiguousarray(np.round(self.log_pdf(nodes), 9)).tobytes())
        self.key = digest.hexdigest()[:12]

    # -- internals ---------------------------------------------------------
    def _ratio(self, x):
        return self.drift(x) / self.diffusion(x) ** 2

    def _exponent(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self._nodes, x, side="right") - 1, 0, len(self._nodes) - 2)
        left = self._nodes[idx]
        h = x - left
        pts = left[..., None] + h[..., None] * _GL_NODES
        return self._expo_nodes[idx] + 2.0 * h * (self._ratio(pts) @ _GL_WEIGHTS)

    def _unnormalised(self, x):
        return np.exp(self._exponent(x) - self._shift) / self.diffusion(x) ** 2

    def _tail_sign_check(self, radius):
        lo, hi = self.truncation
        ys = np.concatenate([np.linspace(lo, -radius, 200), np.linspace(radius, hi, 200)])
        ys = ys[np.abs(ys) >= radius]
        values = np.sign(ys) * self._ratio(ys)
        if np.any(values >= 0):
            msg = (f"tail-sign condition sgn(y) S0(y)/sigma(y)^2 < 0 fails for some "
                   f"|y| >= {radius:g}")
            self.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)

    # -- public interface --------------------------------------------------
    @property
    def normalizer(self) -> float:
        """G(S0) (with the exponent referenced at 0 or at the left truncation end)."""
        return math.exp(self._log_norm)

    @property
    def sigma_const(self):
        return getattr(self.diffusion, "constant", None)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self._exponent(x) - 2.0 * np.log(self.diffusion(x)) - self._log_norm

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.truncation
        inside = (x >= lo) & (x <= hi)
        xc = np.clip(x, lo, hi)
        return np.where(inside, np.exp(self.log_pdf(xc)), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.truncation
        xc = np.clip(x, lo, hi)
        idx = np.clip(np.searchsorted(self._nodes, xc, side="right") - 1, 0, len(self._nodes) - 2)
        left = self._nodes[idx]
        h = xc - left
        pts = left[..., None] + h[..., None] * _GL_NODES
        partial = h * (self.pdf(pts) @ _GL_WEIGHTS)
        return np.clip(self._cdf_nodes[idx] + partial, 0.0, 1.0)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)):
            raise ValidationError("quantile level must lie strictly inside (0, 1)")
        nodes, cdfn = self._nodes, self._cdf_nodes
        idx = np.clip(np.searchsorted(cdfn, u, side="right") - 1, 0, len(nodes) - 2)
        a, b = nodes[idx], nodes[idx + 1]
        fa, fb = cdfn[idx], cdfn[idx + 1]
        span = np.where(fb > fa, fb - fa, 1.0)
        x = a + (b - a) * np.clip((u - fa) / span, 0.0, 1.0)
        # safeguarded Newton inside the bracketing cell
        for _ in range(30):
            err = self.cdf(x) - u
            if np.all(np.abs(err) <= 1e-13):
                break
            a = np.where(err < 0, x, a)
            b = np.where(err > 0, x, b)
            dens = self.pdf(x)
            step = np.where(dens > 0, err / np.where(dens > 0, dens, 1.0), 0.0)
            x_new = x - step
            bad = (x_new <= a) | (x_new >= b) | (dens <= 0)
            x = np.where(bad, 0.5 * (a + b), x_new)
        return x

    def __repr__(self):
        name = self.label or "SimpleModel"
        return f"<{name} truncation={self.truncation} key={self.key}>"


def make_simple_model(S0, sigma=1.0, truncation=None, **kwargs) -> SimpleModel:
    return SimpleModel(S0, sigma, truncation, **kwargs)
