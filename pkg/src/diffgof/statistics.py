"""Goodness-of-fit statistics computed from one trajectory.

Composite hypothesis (plug-in MLE):

* ``ParamEDF``      distance between the EDF and F(theta_hat, .)
* ``ParamDensity``  distance between the local-time density and f(theta_hat, .)

Simple hypothesis (known S0, sigma):

* ``SimpleDensity`` distance between the local-time density and f_S0
* ``ADF``           integral of the squared normalised martingale residual
* ``KSIncrement``   supremum of the unweighted residual

Integrals against dF are taken in probability scale: the integrand is
evaluated at ``x_j = F^{-1}(j/(m+1))`` and integrated by the trapezoid rule
over ``t in [0, 1]``, the endpoints carrying the exact limiting values.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .errors import ValidationError
from .estimators import PathIndex, edf, local_time_density, mle
from .model import ParametricModel, SimpleModel, as_theta


class Family(str, enum.Enum):
    PARAM_EDF = "ParamEDF"
    PARAM_DENSITY = "ParamDensity"
    SIMPLE_DENSITY = "SimpleDensity"
    ADF = "ADF"
    KS_INCREMENT = "KSIncrement"


class Norm(str, enum.Enum):
    CVM = "CvM"
    KS = "KS"


@dataclass(frozen=True)
class StatisticKind:
    family: Family
    norm: Norm

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "norm", Norm(self.norm))
        if self.family is Family.ADF and self.norm is not Norm.CVM:
            raise ValidationError("ADF statistic is defined with the CvM (integral) norm only")
        if self.family is Family.KS_INCREMENT and self.norm is not Norm.KS:
            raise ValidationError("KSIncrement statistic is defined with the KS (sup) norm only")

    @classmethod
    def parse(cls, text: str) -> "StatisticKind":
        """Parse ``family:norm``, e.g. ``ParamEDF:CvM``; ``ADF`` and ``KSIncrement`` may omit the norm."""
        family, _, norm = text.strip().partition(":")
        try:
            fam = Family(family)
        except ValueError:
            raise ValidationError(f"unknown statistic family {family!r}") from None
        if not norm:
            norm = {Family.ADF: "CvM", Family.KS_INCREMENT: "KS"}.get(fam)
            if norm is None:
                raise ValidationError(f"statistic {text!r} needs a norm (CvM or KS)")
        try:
            nrm = Norm(norm)
        except ValueError:
            raise ValidationError(f"unknown norm {norm!r}") from None
        return cls(fam, nrm)

    @property
    def composite(self) -> bool:
        return self.family in (Family.PARAM_EDF, Family.PARAM_DENSITY)

    def __str__(self):
        return f"{self.family.value}:{self.norm.value}"


@dataclass(frozen=True)
class StatValue:
    value: float
    kind: StatisticKind
    metadata: dict = field(default_factory=dict, compare=False)


def probability_grid(m=None) -> np.ndarray:
    """Interior levels j/(m+1), j = 1..m."""
    m = int(m or DEFAULTS["grid_points"])
    if m < 2:
        raise ValidationError("probability grid needs at least 2 points")
    return np.arange(1, m + 1) / (m + 1.0)


def _with_ends(t, values, lower=0.0, upper=0.0):
    return np.concatenate([[0.0], t, [1.0]]), np.concatenate([[lower], values, [upper]])


def cvm_integral(t, values, lower=0.0, upper=0.0):
    """Trapezoid of ``values**2`` over [0, 1] given interior levels ``t``."""
    tt, vv = _with_ends(t, values, lower, upper)
    return float(np.trapezoid(vv * vv, tt))


def _meta(traj, m, **extra):
    out = {"T": traj.horizon, "dt": traj.dt, "grid_points": m}
    out.update(extra)
    return out


def param_stat(traj, model: ParametricModel, theta_hat, kind, norm=None, m=None,
               index=None) -> StatValue:
    """Parametric CvM/KS statistic with plug-in estimate ``theta_hat``.

    CvM normalisations are ``beta^(2/(g+1)) sigma^(2(g-1)/(g+1)) T`` (EDF) and
    ``sigma^2 T`` (density); the KS versions use the square roots.
    """
    model.require_supported()
    if not isinstance(kind, StatisticKind):
        kind = StatisticKind(kind, norm)
    if not kind.composite:
        raise ValidationError(f"{kind} is not a composite-hypothesis statistic")
    theta = as_theta(theta_hat)
    if not model.contains(theta):
        raise ValidationError(f"theta_hat {theta.as_tuple()} outside the parameter box")
    m = int(m or DEFAULTS["grid_points"])
    index = index or PathIndex(traj)
    t = probability_grid(m)
    x = model.quantile(theta, t)
    T = traj.horizon
    sig = model.sigma
    if kind.family is Family.PARAM_EDF:
        diff = edf(traj, x, index) - model.cdf(theta, x)
        scale = math.sqrt(model.time_factor(theta))
    else:
        diff = local_time_density(traj, x, sig, index) - model.pdf(theta, x)
        scale = sig
    if kind.norm is Norm.CVM:
        value = scale ** 2 * T * cvm_integral(t, diff)
    else:
        value = scale * math.sqrt(T) * float(np.max(np.abs(diff)))
    meta = _meta(traj, m, alpha_hat=theta.alpha, beta_hat=theta.beta)
    return StatValue(value, kind, meta)


def simple_density_stat(traj, model: SimpleModel, norm="CvM", m=None, index=None) -> StatValue:
    """T int (f_T - f_S0)^2 dF_S0 (CvM) or sup_x sqrt(T)|f_T - f_S0| (KS)."""
    kind = StatisticKind(Family.SIMPLE_DENSITY, norm)
    m = int(m or DEFAULTS["grid_points"])
    t = probability_grid(m)
    x = model.quantile(t)
    diff = local_time_density(traj, x, model.diffusion, index) - model.pdf(x)
    T = traj.horizon
    if kind.norm is Norm.CVM:
        value = T * cvm_integral(t, diff)
    else:
        value = math.sqrt(T) * float(np.max(np.abs(diff)))
    return StatValue(value, kind, _meta(traj, m))


def _residual(traj, model, weighted, index):
    x = index.left
    resid = index.dx - model.drift(x) * traj.dt
    if weighted:
        sig = np.asarray(model.diffusion(x), dtype=float)
        if np.any(~np.isfinite(sig)) or np.any(sig <= 0):
            raise ValidationError("diffusion is not positive along the path")
        resid = resid / sig
    return resid


def residual_process(traj, model, x_grid, weighted=True, index=None):
    """(1/sqrt T) sum_k 1{X_k < x} [dX_k - S0(X_k) dt] / sigma(X_k) at each level x."""
    index = index or PathIndex(traj)
    resid = _residual(traj, model, weighted, index)
    return index.sum_below(resid, x_grid) / math.sqrt(traj.horizon), resid.sum() / math.sqrt(traj.horizon)


def adf_stat(traj, model: SimpleModel, m=None, index=None) -> StatValue:
    """Integral in dF_S0 of the squared residual process."""
    m = int(m or DEFAULTS["grid_points"])
    t = probability_grid(m)
    x = model.quantile(t)
    inner, total = residual_process(traj, model, x, weighted=True, index=index)
    value = cvm_integral(t, inner, lower=0.0, upper=total)
    return StatValue(value, StatisticKind(Family.ADF, Norm.CVM), _meta(traj, m))


def ks_increment_stat(traj, model: SimpleModel, m=None, weighted=False, index=None) -> StatValue:
    """sup_x of the absolute residual process; unweighted by default (sigma = 1 form).

    The supremum runs over the quantile grid together with ``x = +inf``.
    """
    m = int(m or DEFAULTS["grid_points"])
    x = model.quantile(probability_grid(m))
    inner, total = residual_process(traj, model, x, weighted=weighted, index=index)
    value = max(float(np.max(np.abs(inner))), abs(float(total)))
    meta = _meta(traj, m, weighted=bool(weighted))
    return StatValue(value, StatisticKind(Family.KS_INCREMENT, Norm.KS), meta)


def compute_statistics(traj, kinds, model, theta_hat=None, m=None, weighted_ks=False):
    """Evaluate several statistics on one path, sharing the sort and the MLE.

    ``model`` is a ParametricModel for composite kinds (the MLE is computed
    once when ``theta_hat`` is None) and a SimpleModel otherwise.
    """
    kinds = [k if isinstance(k, StatisticKind) else StatisticKind.parse(k) for k in kinds]
    index = PathIndex(traj)
    out = []
    for kind in kinds:
        if kind.composite:
            if not isinstance(model, ParametricModel):
                raise ValidationError(f"{kind} needs a parametric family model")
            if theta_hat is None:
                theta_hat = mle(traj, model)
            out.append(param_stat(traj, model, theta_hat, kind, m=m, index=index))
            continue
        if not isinstance(model, SimpleModel):
            raise ValidationError(f"{kind} needs a simple-hypothesis model")
        if kind.family is Family.SIMPLE_DENSITY:
            out.append(simple_density_stat(traj, model, kind.norm, m=m, index=index))
        elif kind.family is Family.ADF:
            out.append(adf_stat(traj, model, m=m, index=index))
        else:
            out.append(ks_increment_stat(traj, model, m=m, weighted=weighted_ks, index=index))
    return out, theta_hat
