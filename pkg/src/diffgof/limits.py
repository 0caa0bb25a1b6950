"""Monte Carlo samplers for the limit laws of the test statistics.

Composite hypothesis.  With ``f0, F0`` the unit invariant law and ``W`` a
two-sided Wiener process, the fields

    Phi(y)  = 2 int [F0(z) F0(y) - F0(z ^ y)] / sqrt(f0(z)) dW(z)
    Phi~(y) = 2 int [F0(z) - 1{z > y}] / sqrt(f0(z)) dW(z)
    Pi      = int |z|^(g-1) sqrt(f0(z)) dW(z)
    Psi     = int sgn(z) |z|^g sqrt(f0(z)) dW(z)

are built from one increment vector over the cells of ``[-L, L]`` and
combined into

    eta0(y)  = Phi(y) + Pi f0(y)/(g a) + y Psi f0(y)/((g+1) b)
    zeta0(y) = [Phi~(y) - 2 sgn(y)|y|^g Pi/(g a) + (1 - 2|y|^(g+1)) Psi/((g+1) b)] f0(y)

(the Pi terms vanish for gamma < 1/2).  CvM laws integrate the squared
field against f0; KS laws take the supremum of its absolute value.

Simple hypothesis.  ``zeta(x) = 2 f(x) int [F(y) - 1{y > x}] / (sigma(y) sqrt(f(y))) dW(y)``
with f, F the model's invariant law, plus the Wiener functionals
``int_0^1 w^2`` and ``sup |w|``.

Laws are addressed by string ids:

    Delta:gamma=<g>        Delta_sup:gamma=<g>      (ParamEDF CvM / KS)
    delta:gamma=<g>        delta_sup:gamma=<g>      (ParamDensity CvM / KS)
    delta_S0:<key>         delta_S0_sup:<key>       (SimpleDensity CvM / KS)
    int_w2                 sup_abs_w                (ADF / KSIncrement)
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._defaults import DEFAULTS
from .errors import UnsupportedRegimeError, ValidationError
from .model import (Regime, classify_regime, stationary_moments, unit_cdf, unit_pdf,
                    unit_quantile)
from .simulate import RngStream, as_generator, wiener_cells
from .statistics import cvm_integral, probability_grid

PARAM_LAWS = {"Delta": ("ParamEDF", "CvM"), "Delta_sup": ("ParamEDF", "KS"),
              "delta": ("ParamDensity", "CvM"), "delta_sup": ("ParamDensity", "KS")}
SIMPLE_LAWS = {"delta_S0": "CvM", "delta_S0_sup": "KS"}
W_LAWS = {"int_w2": "int_sq", "sup_abs_w": "sup_abs"}


def format_gamma(gamma: float) -> str:
    return f"{float(gamma):.12g}"


@dataclass(frozen=True)
class LawSpec:
    name: str
    gamma: float | None = None
    model_key: str | None = None

    @property
    def law_id(self) -> str:
        if self.name in PARAM_LAWS:
            return f"{self.name}:gamma={format_gamma(self.gamma)}"
        if self.name in SIMPLE_LAWS:
            return f"{self.name}:{self.model_key}"
        return self.name


def parse_law_id(law_id: str) -> LawSpec:
    name, _, rest = law_id.strip().partition(":")
    if name in W_LAWS:
        if rest:
            raise ValidationError(f"law {name!r} takes no arguments, got {law_id!r}")
        return LawSpec(name)
    if name in PARAM_LAWS:
        key, _, value = rest.partition("=")
        if key != "gamma":
            raise ValidationError(f"law id {law_id!r} must look like {name}:gamma=<value>")
        try:
            gamma = float(value)
        except ValueError:
            raise ValidationError(f"bad gamma in law id {law_id!r}") from None
        if not gamma >= 0:
            raise ValidationError(f"gamma must be >= 0 in {law_id!r}")
        if classify_regime(gamma) is Regime.UNSUPPORTED:
            raise UnsupportedRegimeError(f"unsupported regime gamma={gamma:g}")
        return LawSpec(name, gamma=gamma)
    if name in SIMPLE_LAWS:
        if not rest:
            raise ValidationError(f"law id {law_id!r} needs a model key")
        return LawSpec(name, model_key=rest)
    raise ValidationError(f"unknown law id {law_id!r}")


@dataclass(frozen=True)
class LimitSample:
    value: float
    law_id: str
    grid: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------
# composite-hypothesis fields

@dataclass(frozen=True)
class ParamGrid:
    L: float
    dz: float
    m_y: int

    def as_dict(self):
        return {"L": self.L, "dz": self.dz, "m_y": self.m_y}


def default_param_grid(gamma: float) -> ParamGrid:
    """L with unit-law tail mass below 1e-8, dz = 0.005 L, 400 quantile-spaced y."""
    p = gamma + 1.0
    c = 2.0 / p
    L = float((special.gammainccinv(1.0 / p, DEFAULTS["limit_tail_mass"]) / c) ** (1.0 / p))
    return ParamGrid(L=L, dz=DEFAULTS["limit_dz_fraction"] * L, m_y=DEFAULTS["limit_m_y"])


def _grid_of(gamma, grid):
    if grid is None:
        return default_param_grid(gamma)
    if isinstance(grid, ParamGrid):
        return grid
    return ParamGrid(float(grid["L"]), float(grid["dz"]), int(grid["m_y"]))


@dataclass(frozen=True, eq=False)
class _ParamKernels:
    gamma: float
    regime: Regime
    edges: np.ndarray
    t: np.ndarray
    y: np.ndarray
    f0y: np.ndarray
    phi: np.ndarray        # (m_y, n_z)
    phi_tilde: np.ndarray  # (m_y, n_z)
    pi_w: np.ndarray | None
    psi_w: np.ndarray
    a: float | None
    b: float

    @property
    def n_cells(self):
        return self.edges.size - 1

    @property
    def cell_width(self):
        return float(self.edges[1] - self.edges[0])


@functools.lru_cache(maxsize=32)
def _param_kernels(gamma: float, L: float, dz: float, m_y: int) -> _ParamKernels:
    regime = classify_regime(gamma)
    if regime is Regime.UNSUPPORTED:
        raise UnsupportedRegimeError(f"unsupported regime gamma={gamma:g}")
    edges = wiener_cells(L, dz)
    z = 0.5 * (edges[:-1] + edges[1:])
    Fz = unit_cdf(gamma, z)
    root = np.sqrt(unit_pdf(gamma, z))
    t = probability_grid(m_y)
    y = unit_quantile(gamma, t)
    Fy = unit_cdf(gamma, y)
    phi = 2.0 * (np.outer(Fy, Fz) - unit_cdf(gamma, np.minimum(z[None, :], y[:, None]))) / root
    phi_tilde = 2.0 * (Fz[None, :] - (z[None, :] > y[:, None])) / root
    moments = stationary_moments(gamma)
    pi_w = np.abs(z) ** (gamma - 1.0) * root if regime is Regime.HIGH else None
    psi_w = np.sign(z) * np.abs(z) ** gamma * root
    return _ParamKernels(gamma, regime, edges, t, y, unit_pdf(gamma, y), phi, phi_tilde,
                         pi_w, psi_w, moments.a, moments.b)


@dataclass(frozen=True, eq=False)
class LimitField:
    """One realisation (or a batch, trailing axis) of the composite-hypothesis limit fields."""

    y_grid: np.ndarray
    t_grid: np.ndarray
    phi: np.ndarray
    phi_tilde: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    eta0: np.ndarray
    zeta0: np.ndarray
    gamma: float
    regime: Regime


def param_limit_field(gamma, increments=None, grid=None, rng=None, pi_override=None) -> LimitField:
    """Assemble Phi, Phi~, Pi, Psi, eta0 and zeta0 from one shared increment vector.

    ``increments`` may be given explicitly with shape ``(n_cells,)`` or
    ``(n_cells, N)``; otherwise one vector is drawn from ``rng``.
    ``pi_override`` replaces Pi (it has no effect in the low-gamma regime).
    """
    g = _grid_of(gamma, grid)
    k = _param_kernels(float(gamma), g.L, g.dz, g.m_y)
    if increments is None:
        gen = as_generator(rng)
        increments = gen.standard_normal(k.n_cells) * math.sqrt(k.cell_width)
    dW = np.asarray(increments, dtype=float)
    if dW.shape[0] != k.n_cells:
        raise ValidationError(f"expected {k.n_cells} increments, got {dW.shape[0]}")
    phi = k.phi @ dW
    phi_t = k.phi_tilde @ dW
    psi = k.psi_w @ dW
    y = k.y if dW.ndim == 1 else k.y[:, None]
    f0y = k.f0y if dW.ndim == 1 else k.f0y[:, None]
    b_term = psi / ((gamma + 1.0) * k.b)
    if k.regime is Regime.HIGH:
        pi = k.pi_w @ dW if pi_override is None else np.broadcast_to(pi_override, psi.shape)
        a_term = pi / (gamma * k.a)
        eta0 = phi + a_term * f0y + y * b_term * f0y
        zeta0 = (phi_t - 2.0 * np.sign(y) * np.abs(y) ** gamma * a_term
                 + (1.0 - 2.0 * np.abs(y) ** (gamma + 1.0)) * b_term) * f0y
    else:
        pi = np.zeros_like(psi)
        eta0 = phi + y * b_term * f0y
        zeta0 = (phi_t + (1.0 - 2.0 * np.abs(y) ** (gamma + 1.0)) * b_term) * f0y
    return LimitField(k.y, k.t, phi, phi_t, pi, psi, eta0, zeta0, float(gamma), k.regime)


def _reduce(field_values, t, norm):
    if norm == "CvM":
        if field_values.ndim == 1:
            return cvm_integral(t, field_values)
        tt = np.concatenate([[0.0], t, [1.0]])
        vv = np.vstack([np.zeros((1, field_values.shape[1])), field_values,
                        np.zeros((1, field_values.shape[1]))])
        return np.trapezoid(vv * vv, tt, axis=0)
    return np.max(np.abs(field_values), axis=0)


def sample_param_limit(gamma, kind="ParamEDF", norm="CvM", grid=None, rng=None) -> LimitSample:
    name = {v: k for k, v in PARAM_LAWS.items()}[(kind, norm)]
    g = _grid_of(gamma, grid)
    fld = param_limit_field(gamma, grid=g, rng=rng)
    values = fld.eta0 if kind == "ParamEDF" else fld.zeta0
    law_id = LawSpec(name, gamma=float(gamma)).law_id
    return LimitSample(float(_reduce(values, fld.t_grid, norm)), law_id, g.as_dict())


# --------------------------------------------------------------------------
# simple-hypothesis field

@dataclass(frozen=True)
class SimpleGrid:
    tail_prob: float
    cells: int
    m_y: int

    def as_dict(self):
        return {"tail_prob": self.tail_prob, "cells": self.cells, "m_y": self.m_y}


def default_simple_grid() -> SimpleGrid:
    return SimpleGrid(DEFAULTS["simple_limit_tail_prob"], DEFAULTS["simple_limit_cells"],
                      DEFAULTS["limit_m_y"])


def _simple_grid_of(grid):
    if grid is None:
        return default_simple_grid()
    if isinstance(grid, SimpleGrid):
        return grid
    return SimpleGrid(float(grid["tail_prob"]), int(grid["cells"]), int(grid["m_y"]))


def _simple_kernel(model, g: SimpleGrid):
    cache = model.__dict__.setdefault("_limit_kernels", {})
    if g in cache:
        return cache[g]
    lo, hi = model.quantile(np.array([g.tail_prob, 1.0 - g.tail_prob]))
    cells = g.cells + (g.cells % 2)
    edges = np.linspace(lo, hi, cells + 1)
    z = 0.5 * (edges[:-1] + edges[1:])
    t = probability_grid(g.m_y)
    x = model.quantile(t)
    fx = model.pdf(x)
    weight = 1.0 / (model.diffusion(z) * np.sqrt(model.pdf(z)))
    kern = 2.0 * fx[:, None] * (model.cdf(z)[None, :] - (z[None, :] > x[:, None])) * weight
    cache[g] = (edges, t, x, kern)
    return cache[g]


def simple_limit_field(model, increments=None, grid=None, rng=None):
    """zeta(S0, x_j) on the model's quantile grid; returns (x_grid, t_grid, zeta)."""
    g = _simple_grid_of(grid)
    edges, t, x, kern = _simple_kernel(model, g)
    if increments is None:
        gen = as_generator(rng)
        increments = gen.standard_normal(edges.size - 1) * math.sqrt(edges[1] - edges[0])
    dW = np.asarray(increments, dtype=float)
    return x, t, kern @ dW


def sample_simple_limit(model, norm="CvM", grid=None, rng=None) -> LimitSample:
    g = _simple_grid_of(grid)
    _, t, zeta = simple_limit_field(model, grid=g, rng=rng)
    name = "delta_S0" if norm == "CvM" else "delta_S0_sup"
    law_id = LawSpec(name, model_key=model.key).law_id
    return LimitSample(float(_reduce(zeta, t, norm)), law_id, g.as_dict())


# --------------------------------------------------------------------------
# Wiener functionals

def _w_functional(kind, normals, uniforms, bridge):
    """normals: (N, n) standard normals; uniforms: (N, 2, n) or None."""
    n = normals.shape[1]
    h = 1.0 / n
    w = np.cumsum(normals, axis=1) * math.sqrt(h)
    if kind == "int_sq":
        sq = w * w
        return h * (sq[:, :-1].sum(axis=1) + 0.5 * sq[:, -1])
    if not bridge:
        return np.max(np.abs(w), axis=1)
    # exact extremes of the Brownian bridge on each step, max and min drawn separately
    left = np.concatenate([np.zeros((w.shape[0], 1)), w[:, :-1]], axis=1)
    mid = 0.5 * (left + w)
    half_gap = 0.5 * (w - left)
    up = mid + np.sqrt(half_gap ** 2 - 0.5 * h * np.log(uniforms[:, 0, :]))
    down = mid - np.sqrt(half_gap ** 2 - 0.5 * h * np.log(uniforms[:, 1, :]))
    return np.maximum(up.max(axis=1), -down.min(axis=1))


def sample_w_functional(kind="int_sq", n_steps=None, rng=None, bridge=None) -> LimitSample:
    """One draw of int_0^1 w(t)^2 dt (``int_sq``) or sup |w| (``sup_abs``).

    The integral uses the trapezoid rule on the random-walk skeleton.  For the
    supremum, ``bridge=True`` (default) adds the exact Brownian-bridge maximum
    and minimum inside each step, removing the downward bias of the grid max.
    """
    n_steps = int(n_steps or DEFAULTS["w_n_steps"])
    if n_steps < 100:
        raise ValidationError("n_steps must be at least 100")
    bridge = DEFAULTS["w_bridge_sup"] if bridge is None else bridge
    gen = as_generator(rng)
    normals, uniforms = _w_draws(gen, kind, n_steps, bridge)
    value = _w_functional(kind, normals[None, :], None if uniforms is None else uniforms[None],
                          bridge)[0]
    law_id = "int_w2" if kind == "int_sq" else "sup_abs_w"
    return LimitSample(float(value), law_id, _w_grid(kind, n_steps, bridge))


def _w_draws(gen, kind, n_steps, bridge):
    normals = gen.standard_normal(n_steps)
    uniforms = None
    if kind == "sup_abs" and bridge:
        uniforms = 1.0 - gen.random((2, n_steps))  # in (0, 1]
    return normals, uniforms


def _w_grid(kind, n_steps, bridge):
    grid = {"n_steps": n_steps}
    if kind == "sup_abs":
        grid["bridge_sup"] = bool(bridge)
    return grid


def sup_abs_w_cdf(x, terms=200):
    """P(sup_{0<=t<=1} |w(t)| <= x) by the alternating image series."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xs = np.where(pos, x, 1.0)
    odd = 2 * np.arange(terms).reshape((-1,) + (1,) * x.ndim) + 1
    signs = np.where(odd % 4 == 1, 1.0, -1.0)
    series = (signs / odd) * np.exp(-(odd ** 2) * np.pi ** 2 / (8.0 * xs ** 2))
    out = np.where(pos, np.clip((4.0 / np.pi) * series.sum(axis=0), 0.0, 1.0), 0.0)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# batch sampling by law id

def law_grid(law_id, grid=None, model=None) -> dict:
    spec = parse_law_id(law_id)
    if spec.name in PARAM_LAWS:
        return _grid_of(spec.gamma, grid).as_dict()
    if spec.name in SIMPLE_LAWS:
        return _simple_grid_of(grid).as_dict()
    kind = W_LAWS[spec.name]
    grid = grid or {}
    bridge = grid.get("bridge_sup", DEFAULTS["w_bridge_sup"])
    return _w_grid(kind, int(grid.get("n_steps", DEFAULTS["w_n_steps"])), bridge)


def draw_law(law_id, n, seed, model=None, grid=None, start=0, chunk=2000) -> np.ndarray:
    """Draw ``n`` i.i.d. values of a limit law; replicate ``i`` uses stream ``(seed, start + i)``."""
    spec = parse_law_id(law_id)
    n = int(n)
    out = np.empty(n)
    if spec.name in SIMPLE_LAWS:
        if model is None:
            raise ValidationError(f"law {law_id!r} needs its simple model")
        if model.key != spec.model_key:
            raise ValidationError(
                f"law {law_id!r} does not match model key {model.key!r}")
    for s in range(0, n, chunk):
        idx = range(start + s, start + min(s + chunk, n))
        gens = [RngStream(seed, i).generator() for i in idx]
        out[s:s + len(gens)] = _draw_block(spec, gens, grid, model)
    return out


def _draw_block(spec, gens, grid, model):
    if spec.name in PARAM_LAWS:
        g = _grid_of(spec.gamma, grid)
        k = _param_kernels(spec.gamma, g.L, g.dz, g.m_y)
        dW = np.stack([gen.standard_normal(k.n_cells) for gen in gens], axis=1)
        dW *= math.sqrt(k.cell_width)
        kind, norm = PARAM_LAWS[spec.name]
        fld = param_limit_field(spec.gamma, increments=dW, grid=g)
        values = fld.eta0 if kind == "ParamEDF" else fld.zeta0
        return _reduce(values, fld.t_grid, norm)
    if spec.name in SIMPLE_LAWS:
        g = _simple_grid_of(grid)
        edges = _simple_kernel(model, g)[0]
        dW = np.stack([gen.standard_normal(edges.size - 1) for gen in gens], axis=1)
        dW *= math.sqrt(edges[1] - edges[0])
        _, t, zeta = simple_limit_field(model, increments=dW, grid=g)
        return _reduce(zeta, t, SIMPLE_LAWS[spec.name])
    kind = W_LAWS[spec.name]
    wg = law_grid(spec.name, grid)
    bridge = wg.get("bridge_sup", False)
    draws = [_w_draws(gen, kind, wg["n_steps"], bridge) for gen in gens]
    normals = np.stack([d[0] for d in draws])
    uniforms = np.stack([d[1] for d in draws]) if draws[0][1] is not None else None
    return _w_functional(kind, normals, uniforms, bridge)
