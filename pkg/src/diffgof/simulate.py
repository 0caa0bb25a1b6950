"""Euler-Maruyama paths, stationary starts and discretised Wiener increments.

Randomness is drawn from counter-based Philox streams keyed by
``(seed, stream_id)``, so a replicate's output depends only on its key and
never on the order in which replicates are processed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._defaults import DEFAULTS
from .errors import SimulationError, ValidationError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def stream_id(replicate: int, arm: int = 0) -> int:
    """Pack an arm index and a replicate index into one 64-bit stream id."""
    return (int(arm) << 32) | int(replicate)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {rng!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Path observed on the uniform grid ``t0 + k dt``, k = 0..n."""

    dt: float
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("a trajectory needs at least two observations")
        if not (self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.dt == other.dt and self.t0 == other.t0
                and np.array_equal(self.values, other.values))

    def to_csv(self, path):
        data = np.column_stack([self.times, self.values])
        np.savetxt(path, data, delimiter=",", header="t,x", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip().replace(" ", "")
        if header != "t,x":
            raise ValidationError(f"{path}: expected header 't,x', found {header!r}")
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed trajectory file ({exc})") from None
        if data.shape[0] < 2 or data.shape[1] != 2:
            raise ValidationError(f"{path}: need at least two rows of t,x")
        t = data[:, 0]
        steps = np.diff(t)
        dt = (t[-1] - t[0]) / (t.size - 1)
        if not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise ValidationError(f"{path}: time grid is not uniform")
        return cls(dt=float(dt), values=data[:, 1], t0=float(t[0]))


def _n_steps(T, dt):
    if not (dt > 0 and T > 0):
        raise ValidationError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    n = round(T / dt)
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValidationError(f"T={T} is not an integer multiple of dt={dt}")
    return int(n)


def _sigma_const(diffusion):
    if isinstance(diffusion, (int, float)):
        return float(diffusion)
    return getattr(diffusion, "constant", None)


def euler_maruyama(drift, diffusion, x0, dt, noise):
    """Vectorised Euler-Maruyama over replicates.

    ``noise`` has shape ``(n_paths, n_steps)`` of standard normals; row ``i``
    drives the path started at ``x0[i]``.  Returns ``(n_paths, n_steps + 1)``.
    """
    noise = np.atleast_2d(noise)
    n_paths, n = noise.shape
    out = np.empty((n_paths, n + 1))
    out[:, 0] = x0
    sqdt = math.sqrt(dt)
    const = _sigma_const(diffusion)
    x = out[:, 0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        if const is not None:
            scaled = (const * sqdt) * noise
            for k in range(n):
                x = x + drift(x) * dt + scaled[:, k]
                out[:, k + 1] = x
        else:
            for k in range(n):
                x = x + drift(x) * dt + diffusion(x) * sqdt * noise[:, k]
                out[:, k + 1] = x
    finite = np.isfinite(out)
    if not finite.all():
        bad = np.argwhere(~finite)
        step = int(bad[:, 1].min())
        raise SimulationError(f"non-finite state at step {step}", step=step)
    return out


def simulate_path(drift, diffusion, x0, T, dt, rng) -> Trajectory:
    """Simulate one Euler-Maruyama path of ``dX = S(X) dt + sigma(X) dW`` on ``[0, T]``."""
    n = _n_steps(T, dt)
    gen = as_generator(rng)
    noise = gen.standard_normal(n)
    values = euler_maruyama(drift, diffusion, np.array([float(x0)]), dt, noise[None, :])[0]
    return Trajectory(dt=dt, values=values)


def sample_stationary_init(model, theta=None, rng=None) -> float:
    """Draw X0 from the invariant law via the quantile transform of a uniform."""
    law = model.at(theta) if theta is not None else model
    gen = as_generator(rng)
    u = gen.random()
    while u == 0.0:
        u = gen.random()
    return float(law.quantile(u))


def simulate_stationary(law, T, dt, rng, burn_in=None) -> Trajectory:
    """Path from a stationary start for a law exposing drift/diffusion/quantile.

    A uniform for the start is drawn before the path noise, from the same
    generator.  ``burn_in`` (a time) is simulated and discarded.
    """
    gen = as_generator(rng)
    x0 = sample_stationary_init(law, rng=gen)
    if burn_in:
        n_b = _n_steps(burn_in, dt)
        pre = euler_maruyama(law.drift, _diffusion_of(law), np.array([x0]), dt,
                             gen.standard_normal((1, n_b)))
        x0 = float(pre[0, -1])
    return simulate_path(law.drift, _diffusion_of(law), x0, T, dt, gen)


def _diffusion_of(law):
    const = getattr(law, "sigma_const", None)
    return const if const is not None else law.diffusion


def simulate_ensemble(law, T, dt, streams, chunk=64):
    """Stationary-start paths for a list of RngStream keys, yielded one at a time.

    Paths are simulated in vectorised chunks; each row still consumes only its
    own stream, so results match :func:`simulate_stationary` per replicate.
    """
    n = _n_steps(T, dt)
    diffusion = _diffusion_of(law)
    streams = list(streams)
    for start in range(0, len(streams), chunk):
        block = streams[start:start + chunk]
        gens = [as_generator(s) for s in block]
        x0 = np.array([sample_stationary_init(law, rng=g) for g in gens])
        noise = np.stack([g.standard_normal(n) for g in gens])
        paths = euler_maruyama(law.drift, diffusion, x0, dt, noise)
        for row in paths:
            yield Trajectory(dt=dt, values=row)


@dataclass(frozen=True, eq=False)
class WienerGrid:
    """Increments of a two-sided Wiener process over the cells of ``[-L, L]``."""

    edges: np.ndarray
    increments: np.ndarray

    @property
    def dz(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def wiener_cells(L, dz):
    """Cell edges partitioning [-L, L].

    dz is adjusted so an even number of cells fits, which makes 0 an edge and
    keeps midpoints away from the origin.
    """
    if not (L > 0 and 0 < dz <= L):
        raise ValidationError(f"need L > 0 and 0 < dz <= L, got L={L}, dz={dz}")
    n = 2 * max(1, int(round(L / dz)))
    return np.linspace(-L, L, n + 1)


def wiener_increments(L, dz, rng) -> WienerGrid:
    edges = wiener_cells(L, dz)
    gen = as_generator(rng)
    width = edges[1] - edges[0]
    inc = gen.standard_normal(edges.size - 1) * math.sqrt(width)
    return WienerGrid(edges=edges, increments=inc)


DEFAULT_DT = DEFAULTS["dt"]
