"""Model-spec grammar, study configuration files and validated CLI commands.

Model specs::

    family:gamma=1,sigma=1,box=-2:2x0.5:3
    simple:ou[,beta=1,mu=0,sigma=1]        S0(x) = -beta (x - mu)
    simple:shifted-ou[,mu=1,...]           the same with mu = 1 by default
    simple:cubic[,beta=1,sigma=1]          S0(x) = -beta x^3
    simple:switching[,beta=1,sigma=1]      S0(x) = -beta sgn(x)
    simple:nonlinear[,amp=0.8,beta=1,sigma=1]   S0(x) = -beta x (1 + amp cos x)
                                           (alias nonlinear-demo)
    simple:table=drift.csv[,sigma_table=sigma.csv]

Every simple spec also accepts ``lo=``, ``hi=`` (truncation) and ``cells=``.
Drift tables are CSV files with header ``x,s0``; diffusion tables use
``x,sigma``.  Both are interpolated linearly.
"""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .errors import ValidationError
from .model import ParametricModel, SimpleModel, Theta, make_family
from .statistics import StatisticKind

CONFIG_VERSION = 1
DEFAULT_BOX = ((-2.0, 2.0), (0.5, 3.0))


# --------------------------------------------------------------------------
# model specs

def _float(token, key, value):
    try:
        out = float(value)
    except ValueError:
        raise ValidationError(f"bad number for {key!r} in model spec: {token!r}") from None
    if not math.isfinite(out):
        raise ValidationError(f"non-finite {key!r} in model spec: {token!r}")
    return out


def _pairs(text, allowed, token):
    out = {}
    for item in filter(None, text.split(",")):
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq or key not in allowed:
            raise ValidationError(f"unexpected field {item!r} in model spec {token!r}")
        if key in out:
            raise ValidationError(f"duplicate field {key!r} in model spec {token!r}")
        out[key] = value.strip()
    return out


def parse_box(text, token=None):
    """``a1:a2xb1:b2`` -> ((a1, a2), (b1, b2))."""
    token = token or text
    try:
        a_part, b_part = text.split("x")
        a1, a2 = a_part.split(":")
        b1, b2 = b_part.split(":")
    except ValueError:
        raise ValidationError(f"box must look like a1:a2xb1:b2, got {text!r} in {token!r}") from None
    return ((_float(token, "box", a1), _float(token, "box", a2)),
            (_float(token, "box", b1), _float(token, "box", b2)))


def _read_table(path, column, token):
    if not os.path.exists(path):
        raise ValidationError(f"table file {path!r} not found (in {token!r})")
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
    if header != f"x,{column}":
        raise ValidationError(f"{path}: expected header 'x,{column}', found {header!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed table ({exc})") from None
    if data.shape[0] < 2 or data.shape[1] != 2:
        raise ValidationError(f"{path}: need at least two rows of x,{column}")
    x, y = data[:, 0], data[:, 1]
    if np.any(np.diff(x) <= 0) or not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: x must be strictly increasing and values finite")
    return x, y


def _builtin_drift(name, p, token):
    beta = _float(token, "beta", p.get("beta", "1"))
    if name in ("ou", "shifted-ou"):
        mu = _float(token, "mu", p.get("mu", "1" if name == "shifted-ou" else "0"))
        return (lambda x: -beta * (np.asarray(x) - mu)), ()
    if name == "cubic":
        return (lambda x: -beta * np.asarray(x) ** 3), ()
    if name == "switching":
        return (lambda x: -beta * np.sign(x)), (0.0,)
    if name in ("nonlinear", "nonlinear-demo"):
        amp = _float(token, "amp", p.get("amp", "0.8"))
        return (lambda x: -beta * np.asarray(x) * (1.0 + amp * np.cos(x))), ()
    raise ValidationError(f"unknown simple model {name!r} in {token!r}")


BUILTINS = ("ou", "shifted-ou", "cubic", "switching", "nonlinear", "nonlinear-demo")
_SIMPLE_KEYS = {"beta", "mu", "sigma", "amp", "lo", "hi", "cells"}


def build_model(spec: str):
    """Construct a ParametricModel or SimpleModel from its spec string."""
    token = spec.strip()
    kind, _, rest = token.partition(":")
    if kind == "family":
        p = _pairs(rest, {"gamma", "sigma", "box"}, token)
        if "gamma" not in p:
            raise ValidationError(f"family spec needs gamma=<value>: {token!r}")
        box = parse_box(p["box"], token) if "box" in p else DEFAULT_BOX
        return make_family(_float(token, "gamma", p["gamma"]),
                           _float(token, "sigma", p.get("sigma", "1")), box)
    if kind != "simple":
        raise ValidationError(f"model spec must start with 'family:' or 'simple:', got {token!r}")
    head, _, tail = rest.partition(",")
    kw = {}
    if head.startswith("table="):
        p = _pairs(tail, {"sigma_table", "lo", "hi", "cells"}, token)
        xs, s0 = _read_table(head[len("table="):], "s0", token)
        drift = lambda x, xs=xs, s0=s0: np.interp(x, xs, s0)  # noqa: E731
        diffusion = 1.0
        knots = list(xs)
        if "sigma_table" in p:
            xsig, sig = _read_table(p["sigma_table"], "sigma", token)
            diffusion = lambda x, xsig=xsig, sig=sig: np.interp(x, xsig, sig)  # noqa: E731
            knots += list(xsig)
        lo, hi = float(xs[0]), float(xs[-1])
        breakpoints = tuple(knots)
    else:
        p = _pairs(tail, _SIMPLE_KEYS, token)
        if head not in BUILTINS:
            raise ValidationError(f"unknown simple model {head!r} in {token!r}")
        drift, breakpoints = _builtin_drift(head, p, token)
        diffusion = _float(token, "sigma", p.get("sigma", "1"))
        lo, hi = DEFAULTS["simple_truncation"]
    lo = _float(token, "lo", p["lo"]) if "lo" in p else lo
    hi = _float(token, "hi", p["hi"]) if "hi" in p else hi
    if "cells" in p:
        kw["n_cells"] = int(_float(token, "cells", p["cells"]))
    return SimpleModel(drift, diffusion, (lo, hi), breakpoints=breakpoints, label=token, **kw)


def parse_theta(text) -> Theta:
    if isinstance(text, (list, tuple)):
        values = list(text)
    else:
        values = str(text).split(",")
    if len(values) != 2:
        raise ValidationError(f"theta must be 'alpha,beta', got {text!r}")
    return Theta(_float(str(text), "theta", values[0]), _float(str(text), "theta", values[1]))


def parse_floats(text, name="list"):
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [t for t in str(text).split(",") if t.strip()]
    if not items:
        raise ValidationError(f"empty {name}")
    return [_float(str(text), name, str(v)) for v in items]


def parse_epsilons(text):
    eps = parse_floats(text, "eps")
    for e in eps:
        if not 0.0 < e < 1.0:
            raise ValidationError(f"epsilon must lie in (0, 1), got {e:g}")
    return eps


# --------------------------------------------------------------------------
# study configuration

STUDIES = ("Size", "Power", "ParamFree", "LimitMatch")


@dataclass(frozen=True)
class Arm:
    model: str
    theta: tuple | None = None


@dataclass(frozen=True)
class StudyConfig:
    """A study description; see README for the JSON layout."""

    study: str
    model: str
    stats: tuple
    T: float = 500.0
    dt: float = DEFAULTS["dt"]
    n_replicates: int = 300
    epsilons: tuple = (0.05, 0.1)
    seed: int = 0
    theta: tuple | None = None
    truth: str | None = None
    truth_theta: tuple | None = None
    T_ladder: tuple = ()
    arms: tuple = ()
    limit_n: int = 10_000
    limit_seed: int | None = None
    calibration_n: int = 20_000
    calibration_seed: int | None = None
    tables: dict = field(default_factory=dict)
    autocalibrate: bool = True
    grid_points: int = DEFAULTS["grid_points"]
    weighted_ks: bool = False
    output: str | None = None

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["arms"] = [dataclasses.asdict(a) for a in self.arms]
        for key in ("stats", "epsilons", "T_ladder", "theta", "truth_theta"):
            if out[key] is not None:
                out[key] = list(out[key])
        for arm in out["arms"]:
            if arm["theta"] is not None:
                arm["theta"] = list(arm["theta"])
        return {"version": CONFIG_VERSION, **out}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def derived_limit_seed(self):
        return self.limit_seed if self.limit_seed is not None else _mix(self.seed, 1)

    @property
    def derived_calibration_seed(self):
        return self.calibration_seed if self.calibration_seed is not None else _mix(self.seed, 2)


def _mix(seed, salt):
    # keeps auxiliary draws off the streams used by the path replicates
    return (int(seed) * 0x9E3779B1 + salt * 0x85EBCA77 + 0x27D4EB2F) & ((1 << 63) - 1)


def _theta_tuple(value):
    return None if value is None else parse_theta(value).as_tuple()


def study_from_dict(data) -> StudyConfig:
    if not isinstance(data, dict):
        raise ValidationError("study config must be a JSON object")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ValidationError(f"unsupported version {version!r} (expected {CONFIG_VERSION})")
    known = {f.name for f in dataclasses.fields(StudyConfig)} | {"version"}
    extra = set(data) - known
    if extra:
        raise ValidationError(f"unknown study config field {sorted(extra)[0]!r}")
    study = data.get("study")
    if study not in STUDIES:
        raise ValidationError(f"unknown study {study!r} (choose from {', '.join(STUDIES)})")
    stats = data.get("stats")
    if not isinstance(stats, list) or not stats:
        raise ValidationError("study config needs a non-empty 'stats' list")
    kinds = tuple(str(StatisticKind.parse(s)) for s in stats)
    arms = []
    for i, arm in enumerate(data.get("arms", [])):
        if not isinstance(arm, dict) or set(arm) - {"model", "theta"}:
            raise ValidationError(f"arm {i} must be an object with 'model' and optional 'theta'")
        arms.append(Arm(arm.get("model", data.get("model")), _theta_tuple(arm.get("theta"))))
    kw = {k: data[k] for k in data if k not in ("version", "stats", "arms", "theta",
                                                "truth_theta", "epsilons", "T_ladder")}
    try:
        cfg = StudyConfig(
            stats=kinds, arms=tuple(arms),
            theta=_theta_tuple(data.get("theta")),
            truth_theta=_theta_tuple(data.get("truth_theta")),
            epsilons=tuple(parse_epsilons(data.get("epsilons", [0.05, 0.1]))),
            T_ladder=tuple(parse_floats(data["T_ladder"], "T_ladder")) if data.get("T_ladder") else (),
            **kw)
    except TypeError as exc:
        raise ValidationError(f"bad study config: {exc}") from None
    return validate_study(cfg)


def load_study(path) -> StudyConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"study config {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc.msg})") from None
    return study_from_dict(data)


def validate_study(cfg: StudyConfig) -> StudyConfig:
    """Fail fast: build every model, check budgets and stat/model pairings."""
    from .registry import law_for

    if not isinstance(cfg.model, str):
        raise ValidationError("study config field 'model' must be a spec string")
    for name in ("n_replicates", "limit_n", "calibration_n", "seed", "grid_points"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(f"study config field {name!r} must be an integer")
    if cfg.n_replicates < 50:
        raise ValidationError(f"n_replicates must be at least 50, got {cfg.n_replicates}")
    for name in ("T", "dt"):
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not value > 0:
            raise ValidationError(f"study config field {name!r} must be positive")
    model = build_model(cfg.model)
    kinds = [StatisticKind.parse(s) for s in cfg.stats]
    composite = {k.composite for k in kinds}
    if len(composite) > 1:
        raise ValidationError("a study cannot mix composite and simple-hypothesis statistics")
    if isinstance(model, ParametricModel):
        model.require_supported()
        if not composite.pop():
            raise ValidationError(f"statistic {kinds[0]} needs a simple model, got {cfg.model!r}")
    elif composite.pop():
        raise ValidationError(f"statistic {kinds[0]} needs a family model, got {cfg.model!r}")
    for k in kinds:
        law_for(k, model)

    if cfg.study == "Size" and isinstance(model, ParametricModel):
        if cfg.theta is None:
            raise ValidationError("a Size study on a family model needs 'theta'")
        _check_in_box(model, cfg.theta)
    if cfg.study == "Power":
        if cfg.truth is None:
            raise ValidationError("a Power study needs a 'truth' model spec")
        truth = build_model(cfg.truth)
        if isinstance(truth, ParametricModel) and cfg.truth_theta is None:
            raise ValidationError("a family 'truth' needs 'truth_theta'")
        if not cfg.T_ladder:
            raise ValidationError("a Power study needs a non-empty 'T_ladder'")
        if any(t <= 0 for t in cfg.T_ladder):
            raise ValidationError("T_ladder values must be positive")
    if cfg.study == "ParamFree":
        if len(cfg.arms) < 2:
            raise ValidationError("a ParamFree study needs at least 2 arms")
        for arm in cfg.arms:
            m = build_model(arm.model)
            if not isinstance(m, ParametricModel):
                raise ValidationError(f"ParamFree arms need family models, got {arm.model!r}")
            m.require_supported()
            if arm.theta is None:
                raise ValidationError("every ParamFree arm needs a theta")
            _check_in_box(m, arm.theta)
    if cfg.study == "LimitMatch" and isinstance(model, ParametricModel):
        if cfg.theta is None:
            raise ValidationError("a LimitMatch study on a family model needs 'theta'")
        _check_in_box(model, cfg.theta)
    if not cfg.autocalibrate and cfg.study != "ParamFree":
        for k in kinds:
            law = law_for(k, model)
            if law not in cfg.tables:
                raise ValidationError(f"no calibration table for {law!r} and autocalibrate is off")
    for law, path in cfg.tables.items():
        if not os.path.exists(path):
            raise ValidationError(f"calibration table {path!r} for {law!r} not found")
    return cfg


def _check_in_box(model, theta):
    if not model.contains(Theta(*theta)):
        raise ValidationError(f"theta {tuple(theta)} lies outside the box {model.theta_box}")


# --------------------------------------------------------------------------
# validated commands (CLI)

@dataclass(frozen=True)
class SimulateCommand:
    model: str
    T: float
    dt: float
    seed: int
    out: str
    theta: tuple | None = None
    stationary: bool = True
    x0: float | None = None


@dataclass(frozen=True)
class CalibrateCommand:
    law: str
    eps: tuple
    n: int
    seed: int
    out: str
    model: str | None = None


@dataclass(frozen=True)
class TestCommand:
    __test__ = False  # not a pytest test class

    traj: str
    stat: str
    model: str
    eps: float
    table: str | None = None
    autocalibrate: bool = True
    calibration_n: int = 20_000
    calibration_seed: int = 0
    weighted_ks: bool = False


@dataclass(frozen=True)
class StudyCommand:
    config: str
    out: str


COMMANDS = {"simulate": SimulateCommand, "calibrate": CalibrateCommand,
            "test": TestCommand, "study": StudyCommand}


def command_to_json(cmd) -> str:
    name = next(k for k, v in COMMANDS.items() if isinstance(cmd, v))
    data = dataclasses.asdict(cmd)
    for k, v in data.items():
        if isinstance(v, tuple):
            data[k] = list(v)
    return json.dumps({"version": CONFIG_VERSION, "command": name, "args": data}, sort_keys=True)


def command_from_json(text):
    data = json.loads(text)
    if data.get("version") != CONFIG_VERSION:
        raise ValidationError(f"unsupported version {data.get('version')!r}")
    cls = COMMANDS.get(data.get("command"))
    if cls is None:
        raise ValidationError(f"unknown command {data.get('command')!r}")
    args = dict(data["args"])
    for f in dataclasses.fields(cls):
        if isinstance(args.get(f.name), list):
            args[f.name] = tuple(args[f.name])
    return cls(**args)
