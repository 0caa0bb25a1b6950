"""Monte Carlo thresholds, calibration tables and the accept/reject rule."""
from __future__ import annotations

import datetime as _dt
import enum
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .errors import ValidationError
from .limits import draw_law, law_grid, parse_law_id

TABLE_VERSION = 1


class Decision(str, enum.Enum):
    REJECT = "Reject"
    ACCEPT = "Accept"


@dataclass(frozen=True, eq=False)
class CalibrationTable:
    law_id: str
    epsilons: tuple
    thresholds: tuple
    n_replicates: int
    seed: int
    grid: dict = field(default_factory=dict)
    created_at: str = ""

    def __post_init__(self):
        parse_law_id(self.law_id)
        eps = tuple(float(e) for e in self.epsilons)
        thr = tuple(float(c) for c in self.thresholds)
        if len(eps) != len(thr) or not eps:
            raise ValidationError("epsilons and thresholds must be non-empty and of equal length")
        if any(not 0.0 < e < 1.0 for e in eps) or list(eps) != sorted(set(eps)):
            raise ValidationError("epsilons must be strictly increasing values in (0, 1)")
        if int(self.n_replicates) < DEFAULTS["calibration_min_replicates"]:
            raise ValidationError(
                f"n_replicates must be at least {DEFAULTS['calibration_min_replicates']}")
        if any(a < b for a, b in zip(thr, thr[1:])):
            raise ValidationError("thresholds must not increase with epsilon")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "thresholds", thr)

    def threshold(self, epsilon) -> float:
        epsilon = float(epsilon)
        for e, c in zip(self.epsilons, self.thresholds):
            if e == epsilon:
                return c
        raise ValidationError(f"epsilon {epsilon:g} not in table (have {list(self.epsilons)})")

    def __eq__(self, other):
        if not isinstance(other, CalibrationTable):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {"version": TABLE_VERSION, "law_id": self.law_id,
                "epsilons": list(self.epsilons), "thresholds": list(self.thresholds),
                "n_replicates": int(self.n_replicates), "seed": int(self.seed),
                "grid": dict(self.grid), "created_at": self.created_at}


def order_statistic_index(epsilon: float, n: int) -> int:
    """0-based index of the ceil((1 - eps) n)-th smallest value."""
    target = (1.0 - epsilon) * n
    k = math.ceil(target - 1e-9 * max(1.0, target))  # absorb float noise like 0.95*100 = 95.00000000000001
    return min(max(k, 1), n) - 1


def empirical_thresholds(samples, epsilons):
    s = np.sort(np.asarray(samples, dtype=float))
    return [float(s[order_statistic_index(e, s.size)]) for e in epsilons]


def _check_budget(epsilons, n):
    min_rep = DEFAULTS["calibration_min_replicates"]
    if n < min_rep:
        raise ValidationError(f"n_replicates={n} is below the minimum of {min_rep}")
    need = DEFAULTS["calibration_min_tail_count"]
    eps_min = min(epsilons)
    if n * eps_min < need:
        raise ValidationError(
            f"n_replicates={n} too small for epsilon={eps_min:g}: need n*epsilon >= {need} "
            f"(n >= {math.ceil(need / eps_min)})")


def calibrate(law_id, epsilons, n_replicates, seed, model=None, grid=None) -> CalibrationTable:
    """Empirical (1 - eps)-quantiles of ``n_replicates`` draws from a limit law.

    Draw ``i`` uses the random stream ``(seed, i)``, so the table is a pure
    function of its arguments.  ``model`` is required for simple-model laws.
    """
    parse_law_id(law_id)
    eps = sorted({float(e) for e in epsilons})
    if not eps or any(not 0.0 < e < 1.0 for e in eps):
        raise ValidationError("epsilons must lie strictly between 0 and 1")
    n = int(n_replicates)
    _check_budget(eps, n)
    samples = draw_law(law_id, n, seed, model=model, grid=grid)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return CalibrationTable(law_id, tuple(eps), tuple(empirical_thresholds(samples, eps)), n,
                            int(seed), law_grid(law_id, grid, model), stamp)


def check_table_grid(table: CalibrationTable, model=None, grid=None) -> None:
    """Refuse a table whose sampler grid differs from the one currently in effect."""
    expected = law_grid(table.law_id, grid, model)
    if table.grid != expected:
        raise ValidationError(
            f"table for {table.law_id!r} was built on grid {table.grid}, sampler now uses {expected}")


def decide(stat, table: CalibrationTable, epsilon, model=None) -> Decision:
    """Reject iff the statistic strictly exceeds the threshold.

    The statistic's kind must map to the table's law through the registry;
    ``model`` supplies the regime or model key when the mapping needs it.
    """
    from .registry import check_compatible

    check_compatible(stat.kind, table.law_id, model)
    return Decision.REJECT if stat.value > table.threshold(epsilon) else Decision.ACCEPT


# --------------------------------------------------------------------------
# persistence

def _dumps17(obj, indent=0):
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dumps17(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_dumps17(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValidationError("non-finite number cannot be stored in a table")
        return format(float(obj), ".17g")
    return json.dumps(obj)


def dumps_table(table: CalibrationTable) -> str:
    """JSON text with every float at 17 significant digits (exact round trip)."""
    return _dumps17(table.to_dict()) + "\n"


def save_table(table: CalibrationTable, path) -> None:
    text = dumps_table(table)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


_REQUIRED = {"version": int, "law_id": str, "epsilons": list, "thresholds": list,
             "n_replicates": int, "seed": int, "grid": dict, "created_at": str}


def table_from_dict(data) -> CalibrationTable:
    if not isinstance(data, dict):
        raise ValidationError("calibration table must be a JSON object")
    if "version" in data and data["version"] != TABLE_VERSION:
        raise ValidationError(f"unsupported version {data['version']!r} (expected {TABLE_VERSION})")
    for key, typ in _REQUIRED.items():
        if key not in data:
            raise ValidationError(f"calibration table is missing field {key!r}")
        if not isinstance(data[key], typ) or isinstance(data[key], bool):
            raise ValidationError(f"calibration table field {key!r} has the wrong type")
    extra = set(data) - set(_REQUIRED)
    if extra:
        raise ValidationError(f"calibration table has unknown fields {sorted(extra)}")
    return CalibrationTable(data["law_id"], tuple(data["epsilons"]), tuple(data["thresholds"]),
                            data["n_replicates"], data["seed"], data["grid"], data["created_at"])


def load_table(path) -> CalibrationTable:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"calibration table {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed calibration table ({exc.msg})") from None
    return table_from_dict(data)
