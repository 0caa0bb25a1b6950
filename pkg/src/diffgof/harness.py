"""Simulation studies: size, power, parameter-freeness and limit matching.

Each study writes ``rows.csv`` (one line per replicate and statistic) and
``summary.json``.  Replicate ``r`` of arm ``a`` draws from the random stream
``(seed, a << 32 | r)``, so rows are a deterministic function of the
configuration and do not depend on evaluation order.  Calibration and
limit-sampler draws use seeds derived from, but distinct from, the study seed.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps

from .calibration import calibrate, check_table_grid, load_table
from .config import StudyConfig, build_model, validate_study
from .errors import ValidationError
from .limits import draw_law
from .model import ParametricModel, Theta
from .registry import check_compatible, law_for
from .simulate import RngStream, simulate_ensemble, stream_id
from .statistics import StatisticKind, compute_statistics

ROW_FIELDS = ("replicate", "stat_kind", "norm", "value", "alpha_hat", "beta_hat", "arm", "T")
KS_LEVEL = 0.01
KS_COEFF_1PCT = 1.628  # sqrt(-log(0.01/2)/2): asymptotic two-sample KS critical coefficient


def ks_critical(n, m, coeff=KS_COEFF_1PCT):
    """Asymptotic two-sample KS critical distance for sample sizes n and m."""
    return coeff * math.sqrt((n + m) / (n * m))


def ks_distance(x, y) -> float:
    return float(_sps.ks_2samp(np.asarray(x, float), np.asarray(y, float)).statistic)


@dataclass
class StudyReport:
    config: StudyConfig
    rows: list
    summary: dict
    wall_clock: float = 0.0
    thresholds: dict = field(default_factory=dict)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROW_FIELDS)
        for row in self.rows:
            writer.writerow([_fmt(row[k]) for k in ROW_FIELDS])
        return buf.getvalue()

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "rows.csv"), "w") as fh:
            fh.write(self.rows_csv())
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(self.summary, fh, indent=2)
            fh.write("\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --------------------------------------------------------------------------
# shared machinery

def _simulation_law(model, theta):
    if isinstance(model, ParametricModel):
        return model.at(Theta(*theta))
    return model


def _ensemble_rows(cfg, h0_model, law, T, arm_index, arm_label, kinds, progress=None):
    streams = [RngStream(cfg.seed, stream_id(r, arm_index)) for r in range(cfg.n_replicates)]
    rows = []
    for r, traj in enumerate(simulate_ensemble(law, T, cfg.dt, streams)):
        values, theta_hat = compute_statistics(traj, kinds, h0_model, m=cfg.grid_points,
                                               weighted_ks=cfg.weighted_ks)
        a_hat = theta_hat.alpha if theta_hat is not None else None
        b_hat = theta_hat.beta if theta_hat is not None else None
        for sv in values:
            rows.append({"replicate": r, "stat_kind": sv.kind.family.value,
                         "norm": sv.kind.norm.value, "value": float(sv.value),
                         "alpha_hat": a_hat, "beta_hat": b_hat, "arm": arm_label, "T": float(T)})
        if progress:
            progress(arm_label, r)
    return rows


def _resolve_thresholds(cfg, model, kinds):
    """law_id -> CalibrationTable, loading given tables and calibrating the rest."""
    tables = {}
    for kind in kinds:
        law = law_for(kind, model)
        if law in tables:
            continue
        if law in cfg.tables:
            table = load_table(cfg.tables[law])
            check_compatible(kind, table.law_id, model)
            check_table_grid(table, model)
        elif cfg.autocalibrate:
            table = calibrate(law, cfg.epsilons, cfg.calibration_n, cfg.derived_calibration_seed,
                              model=model)
        else:
            raise ValidationError(f"no calibration table for {law!r} and autocalibrate is off")
        for eps in cfg.epsilons:
            table.threshold(eps)
        tables[law] = table
    return tables


def _values(rows, kind, **where):
    out = [r["value"] for r in rows
           if r["stat_kind"] == kind.family.value and r["norm"] == kind.norm.value
           and all(r[k] == v for k, v in where.items())]
    return np.array(out, dtype=float)


def _group_key(g):
    return tuple((0, x, "") if isinstance(x, (int, float)) else (1, 0.0, str(x)) for x in g)


def rejection_summary(rows, kinds, tables, model, epsilons, group_keys=("arm", "T")):
    """Rejection rate and its standard error per statistic, epsilon and group."""
    groups = sorted({tuple(r[k] for k in group_keys) for r in rows}, key=_group_key)
    out = []
    for kind in kinds:
        table = tables[law_for(kind, model)]
        for g in groups:
            vals = _values(rows, kind, **dict(zip(group_keys, g)))
            if vals.size == 0:
                continue
            for eps in epsilons:
                c = table.threshold(eps)
                rate = float(np.mean(vals > c))
                out.append({"stat": str(kind), "epsilon": eps, **dict(zip(group_keys, g)),
                            "n": int(vals.size), "threshold": c, "rate": rate,
                            "se": math.sqrt(rate * (1.0 - rate) / vals.size)})
    return out


def _table_info(tables):
    return [{"law_id": t.law_id, "epsilons": list(t.epsilons), "thresholds": list(t.thresholds),
             "n_replicates": t.n_replicates, "seed": t.seed, "grid": t.grid} for t in tables.values()]


_NOTES = ("Tolerances on rejection rates and KS distances are engineering choices: finite T, "
          "Euler discretisation and the plug-in estimate all bias finite-sample laws.")


def _summary(cfg, start, **parts):
    return {"version": 1, "study": cfg.study, "config": cfg.to_dict(), **parts,
            "notes": _NOTES, "wall_clock_seconds": round(time.perf_counter() - start, 3)}


# --------------------------------------------------------------------------
# studies

def run_size_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """H0 ensemble under the null model; rejection rate per statistic and epsilon."""
    start = time.perf_counter()
    model = build_model(cfg.model)
    kinds = [StatisticKind.parse(s) for s in cfg.stats]
    tables = _resolve_thresholds(cfg, model, kinds)
    law = _simulation_law(model, cfg.theta)
    rows = _ensemble_rows(cfg, model, law, cfg.T, 0, "h0", kinds, progress)
    rej = rejection_summary(rows, kinds, tables, model, cfg.epsilons)
    summary = _summary(cfg, start, rejection=rej, tables=_table_info(tables))
    return StudyReport(cfg, rows, summary, summary["wall_clock_seconds"], tables)


def run_power_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """Paths from ``cfg.truth`` at each horizon of the T-ladder, tested against ``cfg.model``."""
    start = time.perf_counter()
    model = build_model(cfg.model)
    kinds = [StatisticKind.parse(s) for s in cfg.stats]
    tables = _resolve_thresholds(cfg, model, kinds)
    truth = build_model(cfg.truth)
    law = _simulation_law(truth, cfg.truth_theta)
    rows = []
    for i, T in enumerate(cfg.T_ladder):
        rows += _ensemble_rows(cfg, model, law, T, i, "alt", kinds, progress)
    rej = rejection_summary(rows, kinds, tables, model, cfg.epsilons)
    ladder = {}
    for kind in kinds:
        for eps in cfg.epsilons:
            by_T = {r["T"]: r["rate"] for r in rej if r["stat"] == str(kind) and r["epsilon"] == eps}
            rates = [by_T[float(T)] for T in cfg.T_ladder]
            ladder[f"{kind}@{eps:g}"] = {"T": list(cfg.T_ladder), "rate": rates,
                                         "monotone": bool(np.all(np.diff(rates) >= 0))}
    summary = _summary(cfg, start, rejection=rej, ladder=ladder, tables=_table_info(tables))
    return StudyReport(cfg, rows, summary, summary["wall_clock_seconds"], tables)


def paramfree_comparisons(rows, kinds, arm_labels):
    out = []
    for kind in kinds:
        for i in range(len(arm_labels)):
            for j in range(i + 1, len(arm_labels)):
                x = _values(rows, kind, arm=arm_labels[i])
                y = _values(rows, kind, arm=arm_labels[j])
                d = ks_distance(x, y)
                crit = ks_critical(x.size, y.size)
                out.append({"stat": str(kind), "arms": [arm_labels[i], arm_labels[j]],
                            "n": [int(x.size), int(y.size)], "ks_distance": d,
                            "critical_1pct": crit, "rejected": bool(d > crit)})
    return out


def run_paramfree_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """Ensembles of the composite statistics at several theta; pairwise two-sample KS."""
    start = time.perf_counter()
    if len(cfg.arms) < 2:
        raise ValidationError("a ParamFree study needs at least 2 arms")
    kinds = [StatisticKind.parse(s) for s in cfg.stats]
    rows, labels, arm_info = [], [], []
    for i, arm in enumerate(cfg.arms):
        model = build_model(arm.model)
        label = f"arm{i}"
        labels.append(label)
        arm_info.append({"arm": label, "model": arm.model, "theta": list(arm.theta)})
        rows += _ensemble_rows(cfg, model, _simulation_law(model, arm.theta), cfg.T, i, label,
                               kinds, progress)
    comparisons = paramfree_comparisons(rows, kinds, labels)
    summary = _summary(cfg, start, arms=arm_info, ks=comparisons)
    return StudyReport(cfg, rows, summary, summary["wall_clock_seconds"])


def limitmatch_comparisons(rows, kinds, model):
    out = []
    for kind in kinds:
        x = _values(rows, kind, arm="finite")
        y = _values(rows, kind, arm="limit")
        d = ks_distance(x, y)
        crit = ks_critical(x.size, y.size)
        out.append({"stat": str(kind), "law_id": law_for(kind, model),
                    "n_finite": int(x.size), "n_limit": int(y.size), "ks_distance": d,
                    "critical_1pct": crit})
    return out


def run_limitmatch_study(cfg: StudyConfig, progress=None) -> StudyReport:
    """Finite-T ensemble against draws of the registered limit law."""
    start = time.perf_counter()
    model = build_model(cfg.model)
    kinds = [StatisticKind.parse(s) for s in cfg.stats]
    law = _simulation_law(model, cfg.theta)
    rows = _ensemble_rows(cfg, model, law, cfg.T, 0, "finite", kinds, progress)
    for kind in kinds:
        draws = draw_law(law_for(kind, model), cfg.limit_n, cfg.derived_limit_seed, model=model)
        rows += [{"replicate": i, "stat_kind": kind.family.value, "norm": kind.norm.value,
                  "value": float(v), "alpha_hat": None, "beta_hat": None, "arm": "limit",
                  "T": None} for i, v in enumerate(draws)]
    summary = _summary(cfg, start, ks=limitmatch_comparisons(rows, kinds, model))
    return StudyReport(cfg, rows, summary, summary["wall_clock_seconds"])


RUNNERS = {"Size": run_size_study, "Power": run_power_study,
           "ParamFree": run_paramfree_study, "LimitMatch": run_limitmatch_study}


def run_study(cfg: StudyConfig, out_dir=None, progress=None) -> StudyReport:
    cfg = validate_study(cfg)
    report = RUNNERS[cfg.study](cfg, progress)
    target = out_dir or cfg.output
    if target:
        report.write(target)
    return report
