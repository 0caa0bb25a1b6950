import dataclasses
import json

import numpy as np
import pytest

from diffgof import config
from diffgof.config import (build_model, command_from_json, command_to_json, load_study,
                            parse_box, parse_epsilons, parse_theta, study_from_dict)
from diffgof.errors import UnsupportedRegimeError, ValidationError
from diffgof.limits import parse_law_id
from diffgof.model import ParametricModel, SimpleModel
from diffgof.registry import REGISTRY, check_compatible, law_for
from diffgof.statistics import Family, Norm, StatisticKind

# --- model specs ----------------------------------------------------------------


def test_family_spec():
    m = build_model("family:gamma=2,sigma=0.7,box=-1:1x0.5:2")
    assert isinstance(m, ParametricModel)
    assert (m.gamma, m.sigma, m.theta_box) == (2.0, 0.7, ((-1.0, 1.0), (0.5, 2.0)))
    d = build_model("family:gamma=1")
    assert d.sigma == 1.0 and d.theta_box == ((-2.0, 2.0), (0.5, 3.0))


@pytest.mark.parametrize("spec,x,expected", [
    ("simple:ou", 2.0, -2.0),
    ("simple:ou,beta=2,mu=1", 0.0, 2.0),
    ("simple:shifted-ou", 0.0, 1.0),
    ("simple:cubic", 2.0, -8.0),
    ("simple:switching", -3.0, 1.0),
    ("simple:nonlinear", 0.0, 0.0),
    ("simple:nonlinear,amp=0", 1.5, -1.5),
    ("simple:nonlinear-demo", np.pi, -np.pi * 0.2),
])
def test_builtin_drifts(spec, x, expected):
    m = build_model(spec)
    assert isinstance(m, SimpleModel)
    assert float(m.drift(np.array(x))) == pytest.approx(expected)


def test_simple_model_keys_distinguish_specs():
    assert build_model("simple:ou").key == build_model("simple:ou").key
    assert build_model("simple:ou").key != build_model("simple:ou,beta=2").key
    assert build_model("simple:ou").key != build_model("simple:ou,sigma=1.5").key


def test_table_spec(tmp_path):
    drift = tmp_path / "s0.csv"
    drift.write_text("x,s0\n-10,10\n10,-10\n")
    m = build_model(f"simple:table={drift}")
    assert float(m.drift(np.array(3.0))) == pytest.approx(-3.0)
    assert float(m.pdf(0.0)) == pytest.approx(1 / np.sqrt(np.pi), abs=1e-6)
    sig = tmp_path / "sig.csv"
    sig.write_text("x,sigma\n-10,2\n10,2\n")
    m2 = build_model(f"simple:table={drift},sigma_table={sig}")
    assert float(m2.diffusion(np.array(0.3))) == 2.0
    assert m.key != m2.key


@pytest.mark.parametrize("header,body", [("x,drift", "0,1\n1,2\n"), ("x,s0", "0,1\n"),
                                         ("x,s0", "1,1\n0,2\n"), ("x,s0", "0,a\n1,2\n")])
def test_bad_tables(tmp_path, header, body):
    path = tmp_path / "bad.csv"
    path.write_text(f"{header}\n{body}")
    with pytest.raises(ValidationError):
        build_model(f"simple:table={path}")


@pytest.mark.parametrize("spec", [
    "ou", "family:sigma=1", "family:gamma=x", "family:gamma=1,box=1:2", "family:gamma=1,foo=2",
    "simple:quartic", "simple:ou,beta", "simple:ou,beta=1,beta=2", "simple:ou,gamma=1",
    "simple:table=/nonexistent.csv", "family:gamma=1,sigma=inf",
])
def test_bad_specs(spec):
    with pytest.raises(ValidationError):
        build_model(spec)


def test_small_parsers():
    assert parse_box("-1:1x0.5:2") == ((-1.0, 1.0), (0.5, 2.0))
    assert parse_theta("0.5,1").as_tuple() == (0.5, 1.0)
    assert parse_theta([0, 2]).as_tuple() == (0.0, 2.0)
    assert parse_epsilons("0.1,0.05") == [0.1, 0.05]
    for bad in ("1", "1,2,3", "a,b", "0,-1"):
        with pytest.raises(ValidationError):
            parse_theta(bad)
    with pytest.raises(ValidationError):
        parse_epsilons("0.05,1")


# --- registry ----------------------------------------------------------------------


def test_registry_covers_every_valid_kind():
    valid = []
    for fam in Family:
        for norm in Norm:
            try:
                valid.append(StatisticKind(fam, norm))
            except ValidationError:
                pass
    assert {(k.family, k.norm) for k in valid} == set(REGISTRY)
    assert len(set(REGISTRY.values())) == len(REGISTRY)


def test_law_for():
    fam = build_model("family:gamma=3")
    ou = build_model("simple:ou")
    assert law_for("ParamEDF:CvM", fam) == "Delta:gamma=3"
    assert law_for("ParamDensity:KS", build_model("family:gamma=0")) == "delta_sup:gamma=0"
    assert law_for("SimpleDensity:CvM", ou) == f"delta_S0:{ou.key}"
    assert law_for("ADF") == "int_w2" and law_for("KSIncrement:KS") == "sup_abs_w"
    for kind in ("ParamEDF:CvM", "SimpleDensity:KS"):
        with pytest.raises(ValidationError):
            law_for(kind, None)
    with pytest.raises(UnsupportedRegimeError):
        law_for("ParamEDF:CvM", build_model("family:gamma=0.5"))
    for kind in REGISTRY:
        k = StatisticKind(*kind)
        model = fam if k.composite else ou
        parse_law_id(law_for(k, model))


def test_check_compatible():
    fam = build_model("family:gamma=1")
    check_compatible("ParamEDF:CvM", "Delta:gamma=1", fam)
    check_compatible("ParamEDF:CvM", "Delta:gamma=2")  # no model: name only
    with pytest.raises(ValidationError):
        check_compatible("ParamEDF:CvM", "Delta:gamma=2", fam)
    with pytest.raises(ValidationError):
        check_compatible("ParamEDF:CvM", "delta:gamma=1", fam)
    with pytest.raises(ValidationError):
        check_compatible("SimpleDensity:CvM", "delta_S0:other", build_model("simple:ou"))


# --- study configs -------------------------------------------------------------------


def size_dict(**over):
    base = {"study": "Size", "model": "family:gamma=1", "theta": [0.5, 1], "stats": ["ParamEDF:CvM"],
            "T": 50, "n_replicates": 50}
    base.update(over)
    return base


def test_study_roundtrip(tmp_path):
    cfg = study_from_dict(size_dict())
    again = study_from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    path = tmp_path / "s.json"
    path.write_text(cfg.to_json())
    assert load_study(path) == cfg
    assert cfg.theta == (0.5, 1.0) and cfg.stats == ("ParamEDF:CvM",)


def test_derived_seeds_differ_from_study_seed():
    cfg = study_from_dict(size_dict(seed=4))
    assert len({cfg.seed, cfg.derived_limit_seed, cfg.derived_calibration_seed}) == 3
    assert study_from_dict(size_dict(limit_seed=7)).derived_limit_seed == 7


@pytest.mark.parametrize("over", [
    {"study": "Sizes"}, {"stats": []}, {"stats": ["ParamEDF:CvM", "ADF"]}, {"n_replicates": 49},
    {"theta": None}, {"theta": [5, 1]}, {"model": "family:gamma=0.5"}, {"stats": ["ADF"]},
    {"T": -1}, {"dt": 0}, {"version": 2}, {"unknown": 1}, {"epsilons": [0, 0.1]},
    {"n_replicates": 50.5}, {"tables": {"Delta:gamma=1": "/nonexistent.json"}},
    {"autocalibrate": False},
])
def test_study_validation(over):
    data = size_dict(**over)
    data = {k: v for k, v in data.items() if v is not None}
    with pytest.raises(ValidationError):
        study_from_dict(data)


def test_power_and_paramfree_requirements():
    power = {"study": "Power", "model": "simple:ou", "stats": ["ADF"], "truth": "simple:cubic",
             "T_ladder": [100, 200]}
    study_from_dict(power)
    for drop in ("truth", "T_ladder"):
        with pytest.raises(ValidationError):
            study_from_dict({k: v for k, v in power.items() if k != drop})
    with pytest.raises(ValidationError):
        study_from_dict({**power, "truth": "family:gamma=1"})
    pf = {"study": "ParamFree", "model": "family:gamma=1", "stats": ["ParamEDF:CvM"],
          "arms": [{"theta": [0, 1]}, {"theta": [1.5, 2.5]}]}
    cfg = study_from_dict(pf)
    assert cfg.arms[1].model == "family:gamma=1"
    with pytest.raises(ValidationError):
        study_from_dict({**pf, "arms": pf["arms"][:1]})
    with pytest.raises(ValidationError):
        study_from_dict({**pf, "arms": [{"theta": [0, 1]}, {"model": "simple:ou"}]})
    with pytest.raises(ValidationError):
        study_from_dict({**pf, "arms": [{"theta": [0, 1]}, {"theta": [0, 1], "seed": 3}]})


def test_malformed_study_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text("{")
    with pytest.raises(ValidationError):
        load_study(path)
    with pytest.raises(ValidationError):
        load_study(tmp_path / "absent.json")


# --- commands ------------------------------------------------------------------------------


@pytest.mark.parametrize("cmd", [
    config.SimulateCommand("simple:ou", 10.0, 0.01, 1, "out.csv"),
    config.SimulateCommand("family:gamma=1", 10.0, 0.01, 1, "out.csv", (0.0, 1.0), False, 0.3),
    config.CalibrateCommand("int_w2", (0.05, 0.1), 1000, 2, "t.json"),
    config.TestCommand("p.csv", "ADF:CvM", "simple:ou", 0.05, table="t.json"),
    config.StudyCommand("s.json", "out"),
])
def test_command_roundtrip(cmd):
    assert command_from_json(command_to_json(cmd)) == cmd


def test_command_json_errors():
    good = json.loads(command_to_json(config.StudyCommand("a", "b")))
    with pytest.raises(ValidationError):
        command_from_json(json.dumps({**good, "version": 9}))
    with pytest.raises(ValidationError):
        command_from_json(json.dumps({**good, "command": "explode"}))
    assert dataclasses.is_dataclass(config.TestCommand)
