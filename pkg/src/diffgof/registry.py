"""Which limit law calibrates which statistic.

    ParamEDF:CvM       -> Delta:gamma=<g>        ParamEDF:KS       -> Delta_sup:gamma=<g>
    ParamDensity:CvM   -> delta:gamma=<g>        ParamDensity:KS   -> delta_sup:gamma=<g>
    SimpleDensity:CvM  -> delta_S0:<model key>   SimpleDensity:KS  -> delta_S0_sup:<model key>
    ADF:CvM            -> int_w2                 KSIncrement:KS    -> sup_abs_w

The unsupported regime gamma = 1/2 has no entry.
"""
from __future__ import annotations

from .errors import ValidationError
from .limits import LawSpec, parse_law_id
from .model import ParametricModel, SimpleModel
from .statistics import Family, Norm, StatisticKind

REGISTRY = {
    (Family.PARAM_EDF, Norm.CVM): "Delta",
    (Family.PARAM_EDF, Norm.KS): "Delta_sup",
    (Family.PARAM_DENSITY, Norm.CVM): "delta",
    (Family.PARAM_DENSITY, Norm.KS): "delta_sup",
    (Family.SIMPLE_DENSITY, Norm.CVM): "delta_S0",
    (Family.SIMPLE_DENSITY, Norm.KS): "delta_S0_sup",
    (Family.ADF, Norm.CVM): "int_w2",
    (Family.KS_INCREMENT, Norm.KS): "sup_abs_w",
}


def _kind(kind):
    return kind if isinstance(kind, StatisticKind) else StatisticKind.parse(str(kind))


def law_for(kind, model=None) -> str:
    """Law id calibrating ``kind``; the model fixes gamma or the simple-model key."""
    kind = _kind(kind)
    name = REGISTRY[(kind.family, kind.norm)]
    if kind.composite:
        if not isinstance(model, ParametricModel):
            raise ValidationError(f"{kind} needs a family model to resolve its law")
        model.require_supported()
        return LawSpec(name, gamma=model.gamma).law_id
    if kind.family is Family.SIMPLE_DENSITY:
        if not isinstance(model, SimpleModel):
            raise ValidationError(f"{kind} needs a simple model to resolve its law")
        return LawSpec(name, model_key=model.key).law_id
    return name


def check_compatible(kind, law_id, model=None) -> None:
    """Raise unless ``law_id`` is the law registered for ``kind`` (and ``model``, when given)."""
    kind = _kind(kind)
    spec = parse_law_id(law_id)
    expected = REGISTRY[(kind.family, kind.norm)]
    if spec.name != expected:
        raise ValidationError(f"statistic {kind} is calibrated by {expected!r}, not {law_id!r}")
    if model is not None and (kind.composite or kind.family is Family.SIMPLE_DENSITY):
        want = law_for(kind, model)
        if parse_law_id(want) != spec:
            raise ValidationError(f"table law {law_id!r} does not match the model (expected {want!r})")
