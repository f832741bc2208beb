"""Context-aware choice of which trained detector serves a resident.

The rule set mirrors the expert-guided decision tree as written: a critical
health condition is checked first, then age, then resources. The elderly and
non-elderly branches pick the same architectures; they are kept separate on
purpose so the tree reads like its source, and ``selection_table`` shows the
redundancy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from .core import AgeGroup, FdaasQos, HealthCondition, ResidentContext, ResourceAvailability

SELECTABLE = ("FCN", "ResNet", "LSTM", "InceptionTime")


@dataclass(frozen=True)
class PromptDecision:
    context: ResidentContext
    architecture: str
    rationale: str
    qos: FdaasQos = field(default_factory=FdaasQos)

    def to_dict(self) -> dict:
        return {
            "age_group": self.context.age_group.value,
            "health_condition": self.context.health_condition.value,
            "resource_availability": self.context.resource_availability.value,
            "architecture": self.architecture,
            "rationale": self.rationale,
            "qos": self.qos.to_dict(),
        }


def select_model(context: ResidentContext, qos: FdaasQos | None = None) -> PromptDecision:
    """Pick the detector architecture for ``context``. QoS is echoed, not consulted."""
    qos = qos or FdaasQos()
    limited = context.resource_availability is ResourceAvailability.LIMITED
    if context.health_condition is HealthCondition.CRITICAL:
        if limited:
            arch, why = "FCN", "critical condition, limited resources: fastest accurate model"
        else:
            arch, why = "ResNet", "critical condition, ample resources: most accurate model"
    elif context.age_group is AgeGroup.ELDERLY_80_PLUS:
        if limited:
            arch, why = "LSTM", "elderly resident, limited resources: lightweight model"
        else:
            arch, why = "InceptionTime", "elderly resident, ample resources: high-capacity model"
    else:
        if limited:
            arch, why = "LSTM", "non-critical resident, limited resources: lightweight model"
        else:
            arch, why = "InceptionTime", "non-critical resident, ample resources: high-capacity model"
    return PromptDecision(context, arch, why, qos)


def all_contexts() -> list[ResidentContext]:
    return [ResidentContext(a, h, r) for a, h, r in product(AgeGroup, HealthCondition, ResourceAvailability)]


def selection_table() -> list[dict]:
    """Every context combination with its selected architecture (8 rows).

    ``age_sensitive`` is False on a row when flipping only the age group
    leaves the selection unchanged.
    """
    rows = []
    for ctx in all_contexts():
        other_age = AgeGroup.OTHER if ctx.age_group is AgeGroup.ELDERLY_80_PLUS else AgeGroup.ELDERLY_80_PLUS
        flipped = ResidentContext(other_age, ctx.health_condition, ctx.resource_availability)
        decision = select_model(ctx)
        rows.append(
            {
                "age_group": ctx.age_group.value,
                "health_condition": ctx.health_condition.value,
                "resource_availability": ctx.resource_availability.value,
                "architecture": decision.architecture,
                "age_sensitive": decision.architecture != select_model(flipped).architecture,
            }
        )
    return rows
