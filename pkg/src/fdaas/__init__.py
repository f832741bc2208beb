"""Fall detection as a service from contactless radar vital-sign streams.

Subpackages cover the record format and simulator, windowing and
standardization, class-imbalance mitigation, time-series classifiers,
metrics, context-aware model selection and the edge alerting service.
"""
from .core import (
    AgeGroup,
    FdaasQos,
    HealthCondition,
    RadarReading,
    ResidentContext,
    ResourceAvailability,
)
from .prompt import PromptDecision, select_model, selection_table

__version__ = "0.1.0"

__all__ = [
    "AgeGroup",
    "FdaasQos",
    "HealthCondition",
    "RadarReading",
    "ResidentContext",
    "ResourceAvailability",
    "PromptDecision",
    "select_model",
    "selection_table",
]
