"""Noise-injected tool catalogs, staged tool-call scoring, and data augmentation."""

from .catalog import (
    GoldCall,
    Parameter,
    Scenario,
    TestCase,
    Tool,
    Violation,
    parse_catalog,
    serialize_catalog,
    validate_case,
)
from .evaluation import (
    EvalRecord,
    ModelAction,
    StageScores,
    evaluate_case,
    parse_react,
)
from .noise import (
    NameMapping,
    NoiseLevel,
    PerturbationTarget,
    PerturbedCase,
    build_environment,
    remap_gold,
)
from .stats import AnovaResult, ScoreGroup, welch_anova

__all__ = [
    "AnovaResult",
    "EvalRecord",
    "GoldCall",
    "ModelAction",
    "NameMapping",
    "NoiseLevel",
    "Parameter",
    "PerturbationTarget",
    "PerturbedCase",
    "Scenario",
    "ScoreGroup",
    "StageScores",
    "TestCase",
    "Tool",
    "Violation",
    "build_environment",
    "evaluate_case",
    "parse_catalog",
    "parse_react",
    "remap_gold",
    "serialize_catalog",
    "validate_case",
    "welch_anova",
]

__version__ = "0.1.0"
