from kgmill.engine.beceptivity import (
    BeceptivityAssessor,
    beceptivity_requery_prompt,
    parse_rating,
    refinement_prompt,
)
from kgmill.engine.expansion import Expander, expansion_prompt
from kgmill.engine.finalize import (
    finalize_boolean,
    finalize_categorical_vote,
    finalize_numeric,
)
from kgmill.engine.runconfig import RunPlan, load_run_plan, parse_run_plan
from kgmill.engine.runner import ExtractionEngine, RunReport
from kgmill.engine.specs import (
    AreYouSureConfig,
    BeceptivityAssessment,
    BeceptivityConfig,
    ExpansionString,
    PromptGroup,
    RelationshipSpec,
    build_groups,
)

__all__ = [
    "BeceptivityAssessor", "beceptivity_requery_prompt", "parse_rating",
    "refinement_prompt", "Expander", "expansion_prompt",
    "finalize_boolean", "finalize_categorical_vote", "finalize_numeric",
    "RunPlan", "load_run_plan", "parse_run_plan",
    "ExtractionEngine", "RunReport",
    "AreYouSureConfig", "BeceptivityAssessment", "BeceptivityConfig",
    "ExpansionString", "PromptGroup", "RelationshipSpec", "build_groups",
]
