from sand.deliberation.critique import Critique, build_critique_prompt, critique_all, generate_critique
from sand.deliberation.pipeline import (
    DeliberationOutcome,
    DeliberationSettings,
    SynthesisResult,
    deliberate,
    synthesize_dataset,
)
from sand.deliberation.rollout import RolloutRecord, execute, expert_tail, rollout_unique
from sand.deliberation.proposal import parse_proposals, propose_candidates
from sand.deliberation.sampler import (
    CandidateSet,
    SamplingMode,
    needs_deliberation,
    sample_candidates,
    scan_trajectory,
)
from sand.deliberation.synthesis import (
    DeliberationDraft,
    SwitchDecision,
    assemble,
    build_deliberation_prompt,
    decide_switch,
    parse_deliberation,
    synthesize,
)

__all__ = [
    "CandidateSet",
    "Critique",
    "DeliberationDraft",
    "DeliberationOutcome",
    "DeliberationSettings",
    "RolloutRecord",
    "SamplingMode",
    "SwitchDecision",
    "SynthesisResult",
    "assemble",
    "build_critique_prompt",
    "build_deliberation_prompt",
    "critique_all",
    "decide_switch",
    "deliberate",
    "execute",
    "expert_tail",
    "generate_critique",
    "needs_deliberation",
    "parse_deliberation",
    "parse_proposals",
    "propose_candidates",
    "rollout_unique",
    "sample_candidates",
    "scan_trajectory",
    "synthesize",
    "synthesize_dataset",
]
