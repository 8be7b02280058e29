import numpy as np
import pytest

from sand.core.errors import AssemblyError, SynthesisContractError, SynthesisParseError
from sand.core.types import History, Instruction, Observation, Step, StepSample, Thought, ThoughtKind, canonicalize
from sand.deliberation.critique import Critique
from sand.deliberation.pipeline import DeliberationSettings, deliberate
from sand.deliberation.synthesis import (
    DeliberationDraft,
    StepPlan,
    SwitchDecision,
    assemble,
    build_deliberation_prompt,
    decide_switch,
    parse_deliberation,
    render_scratch_pad,
    synthesize,
)
from sand.deliberation.rollout import RolloutRecord
from sand.deliberation.sampler import SamplingMode, count_unique, scan_trajectory
from sand.env.base import replay_prefix
from sand.policy.stub import TemplateStubPolicy

LOOK, FRIDGE = canonicalize("look"), canonicalize("open fridge")

SWITCH_THOUGHT = (
    "I have taken 3 steps so far and need to choose my next action carefully.\n\n"
    "- examine table: likely ends with a reward of 0.5, a solid step\n"
    "- put mug on table: likely ends with a reward of 1.0, a solid step\n\n"
    "Comparing these options, put mug on table is the most reliable way forward, so I will do it now."
)


class Replies:
    def __init__(self, *replies):
        self.replies = list(replies)
        self.prompts = []

    def complete_text(self, prompt, temperature):
        self.prompts.append(prompt)
        return self.replies[min(len(self.prompts), len(self.replies)) - 1]


def _record(action, reward, expert=False, length=1):
    return RolloutRecord(
        step_index=1,
        candidate=StepSample.of(action),
        continuation=tuple(Step(action=canonicalize(action)) for _ in range(length)),
        final_reward=reward,
        is_expert_tail=expert,
    )


def test_draft_render():
    draft = DeliberationDraft(
        reflection="I am in the kitchen.",
        bullets=((FRIDGE, "might hold the mug"), (LOOK, "wastes a step")),
        rationale="So I open the fridge.",
    )
    assert draft.render() == (
        "I am in the kitchen.\n\n- open fridge: might hold the mug\n- look: wastes a step\n\nSo I open the fridge."
    )
    with pytest.raises(ValueError):
        DeliberationDraft(reflection="x", bullets=((LOOK, "a"),), rationale="y")


def test_deliberation_prompt(expert):
    pairs = [(FRIDGE, None), (LOOK, None)]
    prompt = build_deliberation_prompt(expert.instruction, expert.history(2), pairs, FRIDGE)
    assert "- open fridge:\n- look:" in prompt
    assert "must be **open fridge**" in prompt
    assert render_scratch_pad(pairs) == "- open fridge:\n- look:"
    with pytest.raises(SynthesisContractError):
        build_deliberation_prompt(expert.instruction, expert.history(2), pairs, canonicalize("go to kitchen"))


def test_parse_deliberation():
    text = "Thought: I am here.\n\n- open fridge: good\n- Look.: meh\n\nI open it."
    draft = parse_deliberation(text, [FRIDGE, LOOK])
    assert draft.reflection == "I am here."
    assert [a for a, _ in draft.bullets] == [FRIDGE, LOOK]
    assert draft.rationale == "I open it."


@pytest.mark.parametrize(
    "text",
    [
        "Thought: I am here.\n- open fridge: good\n\nI open it.",
        "Thought: I am here.\n- open fridge: good\n- look: meh\n- go to hallway: far\n\nI open it.",
        "Thought: I am here.\n- open fridge: good\n- look: meh",
        "- open fridge: good\n- look: meh\n\nI open it.",
        "Thought: My simulation says so.\n- open fridge: good\n- look: meh\n\nI open it.",
        "Thought: The scratch-pad agrees.\n- open fridge: good\n- look: meh\n\nI open it.",
    ],
)
def test_parse_deliberation_rejects(text):
    with pytest.raises(SynthesisParseError):
        parse_deliberation(text, [FRIDGE, LOOK])


def test_synthesize_retries_once():
    good = "Thought: Here.\n- open fridge: good\n- look: meh\n\nOpen it."
    base = Replies("Action: open fridge", good)
    draft = synthesize(base, "PROMPT", [(FRIDGE, None), (LOOK, None)], FRIDGE)
    assert draft.rationale == "Open it."
    assert len(base.prompts) == 2

    with pytest.raises(SynthesisParseError) as info:
        synthesize(Replies("nope"), "PROMPT", [(FRIDGE, None), (LOOK, None)], FRIDGE)
    assert info.value.action == "open fridge"


def test_decide_switch_needs_strict_improvement():
    expert = _record("examine table", 0.5, expert=True)
    better = {canonicalize("put mug on table"): _record("put mug on table", 1.0)}
    equal = {LOOK: _record("look", 0.5)}

    decision = decide_switch(True, expert, better)
    assert decision.switched and str(decision.chosen) == "put mug on table"
    assert decision.best_reward == 1.0
    assert not decide_switch(False, expert, better).switched
    assert not decide_switch(True, expert, equal).switched
    assert decide_switch(True, expert, {}).chosen == expert.action


def test_decide_switch_breaks_ties_by_canonical_action():
    expert = _record("examine table", 0.0, expert=True)
    others = {
        canonicalize("put mug on table"): _record("put mug on table", 1.0),
        canonicalize("go to hallway"): _record("go to hallway", 1.0),
        LOOK: _record("look", 0.5),
    }
    assert str(decide_switch(True, expert, others).chosen) == "go to hallway"


def test_assemble_without_drafts_copies_the_expert(point_mass, textgrid, mug_spec, expert):
    scanned = scan_trajectory(point_mass, textgrid, mug_spec, expert, n=2, seed=0)
    d = assemble(expert, {c.step_index: StepPlan(candidates=c) for c in scanned}, iteration=1)
    assert [s.as_step().sample for s in d.steps] == [s.sample for s in expert.steps]
    assert all(not s.deliberated and s.candidate_count == 1 for s in d.steps)
    assert d.reward == expert.reward
    assert d.source_trajectory_id == "tg-0007"


def test_assemble_checks_coverage(point_mass, textgrid, mug_spec, expert):
    scanned = scan_trajectory(point_mass, textgrid, mug_spec, expert, n=2, seed=0)
    plans = {c.step_index: StepPlan(candidates=c) for c in scanned}
    with pytest.raises(AssemblyError):
        assemble(expert, {t: p for t, p in plans.items() if t != 3}, iteration=1)
    with pytest.raises(AssemblyError):
        assemble(expert, {t: p for t, p in plans.items() if t < 5}, iteration=1)
    with pytest.raises(AssemblyError):
        assemble(expert, {}, iteration=1)


def test_assemble_rejects_inconsistent_carried_deliberation(point_mass, textgrid, mug_spec, expert):
    scanned = scan_trajectory(point_mass, textgrid, mug_spec, expert, n=2, seed=0)
    steps = list(expert.steps)
    steps[0] = steps[0].model_copy(update={"thought": Thought(text="x", kind=ThoughtKind.DELIBERATIVE)})
    broken = expert.model_copy(update={"steps": tuple(steps)})
    with pytest.raises(AssemblyError):
        assemble(broken, {c.step_index: StepPlan(candidates=c) for c in scanned}, iteration=2)


def test_switch_fixture(stub, switch_policy, textgrid, switch_spec, switch_expert):
    outcome = deliberate(
        switch_policy, stub, textgrid, switch_spec, switch_expert, DeliberationSettings(n=5), seed=0, iteration=1
    )
    d = outcome.trajectory
    assert outcome.flags == (False, False, False, True)
    assert outcome.switched
    assert [s.deliberated for s in d.steps] == [False, False, False, True]
    last = d.steps[3]
    assert str(last.action) == "put mug on table"
    assert last.candidate_count == 2
    assert last.thought.text == SWITCH_THOUGHT
    assert last.observation.text == "You put the mug on the table."
    assert d.reward == 1.0

    handle = replay_prefix(textgrid, switch_spec, d.to_trajectory(), 4)
    assert handle.terminated
    assert handle.score() == 1.0


def test_switch_fixture_with_switching_off(stub, switch_policy, textgrid, switch_spec, switch_expert):
    settings = DeliberationSettings(n=5, expert_switch=False)
    outcome = deliberate(switch_policy, stub, textgrid, switch_spec, switch_expert, settings, seed=0, iteration=1)
    d = outcome.trajectory
    assert not outcome.switched
    assert str(d.steps[3].action) == "examine table"
    assert d.steps[3].deliberated
    assert d.steps[3].thought.text.endswith("examine table is the most reliable way forward, so I will do it now.")
    assert d.reward == 0.5


def test_deliberation_without_critiques(stub, switch_policy, textgrid, switch_spec, switch_expert):
    settings = DeliberationSettings(n=5, critique=False)
    outcome = deliberate(switch_policy, stub, textgrid, switch_spec, switch_expert, settings, seed=0, iteration=1)
    last = outcome.trajectory.steps[3]
    assert not outcome.switched
    assert str(last.action) == "examine table"
    assert "- put mug on table: worth weighing against the other options" in last.thought.text


def test_decide_switch_skips_alternatives_longer_than_the_remaining_steps():
    expert = _record("examine table", 0.0, expert=True)
    others = {
        canonicalize("put mug on table"): _record("put mug on table", 1.0, length=3),
        LOOK: _record("look", 0.5, length=2),
    }
    decision = decide_switch(True, expert, others, max_length=2)
    assert decision.switched and decision.chosen == LOOK
    assert not decide_switch(True, expert, others, max_length=1).switched
    assert str(decide_switch(True, expert, others).chosen) == "put mug on table"


def test_decide_switch_never_leaves_a_better_or_equal_expert():
    for seed in range(500):
        rng = np.random.default_rng(seed)
        rewards = rng.integers(0, 5, size=int(rng.integers(1, 6))) / 4
        expert_reward = float(rng.integers(int(rewards.max() * 4), 5)) / 4
        expert = _record("examine table", expert_reward, expert=True)
        others = {
            canonicalize(f"examine thing {i}"): _record(f"examine thing {i}", float(r)) for i, r in enumerate(rewards)
        }
        decision = decide_switch(True, expert, others)
        assert not decision.switched
        assert decision.chosen == expert.action


def test_assemble_rejects_a_switch_that_grows_the_trajectory(point_mass, textgrid, mug_spec, expert):
    scanned = scan_trajectory(point_mass, textgrid, mug_spec, expert, n=2, seed=0)
    plans = {c.step_index: StepPlan(candidates=c) for c in scanned}
    last = expert.steps[4].action
    draft = DeliberationDraft(
        reflection="I hold the mug.", bullets=((last, "finishes"), (LOOK, "stalls")), rationale="Look first."
    )
    decision = SwitchDecision(original=last, chosen=LOOK, switched=True, original_reward=0.0, best_reward=1.0)
    c = plans[5].candidates
    sampled = (StepSample.of("look"),)
    c = c.model_copy(update={"sampled": sampled, "unique_actions": count_unique(c.expert, sampled)})
    plans[5] = StepPlan(candidates=c, draft=draft, decision=decision, records={LOOK: _record("look", 1.0, length=2)})
    with pytest.raises(AssemblyError):
        assemble(expert, plans, iteration=1)

    plans[5] = StepPlan(candidates=c, draft=draft, decision=decision, records={LOOK: _record("look", 1.0)})
    d = assemble(expert, plans, iteration=1)
    assert len(d.steps) == len(expert.steps)
    assert d.steps[4].action == LOOK
    assert d.initial_observation == expert.initial_observation


class _Recording:
    def __init__(self, inner):
        self.inner = inner
        self.prompts = []

    def complete_text(self, prompt, temperature):
        self.prompts.append(prompt)
        return self.inner.complete_text(prompt, temperature)


def test_in_context_sampling(switch_policy, textgrid, switch_spec, switch_expert):
    base = _Recording(TemplateStubPolicy(("look",)))
    settings = DeliberationSettings(n=3, sampling=SamplingMode.IN_CONTEXT)
    outcome = deliberate(switch_policy, base, textgrid, switch_spec, switch_expert, settings, seed=0, iteration=1)
    d = outcome.trajectory

    proposals = [p for p in base.prompts if "### Candidate Actions" in p]
    assert len(proposals) == 4
    assert "Propose exactly **3** alternative next actions" in proposals[0]
    assert outcome.flags == (True, True, True, True)
    assert not outcome.switched
    assert [s.action for s in d.steps] == [s.action for s in switch_expert.steps]
    assert all(s.deliberated and s.candidate_count == 2 for s in d.steps)
    assert all("- look: " in s.thought.text for s in d.steps)
    assert d.reward == 0.5


def test_self_consistency_is_the_default_sampling(stub, switch_policy, textgrid, switch_spec, switch_expert):
    assert DeliberationSettings().sampling is SamplingMode.SELF_CONSISTENCY
    base = _Recording(stub)
    outcome = deliberate(
        switch_policy, base, textgrid, switch_spec, switch_expert, DeliberationSettings(n=5), seed=0, iteration=1
    )
    assert not any("### Candidate Actions" in p for p in base.prompts)
    assert outcome.flags == (False, False, False, True)


DELIBERATION_GOLDEN = """### Background
put the mug in the cabinet.

### Current State
You are in the hallway.
Action: go to kitchen
Observation: You arrive at the kitchen.

### Private Scratch-pad
You silently drafted several possible next actions with your intuitive judgement about each (these notes stay private):
- open fridge: The mug is probably inside.
- look:

### Very Important
Your final **Action** line must be **open fridge**. Everything you write has to lead naturally to this choice.

### Instructions
Generate reasoning thoughts following the instructions below:
Begin with a short one-sentence reflection of your previous action and your current situation.
Then propose and list each candidate action from the scratch-pad with your own intuitive judgement, e.g., - <candidate action>: <your judgement>.
Keep your judgement informative and avoid repeating generic evaluation statements.

Do **not** mention that the scratch-pad exists or that you got outside help.

### Output Format
Thought: <your one-sentence reflection>

- <candidate action>: <your judgement>
- <candidate action>: <your judgement>

<your comparison and rationale>"""


def test_deliberation_prompt_golden():
    instruction = Instruction(id="t", text="put the mug in the cabinet.")
    history = History(instruction=instruction, initial_observation=Observation(text="You are in the hallway."))
    history = history.append(
        Step(action=canonicalize("go to kitchen"), observation=Observation(text="You arrive at the kitchen."))
    )
    note = Critique(action=FRIDGE, text="The mug is probably inside.", reward_context=1.0, sentences=1)
    prompt = build_deliberation_prompt(instruction, history, [(FRIDGE, note), (LOOK, None)], FRIDGE)
    assert prompt == DELIBERATION_GOLDEN
    headers = [line for line in prompt.splitlines() if line.startswith("### ")]
    assert headers == [
        "### Background",
        "### Current State",
        "### Private Scratch-pad",
        "### Very Important",
        "### Instructions",
        "### Output Format",
    ]
