import math

import pytest
from pydantic import ValidationError

from sand.core.errors import EmptyActionError, SandError, UnscorableError
from sand.core.probability import OFF_SUPPORT, trajectory_log_prob
from sand.core.text import (
    canonical_form,
    count_tokens,
    is_deliberative_text,
    join_listing,
    render_step_text,
    split_step_text,
)
from sand.core.types import (
    DeliberationStep,
    History,
    Instruction,
    Observation,
    Step,
    StepSample,
    Thought,
    ThoughtKind,
    Trajectory,
    canonicalize,
    step_count,
)
from sand.core.utils import derive_seed, stable_key
from sand.policy.stub import TemplateStubPolicy
from sand.policy.tabular import TabularEntry, TabularPolicy, TabularTable

TASK = Instruction(id="t", text="do it.")


def _step(action, observation="ok"):
    return Step(action=canonicalize(action), observation=Observation(text=observation) if observation else None)


def test_canonical_form():
    assert canonical_form("  Go  to\tKitchen. ") == "go to kitchen"
    assert canonical_form("open fridge") == "open fridge"
    assert canonical_form("look . .") == "look"


@pytest.mark.parametrize("raw", ["look..", "Go to  Kitchen.", "open fridge . ", "take mug from fridge"])
def test_canonical_form_is_idempotent(raw):
    once = canonical_form(raw)
    assert canonical_form(once) == once


def test_action_equality_is_canonical():
    a, b = canonicalize("Open Fridge."), canonicalize("open   fridge")
    assert a == b
    assert hash(a) == hash(b)
    assert a.raw != b.raw
    assert len({a, b}) == 1


def test_empty_action_rejected():
    with pytest.raises(EmptyActionError):
        canonicalize("   .")


def test_count_tokens():
    assert count_tokens("open the fridge") == 3
    assert count_tokens("") == 0
    assert count_tokens("  a\n\tb ") == 2


def test_join_listing():
    assert join_listing(["x"]) == "x"
    assert join_listing(["x", "y"]) == "x and y"
    assert join_listing(["x", "y", "z"]) == "x, y, and z"


def test_split_and_render_step_text():
    assert split_step_text("Thought: go look.\nAction: look") == ("go look.", "look")
    assert split_step_text("Action: look") == ("", "look")
    assert split_step_text("open fridge") == ("", "open fridge")
    assert render_step_text("", "look") == "Action: look"
    assert render_step_text("hm", "look") == "Thought: hm\nAction: look"


def test_is_deliberative_text():
    assert is_deliberative_text("think\n\n- look: fine\n- open fridge: better\n\nso open it")
    assert not is_deliberative_text("- look: fine")
    assert not is_deliberative_text("I need to find the mug first.")


def test_trajectory_invariants():
    e = Trajectory(instruction=TASK, steps=(_step("look"), _step("open fridge", None)), reward=1.0)
    assert e.id == "t"
    assert e.token_count == 3
    assert len(e.history(2).steps) == 1

    with pytest.raises(ValidationError):
        Trajectory(instruction=TASK, steps=(), reward=1.0)
    with pytest.raises(ValidationError):
        Trajectory(instruction=TASK, steps=(_step("look"),), reward=1.2)
    with pytest.raises(ValidationError):
        Trajectory(instruction=TASK, steps=(_step("look", None), _step("look")), reward=0.0)
    with pytest.raises(ValidationError):
        Trajectory(instruction=TASK, steps=(_step("look"),), reward=0.0, token_count=7)


def test_deliberation_step_flags_must_agree():
    deliberative = Thought(text="x\n- a: 1\n- b: 2\ny", kind=ThoughtKind.DELIBERATIVE)
    DeliberationStep(thought=deliberative, action=canonicalize("a"), deliberated=True, candidate_count=2)
    DeliberationStep(thought=Thought.plain(), action=canonicalize("a"), deliberated=False, candidate_count=1)
    with pytest.raises(ValidationError):
        DeliberationStep(thought=deliberative, action=canonicalize("a"), deliberated=True, candidate_count=1)
    with pytest.raises(ValidationError):
        DeliberationStep(thought=Thought.plain(), action=canonicalize("a"), deliberated=True, candidate_count=3)


def test_error_carries_action():
    err = SandError("bad").with_action("open fridge")
    assert err.action == "open fridge"
    assert str(err) == "[open fridge] bad"


def test_derive_seed_is_deterministic():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert stable_key("tg-0007") == stable_key("tg-0007")


def _two_step_policy():
    states = {
        "": (TabularEntry(action="a", prob=0.5), TabularEntry(action="b", prob=0.5)),
        "a": (TabularEntry(action="c", prob=0.3), TabularEntry(action="d", prob=0.7)),
        "b": (TabularEntry(action="c", prob=1.0),),
    }
    return TabularPolicy(TabularTable(tasks={"t": states}))


def test_step_count(expert):
    assert step_count(expert) == 5


def test_trajectory_log_prob_factorizes():
    policy = _two_step_policy()
    e = Trajectory(instruction=TASK, steps=(_step("a"), _step("d", None)), reward=0.0)
    assert trajectory_log_prob(policy, e) == pytest.approx(math.log(0.35))

    total = 0.0
    for first, second in (("a", "c"), ("a", "d"), ("b", "c")):
        e = Trajectory(instruction=TASK, steps=(_step(first), _step(second, None)), reward=0.0)
        total += math.exp(trajectory_log_prob(policy, e))
    assert total == pytest.approx(1.0)


def test_trajectory_log_prob_of_two_fair_coins():
    coin = (TabularEntry(action="heads", prob=0.5), TabularEntry(action="tails", prob=0.5))
    policy = TabularPolicy(TabularTable(tasks={"t": {"": coin, "heads": coin}}))
    e = Trajectory(instruction=TASK, steps=(_step("heads"), _step("tails", None)), reward=0.0)
    assert trajectory_log_prob(policy, e) == pytest.approx(-1.3863, abs=1e-4)


def test_trajectory_log_prob_off_support():
    policy = _two_step_policy()
    e = Trajectory(instruction=TASK, steps=(_step("a"), _step("a", None)), reward=0.0)
    assert trajectory_log_prob(policy, e) == OFF_SUPPORT


def test_trajectory_log_prob_needs_scorable_policy():
    e = Trajectory(instruction=TASK, steps=(_step("a"),), reward=0.0)
    with pytest.raises(UnscorableError):
        trajectory_log_prob(TemplateStubPolicy(), e)


def _three_step_policy():
    states = {
        "": (TabularEntry(action="a", prob=0.9), TabularEntry(action="x", prob=0.1)),
        "a": (TabularEntry(action="b", prob=0.5), TabularEntry(action="y", prob=0.5)),
        "x": (TabularEntry(action="b", prob=1.0),),
        "a | b": (TabularEntry(action="c", prob=0.2), TabularEntry(action="z", prob=0.8)),
        "a | y": (TabularEntry(action="c", prob=1.0),),
        "x | b": (TabularEntry(action="c", prob=0.5), TabularEntry(action="z", prob=0.5)),
    }
    return TabularPolicy(TabularTable(tasks={"t": states}))


def _trajectory(actions):
    steps = [_step(a) for a in actions[:-1]] + [_step(actions[-1], None)]
    return Trajectory(instruction=TASK, steps=tuple(steps), reward=0.0)


def _paths(policy, prefix, depth):
    if len(prefix) == depth:
        yield prefix
        return
    history = History(instruction=TASK)
    for action in prefix:
        history = history.append(_step(action))
    for sample, _ in policy.support(history):
        yield from _paths(policy, prefix + [sample.action.raw], depth)


def test_score_step_examples():
    policy = _two_step_policy()
    root = History(instruction=TASK)
    assert policy.score_step(root, StepSample.of("a")) == pytest.approx(math.log(0.5))
    after_b = root.append(_step("b"))
    assert policy.score_step(after_b, StepSample.of("c")) == 0.0
    assert policy.score_step(after_b, StepSample.of("d")) == OFF_SUPPORT
    assert policy.score_step(root.append(_step("c")), StepSample.of("a")) == OFF_SUPPORT


def test_trajectory_log_prob_of_three_steps():
    e = _trajectory(["a", "b", "c"])
    assert trajectory_log_prob(_three_step_policy(), e) == pytest.approx(math.log(0.09))


def test_trajectory_probabilities_sum_to_one_at_depth_three():
    policy = _three_step_policy()
    paths = list(_paths(policy, [], 3))
    assert len(paths) == 5
    total = math.fsum(math.exp(trajectory_log_prob(policy, _trajectory(p))) for p in paths)
    assert total == pytest.approx(1.0)
