import pytest

from sand.core.types import Instruction
from sand.env.fixtures import expert_corpus, plan_actions, record_expert
from sand.env.remote import WireServer
from sand.env.task import Goal, RewardMode, TaskSpec
from sand.env.textgrid import TextGridEnv
from sand.policy.stub import TemplateStubPolicy
from sand.policy.tabular import TabularEntry, TabularPolicy, TabularTable

SWITCH_ACTIONS = ["go to kitchen", "open fridge", "take mug from fridge", "examine table"]


@pytest.fixture
def textgrid():
    return TextGridEnv()


@pytest.fixture
def mug_spec():
    """Seed-7 world: mug in the closed fridge, goal is the (empty) cabinet."""
    return TaskSpec(
        instruction=Instruction(id="tg-0007", text="put the mug in the cabinet."),
        world_seed=7,
        goal=Goal(object="mug", receptacle="cabinet"),
    )


@pytest.fixture
def expert(mug_spec):
    """The five-step solution of ``mug_spec``."""
    return record_expert(mug_spec, plan_actions(mug_spec))


@pytest.fixture
def switch_spec():
    return TaskSpec(
        instruction=Instruction(id="tg-switch", text="put the mug on the table."),
        world_seed=7,
        goal=Goal(object="mug", receptacle="table"),
        reward_mode=RewardMode.GRANULAR,
        max_steps=4,
        weights={"locate": 0.25, "hold": 0.25, "place": 0.5},
    )


@pytest.fixture
def switch_expert(switch_spec):
    """Finds and takes the mug, then wastes the last step: reward 0.5."""
    return record_expert(switch_spec, [("", a) for a in SWITCH_ACTIONS])


@pytest.fixture
def switch_policy():
    """Follows the expert for three steps, then always puts the mug on the table."""
    states = {}
    for index, action in enumerate(SWITCH_ACTIONS[:3]):
        states[" | ".join(SWITCH_ACTIONS[:index])] = (TabularEntry(action=action, prob=1.0),)
    states[" | ".join(SWITCH_ACTIONS[:3])] = (TabularEntry(action="put mug on table", prob=1.0),)
    return TabularPolicy(
        TabularTable(tasks={"tg-switch": states}, fallback=(TabularEntry(action="look", prob=1.0),))
    )


@pytest.fixture
def stub():
    return TemplateStubPolicy()


@pytest.fixture
def point_mass(expert):
    return TabularPolicy.from_trajectories([expert])


@pytest.fixture(scope="session")
def corpus():
    """Thirty binary-reward tasks with their solved expert trajectories."""
    return expert_corpus(30)


@pytest.fixture
def wire_server():
    with WireServer(TextGridEnv()) as server:
        yield server
