"""Generated TextGrid task corpora with solved expert trajectories."""

from __future__ import annotations

from sand.core.types import Instruction, Observation, Split, Step, Thought, Trajectory, canonicalize
from sand.env.base import EnvBackend
from sand.env.task import FOCUS, Goal, RewardMode, TaskSpec
from sand.env.textgrid import (
    OBJECTS,
    OPENABLE,
    RECEPTACLES,
    ROOM_OF,
    START_ROOM,
    TextGridEnv,
    initial_placement,
    preposition,
)


def make_task_specs(
    n: int,
    reward_mode: RewardMode = RewardMode.BINARY,
    seed: int = 0,
    split: Split = Split.TRAIN,
    max_steps: int = 40,
) -> list[TaskSpec]:
    """Deterministic corpus of ``n`` solvable put-object tasks."""
    specs = []
    for i in range(n):
        world_seed = seed + i
        obj = OBJECTS[i % len(OBJECTS)]
        start = initial_placement(world_seed)[obj]
        target = RECEPTACLES[(RECEPTACLES.index(start) + 3 + i) % len(RECEPTACLES)]
        if target == start:
            target = RECEPTACLES[(RECEPTACLES.index(start) + 1) % len(RECEPTACLES)]
        requires = (FOCUS,) if reward_mode is RewardMode.GRANULAR and i % 2 == 0 else ()
        text = f"put the {obj} {preposition(target)} the {target}."
        if requires:
            text = f"focus on the {obj}, then {text}"
        specs.append(
            TaskSpec(
                instruction=Instruction(id=f"tg-{world_seed:04d}", text=text, split=split),
                world_seed=world_seed,
                goal=Goal(object=obj, receptacle=target, requires=requires),
                reward_mode=reward_mode,
                max_steps=max_steps,
            )
        )
    return specs


def plan_actions(spec: TaskSpec) -> list[tuple[str, str]]:
    """Shortest solution as ``(thought, action)`` pairs."""
    goal = spec.goal
    source = initial_placement(spec.world_seed)[goal.object]
    room = START_ROOM
    plan: list[tuple[str, str]] = []

    def goto(target_room: str, thought: str = "") -> None:
        nonlocal room
        if target_room != room:
            plan.append((thought, f"go to {target_room}"))
            room = target_room

    goto(ROOM_OF[source], f"To solve the task, I need to find the {goal.object} first.")
    if source in OPENABLE:
        plan.append(("", f"open {source}"))
    plan.append((f"I found the {goal.object}. Next, I need to take it.", f"take {goal.object} from {source}"))
    if FOCUS in goal.requires:
        plan.append(("", f"focus on {goal.object}"))
    goto(ROOM_OF[goal.receptacle])
    if goal.receptacle in OPENABLE:
        plan.append(("", f"open {goal.receptacle}"))
    plan.append(
        (
            f"Now I put the {goal.object} {preposition(goal.receptacle)} the {goal.receptacle}.",
            f"put {goal.object} {preposition(goal.receptacle)} {goal.receptacle}",
        )
    )
    return plan


def record_expert(
    spec: TaskSpec,
    plan: list[tuple[str, str]],
    backend: EnvBackend | None = None,
) -> Trajectory:
    """Execute a plan and record it with the environment's observations and score."""
    handle, initial = (backend or TextGridEnv()).reset(spec)
    steps = []
    for thought, action in plan:
        outcome = handle.step(canonicalize(action))
        steps.append(
            Step(
                thought=Thought.plain(thought),
                action=canonicalize(action),
                observation=Observation(text=outcome.observation.text),
            )
        )
        if outcome.done:
            break
    if not handle.terminated:
        handle.terminate()
    return Trajectory(
        instruction=spec.instruction, steps=tuple(steps), reward=handle.score(), initial_observation=initial
    )


def expert_corpus(
    n: int,
    reward_mode: RewardMode = RewardMode.BINARY,
    seed: int = 0,
    split: Split = Split.TRAIN,
    max_steps: int = 40,
) -> tuple[list[TaskSpec], list[Trajectory]]:
    specs = make_task_specs(n, reward_mode=reward_mode, seed=seed, split=split, max_steps=max_steps)
    return specs, [record_expert(spec, plan_actions(spec)) for spec in specs]
