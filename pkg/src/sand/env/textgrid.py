"""TextGrid: a small deterministic household world.

Three rooms, nine receptacles and six objects. Object ``i`` starts in
receptacle ``(seed + stride * i) % 9`` where ``stride`` is picked from the
seed, so every world is a pure function of its seed and can be checked by
hand. Actions follow the household action grammar::

    go to <room>
    open <recep> / close <recep>
    take <obj> from <recep>
    put <obj> in <recep> | put <obj> on <recep> | put <obj> in/on <recep>
    examine <recep|obj>
    look
    focus on <obj>            (granular reward mode only)

Anything else, or any action whose preconditions fail, yields exactly
"Nothing happened" and leaves the world untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from sand.core.errors import InvalidTaskError
from sand.core.text import join_listing, with_article
from sand.core.types import Action, Observation
from sand.env.base import EnvBackend, EnvHandle, EnvOutcome
from sand.env.task import FOCUS, HOLD, LOCATE, PLACE, REQUIRABLE, RewardMode, TaskSpec

NOTHING_HAPPENED = "Nothing happened"

ROOMS: dict[str, tuple[str, ...]] = {
    "hallway": ("shelf", "drawer"),
    "kitchen": ("fridge", "table", "countertop", "cabinet"),
    "living room": ("sofa", "coffeetable", "dresser"),
}
RECEPTACLES: tuple[str, ...] = tuple(r for recs in ROOMS.values() for r in recs)
OPENABLE = frozenset({"drawer", "fridge", "cabinet", "dresser"})
OBJECTS: tuple[str, ...] = ("egg", "apple", "mug", "book", "key", "remote")
STRIDES: tuple[int, ...] = (2, 4, 5, 7, 8, 1)
START_ROOM = "hallway"

ROOM_OF: dict[str, str] = {r: room for room, recs in ROOMS.items() for r in recs}

_GO = re.compile(r"^go to (?P<target>.+)$")
_OPEN = re.compile(r"^open (?P<recep>.+)$")
_CLOSE = re.compile(r"^close (?P<recep>.+)$")
_TAKE = re.compile(r"^take (?P<obj>.+) from (?P<recep>.+)$")
_PUT = re.compile(r"^put (?P<obj>.+?) (?:in/on|in|on) (?P<recep>.+)$")
_EXAMINE = re.compile(r"^examine (?P<target>.+)$")
_FOCUS = re.compile(r"^focus on (?P<obj>.+)$")
_LOOK = {"look", "look around"}


def initial_placement(seed: int) -> dict[str, str]:
    stride = STRIDES[(seed // len(RECEPTACLES)) % len(STRIDES)]
    return {
        obj: RECEPTACLES[(seed + stride * i) % len(RECEPTACLES)]
        for i, obj in enumerate(OBJECTS)
    }


def preposition(recep: str) -> str:
    return "in" if recep in OPENABLE else "on"


@dataclass
class WorldState:
    room: str
    locations: dict[str, str | None]
    opened: set[str] = field(default_factory=set)
    holding: str | None = None
    achieved: set[str] = field(default_factory=set)

    def contents(self, recep: str) -> list[str]:
        return [obj for obj in OBJECTS if self.locations.get(obj) == recep]

    def accessible(self, recep: str) -> bool:
        return recep not in OPENABLE or recep in self.opened

    def here(self, recep: str) -> bool:
        return ROOM_OF.get(recep) == self.room

    def visible(self, obj: str) -> bool:
        recep = self.locations.get(obj)
        return self.holding == obj or (
            recep is not None and self.here(recep) and self.accessible(recep)
        )

    def snapshot(self) -> tuple:
        return (
            self.room,
            tuple(sorted((o, r or "") for o, r in self.locations.items())),
            tuple(sorted(self.opened)),
            self.holding,
            tuple(sorted(self.achieved)),
        )


def _describe_contents(state: WorldState, recep: str) -> str:
    items = [with_article(obj) for obj in state.contents(recep)]
    prep = preposition(recep).capitalize()
    return f"{prep} the {recep}, you see {join_listing(items) if items else 'nothing'}."


def describe_room(state: WorldState, arrived: bool) -> str:
    """Room description: furniture, visible contents, then the other rooms."""
    head = f"You arrive at the {state.room}." if arrived else f"You are in the {state.room}."
    furniture = []
    for recep in ROOMS[state.room]:
        label = with_article(recep)
        if recep in OPENABLE:
            label += " (open)" if recep in state.opened else " (closed)"
        furniture.append(label)
    parts = [head, f"You see {join_listing(furniture)}."]
    for recep in ROOMS[state.room]:
        if state.accessible(recep) and state.contents(recep):
            parts.append(_describe_contents(state, recep))
    others = [room for room in ROOMS if room != state.room]
    parts.append(f"Other rooms: {', '.join(others)}.")
    return " ".join(parts)


class TextGridHandle(EnvHandle):
    def __init__(self, spec: TaskSpec, state: WorldState) -> None:
        super().__init__(spec)
        self.state = state
        self.weights = spec.subgoal_weights
        self._update_progress()

    # --- transitions ----------------------------------------------------------

    def _step(self, action: Action) -> EnvOutcome:
        text = self._transition(action.canonical)
        if text is None:
            text = NOTHING_HAPPENED
        else:
            self._update_progress()

        done = self.success or self.steps_taken + 1 >= self.spec.max_steps
        return EnvOutcome(
            observation=Observation(text=text),
            done=done,
            reward_if_done=self._score() if done else None,
        )

    def _transition(self, command: str) -> str | None:
        """Apply a command; ``None`` means invalid and nothing changed."""
        s = self.state
        if command in _LOOK:
            return describe_room(s, arrived=False)

        if m := _GO.match(command):
            room = m["target"]
            if room not in ROOMS or room == s.room:
                return None
            s.room = room
            return describe_room(s, arrived=True)

        if m := _OPEN.match(command):
            recep = m["recep"]
            if recep not in OPENABLE or not s.here(recep) or recep in s.opened:
                return None
            s.opened.add(recep)
            items = [with_article(obj) for obj in s.contents(recep)]
            if items:
                return f"You open the {recep}. In the {recep}, you see {join_listing(items)}."
            return f"You open the {recep}. The {recep} is empty."

        if m := _CLOSE.match(command):
            recep = m["recep"]
            if recep not in s.opened or not s.here(recep):
                return None
            s.opened.discard(recep)
            return f"You close the {recep}."

        if m := _TAKE.match(command):
            obj, recep = m["obj"], m["recep"]
            if (
                s.holding is not None
                or obj not in OBJECTS
                or s.locations.get(obj) != recep
                or not s.here(recep)
                or not s.accessible(recep)
            ):
                return None
            s.locations[obj] = None
            s.holding = obj
            return f"You pick up the {obj} from the {recep}."

        if m := _PUT.match(command):
            obj, recep = m["obj"], m["recep"]
            if s.holding != obj or recep not in RECEPTACLES or not s.here(recep):
                return None
            if not s.accessible(recep):
                return None
            s.locations[obj] = recep
            s.holding = None
            return f"You put the {obj} {preposition(recep)} the {recep}."

        if m := _EXAMINE.match(command):
            target = m["target"]
            if target in RECEPTACLES and s.here(target):
                if not s.accessible(target):
                    return f"The {target} is closed."
                return _describe_contents(s, target)
            if target in OBJECTS and s.visible(target):
                return f"There is nothing special about the {target}."
            return None

        if m := _FOCUS.match(command):
            obj = m["obj"]
            if self.spec.reward_mode is not RewardMode.GRANULAR:
                return None
            if obj not in OBJECTS or not s.visible(obj):
                return None
            if obj == self.spec.goal.object:
                s.achieved.add(FOCUS)
            return f"You focus on the {obj}."

        return None

    # --- progress -------------------------------------------------------------

    def _update_progress(self) -> None:
        s = self.state
        goal = self.spec.goal
        if s.visible(goal.object):
            s.achieved.add(LOCATE)
        if s.holding == goal.object:
            s.achieved.add(HOLD)
        if s.locations.get(goal.object) == goal.receptacle:
            s.achieved.add(PLACE)

    @property
    def success(self) -> bool:
        goal = self.spec.goal
        placed = self.state.locations.get(goal.object) == goal.receptacle
        return placed and all(req in self.state.achieved for req in goal.requires)

    def _score(self) -> float:
        if self.spec.reward_mode is RewardMode.BINARY:
            return 1.0 if self.success else 0.0
        total = sum(w for name, w in self.weights.items() if name in self.state.achieved)
        return min(1.0, round(total, 12))

    def snapshot(self) -> tuple:
        """Comparable world state, excluding step counters."""
        return self.state.snapshot()


class TextGridEnv(EnvBackend):
    """Built-in deterministic backend."""

    def reset(self, spec: TaskSpec) -> tuple[TextGridHandle, Observation]:
        goal = spec.goal
        if goal.object not in OBJECTS:
            raise InvalidTaskError(f"unknown object '{goal.object}' in task '{spec.id}'")
        if goal.receptacle not in RECEPTACLES:
            raise InvalidTaskError(f"unknown receptacle '{goal.receptacle}' in task '{spec.id}'")
        unknown = set(goal.requires) - REQUIRABLE
        if unknown:
            raise InvalidTaskError(f"unknown required states {sorted(unknown)} in task '{spec.id}'")
        if FOCUS in goal.requires and spec.reward_mode is not RewardMode.GRANULAR:
            raise InvalidTaskError(f"'focus' needs granular reward mode in task '{spec.id}'")

        state = WorldState(room=START_ROOM, locations=dict(initial_placement(spec.world_seed)))
        handle = TextGridHandle(spec, state)
        if handle.success:
            raise InvalidTaskError(f"goal of task '{spec.id}' is satisfied before any action")

        observation = Observation(text=describe_room(state, arrived=False))
        handle.initial_observation = observation
        return handle, observation
