import json

import pytest

from sand.core.errors import (
    ConfigError,
    DatasetIOError,
    DatasetValidationError,
    IterationCompleteError,
    LoadError,
    PreconditionError,
)
from sand.dataset.iteration import advance, load_state, save_state, start, with_pending
from sand.dataset.store import (
    DatasetSource,
    check_dataset,
    describe_dataset,
    export_sft_chat,
    load_deliberation,
    load_trajectories,
    manifest_for,
    write_deliberation,
    write_trajectories,
)
from sand.deliberation.pipeline import DeliberationSettings, deliberate
from sand.policy.base import PolicyConfig, history_to_messages
from sand.prompts import system_prompt


@pytest.fixture
def switched(stub, switch_policy, textgrid, switch_spec, switch_expert):
    return deliberate(
        switch_policy, stub, textgrid, switch_spec, switch_expert, DeliberationSettings(n=5), seed=0, iteration=1
    ).trajectory


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def test_expert_round_trip(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    manifest = write_trajectories(experts, path)
    assert manifest.trajectory_count == 30
    assert manifest.source is DatasetSource.EXPERT
    assert manifest_for(path) == manifest
    assert load_trajectories(path) == experts
    record = json.loads(_lines(path)[0])
    assert record["schema"] == 1
    assert record["iteration"] == 0
    assert record["id"] == "tg-0000"


def test_deliberation_round_trip(tmp_path, switched):
    path = tmp_path / "iter1" / "deliberation.jsonl"
    manifest = write_deliberation([switched], path)
    assert manifest.epochs == 3
    assert manifest.iteration == 1
    assert load_deliberation(path) == [switched]

    [replayable] = load_trajectories(path)
    assert replayable.steps[3].thought.is_deliberative
    assert replayable.steps[3].candidate_count == 2


def test_later_iterations_train_one_epoch(tmp_path, switched):
    later = switched.model_copy(update={"iteration": 2})
    assert write_deliberation([later], tmp_path / "d.jsonl").epochs == 1


def test_write_deliberation_preconditions(tmp_path, switched):
    with pytest.raises(PreconditionError):
        write_deliberation([], tmp_path / "d.jsonl")
    with pytest.raises(PreconditionError):
        write_deliberation([switched, switched.model_copy(update={"iteration": 2})], tmp_path / "d.jsonl")


def test_reward_out_of_range_names_the_line(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    write_trajectories(experts[:3], path)
    lines = _lines(path)
    record = json.loads(lines[1])
    record["reward"] = 1.2
    lines[1] = json.dumps(record)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    with pytest.raises(DatasetValidationError) as info:
        load_trajectories(path)
    assert info.value.line == 2


def test_malformed_line_is_a_load_error(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    write_trajectories(experts[:3], path)
    with path.open("a", encoding="utf-8") as f:
        f.write("{not json\n")
    with pytest.raises(LoadError) as info:
        load_trajectories(path)
    assert info.value.line == 4


def test_unknown_fields_are_rejected(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    write_trajectories(experts[:1], path)
    record = json.loads(_lines(path)[0])
    record["extra"] = True
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(LoadError):
        load_trajectories(path)


def test_check_dataset_collects_every_problem(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    write_trajectories(experts[:3], path)
    lines = _lines(path)
    record = json.loads(lines[0])
    record["steps"] = []
    lines[0] = json.dumps(record)
    lines[2] = "[]"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    valid, problems = check_dataset(path)
    assert [line for line, _ in valid] == [2]
    assert [line for line, _ in problems] == [1, 3]


def test_missing_dataset(tmp_path):
    with pytest.raises(DatasetIOError):
        load_trajectories(tmp_path / "missing.jsonl")


def test_expert_file_is_not_a_deliberation_dataset(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    write_trajectories(experts[:2], path)
    with pytest.raises(DatasetValidationError) as info:
        load_deliberation(path)
    assert info.value.line == 1


def test_manifest_detects_changes(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    manifest = write_trajectories(experts[:2], path)
    assert manifest.verify() == manifest
    with path.open("a", encoding="utf-8") as f:
        f.write("\n")
    with pytest.raises(DatasetIOError):
        manifest.verify()


def test_describe_dataset_without_sidecar(tmp_path, corpus):
    _, experts = corpus
    path = tmp_path / "expert.jsonl"
    written = write_trajectories(experts[:2], path)
    (tmp_path / "expert.jsonl.manifest.json").unlink()
    described = describe_dataset(path)
    assert described.checksum == written.checksum
    assert described.trajectory_count == 2


def test_export_expert_chat(tmp_path, expert):
    path = tmp_path / "chat.jsonl"
    assert export_sft_chat([expert], path) == 1
    messages = json.loads(_lines(path)[0])["messages"]
    assert messages[0] == {"role": "system", "content": system_prompt("alfworld")}
    assert messages[1] == {"role": "user", "content": f"{expert.initial_observation.text}\nput the mug in the cabinet."}
    assert messages[1]["content"].startswith("You are in the hallway.")
    assert messages[2] == {
        "role": "assistant",
        "content": "Thought: To solve the task, I need to find the mug first.\nAction: go to kitchen",
    }
    assert messages[3]["role"] == "user"
    assert messages[3]["content"].startswith("You arrive at the kitchen.")
    assert messages[4] == {"role": "assistant", "content": "Action: open fridge"}
    assert messages[-1] == {
        "role": "assistant",
        "content": "Thought: Now I put the mug in the cabinet.\nAction: put mug in cabinet",
    }
    assert len(messages) == 11


def test_export_deliberation_chat(tmp_path, switched):
    path = tmp_path / "chat.jsonl"
    export_sft_chat([switched], path, "sciworld")
    messages = json.loads(_lines(path)[0])["messages"]
    assert messages[0]["content"] == system_prompt("sciworld")
    assert messages[-1]["content"].startswith("Thought: I have taken 3 steps so far")
    assert messages[-1]["content"].endswith("so I will do it now.\nAction: put mug on table")


def test_export_unknown_prompt(tmp_path, expert):
    with pytest.raises(ConfigError):
        export_sft_chat([expert], tmp_path / "chat.jsonl", "minecraft")


def test_iteration_state(tmp_path, corpus, switched):
    _, experts = corpus
    expert_manifest = write_trajectories(experts[:2], tmp_path / "expert.jsonl")
    first = write_deliberation([switched], tmp_path / "iter1" / "deliberation.jsonl")

    state = start(expert_manifest, total=1)
    assert state.k == 0 and not state.complete
    assert load_state(tmp_path) is None

    state = with_pending(state, first)
    save_state(state, tmp_path)
    assert load_state(tmp_path) == state

    trained = PolicyConfig(backend="tabular", path="trained.yaml")
    state = advance(state, first, trained)
    assert state.k == 1 and state.complete
    assert state.current_manifest == first
    assert state.history == (expert_manifest, first)
    assert state.pending is None
    assert state.policy == trained
    with pytest.raises(IterationCompleteError):
        advance(state, first)


def test_corrupt_iteration_state(tmp_path):
    (tmp_path / "state.json").write_text("{}", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_state(tmp_path)


def test_export_opens_like_inference(tmp_path, expert):
    path = tmp_path / "chat.jsonl"
    export_sft_chat([expert], path)
    exported = json.loads(_lines(path)[0])["messages"]
    seen = history_to_messages(expert.history(len(expert.steps)), system_prompt("alfworld"))
    assert exported[:2] == seen[:2]
    assert exported[2:-1] == seen[2:]


def test_export_without_reset_observation(tmp_path, expert):
    path = tmp_path / "chat.jsonl"
    export_sft_chat([expert.model_copy(update={"initial_observation": None})], path)
    messages = json.loads(_lines(path)[0])["messages"]
    assert messages[1] == {"role": "user", "content": "put the mug in the cabinet."}


def test_records_keep_the_reset_observation(tmp_path, expert, switched):
    path = tmp_path / "expert.jsonl"
    write_trajectories([expert], path)
    record = json.loads(_lines(path)[0])
    assert record["initial_observation"].startswith("You are in the hallway.")
    assert load_trajectories(path)[0].initial_observation == expert.initial_observation
    assert switched.initial_observation is not None
    assert switched.to_trajectory().initial_observation == switched.initial_observation
