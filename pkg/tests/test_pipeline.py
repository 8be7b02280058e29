import json
import threading

import httpx
import numpy as np
import pytest

from sand.core.errors import PolicyUnavailableError
from sand.core.text import is_deliberative_text
from sand.core.types import Observation
from sand.core.utils import derive_seed, stable_key
from sand.deliberation.pipeline import DeliberationSettings, synthesize_dataset
from sand.deliberation.sampler import needs_deliberation, scan_trajectory
from sand.env.task import index_specs
from sand.env.textgrid import TextGridEnv
from sand.metrics.analysis import deliberation_rate
from sand.policy.base import CompletionModel, PolicyConfig
from sand.policy.remote import RemoteChatPolicy
from sand.policy.stub import TemplateStubPolicy
from sand.policy.tabular import TabularPolicy

SEED = 5


class Unreachable(CompletionModel):
    def complete_text(self, prompt, temperature):
        raise PolicyUnavailableError("no route to model")


def _run(policy, base, corpus, jobs=1, settings=None, trajectories=None):
    specs, experts = corpus
    return synthesize_dataset(
        policy,
        base,
        TextGridEnv(),
        index_specs(specs),
        trajectories if trajectories is not None else experts,
        settings or DeliberationSettings(n=5),
        seed=SEED,
        iteration=1,
        jobs=jobs,
        progress=False,
    )


@pytest.fixture(scope="module")
def mixed(corpus):
    _, experts = corpus
    return TabularPolicy.from_trajectories(experts, expert_mass=0.6, distractors=("look",))


def test_point_mass_policy_reproduces_the_experts(corpus, stub):
    _, experts = corpus
    result = _run(TabularPolicy.from_trajectories(experts), stub, corpus, jobs=4)
    assert result.flagged == 0
    assert result.completions == 0
    assert not result.rejects
    for d, e in zip(result.trajectories, experts):
        assert [s.as_step().sample for s in d.steps] == [s.sample for s in e.steps]
        assert [s.observation for s in d.steps] == [s.observation for s in e.steps]
        assert d.reward == e.reward
        assert deliberation_rate(d) == 0.0


def test_flagged_steps_match_the_sampler(corpus, stub, mixed):
    specs, experts = corpus
    result = _run(mixed, stub, corpus, jobs=4)
    assert not result.rejects
    assert result.switches == 0

    expected = 0
    for spec, e, d in zip(specs, experts, result.trajectories):
        scanned = scan_trajectory(mixed, TextGridEnv(), spec, e, 5, derive_seed(SEED, stable_key(e.id)))
        flags = [needs_deliberation(c) for c in scanned]
        expected += sum(flags)
        assert [s.deliberated for s in d.steps] == flags
        assert [is_deliberative_text(s.thought.text) for s in d.steps] == flags
        assert deliberation_rate(d) == deliberation_rate(d.to_trajectory())
        assert [s.action for s in d.steps] == [s.action for s in e.steps]
    assert result.flagged == expected > 0
    # two critiques and one deliberation per flagged step
    assert result.completions == 3 * expected


def test_results_do_not_depend_on_jobs(corpus, stub, mixed):
    serial = _run(mixed, stub, corpus, jobs=1)
    parallel = _run(mixed, stub, corpus, jobs=8)
    assert serial.trajectories == parallel.trajectories


def test_failures_are_quarantined(corpus, stub, mixed):
    specs, experts = corpus
    steps = list(experts[1].steps)
    steps[0] = steps[0].model_copy(update={"observation": Observation(text="elsewhere")})
    tampered = experts[1].model_copy(update={"steps": tuple(steps)})
    orphan = experts[2].model_copy(update={"id": "orphan", "instruction": experts[2].instruction.model_copy(update={"id": "orphan"})})

    result = _run(mixed, stub, corpus, trajectories=[experts[0], tampered, orphan, experts[3]])
    assert [d.id for d in result.trajectories] == [experts[0].id, experts[3].id]
    assert [(r.id, r.error) for r in result.rejects] == [
        (experts[1].id, "ReplayDivergenceError"),
        ("orphan", "PreconditionError"),
    ]
    assert result.reject_rate == 0.5


def test_unreachable_base_model_aborts(corpus, mixed):
    with pytest.raises(PolicyUnavailableError):
        _run(mixed, Unreachable(), corpus)


def _flaky_base(failure_rate=0.10, timeout_rate=0.05, seed=11, retries=8):
    """A remote base model whose endpoint fails at random and otherwise answers like the stub."""
    rng = np.random.default_rng(seed)
    answers = TemplateStubPolicy()
    lock = threading.Lock()
    faults = {"500": 0, "timeout": 0}

    def handler(request):
        with lock:
            roll = rng.random()
            fault = "500" if roll < failure_rate else "timeout" if roll < failure_rate + timeout_rate else None
            if fault is not None:
                faults[fault] += 1
        if fault == "500":
            return httpx.Response(500, json={"error": {"message": "boom"}})
        if fault == "timeout":
            raise httpx.ReadTimeout("timed out", request=request)
        prompt = json.loads(request.content)["messages"][-1]["content"]
        message = {"role": "assistant", "content": answers.complete_text(prompt, 0.0)}
        return httpx.Response(
            200,
            json={
                "id": "cmpl",
                "object": "chat.completion",
                "created": 0,
                "model": "base",
                "choices": [{"index": 0, "message": message, "finish_reason": "stop"}],
            },
        )

    config = PolicyConfig(
        backend="remote_chat", model="base", endpoint="http://base/v1", retries=retries, backoff=0.0
    )
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return RemoteChatPolicy(config, http_client=client, sleep=lambda _: None), faults


def test_synthesis_survives_a_flaky_base_model(corpus, stub, mixed):
    _, experts = corpus
    base, faults = _flaky_base()
    result = _run(mixed, base, corpus, trajectories=experts[:10])
    assert not result.rejects
    assert len(result.trajectories) == 10
    assert faults["500"] > 0 and faults["timeout"] > 0

    reference = _run(mixed, stub, corpus, trajectories=experts[:10])
    assert result.trajectories == reference.trajectories
    assert result.completions == reference.completions


def test_base_model_outage_aborts_synthesis(corpus, mixed):
    _, experts = corpus
    base, faults = _flaky_base(failure_rate=1.0, retries=2)
    with pytest.raises(PolicyUnavailableError):
        _run(mixed, base, corpus, trajectories=experts[:10])
    assert faults["500"] >= 2
