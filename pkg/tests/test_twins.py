import json
from collections import Counter
from pathlib import Path

import httpx
import pytest

from bfmn.errors import AuthError, InsufficientTwins, MalformedAfterRetries, RateLimited
from bfmn.twins import (
    EDUCATIONS,
    GENDERS,
    SOCIOECONOMIC,
    ChatClient,
    EndpointConfig,
    MalformedReply,
    RequestLog,
    TwinProfile,
    TwinRun,
    likert_value,
    match_group_sizes,
    parse_association_reply,
    parse_masit_reply,
    render_prompt,
    request_key,
    run_twin,
    run_twins,
    sample_profile,
    twin_ids,
)

GOLDEN = json.loads((Path(__file__).parent / "golden" / "prompts.json").read_text(encoding="utf-8"))


def grid():
    for edu in EDUCATIONS:
        for g in GENDERS:
            for ses in SOCIOECONOMIC:
                hs = edu == "highschool_final_year"
                yield f"{edu}|{g}|{ses}", TwinProfile(g, 19 if hs else 20, edu, None if hs else 2, ses)


@pytest.mark.parametrize("lang", ["it", "en"])
def test_prompts_match_golden(lang):
    cases = dict(grid())
    assert len(cases) == 30
    for key, prof in cases.items():
        assert render_prompt(prof, lang) == GOLDEN[key][lang], key


def test_gender_slots_only():
    f = TwinProfile("female", 20, "bsc_psychology", 2, "medium")
    m = TwinProfile("male", 20, "bsc_psychology", 2, "medium")
    it_f = render_prompt(f)
    assert "una studentessa italiana di 20 anni" in it_f
    swapped = (it_f.replace("una studentessa italiana", "uno studente italiano")
               .replace("iscritta", "iscritto").replace("cresciuta", "cresciuto"))
    assert swapped == render_prompt(m)
    assert render_prompt(f, "en").startswith("You are a female student")


def test_profile_sampling():
    assert sample_profile(3, "bsc_physics") == sample_profile(3, "bsc_physics")
    ages = {sample_profile(s, "highschool_final_year").age for s in range(300)}
    assert ages == {18, 19}
    bands = Counter(sample_profile(s, "bsc_psychology").socioeconomic for s in range(10000))
    assert all(abs(bands[b] / 10000 - 0.2) < 0.02 for b in SOCIOECONOMIC)
    for s in range(300):
        p = sample_profile(s, "bsc_psychology")
        assert 18 <= p.age <= 25 and p.age >= 17 + p.year
    with pytest.raises(ValueError):
        TwinProfile("other", 20, "bsc_physics", 1, "low")


FIXTURES = {
    "well_formed": '{"associazioni": ["numeri", "ansia", "logica"], "valenze": [3, 4, 1, 5]}',
    "over_long": '{"associazioni": ["a", "b", "c", "d", "e"], "valenze": [3, 1, 2, 3, 4, 5]}',
    "word_likert": '```json\n{"associazioni": ["sole", "mare", "buio"], '
                   '"valenze": ["neutro", "molto positivo", "positivo", "boh"]}\n```',
    "malformed": "Certo! Ecco le mie associazioni: numeri, ansia, logica.",
}


def test_parser_fixtures():
    r = parse_association_reply(FIXTURES["well_formed"], "matematica")
    assert r.responses == ("numeri", "ansia", "logica")
    assert r.valences == {"matematica": 3, "numeri": 4, "ansia": 1, "logica": 5}

    r = parse_association_reply(FIXTURES["over_long"], "x")
    assert r.responses == ("a", "b", "c") and r.warnings
    assert r.valences == {"x": 3, "a": 1, "b": 2, "c": 3}

    r = parse_association_reply(FIXTURES["word_likert"], "estate")
    assert r.valences == {"estate": 3, "sole": 5, "mare": 4}
    assert "buio" in r.responses and any("unmappable" in w for w in r.warnings)

    with pytest.raises(MalformedReply):
        parse_association_reply(FIXTURES["malformed"], "matematica")


def test_likert_map_round_trip():
    for word, value in [("molto negativo", 1), ("negativo", 2), ("neutro", 3), ("positivo", 4),
                        ("molto positivo", 5), ("Molto Positiva.", 5), ("4", 4), (2.0, 2)]:
        assert likert_value(word) == value
    for bad in ("forse", 0, 6, 2.5, True, None):
        assert likert_value(bad) is None


def test_masit_reply():
    assert parse_masit_reply('{"risposte": [1, 2, "molto positivo"]}', 3) == [1, 2, 5]
    with pytest.raises(MalformedReply):
        parse_masit_reply('{"risposte": [1, 2]}', 3)


# -- endpoint behaviour with a mock transport ----------------------------------


class FakeEndpoint:
    """Chat endpoint double that answers from a script and counts calls."""

    def __init__(self, replies=None, statuses=None):
        self.replies = list(replies or [])
        self.statuses = list(statuses or [])
        self.calls = []

    def __call__(self, request):
        body = json.loads(request.content)
        self.calls.append(body)
        if self.statuses:
            status, headers = self.statuses.pop(0)
            if status != 200:
                return httpx.Response(status, headers=headers)
        cue = body["messages"][1]["content"].split('"')[1]
        text = self.replies.pop(0) if self.replies else \
            json.dumps({"associazioni": [f"{cue}_a", f"{cue}_b", f"{cue}_c"], "valenze": [3, 4, 2, 5]})
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "test-key")


def client_for(fake, **cfg):
    sleeps = []
    c = ChatClient(EndpointConfig(base_url="http://fake/v1", **cfg), transport=httpx.MockTransport(fake),
                   sleep=sleeps.append)
    return c, sleeps


def test_missing_key(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with pytest.raises(AuthError):
        ChatClient(EndpointConfig())


def test_auth_failure(api_key):
    c, _ = client_for(FakeEndpoint(statuses=[(401, {})]))
    with pytest.raises(AuthError):
        c.complete([{"role": "user", "content": '"x"'}])


def test_rate_limit_backoff(api_key):
    fake = FakeEndpoint(statuses=[(429, {"Retry-After": "7"}), (429, {}), (503, {}), (200, {})])
    c, sleeps = client_for(fake, backoff_base=0.5)
    reply = c.complete([{"role": "system", "content": ""}, {"role": "user", "content": '"x"'}])
    assert "x_a" in reply
    assert sleeps == [7.0, 1.0, 2.0]
    assert len(fake.calls) == 4


def test_persistent_rate_limit(api_key):
    c, sleeps = client_for(FakeEndpoint(statuses=[(429, {})] * 10), max_retries=3)
    with pytest.raises(RateLimited):
        c.complete([{"role": "user", "content": '"x"'}])
    assert len(sleeps) == 3


PROFILE = TwinProfile("female", 20, "bsc_psychology", 2, "medium")


def test_run_twin_and_resume(api_key, tmp_path):
    fake = FakeEndpoint()
    c, _ = client_for(fake)
    rlog = RequestLog(tmp_path / "log.jsonl")
    run = run_twin("gpt_oss_psychology_001", PROFILE, ["uno", "due"], c, rlog)
    assert [r.responses for r in run.parsed] == [("uno_a", "uno_b", "uno_c"), ("due_a", "due_b", "due_c")]
    assert run.parsed[0].group_tag == "gpt_psychology"
    assert len(fake.calls) == 2

    again = run_twin("gpt_oss_psychology_001", PROFILE, ["uno", "due", "tre"], c, RequestLog(tmp_path / "log.jsonl"))
    assert len(fake.calls) == 3  # only the new cue was requested
    assert again.parsed[:2] == run.parsed
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert len(lines) == 3 and {"ts", "profile_hash", "cue", "reply"} <= json.loads(lines[0]).keys()


def test_malformed_then_missing(api_key, tmp_path):
    fake = FakeEndpoint(replies=["nope"] * 3)
    c, _ = client_for(fake, reparse_attempts=2)
    run = run_twin("gpt_oss_physics_001", PROFILE, ["x"], c, RequestLog(tmp_path / "l.jsonl"))
    assert run.parsed[0].responses == () and len(fake.calls) == 3
    assert fake.calls[1]["messages"][-1]["role"] == "user" and len(fake.calls[1]["messages"]) == 3
    fake2 = FakeEndpoint(replies=["nope"] * 3)
    c2, _ = client_for(fake2, reparse_attempts=2)
    with pytest.raises(MalformedAfterRetries):
        run_twin("p_1", PROFILE, ["x"], c2, RequestLog(tmp_path / "m.jsonl"), strict=True)


def test_request_key_includes_participant():
    assert request_key("a", PROFILE, "association", "x") != request_key("b", PROFILE, "association", "x")


def test_run_twins_pool(api_key, tmp_path):
    fake = FakeEndpoint()
    c, _ = client_for(fake, max_in_flight=3)
    ids = twin_ids("highschool_final_year", 5)
    assert ids[0] == "gpt_oss_highschool_001"
    runs = run_twins([(i, sample_profile(i, "highschool_final_year")) for i in ids], ["a", "b"], c,
                     RequestLog(tmp_path / "l.jsonl"))
    assert [r.participant_id for r in runs] == ids and len(fake.calls) == 10


def fake_runs(n, group="highschool"):
    return [TwinRun(f"gpt_oss_{group}_{i:03d}", group, PROFILE, None, {}, [], None, "m") for i in range(n)]


def test_match_group_sizes():
    runs = fake_runs(100)
    kept = match_group_sizes(runs, {"highschool": 62}, seed=1)
    assert len(kept) == 62 and kept == match_group_sizes(runs, {"highschool": 62}, seed=1)
    assert match_group_sizes(runs, {"highschool": 100}, seed=0) == runs
    assert match_group_sizes(runs, {"highschool": 0}, seed=0) == []
    with pytest.raises(InsufficientTwins):
        match_group_sizes(runs, {"highschool": 101}, seed=0)
