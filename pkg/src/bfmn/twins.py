"""LLM "digital twin" participants: persona sampling, prompt rendering,
chat-completions requests and reply parsing into association records."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

import httpx

from .errors import AuthError, EndpointError, InsufficientTwins, MalformedAfterRetries, RateLimited
from .ingestion import MAX_RESPONSES, AssociationRecord, MasItScore, group_tag_from_id, normalize_word

log = logging.getLogger(__name__)

GENDERS = ("male", "female")
EDUCATIONS = ("highschool_final_year", "bsc_psychology", "bsc_physics")
SOCIOECONOMIC = ("low", "medium_low", "medium", "medium_high", "high")
EDUCATION_GROUP = {
    "highschool_final_year": "highschool",
    "bsc_psychology": "psychology",
    "bsc_physics": "physics",
}
# final-year high schoolers are 17-19; clamped to adults
AGE_RANGES = {
    "highschool_final_year": (18, 19),
    "bsc_psychology": (18, 25),
    "bsc_physics": (18, 25),
}


@dataclass(frozen=True)
class TwinProfile:
    gender: str
    age: int
    education: str
    year: int | None  # None = final year of high school
    socioeconomic: str

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValueError(f"gender {self.gender!r}")
        if self.education not in EDUCATIONS:
            raise ValueError(f"education {self.education!r}")
        if self.socioeconomic not in SOCIOECONOMIC:
            raise ValueError(f"socioeconomic band {self.socioeconomic!r}")
        if not 18 <= self.age <= 25:
            raise ValueError(f"age {self.age} outside 18..25")
        if self.education == "highschool_final_year":
            if self.year is not None:
                raise ValueError("high-school profiles have no BSc year")
        elif self.year not in (1, 2, 3):
            raise ValueError(f"BSc year {self.year!r}")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def sample_profile(rng_seed, education_target: str) -> TwinProfile:
    """Uniform draw of every attribute within its range. BSc students in
    year y are at least 17 + y years old."""
    if education_target not in EDUCATIONS:
        raise ValueError(f"unknown education target {education_target!r}")
    rng = random.Random(rng_seed)
    gender = rng.choice(GENDERS)
    lo, hi = AGE_RANGES[education_target]
    if education_target == "highschool_final_year":
        year = None
    else:
        year = rng.randint(1, 3)
        lo = max(lo, 17 + year)
    age = rng.randint(lo, hi)
    return TwinProfile(gender, age, education_target, year, rng.choice(SOCIOECONOMIC))


# -- prompts ---------------------------------------------------------------

_IT_GENDER = {
    "male": {"un": "uno", "student": "studente", "italian": "italiano",
             "iscritt": "iscritto", "cresciut": "cresciuto"},
    "female": {"un": "una", "student": "studentessa", "italian": "italiana",
               "iscritt": "iscritta", "cresciut": "cresciuta"},
}
_IT_YEAR = {1: "primo", 2: "secondo", 3: "terzo", None: "quinto"}
_IT_EDUCATION = {
    "highschool_final_year": "scuola superiore",
    "bsc_psychology": "laurea triennale in Psicologia",
    "bsc_physics": "laurea triennale in Fisica",
}
_IT_SES = {"low": "basse", "medium_low": "medio-basse", "medium": "medie",
           "medium_high": "medio-alte", "high": "alte"}
_IT_TEMPLATE = (
    "Sei {un} {student} {italian} di {age} anni. Sei {iscritt} al {year} anno di {education}. "
    "Sei {cresciut} e vivi in condizioni socio-economiche {socioeconomic}. Pertanto, ricorda che "
    "le risposte da fornire nel compito devono essere originali, creative e coerenti con le tue "
    "caratteristiche uniche."
)

_EN_YEAR = {1: "first", 2: "second", 3: "third", None: "final"}
_EN_EDUCATION = {
    "highschool_final_year": "high school",
    "bsc_psychology": "a BSc in Psychology",
    "bsc_physics": "a BSc in Physics",
}
_EN_SES = {"low": "low", "medium_low": "medium-low", "medium": "medium",
           "medium_high": "medium-high", "high": "high"}
_EN_TEMPLATE = (
    "You are a {gender} student of Italian nationality, aged {age}. You are enrolled in the {year} "
    "year of {education}. You grew up and live in {socioeconomic} socio-economic conditions. "
    "Therefore, remember that the responses you provide in the task should be original, creative, "
    "and consistent with your unique characteristics."
)


def render_prompt(profile: TwinProfile, language: str = "it") -> str:
    if language == "it":
        return _IT_TEMPLATE.format(
            age=profile.age,
            year=_IT_YEAR[profile.year],
            education=_IT_EDUCATION[profile.education],
            socioeconomic=_IT_SES[profile.socioeconomic],
            **_IT_GENDER[profile.gender],
        )
    if language == "en":
        return _EN_TEMPLATE.format(
            gender=profile.gender,
            age=profile.age,
            year=_EN_YEAR[profile.year],
            education=_EN_EDUCATION[profile.education],
            socioeconomic=_EN_SES[profile.socioeconomic],
        )
    raise ValueError(f"unsupported language {language!r}")


_TASK = {
    "it": (
        'Parola stimolo: "{cue}". Scrivi le prime tre parole che ti vengono in mente leggendo questa '
        "parola. Poi valuta la valenza emotiva della parola stimolo e di ciascuna delle tue parole su "
        "una scala da 1 (molto negativo) a 5 (molto positivo), dove 3 significa neutro. Rispondi solo "
        'con un oggetto JSON nel formato {{"associazioni": ["...", "...", "..."], '
        '"valenze": [valenza_stimolo, valenza_1, valenza_2, valenza_3]}}.'
    ),
    "en": (
        'Cue word: "{cue}". Write the first three words that come to mind when reading this word. '
        "Then rate the emotional valence of the cue word and of each of your words on a scale from "
        "1 (very negative) to 5 (very positive), where 3 means neutral. Reply only with a JSON object "
        'in the format {{"associations": ["...", "...", "..."], '
        '"valences": [cue_valence, valence_1, valence_2, valence_3]}}.'
    ),
}
_MASIT_TASK = {
    "it": (
        "Indica quanto ti sentiresti in ansia in ciascuna delle seguenti situazioni, da 1 (per niente "
        "in ansia) a 5 (molto in ansia). Rispondi solo con un oggetto JSON nel formato "
        '{{"risposte": [..]}} con {n} numeri interi, uno per situazione, nello stesso ordine.\n{items}'
    ),
    "en": (
        "Indicate how anxious you would feel in each of the following situations, from 1 (not anxious "
        'at all) to 5 (very anxious). Reply only with a JSON object in the format {{"answers": [..]}} '
        "with {n} integers, one per situation, in the same order.\n{items}"
    ),
}
_REMINDER = {
    "it": "Rispondi esclusivamente con l'oggetto JSON richiesto, senza altro testo.",
    "en": "Reply with the requested JSON object only, with no other text.",
}


def render_task(cue: str, language: str = "it") -> str:
    return _TASK[language].format(cue=cue)


def render_masit_task(items: Sequence[str], language: str = "it") -> str:
    listing = "\n".join(f"{i}. {text}" for i, text in enumerate(items, 1))
    return _MASIT_TASK[language].format(n=len(items), items=listing)


# -- reply parsing -----------------------------------------------------------

LIKERT_WORDS = {
    "molto negativo": 1, "molto negativa": 1, "negativo": 2, "negativa": 2,
    "neutro": 3, "neutra": 3, "neutrale": 3, "positivo": 4, "positiva": 4,
    "molto positivo": 5, "molto positiva": 5,
    "very negative": 1, "negative": 2, "neutral": 3, "positive": 4, "very positive": 5,
}
_ASSOC_KEYS = ("associazioni", "associations", "parole", "words")
_VALENCE_KEYS = ("valenze", "valences", "valenza", "valence", "ratings")
_MASIT_KEYS = ("risposte", "answers", "responses")
_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


class MalformedReply(ValueError):
    pass


def likert_value(value) -> int | None:
    """Map a model rating (int, numeric string or Likert phrase) to 1..5; None if unmappable."""
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return int(value) if float(value).is_integer() and 1 <= value <= 5 else None
    if isinstance(value, str):
        text = normalize_word(value).strip(" .!")
        try:
            return likert_value(float(text))
        except ValueError:
            return LIKERT_WORDS.get(text)
    return None


def _extract_json(text: str) -> dict:
    candidates = [text.strip()]
    candidates += [m.strip() for m in _FENCE.findall(text)]
    start, end = text.find("{"), text.rfind("}")
    if start != -1 and end > start:
        candidates.append(text[start:end + 1])
    for cand in candidates:
        try:
            obj = json.loads(cand)
        except (json.JSONDecodeError, TypeError):
            continue
        if isinstance(obj, dict):
            return obj
    raise MalformedReply("no JSON object in reply")


def _first_key(obj: Mapping, keys: Sequence[str]):
    lowered = {str(k).lower(): v for k, v in obj.items()}
    for k in keys:
        if k in lowered:
            return lowered[k]
    return None


@dataclass
class ParsedReply:
    responses: tuple[str, ...]
    valences: dict[str, int]
    warnings: list[str] = field(default_factory=list)


def parse_association_reply(text: str, cue: str) -> ParsedReply:
    """Parse a structured reply into at most 3 responses plus ratings.

    Valences may be positional (``[cue, r1, r2, r3]`` or ``[r1, r2, r3]``) or a
    word -> rating object. Extra associations are truncated; unmappable
    ratings leave the word unrated.
    """
    obj = _extract_json(text)
    assoc = _first_key(obj, _ASSOC_KEYS)
    if not isinstance(assoc, list):
        raise MalformedReply("missing associations list")
    warnings: list[str] = []
    raw_words = [normalize_word(a) if isinstance(a, str) else "" for a in assoc]
    raw_vals = _first_key(obj, _VALENCE_KEYS)
    cue_rating = None
    word_ratings: list = [None] * len(raw_words)
    if isinstance(raw_vals, list):
        if len(raw_vals) == len(raw_words) + 1:
            cue_rating, word_ratings = raw_vals[0], list(raw_vals[1:])
        elif len(raw_vals) == len(raw_words):
            word_ratings = list(raw_vals)
        else:
            warnings.append(f"{len(raw_vals)} ratings for {len(raw_words)} associations; ignored")
    elif isinstance(raw_vals, dict):
        by_word = {normalize_word(str(k)): v for k, v in raw_vals.items()}
        cue_rating = by_word.get(cue)
        word_ratings = [by_word.get(w) for w in raw_words]
    pairs = [(w, r) for w, r in zip(raw_words, word_ratings) if w]
    if len(pairs) > MAX_RESPONSES:
        warnings.append(f"{len(pairs)} associations given; keeping the first {MAX_RESPONSES}")
        pairs = pairs[:MAX_RESPONSES]
    valences: dict[str, int] = {}
    for word, raw in [(cue, cue_rating), *pairs]:
        if raw is None:
            continue
        value = likert_value(raw)
        if value is None:
            warnings.append(f"unmappable rating {raw!r} for {word!r}; left unrated")
        else:
            valences.setdefault(word, value)
    for w in warnings:
        log.warning("cue %r: %s", cue, w)
    return ParsedReply(tuple(w for w, _ in pairs), valences, warnings)


def parse_masit_reply(text: str, n_items: int) -> list[int]:
    obj = _extract_json(text)
    answers = _first_key(obj, _MASIT_KEYS)
    if not isinstance(answers, list) or len(answers) != n_items:
        raise MalformedReply(f"expected {n_items} answers")
    values = [likert_value(a) for a in answers]
    if any(v is None for v in values):
        raise MalformedReply("answer outside 1..5")
    return values


# -- endpoint ---------------------------------------------------------------


@dataclass
class EndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-oss-20b"
    temperature: float | None = None
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_retries: int = 5
    reparse_attempts: int = 2
    max_in_flight: int = 4
    backoff_base: float = 1.0
    backoff_max: float = 60.0
    language: str = "it"


class ChatClient:
    """Minimal OpenAI-compatible ``/chat/completions`` client.

    429 and 5xx responses are retried with exponential backoff (honouring
    ``Retry-After``); 401/403 raise :class:`AuthError` immediately.
    """

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        key = os.environ.get(config.api_key_env, "").strip()
        if not key:
            raise AuthError(f"environment variable {config.api_key_env} is not set")
        self.config = config
        self._sleep = sleep
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            headers={"Authorization": f"Bearer {key}"},
            timeout=config.timeout,
            transport=transport,
        )

    def close(self) -> None:
        self._http.close()

    def _delay(self, attempt: int, response: httpx.Response | None) -> float:
        if response is not None:
            retry_after = response.headers.get("retry-after")
            if retry_after:
                try:
                    return min(float(retry_after), self.config.backoff_max)
                except ValueError:
                    pass
        return min(self.config.backoff_base * 2**attempt, self.config.backoff_max)

    def complete(self, messages: list[dict]) -> str:
        body: dict = {"model": self.config.model, "messages": messages}
        if self.config.temperature is not None:
            body["temperature"] = self.config.temperature
        for attempt in range(self.config.max_retries + 1):
            last = attempt == self.config.max_retries
            try:
                resp = self._http.post("/chat/completions", json=body)
            except httpx.TransportError as exc:
                if last:
                    raise EndpointError(f"transport failure: {exc}") from exc
                self._sleep(self._delay(attempt, None))
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint refused credentials ({resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                if last:
                    if resp.status_code == 429:
                        raise RateLimited("rate limit persisted after retries")
                    raise EndpointError(f"server error {resp.status_code}")
                self._sleep(self._delay(attempt, resp))
                continue
            if resp.status_code >= 400:
                raise EndpointError(f"request rejected ({resp.status_code}): {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                return ""
            return content or ""
        raise EndpointError("unreachable")


class RequestLog:
    """Append-only JSON-lines log of every request attempt; also the resume index."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, list[dict]] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._entries.setdefault(entry["key"], []).append(entry)

    def entries(self, key: str) -> list[dict]:
        with self._lock:
            return list(self._entries.get(key, ()))

    def append(self, entry: dict) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._entries.setdefault(entry["key"], []).append(entry)


def request_key(participant_id: str, profile: TwinProfile, kind: str, item: str) -> str:
    blob = "|".join([participant_id, profile.digest(), kind, item])
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class TwinRun:
    participant_id: str
    group: str
    profile: TwinProfile
    cue_set_id: str | None
    raw_responses: dict[str, str]
    parsed: list[AssociationRecord]
    mas_it: MasItScore | None
    model_id: str
    request_log: list[dict] = field(default_factory=list)


def _ask(client: ChatClient, rlog: RequestLog, key: str, participant_id: str, profile: TwinProfile,
         kind: str, item: str, messages: list[dict], parse: Callable[[str], object],
         attempts: int, language: str):
    """Return (raw reply, parsed value) reusing logged replies; (None, None) when
    every allowed attempt was malformed."""
    prior = rlog.entries(key)
    for entry in prior:
        if entry["ok"]:
            return entry["reply"], parse(entry["reply"]), []
    new_entries = []
    for attempt in range(len(prior), attempts):
        msgs = list(messages)
        if attempt:
            msgs.append({"role": "user", "content": _REMINDER[language]})
        reply = client.complete(msgs)
        try:
            value = parse(reply)
            ok = True
        except MalformedReply:
            value, ok = None, False
        entry = {
            "ts": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "key": key,
            "participant_id": participant_id,
            "profile_hash": profile.digest(),
            "kind": kind,
            "cue": item,
            "attempt": attempt,
            "ok": ok,
            "reply": reply,
        }
        rlog.append(entry)
        new_entries.append(entry)
        if ok:
            return reply, value, new_entries
    log.warning("%s %s %r: malformed after %d attempts, marked missing", participant_id, kind, item, attempts)
    return None, None, new_entries


def run_twin(participant_id: str, profile: TwinProfile, cue_set: Sequence[str], client: ChatClient,
             rlog: RequestLog, cue_set_id: str | None = None,
             masit_items: Sequence[str] | None = None, strict: bool = False) -> TwinRun:
    """Ask one simulated participant every cue (and optionally the MAS-IT).

    Malformed replies are retried up to ``reparse_attempts`` extra times,
    after which the cue is recorded with no responses (or
    :class:`MalformedAfterRetries` is raised when ``strict``).
    """
    cfg = client.config
    language = cfg.language
    persona = render_prompt(profile, language)
    attempts = cfg.reparse_attempts + 1
    raw: dict[str, str] = {}
    records: list[AssociationRecord] = []
    entries: list[dict] = []
    group_tag = group_tag_from_id(participant_id)
    for cue in cue_set:
        messages = [{"role": "system", "content": persona},
                    {"role": "user", "content": render_task(cue, language)}]
        key = request_key(participant_id, profile, "association", cue)
        reply, parsed, new = _ask(client, rlog, key, participant_id, profile, "association", cue,
                                  messages, lambda t, c=cue: parse_association_reply(t, c),
                                  attempts, language)
        entries += new
        if reply is None:
            if strict:
                raise MalformedAfterRetries(f"{participant_id}: cue {cue!r}")
            records.append(AssociationRecord(participant_id, group_tag, cue))
            continue
        raw[cue] = reply
        records.append(AssociationRecord(participant_id, group_tag, cue, parsed.responses, parsed.valences))
    mas_it = None
    if masit_items:
        messages = [{"role": "system", "content": persona},
                    {"role": "user", "content": render_masit_task(masit_items, language)}]
        key = request_key(participant_id, profile, "masit", str(len(masit_items)))
        reply, answers, new = _ask(client, rlog, key, participant_id, profile, "masit", "mas-it",
                                   messages, lambda t: parse_masit_reply(t, len(masit_items)),
                                   attempts, language)
        entries += new
        if reply is not None:
            mas_it = MasItScore(participant_id, tuple(answers))
    return TwinRun(participant_id, EDUCATION_GROUP[profile.education], profile, cue_set_id, raw,
                   records, mas_it, cfg.model, entries)


def twin_ids(education: str, n: int, start: int = 1) -> list[str]:
    group = EDUCATION_GROUP[education]
    return [f"gpt_oss_{group}_{i:03d}" for i in range(start, start + n)]


def run_twins(participants: Sequence[tuple[str, TwinProfile]], cue_set: Sequence[str],
              client: ChatClient, rlog: RequestLog, cue_set_id: str | None = None,
              masit_items: Sequence[str] | None = None) -> list[TwinRun]:
    """Run many twins with at most ``max_in_flight`` participants in flight."""
    workers = max(1, client.config.max_in_flight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_twin, pid, prof, cue_set, client, rlog, cue_set_id, masit_items)
                   for pid, prof in participants]
        return [f.result() for f in futures]


def match_group_sizes(twins: Sequence[TwinRun], human_counts: Mapping[str, int], seed) -> list[TwinRun]:
    """Uniform subsample without replacement of each listed group down to
    the human count. Groups not listed pass through unchanged."""
    rng = random.Random(seed)
    by_group: dict[str, list[TwinRun]] = {}
    for t in twins:
        by_group.setdefault(t.group, []).append(t)
    out: list[TwinRun] = []
    for group in sorted(by_group):
        pool = sorted(by_group[group], key=lambda t: t.participant_id)
        if group not in human_counts:
            out += pool
            continue
        target = human_counts[group]
        if target > len(pool):
            raise InsufficientTwins(f"{group}: need {target}, have {len(pool)}")
        out += sorted(rng.sample(pool, target), key=lambda t: t.participant_id)
    return out

