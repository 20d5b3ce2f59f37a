"""Semantic reasoning backends.

Three capabilities are needed by the pipeline:

* instruction parsing: free text -> target object + optional region hint
* region proposal: a window's object labels -> candidate regions, most likely first
* region prioritization: scene regions + target -> search order

``MockBackend`` answers all three from an affinity table and a lexicon and
is a pure function of its inputs.  ``RemoteBackend`` speaks the same JSON
message shapes to an OpenAI-style chat-completion endpoint.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

REGION_PROPOSAL_SYSTEM = (
    'The user will give you a list of objects inside a region and a list of region candidates '
    'in JSON format {"objects": [object_1, object_2, ...], "region_candidates": '
    '[region_candidate_1, region_candidate_2, ...]}, please order these regions in decreasing '
    'order of likelihood and return just in JSON format {"region_proposals": [region_1, '
    'region_2, ...]}, do not reply markdown format.'
)

PARSING_SYSTEM = (
    'The user will give you an instruction in natural language about something ("target object") '
    'he/she wants to find, and the user may or may not give further guess about what region the '
    'target object may be located. Please turn the instruction into JSON format {"target_object": '
    'target_object, "region": region}, where region shall be set as null if the user does not give '
    'further guess about region, do not reply markdown format.'
)

PRIORITIZATION_SYSTEM = (
    'The user will give you a list of region names in JSON format {"regions": [region_1, '
    'region_2, ...], "target_object": object_name}, and the name of a target object he/she wants '
    'to find, please proposal a list containing the names of these regions in descending order of '
    'priority to search, and return in JSON format {"ordered_regions": [ordered_region_1, '
    'ordered_region_2, ...]}, do not reply markdown format.'
)

# Not a published protocol; the verifier prompt is ours.
APPROVAL_SYSTEM = (
    'You verify object detections. The user describes an image crop and names an object. '
    'Reply in JSON format {"approved": true or false, "confidence": number between 0 and 1}, '
    'do not reply markdown format.'
)

DEFAULT_TIMEOUT = 30.0
DEFAULT_RETRIES = 1
DEFAULT_MAX_IN_FLIGHT = 4


class BackendError(RuntimeError):
    """A backend call failed or kept returning schema-invalid replies."""


@dataclass(frozen=True)
class ParsedInstruction:
    target_object: str
    region_hint: Optional[str] = None

    def __post_init__(self):
        if not self.target_object or not self.target_object.strip():
            raise BackendError("parsed instruction has an empty target object")

    def to_json(self) -> dict:
        return {"target_object": self.target_object, "region": self.region_hint}


# -- request/response shapes --------------------------------------------------

def region_proposal_request(objects: Sequence[str], candidates: Sequence[str]) -> dict:
    return {"objects": list(objects), "region_candidates": list(candidates)}


def prioritization_request(regions: Sequence[str], target: str) -> dict:
    return {"regions": list(regions), "target_object": target}


def chat_messages(system: str, user: str) -> list:
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


_FENCE = re.compile(r"^\s*```[a-zA-Z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)


def decode_reply(text: str):
    """Decode a model reply into Python data.

    Markdown code fences are stripped.  Strict JSON is tried first, then a
    Python literal, which covers replies written with single quotes and
    ``None``.
    """
    if not isinstance(text, str):
        raise BackendError(f"reply is not text: {type(text).__name__}")
    m = _FENCE.match(text)
    body = (m.group(1) if m else text).strip()
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        pass
    try:
        return ast.literal_eval(body)
    except (ValueError, SyntaxError) as exc:
        raise BackendError(f"reply is neither JSON nor a literal: {body[:80]!r}") from exc


def _permutation(reply, key: str, items: Sequence[str]) -> list:
    if not isinstance(reply, dict) or key not in reply:
        raise BackendError(f"reply lacks '{key}'")
    ordered = reply[key]
    if not isinstance(ordered, list) or not all(isinstance(s, str) for s in ordered):
        raise BackendError(f"'{key}' is not a list of strings")
    if sorted(ordered) != sorted(items):
        raise BackendError(f"'{key}' is not a permutation of the input: {ordered}")
    return list(ordered)


def validate_region_proposals(reply, candidates: Sequence[str]) -> list:
    return _permutation(reply, "region_proposals", candidates)


def validate_ordered_regions(reply, regions: Sequence[str]) -> list:
    return _permutation(reply, "ordered_regions", regions)


def validate_parsed(reply) -> ParsedInstruction:
    if not isinstance(reply, dict) or "target_object" not in reply:
        raise BackendError("reply lacks 'target_object'")
    target = reply["target_object"]
    region = reply.get("region")
    if not isinstance(target, str) or not target.strip():
        raise BackendError("'target_object' must be a non-empty string")
    if region is not None and not isinstance(region, str):
        raise BackendError("'region' must be a string or null")
    if isinstance(region, str) and (not region.strip() or region.strip().lower() in ("none", "null")):
        region = None
    return ParsedInstruction(target.strip(), region.strip() if region else None)


# -- reprioritization ----------------------------------------------------------

def match_region(hint: Optional[str], regions: Iterable[str]) -> Optional[str]:
    """The region whose name equals ``hint`` ignoring case, if any."""
    if hint is None:
        return None
    key = hint.strip().lower()
    for r in regions:
        if r.lower() == key:
            return r
    return None


def reprioritize(ordered: Sequence[str], hint: Optional[str]) -> list:
    """Move the hinted region to the front; unknown hints leave the order alone."""
    ordered = list(ordered)
    match = match_region(hint, ordered)
    if match is None:
        if hint is not None:
            log.warning("region hint %r matches no region in %s", hint, ordered)
        return ordered
    return [match] + [r for r in ordered if r != match]


# -- mock backend -----------------------------------------------------------------

class AffinityTable:
    """Object/region relevance scores in [0, 1]; unseen pairs score 0."""

    def __init__(self, scores: Optional[dict] = None):
        self._scores = {}
        for obj, row in (scores or {}).items():
            for region, value in row.items():
                self.set(obj, region, value)

    def set(self, obj: str, region: str, value: float) -> None:
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"affinity({obj!r}, {region!r}) = {value} outside [0, 1]")
        self._scores[(obj.lower(), region.lower())] = value

    def __call__(self, obj: str, region: str) -> float:
        return self._scores.get((obj.lower(), region.lower()), 0.0)

    @property
    def objects(self) -> list:
        return sorted({o for o, _ in self._scores})

    @property
    def regions(self) -> list:
        return sorted({r for _, r in self._scores})

    def to_dict(self) -> dict:
        out: dict = {}
        for (o, r), v in sorted(self._scores.items()):
            out.setdefault(o, {})[r] = v
        return out


def _find_phrase(text: str, phrases: Iterable[str]):
    """Longest phrase occurring in ``text`` on word boundaries -> (phrase, span)."""
    best = None
    for phrase in sorted(set(phrases), key=lambda p: (-len(p), p)):
        m = re.search(r"(?<![\w])" + re.escape(phrase.lower()) + r"(?![\w])", text)
        if m:
            best = (phrase, m.span())
            break
    return best


_ARTICLE_NOUN = re.compile(
    r"\b(?:fetch|bring|get|find|grab|pick up|take)\b(?:\s+me)?\s+(?:the|a|an|my|some)?\s*"
    r"([a-z][a-z ]*?)(?:\s+(?:from|in|on|at|near)\b|[.!?]|$)")


class MockBackend:
    """Deterministic stand-in for the language models.

    * ``propose_regions`` ranks candidates by the summed affinity of the
      window's objects
    * ``prioritize_regions`` ranks regions by affinity to the target
    * ``parse_instruction`` matches the longest region name, masks it, then
      the longest object name
    Ties keep input order.
    """

    name = "mock"

    def __init__(self, affinity: AffinityTable, objects: Iterable[str] = (), regions: Iterable[str] = ()):
        self.affinity = affinity
        self.object_lexicon = sorted(set(o.lower() for o in objects) | set(affinity.objects))
        self.region_lexicon = sorted(set(r.lower() for r in regions) | set(affinity.regions))

    def parse_instruction(self, text: str) -> ParsedInstruction:
        if not text or not text.strip():
            raise BackendError("empty instruction")
        low = " ".join(text.lower().split())
        region = _find_phrase(low, self.region_lexicon)
        rest = low
        if region is not None:
            s, e = region[1]
            rest = low[:s] + " " * (e - s) + low[e:]
        obj = _find_phrase(rest, self.object_lexicon)
        if obj is not None:
            target = obj[0]
        else:
            m = _ARTICLE_NOUN.search(rest)
            target = m.group(1).strip() if m and m.group(1).strip() else low.strip(" .!?")
        return ParsedInstruction(target, region[0] if region else None)

    def propose_regions(self, objects: Sequence[str], candidates: Sequence[str]) -> list:
        if not objects or not candidates:
            raise BackendError("propose_regions needs objects and candidates")
        score = [sum(self.affinity(o, c) for o in objects) for c in candidates]
        order = sorted(range(len(candidates)), key=lambda i: (-score[i], i))
        return [candidates[i] for i in order]

    def prioritize_regions(self, regions: Sequence[str], target: str) -> list:
        if not regions:
            raise BackendError("prioritize_regions needs regions")
        order = sorted(range(len(regions)), key=lambda i: (-self.affinity(target, regions[i]), i))
        return [regions[i] for i in order]


class RandomPrioritizer:
    """Control-group prioritizer: a seeded uniform permutation, ignoring the target."""

    name = "random"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def prioritize_regions(self, regions: Sequence[str], target: str) -> list:
        regions = list(regions)
        return [regions[i] for i in self.rng.permutation(len(regions))]


# -- detection approval -----------------------------------------------------------

@dataclass(frozen=True)
class DetectionEvidence:
    """What the approver gets to look at.

    In simulation ``genuine`` is the hidden ground truth; a remote approver
    only sees ``description``.
    """

    label: str
    genuine: bool
    description: str = ""


class SimulatedApprover:
    """Bernoulli verifier: accepts genuine proposals with ``true_accept`` and
    spurious ones with ``false_accept``."""

    def __init__(self, true_accept: float, false_accept: float):
        self.true_accept = true_accept
        self.false_accept = false_accept

    def approve_detection(self, evidence: DetectionEvidence, label: str, rng: np.random.Generator):
        if not label:
            raise BackendError("claimed label must be non-empty")
        p = self.true_accept if evidence.genuine else self.false_accept
        ok = bool(rng.random() < p)
        return ok, (p if ok else 1.0 - p)


# -- remote backend ------------------------------------------------------------------

def urllib_transport(url: str, body: dict, headers: dict, timeout: float) -> dict:
    req = urllib.request.Request(url, data=json.dumps(body).encode("utf-8"), headers=headers,
                                 method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
        raise BackendError(f"request to {url} failed: {exc}") from exc


class RemoteBackend:
    """Chat-completion client for the three semantic capabilities.

    Configuration falls back to ``SEMOVMM_API_BASE``, ``SEMOVMM_API_KEY``
    and ``SEMOVMM_MODEL``.  ``transport(url, body, headers, timeout)`` can
    be swapped out; it must return the decoded response object.
    """

    name = "remote"

    def __init__(
        self,
        base_url: Optional[str] = None,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        transport: Callable = urllib_transport,
    ):
        self.base_url = base_url or os.environ.get("SEMOVMM_API_BASE", "http://localhost:8000/v1")
        self.model = model or os.environ.get("SEMOVMM_MODEL", "gpt-4o")
        self.api_key = api_key if api_key is not None else os.environ.get("SEMOVMM_API_KEY")
        self.timeout = timeout
        self.retries = retries
        self.transport = transport
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def request_body(self, system: str, user: str) -> dict:
        return {"model": self.model, "messages": chat_messages(system, user), "temperature": 0}

    def _complete(self, system: str, user: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with self._slots:
            resp = self.transport(self.url, self.request_body(system, user), headers, self.timeout)
        try:
            return resp["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed chat-completion response") from exc

    def _call(self, system: str, user: str, validate):
        last = None
        for attempt in range(1 + self.retries):
            try:
                return validate(decode_reply(self._complete(system, user)))
            except BackendError as exc:
                last = exc
                log.warning("backend call failed (attempt %d): %s", attempt + 1, exc)
        raise BackendError(f"giving up after {1 + self.retries} attempts: {last}")

    def parse_instruction(self, text: str) -> ParsedInstruction:
        if not text or not text.strip():
            raise BackendError("empty instruction")
        return self._call(PARSING_SYSTEM, text, validate_parsed)

    def propose_regions(self, objects: Sequence[str], candidates: Sequence[str]) -> list:
        user = json.dumps(region_proposal_request(objects, candidates))
        return self._call(REGION_PROPOSAL_SYSTEM, user,
                          lambda r: validate_region_proposals(r, candidates))

    def prioritize_regions(self, regions: Sequence[str], target: str) -> list:
        user = json.dumps(prioritization_request(regions, target))
        return self._call(PRIORITIZATION_SYSTEM, user,
                          lambda r: validate_ordered_regions(r, regions))

    def approve_detection(self, evidence: DetectionEvidence, label: str, rng=None):
        """Yes/no verification; any failure counts as a rejection."""
        if not label:
            raise BackendError("claimed label must be non-empty")
        user = json.dumps({"description": evidence.description, "object": label})

        def check(reply):
            if not isinstance(reply, dict) or not isinstance(reply.get("approved"), bool):
                raise BackendError("reply lacks boolean 'approved'")
            return reply["approved"], float(reply.get("confidence", 1.0))

        try:
            return self._call(APPROVAL_SYSTEM, user, check)
        except BackendError:
            return False, 0.0
