"""LLM-as-judge scoring of (reference, prediction) AD pairs.

A chat-completion endpoint is asked to grade each pair with an integer
score; the prompt instructs it to treat pronouns and differing character
names as valid matches and to focus on actions, objects, and interactions,
complementing the character-centric CRITIC metric. Responses arrive as a
Python-dict-shaped string and are parsed with ast.literal_eval.

The client is backend-agnostic (base URL + model name), retries with
exponential backoff, runs with bounded concurrency, and caches scores on
disk keyed by (model, pair text hash) so reruns are free.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import threading
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import requests

logger = logging.getLogger(__name__)

API_KEY_ENV = "AD_JUDGE_API_KEY"

SCORE_MIN = 0
SCORE_MAX = 5

SYSTEM_PROMPT = (
    "You are an intelligent chatbot designed for evaluating the quality of generative outputs for movie audio descriptions. "
    "Your task is to compare the predicted audio descriptions with the correct audio descriptions and determine its level of match, considering mainly the visual elements like actions, objects and interactions. Here's how you can accomplish the task:"
    "------"
    "##INSTRUCTIONS: "
    "- Check if the predicted audio description covers the main visual events from the movie, especially focusing on the verbs and nouns.\n"
    "- Evaluate whether the predicted audio description includes specific details rather than just generic points. It should provide comprehensive information that is tied to specific elements of the video.\n"
    "- Consider synonyms or paraphrases as valid matches. Consider pronouns like 'he' or 'she' as valid matches with character names. Consider different character names as valid matches. \n"
    "- Provide a single evaluation score that reflects the level of match of the prediction, considering the visual elements like actions, objects and interactions."
)

USER_PROMPT_TEMPLATE = (
    "Please evaluate the following movie audio description pair:\n\n"
    "Correct Audio Description: {reference}\n"
    "Predicted Audio Description: {prediction}\n\n"
    "Provide your evaluation only as a matching score where the matching score is an integer value between 0 and 5, with 5 indicating the highest level of match. "
    "Please generate the response in the form of a Python dictionary string with keys 'score', where its value is the matching score in INTEGER, not STRING."
    "DO NOT PROVIDE ANY OTHER OUTPUT TEXT OR EXPLANATION. Only provide the Python dictionary string. "
    "For example, your response should look like this: {{'score': }}."
)


def build_prompt(reference: str, prediction: str) -> tuple[str, str]:
    """The (system, user) message pair, with the two ADs interpolated."""
    if not reference or not prediction:
        raise ValueError("reference and prediction must be non-empty")
    return SYSTEM_PROMPT, USER_PROMPT_TEMPLATE.format(
        reference=reference, prediction=prediction
    )


_FENCE = re.compile(r"^```[\w-]*\s*|\s*```$")
_DICT = re.compile(r"\{.*?\}", re.DOTALL)


def parse_score(response_text: str) -> int:
    """Extract the integer 'score' from a dict-shaped reply.

    Tolerates surrounding whitespace and markdown fencing; rejects missing
    dicts, non-integer scores, and values outside [0, 5].
    """
    text = _FENCE.sub("", response_text.strip()).strip()
    match = _DICT.search(text)
    if match is None:
        raise ValueError(f"no dictionary literal in response: {response_text!r}")
    try:
        payload = ast.literal_eval(match.group())
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"unparsable dictionary in response: {response_text!r}") from exc
    if not isinstance(payload, dict) or "score" not in payload:
        raise ValueError(f"response dict lacks a 'score' key: {response_text!r}")
    score = payload["score"]
    if isinstance(score, bool) or not isinstance(score, int):
        raise ValueError(f"score is not an integer: {score!r}")
    if not SCORE_MIN <= score <= SCORE_MAX:
        raise ValueError(f"score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")
    return score


@dataclass(frozen=True)
class JudgeConfig:
    endpoint: str = "https://api.openai.com/v1"
    model_name: str = "gpt-3.5-turbo"
    api_key_env: str = API_KEY_ENV
    max_retries: int = 3
    concurrency_limit: int = 4
    timeout: float = 60.0
    backoff_s: float = 1.0  # doubled on every retry
    cache_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be at least 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")


@dataclass(frozen=True)
class JudgePair:
    pair_id: str
    reference: str
    prediction: str


@dataclass(frozen=True)
class JudgeScore:
    pair_id: str
    score: int
    raw_response: str
    attempts: int  # 0 means served from cache


@dataclass(frozen=True)
class JudgeFailure:
    pair_id: str
    error: str
    attempts: int


@dataclass(frozen=True)
class JudgeReport:
    scores: tuple[JudgeScore, ...]
    failures: tuple[JudgeFailure, ...]
    mean: float


Transport = Callable[[str, str, JudgeConfig], str]
"""(system, user, config) -> raw response text; raises on transport failure."""


def http_chat_transport(system: str, user: str, config: JudgeConfig) -> str:
    """POST a chat-completion request; temperature pinned to 0."""
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    response = requests.post(
        config.endpoint.rstrip("/") + "/chat/completions",
        headers=headers,
        json={
            "model": config.model_name,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        },
        timeout=config.timeout,
    )
    response.raise_for_status()
    return response.json()["choices"][0]["message"]["content"]


class ScoreCache:
    """Append-only JSONL journal of (key, score, raw_response)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[int, str]] = {}
        if self.path.is_file():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    rec = json.loads(line)
                    self._entries[rec["key"]] = (rec["score"], rec["raw_response"])

    def get(self, key: str) -> Optional[tuple[int, str]]:
        return self._entries.get(key)

    def put(self, key: str, score: int, raw_response: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = (score, raw_response)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"key": key, "score": score, "raw_response": raw_response},
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def cache_key(model_name: str, reference: str, prediction: str) -> str:
    digest = hashlib.sha256(
        f"{reference}\x1f{prediction}".encode("utf-8")
    ).hexdigest()
    return f"{model_name}:{digest}"


def _judge_one(
    pair: JudgePair,
    config: JudgeConfig,
    transport: Transport,
    cache: Optional[ScoreCache],
    sleep: Callable[[float], None],
) -> JudgeScore | JudgeFailure:
    key = cache_key(config.model_name, pair.reference, pair.prediction)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return JudgeScore(pair.pair_id, hit[0], hit[1], attempts=0)

    system, user = build_prompt(pair.reference, pair.prediction)
    last_error = "no attempts made"
    attempts = 0
    for attempt in range(1 + config.max_retries):
        attempts = attempt + 1
        try:
            raw = transport(system, user, config)
            score = parse_score(raw)
        except Exception as exc:  # transport or parse failure: back off and retry
            last_error = str(exc)
            if attempt < config.max_retries:
                sleep(config.backoff_s * (2.0**attempt))
            continue
        if cache is not None:
            cache.put(key, score, raw)
        return JudgeScore(pair.pair_id, score, raw, attempts=attempts)
    return JudgeFailure(pair.pair_id, last_error, attempts=attempts)


def judge_corpus(
    pairs: Sequence[JudgePair],
    config: JudgeConfig = JudgeConfig(),
    transport: Transport = http_chat_transport,
    sleep: Callable[[float], None] = time.sleep,
) -> JudgeReport:
    """Judge every pair with bounded concurrency and per-pair retries.

    Scores are keyed by pair id and reported in input order, so the result
    is independent of scheduling. Raises only when every pair failed.
    """
    if not pairs:
        raise ValueError("no pairs to judge")
    ids = [p.pair_id for p in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("pair ids must be unique")

    cache = ScoreCache(config.cache_path) if config.cache_path else None
    with ThreadPoolExecutor(max_workers=config.concurrency_limit) as pool:
        outcomes = list(
            pool.map(lambda p: _judge_one(p, config, transport, cache, sleep), pairs)
        )

    scores = tuple(o for o in outcomes if isinstance(o, JudgeScore))
    failures = tuple(o for o in outcomes if isinstance(o, JudgeFailure))
    if not scores:
        raise RuntimeError(
            f"all {len(pairs)} pairs failed; first error: {failures[0].error}"
        )
    mean = sum(s.score for s in scores) / len(scores)
    if failures:
        logger.warning("%d/%d pairs failed judging", len(failures), len(pairs))
    return JudgeReport(scores, failures, mean)
