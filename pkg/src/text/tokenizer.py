"""Hashed tokenization and transcript loading."""

import json
import re
from dataclasses import dataclass
from typing import Iterable

from src.errors import TranscriptError

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
MASK64 = 0xffffffffffffffff
WORD = re.compile(r"\w+")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class TokenSequence:
    """Token ids with an optional (start_s, end_s) span per token."""

    tokens: tuple[int, ...] = ()
    spans: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.spans is not None:
            if len(self.spans) != len(self.tokens):
                raise TranscriptError("every token needs exactly one span")
            starts = [span[0] for span in self.spans]
            if any(b < a for a, b in zip(starts, starts[1:])):
                raise TranscriptError("token spans must be non-decreasing")

    def __len__(self) -> int:
        return len(self.tokens)

    def between(self, start_s: float, end_s: float, closed: bool = False) -> "TokenSequence":
        """Tokens whose span starts in [start_s, end_s), or [start_s, end_s] when closed."""
        if self.spans is None:
            return self
        keep = [i for i, (s, _) in enumerate(self.spans)
                if start_s <= s and (s < end_s or (closed and s <= end_s))]
        return TokenSequence(tuple(self.tokens[i] for i in keep), tuple(self.spans[i] for i in keep))


@dataclass(frozen=True)
class Utterance:
    start_s: float
    end_s: float
    text: str


def words(text: str) -> list[str]:
    return WORD.findall(text.lower())


def tokenize(text: str, vocab_size: int = 4096) -> TokenSequence:
    """Lowercase, split on non-word characters and hash each word into vocab_size buckets."""
    return TokenSequence(tuple(fnv1a_64(word.encode("utf-8")) % vocab_size for word in words(text)))


def parse_transcript(lines: Iterable[str]) -> list[Utterance]:
    utterances = []
    for number, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            utterance = Utterance(float(record["start_s"]), float(record["end_s"]), str(record["text"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as error:
            raise TranscriptError(f"transcript line {number}: {error}") from error
        if utterance.end_s < utterance.start_s or utterance.start_s < 0:
            raise TranscriptError(f"transcript line {number}: invalid span")
        utterances.append(utterance)
    utterances.sort(key=lambda u: u.start_s)
    return utterances


def load_transcript(path: str) -> list[Utterance]:
    with open(path, encoding="utf-8") as f:
        return parse_transcript(f)


def tokenize_utterances(utterances: Iterable[Utterance], vocab_size: int = 4096) -> TokenSequence:
    """Tokenize every utterance, spreading its tokens evenly over its time span."""
    placed = []
    for utterance in utterances:
        ids = tokenize(utterance.text, vocab_size).tokens
        width = (utterance.end_s - utterance.start_s) / max(len(ids), 1)
        for i, token in enumerate(ids):
            placed.append(((utterance.start_s + i * width, utterance.start_s + (i + 1) * width), token))
    placed.sort(key=lambda item: item[0][0])
    return TokenSequence(tuple(token for _, token in placed), tuple(span for span, _ in placed))
