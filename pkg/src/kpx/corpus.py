"""Canonical corpus model: judgments, arguments, sentences, and the
candidate filters used by the extraction pipelines.

The corpus file format is a JSON array of judgments, each with premise and
conclusion arguments (see ``load_corpus``). Arguments are split into
sentences eagerly; sentence spans partition the argument text exactly, so
the original text is always reconstructible.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

log = logging.getLogger(__name__)

# Pronouns that disqualify a sentence from being a key-point candidate
# (checked against the first alphabetic token, case-folded).
DEFAULT_PRONOUNS = frozenset({
    "it", "he", "she", "they", "this", "that", "these", "those",
    "i", "we", "you", "its", "his", "her", "their",
})

# Abbreviations that must not terminate a sentence. Legal citations are
# dense with these; a naive splitter fragments "Art. 5 para. 1".
SENTENCE_ABBREVIATIONS = frozenset({
    "art", "arts", "para", "paras", "no", "nos", "p", "pp", "s", "ss",
    "v", "vs", "mr", "mrs", "ms", "dr", "prof", "st",
    "e.g", "i.e", "cf", "seq", "approx", "vol", "sub",
})

MIN_CANDIDATE_TOKENS = 4
MAX_CANDIDATE_TOKENS = 36

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)
_TERMINATOR_RE = re.compile(r"[.!?]+[\"'”’»)\]]*")
_PRECEDING_WORD_RE = re.compile(r"([^\W\d_](?:[^\W\d_]|\.(?=[^\W\d_]))*)\.?$")


class CorpusError(Exception):
    """Base error for corpus loading problems."""


class CorpusParseError(CorpusError):
    """Input file is not valid JSON."""


class CorpusValidationError(CorpusError):
    """Input parsed but violates the corpus schema or its invariants."""


def tokenize(text: str) -> list[str]:
    """Split text into tokens: maximal runs of letters/digits, or single
    punctuation marks. Deterministic and dependency-free; this is the token
    unit the candidate length filter counts."""
    return _TOKEN_RE.findall(text)


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True if the '.' at ``dot_index`` terminates a known abbreviation."""
    m = _PRECEDING_WORD_RE.search(text, 0, dot_index)
    if not m:
        return False
    word = m.group(1).lower().rstrip(".")
    return word in SENTENCE_ABBREVIATIONS


def _sentence_starts(text: str) -> list[int]:
    """Content-start offsets of each sentence in ``text``."""
    starts = [0]
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        if end >= len(text):
            break
        # Only a whitespace gap can separate sentences.
        rest = text[end:]
        if not rest[:1].isspace():
            continue
        stripped = rest.lstrip()
        if not stripped:
            continue
        nxt = stripped[0]
        if nxt in "\"'“‘«([":
            nxt = stripped[1] if len(stripped) > 1 else ""
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if m.group(0)[0] == "." and _is_abbreviation(text, m.start()):
            continue
        starts.append(end + (len(rest) - len(stripped)))
    return starts


@dataclass(frozen=True)
class Sentence:
    """One sentence of an argument. ``text`` is the exact span substring
    (trailing inter-sentence whitespace included) so that concatenating a
    judgment argument's sentences reproduces its text byte-for-byte."""

    argument_id: str
    index: int
    text: str
    token_count: int
    start: int
    end: int

    @property
    def embedding_id(self) -> str:
        return sentence_embedding_id(self.argument_id, self.index)


def sentence_embedding_id(argument_id: str, index: int) -> str:
    """Canonical id used for sentence vectors in embedding stores."""
    return f"{argument_id}#s{index}"


def split_sentences(text: str, argument_id: str = "") -> list[Sentence]:
    """Rule-based, abbreviation-aware sentence splitter.

    Returns sentences whose spans partition ``[0, len(text))``; a
    whitespace-only input yields an empty list.
    """
    if not text.strip():
        return []
    starts = _sentence_starts(text)
    bounds = starts[1:] + [len(text)]
    sentences = []
    for i, (a, b) in enumerate(zip(starts, bounds)):
        chunk = text[a:b]
        sentences.append(Sentence(
            argument_id=argument_id,
            index=i,
            text=chunk,
            token_count=len(tokenize(chunk)),
            start=a,
            end=b,
        ))
    return sentences


@dataclass(frozen=True)
class Argument:
    id: str
    judgment_id: str
    text: str
    sentences: tuple[Sentence, ...] = field(repr=False)

    @classmethod
    def build(cls, id: str, judgment_id: str, text: str) -> "Argument":
        if not text or not text.strip():
            raise CorpusValidationError(
                f"argument {id!r} in judgment {judgment_id!r} has empty text")
        return cls(
            id=id,
            judgment_id=judgment_id,
            text=text,
            sentences=tuple(split_sentences(text, argument_id=id)),
        )


@dataclass(frozen=True)
class Judgment:
    id: str
    name: str
    premises: tuple[Argument, ...]
    conclusions: tuple[Argument, ...]


@dataclass(frozen=True)
class Candidate:
    """A sentence that survived the key-point candidate filters."""

    sentence: Sentence
    quality: float


def _first_alphabetic_token(tokens: Iterable[str]) -> str | None:
    for tok in tokens:
        if any(ch.isalpha() for ch in tok):
            return tok.casefold()
    return None


QualityScorer = Callable[[Sequence[str]], Sequence[float]]


def filter_candidates(
    sentences: Sequence[Sentence],
    pronoun_lexicon: frozenset[str] | set[str] = DEFAULT_PRONOUNS,
    quality_scorer: QualityScorer | None = None,
) -> list[Candidate]:
    """Apply the candidate filters: token count within
    [MIN_CANDIDATE_TOKENS, MAX_CANDIDATE_TOKENS] (inclusive) and first
    alphabetic token not a pronoun. Kept sentences are scored by
    ``quality_scorer`` (default: pass-through quality 1.0)."""
    kept = []
    for s in sentences:
        if not MIN_CANDIDATE_TOKENS <= s.token_count <= MAX_CANDIDATE_TOKENS:
            continue
        head = _first_alphabetic_token(tokenize(s.text))
        if head is not None and head in pronoun_lexicon:
            continue
        kept.append(s)
    if quality_scorer is None:
        qualities: Sequence[float] = [1.0] * len(kept)
    else:
        qualities = quality_scorer([s.text.strip() for s in kept])
        if len(qualities) != len(kept):
            raise ValueError("quality scorer returned wrong number of scores")
    out = []
    for s, q in zip(kept, qualities):
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quality score {q} outside [0, 1]")
        out.append(Candidate(sentence=s, quality=q))
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise CorpusValidationError(message)


def _build_arguments(raw: object, judgment_id: str, kind: str) -> tuple[Argument, ...]:
    _require(isinstance(raw, list), f"judgment {judgment_id!r}: {kind} must be a list")
    seen: set[str] = set()
    args = []
    for entry in raw:
        _require(isinstance(entry, dict), f"judgment {judgment_id!r}: {kind} entries must be objects")
        arg_id = entry.get("id")
        text = entry.get("text")
        _require(isinstance(arg_id, str) and arg_id != "",
                 f"judgment {judgment_id!r}: {kind} entry missing string id")
        _require(isinstance(text, str), f"{kind} {arg_id!r}: text must be a string")
        _require(arg_id not in seen, f"duplicate {kind} id {arg_id!r} in judgment {judgment_id!r}")
        seen.add(arg_id)
        args.append(Argument.build(id=arg_id, judgment_id=judgment_id, text=text))
    return tuple(args)


def load_corpus(path: str | Path) -> list[Judgment]:
    """Load and validate a corpus file.

    Raises CorpusParseError (with character and byte offsets) for malformed
    JSON and CorpusValidationError for schema/invariant violations. Counts
    are logged; use ``corpus_counts`` to retrieve them programmatically.
    """
    path = Path(path)
    raw_text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(raw_text)
    except json.JSONDecodeError as e:
        byte_offset = len(raw_text[:e.pos].encode("utf-8"))
        raise CorpusParseError(
            f"{path}: malformed JSON at char {e.pos} (byte offset {byte_offset}): {e.msg}"
        ) from e
    _require(isinstance(data, list), f"{path}: top level must be a JSON array")
    judgments = []
    seen_ids: set[str] = set()
    for raw_j in data:
        _require(isinstance(raw_j, dict), f"{path}: judgment entries must be objects")
        jid = raw_j.get("id")
        _require(isinstance(jid, str) and jid != "", f"{path}: judgment missing string id")
        _require(jid not in seen_ids, f"duplicate judgment id {jid!r}")
        seen_ids.add(jid)
        name = raw_j.get("name", "")
        _require(isinstance(name, str), f"judgment {jid!r}: name must be a string")
        judgments.append(Judgment(
            id=jid,
            name=name,
            premises=_build_arguments(raw_j.get("premises", []), jid, "premises"),
            conclusions=_build_arguments(raw_j.get("conclusions", []), jid, "conclusions"),
        ))
    n_j, n_p, n_c = corpus_counts(judgments)
    log.info("loaded corpus %s: %d judgments, %d premises, %d conclusions",
             path, n_j, n_p, n_c)
    return judgments


def corpus_counts(judgments: Sequence[Judgment]) -> tuple[int, int, int]:
    """(judgment, premise, conclusion) counts."""
    return (
        len(judgments),
        sum(len(j.premises) for j in judgments),
        sum(len(j.conclusions) for j in judgments),
    )


def dump_corpus(judgments: Sequence[Judgment]) -> list[dict]:
    """Inverse of ``load_corpus``: canonical JSON-serializable structure."""
    return [
        {
            "id": j.id,
            "name": j.name,
            "premises": [{"id": a.id, "text": a.text} for a in j.premises],
            "conclusions": [{"id": a.id, "text": a.text} for a in j.conclusions],
        }
        for j in judgments
    ]
