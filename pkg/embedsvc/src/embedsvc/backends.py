"""Model backends.

Two implementations share one interface:

* ``HashingBackend`` (default) is fully deterministic and dependency-light:
  feature-hashed bag-of-words embeddings, a leading-sentence summarizer
  under a hard token cap, and a heuristic quality score. It exists so the
  service (and everything downstream) runs with no model downloads.
* ``TransformersBackend`` serves pretrained legal-domain checkpoints
  (encoder for /v1/embed, seq2seq for /v1/summarize, optional regressor
  for /v1/quality). Checkpoints load lazily; if loading fails the service
  answers 503.

Determinism contract for both: same (request, model version) -> same
response. Hashing uses blake2, never Python's randomized hash().
"""

from __future__ import annotations

import hashlib
import math
import os
import re
from typing import Protocol, Sequence

import numpy as np

HASH_DIM = 256
HASH_VERSION = f"hashing-{HASH_DIM}-v1"

_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_", re.UNICODE)
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_RE = re.compile(r"[^.!?]*[.!?]+[\"')\]]*\s*|[^.!?]+$")


def tokenize(text: str) -> list[str]:
    """Service token rule: letters/digits runs or single punctuation."""
    return _TOKEN_RE.findall(text)


class BackendUnavailable(Exception):
    """Model could not be loaded; maps to HTTP 503."""


class Backend(Protocol):
    def embed(self, texts: Sequence[str], model: str | None) -> tuple[list[list[float]], str]: ...
    def summarize(self, text: str, max_tokens: int, model: str | None) -> tuple[str, str]: ...
    def quality(self, texts: Sequence[str]) -> tuple[list[float], str]: ...
    def models(self) -> list[str]: ...


def _bucket(word: str) -> tuple[int, float]:
    digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
    index = int.from_bytes(digest[:4], "big") % HASH_DIM
    sign = 1.0 if digest[4] & 1 else -1.0
    return index, sign


class HashingBackend:
    """Deterministic, download-free backend."""

    def embed(self, texts, model=None):
        vectors = []
        for text in texts:
            v = np.zeros(HASH_DIM)
            words = [w.casefold() for w in _WORD_RE.findall(text)]
            for gram in words + [f"{a}_{b}" for a, b in zip(words, words[1:])]:
                index, sign = _bucket(gram)
                v[index] += sign
            norm = float(np.linalg.norm(v))
            if norm > 0:
                v /= norm
            vectors.append([float(x) for x in v])
        return vectors, HASH_VERSION

    def summarize(self, text, max_tokens, model=None):
        """Leading sentences under the token cap; if even the first
        sentence is over budget, the leading tokens of it."""
        pieces = [m.group(0) for m in _SENTENCE_RE.finditer(text) if m.group(0).strip()]
        out: list[str] = []
        used = 0
        for piece in pieces:
            n = len(tokenize(piece))
            if out and used + n > max_tokens:
                break
            if not out and n > max_tokens:
                tokens = tokenize(piece)[:max_tokens]
                return " ".join(tokens), HASH_VERSION
            out.append(piece.strip())
            used += n
            if used >= max_tokens:
                break
        return " ".join(out), HASH_VERSION

    def quality(self, texts):
        """Heuristic in [0, 1]: favors mid-length sentences with varied
        vocabulary. Uncalibrated; documented as such."""
        scores = []
        for text in texts:
            words = [w.casefold() for w in _WORD_RE.findall(text)]
            if not words:
                scores.append(0.0)
                continue
            variety = len(set(words)) / len(words)
            length_term = math.exp(-((len(words) - 18) / 14.0) ** 2)
            scores.append(round(min(1.0, max(0.0, 0.15 + 0.5 * variety
                                             + 0.35 * length_term)), 6))
        return scores, HASH_VERSION

    def models(self):
        return [HASH_VERSION]


DEFAULT_EMBED_MODEL = "nlpaueb/legal-bert-base-uncased"
DEFAULT_SUMM_MODEL = "nsi319/legal-pegasus"


class TransformersBackend:
    """Pretrained-checkpoint backend; everything loads lazily."""

    def __init__(
        self,
        embed_model: str = DEFAULT_EMBED_MODEL,
        summ_model: str = DEFAULT_SUMM_MODEL,
        quality_model: str | None = None,
    ):
        self.embed_model = embed_model
        self.summ_model = summ_model
        self.quality_model = quality_model
        self._encoder = None
        self._summarizer = None
        self._quality = None
        self._fallback = HashingBackend()

    def _load_encoder(self):
        if self._encoder is None:
            try:
                import torch
                from transformers import AutoModel, AutoTokenizer
                tok = AutoTokenizer.from_pretrained(self.embed_model)
                mod = AutoModel.from_pretrained(self.embed_model)
                mod.eval()
                self._encoder = (tok, mod, torch)
            except Exception as e:
                raise BackendUnavailable(f"encoder {self.embed_model!r}: {e}") from e
        return self._encoder

    def _load_summarizer(self):
        if self._summarizer is None:
            try:
                import torch
                from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
                tok = AutoTokenizer.from_pretrained(self.summ_model)
                mod = AutoModelForSeq2SeqLM.from_pretrained(self.summ_model)
                mod.eval()
                self._summarizer = (tok, mod, torch)
            except Exception as e:
                raise BackendUnavailable(f"summarizer {self.summ_model!r}: {e}") from e
        return self._summarizer

    def embed(self, texts, model=None):
        tok, mod, torch = self._load_encoder()
        name = model or self.embed_model
        vectors = []
        with torch.no_grad():
            for start in range(0, len(texts), 16):
                batch = list(texts[start:start + 16])
                enc = tok(batch, padding=True, truncation=True, max_length=512,
                          return_tensors="pt")
                hidden = mod(**enc).last_hidden_state
                mask = enc["attention_mask"].unsqueeze(-1)
                pooled = (hidden * mask).sum(1) / mask.sum(1)
                vectors.extend([[float(x) for x in row] for row in pooled])
        return vectors, f"{name}@transformers"

    def summarize(self, text, max_tokens, model=None):
        tok, mod, torch = self._load_summarizer()
        name = model or self.summ_model
        with torch.no_grad():
            enc = tok(text, truncation=True, max_length=1024, return_tensors="pt")
            # deterministic decoding: beam search, no sampling
            out = mod.generate(**enc, num_beams=4, do_sample=False,
                               max_new_tokens=max_tokens, early_stopping=True)
        summary = tok.decode(out[0], skip_special_tokens=True)
        return summary, f"{name}@transformers"

    def quality(self, texts):
        if not self.quality_model:
            # no public counterpart of the original quality model is
            # pinned; serve the heuristic and say so in the version tag
            scores, _ = self._fallback.quality(texts)
            return scores, f"{HASH_VERSION}+uncalibrated"
        if self._quality is None:
            try:
                import torch
                from transformers import (AutoModelForSequenceClassification,
                                          AutoTokenizer)
                tok = AutoTokenizer.from_pretrained(self.quality_model)
                mod = AutoModelForSequenceClassification.from_pretrained(self.quality_model)
                mod.eval()
                self._quality = (tok, mod, torch)
            except Exception as e:
                raise BackendUnavailable(f"quality {self.quality_model!r}: {e}") from e
        tok, mod, torch = self._quality
        with torch.no_grad():
            enc = tok(list(texts), padding=True, truncation=True, max_length=256,
                      return_tensors="pt")
            logits = mod(**enc).logits
            scores = torch.sigmoid(logits[:, 0]).tolist()
        return [float(s) for s in scores], f"{self.quality_model}@transformers"

    def models(self):
        return [self.embed_model, self.summ_model] + (
            [self.quality_model] if self.quality_model else [])


def backend_from_env() -> Backend:
    kind = os.environ.get("EMBEDSVC_BACKEND", "hash")
    if kind == "transformers":
        return TransformersBackend(
            embed_model=os.environ.get("EMBEDSVC_EMBED_MODEL", DEFAULT_EMBED_MODEL),
            summ_model=os.environ.get("EMBEDSVC_SUMM_MODEL", DEFAULT_SUMM_MODEL),
            quality_model=os.environ.get("EMBEDSVC_QUALITY_MODEL") or None,
        )
    return HashingBackend()
