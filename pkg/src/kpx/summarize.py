"""Per-cluster summarization: four native extractive algorithms (LexRank,
Luhn, LSA, KL-Sum) and a thin client call for abstractive summarization
via the model service.

Extractive summaries are always verbatim subsets of the input sentences,
selected deterministically (score ties resolve to the lower sentence
index) and emitted in original order.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import tokenize
from .graphrank import Graph, pagerank

log = logging.getLogger(__name__)

DEFAULT_LEXRANK_THRESHOLD = 0.1
DEFAULT_LUHN_RATIO = 0.5
DEFAULT_LUHN_GAP = 4

# Fixed English stopword list, shipped in-repo so scoring never depends on
# an external download.
STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can cannot could
couldn't did didn't do does doesn't doing don't down during each few for
from further had hadn't has hasn't have haven't having he he'd he'll he's
her here here's hers herself him himself his how how's i i'd i'll i'm
i've if in into is isn't it it's its itself let's me more most mustn't my
myself no nor not of off on once only or other ought our ours ourselves
out over own same shan't she she'd she'll she's should shouldn't so some
such than that that's the their theirs them themselves then there there's
these they they'd they'll they're they've this those through to too under
until up very was wasn't we we'd we'll we're we've were weren't what
what's when when's where where's which while who who's whom why why's
with won't would wouldn't you you'd you'll you're you've your yours
yourself yourselves
""".split())

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


class SummarizeError(Exception):
    pass


@dataclass(frozen=True)
class SummaryRequest:
    """A cluster's sentences in document order plus the selection budget
    (sentence count for extractive, max tokens for abstractive). A budget
    of 0 is permitted only for internal degenerate calls."""

    sentences: tuple[str, ...]
    budget: int = 1

    def __post_init__(self):
        if not self.sentences:
            raise ValueError("SummaryRequest needs at least one sentence")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class Summary:
    text: str
    kind: str  # "extractive" | "abstractive"
    source_indices: tuple[int, ...] = ()


def _words(text: str) -> list[str]:
    return [w.casefold() for w in _WORD_RE.findall(text)]


def _content_words(text: str) -> list[str]:
    return [w for w in _words(text) if w not in STOPWORDS]


def _take_top(req: SummaryRequest, scores: Sequence[float]) -> Summary:
    """Top-``budget`` sentences by score (ties to the lower index), emitted
    in original order."""
    order = sorted(range(len(req.sentences)), key=lambda i: (-scores[i], i))
    chosen = tuple(sorted(order[:req.budget]))
    text = " ".join(req.sentences[i] for i in chosen)
    return Summary(text=text, kind="extractive", source_indices=chosen)


# --- LexRank -------------------------------------------------------------


def _tfidf_vectors(sentences: Sequence[str]) -> np.ndarray:
    docs = [Counter(_content_words(s)) for s in sentences]
    vocab = sorted(set().union(*docs)) if docs else []
    if not vocab:
        return np.zeros((len(sentences), 0))
    df = Counter()
    for doc in docs:
        df.update(set(doc))
    n = len(sentences)
    idf = np.array([math.log(n / df[w]) for w in vocab])
    tf = np.zeros((n, len(vocab)))
    index = {w: k for k, w in enumerate(vocab)}
    for i, doc in enumerate(docs):
        for w, c in doc.items():
            tf[i, index[w]] = c
    return tf * idf[None, :]


def sentence_similarity_graph(
    sentences: Sequence[str],
    threshold: float = DEFAULT_LEXRANK_THRESHOLD,
    continuous: bool = False,
) -> Graph:
    """Sentence graph for LexRank: cosine over tf-idf sentence vectors,
    binarized at ``threshold`` (or kept as raw weights when
    ``continuous``)."""
    vecs = _tfidf_vectors(sentences)
    n = len(sentences)
    norms = np.linalg.norm(vecs, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vecs / safe[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    sims[norms == 0, :] = 0.0
    sims[:, norms == 0] = 0.0
    if continuous:
        weights = np.where(sims >= threshold, sims, 0.0)
    else:
        weights = np.where(sims >= threshold, 1.0, 0.0)
    np.fill_diagonal(weights, 0.0)
    return Graph(node_ids=tuple(str(i) for i in range(n)), weights=weights)


def lexrank_centrality(
    sentences: Sequence[str],
    threshold: float = DEFAULT_LEXRANK_THRESHOLD,
    continuous: bool = False,
) -> np.ndarray:
    graph = sentence_similarity_graph(sentences, threshold, continuous)
    return pagerank(graph).scores


def lexrank(
    req: SummaryRequest,
    threshold: float = DEFAULT_LEXRANK_THRESHOLD,
    continuous: bool = False,
) -> Summary:
    """Graph-centrality summarizer: rank sentences with the shared
    PageRank kernel over the binarized tf-idf similarity graph."""
    scores = lexrank_centrality(req.sentences, threshold, continuous)
    return _take_top(req, scores)


# --- Luhn ----------------------------------------------------------------


def _luhn_score(words: Sequence[str], significant: frozenset[str], gap: int) -> float:
    positions = [i for i, w in enumerate(words) if w in significant]
    if not positions:
        return 0.0
    best = 0.0
    run = [positions[0]]
    for p in positions[1:]:
        if p - run[-1] - 1 <= gap:
            run.append(p)
        else:
            span = run[-1] - run[0] + 1
            best = max(best, len(run) ** 2 / span)
            run = [p]
    span = run[-1] - run[0] + 1
    return max(best, len(run) ** 2 / span)


def luhn(
    req: SummaryRequest,
    significance_ratio: float = DEFAULT_LUHN_RATIO,
    gap: int = DEFAULT_LUHN_GAP,
) -> Summary:
    """Significant-word density summarizer: a word is significant when its
    corpus frequency reaches ``significance_ratio`` of the maximum; each
    sentence scores max over word windows of significant^2 / window
    length."""
    freq = Counter()
    for s in req.sentences:
        freq.update(_content_words(s))
    if freq:
        cutoff = significance_ratio * max(freq.values())
        significant = frozenset(w for w, c in freq.items() if c >= cutoff)
    else:
        significant = frozenset()
    scores = [_luhn_score(_words(s), significant, gap) for s in req.sentences]
    return _take_top(req, scores)


# --- LSA -----------------------------------------------------------------


def lsa_scores(
    sentences: Sequence[str],
    topics: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Squared-loading sentence scores over the retained SVD topics:
    score_j = sum_k (sigma_k * v_kj)^2. Returns (scores, singular_values)."""
    docs = [Counter(_content_words(s)) for s in sentences]
    if not any(docs):
        docs = [Counter(_words(s)) for s in sentences]
    vocab = sorted(set().union(*docs)) if docs else []
    if not vocab:
        return np.zeros(len(sentences)), np.zeros(0)
    a = np.zeros((len(vocab), len(sentences)))
    index = {w: k for k, w in enumerate(vocab)}
    for j, doc in enumerate(docs):
        for w, c in doc.items():
            a[index[w], j] = c
    try:
        _, sigma, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise SummarizeError(f"SVD did not converge on a {a.shape} term-sentence matrix") from e
    k = len(sigma) if topics is None else max(1, min(topics, len(sigma)))
    loadings = (sigma[:k, None] * vt[:k, :]) ** 2
    return loadings.sum(axis=0), sigma


def lsa_summarize(req: SummaryRequest, topics: int | None = None) -> Summary:
    scores, _ = lsa_scores(req.sentences, topics=req.budget if topics is None else topics)
    return _take_top(req, scores)


# --- KL-Sum --------------------------------------------------------------


def _kl_distribution(counts: Counter, vocab: Sequence[str]) -> np.ndarray:
    """Unigram distribution with add-one smoothing over ``vocab``."""
    total = sum(counts[w] for w in vocab) + len(vocab)
    return np.array([(counts[w] + 1) / total for w in vocab])


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def klsum(req: SummaryRequest) -> Summary:
    """Greedy selection minimizing KL(document distribution || summary
    distribution), add-one smoothed; ties prefer the lower sentence
    index."""
    per_sentence = [Counter(_content_words(s)) for s in req.sentences]
    if not any(per_sentence):
        per_sentence = [Counter(_words(s)) for s in req.sentences]
    doc_counts = Counter()
    for c in per_sentence:
        doc_counts.update(c)
    vocab = sorted(doc_counts)
    if not vocab:
        return _take_top(req, [0.0] * len(req.sentences))
    p = _kl_distribution(doc_counts, vocab)

    selected: list[int] = []
    summary_counts: Counter = Counter()
    while len(selected) < min(req.budget, len(req.sentences)):
        best: tuple[float, int] | None = None
        for i in range(len(req.sentences)):
            if i in selected:
                continue
            q = _kl_distribution(summary_counts + per_sentence[i], vocab)
            key = (kl_divergence(p, q), i)
            if best is None or key < best:
                best = key
        selected.append(best[1])
        summary_counts += per_sentence[best[1]]
    chosen = tuple(sorted(selected))
    text = " ".join(req.sentences[i] for i in chosen)
    return Summary(text=text, kind="extractive", source_indices=chosen)


# --- Abstractive (service-backed) ----------------------------------------


def abstractive_summarize(req: SummaryRequest, model: str, client) -> Summary:
    """Summarize via the model service. The token cap travels with the
    request; the client never truncates on its own, and a response that
    exceeds the cap under the engine tokenizer is rejected."""
    if req.budget < 8:
        raise ValueError("abstractive budget must be >= 8 tokens")
    text = " ".join(s.strip() for s in req.sentences)
    summary = client.summarize(text=text, model=model, max_tokens=req.budget)
    if not summary or not summary.strip():
        raise SummarizeError("model service returned an empty summary")
    n_tokens = len(tokenize(summary))
    if n_tokens > req.budget:
        raise SummarizeError(
            f"service summary has {n_tokens} tokens, over the {req.budget}-token cap")
    return Summary(text=summary.strip(), kind="abstractive", source_indices=())
