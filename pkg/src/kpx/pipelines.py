"""The three key-point extraction methods, run per judgment text and
unioned.

* method1 - candidate filtering, quality floor, match-support selection,
  sentence-to-argument reconciliation.
* method2 - per-text clustering, one summary per cluster (abstractive via
  the model service, extractive natively).
* method3q / method3c - PageRank over the thresholded cosine graph with
  diversity-constrained selection; the clustering variant takes its budget
  and diversity bar from the text's clusters.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .clustering import (ClusterAssignment, ClusterParams, centroids, cluster,
                         hdbscan_cluster)
from .corpus import (DEFAULT_PRONOUNS, Argument, Judgment, Sentence,
                     filter_candidates)
from .embeddings import EmbeddingStore, normalize, similarity_matrix
from .graphrank import build_threshold_graph, kp_count_for, pagerank, select_diverse
from .summarize import (Summary, SummaryRequest, abstractive_summarize,
                        klsum, lexrank, lsa_summarize, luhn)

log = logging.getLogger(__name__)

METHODS = ("method1", "method2", "method3q", "method3c")

_EXTRACTIVE = {
    "lexrank": lexrank,
    "luhn": luhn,
    "lsa": lsa_summarize,
    "klsum": klsum,
}


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class KeyPoint:
    id: str
    judgment_id: str
    text: str
    source: str  # "extracted" | "generated"
    method: str
    origin_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class MethodConfig:
    match_threshold: float = 0.9
    min_threshold: float = 0.8
    max_threshold: float = 0.4
    min_support: int = 3
    quality_floor: float | None = None  # None -> 0.0 passthrough, 0.5 service
    quality_scorer: str = "passthrough"  # "passthrough" | "service"
    match_scorer: str = "cosine"  # "cosine" | "service"
    cluster_params: ClusterParams = field(default_factory=ClusterParams)
    summarizer: str = "abstractive"  # or one of the extractive names
    extractive_fallback: str = "lexrank"  # "none" disables the fallback
    extractive_budget: int = 1
    abstractive_model: str | None = None
    abstractive_max_tokens: int = 32
    candidate_rank: str = "pagerank"  # "pagerank" | "degree"
    normalize_embeddings: bool = True
    pronoun_lexicon: frozenset[str] = DEFAULT_PRONOUNS
    whole_corpus: bool = False

    def __post_init__(self):
        for name in ("match_threshold", "min_threshold", "max_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.summarizer != "abstractive" and self.summarizer not in _EXTRACTIVE:
            raise ValueError(f"unknown summarizer {self.summarizer!r}")
        if self.extractive_fallback != "none" and self.extractive_fallback not in _EXTRACTIVE:
            raise ValueError(f"unknown fallback {self.extractive_fallback!r}")
        if self.candidate_rank not in ("pagerank", "degree"):
            raise ValueError("candidate_rank must be 'pagerank' or 'degree'")

    @property
    def effective_quality_floor(self) -> float:
        if self.quality_floor is not None:
            return self.quality_floor
        return 0.5 if self.quality_scorer == "service" else 0.0


class CosineMatchScorer:
    """Default match scorer: cosine between stored embeddings, clipped to
    [0, 1]. The 0.9 default threshold was tuned against a fine-tuned
    matching model; it applies as-is to whichever scorer is configured."""

    def __init__(self, store: EmbeddingStore):
        self.store = store

    def score_matrix(self, row_ids: Sequence[str], col_ids: Sequence[str]) -> np.ndarray:
        rows = self.store.matrix(row_ids)
        cols = self.store.matrix(col_ids)
        rn = np.linalg.norm(rows, axis=1)
        cn = np.linalg.norm(cols, axis=1)
        rows = rows / np.where(rn > 0, rn, 1.0)[:, None]
        cols = cols / np.where(cn > 0, cn, 1.0)[:, None]
        return np.clip(rows @ cols.T, 0.0, 1.0)


class ServiceMatchScorer(CosineMatchScorer):
    """Match scorer that pulls vectors for unseen ids from the sidecar.

    ``texts_by_id`` supplies the text behind each id so generated key
    points can be scored too.
    """

    def __init__(self, client, texts_by_id: Mapping[str, str], model: str | None = None):
        from .embeddings import build_store
        keyed = sorted(texts_by_id.items())
        vectors = client.embed([text for _, text in keyed], model=model)
        super().__init__(build_store({key: vec for (key, _), vec in zip(keyed, vectors)}))


def _passthrough_quality(texts: Sequence[str]) -> list[float]:
    return [1.0] * len(texts)


def _prepared(store: EmbeddingStore, cfg: MethodConfig) -> EmbeddingStore:
    return normalize(store) if cfg.normalize_embeddings else store


def kp_sort_key(kp: KeyPoint) -> tuple[str, str, str]:
    return (kp.judgment_id, kp.method, kp.id)


# --- Method I -------------------------------------------------------------


@dataclass(frozen=True)
class Method1Result:
    key_points: tuple[KeyPoint, ...]
    supports: Mapping[str, int]  # candidate sentence id -> support
    sentence_assignments: Mapping[str, tuple[str, float]]  # sentence id -> (kp id, score)
    argument_assignments: Mapping[str, tuple[str, float]]  # argument id -> (kp id, score)


def _method1_core(
    premises: Sequence[Argument],
    cfg: MethodConfig,
    scorer,
    quality_scorer: Callable[[Sequence[str]], Sequence[float]] | None,
) -> Method1Result:
    sentences: list[Sentence] = [s for arg in premises for s in arg.sentences]
    judgment_of = {arg.id: arg.judgment_id for arg in premises}
    if not sentences:
        return Method1Result((), {}, {}, {})

    candidates = filter_candidates(sentences, cfg.pronoun_lexicon, quality_scorer)
    floor = cfg.effective_quality_floor
    candidates = [c for c in candidates if c.quality >= floor]
    if not candidates:
        log.warning("method1: no candidates survived the filters; no key points "
                    "for this text")
        return Method1Result((), {}, {}, {})

    sent_ids = [s.embedding_id for s in sentences]
    cand_ids = [c.sentence.embedding_id for c in candidates]
    scores = scorer.score_matrix(sent_ids, cand_ids)

    supports = {cid: 0 for cid in cand_ids}
    best_for_sentence: dict[str, tuple[int, float]] = {}
    for i in range(len(sentences)):
        j = min(range(len(candidates)), key=lambda j: (-scores[i, j], cand_ids[j]))
        score = float(scores[i, j])
        if score >= cfg.match_threshold:
            supports[cand_ids[j]] += 1
            best_for_sentence[sent_ids[i]] = (j, score)

    kept = [j for j in range(len(candidates)) if supports[cand_ids[j]] >= cfg.min_support]
    if not kept:
        log.warning("method1: no candidate reached support >= %d; no key points "
                    "for this text", cfg.min_support)
        return Method1Result((), supports, {}, {})

    kp_by_candidate: dict[int, KeyPoint] = {}
    kps = []
    for j in kept:
        cand = candidates[j]
        kp = KeyPoint(
            id=f"method1:{cand.sentence.embedding_id}",
            judgment_id=judgment_of[cand.sentence.argument_id],
            text=cand.sentence.text.strip(),
            source="extracted",
            method="method1",
            origin_ids=(cand.sentence.embedding_id,),
        )
        kp_by_candidate[j] = kp
        kps.append(kp)

    sentence_assignments = {
        sid: (kp_by_candidate[j].id, score)
        for sid, (j, score) in best_for_sentence.items()
        if j in kp_by_candidate
    }
    argument_assignments: dict[str, tuple[str, float]] = {}
    for arg in premises:
        best: tuple[float, str] | None = None
        for s in arg.sentences:
            hit = sentence_assignments.get(s.embedding_id)
            if hit and (best is None or hit[1] > best[0]
                        or (hit[1] == best[0] and hit[0] < best[1])):
                best = (hit[1], hit[0])
        if best is not None:
            argument_assignments[arg.id] = (best[1], best[0])
    return Method1Result(tuple(kps), supports, sentence_assignments, argument_assignments)


def method1_details(
    judgment: Judgment,
    store: EmbeddingStore,
    cfg: MethodConfig,
    client=None,
) -> Method1Result:
    prepared = _prepared(store, cfg)
    scorer = _match_scorer(prepared, cfg, client, [judgment])
    quality = _quality_scorer(cfg, client)
    return _method1_core(judgment.premises, cfg, scorer, quality)


def method1_extract(judgment: Judgment, store: EmbeddingStore,
                    cfg: MethodConfig, client=None) -> list[KeyPoint]:
    return list(method1_details(judgment, store, cfg, client).key_points)


def method1_extract_corpus(corpus: Sequence[Judgment], store: EmbeddingStore,
                           cfg: MethodConfig, client=None) -> list[KeyPoint]:
    """Whole-corpus variant: candidates and sentences pooled across texts."""
    prepared = _prepared(store, cfg)
    scorer = _match_scorer(prepared, cfg, client, corpus)
    quality = _quality_scorer(cfg, client)
    premises = [arg for j in corpus for arg in j.premises]
    return list(_method1_core(premises, cfg, scorer, quality).key_points)


def _match_scorer(store: EmbeddingStore, cfg: MethodConfig, client,
                  corpus: Sequence[Judgment]):
    if cfg.match_scorer == "cosine":
        return CosineMatchScorer(store)
    if client is None:
        raise PipelineError("match_scorer 'service' needs a model service client")
    texts: dict[str, str] = {}
    for j in corpus:
        for arg in j.premises:
            texts[arg.id] = arg.text.strip()
            for s in arg.sentences:
                texts[s.embedding_id] = s.text.strip()
    return ServiceMatchScorer(client, texts, model=cfg.abstractive_model)


def _quality_scorer(cfg: MethodConfig, client):
    if cfg.quality_scorer == "passthrough":
        return _passthrough_quality
    if client is None:
        raise PipelineError("quality_scorer 'service' needs a model service client")
    return client.quality


# --- Method II ------------------------------------------------------------


def _cluster_groups(judgment: Judgment, store: EmbeddingStore,
                    params: ClusterParams) -> list[list[Argument]]:
    """Document-order argument groups, one per non-noise cluster. Texts
    with one or two arguments skip clustering and form a single group."""
    args = list(judgment.premises)
    if len(args) <= 2:
        return [args] if args else []
    assignment = cluster(store, [a.id for a in args], params)
    by_id = {a.id: a for a in args}
    return [[by_id[m] for m in assignment.members(label)]
            for label in range(assignment.num_clusters)]


def _summarize_group(group: Sequence[Argument], cfg: MethodConfig,
                     client) -> tuple[Summary, tuple[str, ...]]:
    """Summarize one cluster; returns the summary and its origin sentence
    ids (empty for generated summaries)."""
    name = cfg.summarizer
    if name == "abstractive":
        if client is None:
            raise PipelineError("abstractive summarization needs a service client")
        req = SummaryRequest(
            sentences=tuple(a.text.strip() for a in group),
            budget=cfg.abstractive_max_tokens,
        )
        try:
            return abstractive_summarize(req, cfg.abstractive_model, client), ()
        except Exception as e:
            if cfg.extractive_fallback == "none":
                raise
            log.warning("abstractive summarization failed (%s); falling back "
                        "to %s", e, cfg.extractive_fallback)
            name = cfg.extractive_fallback
    sentences: list[str] = []
    ids: list[str] = []
    for arg in group:
        for s in arg.sentences:
            sentences.append(s.text.strip())
            ids.append(s.embedding_id)
    req = SummaryRequest(sentences=tuple(sentences), budget=cfg.extractive_budget)
    summary = _EXTRACTIVE[name](req)
    return summary, tuple(ids[i] for i in summary.source_indices)


def method2_extract(judgment: Judgment, store: EmbeddingStore,
                    cfg: MethodConfig, client=None) -> list[KeyPoint]:
    if cfg.summarizer == "abstractive" and client is None:
        if cfg.extractive_fallback == "none":
            raise PipelineError(
                "abstractive summarizer selected but no model service is configured "
                "and the extractive fallback is disabled")
        log.debug("no model service configured; judgment %s summarized with %s",
                  judgment.id, cfg.extractive_fallback)
        cfg = replace(cfg, summarizer=cfg.extractive_fallback)
    prepared = _prepared(store, cfg)
    groups = _cluster_groups(judgment, prepared, cfg.cluster_params)
    kps = []
    for label, group in enumerate(groups):
        summary, origin_ids = _summarize_group(group, cfg, client)
        kps.append(KeyPoint(
            id=f"method2:{judgment.id}:c{label}",
            judgment_id=judgment.id,
            text=summary.text,
            source="generated" if summary.kind == "abstractive" else "extracted",
            method="method2",
            origin_ids=origin_ids,
        ))
    return kps


# --- Method III -------------------------------------------------------------


def _rank_and_select(judgment: Judgment, store: EmbeddingStore, cfg: MethodConfig,
                     n_keep: int, max_threshold: float, method: str) -> list[KeyPoint]:
    ids = [a.id for a in judgment.premises]
    by_id = {a.id: a for a in judgment.premises}
    sim = similarity_matrix(store, ids)
    graph = build_threshold_graph(sim, cfg.min_threshold)
    degree = graph.degree()
    if not np.any(graph.weights > 0):
        log.warning("method3: graph for judgment %s is edgeless below threshold "
                    "%.2f; ranks are uniform", judgment.id, cfg.min_threshold)
    if cfg.candidate_rank == "degree":
        order = sorted(range(len(ids)), key=lambda i: (-degree[i], ids[i]))
        ranking = [ids[i] for i in order]
    else:
        ranking = pagerank(graph).ranking(tie_degree=degree)
    selected = select_diverse(ranking, sim, n_keep, max_threshold)
    return [
        KeyPoint(
            id=f"{method}:{arg_id}",
            judgment_id=judgment.id,
            text=by_id[arg_id].text.strip(),
            source="extracted",
            method=method,
            origin_ids=(arg_id,),
        )
        for arg_id in selected
    ]


def method3_quantitative(judgment: Judgment, store: EmbeddingStore,
                         cfg: MethodConfig, client=None) -> list[KeyPoint]:
    if not judgment.premises:
        return []
    prepared = _prepared(store, cfg)
    n_keep = kp_count_for(len(judgment.premises))
    return _rank_and_select(judgment, prepared, cfg, n_keep, cfg.max_threshold,
                            "method3q")


def method3_clustering(judgment: Judgment, store: EmbeddingStore,
                       cfg: MethodConfig, client=None) -> list[KeyPoint]:
    if not judgment.premises:
        return []
    prepared = _prepared(store, cfg)
    ids = [a.id for a in judgment.premises]
    assignment = hdbscan_cluster(prepared, ids, cfg.cluster_params)
    if assignment.num_clusters == 0:
        log.warning("method3c: no clusters for judgment %s; falling back to "
                    "quantitative tiering", judgment.id)
        n_keep = kp_count_for(len(ids))
        max_threshold = cfg.max_threshold
    else:
        n_keep = assignment.num_clusters
        max_threshold = _centroid_threshold(prepared, assignment, cfg)
    return _rank_and_select(judgment, prepared, cfg, n_keep, max_threshold,
                            "method3c")


def _centroid_threshold(store: EmbeddingStore, assignment: ClusterAssignment,
                        cfg: MethodConfig) -> float:
    """Diversity bar for the clustering variant: mean pairwise cosine
    between normalized cluster centroids, clamped to
    [0.2, cfg.max_threshold] so selections never exceed the configured
    diversity cap."""
    cents = centroids(store, assignment)
    labels = sorted(cents)
    if len(labels) < 2:
        return cfg.max_threshold
    sims = [
        float(np.dot(cents[a], cents[b]))
        for i, a in enumerate(labels)
        for b in labels[i + 1:]
    ]
    mean = float(np.mean(sims))
    lo = min(0.2, cfg.max_threshold)
    return float(np.clip(mean, lo, cfg.max_threshold))


# --- Orchestration ----------------------------------------------------------


_METHOD_FNS = {
    "method1": method1_extract,
    "method2": method2_extract,
    "method3q": method3_quantitative,
    "method3c": method3_clustering,
}


@dataclass(frozen=True)
class RunFailure:
    method: str
    judgment_id: str
    error: str


@dataclass(frozen=True)
class RunResult:
    key_points: Mapping[str, tuple[KeyPoint, ...]]  # method -> union
    failures: tuple[RunFailure, ...]


def run_all(
    corpus: Sequence[Judgment],
    store: EmbeddingStore,
    cfg: MethodConfig,
    methods: Sequence[str] = METHODS,
    jobs: int = 1,
    client=None,
) -> RunResult:
    """Run the selected methods per text and union the results. Output
    order is fixed to (judgment id, method, kp id) regardless of ``jobs``;
    a failing text is recorded and does not abort the run."""
    unknown = [m for m in methods if m not in _METHOD_FNS]
    if unknown:
        raise PipelineError(f"unknown methods: {unknown}")
    if ("method2" in methods and cfg.summarizer == "abstractive"
            and client is None and cfg.extractive_fallback != "none"):
        log.warning("no model service configured; method2 falls back to %s",
                    cfg.extractive_fallback)
    prepared = _prepared(store, cfg)
    inner_cfg = replace(cfg, normalize_embeddings=False)

    tasks = [(method, judgment) for method in methods for judgment in corpus]

    def run_one(task):
        method, judgment = task
        if method == "method1" and cfg.whole_corpus:
            return None  # handled once below
        return _METHOD_FNS[method](judgment, prepared, inner_cfg, client)

    results: dict[tuple[str, str], list[KeyPoint]] = {}
    failures: list[RunFailure] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(lambda t: _guard(run_one, t), tasks))
    else:
        outputs = [_guard(run_one, t) for t in tasks]
    for (method, judgment), outcome in zip(tasks, outputs):
        kind, value = outcome
        if kind == "error":
            failures.append(RunFailure(method, judgment.id, value))
        elif value is not None:
            results[(method, judgment.id)] = value

    if "method1" in methods and cfg.whole_corpus:
        try:
            pooled = method1_extract_corpus(corpus, prepared, inner_cfg, client)
            for judgment in corpus:
                results[("method1", judgment.id)] = [
                    kp for kp in pooled if kp.judgment_id == judgment.id]
        except Exception as e:  # noqa: BLE001 - aggregated per contract
            failures.append(RunFailure("method1", "*", str(e)))

    unioned: dict[str, tuple[KeyPoint, ...]] = {}
    for method in methods:
        collected = [
            kp
            for judgment in corpus
            for kp in results.get((method, judgment.id), [])
        ]
        unioned[method] = tuple(sorted(collected, key=kp_sort_key))
    return RunResult(key_points=unioned, failures=tuple(failures))


def _guard(fn, task):
    try:
        return ("ok", fn(task))
    except Exception as e:  # noqa: BLE001 - aggregated per contract
        log.warning("extraction failed for %s/%s: %s", task[0], task[1].id, e)
        return ("error", str(e))


def key_points_to_json(method: str, kps: Sequence[KeyPoint]) -> dict:
    """KP output structure: judgments ordered by id, key points by id."""
    by_judgment: dict[str, list[KeyPoint]] = {}
    for kp in kps:
        by_judgment.setdefault(kp.judgment_id, []).append(kp)
    return {
        "method": method,
        "judgments": [
            {
                "judgment_id": jid,
                "key_points": [
                    {
                        "id": kp.id,
                        "text": kp.text,
                        "source": kp.source,
                        "origin_ids": list(kp.origin_ids),
                    }
                    for kp in sorted(group, key=lambda k: k.id)
                ],
            }
            for jid, group in sorted(by_judgment.items())
        ],
    }


def key_points_from_json(data: dict) -> tuple[str, list[KeyPoint]]:
    method = data["method"]
    kps = []
    for entry in data["judgments"]:
        for raw in entry["key_points"]:
            kps.append(KeyPoint(
                id=raw["id"],
                judgment_id=entry["judgment_id"],
                text=raw["text"],
                source=raw["source"],
                method=method,
                origin_ids=tuple(raw.get("origin_ids", [])),
            ))
    return method, kps
