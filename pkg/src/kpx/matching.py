"""The matching task: assign each argument its best key point when the
confidence score clears the threshold, plus coverage metrics, threshold
sweeps, and the cross-method comparison table.

Scores are computed at sentence granularity and lifted to arguments by
taking the maximum over a text's sentences (mirroring how multi-sentence
arguments were reconciled during extraction). Coverage denominators
include every sentence, filtered or not; precision needs labeled matches,
which this corpus lacks, so reports say so instead of fabricating a proxy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import Argument
from .pipelines import KeyPoint

log = logging.getLogger(__name__)

COVERAGE_NOTES = {
    "sentence_denominator": "all sentences, including candidate-filtered ones",
    "precision": "requires labeled matches; not computed",
}


@dataclass(frozen=True)
class Assignment:
    argument_id: str
    kp_id: str | None
    score: float


@dataclass(frozen=True)
class MatchReport:
    method: str
    threshold: float
    assignments: tuple[Assignment, ...]
    argument_coverage: float
    sentence_coverage: float
    per_kp_counts: Mapping[str, int]
    kp_texts: Mapping[str, str] = field(default_factory=dict)
    scope: str = "per-judgment"

    def matched(self) -> int:
        return sum(1 for a in self.assignments if a.kp_id is not None)


def _kp_embedding_id(kp: KeyPoint) -> str:
    """Extracted KPs score via their source sentence/argument vector;
    generated KPs need a vector stored under their own id."""
    return kp.origin_ids[0] if kp.origin_ids else kp.id


def _group_key(arg_judgment: str, global_scope: bool) -> str:
    return "*" if global_scope else arg_judgment


def _best_scores(
    args: Sequence[Argument],
    kps: Sequence[KeyPoint],
    scorer,
    global_scope: bool = False,
) -> tuple[list[tuple[str, str | None, float]], np.ndarray, np.ndarray]:
    """Per-argument best (kp, score) plus the per-argument and
    per-sentence max-score arrays used by sweeps."""
    kp_groups: dict[str, list[KeyPoint]] = {}
    for kp in kps:
        kp_groups.setdefault(_group_key(kp.judgment_id, global_scope), []).append(kp)
    for group in kp_groups.values():
        group.sort(key=lambda k: k.id)

    best_rows: list[tuple[str, str | None, float]] = []
    arg_best: list[float] = []
    sent_best: list[float] = []
    for arg in args:
        group = kp_groups.get(_group_key(arg.judgment_id, global_scope), [])
        if not group or not arg.sentences:
            best_rows.append((arg.id, None, 0.0))
            arg_best.append(0.0)
            sent_best.extend(0.0 for _ in arg.sentences)
            continue
        sent_ids = [s.embedding_id for s in arg.sentences]
        col_ids = [_kp_embedding_id(kp) for kp in group]
        scores = scorer.score_matrix(sent_ids, col_ids)
        per_sentence = scores.max(axis=1)
        sent_best.extend(float(x) for x in per_sentence)
        top = float(scores.max())
        arg_best.append(top)
        # Among pairs achieving the max, the lexicographically smaller
        # kp id wins.
        winners = [group[j].id for i, j in zip(*np.nonzero(scores == top))]
        best_rows.append((arg.id, min(winners), top))
    return best_rows, np.asarray(arg_best), np.asarray(sent_best)


def match_arguments(
    args: Sequence[Argument],
    kps: Sequence[KeyPoint],
    scorer,
    threshold: float,
    method: str = "",
    global_scope: bool = False,
) -> MatchReport:
    """Assign each argument the key point with its highest score iff that
    score reaches ``threshold``; otherwise NONE. Coverage is the matched
    fraction, at argument and sentence granularity."""
    best_rows, arg_best, sent_best = _best_scores(args, kps, scorer, global_scope)
    per_kp_counts = {kp.id: 0 for kp in kps}
    assignments = []
    for arg_id, kp_id, score in best_rows:
        if kp_id is not None and score >= threshold:
            assignments.append(Assignment(arg_id, kp_id, score))
            per_kp_counts[kp_id] += 1
        else:
            assignments.append(Assignment(arg_id, None, score))
    argument_coverage = float(np.mean(arg_best >= threshold)) if len(args) else 0.0
    sentence_coverage = float(np.mean(sent_best >= threshold)) if len(sent_best) else 0.0
    return MatchReport(
        method=method or (kps[0].method if kps else ""),
        threshold=threshold,
        assignments=tuple(assignments),
        argument_coverage=argument_coverage,
        sentence_coverage=sentence_coverage,
        per_kp_counts=per_kp_counts,
        kp_texts={kp.id: kp.text for kp in kps},
        scope="global" if global_scope else "per-judgment",
    )


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    argument_coverage: float
    sentence_coverage: float


def coverage_sweep(
    args: Sequence[Argument],
    kps: Sequence[KeyPoint],
    scorer,
    thresholds: Sequence[float],
    global_scope: bool = False,
) -> list[SweepPoint]:
    """Coverage at each threshold of an ascending sweep; both coverages
    are non-increasing in the threshold by construction."""
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly ascending")
    _, arg_best, sent_best = _best_scores(args, kps, scorer, global_scope)
    points = []
    for t in thresholds:
        points.append(SweepPoint(
            threshold=float(t),
            argument_coverage=float(np.mean(arg_best >= t)) if len(arg_best) else 0.0,
            sentence_coverage=float(np.mean(sent_best >= t)) if len(sent_best) else 0.0,
        ))
    return points


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[dict, ...]
    argument_view: Mapping[str, Mapping[str, str | None]]
    notes: Mapping[str, str]

    def to_json(self) -> dict:
        return {
            "rows": list(self.rows),
            "argument_view": {k: dict(v) for k, v in self.argument_view.items()},
            "notes": dict(self.notes),
        }

    def to_text(self) -> str:
        headers = ["method", "kp_count", "matched_args", "mean_per_kp",
                   "max_per_kp", "arg_coverage", "sent_coverage"]
        table = [headers] + [
            [
                str(r["method"]), str(r["kp_count"]), str(r["matched_arguments"]),
                f"{r['mean_per_kp_matches']:.2f}", str(r["max_per_kp_matches"]),
                f"{r['argument_coverage']:.4f}", f"{r['sentence_coverage']:.4f}",
            ]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in table]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def compare_methods(reports: Sequence[MatchReport]) -> ComparisonTable:
    """Side-by-side method comparison: per-method KP statistics and the
    per-argument cross-method key-point listing."""
    if not reports:
        raise ValueError("need at least one report to compare")
    rows = []
    for r in reports:
        counts = list(r.per_kp_counts.values())
        rows.append({
            "method": r.method,
            "kp_count": len(r.per_kp_counts),
            "matched_arguments": r.matched(),
            "mean_per_kp_matches": float(np.mean(counts)) if counts else 0.0,
            "max_per_kp_matches": int(max(counts)) if counts else 0,
            "argument_coverage": r.argument_coverage,
            "sentence_coverage": r.sentence_coverage,
            "threshold": r.threshold,
            "scope": r.scope,
        })
    argument_view: dict[str, dict[str, str | None]] = {}
    for r in reports:
        for a in r.assignments:
            argument_view.setdefault(a.argument_id, {})[r.method] = a.kp_id
    argument_view = {k: argument_view[k] for k in sorted(argument_view)}
    return ComparisonTable(rows=tuple(rows), argument_view=argument_view,
                           notes=dict(COVERAGE_NOTES))


def report_to_json(report: MatchReport) -> dict:
    return {
        "method": report.method,
        "threshold": report.threshold,
        "scope": report.scope,
        "assignments": [
            {"argument_id": a.argument_id, "kp_id": a.kp_id, "score": a.score}
            for a in report.assignments
        ],
        "argument_coverage": report.argument_coverage,
        "sentence_coverage": report.sentence_coverage,
        "per_kp_counts": dict(sorted(report.per_kp_counts.items())),
        "kp_texts": dict(sorted(report.kp_texts.items())),
        "notes": dict(COVERAGE_NOTES),
    }


def report_from_json(data: dict) -> MatchReport:
    return MatchReport(
        method=data["method"],
        threshold=data["threshold"],
        assignments=tuple(
            Assignment(a["argument_id"], a["kp_id"], a["score"])
            for a in data["assignments"]
        ),
        argument_coverage=data["argument_coverage"],
        sentence_coverage=data["sentence_coverage"],
        per_kp_counts=data["per_kp_counts"],
        kp_texts=data.get("kp_texts", {}),
        scope=data.get("scope", "per-judgment"),
    )
