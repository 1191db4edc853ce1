"""Graded-relevance ranking metrics and the full-ranking / reranking harnesses.

nDCG uses gain ``2**grade - 1`` and discount ``1 / log2(rank + 1)``;
Recall and Hits binarize grades with ``grade > threshold``. Queries whose
ideal DCG (nDCG) or relevant set (Recall, Hits) is empty are excluded from
means and listed in :attr:`EvalReport.excluded`, as trec_eval does.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from relmargin._backend import kernels
from relmargin.data import QrelsTable, RunFile, RunRow, build_run
from relmargin.embeddings import EmbeddingTable
from relmargin.errors import DataFormatError

log = logging.getLogger(__name__)

METRIC_NAMES = {"ndcg": "nDCG", "recall": "Recall", "hits": "Hits"}


@dataclass(frozen=True)
class MetricSpec:
    name: str
    k: int
    binarization_threshold: int = 1

    def __post_init__(self):
        canon = METRIC_NAMES.get(str(self.name).lower())
        if canon is None:
            raise ValueError(f"unknown metric {self.name!r}; expected one of nDCG, Recall, Hits")
        object.__setattr__(self, "name", canon)
        if self.k < 1:
            raise ValueError("metric cutoff k must be >= 1")
        if self.binarization_threshold < 0:
            raise ValueError("binarization threshold must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.name}@{self.k}"

    def score(self, ranking: Sequence[str], judged: dict[str, int]):
        if self.name == "nDCG":
            return ndcg_at_k(ranking, judged, self.k)
        if self.name == "Recall":
            return recall_at_k(ranking, judged, self.k, self.binarization_threshold)
        return hits_at_k(ranking, judged, self.k, self.binarization_threshold)


def parse_metric(text: str, default_k: int = 10, threshold: int = 1) -> MetricSpec:
    """``"nDCG@10"`` or ``"recall"`` (cutoff taken from ``default_k``)."""
    m = re.fullmatch(r"\s*([A-Za-z]+)\s*(?:@\s*(\d+))?\s*", text)
    if m is None:
        raise ValueError(f"cannot parse metric {text!r}")
    return MetricSpec(m.group(1), int(m.group(2)) if m.group(2) else default_k, threshold)


def binarize(grade: int, threshold: int = 1) -> bool:
    return grade > threshold


def _check_ranking(ranking):
    if len(set(ranking)) != len(ranking):
        dup = next(d for i, d in enumerate(ranking) if d in ranking[:i])
        raise DataFormatError(f"document {dup!r} appears twice in the ranking")


def _dcg(grades):
    return sum((2 ** g - 1) / math.log2(rank + 1) for rank, g in enumerate(grades, start=1))


def ndcg_at_k(ranking: Sequence[str], judged: dict[str, int], k: int) -> float | None:
    """nDCG@k, or ``None`` when no judged document has a positive grade."""
    _check_ranking(ranking)
    ideal = _dcg(sorted(judged.values(), reverse=True)[:k])
    if ideal == 0:
        return None
    return _dcg(judged.get(d, 0) for d in ranking[:k]) / ideal


def recall_at_k(ranking: Sequence[str], judged: dict[str, int], k: int, threshold: int = 1) -> float | None:
    """Fraction of relevant documents in the top k, ``None`` without relevant documents."""
    _check_ranking(ranking)
    relevant = {d for d, g in judged.items() if binarize(g, threshold)}
    if not relevant:
        return None
    return len(relevant.intersection(ranking[:k])) / len(relevant)


def hits_at_k(ranking: Sequence[str], judged: dict[str, int], k: int, threshold: int = 1) -> int:
    """Raw count of relevant documents within the top k."""
    _check_ranking(ranking)
    return sum(1 for d in ranking[:k] if binarize(judged.get(d, 0), threshold))


def full_rank(table: EmbeddingTable, query_ids: Iterable[str], doc_ids: Iterable[str], k: int,
              tag: str = "full") -> RunFile:
    """Exhaustive cosine ranking of ``doc_ids`` for each query, top ``k`` kept."""
    query_ids, doc_ids = list(query_ids), list(doc_ids)
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query_ids or not doc_ids:
        return RunFile([])
    Q = table.matrix(query_ids)
    Dm = table.matrix(doc_ids)
    S = kernels.pairwise_cosine(Q, Dm)
    docs_arr = np.asarray(doc_ids)
    # lexsort: last key primary -> score descending, then doc id ascending
    id_order = np.argsort(np.argsort(docs_arr, kind="stable"), kind="stable")
    rows = []
    for qi, qid in sorted(enumerate(query_ids), key=lambda x: x[1]):
        order = np.lexsort((id_order, -S[qi]))[:k]
        rows.extend(RunRow(qid, doc_ids[j], rank, float(S[qi, j]), tag)
                    for rank, j in enumerate(order, start=1))
    return RunFile(rows)


def rerank(baseline: RunFile, table: EmbeddingTable, depth: int = 1000, tag: str = "rerank") -> RunFile:
    """Re-score each query's top ``depth`` baseline documents by cosine."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    scores = {}
    for qid, rows in baseline.by_query().items():
        cands = [r.doc_id for r in sorted(rows, key=lambda r: r.rank)[:depth]]
        S = kernels.pairwise_cosine(table.matrix([qid]), table.matrix(cands))[0]
        scores[qid] = list(zip(cands, S.tolist()))
    return build_run(scores, tag)


@dataclass
class EvalReport:
    specs: list[MetricSpec]
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]
    excluded: dict[str, list[str]] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def vector(self, label: str, query_ids: Sequence[str]) -> np.ndarray:
        return np.asarray([self.per_query[label][q] for q in query_ids])


def evaluate_run(run: RunFile, qrels: QrelsTable, specs: Sequence[MetricSpec]) -> EvalReport:
    """Per-query scores over the qrels queries plus their arithmetic means.

    Queries missing from the run score as an empty ranking; run queries
    without judgments are skipped with a warning.
    """
    rankings = run.rankings()
    skipped = sorted(set(rankings) - set(qrels.judgments))
    if skipped:
        log.warning("%d run queries have no judgments and were skipped: %s", len(skipped), skipped[:5])
    per_query: dict[str, dict[str, float]] = {}
    means: dict[str, float] = {}
    excluded: dict[str, list[str]] = {}
    for spec in specs:
        scores, dropped = {}, []
        for qid in qrels.queries():
            judged = qrels.for_query(qid)
            if spec.name == "Hits" and not qrels.relevant(qid, spec.binarization_threshold):
                dropped.append(qid)
                continue
            value = spec.score(rankings.get(qid, []), judged)
            if value is None:
                dropped.append(qid)
            else:
                scores[qid] = float(value)
        per_query[spec.label] = scores
        means[spec.label] = math.fsum(scores.values()) / len(scores) if scores else 0.0
        excluded[spec.label] = dropped
    return EvalReport(list(specs), per_query, means, excluded, skipped)


def metrics_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["query_id", "metric", "k", "score"])
    for spec in report.specs:
        for qid, score in sorted(report.per_query[spec.label].items()):
            writer.writerow([qid, spec.name, spec.k, repr(score)])
        writer.writerow(["ALL", spec.name, spec.k, repr(report.means[spec.label])])
    return buf.getvalue()


def read_metrics_csv(path) -> dict[str, dict[str, float]]:
    """``{"nDCG@10": {qid: score, ..., "ALL": mean}}`` from :func:`metrics_csv` output."""
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(f"{row['metric']}@{row['k']}", {})[row["query_id"]] = float(row["score"])
    return out
