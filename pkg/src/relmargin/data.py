"""Triplet, qrels and run-file I/O plus the synthetic topic corpus.

File formats (UTF-8, LF):

* triplets: ``qid<TAB>pos_id<TAB>neg_id``
* qrels:    ``qid 0 docid grade`` (any whitespace)
* run:      ``qid Q0 docid rank score tag`` (any whitespace)

Ties are broken by doc id ascending everywhere, and runs are always held in
canonical order: queries by id, documents by score descending.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from relmargin.embeddings import EmbeddingTable
from relmargin.errors import DataFormatError

log = logging.getLogger(__name__)


def _read_lines(path):
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: no such file")
    return path.read_text(encoding="utf-8").splitlines()


def _valid_id(s: str) -> bool:
    return bool(s) and not any(ch.isspace() for ch in s)


# -- triplets ---------------------------------------------------------------


@dataclass
class TripletDataset:
    triples: list[tuple[str, str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.triples = [tuple(t) for t in self.triples]
        for n, (q, p, d) in enumerate(self.triples):
            if not (_valid_id(q) and _valid_id(p) and _valid_id(d)):
                raise DataFormatError(f"triple {n}: ids must be nonempty and whitespace-free")
            if p == d:
                raise DataFormatError(f"triple {n}: positive and negative are both {p!r}")

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        return iter(self.triples)

    def __getitem__(self, i):
        return self.triples[i]

    def ids(self) -> set[str]:
        return {x for t in self.triples for x in t}

    def batches(self, batch_size: int):
        """Consecutive slices in file order; the last one may be short."""
        for lo in range(0, len(self.triples), batch_size):
            yield self.triples[lo:lo + batch_size]


def load_triplets(path) -> TripletDataset:
    triples = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(_valid_id(f) for f in fields):
            raise DataFormatError(f"{path}:{lineno}: expected 'qid<TAB>pos_id<TAB>neg_id', got {line!r}")
        if fields[1] == fields[2]:
            raise DataFormatError(f"{path}:{lineno}: positive and negative are both {fields[1]!r}")
        triples.append(tuple(fields))
    return TripletDataset(triples)


def write_triplets(dataset: TripletDataset, path) -> None:
    Path(path).write_text("".join(f"{q}\t{p}\t{n}\n" for q, p, n in dataset), encoding="utf-8")


# -- qrels ------------------------------------------------------------------


@dataclass
class QrelsTable:
    """Graded judgments ``judgments[qid][docid] -> grade`` in ``0..max_grade``."""

    judgments: dict[str, dict[str, int]] = field(default_factory=dict)
    max_grade: int = 3

    def __post_init__(self):
        for qid, docs in self.judgments.items():
            for doc, grade in docs.items():
                if not 0 <= grade <= self.max_grade:
                    raise DataFormatError(f"grade {grade} for ({qid}, {doc}) outside 0..{self.max_grade}")

    def queries(self) -> list[str]:
        return sorted(self.judgments)

    def for_query(self, qid: str) -> dict[str, int]:
        return self.judgments.get(qid, {})

    def relevant(self, qid: str, threshold: int = 1) -> set[str]:
        return {d for d, g in self.for_query(qid).items() if g > threshold}

    def subset(self, qids: Iterable[str]) -> "QrelsTable":
        keep = set(qids)
        return QrelsTable({q: dict(d) for q, d in self.judgments.items() if q in keep}, self.max_grade)

    def __len__(self):
        return sum(len(d) for d in self.judgments.values())


def parse_qrels(path, max_grade: int = 3) -> QrelsTable:
    judgments: dict[str, dict[str, int]] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 4:
            raise DataFormatError(f"{path}:{lineno}: expected 'qid 0 docid grade', got {line!r}")
        qid, _, doc, grade_s = fields
        try:
            grade = int(grade_s)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: grade {grade_s!r} is not an integer") from None
        if not 0 <= grade <= max_grade:
            raise DataFormatError(f"{path}:{lineno}: grade {grade} outside 0..{max_grade}")
        docs = judgments.setdefault(qid, {})
        if doc in docs:
            raise DataFormatError(f"{path}:{lineno}: duplicate judgment for ({qid}, {doc})")
        docs[doc] = grade
    return QrelsTable(judgments, max_grade)


def write_qrels(qrels: QrelsTable, path) -> None:
    lines = []
    for qid in qrels.queries():
        for doc in sorted(qrels.judgments[qid]):
            lines.append(f"{qid} 0 {doc} {qrels.judgments[qid][doc]}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


# -- runs -------------------------------------------------------------------


class RunRow(NamedTuple):
    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str


@dataclass
class RunFile:
    rows: list[RunRow] = field(default_factory=list)

    def queries(self) -> list[str]:
        return sorted({r.query_id for r in self.rows})

    def by_query(self) -> dict[str, list[RunRow]]:
        out: dict[str, list[RunRow]] = {}
        for r in self.rows:
            out.setdefault(r.query_id, []).append(r)
        return out

    def ranking(self, qid: str) -> list[str]:
        return [r.doc_id for r in self.rows if r.query_id == qid]

    def rankings(self) -> dict[str, list[str]]:
        return {q: [r.doc_id for r in rows] for q, rows in self.by_query().items()}

    def __len__(self):
        return len(self.rows)


def canonical_order(scored: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
    """Sort (doc_id, score) pairs by score descending, doc id ascending."""
    return sorted(scored, key=lambda ds: (-ds[1], ds[0]))


def build_run(scores: dict[str, Iterable[tuple[str, float]]], tag: str = "relmargin") -> RunFile:
    rows = []
    for qid in sorted(scores):
        for rank, (doc, score) in enumerate(canonical_order(scores[qid]), start=1):
            rows.append(RunRow(qid, doc, rank, float(score), tag))
    return RunFile(rows)


def canonicalize(run: RunFile) -> RunFile:
    """Re-sort every query canonically and renumber ranks from 1."""
    rows = []
    for qid, qrows in sorted(run.by_query().items()):
        ordered = sorted(qrows, key=lambda r: (-r.score, r.doc_id))
        rows.extend(RunRow(qid, r.doc_id, k, r.score, r.tag) for k, r in enumerate(ordered, start=1))
    return RunFile(rows)


def parse_run(path) -> RunFile:
    """Read a TREC run; ranks must be unique and contiguous from 1 per query.

    Rows whose order disagrees with their scores (or with the doc-id
    tie-break) are re-sorted with a warning.
    """
    per_query: dict[str, list[RunRow]] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 6:
            raise DataFormatError(f"{path}:{lineno}: expected 'qid Q0 docid rank score tag', got {line!r}")
        qid, _, doc, rank_s, score_s, tag = fields
        try:
            rank, score = int(rank_s), float(score_s)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad rank/score in {line!r}") from None
        if not math.isfinite(score):
            raise DataFormatError(f"{path}:{lineno}: non-finite score")
        per_query.setdefault(qid, []).append(RunRow(qid, doc, rank, score, tag))
    rows = []
    for qid in sorted(per_query):
        qrows = per_query[qid]
        docs = [r.doc_id for r in qrows]
        if len(set(docs)) != len(docs):
            raise DataFormatError(f"{path}: query {qid} lists a document twice")
        ranks = sorted(r.rank for r in qrows)
        if ranks != list(range(1, len(qrows) + 1)):
            raise DataFormatError(f"{path}: query {qid} ranks are not contiguous from 1")
        by_rank = sorted(qrows, key=lambda r: r.rank)
        ordered = sorted(qrows, key=lambda r: (-r.score, r.doc_id))
        if [r.doc_id for r in by_rank] != [r.doc_id for r in ordered]:
            log.warning("%s: query %s rank order disagrees with scores; re-sorted", path, qid)
        rows.extend(RunRow(qid, r.doc_id, k, r.score, r.tag) for k, r in enumerate(ordered, start=1))
    return RunFile(rows)


def write_run(run: RunFile, path) -> None:
    Path(path).write_text(
        "".join(f"{r.query_id} Q0 {r.doc_id} {r.rank} {r.score!r} {r.tag}\n" for r in run.rows),
        encoding="utf-8",
    )


# -- synthetic corpus ---------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Topic-cluster corpus parameters.

    ``hardness`` is the probability that a triple's negative comes from the
    topic whose center is closest to the positive's topic; otherwise the
    negative topic is uniform over the remaining topics. ``anisotropy`` pulls
    every topic center toward one shared direction, mimicking the high
    baseline cosine of pretrained encoders. ``doc_noise``/``query_noise`` are
    the expected norms of the perturbation added to a unit topic center.
    """

    n_topics: int = 32
    docs_per_topic: int = 8
    queries_per_topic: int = 4
    dim: int = 32
    hardness: float = 0.3
    seed: int = 0
    doc_noise: float = 1.2
    query_noise: float = 0.3
    anisotropy: float = 1.0
    graded: bool = False
    val_queries_per_topic: int = 1
    triples_per_query: int = 32

    def __post_init__(self):
        if self.n_topics < 2:
            raise ValueError("synthetic corpus needs at least 2 topics to draw negatives")
        for name in ("docs_per_topic", "queries_per_topic", "triples_per_query"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not 0.0 <= self.hardness <= 1.0:
            raise ValueError("hardness must lie in [0, 1]")
        if min(self.doc_noise, self.query_noise, self.anisotropy) < 0.0:
            raise ValueError("noise and anisotropy must be non-negative")
        if not 0 <= self.val_queries_per_topic < self.queries_per_topic:
            raise ValueError("val_queries_per_topic must leave at least one training query per topic")


# graded mode: documents cycle through noise tiers, nearer ones judged higher
_TIERS = ((0.5, 3), (1.0, 2), (1.5, 1))


@dataclass
class SyntheticCorpus:
    features: EmbeddingTable
    triplets: TripletDataset
    qrels: QrelsTable
    split: dict[str, str]
    topic_of: dict[str, int]
    centers: np.ndarray
    query_ids: list[str]
    doc_ids: list[str]

    def queries(self, split: str) -> list[str]:
        return [q for q in self.query_ids if self.split[q] == split]

    def oracle_table(self) -> EmbeddingTable:
        """Every id mapped to its exact topic center."""
        ids = self.query_ids + self.doc_ids
        return EmbeddingTable(ids, self.centers[[self.topic_of[i] for i in ids]], self.features.seed)


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    rng = np.random.default_rng(spec.seed)
    T, D = spec.n_topics, spec.dim
    shared = _unit(rng.standard_normal(D))
    centers = _unit(_unit(rng.standard_normal((T, D))) + spec.anisotropy * shared)

    nd = T * spec.docs_per_topic
    nq = T * spec.queries_per_topic
    doc_ids = [f"d{k:0{len(str(nd))}d}" for k in range(nd)]
    query_ids = [f"q{k:0{len(str(nq))}d}" for k in range(nq)]
    topic_of: dict[str, int] = {}
    grade_of_doc: dict[str, int] = {}

    doc_vecs = np.empty((nd, D))
    for k, doc in enumerate(doc_ids):
        t, slot = divmod(k, spec.docs_per_topic)
        scale, grade = _TIERS[slot % len(_TIERS)] if spec.graded else (1.0, 3)
        noise = rng.standard_normal(D) / np.sqrt(D)
        doc_vecs[k] = _unit(centers[t] + spec.doc_noise * scale * noise)
        topic_of[doc] = t
        grade_of_doc[doc] = grade

    query_vecs = np.empty((nq, D))
    split: dict[str, str] = {}
    for k, qid in enumerate(query_ids):
        t, slot = divmod(k, spec.queries_per_topic)
        noise = rng.standard_normal(D) / np.sqrt(D)
        query_vecs[k] = _unit(centers[t] + spec.query_noise * noise)
        topic_of[qid] = t
        held_out = slot >= spec.queries_per_topic - spec.val_queries_per_topic
        split[qid] = "validation" if held_out else "train"

    judgments = {
        qid: {doc: (grade_of_doc[doc] if topic_of[doc] == topic_of[qid] else 0) for doc in doc_ids}
        for qid in query_ids
    }
    qrels = QrelsTable(judgments, max_grade=3)

    by_topic = [doc_ids[t * spec.docs_per_topic:(t + 1) * spec.docs_per_topic] for t in range(T)]
    center_sim = centers @ centers.T
    np.fill_diagonal(center_sim, -np.inf)
    nearest = np.argmax(center_sim, axis=1)

    triples = []
    for qid in query_ids:
        if split[qid] != "train":
            continue
        t = topic_of[qid]
        positives = [d for d in by_topic[t] if grade_of_doc[d] > 1]
        order = rng.permutation(len(positives))
        for n in range(spec.triples_per_query):
            pos = positives[order[n % len(positives)]]
            if rng.random() < spec.hardness:
                neg_topic = int(nearest[t])
            else:
                neg_topic = int(rng.integers(T - 1))
                neg_topic += neg_topic >= t
            neg = by_topic[neg_topic][int(rng.integers(spec.docs_per_topic))]
            triples.append((qid, pos, neg))
    triples = [triples[i] for i in rng.permutation(len(triples))]

    features = EmbeddingTable(query_ids + doc_ids, np.vstack([query_vecs, doc_vecs]), spec.seed)
    return SyntheticCorpus(features, TripletDataset(triples), qrels, split, topic_of,
                           centers, query_ids, doc_ids)


def write_split(split: dict[str, str], path) -> None:
    Path(path).write_text("".join(f"{q}\t{s}\n" for q, s in sorted(split.items())), encoding="utf-8")


def load_split(path) -> dict[str, str]:
    split = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2 or fields[1] not in ("train", "validation"):
            raise DataFormatError(f"{path}:{lineno}: expected 'qid<TAB>train|validation'")
        split[fields[0]] = fields[1]
    return split
