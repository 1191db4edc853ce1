"""Relevance-margin losses: static, adaptive (self-distilled) and distributed targets.

All variants share one inner term, ``margin - target`` with
``margin = cos(q_i, d+_i) - cos(q_i, d-_.)``, and are aggregated as a mean
squared error over the batch. They differ only in the target and in which
negative feeds the margin:

========================  ==========================  =====================
variant                   margin negative             target
========================  ==========================  =====================
static                    ``d-_i`` (``d-_j`` in-batch)  ``epsilon``
adaptive                  ``d-_i`` (``d-_j`` in-batch)  ``(1 + cos(d+_i, d-_.)) / 2``
distributed (in-batch)    ``d-_i`` always             ``(1 + cos(d+_i, d-_j)) / 2``
========================  ==========================  =====================

Per-triplet losses average over ``B`` terms, in-batch ones over ``B**2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from relmargin._backend import kernels
from relmargin.errors import ShapeError
from relmargin.geometry import as_matrix

_SLACK = 1e-12


class Variant(str, enum.Enum):
    STATIC = "static"
    ADAPTIVE = "adaptive"
    DISTRIBUTED = "distributed"


_CODES = {Variant.STATIC: 0, Variant.ADAPTIVE: 1, Variant.DISTRIBUTED: 2}


@dataclass(frozen=True)
class LossSpec:
    """Which loss to optimize.

    ``epsilon`` is only meaningful for the static variant and defaults to 1.0
    there. ``in_batch`` defaults to False for static/adaptive and is forced
    (and must not be disabled) for distributed targets.
    """

    variant: Variant
    epsilon: float | None = None
    in_batch: bool | None = None

    def __post_init__(self):
        variant = Variant(self.variant)
        object.__setattr__(self, "variant", variant)
        if variant is Variant.STATIC:
            eps = 1.0 if self.epsilon is None else float(self.epsilon)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"static epsilon must lie in [0, 1], got {eps}")
            object.__setattr__(self, "epsilon", eps)
        elif self.epsilon is not None:
            raise ValueError(f"epsilon only applies to the static variant, not {variant.value}")
        if variant is Variant.DISTRIBUTED:
            if self.in_batch is False:
                raise ValueError("distributed targets always use in-batch negatives")
            object.__setattr__(self, "in_batch", True)
        else:
            object.__setattr__(self, "in_batch", bool(self.in_batch))

    @property
    def pairwise(self) -> bool:
        """True when the loss has B*B inner terms."""
        return self.in_batch

    @property
    def label(self) -> str:
        if self.variant is Variant.STATIC:
            base = f"static(eps={self.epsilon:g})"
        else:
            base = self.variant.value
        if self.in_batch and self.variant is not Variant.DISTRIBUTED:
            base += "+in-batch"
        return base


@dataclass(frozen=True)
class TripletBatch:
    """B aligned (query, positive, negative) embedding rows."""

    queries: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    ids: tuple[tuple[str, str, str], ...] | None = None

    def __post_init__(self):
        q = as_matrix(self.queries, "queries")
        p = as_matrix(self.positives, "positives")
        n = as_matrix(self.negatives, "negatives")
        if not (q.shape == p.shape == n.shape):
            raise ShapeError(f"batch shapes differ: {q.shape}, {p.shape}, {n.shape}")
        if q.shape[0] < 1:
            raise ShapeError("empty triplet batch")
        if self.ids is not None and len(self.ids) != q.shape[0]:
            raise ShapeError("ids do not align with the batch rows")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "positives", p)
        object.__setattr__(self, "negatives", n)

    def __len__(self):
        return self.queries.shape[0]

    @property
    def dim(self) -> int:
        return self.queries.shape[1]


class InstanceLoss(NamedTuple):
    i: int
    j: int
    margin: float
    target: float
    squared_term: float


@dataclass
class LossReport:
    total: float
    per_instance: list[InstanceLoss]
    target_stats: tuple[float, float, float]
    # raw cosines: cos(q_i, d+_i), cos(q_i, d-_j), cos(d+_i, d-_j)
    qp: np.ndarray = field(repr=False, default=None)
    qn: np.ndarray = field(repr=False, default=None)
    pn: np.ndarray = field(repr=False, default=None)


class LossGradient(NamedTuple):
    total: float
    queries: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    pn: np.ndarray


def _check_sim(name, value):
    if not -1.0 - _SLACK <= value <= 1.0 + _SLACK:
        raise ValueError(f"{name} must be a cosine in [-1, 1], got {value}")


def scaled_target(doc_sim):
    """Map a document-document cosine onto the [0, 1] target scale."""
    return (1 + doc_sim) / 2


def inner_static(sim_qp, sim_qn, epsilon):
    _check_sim("sim_qp", sim_qp)
    _check_sim("sim_qn", sim_qn)
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return (sim_qp - sim_qn) - epsilon


def inner_adaptive(sim_qp, sim_qn, sim_pn):
    """Margin minus the scaled positive/negative document similarity.

    Works on any numeric type, so ``fractions.Fraction`` inputs give exact
    results.
    """
    _check_sim("sim_qp", sim_qp)
    _check_sim("sim_qn", sim_qn)
    _check_sim("sim_pn", sim_pn)
    return (sim_qp - sim_qn) - scaled_target(sim_pn)


def inner_distributed(sim_qp_i, sim_qn_ii, sim_pn_ij):
    # same arithmetic as adaptive; the caller pins the margin to the triplet's own negative
    return inner_adaptive(sim_qp_i, sim_qn_ii, sim_pn_ij)


def fused(spec: LossSpec, Q, P, N, with_grad=True):
    """Raw kernel call on C-contiguous float64 batch matrices."""
    return kernels.loss_grad(_CODES[spec.variant], spec.in_batch,
                             spec.epsilon if spec.epsilon is not None else 0.0,
                             Q, P, N, with_grad)


def instance_index(spec: LossSpec, B: int) -> list[tuple[int, int, int]]:
    """(i, j, margin negative) for every inner term, in canonical order."""
    if not spec.pairwise:
        return [(i, i, i) for i in range(B)]
    if spec.variant is Variant.DISTRIBUTED:
        return [(i, j, i) for i in range(B) for j in range(B)]
    return [(i, j, j) for i in range(B) for j in range(B)]


def batch_loss(spec: LossSpec, batch: TripletBatch) -> LossReport:
    total, terms, sqp, sqn, spn, *_ = fused(spec, batch.queries, batch.positives,
                                             batch.negatives, with_grad=False)
    rows = []
    targets = []
    for c, (i, j, jn) in enumerate(instance_index(spec, len(batch))):
        margin = float(sqp[i] - sqn[i, jn])
        target = spec.epsilon if spec.variant is Variant.STATIC else float(scaled_target(spn[i, j]))
        term = float(terms[c])
        rows.append(InstanceLoss(i, j, margin, target, term * term))
        targets.append(target)
    t = np.asarray(targets)
    stats = (float(np.mean(t)), float(t.min()), float(t.max()))
    return LossReport(float(total), rows, stats, sqp, sqn, spn)


def batch_loss_grad(spec: LossSpec, batch: TripletBatch) -> LossGradient:
    """Analytic gradient of the batch total with respect to every embedding row.

    Rows are per batch slot; a vector appearing in several slots receives one
    gradient per slot and callers sum them.
    """
    total, _terms, _sqp, _sqn, spn, gQ, gP, gN = fused(spec, batch.queries, batch.positives,
                                                       batch.negatives, with_grad=True)
    return LossGradient(float(total), gQ, gP, gN, spn)


def make_batch(queries: Sequence, positives: Sequence, negatives: Sequence, ids=None) -> TripletBatch:
    return TripletBatch(np.asarray(queries, dtype=np.float64),
                        np.asarray(positives, dtype=np.float64),
                        np.asarray(negatives, dtype=np.float64),
                        ids)
