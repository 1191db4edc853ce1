"""Deterministic ADAM training of a free embedding table on triplet batches."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from relmargin._backend import kernels
from relmargin.data import TripletDataset
from relmargin.embeddings import EmbeddingTable, init_table, load_table, save_table  # noqa: F401
from relmargin.errors import DataFormatError, DegenerateVectorError, DivergenceError, ShapeError
from relmargin.geometry import sim_stats
from relmargin.loss import LossSpec, fused

log = logging.getLogger(__name__)

TELEMETRY_FIELDS = ("step", "loss", "lr", "target_mean", "target_min", "target_max", "eval_metric")


@dataclass
class TrainConfig:
    batch_size: int = 64
    base_lr: float | None = None  # None -> 5e-6 / batch_size
    weight_decay: float = 1e-6
    lr_gamma: float = 0.99999
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_every: int = 500
    patience: int = 16
    max_epochs: int = 1
    max_steps: int | None = None
    seed: int = 0
    restore_best: bool = True
    update_queries: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.base_lr is None:
            self.base_lr = 5e-6 / self.batch_size
        if self.base_lr < 0:
            raise ValueError("base_lr must be non-negative")
        if not 0.0 < self.lr_gamma <= 1.0:
            raise ValueError("lr_gamma must lie in (0, 1]")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be >= 1 when given")


class TelemetryRecord(NamedTuple):
    step: int
    loss: float
    lr: float
    target_mean: float
    target_min: float
    target_max: float
    eval_metric: float | None = None


@dataclass
class AdamState:
    """First/second moments and a per-row step count (rows update lazily)."""

    m: np.ndarray
    v: np.ndarray
    t: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape, beta1=0.9, beta2=0.999, eps=1e-8):
        shape = tuple(shape)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape[0], dtype=np.int64),
                   beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float,
              weight_decay: float, rows: np.ndarray | None = None):
    """One ADAM update with bias correction, then decoupled weight decay.

    With ``rows`` given, only ``params[rows]`` (and their moments) change and
    ``grads`` is aligned with ``rows``. Updates happen in place; the same
    objects are returned for convenience.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if rows is None:
        if grads.shape != params.shape:
            raise ShapeError(f"gradient shape {grads.shape} != parameter shape {params.shape}")
        rows = slice(None)
        t = state.t + 1
        state.t[...] = t
    else:
        rows = np.asarray(rows, dtype=np.int64)
        if grads.shape != (rows.shape[0],) + params.shape[1:]:
            raise ShapeError(f"gradient shape {grads.shape} does not match {rows.shape[0]} rows")
        t = state.t[rows] + 1
        state.t[rows] = t
    if state.m.shape != params.shape:
        raise ShapeError("optimizer state does not match parameters")
    b1, b2 = state.beta1, state.beta2
    m = b1 * state.m[rows] + (1.0 - b1) * grads
    v = b2 * state.v[rows] + (1.0 - b2) * (grads * grads)
    state.m[rows] = m
    state.v[rows] = v
    t = np.asarray(t, dtype=np.float64).reshape((-1,) + (1,) * (params.ndim - 1))
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    p = params[rows] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    params[rows] = p - (lr * weight_decay) * p
    return params, state


def lr_at(step: int, base_lr: float, gamma: float) -> float:
    """Exponentially decayed learning rate for 0-based ``step``."""
    if step < 0:
        raise ValueError("step must be non-negative")
    return base_lr * gamma ** step


def early_stop(history: Sequence[float], patience: int) -> bool:
    """True once the last ``patience`` checks all failed to beat the earlier best."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    if len(history) <= patience:
        return False
    return max(history[-patience:]) <= max(history[:-patience])


def rolling_mean(series: Sequence[float], window: int = 32) -> list[float]:
    """Trailing mean: element k averages the last ``min(k + 1, window)`` values."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = list(series)
    return [math.fsum(values[max(0, k + 1 - window):k + 1]) / min(k + 1, window)
            for k in range(len(values))]


@dataclass
class TrainResult:
    table: EmbeddingTable
    telemetry: list[TelemetryRecord]
    steps: int
    best_step: int | None = None
    best_metric: float | None = None
    stopped_early: bool = False
    evals: list[tuple[int, float]] = field(default_factory=list)

    def __iter__(self):
        # allows ``table, telemetry = train(...)``
        return iter((self.table, self.telemetry))


EvalHook = Callable[[EmbeddingTable], float]


def train(config: TrainConfig, spec: LossSpec, dataset: TripletDataset,
          table: EmbeddingTable, eval_hook: EvalHook | None = None) -> TrainResult:
    """Run ADAM over ``dataset`` in file order; the input table is not modified.

    Telemetry holds one record per step. ``eval_hook`` is called on the live
    table every ``eval_every`` steps and once more after the final step; its
    scores drive early stopping and best-checkpoint restoration.
    """
    if len(dataset) == 0:
        raise DataFormatError("cannot train on an empty dataset")
    missing = sorted(dataset.ids() - set(table.ids))
    if missing:
        raise DataFormatError(f"{len(missing)} dataset ids missing from the table, e.g. {missing[:3]}")

    table = table.copy()
    V = table.vectors
    state = AdamState.zeros(V.shape, config.adam_beta1, config.adam_beta2, config.adam_eps)
    q_rows = table.rows(t[0] for t in dataset)
    p_rows = table.rows(t[1] for t in dataset)
    n_rows = table.rows(t[2] for t in dataset)
    n = len(dataset)
    B = config.batch_size

    telemetry: list[TelemetryRecord] = []
    history: list[float] = []
    evals: list[tuple[int, float]] = []
    best_metric, best_step, best_vectors = None, None, None
    step = 0
    stopped = False

    def evaluate(at_step):
        nonlocal best_metric, best_step, best_vectors
        metric = float(eval_hook(table))
        history.append(metric)
        evals.append((at_step, metric))
        if best_metric is None or metric > best_metric:
            best_metric, best_step, best_vectors = metric, at_step, V.copy()
        return metric

    for _epoch in range(config.max_epochs):
        for lo in range(0, n, B):
            hi = min(n, lo + B)
            qr, pr, nr = q_rows[lo:hi], p_rows[lo:hi], n_rows[lo:hi]
            lr = lr_at(step, config.base_lr, config.lr_gamma)
            try:
                total, _terms, _sqp, _sqn, spn, gQ, gP, gN = fused(spec, V[qr], V[pr], V[nr])
            except DegenerateVectorError as exc:
                raise DivergenceError(f"step {step + 1}: {exc}", None, telemetry) from exc
            t_mean, t_min, t_max = sim_stats(spn)
            if not math.isfinite(total):
                record = TelemetryRecord(step + 1, total, lr, t_mean, t_min, t_max)
                raise DivergenceError(f"step {step + 1}: non-finite loss {total!r}", record, telemetry)

            if config.update_queries:
                rows, slot_grads = np.concatenate([qr, pr, nr]), np.vstack([gQ, gP, gN])
            else:
                rows, slot_grads = np.concatenate([pr, nr]), np.vstack([gP, gN])
            uniq, inverse = np.unique(rows, return_inverse=True)
            grads = np.zeros((uniq.shape[0], V.shape[1]))
            kernels.scatter_add_rows(grads, inverse.astype(np.int64), np.ascontiguousarray(slot_grads))
            adam_step(V, grads, state, lr, config.weight_decay, rows=uniq)
            step += 1

            metric = None
            if eval_hook is not None and step % config.eval_every == 0:
                metric = evaluate(step)
            telemetry.append(TelemetryRecord(step, total, lr, t_mean, t_min, t_max, metric))
            if metric is not None and early_stop(history, config.patience):
                log.info("early stop at step %d (best %.4f at step %s)", step, best_metric, best_step)
                stopped = True
                break
            if config.max_steps is not None and step >= config.max_steps:
                break
        if stopped or (config.max_steps is not None and step >= config.max_steps):
            break

    if eval_hook is not None and telemetry[-1].eval_metric is None:
        telemetry[-1] = telemetry[-1]._replace(eval_metric=evaluate(step))
    if config.restore_best and best_vectors is not None:
        V[...] = best_vectors
    return TrainResult(table, telemetry, step, best_step, best_metric, stopped, evals)


def _fmt(x):
    return "" if x is None else repr(float(x))


def telemetry_csv(records: Sequence[TelemetryRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TELEMETRY_FIELDS)
    for r in records:
        writer.writerow([r.step, _fmt(r.loss), _fmt(r.lr), _fmt(r.target_mean),
                         _fmt(r.target_min), _fmt(r.target_max), _fmt(r.eval_metric)])
    return buf.getvalue()


def write_telemetry(records: Sequence[TelemetryRecord], path) -> None:
    Path(path).write_text(telemetry_csv(records), encoding="utf-8")


def read_telemetry(path) -> list[TelemetryRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TELEMETRY_FIELDS:
            raise DataFormatError(f"{path}: unexpected telemetry header {reader.fieldnames}")
        return [
            TelemetryRecord(int(row["step"]), float(row["loss"]), float(row["lr"]),
                            float(row["target_mean"]), float(row["target_min"]),
                            float(row["target_max"]),
                            float(row["eval_metric"]) if row["eval_metric"] else None)
            for row in reader
        ]
