"""Free embedding table standing in for a bi-encoder, plus its TSV checkpoint format.

Checkpoint layout::

    #dim=D seed=S
    id<TAB>v1<TAB>...<TAB>vD

Floats are written with ``repr`` so a save/load round trip is lossless.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from relmargin.errors import DataFormatError, DegenerateVectorError, ShapeError

_HEADER = re.compile(r"^#dim=(\d+) seed=(-?\d+)$")


@dataclass
class EmbeddingTable:
    ids: tuple[str, ...]
    vectors: np.ndarray
    seed: int = 0
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.ids = tuple(self.ids)
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ShapeError(f"{len(self.ids)} ids but vectors of shape {self.vectors.shape}")
        if self.vectors.shape[1] < 2:
            raise ShapeError("embedding dimension must be >= 2")
        self.index = {}
        for row, ident in enumerate(self.ids):
            if ident in self.index:
                raise ValueError(f"duplicate id {ident!r}")
            self.index[ident] = row

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.ids)

    def __contains__(self, ident):
        return ident in self.index

    def __getitem__(self, ident) -> np.ndarray:
        return self.vectors[self.index[ident]]

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        """Row numbers for ``ids``; unknown ids raise :class:`DataFormatError`."""
        out = []
        for ident in ids:
            try:
                out.append(self.index[ident])
            except KeyError:
                raise DataFormatError(f"unknown id {ident!r}") from None
        return np.asarray(out, dtype=np.int64)

    def matrix(self, ids: Iterable[str]) -> np.ndarray:
        return np.ascontiguousarray(self.vectors[self.rows(ids)])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.ids, self.vectors.copy(), self.seed)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (self.ids == other.ids and self.seed == other.seed
                and np.array_equal(self.vectors, other.vectors))


def init_table(ids, dim: int, seed: int, scheme: str = "gaussian") -> EmbeddingTable:
    """Random table, deterministic in ``(ids, dim, seed, scheme)``.

    ``gaussian`` draws i.i.d. N(0, 1/D) entries (norms concentrate near 1);
    ``sphere`` additionally normalizes each row.
    """
    ids = list(ids)
    if not ids:
        raise ValueError("init_table needs at least one id")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids passed to init_table")
    if dim < 2:
        raise ShapeError("embedding dimension must be >= 2")
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((len(ids), dim)) / np.sqrt(dim)
    if scheme == "sphere":
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    elif scheme != "gaussian":
        raise ValueError(f"unknown init scheme {scheme!r}")
    if np.any(np.linalg.norm(vectors, axis=1) == 0.0):
        raise DegenerateVectorError("initializer produced a zero vector")
    return EmbeddingTable(ids, vectors, seed)


def save_table(table: EmbeddingTable, path) -> None:
    lines = [f"#dim={table.dim} seed={table.seed}"]
    for ident, vec in zip(table.ids, table.vectors):
        lines.append("\t".join([ident, *(repr(float(x)) for x in vec)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_table(path) -> EmbeddingTable:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: no such embedding file")
    text = path.read_text(encoding="utf-8").splitlines()
    if not text:
        raise DataFormatError(f"{path}: empty embedding file")
    m = _HEADER.match(text[0].strip())
    if m is None:
        raise DataFormatError(f"{path}:1: expected header '#dim=D seed=S', got {text[0]!r}")
    dim, seed = int(m.group(1)), int(m.group(2))
    ids, rows = [], []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != dim + 1:
            raise DataFormatError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}")
        try:
            rows.append([float(x) for x in fields[1:]])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from None
        ids.append(fields[0])
    if not ids:
        raise DataFormatError(f"{path}: no embeddings")
    try:
        return EmbeddingTable(ids, np.asarray(rows, dtype=np.float64), seed)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
