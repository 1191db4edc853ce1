"""Pure-numpy twin of the compiled ``_kernels`` extension.

Dot products go through ``cumsum`` along the embedding axis, which is a
strictly sequential reduction; this keeps similarities and loss totals
bit-identical to the compiled loops. Gradient accumulation uses matrix
products and may differ from the compiled path in the last few ulps.
"""

import numpy as np

from relmargin.errors import DegenerateVectorError, ShapeError

STATIC, ADAPTIVE, DISTRIBUTED = 0, 1, 2

# cap on the broadcast (rows, cols, dim) product held in memory at once
_CHUNK_ELEMENTS = 1 << 22


def _seq_dot_rows(X, Y):
    """Row-wise sequential dot products ``X[i] . Y[i]``."""
    return np.cumsum(X * Y, axis=-1)[..., -1]


def row_norms(X, role="input"):
    X = np.ascontiguousarray(X, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow shows up as a non-finite norm and is rejected below
        norms = np.sqrt(_seq_dot_rows(X, X))
    bad = ~((norms > 0.0) & np.isfinite(norms))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DegenerateVectorError(f"{role} vector at row {i} has norm {norms[i]!r}")
    return norms


def cosine_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    ab = np.cumsum(a * b)[-1]
    na = np.sqrt(np.cumsum(a * a)[-1])
    nb = np.sqrt(np.cumsum(b * b)[-1])
    if not (na > 0.0 and np.isfinite(na)):
        raise DegenerateVectorError(f"first vector has norm {na!r}")
    if not (nb > 0.0 and np.isfinite(nb)):
        raise DegenerateVectorError(f"second vector has norm {nb!r}")
    return float(ab / (na * nb))


def _sims(X, nx, Y, ny):
    m, n, d = X.shape[0], Y.shape[0], X.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    step = max(1, _CHUNK_ELEMENTS // max(1, n * d))
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        dots = np.cumsum(X[lo:hi, None, :] * Y[None, :, :], axis=2)[:, :, -1]
        out[lo:hi] = dots / (nx[lo:hi, None] * ny[None, :])
    return out


def pairwise_cosine(X, Y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return _sims(X, row_norms(X, "row"), Y, row_norms(Y, "column"))


def _pair_grad(G, S, X, nx, Y, ny):
    """Gradient of sum_ij G_ij * cos(X_i, Y_j) with respect to X and Y."""
    GS = G * S
    gX = ((G / ny[None, :]) @ Y) / nx[:, None] - (GS.sum(axis=1) / (nx * nx))[:, None] * X
    gY = ((G / nx[:, None]).T @ X) / ny[:, None] - (GS.sum(axis=0) / (ny * ny))[:, None] * Y
    return gX, gY


def loss_grad(variant, in_batch, eps, Q, P, N, with_grad=True):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    P = np.ascontiguousarray(P, dtype=np.float64)
    N = np.ascontiguousarray(N, dtype=np.float64)
    B = Q.shape[0]
    if B < 1 or P.shape[0] != B or N.shape[0] != B:
        raise ShapeError("queries, positives and negatives must hold the same B >= 1 rows")
    if P.shape[1] != Q.shape[1] or N.shape[1] != Q.shape[1]:
        raise ShapeError("all batch vectors must share one dimension")
    if variant not in (STATIC, ADAPTIVE, DISTRIBUTED):
        raise ValueError(f"unknown variant code {variant}")
    pairwise = bool(in_batch) or variant == DISTRIBUTED

    nq = row_norms(Q, "query")
    np_ = row_norms(P, "positive")
    nn = row_norms(N, "negative")
    sqp = _seq_dot_rows(Q, P) / (nq * np_)
    sqn = _sims(Q, nq, N, nn)
    spn = _sims(P, np_, N, nn)
    own_qn = np.diagonal(sqn)

    if pairwise:
        if variant == DISTRIBUTED:
            margin = np.broadcast_to((sqp - own_qn)[:, None], (B, B))
        else:
            margin = sqp[:, None] - sqn
        target = eps if variant == STATIC else (1.0 + spn) / 2.0
    else:
        margin = sqp - own_qn
        target = eps if variant == STATIC else (1.0 + np.diagonal(spn)) / 2.0
    L = margin - target
    terms = np.ascontiguousarray(L, dtype=np.float64).ravel()
    total = float(np.cumsum(terms * terms)[-1] / terms.size)

    if not with_grad:
        return total, terms, sqp, sqn, spn, None, None, None

    W = (2.0 / terms.size) * L
    if pairwise:
        w_qp = W.sum(axis=1)
        if variant == DISTRIBUTED:
            G_qn = np.diag(-w_qp)
        else:
            G_qn = -W
        G_pn = None if variant == STATIC else -0.5 * W
    else:
        w_qp = W
        G_qn = np.diag(-W)
        G_pn = None if variant == STATIC else np.diag(-0.5 * W)

    inv = 1.0 / (nq * np_)
    gQ = w_qp[:, None] * (P * inv[:, None] - (sqp / (nq * nq))[:, None] * Q)
    gP = w_qp[:, None] * (Q * inv[:, None] - (sqp / (np_ * np_))[:, None] * P)
    dQ, gN = _pair_grad(G_qn, sqn, Q, nq, N, nn)
    gQ += dQ
    if G_pn is not None:
        dP, dN = _pair_grad(G_pn, spn, P, np_, N, nn)
        gP += dP
        gN += dN
    return total, terms, sqp, sqn, spn, gQ, gP, gN


def scatter_add_rows(out, rows, src):
    rows = np.asarray(rows, dtype=np.int64)
    if src.shape[0] != rows.shape[0] or src.shape[1] != out.shape[1]:
        raise ShapeError("scatter source does not match row index / output width")
    if rows.size and (rows.min() < 0 or rows.max() >= out.shape[0]):
        raise IndexError("row index out of range")
    np.add.at(out, rows, src)
