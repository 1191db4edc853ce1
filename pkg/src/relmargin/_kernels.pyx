# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled cosine / relevance-margin kernels.

Every dot product is a strictly sequential sum over the embedding axis, and
the fused loss reduces its squared terms in row-major order. ``_pykernels``
reproduces the same summation order with ``numpy.cumsum`` so similarity
matrices and loss totals agree bit for bit between the two backends.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

from relmargin.errors import DegenerateVectorError, ShapeError

cnp.import_array()

cdef enum:
    STATIC = 0
    ADAPTIVE = 1
    DISTRIBUTED = 2


cdef inline double _dot(const double[:, ::1] X, Py_ssize_t i,
                        const double[:, ::1] Y, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(X.shape[1]):
        s = s + X[i, k] * Y[j, k]
    return s


cdef cnp.ndarray _norms(const double[:, ::1] X, str role):
    cdef Py_ssize_t i, n = X.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double v
    for i in range(n):
        v = sqrt(_dot(X, i, X, i))
        if not (v > 0.0 and isfinite(v)):
            raise DegenerateVectorError(f"{role} vector at row {i} has norm {v!r}")
        out[i] = v
    return out


def row_norms(const double[:, ::1] X, str role="input"):
    return _norms(X, role)


def cosine_pair(const double[::1] a, const double[::1] b):
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    cdef Py_ssize_t k
    cdef double ab = 0.0, aa = 0.0, bb = 0.0, na, nb
    for k in range(a.shape[0]):
        ab = ab + a[k] * b[k]
    for k in range(a.shape[0]):
        aa = aa + a[k] * a[k]
    for k in range(b.shape[0]):
        bb = bb + b[k] * b[k]
    na = sqrt(aa)
    nb = sqrt(bb)
    if not (na > 0.0 and isfinite(na)):
        raise DegenerateVectorError(f"first vector has norm {na!r}")
    if not (nb > 0.0 and isfinite(nb)):
        raise DegenerateVectorError(f"second vector has norm {nb!r}")
    return ab / (na * nb)


cdef void _fill_sims(const double[:, ::1] X, const double[::1] nx,
                     const double[:, ::1] Y, const double[::1] ny,
                     double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            out[i, j] = _dot(X, i, Y, j) / (nx[i] * ny[j])


def pairwise_cosine(const double[:, ::1] X, const double[:, ::1] Y):
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    cdef double[::1] nx = _norms(X, "row")
    cdef double[::1] ny = _norms(Y, "column")
    out = np.empty((X.shape[0], Y.shape[0]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        _fill_sims(X, nx, Y, ny, o)
    return out


cdef inline void _accumulate_pair(double w, double s,
                                  const double[:, ::1] X, Py_ssize_t i, double nx,
                                  const double[:, ::1] Y, Py_ssize_t j, double ny,
                                  double[:, ::1] gX, double[:, ::1] gY) noexcept nogil:
    # d cos(x, y) / dx = y / (|x||y|) - cos * x / |x|^2
    cdef Py_ssize_t k
    cdef double inv = 1.0 / (nx * ny)
    cdef double cx = s / (nx * nx)
    cdef double cy = s / (ny * ny)
    for k in range(X.shape[1]):
        gX[i, k] = gX[i, k] + w * (Y[j, k] * inv - cx * X[i, k])
        gY[j, k] = gY[j, k] + w * (X[i, k] * inv - cy * Y[j, k])


def loss_grad(int variant, bint in_batch, double eps,
              const double[:, ::1] Q, const double[:, ::1] P, const double[:, ::1] N,
              bint with_grad=True):
    """Fused relevance-margin loss (and gradient) for one triplet batch.

    Returns ``(total, terms, sqp, sqn, spn, gQ, gP, gN)``; ``terms`` holds the
    inner terms in canonical order (``i`` for per-triplet losses, ``i*B + j``
    for in-batch/distributed ones). Gradients are ``None`` unless requested.
    """
    cdef Py_ssize_t B = Q.shape[0], D = Q.shape[1]
    if B < 1 or P.shape[0] != B or N.shape[0] != B:
        raise ShapeError("queries, positives and negatives must hold the same B >= 1 rows")
    if P.shape[1] != D or N.shape[1] != D:
        raise ShapeError("all batch vectors must share one dimension")
    if variant not in (STATIC, ADAPTIVE, DISTRIBUTED):
        raise ValueError(f"unknown variant code {variant}")
    cdef bint pairwise = in_batch or variant == DISTRIBUTED

    cdef double[::1] nq = _norms(Q, "query")
    cdef double[::1] np_ = _norms(P, "positive")
    cdef double[::1] nn = _norms(N, "negative")

    sqp_arr = np.empty(B, dtype=np.float64)
    sqn_arr = np.empty((B, B), dtype=np.float64)
    spn_arr = np.empty((B, B), dtype=np.float64)
    cdef double[::1] sqp = sqp_arr
    cdef double[:, ::1] sqn = sqn_arr
    cdef double[:, ::1] spn = spn_arr

    cdef Py_ssize_t n_terms = B * B if pairwise else B
    terms_arr = np.empty(n_terms, dtype=np.float64)
    cdef double[::1] terms = terms_arr

    cdef Py_ssize_t i, j, jn, jt, c
    cdef double margin, target, l, total = 0.0, scale
    with nogil:
        for i in range(B):
            sqp[i] = _dot(Q, i, P, i) / (nq[i] * np_[i])
        _fill_sims(Q, nq, N, nn, sqn)
        _fill_sims(P, np_, N, nn, spn)
        c = 0
        for i in range(B):
            for j in range(B if pairwise else 1):
                jt = j if pairwise else i
                jn = i if (variant == DISTRIBUTED or not pairwise) else jt
                margin = sqp[i] - sqn[i, jn]
                if variant == STATIC:
                    target = eps
                else:
                    target = (1.0 + spn[i, jt]) / 2.0
                l = margin - target
                terms[c] = l
                total = total + l * l
                c = c + 1
        total = total / n_terms

    if not with_grad:
        return total, terms_arr, sqp_arr, sqn_arr, spn_arr, None, None, None

    gQ_arr = np.zeros((B, D), dtype=np.float64)
    gP_arr = np.zeros((B, D), dtype=np.float64)
    gN_arr = np.zeros((B, D), dtype=np.float64)
    cdef double[:, ::1] gQ = gQ_arr
    cdef double[:, ::1] gP = gP_arr
    cdef double[:, ::1] gN = gN_arr
    cdef double w
    with nogil:
        scale = 2.0 / n_terms
        c = 0
        for i in range(B):
            for j in range(B if pairwise else 1):
                jt = j if pairwise else i
                jn = i if (variant == DISTRIBUTED or not pairwise) else jt
                w = scale * terms[c]
                c = c + 1
                _accumulate_pair(w, sqp[i], Q, i, nq[i], P, i, np_[i], gQ, gP)
                _accumulate_pair(-w, sqn[i, jn], Q, i, nq[i], N, jn, nn[jn], gQ, gN)
                if variant != STATIC:
                    _accumulate_pair(-0.5 * w, spn[i, jt], P, i, np_[i], N, jt, nn[jt], gP, gN)
    return total, terms_arr, sqp_arr, sqn_arr, spn_arr, gQ_arr, gP_arr, gN_arr


def scatter_add_rows(double[:, ::1] out, const cnp.int64_t[::1] rows, const double[:, ::1] src):
    """``out[rows[r]] += src[r]`` sequentially, duplicates accumulated in order."""
    cdef Py_ssize_t r, k
    if src.shape[0] != rows.shape[0] or src.shape[1] != out.shape[1]:
        raise ShapeError("scatter source does not match row index / output width")
    for r in range(rows.shape[0]):
        if rows[r] < 0 or rows[r] >= out.shape[0]:
            raise IndexError(f"row index {rows[r]} out of range")
    with nogil:
        for r in range(rows.shape[0]):
            for k in range(src.shape[1]):
                out[rows[r], k] = out[rows[r], k] + src[r, k]
