"""Numpy implementations of the numeric kernels.

Every routine here fixes its floating point evaluation order so that the
compiled backend can reproduce it bit for bit: dot products accumulate in
float32, column by column in ascending order, starting from +0.0, and the
bias is added after the sum.

Min and max follow a total order in which -0.0 sorts below +0.0, so the
reduced value is bitwise independent of input order. This is done by
reducing on integer keys that sort like the floats.
"""
import numpy as np

F32 = np.float32


def _keys(a):
    # order-preserving int32 view; the mapping is its own inverse
    bits = np.ascontiguousarray(a, dtype=F32).view(np.int32)
    return bits ^ ((bits >> 31) & np.int32(0x7FFFFFFF))


def _floats(keys):
    return _keys(keys.view(F32)).view(F32)


def _reducer(is_max):
    return np.maximum if is_max else np.minimum


def reduce_stack(is_max, stack):
    """Elementwise min/max over the rows of a 2-D array."""
    stack = np.asarray(stack, dtype=F32)
    if stack.shape[0] == 1:
        return stack[0].copy()
    return _floats(_reducer(is_max).reduce(_keys(stack), axis=0))


def reduce_rows(is_max, table, rows):
    """Elementwise min/max over ``table[rows]``; zeros when ``rows`` is empty."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return np.zeros(table.shape[1], dtype=F32)
    return _floats(_reducer(is_max).reduce(_keys(table[rows]), axis=0))


def segment_reduce(is_max, table, indptr, indices):
    """Row ``i`` of the result reduces ``table[indices[indptr[i]:indptr[i+1]]]``."""
    n = len(indptr) - 1
    out = np.zeros((n, table.shape[1]), dtype=F32)
    counts = np.diff(indptr)
    nonempty = np.flatnonzero(counts)
    if nonempty.size:
        gathered = _keys(table[np.asarray(indices, dtype=np.int64)])
        starts = np.asarray(indptr, dtype=np.int64)[nonempty]
        out[nonempty] = _floats(_reducer(is_max).reduceat(gathered, starts, axis=0))
    return out


def matvec(W, x, b=None):
    rows, cols = W.shape
    acc = np.zeros(rows, dtype=F32)
    for j in range(cols):
        acc += W[:, j] * x[j]
    if b is not None:
        acc += b
    return acc


def matmul_rows(X, W, b=None):
    """``matvec`` applied to each row of ``X``, same evaluation order."""
    rows, cols = W.shape
    acc = np.zeros((X.shape[0], rows), dtype=F32)
    for j in range(cols):
        acc += X[:, j, None] * W[None, :, j]
    if b is not None:
        acc += b[None, :]
    return acc


def classify_positions(is_max, alpha_prev, del_reduced, add_reduced):
    """Return (reset mask, covered flag) for one grouped target.

    Positions are compared bitwise, matching the total order of the reducers.
    """
    alpha_prev, del_reduced = _keys(alpha_prev), _keys(del_reduced)
    reset = alpha_prev == del_reduced
    if not reset.any():
        return reset, True
    if add_reduced is None:
        return reset, False
    d, a = del_reduced[reset], _keys(add_reduced)[reset]
    covered = bool(np.all(a >= d) if is_max else np.all(a <= d))
    return reset, covered
