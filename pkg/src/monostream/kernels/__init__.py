"""Dense float32 primitives shared by the engine and the baselines.

Two interchangeable backends implement the hot loops: a Cython extension
(``_ckernels``) and a numpy fallback (``_pure``). The extension is used when
it imports cleanly unless ``MONOSTREAM_PURE_PYTHON`` is set to a non-empty
value. Both produce bitwise-identical output.
"""
import os
from enum import Enum

import numpy as np

from monostream.errors import DimensionError, EmptyInputError, NaNError
from monostream.kernels import _pure

F32 = np.float32

_compiled = None
if not os.environ.get("MONOSTREAM_PURE_PYTHON"):
    try:
        from monostream.kernels import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _pure
BACKEND = "cython" if _compiled is not None else "python"


def backends():
    """All importable backends, keyed by name."""
    out = {"python": _pure}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from monostream.kernels import _ckernels
            out["cython"] = _ckernels
        except ImportError:
            pass
    return out


class Aggregator(Enum):
    MIN = "min"
    MAX = "max"

    @property
    def is_max(self):
        return self is Aggregator.MAX

    @property
    def identity(self):
        return F32(-np.inf) if self is Aggregator.MAX else F32(np.inf)

    def pick(self, a, b):
        """Elementwise A(a, b), with -0.0 ordered below +0.0."""
        return _impl.reduce_stack(self.is_max, np.stack([a, b]).astype(F32, copy=False))


def as_vec(x, name="vector"):
    v = np.ascontiguousarray(x, dtype=F32)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if np.isnan(v).any():
        raise NaNError(f"{name} contains NaN")
    return v


def as_mat(x, name="matrix"):
    m = np.ascontiguousarray(x, dtype=F32)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if np.isnan(m).any():
        raise NaNError(f"{name} contains NaN")
    return m


def bit_equal(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def ewise_reduce(agg, vs):
    if len(vs) == 0:
        raise EmptyInputError("ewise_reduce needs at least one vector")
    lens = {len(v) for v in vs}
    if len(lens) != 1:
        raise DimensionError(f"vectors have mismatched lengths {sorted(lens)}")
    return _impl.reduce_stack(agg.is_max, np.asarray(vs, dtype=F32))


def reduce_rows(agg, table, rows):
    return _impl.reduce_rows(agg.is_max, table, rows)


def segment_reduce(agg, table, indptr, indices):
    return _impl.segment_reduce(agg.is_max, table, indptr, indices)


def matvec_affine(W, x, b=None):
    if W.shape[1] != x.shape[0]:
        raise DimensionError(f"W is {W.shape}, x has length {x.shape[0]}")
    if b is not None and b.shape[0] != W.shape[0]:
        raise DimensionError(f"bias length {b.shape[0]} != W rows {W.shape[0]}")
    return _impl.matvec(W, x, b)


def matmul_rows(X, W, b=None):
    if W.shape[1] != X.shape[1]:
        raise DimensionError(f"W is {W.shape}, rows have length {X.shape[1]}")
    if b is not None and b.shape[0] != W.shape[0]:
        raise DimensionError(f"bias length {b.shape[0]} != W rows {W.shape[0]}")
    return _impl.matmul_rows(X, W, b)


def affine(W, x, b=None):
    """``matvec_affine`` for a vector, ``matmul_rows`` for a stack of rows."""
    if x.ndim == 1:
        return matvec_affine(W, x, b)
    return matmul_rows(x, W, b)


def relu(x):
    # where() rather than maximum(): maps -0.0 to +0.0 so outputs stay canonical
    x = np.asarray(x, dtype=F32)
    return np.where(x > 0, x, F32(0)).astype(F32, copy=False)


def mlp_forward(layers, x):
    if not layers:
        raise EmptyInputError("mlp_forward needs at least one layer")
    for (w0, _), (w1, _) in zip(layers, layers[1:]):
        if w0.shape[0] != w1.shape[1]:
            raise DimensionError(f"layer shapes {w0.shape} -> {w1.shape} do not chain")
    h = x
    for i, (W, b) in enumerate(layers):
        h = affine(W, h, b)
        if i < len(layers) - 1:
            h = relu(h)
    return h


def classify_positions(agg, alpha_prev, del_reduced, add_reduced):
    return _impl.classify_positions(agg.is_max, alpha_prev, del_reduced, add_reduced)
