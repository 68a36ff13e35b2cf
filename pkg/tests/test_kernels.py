import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import rand_f32
from monostream import kernels
from monostream.errors import DimensionError, EmptyInputError, NaNError
from monostream.kernels import Aggregator, ewise_reduce, matvec_affine, mlp_forward, relu
from oracles import scalar_matvec, scalar_mlp

MIN, MAX = Aggregator.MIN, Aggregator.MAX

finite32 = st.floats(-1e6, 1e6, allow_nan=False, width=32).map(lambda x: x + 0.0)


def vec_lists(min_size=1, max_size=6):
    return st.integers(1, 8).flatmap(
        lambda d: st.lists(arrays(np.float32, d, elements=finite32), min_size=min_size, max_size=max_size)
    )


@pytest.mark.parametrize("agg,expected", [(MIN, [2, 1]), (MAX, [3, 4])])
def test_ewise_reduce_examples(agg, expected):
    assert ewise_reduce(agg, [np.array([3, 1], np.float32), np.array([2, 4], np.float32)]).tolist() == expected


def test_ewise_reduce_single_input_is_identity():
    assert ewise_reduce(MIN, [np.array([5, 5], np.float32)]).tolist() == [5, 5]


def test_ewise_reduce_errors():
    with pytest.raises(EmptyInputError):
        ewise_reduce(MIN, [])
    with pytest.raises(DimensionError):
        ewise_reduce(MIN, [np.zeros(2, np.float32), np.zeros(3, np.float32)])


@settings(max_examples=200, deadline=None)
@given(vs=vec_lists(), agg=st.sampled_from([MIN, MAX]), seed=st.integers(0, 2**16))
def test_reduce_permutation_invariant(vs, agg, seed):
    perm = np.random.default_rng(seed).permutation(len(vs))
    a = ewise_reduce(agg, vs)
    b = ewise_reduce(agg, [vs[i] for i in perm])
    assert a.tobytes() == b.tobytes()


@settings(max_examples=200, deadline=None)
@given(vs=vec_lists(), agg=st.sampled_from([MIN, MAX]), pick=st.integers(0, 5))
def test_reduce_duplicate_idempotent(vs, agg, pick):
    dup = vs + [vs[pick % len(vs)].copy()]
    assert ewise_reduce(agg, vs).tobytes() == ewise_reduce(agg, dup).tobytes()


@settings(max_examples=200, deadline=None)
@given(vs=vec_lists(), agg=st.sampled_from([MIN, MAX]))
def test_reduce_selects_an_input(vs, agg):
    out = ewise_reduce(agg, vs)
    for i, x in enumerate(out):
        assert any(v[i] == x for v in vs)


def test_matvec_examples():
    I = np.eye(2, dtype=np.float32)
    assert matvec_affine(I, np.array([3, 4], np.float32), np.zeros(2, np.float32)).tolist() == [3, 4]
    W = np.array([[1, 1], [0, 2]], np.float32)
    assert matvec_affine(W, np.array([1, 2], np.float32)).tolist() == [3, 4]


def test_matvec_matches_scalar_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        W, x, b = rand_f32(rng, 8, 8), rand_f32(rng, 8), rand_f32(rng, 8)
        assert matvec_affine(W, x, b).tobytes() == scalar_matvec(W, x, b).tobytes()
        assert matvec_affine(W, x).tobytes() == scalar_matvec(W, x).tobytes()


def test_matvec_dimension_errors():
    with pytest.raises(DimensionError):
        matvec_affine(np.zeros((2, 3), np.float32), np.zeros(2, np.float32))
    with pytest.raises(DimensionError):
        matvec_affine(np.zeros((2, 2), np.float32), np.zeros(2, np.float32), np.zeros(3, np.float32))


def test_relu_examples():
    assert relu(np.array([-1, 0, 2], np.float32)).tolist() == [0, 0, 2]
    assert relu(np.zeros(2, np.float32)).tolist() == [0, 0]
    assert not relu(-np.ones(5, np.float32)).any()


def test_relu_canonical_zero():
    out = relu(np.array([-0.0, -3.0], np.float32))
    assert not np.signbit(out).any()


def test_mlp_examples():
    I = np.eye(2, dtype=np.float32)
    z = np.zeros(2, np.float32)
    assert mlp_forward([(I, z)], np.array([1, -1], np.float32)).tolist() == [1, -1]
    assert mlp_forward([(I, z), (I, z)], np.array([-2, 3], np.float32)).tolist() == [0, 3]


def test_mlp_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    layers = [(rand_f32(rng, 6, 5), rand_f32(rng, 6)), (rand_f32(rng, 4, 6), rand_f32(rng, 4))]
    x = rand_f32(rng, 5)
    assert mlp_forward(layers, x).tobytes() == scalar_mlp(layers, x).tobytes()


def test_mlp_errors():
    with pytest.raises(EmptyInputError):
        mlp_forward([], np.zeros(2, np.float32))
    with pytest.raises(DimensionError):
        mlp_forward([(np.zeros((3, 2), np.float32), None), (np.zeros((2, 4), np.float32), None)],
                    np.zeros(2, np.float32))


def test_as_vec_rejects_nan():
    with pytest.raises(NaNError):
        kernels.as_vec([1.0, float("nan")])


# ---- both backends agree bit for bit with each other and with the scalar oracle

def test_backend_matvec(backend):
    rng = np.random.default_rng(11)
    for rows, cols in [(1, 1), (3, 7), (16, 16), (9, 33)]:
        W, x, b = rand_f32(rng, rows, cols), rand_f32(rng, cols), rand_f32(rng, rows)
        assert backend.matvec(W, x, b).tobytes() == scalar_matvec(W, x, b).tobytes()
        X = rand_f32(rng, 5, cols)
        batched = backend.matmul_rows(X, W, b)
        for r in range(5):
            assert batched[r].tobytes() == scalar_matvec(W, X[r], b).tobytes()


@pytest.mark.parametrize("is_max", [False, True])
def test_backend_reductions(backend, is_max):
    rng = np.random.default_rng(5)
    table = rand_f32(rng, 30, 6)
    ref = np.maximum if is_max else np.minimum
    rows = [3, 17, 4, 29]
    assert backend.reduce_rows(is_max, table, rows).tobytes() == ref.reduce(table[rows]).tobytes()
    assert not backend.reduce_rows(is_max, table, []).any()
    assert backend.reduce_stack(is_max, table[:4]).tobytes() == ref.reduce(table[:4]).tobytes()
    indptr = np.array([0, 2, 2, 5, 6])
    indices = np.array([1, 9, 4, 5, 6, 0])
    out = backend.segment_reduce(is_max, table, indptr, indices)
    assert not out[1].any()
    for v in (0, 2, 3):
        seg = indices[indptr[v]:indptr[v + 1]]
        assert out[v].tobytes() == ref.reduce(table[seg]).tobytes()


@pytest.mark.parametrize("is_max", [False, True])
def test_backend_classify_positions(backend, is_max):
    a = np.array([1, 2, 3], np.float32)
    reset, covered = backend.classify_positions(is_max, a, np.array([5, 2, 7], np.float32), None)
    assert reset.tolist() == [False, True, False] and not covered
    reset, covered = backend.classify_positions(is_max, a, np.array([9, 9, 9], np.float32), None)
    assert not reset.any() and covered


def test_backends_agree_on_random_inputs():
    backs = kernels.backends()
    if len(backs) < 2:
        pytest.skip("compiled backend not built")
    py, cy = backs["python"], backs["cython"]
    rng = np.random.default_rng(99)
    for _ in range(50):
        W, X, b = rand_f32(rng, 12, 10), rand_f32(rng, 40, 10), rand_f32(rng, 12)
        assert py.matmul_rows(X, W, b).tobytes() == cy.matmul_rows(X, W, b).tobytes()
        assert py.matvec(W, X[0], None).tobytes() == cy.matvec(W, X[0], None).tobytes()
        for is_max in (False, True):
            rows = rng.integers(0, 40, size=7)
            assert py.reduce_rows(is_max, X, rows).tobytes() == cy.reduce_rows(is_max, X, rows).tobytes()


@pytest.mark.parametrize("is_max", [False, True])
def test_signed_zero_reduction_is_order_free(backend, is_max):
    a = np.array([-0.0, 0.0, 1.0], np.float32)
    b = np.array([0.0, -0.0, 1.0], np.float32)
    one = backend.reduce_stack(is_max, np.stack([a, b]))
    two = backend.reduce_stack(is_max, np.stack([b, a]))
    assert one.tobytes() == two.tobytes()
    assert list(np.signbit(one[:2])) == ([False, False] if is_max else [True, True])
    seg = backend.segment_reduce(is_max, np.stack([b, a]), np.array([0, 2]), np.array([1, 0]))
    assert seg[0].tobytes() == one.tobytes()


def test_classify_distinguishes_signed_zeros(backend):
    # old aggregate -0 came from a surviving neighbor; deleting +0 is harmless
    reset, covered = backend.classify_positions(
        False, np.array([-0.0], np.float32), np.array([0.0], np.float32), None)
    assert not reset.any() and covered
    # deleting the -0 holder and adding +0 is not covered
    reset, covered = backend.classify_positions(
        False, np.array([-0.0], np.float32), np.array([-0.0], np.float32), np.array([0.0], np.float32))
    assert reset.all() and not covered
