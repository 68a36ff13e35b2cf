import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from monostream import kernels  # noqa: E402
from monostream.graph import DynamicGraph  # noqa: E402
from monostream.model import Model, builtin_model, parse_model_description  # noqa: E402
from monostream.synth import generate  # noqa: E402


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


def make_model(kind, input_len, seed=42, **kw):
    text, weights = builtin_model(kind, input_len, seed=seed, **kw)
    return Model(parse_model_description(text), weights, input_len)


@pytest.fixture
def small_world():
    """100 nodes, average degree 6, 16-dim features, 60-event stream."""
    edges, feats, stream = generate(100, 6, 16, 60, seed=7)
    return edges, feats, stream


def graph_of(edges, n):
    return DynamicGraph(n, edges)


def weights_dict(model):
    w = dict(model.weights.tensors)
    w["eps"] = dict(model.weights.epsilon)
    return w


def rand_f32(rng, *shape):
    return rng.standard_normal(shape).astype(np.float32)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
