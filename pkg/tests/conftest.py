import numpy as np
import pytest
from hypothesis import settings

# acceptance verdict lines, printed once at the end of the session
VERDICTS = []

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def loop_bilinear(t, u, v):
    """out[k] = sum_ij u[i] t[k,i,j] v[j], written as plain loops."""
    out = np.zeros(t.shape[0])
    for k in range(t.shape[0]):
        for i in range(t.shape[1]):
            for j in range(t.shape[2]):
                out[k] += u[i] * t[k, i, j] * v[j]
    return out


def loop_contract13(t, u, h):
    """out[j] = sum_ik u[i] t[k,i,j] h[k]."""
    out = np.zeros(t.shape[2])
    for j in range(t.shape[2]):
        for k in range(t.shape[0]):
            for i in range(t.shape[1]):
                out[j] += u[i] * t[k, i, j] * h[k]
    return out


def loop_layer(layer, x):
    """Scalar re-implementation of one bilinear tensor layer."""
    n_h, n_in = layer.w_h.shape
    h = [np.tanh(sum(layer.w_h[a, i] * x[i] for i in range(n_in)) + layer.b_h[a]) for a in range(n_h)]
    c = list(x) + h
    y = []
    for k in range(layer.t.shape[0]):
        s = layer.b[k]
        for i in range(len(c)):
            s += layer.w[k, i] * c[i]
            for j in range(len(c)):
                s += c[i] * layer.t[k, i, j] * c[j]
        y.append(np.tanh(s))
    return np.array(y)


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = sys.modules.get("conftest", None)
    lines = getattr(lines, "VERDICTS", VERDICTS)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
