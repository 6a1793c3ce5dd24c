import numpy as np
import pytest

from divlab.numerics import Model


def set_flat(model: Model, theta: np.ndarray) -> Model:
    layers, k = [], 0
    for W, b in model.layers:
        nW = theta[k : k + W.size].reshape(W.shape)
        k += W.size
        nb = theta[k : k + b.size].copy()
        k += b.size
        layers.append((nW.copy(), nb))
    return Model(model.spec, layers)


def flat_grads(grads) -> np.ndarray:
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


def central_differences(loss_of_model, model: Model, eps: float = 1e-5) -> np.ndarray:
    """Independent oracle: perturb every parameter by +-eps."""
    theta = model.flat_params()
    out = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += eps
        tm[i] -= eps
        out[i] = (loss_of_model(set_flat(model, tp)) - loss_of_model(set_flat(model, tm))) / (2 * eps)
    return out


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    return float(np.max(np.abs(analytic - numeric) / scale))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
