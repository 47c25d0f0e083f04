import numpy as np
import pytest

from lrkf.belief import DlrBelief, SphericalBelief
from lrkf.models import GaussianFamily, MlpModel, MlpSpec, initialize_mean


def random_dlr(p, rank, seed, diag_range=(0.5, 2.0), factor_scale=1.0):
    rng = np.random.default_rng(seed)
    return DlrBelief(
        rng.standard_normal(p),
        rng.uniform(*diag_range, p),
        factor_scale * rng.standard_normal((p, rank)),
    )


def random_spherical(p, rank, seed, eta=1.5):
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((p, rank)))
    lam = np.sort(rng.uniform(0.2, 2.0, rank))[::-1]
    return SphericalBelief(rng.standard_normal(p), eta, basis, lam)


def dense_precision(belief):
    from lrkf.belief import _dlr_parts

    _, diag, w = _dlr_parts(belief)
    return np.diag(diag) + w @ w.T


@pytest.fixture
def model_zoo():
    """Linear, one-hidden tanh, and two-hidden relu regression models."""
    return [
        MlpModel(MlpSpec((3, 2)), GaussianFamily(0.5)),
        MlpModel(MlpSpec((2, 4, 1), activation="tanh"), GaussianFamily(0.25)),
        MlpModel(MlpSpec((3, 5, 4, 2), activation="relu"), GaussianFamily(1.0)),
    ]


def relu_safe_theta(model, x, seed, min_gap=1e-3):
    """Parameters whose relu pre-activations stay away from the kink at x."""
    rng = np.random.default_rng(seed)
    for attempt in range(200):
        theta = initialize_mean(model.spec, rng.integers(2**31))
        if model.spec.activation != "relu":
            return theta
        a = np.asarray(x, dtype=float)
        ok = True
        for i, (w, b) in enumerate(model.spec.unpack(theta)):
            z = w @ a + b
            if i < len(model.spec.layer_widths) - 2:
                if np.min(np.abs(z)) < min_gap:
                    ok = False
                    break
                a = np.maximum(z, 0.0)
        if ok:
            return theta
    raise RuntimeError("could not sample relu parameters away from kinks")


def fd_jacobian(model, x, theta, eps=1e-5):
    """Central finite differences of the observation mean."""
    base = model.forward(x, theta)
    jac = np.zeros((base.shape[0], theta.shape[0]))
    for j in range(theta.shape[0]):
        tp, tm = theta.copy(), theta.copy()
        tp[j] += eps
        tm[j] -= eps
        jac[:, j] = (model.forward(x, tp) - model.forward(x, tm)) / (2 * eps)
    return jac
