"""Differentiable observation models and likelihood moment matching.

An observation model maps an input ``x`` and a flat parameter vector
``theta`` to a C-dimensional output. The package ships a multilayer
perceptron whose Jacobian is accumulated layer by layer (no autodiff
framework), plus a thin wrapper for handwritten test models.

Likelihood families:

* ``GaussianFamily(obs_variance)`` for regression. ``obs_variance`` may be
  a scalar (isotropic) or a full C x C covariance.
* ``CategoricalFamily()`` for classification. The model output passes
  through a softmax and the conditional covariance is moment matched as
  ``diag(p) - p p^T``, which has rank C - 1.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import chol_or_raise

# Probabilities are clamped away from exact 0/1 before moment matching so
# the whitened observation never becomes exactly singular.
PROB_CLAMP = 1e-7

# Eigenvalues of the moment-matched covariance at or below this threshold
# are treated as the kernel when forming the pseudo-inverse whitener.
WHITENER_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class GaussianFamily:
    """Gaussian observation noise with known (co)variance."""

    obs_variance: object = 1.0  # scalar or (C, C) array

    kind = "gaussian"

    def obs_cov(self, dim):
        r = np.asarray(self.obs_variance, dtype=float)
        if r.ndim == 0:
            return float(r) * np.eye(dim)
        if r.shape != (dim, dim):
            raise ValueError(f"obs_variance shape {r.shape} does not match C={dim}")
        return r


@dataclass(frozen=True)
class CategoricalFamily:
    """Categorical likelihood via softmax outputs."""

    kind = "categorical"


@dataclass(frozen=True)
class Linearization:
    """First-order Gaussian approximation of the likelihood at one input.

    Attributes
    ----------
    y_hat : ndarray, shape (C,)
        Predicted observation mean (probabilities for classification).
    jacobian : ndarray, shape (C, P)
        Jacobian of the observation mean in theta.
    obs_cov : ndarray, shape (C, C)
        Moment-matched observation covariance R (PSD; rank C-1 for
        classification).
    whitener : ndarray, shape (C, C)
        A with ``A.T @ A`` equal to R^-1, or to the pseudo-inverse R^+
        when R is singular.
    """

    y_hat: np.ndarray
    jacobian: np.ndarray
    obs_cov: np.ndarray
    whitener: np.ndarray

    def apply_r_inv(self, v):
        """R^-1 v (pseudo-inverse when R is singular)."""
        return self.whitener.T @ (self.whitener @ v)


def softmax(z):
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected network shape.

    ``layer_widths`` lists input, hidden and output widths, e.g.
    ``[8, 50, 1]``. Parameters are flattened layer by layer, weights in
    row-major order followed by the layer's biases, so
    ``P = sum((w_in + 1) * w_out)`` over consecutive width pairs.
    """

    layer_widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError("layer_widths needs >= 2 positive entries")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def parameter_count(self):
        w = self.layer_widths
        return sum((w[i] + 1) * w[i + 1] for i in range(len(w) - 1))

    @property
    def in_dim(self):
        return self.layer_widths[0]

    @property
    def out_dim(self):
        return self.layer_widths[-1]

    def unpack(self, theta):
        """Split a flat parameter vector into (weight, bias) pairs."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.parameter_count,):
            raise ValueError(
                f"theta has length {theta.shape}, expected {self.parameter_count}"
            )
        layers = []
        pos = 0
        w = self.layer_widths
        for i in range(len(w) - 1):
            n_in, n_out = w[i], w[i + 1]
            weight = theta[pos : pos + n_in * n_out].reshape(n_out, n_in)
            pos += n_in * n_out
            bias = theta[pos : pos + n_out]
            pos += n_out
            layers.append((weight, bias))
        return layers


def _act(spec, z):
    return np.tanh(z) if spec.activation == "tanh" else np.maximum(z, 0.0)


def _act_grad(spec, z, a):
    if spec.activation == "tanh":
        return 1.0 - a**2
    return (z > 0).astype(float)


@dataclass(frozen=True)
class MlpModel:
    """An MLP observation model paired with a likelihood family."""

    spec: MlpSpec
    family: object = field(default_factory=GaussianFamily)

    @property
    def parameter_count(self):
        return self.spec.parameter_count

    @property
    def out_dim(self):
        return self.spec.out_dim

    def logits(self, x, theta):
        """Raw network output before any link function."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.spec.in_dim,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.spec.in_dim},)")
        a = x
        for i, (weight, bias) in enumerate(self.spec.unpack(theta)):
            z = weight @ a + bias
            a = z if i == len(self.spec.layer_widths) - 2 else _act(self.spec, z)
        return a

    def forward(self, x, theta):
        """Observation mean: raw outputs, or softmax probabilities."""
        z = self.logits(x, theta)
        if self.family.kind == "categorical":
            return softmax(z)
        return z

    def logit_jacobian(self, x, theta):
        """C x P Jacobian of the raw output in the flat parameters."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        layers = self.spec.unpack(theta)
        # forward pass, keeping pre- and post-activation values
        acts = [x]
        pre = []
        a = x
        for i, (weight, bias) in enumerate(layers):
            z = weight @ a + bias
            pre.append(z)
            a = z if i == len(layers) - 1 else _act(self.spec, z)
            acts.append(a)
        c = self.spec.out_dim
        p = self.spec.parameter_count
        jac = np.zeros((c, p))
        # backward pass: g holds d(output)/d(z_layer), shape (C, width)
        g = np.eye(c)
        pos = p
        for i in range(len(layers) - 1, -1, -1):
            weight, _ = layers[i]
            n_out, n_in = weight.shape
            pos -= n_out
            jac[:, pos : pos + n_out] = g
            pos -= n_in * n_out
            block = g[:, :, None] * acts[i][None, None, :]
            jac[:, pos : pos + n_in * n_out] = block.reshape(c, n_in * n_out)
            if i > 0:
                g = (g @ weight) * _act_grad(self.spec, pre[i - 1], acts[i])[None, :]
        return jac

    def jacobian(self, x, theta):
        """Jacobian of the observation mean (softmax output for categorical)."""
        jac = self.logit_jacobian(x, theta)
        if self.family.kind == "categorical":
            probs = self.forward(x, theta)
            s = np.diag(probs) - np.outer(probs, probs)
            return s @ jac
        return jac


@dataclass(frozen=True)
class FunctionModel:
    """Observation model from explicit forward and Jacobian callables.

    Handy for hand-built test problems such as linear maps or scalar
    polynomials; both callables take (x, theta).
    """

    forward_fn: object
    jacobian_fn: object
    family: object = field(default_factory=GaussianFamily)
    parameter_count: int = 0

    def logits(self, x, theta):
        return np.atleast_1d(np.asarray(self.forward_fn(x, theta), dtype=float))

    def forward(self, x, theta):
        out = self.logits(x, theta)
        if self.family.kind == "categorical":
            return softmax(out)
        return out

    def logit_jacobian(self, x, theta):
        return np.atleast_2d(np.asarray(self.jacobian_fn(x, theta), dtype=float))

    def jacobian(self, x, theta):
        jac = self.logit_jacobian(x, theta)
        if self.family.kind == "categorical":
            probs = self.forward(x, theta)
            return (np.diag(probs) - np.outer(probs, probs)) @ jac
        return jac


def _categorical_moments(probs):
    """Clamped probabilities plus their moment-matched covariance."""
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    p = p / p.sum()
    cov = np.diag(p) - np.outer(p, p)
    return p, 0.5 * (cov + cov.T)


def pseudo_whitener(cov):
    """A with A^T A = pinv(cov), dropping eigenvalues <= the floor."""
    vals, vecs = scipy.linalg.eigh(cov)
    keep = vals > WHITENER_EIG_FLOOR
    a = np.zeros_like(cov)
    k = int(keep.sum())
    if k:
        a[:k, :] = (vecs[:, keep] / np.sqrt(vals[keep])).T
    return a


def linearize(model, x, mu):
    """Linear-Gaussian approximation of the likelihood at parameter mu.

    For regression the covariance is the family's R and the whitener is
    the inverse Cholesky factor of R. For classification the covariance
    is ``diag(p) - p p^T`` at the clamped softmax output and the whitener
    is its eigenvalue pseudo-inverse square root; the kernel of R lies in
    the kernel of ``jacobian.T`` so whitened updates are well defined.
    """
    y_hat = model.forward(x, mu)
    if model.family.kind == "categorical":
        y_hat, cov = _categorical_moments(y_hat)
        sm = np.diag(y_hat) - np.outer(y_hat, y_hat)
        jac = sm @ model.logit_jacobian(x, mu)
        return Linearization(y_hat, jac, cov, pseudo_whitener(cov))
    cov = model.family.obs_cov(y_hat.shape[0])
    chol = chol_or_raise(cov, "observation covariance")
    whitener = scipy.linalg.solve_triangular(chol, np.eye(cov.shape[0]), lower=True)
    return Linearization(y_hat, model.jacobian(x, mu), cov, whitener)


def initialize_mean(spec, rng_seed, scheme="lecun_normal"):
    """Draw an initial flat parameter vector.

    ``lecun_normal`` samples each weight from N(0, 1/fan_in) and sets
    every bias to zero. Deterministic for a fixed seed.
    """
    if scheme != "lecun_normal":
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(rng_seed)
    parts = []
    w = spec.layer_widths
    for i in range(len(w) - 1):
        n_in, n_out = w[i], w[i + 1]
        parts.append(rng.normal(0.0, 1.0 / np.sqrt(n_in), size=n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)
