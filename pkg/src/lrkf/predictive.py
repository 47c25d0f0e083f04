"""One-step-ahead predictive distributions for the observations.

Given a parameter belief and an observation model, these functions
approximate ``p(y | x, data so far)`` at increasing fidelity:

* :func:`plugin_predict` plugs in the posterior mean (no parameter
  uncertainty). Its negative log score is the NLL.
* :func:`mc_predict` marginalizes the parameters by Monte Carlo; its
  negative log score is the NLPD.
* :func:`gaussian_predict` is the closed form for linearized regression,
  ``V = H Sigma H^T + R`` computed by the Woodbury identity in O(P L^2).
* :func:`probit_predict` is a deterministic classification approximation
  that divides each logit by ``sqrt(1 + pi/8 * var)``, pulling the
  probabilities toward uniform when the parameters are uncertain.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .belief import _dlr_parts, sample_parameters
from .models import softmax


@dataclass(frozen=True)
class GaussianPrediction:
    mean: np.ndarray
    cov: np.ndarray

    def nll(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        resid = y - self.mean
        chol = np.linalg.cholesky(self.cov)
        white = np.linalg.solve(chol, resid)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return 0.5 * (resid.size * np.log(2 * np.pi) + logdet + white @ white)


@dataclass(frozen=True)
class CategoricalPrediction:
    probs: np.ndarray

    def nll(self, y):
        """y may be a class index or a one-hot vector."""
        y = np.asarray(y)
        if y.ndim == 0:
            return -np.log(self.probs[int(y)])
        return -float(y @ np.log(self.probs))


def plugin_predict(belief, model, x):
    """Predictive distribution at the belief mean alone."""
    out = model.forward(x, belief.mean)
    if model.family.kind == "categorical":
        return CategoricalPrediction(out)
    return GaussianPrediction(out, model.family.obs_cov(out.shape[0]))


def _log_likelihood(model, x, theta, y):
    if model.family.kind == "categorical":
        probs = model.forward(x, theta)
        y = np.asarray(y)
        if y.ndim == 0:
            return np.log(probs[int(y)])
        return float(y @ np.log(probs))
    mean = model.forward(x, theta)
    resid = np.atleast_1d(np.asarray(y, dtype=float)) - mean
    cov = model.family.obs_cov(mean.shape[0])
    chol = np.linalg.cholesky(cov)
    white = np.linalg.solve(chol, resid)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (resid.size * np.log(2 * np.pi) + logdet + white @ white)


def mc_predict(belief, model, x, y, n_samples, rng_seed, temperature=1.0):
    """Monte Carlo NLPD: ``-log mean_s p(y | x, theta_s)``.

    ``temperature`` scales the parameter covariance before sampling;
    0 short-circuits to the plugin NLL.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if temperature == 0.0:
        return plugin_predict(belief, model, x).nll(y)
    draws = sample_parameters(belief, n_samples, rng_seed)
    if temperature != 1.0:
        draws = belief.mean + np.sqrt(temperature) * (draws - belief.mean)
    logs = np.array([_log_likelihood(model, x, theta, y) for theta in draws])
    return float(-(logsumexp(logs) - np.log(n_samples)))


def _marginal_quadratic(belief, rows):
    """diag(rows @ Sigma @ rows.T) for Sigma the belief covariance,
    computed through the Woodbury identity without any P x P matrix."""
    _, diag, w = _dlr_parts(belief)
    d_inv = 1.0 / diag
    base = rows * d_inv[None, :]
    first = np.einsum("ij,ij->i", base, rows)
    if w.shape[1] == 0:
        return first
    m = base @ w  # (C, L)
    core = np.eye(w.shape[1]) + (w.T * d_inv) @ w
    chol = np.linalg.cholesky(0.5 * (core + core.T))
    half = np.linalg.solve(chol, m.T)
    return first - np.einsum("ij,ij->j", half, half)


def gaussian_predict(belief, lin):
    """Closed-form predictive moments for linearized regression."""
    _, diag, w = _dlr_parts(belief)
    jac = lin.jacobian
    d_inv = 1.0 / diag
    base = jac * d_inv[None, :]
    cov = base @ jac.T
    if w.shape[1]:
        m = base @ w
        core = np.eye(w.shape[1]) + (w.T * d_inv) @ w
        cov = cov - m @ np.linalg.solve(core, m.T)
    cov = 0.5 * (cov + cov.T) + lin.obs_cov
    return GaussianPrediction(lin.y_hat, cov)


def probit_predict(belief, model, x):
    """Moderated softmax probabilities under parameter uncertainty.

    Uses the logit Jacobian; per-class marginal variances come from the
    same Woodbury factorization as :func:`gaussian_predict`, never
    forming the full logit covariance.
    """
    logits = model.logits(x, belief.mean)
    jac = model.logit_jacobian(x, belief.mean)
    var = np.maximum(_marginal_quadratic(belief, jac), 0.0)
    return softmax(logits / np.sqrt(1.0 + (np.pi / 8.0) * var))
