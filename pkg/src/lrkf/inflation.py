"""Covariance inflation: multiplicative discounting of past information.

Applied between update and predict (the harness applies it exactly once
per step, at the start of predict). Three variants, each scaling the
low-rank factor by ``1/sqrt(1+alpha)``:

* ``simple``   discounts the whole log posterior, so the dense covariance
  is multiplied by exactly ``1 + alpha`` and the mean is untouched.
* ``bayesian`` discounts only the data contribution, adding back
  ``alpha * eta / (1+alpha)`` of the latent prior precision to the
  diagonal and pulling the mean toward the decayed prior mean
  ``Gamma * mu0``.
* ``hybrid``   uses the bayesian covariance but, like simple, leaves the
  mean alone.

``eta`` here is the precision of the latent unconditional prior, which
evolves as ``eta_t^-1 = gamma^2 eta_{t-1}^-1 + q`` alongside the running
product ``Gamma_t = prod gamma_i``; :class:`LatentPrior` tracks both.
"""

from dataclasses import dataclass, replace

import numpy as np

from .belief import DlrBelief, SphericalBelief
from .linalg import solve_diag_plus_lowrank

VARIANTS = ("none", "bayesian", "simple", "hybrid")


@dataclass(frozen=True)
class InflationConfig:
    """Inflation strength and variant, plus what the bayesian mean pull needs."""

    alpha: float = 0.0
    variant: str = "none"
    prior_mean_ref: np.ndarray = None  # mu0; required for bayesian
    gamma_product: float = 1.0  # running Gamma_{t-1}

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    def advanced(self, gamma):
        """Copy with the running gamma product moved one step forward."""
        return replace(self, gamma_product=self.gamma_product * gamma)


@dataclass
class LatentPrior:
    """State of the data-free prior: precision eta and Gamma product."""

    eta: float
    gamma_product: float = 1.0

    def advance(self, gamma, q):
        self.eta = 1.0 / (gamma * gamma / self.eta + q)
        self.gamma_product *= gamma


def inflate_dlr(belief, cfg, eta_latent):
    """Apply one inflation step to a DLR belief.

    ``eta_latent`` is the current latent prior precision; it only enters
    the bayesian and hybrid diagonals and the bayesian mean pull.
    """
    if cfg.variant == "none" or cfg.alpha == 0.0:
        return belief
    a = cfg.alpha
    shrink = 1.0 / (1.0 + a)
    w = belief.low_rank * np.sqrt(shrink)
    if cfg.variant == "simple":
        return DlrBelief(belief.mean, belief.diag_precision * shrink, w)
    diag = belief.diag_precision * shrink + a * eta_latent * shrink
    if cfg.variant == "hybrid":
        return DlrBelief(belief.mean, diag, w)
    # bayesian: also pull the mean toward the decayed prior mean
    if cfg.prior_mean_ref is None:
        raise ValueError("bayesian inflation needs prior_mean_ref")
    target = cfg.gamma_product * np.asarray(cfg.prior_mean_ref, dtype=float)
    pull = solve_diag_plus_lowrank(diag, w, target - belief.mean)
    mean = belief.mean + (a * eta_latent * shrink) * pull
    return DlrBelief(mean, diag, w)


def inflate_spherical(belief, cfg):
    """Spherical counterpart of :func:`inflate_dlr`.

    The latent prior precision coincides with the spherical part here, so
    bayesian and hybrid leave ``eta`` untouched and only the singular
    values shrink; simple also deflates ``eta``.
    """
    if cfg.variant == "none" or cfg.alpha == 0.0:
        return belief
    a = cfg.alpha
    lam = belief.singular_values / np.sqrt(1.0 + a)
    if cfg.variant == "simple":
        return SphericalBelief(belief.mean, belief.eta / (1.0 + a), belief.basis, lam)
    if cfg.variant == "hybrid":
        return SphericalBelief(belief.mean, belief.eta, belief.basis, lam)
    # bayesian, with the diagonalized solve for the mean pull
    if cfg.prior_mean_ref is None:
        raise ValueError("bayesian inflation needs prior_mean_ref")
    eta = belief.eta
    target = cfg.gamma_product * np.asarray(cfg.prior_mean_ref, dtype=float)
    v = target - belief.mean
    if lam.size:
        gains = lam**2 / (eta * (eta + lam**2))
        pull = v / eta - belief.basis @ (gains * (belief.basis.T @ v))
    else:
        pull = v / eta
    mean = belief.mean + (a * eta / (1.0 + a)) * pull
    return SphericalBelief(mean, eta, belief.basis, lam)
