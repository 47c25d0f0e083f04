"""Stateful learner adapters shared by the run harness and the bandit loop.

A learner owns its belief (or parameter vector) and exposes two calls:

* ``predict(x)`` is read only. It applies the same inflation and drift the
  next observe() will apply, then returns a :class:`PredictOutput` with the
  one-step-ahead prediction and, for Bayesian learners, the predicted
  belief.
* ``observe(x, y)`` consumes one labeled example and advances the state.

The module-level ``REGISTRY`` maps method tags to factories used by the
experiment configuration.
"""

from dataclasses import dataclass

import numpy as np

from . import baselines, diagonal, spherical
from .inflation import InflationConfig, LatentPrior, inflate_dlr, inflate_spherical
from .models import initialize_mean, linearize


@dataclass(frozen=True)
class PredictOutput:
    """One-step-ahead prediction handed to the metric code."""

    x: np.ndarray
    y_hat: np.ndarray
    belief: object = None  # predicted belief when the learner has one


class _BayesianLearner:
    """Shared predict/observe plumbing over predicted beliefs."""

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        self.latent = LatentPrior(cfg.dynamics.initial_precision)
        self.t = 0

    # subclasses: _inflate, _predict_belief, _update

    def predicted_belief(self):
        """Inflated and drifted belief, without mutating the learner."""
        belief = self._inflate(self.belief)
        return self._predict_belief(belief)

    def predict(self, x):
        pred = self.predicted_belief()
        return PredictOutput(np.asarray(x, dtype=float), self.model.forward(x, pred.mean), pred)

    def apply_update(self, pred, lin, y):
        """Condition on one (possibly masked) linearized observation and
        advance the learner's clock. ``pred`` must come from
        :meth:`predicted_belief` this step."""
        self.belief = self._update(pred, lin, y)
        dyn = self.cfg.dynamics
        self.latent.advance(dyn.gamma, dyn.process_noise)
        self.t += 1

    def observe(self, x, y):
        pred = self.predicted_belief()
        lin = linearize(self.model, x, pred.mean)
        self.apply_update(pred, lin, y)

    def _inflation_cfg(self):
        cfg = self.cfg.inflation
        if cfg is None:
            return None
        ref = cfg.prior_mean_ref
        if ref is None:
            ref = getattr(self, "_init_mean", None)
        return InflationConfig(
            alpha=cfg.alpha,
            variant=cfg.variant,
            prior_mean_ref=ref,
            gamma_product=self.latent.gamma_product,
        )


class LowRankFilterLearner(_BayesianLearner):
    """Diagonal-plus-low-rank filter."""

    def __init__(self, model, cfg, seed):
        super().__init__(model, cfg)
        self.belief = diagonal.initial_belief(model, cfg, seed)
        self._init_mean = self.belief.mean

    def _inflate(self, belief):
        icfg = self._inflation_cfg()
        if icfg is None or icfg.variant == "none":
            return belief
        return inflate_dlr(belief, icfg, self.latent.eta)

    def _predict_belief(self, belief):
        return diagonal.predict(belief, self.cfg)

    def _update(self, pred, lin, y):
        return diagonal.update(pred, lin, y, self.cfg)


class SphericalFilterLearner(_BayesianLearner):
    """Spherical low-rank filter; ``mode`` picks the SVD or projection update."""

    def __init__(self, model, cfg, seed, mode="svd"):
        super().__init__(model, cfg)
        self.mode = mode
        self.belief = spherical.initial_belief(model, cfg, seed)
        self._init_mean = self.belief.mean

    def _inflate(self, belief):
        icfg = self._inflation_cfg()
        if icfg is None or icfg.variant == "none":
            return belief
        return inflate_spherical(belief, icfg)

    def _predict_belief(self, belief):
        return spherical.predict(belief, self.cfg)

    def _update(self, pred, lin, y):
        if self.mode == "orth":
            return spherical.update_orth(pred, lin, y, self.cfg, rng_seed=self.t)
        return spherical.update_svd(pred, lin, y, self.cfg)


class DenseFilterLearner(_BayesianLearner):
    """Full-covariance EKF, optionally with iterated relinearization."""

    def __init__(self, model, cfg, seed, iterated=None):
        super().__init__(model, cfg)
        self.iterated = iterated
        mean = initialize_mean(model.spec, seed)
        prec = cfg.dynamics.initial_precision * np.eye(mean.shape[0])
        self.belief = baselines.DenseBelief(mean, prec)

    def _inflate(self, belief):
        return belief

    def _predict_belief(self, belief):
        return baselines.dense_predict(belief, self.cfg.dynamics)

    def _update(self, pred, lin, y):
        return baselines.dense_update(pred, lin, y)

    def observe(self, x, y):
        if self.iterated is None:
            super().observe(x, y)
            return
        pred = self.predicted_belief()
        self.belief = baselines.iterated_ekf_update(pred, self.model, x, y, self.iterated)
        dyn = self.cfg.dynamics
        self.latent.advance(dyn.gamma, dyn.process_noise)
        self.t += 1


class IteratedSphericalLearner(_BayesianLearner):
    """Spherical low-rank filter with iterated line-searched updates."""

    def __init__(self, model, cfg, seed, iterated):
        super().__init__(model, cfg)
        self.iterated = iterated
        self.belief = spherical.initial_belief(model, cfg, seed)

    def _inflate(self, belief):
        return belief

    def _predict_belief(self, belief):
        return spherical.predict(belief, self.cfg)

    def observe(self, x, y):
        pred = self.predicted_belief()
        self.belief = baselines.iterated_lowrank_update(
            pred, self.model, x, y, self.iterated, rank=self.cfg.rank
        )
        dyn = self.cfg.dynamics
        self.latent.advance(dyn.gamma, dyn.process_noise)
        self.t += 1


class DiagonalEkfLearner:
    """VDEKF or FDEKF baseline."""

    def __init__(self, model, dyn, seed, flavor="vdekf"):
        self.model = model
        self.dyn = dyn
        self.flavor = flavor
        mean = initialize_mean(model.spec, seed)
        self.belief = baselines.DiagonalBelief(
            mean, np.full(mean.shape[0], dyn.initial_precision)
        )

    def predict(self, x):
        pred = baselines.diagonal_predict(self.belief, self.dyn)
        view = diagonal_as_dlr(pred)
        return PredictOutput(np.asarray(x, dtype=float), self.model.forward(x, pred.mean), view)

    def observe(self, x, y):
        step = baselines.vdekf_step if self.flavor == "vdekf" else baselines.fdekf_step
        self.belief, _ = step(self.belief, self.model, x, y, self.dyn)


def diagonal_as_dlr(belief):
    from .belief import DlrBelief

    return DlrBelief(belief.mean, belief.diag_precision, np.zeros((belief.mean.shape[0], 0)))


class SgdReplayLearner:
    """SGD or Adam over a FIFO replay buffer. Point estimate only."""

    def __init__(self, model, seed, buffer_size=10, optimizer="sgd", lr=0.01,
                 inner_iters=1, beta1=0.9, beta2=0.999, eps=1e-8):
        self.model = model
        self.params = initialize_mean(model.spec, seed)
        self.buffer = baselines.ReplayBuffer(buffer_size)
        if optimizer == "sgd":
            self.optimizer = baselines.Sgd(lr)
        elif optimizer == "adam":
            self.optimizer = baselines.Adam(lr, beta1, beta2, eps)
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        self.inner_iters = inner_iters

    def predict(self, x):
        return PredictOutput(np.asarray(x, dtype=float), self.model.forward(x, self.params))

    def observe(self, x, y):
        self.params = baselines.sgd_replay_step(
            self.params, self.buffer, x, y, self.optimizer,
            inner_iters=self.inner_iters, model=self.model,
        )


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def _dyn(params):
    return diagonal.DynamicsConfig(
        gamma=params.get("gamma", 1.0),
        process_noise=params.get("process_noise", 0.0),
        initial_precision=params.get("initial_precision", 1.0),
        steady_state=params.get("steady_state", False),
    )


def _inflation(params):
    variant = params.get("inflation", "none")
    if variant == "none":
        return None
    return InflationConfig(alpha=params.get("inflation_alpha", 0.0), variant=variant)


def _lowrank_cfg(params):
    return diagonal.LowRankConfig(
        rank=params.get("rank", 10), dynamics=_dyn(params), inflation=_inflation(params)
    )


def _iterated(params):
    return baselines.IteratedConfig(
        num_iters=params.get("iterations", 3),
        linesearch_grid=params.get("linesearch_grid", 10),
    )


REGISTRY = {
    "lrekf": lambda model, params, seed: LowRankFilterLearner(model, _lowrank_cfg(params), seed),
    "lrekf_spherical": lambda model, params, seed: SphericalFilterLearner(
        model, _lowrank_cfg(params), seed, mode=params.get("update", "svd")
    ),
    "fcekf": lambda model, params, seed: DenseFilterLearner(model, _lowrank_cfg(params), seed),
    "iekf": lambda model, params, seed: DenseFilterLearner(
        model, _lowrank_cfg(params), seed, iterated=_iterated(params)
    ),
    "ilrekf": lambda model, params, seed: IteratedSphericalLearner(
        model, _lowrank_cfg(params), seed, _iterated(params)
    ),
    "vdekf": lambda model, params, seed: DiagonalEkfLearner(model, _dyn(params), seed, "vdekf"),
    "fdekf": lambda model, params, seed: DiagonalEkfLearner(model, _dyn(params), seed, "fdekf"),
    "sgd_rb": lambda model, params, seed: SgdReplayLearner(
        model, seed,
        buffer_size=params.get("buffer_size", 10),
        optimizer=params.get("optimizer", "sgd"),
        lr=params.get("lr", 0.01),
        inner_iters=params.get("inner_iters", 1),
    ),
    "ogd": lambda model, params, seed: SgdReplayLearner(
        model, seed,
        buffer_size=1,
        optimizer=params.get("optimizer", "sgd"),
        lr=params.get("lr", 0.01),
        inner_iters=params.get("inner_iters", 1),
    ),
}


def build_learner(tag, model, params, seed):
    if tag not in REGISTRY:
        raise ValueError(f"unknown method {tag!r}; valid: {sorted(REGISTRY)}")
    return REGISTRY[tag](model, params, seed)
