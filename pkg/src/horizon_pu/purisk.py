"""Unbiased and non-negative PU risk estimators and the single-task trainer.

Positive (labeled) and unlabeled samples enter the risk as

    pi * E_p[l(f, +1)]  +  (E_u[l(f, -1)] - pi * E_p[l(f, -1)])

where the bracketed part estimates the negative-class risk.  The non-negative
variant clamps that part at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import CsrBatch
from .net import DenseNet, NonFiniteError, OptimState, sigmoid

LOSSES = ("logistic", "sigmoid")


@dataclass(frozen=True)
class PuConfig:
    prior: float = 0.2
    loss: str = "logistic"
    nonneg: bool = True

    def __post_init__(self):
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"class prior must be in (0, 1), got {self.prior}")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; choose from {LOSSES}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    lr: float = 1e-3
    batch_pos: int = 64
    batch_unl: int = 256
    weight_decay: float = 1e-4
    optimizer: str = "adam"
    seed: int = 0
    steps_per_epoch: int | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.batch_pos < 1 or self.batch_unl < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be >= 1")

    def optim(self) -> OptimState:
        return OptimState(kind=self.optimizer, lr=self.lr, weight_decay=self.weight_decay)


@dataclass(frozen=True)
class RiskBreakdown:
    term_pos: float
    term_neg_correction: float
    total: float
    correction_clamped: bool


def _loss(scores, y, kind):
    z = -y * scores
    if kind == "logistic":
        return np.logaddexp(0.0, z)
    return sigmoid(z)


def _loss_grad(scores, y, kind):
    s = sigmoid(-y * scores)
    if kind == "logistic":
        return -y * s
    return -y * s * (1.0 - s)


def _as_scores(scores, name):
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} scores must be non-empty")
    return arr


def _terms(pos, unl, cfg):
    pi = cfg.prior
    term_pos = pi * float(np.mean(_loss(pos, 1.0, cfg.loss)))
    corr = float(np.mean(_loss(unl, -1.0, cfg.loss))) - pi * float(np.mean(_loss(pos, -1.0, cfg.loss)))
    return term_pos, corr


def unbiased_pu_risk(pos_scores, unl_scores, cfg: PuConfig) -> RiskBreakdown:
    pos = _as_scores(pos_scores, "positive")
    unl = _as_scores(unl_scores, "unlabeled")
    term_pos, corr = _terms(pos, unl, cfg)
    return RiskBreakdown(term_pos, corr, term_pos + corr, False)


def nonneg_pu_risk(pos_scores, unl_scores, cfg: PuConfig) -> RiskBreakdown:
    pos = _as_scores(pos_scores, "positive")
    unl = _as_scores(unl_scores, "unlabeled")
    term_pos, corr = _terms(pos, unl, cfg)
    if corr < 0:
        return RiskBreakdown(term_pos, corr, term_pos, True)
    return RiskBreakdown(term_pos, corr, term_pos + corr, False)


def pu_risk(pos_scores, unl_scores, cfg: PuConfig) -> RiskBreakdown:
    return nonneg_pu_risk(pos_scores, unl_scores, cfg) if cfg.nonneg else unbiased_pu_risk(pos_scores, unl_scores, cfg)


def score_gradients(pos_scores, unl_scores, cfg: PuConfig, mode="objective"):
    """Risk plus its derivative w.r.t. every score.

    ``mode="objective"`` differentiates the reported total.  ``mode="train"``
    gives the update direction used in training: when the correction term of
    a non-negative risk is negative, the step descends on the negated
    correction term alone.
    """
    pos = _as_scores(pos_scores, "positive")
    unl = _as_scores(unl_scores, "unlabeled")
    risk = pu_risk(pos, unl, cfg)
    pi, n_p, n_u = cfg.prior, pos.size, unl.size
    d_pos_plus = pi / n_p * _loss_grad(pos, 1.0, cfg.loss)
    d_pos_minus = -pi / n_p * _loss_grad(pos, -1.0, cfg.loss)
    d_unl = _loss_grad(unl, -1.0, cfg.loss) / n_u
    if not risk.correction_clamped:
        return risk, d_pos_plus + d_pos_minus, d_unl
    if mode == "train":
        return risk, -d_pos_minus, -d_unl
    return risk, d_pos_plus, np.zeros_like(unl)


def vstack(a: CsrBatch, b: CsrBatch) -> CsrBatch:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    indptr = np.concatenate([a.indptr, b.indptr[1:] + a.indptr[-1]])
    return CsrBatch(indptr, np.concatenate([a.indices, b.indices]), np.concatenate([a.data, b.data]), a.dim)


def draw_batch(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """Indices of one minibatch, without replacement inside the batch."""
    return rng.choice(n, size=min(size, n), replace=False)


def steps_per_epoch(n_unl: int, train: TrainConfig) -> int:
    if train.steps_per_epoch is not None:
        return train.steps_per_epoch
    return max(1, math.ceil(n_unl / train.batch_unl))


def nnpu_objective(net: DenseNet, Xp: CsrBatch, Xu: CsrBatch, cfg: PuConfig, weight_decay=0.0, mode="objective"):
    """Risk of ``net`` on one (P, U) batch and parameter gradients.

    The returned objective adds ``weight_decay / 2 * ||theta||^2`` so that its
    gradient carries the same ``weight_decay * theta`` term the optimizer adds.
    """
    scores, cache = net.forward(vstack(Xp, Xu))
    n_p = Xp.n_rows
    risk, gp, gu = score_gradients(scores[:n_p], scores[n_p:], cfg, mode)
    grads, _ = net.backward(cache, np.concatenate([gp, gu]))
    objective = risk.total
    if weight_decay:
        sq = sum(float(np.sum(np.square(p, dtype=np.float64))) for p in net.params())
        objective += 0.5 * weight_decay * sq
        grads = [g + weight_decay * p for g, p in zip(grads, net.params())]
    return objective, risk, grads


def evaluate(net: DenseNet, positives: CsrBatch, unlabeled: CsrBatch, cfg: PuConfig) -> RiskBreakdown:
    sp, _ = net.forward(positives)
    su, _ = net.forward(unlabeled)
    return pu_risk(sp, su, cfg)


def pu_train(
    positives: CsrBatch,
    unlabeled: CsrBatch,
    net: DenseNet,
    cfg: PuConfig,
    train: TrainConfig = TrainConfig(),
    history: list | None = None,
) -> DenseNet:
    """Minibatch minimization of the (non-negative) PU risk plus weight decay.

    Works on a copy of ``net``.  Each step draws ``batch_pos`` positives and
    ``batch_unl`` unlabeled rows; per-step risks are appended to ``history``
    when given.
    """
    if positives.n_rows == 0 or unlabeled.n_rows == 0:
        raise ValueError("positive and unlabeled sets must be non-empty")
    if positives.dim != net.input_dim or unlabeled.dim != net.input_dim:
        raise ValueError("input dimension does not match the network")
    net = net.copy()
    optim = train.optim()
    rng = np.random.default_rng(train.seed)
    n_steps = steps_per_epoch(unlabeled.n_rows, train)
    for epoch in range(train.epochs):
        for _ in range(n_steps):
            Xp = positives.take(draw_batch(rng, positives.n_rows, train.batch_pos))
            Xu = unlabeled.take(draw_batch(rng, unlabeled.n_rows, train.batch_unl))
            risk = pu_step(net, Xp, Xu, cfg, optim)
            if history is not None:
                history.append(risk)
    return net


def pu_step(net: DenseNet, Xp: CsrBatch, Xu: CsrBatch, cfg: PuConfig, optim: OptimState) -> RiskBreakdown:
    scores, cache = net.forward(vstack(Xp, Xu))
    n_p = Xp.n_rows
    risk, gp, gu = score_gradients(scores[:n_p], scores[n_p:], cfg, mode="train")
    if not math.isfinite(risk.total):
        raise NonFiniteError(f"non-finite PU risk {risk}")
    grads, _ = net.backward(cache, np.concatenate([gp, gu]))
    optim.update(net.params(), grads)
    net.touch()
    return risk
