"""Multi-task PU model: a shared rectified trunk feeding one head per period."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, CsrBatch, Vocabulary, period_slice, vectorize_corpus
from .net import DenseNet, NetConfig, NonFiniteError, concat
from .purisk import (
    PuConfig,
    RiskBreakdown,
    TrainConfig,
    draw_batch,
    pu_risk,
    score_gradients,
    steps_per_epoch,
    vstack,
)

TRUNK_LAYERS = 3
HEAD_LAYERS = 2
DEFAULT_WIDTH = 500


class MtpuModel:
    def __init__(self, trunk: DenseNet, heads: Sequence[DenseNet]):
        if trunk.scalar_output:
            raise ValueError("trunk must end in a rectified feature layer")
        if not heads:
            raise ValueError("need at least one head")
        width = trunk.layer_dims[-1]
        for h in heads:
            if h.input_dim != width or not h.scalar_output:
                raise ValueError("every head must map the trunk width to a scalar score")
        self.trunk = trunk
        self.heads = list(heads)

    @property
    def T(self) -> int:
        return len(self.heads)

    @property
    def input_dim(self) -> int:
        return self.trunk.input_dim

    def head(self, t: int) -> DenseNet:
        if not 1 <= t <= self.T:
            raise IndexError(f"period {t} outside 1..{self.T}")
        return self.heads[t - 1]

    def copy(self) -> "MtpuModel":
        return MtpuModel(self.trunk.copy(), [h.copy() for h in self.heads])

    def as_dense(self, t: int) -> DenseNet:
        """The period-``t`` path as a single network."""
        return concat(self.trunk, self.head(t))

    def forward(self, t: int, X):
        head = self.head(t)
        H, tcache = self.trunk.forward(X)
        scores, hcache = head.forward(H)
        return scores, (tcache, hcache)

    def backward(self, t: int, caches, upstream):
        tcache, hcache = caches
        head_grads, gH = self.head(t).backward(hcache, upstream, need_input_grad=True)
        trunk_grads, _ = self.trunk.backward(tcache, gH)
        return trunk_grads, head_grads


def build_mtpu(d: int, T: int, net_cfg: NetConfig = NetConfig(), width: int = DEFAULT_WIDTH) -> MtpuModel:
    """Trunk d-w-w-w (seeded by ``net_cfg.seed``) and T heads w-w-1 (seed + t)."""
    if d < 1 or T < 1:
        raise ValueError("need d >= 1 and T >= 1")
    trunk = DenseNet.init([d] + [width] * TRUNK_LAYERS, net_cfg, scalar_output=False)
    heads = [DenseNet.init([width] * HEAD_LAYERS + [1], net_cfg, seed=net_cfg.seed + t) for t in range(1, T + 1)]
    return MtpuModel(trunk, heads)


def score(model: MtpuModel, t: int, x) -> float | np.ndarray:
    out, _ = model.forward(t, x)
    return float(out[0]) if out.shape[0] == 1 else out


def per_task_risk(model: MtpuModel, t: int, Xp: CsrBatch, Xu: CsrBatch, cfg: PuConfig, grads=False, mode="objective"):
    """Risk of head ``t`` on one period's batches.

    With ``grads=True`` returns ``(risk, trunk_grads, head_grads)``; only the
    trunk and head ``t`` lie on the computation path.
    """
    if Xp.n_rows == 0 or Xu.n_rows == 0:
        raise ValueError("empty batch")
    scores, caches = model.forward(t, vstack(Xp, Xu))
    n_p = Xp.n_rows
    if not grads:
        return pu_risk(scores[:n_p], scores[n_p:], cfg)
    risk, gp, gu = score_gradients(scores[:n_p], scores[n_p:], cfg, mode)
    trunk_grads, head_grads = model.backward(t, caches, np.concatenate([gp, gu]))
    return risk, trunk_grads, head_grads


@dataclass(frozen=True)
class MtpuTrainConfig:
    """``priors`` is one value for every period or a per-period sequence.

    ``tasks`` restricts training to a subset of periods; ``freeze_trunk``
    updates heads only.  ``schedule`` is ``"round_robin"`` (one step per task
    in turn) or ``"summed"`` (one step on the sum of all task risks).
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    priors: float | tuple[float, ...] = 0.2
    loss: str = "logistic"
    schedule: str = "round_robin"
    tasks: tuple[int, ...] | None = None
    freeze_trunk: bool = False

    def __post_init__(self):
        if self.schedule not in ("round_robin", "summed"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        vals = self.priors if isinstance(self.priors, (tuple, list)) else (self.priors,)
        for p in vals:
            if not 0.0 < p < 1.0:
                raise ValueError(f"class prior must be in (0, 1), got {p}")

    def pu_config(self, t: int) -> PuConfig:
        if isinstance(self.priors, (tuple, list)):
            if not 1 <= t <= len(self.priors):
                raise ValueError(f"no prior configured for period {t}")
            return PuConfig(self.priors[t - 1], self.loss, True)
        return PuConfig(self.priors, self.loss, True)


def period_pools(corpus: Corpus, X: CsrBatch) -> dict[int, tuple[CsrBatch, CsrBatch]]:
    """Per period, the positive and unlabeled rows of ``X`` (corpus order)."""
    pools = {}
    for t in range(1, corpus.T + 1):
        pos, unl = period_slice(corpus, t)
        pools[t] = (X.take(corpus.rows(pos)), X.take(corpus.rows(unl)))
    return pools


def mtpu_train(
    corpus: Corpus,
    vocab: Vocabulary | None,
    cfg: MtpuTrainConfig = MtpuTrainConfig(),
    model: MtpuModel | None = None,
    net_cfg: NetConfig | None = None,
    width: int = DEFAULT_WIDTH,
    X: CsrBatch | None = None,
    history: list | None = None,
) -> MtpuModel:
    """Train trunk + heads with a per-period non-negative PU risk.

    Each epoch runs ``max_t steps_per_epoch(t)`` rounds; a round visits the
    scheduled periods in increasing order.  Period ``t`` batches come from
    period ``t`` documents only.  ``history`` receives ``(t, RiskBreakdown)``
    per task step (``t = 0`` with the summed schedule).
    """
    if X is None:
        if vocab is None:
            raise ValueError("need a vocabulary or pre-vectorized rows")
        X = vectorize_corpus(corpus, vocab)
    if model is None:
        net_cfg = net_cfg or NetConfig(seed=cfg.train.seed)
        model = build_mtpu(X.dim, corpus.T, net_cfg, width)
    if model.T != corpus.T:
        raise ValueError(f"model has {model.T} heads but corpus has {corpus.T} periods")
    if model.input_dim != X.dim:
        raise ValueError("input dimension does not match the model")
    tasks = tuple(cfg.tasks) if cfg.tasks is not None else tuple(range(1, corpus.T + 1))
    for t in tasks:
        if not 1 <= t <= corpus.T:
            raise ValueError(f"task period {t} outside 1..{corpus.T}")
    pools = period_pools(corpus, X)
    model = model.copy()
    train = cfg.train
    optim = train.optim()
    rng = np.random.default_rng(train.seed)
    rounds = max(steps_per_epoch(pools[t][1].n_rows, train) for t in tasks)

    for epoch in range(train.epochs):
        for _ in range(rounds):
            if cfg.schedule == "round_robin":
                for t in tasks:
                    Xp, Xu = _draw(rng, pools[t], train)
                    risk, tg, hg = per_task_risk(model, t, Xp, Xu, cfg.pu_config(t), grads=True, mode="train")
                    _check(risk, t)
                    _apply(model, optim, cfg.freeze_trunk, tg, {t: hg})
                    if history is not None:
                        history.append((t, risk))
            else:
                trunk_sum, head_grads, total = None, {}, 0.0
                term_pos = corr = 0.0
                clamped = False
                for t in tasks:
                    Xp, Xu = _draw(rng, pools[t], train)
                    risk, tg, hg = per_task_risk(model, t, Xp, Xu, cfg.pu_config(t), grads=True, mode="train")
                    _check(risk, t)
                    trunk_sum = tg if trunk_sum is None else [a + b for a, b in zip(trunk_sum, tg)]
                    head_grads[t] = hg
                    total += risk.total
                    term_pos += risk.term_pos
                    corr += risk.term_neg_correction
                    clamped = clamped or risk.correction_clamped
                _apply(model, optim, cfg.freeze_trunk, trunk_sum, head_grads)
                if history is not None:
                    history.append((0, RiskBreakdown(term_pos, corr, total, clamped)))
    return model


def _draw(rng, pool, train):
    P, U = pool
    return P.take(draw_batch(rng, P.n_rows, train.batch_pos)), U.take(draw_batch(rng, U.n_rows, train.batch_unl))


def _check(risk, t):
    if not np.isfinite(risk.total):
        raise NonFiniteError(f"non-finite PU risk for period {t}: {risk}")


def _apply(model, optim, freeze_trunk, trunk_grads, head_grads):
    params, grads = [], []
    if not freeze_trunk:
        params += model.trunk.params()
        grads += trunk_grads
    for t, hg in sorted(head_grads.items()):
        params += model.head(t).params()
        grads += hg
    optim.update(params, grads)
    if not freeze_trunk:
        model.trunk.touch()
    for t in head_grads:
        model.head(t).touch()
