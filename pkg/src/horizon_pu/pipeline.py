"""Training modes (MTPU and the two single-task baselines) and per-period scoring."""

from __future__ import annotations

import numpy as np

from .checkpoint import Checkpoint
from .corpus import Corpus, CsrBatch, period_slice
from .mtpu import DEFAULT_WIDTH, MtpuTrainConfig, mtpu_train, period_pools
from .net import DenseNet, NetConfig
from .purisk import PuConfig, pu_train, vstack

MODES = ("mtpu", "pu1", "pu2")


def baseline_dims(d: int, width: int = DEFAULT_WIDTH) -> list[int]:
    """d-w-w-w-w-1: same depth as trunk plus head."""
    return [d, width, width, width, width, 1]


def train_pu1(corpus, X, cfg: MtpuTrainConfig, net_cfg: NetConfig, width=DEFAULT_WIDTH) -> DenseNet:
    """One network on the positives and unlabeled rows of every period pooled."""
    pools = period_pools(corpus, X)
    P, U = pools[1]
    for t in range(2, corpus.T + 1):
        P, U = vstack(P, pools[t][0]), vstack(U, pools[t][1])
    net = DenseNet.init(baseline_dims(X.dim, width), net_cfg)
    return pu_train(P, U, net, cfg.pu_config(1), cfg.train)


def train_pu2(corpus, X, cfg: MtpuTrainConfig, net_cfg: NetConfig, width=DEFAULT_WIDTH) -> list[DenseNet]:
    """One independent network per period, trained on that period only."""
    nets = []
    pools = period_pools(corpus, X)
    for t in range(1, corpus.T + 1):
        P, U = pools[t]
        net = DenseNet.init(baseline_dims(X.dim, width), net_cfg, seed=net_cfg.seed + t)
        nets.append(pu_train(P, U, net, cfg.pu_config(t), cfg.train))
    return nets


def train(mode: str, corpus: Corpus, X: CsrBatch, cfg: MtpuTrainConfig, net_cfg: NetConfig, width=DEFAULT_WIDTH) -> Checkpoint:
    if mode == "mtpu":
        model = mtpu_train(corpus, None, cfg, net_cfg=net_cfg, width=width, X=X)
        return Checkpoint.from_mtpu(model, net_cfg.seed, net_cfg.epsilon)
    if mode == "pu1":
        return Checkpoint("dense", [train_pu1(corpus, X, cfg, net_cfg, width)], net_cfg.seed, net_cfg.epsilon)
    if mode == "pu2":
        return Checkpoint("multi", train_pu2(corpus, X, cfg, net_cfg, width), net_cfg.seed, net_cfg.epsilon)
    raise ValueError(f"unknown training mode {mode!r}")


def score_unlabeled(ckpt: Checkpoint, corpus: Corpus, X: CsrBatch) -> dict[int, dict[str, float]]:
    """Scores of every period's unlabeled documents with the matching model."""
    if ckpt.nets[0].input_dim != X.dim:
        raise ValueError(f"checkpoint input dim {ckpt.nets[0].input_dim} != vocabulary size {X.dim}")
    if ckpt.kind in ("mtpu", "multi") and ckpt.T < corpus.T:
        raise ValueError(f"checkpoint has {ckpt.T} period models but corpus has {corpus.T} periods")
    out = {}
    for t in range(1, corpus.T + 1):
        _, unl = period_slice(corpus, t)
        Xu = X.take(corpus.rows(unl))
        if ckpt.kind == "mtpu":
            s, _ = ckpt.model().forward(t, Xu)
        elif ckpt.kind == "multi":
            s, _ = ckpt.nets[t - 1].forward(Xu)
        else:
            s, _ = ckpt.nets[0].forward(Xu)
        out[t] = {i: float(v) for i, v in zip(unl, np.asarray(s, dtype=np.float64))}
    return out
