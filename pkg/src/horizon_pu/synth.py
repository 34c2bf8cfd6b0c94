"""Synthetic PU corpora with hidden labels.

Each period mixes two multinomial "topics" over a shared vocabulary: a
near-horizon topic that also generates the labeled positives and a
distant-horizon topic.  Unlabeled documents are drawn from the prior-weighted
mixture, so the true class of every unlabeled document is known.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, CsrBatch, Document, Kind, Vocabulary
from .net import logistic_loss

POS_RANK_PROBS = (0.05, 0.10, 0.25, 0.35, 0.25)
NEG_RANK_PROBS = (0.25, 0.35, 0.25, 0.10, 0.05)


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings.

    ``overlap`` is the probability mass each topic puts on words common to
    both topics (0 = disjoint supports, separable).  ``drift`` is the
    log-scale spread of per-period multiplicative noise on word weights.
    """

    T: int = 6
    n_pos: int = 300
    n_unl: int = 300
    vocab_size: int = 2000
    priors: float | tuple[float, ...] = 0.2
    overlap: float = 0.75
    drift: float = 0.3
    mean_length: float = 20.0
    zipf: float = 1.0
    pos_rank_probs: tuple[float, ...] = POS_RANK_PROBS
    neg_rank_probs: tuple[float, ...] = NEG_RANK_PROBS
    start_month: str = "2016-01"
    seed: int = 0

    def __post_init__(self):
        if self.T < 1 or self.n_pos < 1 or self.n_unl < 1:
            raise ValueError("T, n_pos and n_unl must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        for p in self.prior_list():
            if not 0.0 < p <= 1.0:
                raise ValueError(f"prior must be in (0, 1], got {p}")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must be in [0, 1]")
        if self.mean_length < 1:
            raise ValueError("mean_length must be >= 1")
        for probs in (self.pos_rank_probs, self.neg_rank_probs):
            if len(probs) != 5 or abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0:
                raise ValueError("rank distributions need 5 non-negative probabilities summing to 1")

    def prior_list(self) -> list[float]:
        if isinstance(self.priors, (tuple, list)):
            if len(self.priors) != self.T:
                raise ValueError("need one prior per period")
            return list(self.priors)
        return [self.priors] * self.T

    def prior(self, t: int) -> float:
        return self.prior_list()[t - 1]

    @property
    def word_width(self) -> int:
        return len(str(self.vocab_size - 1))

    def word(self, j: int) -> str:
        return f"w{j:0{self.word_width}d}"


@dataclass(frozen=True)
class GroundTruth:
    labels: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, doc_id):
        return self.labels[doc_id]

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"id": k, "y": v}) + "\n" for k, v in sorted(self.labels.items()))

    @classmethod
    def from_jsonl(cls, text: str) -> "GroundTruth":
        labels = {}
        for line in text.splitlines():
            if line.strip():
                obj = json.loads(line)
                labels[obj["id"]] = int(obj["y"])
        return cls(labels)


def topic_supports(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint (near-only, distant-only, shared) word index ranges."""
    V = cfg.vocab_size
    a, b = V // 3, 2 * V // 3
    if cfg.overlap == 0.0:
        a, b = V // 2, V
    return np.arange(0, a), np.arange(a, b), np.arange(b, V)


def _zipf_weights(cfg, n, rng):
    return (rng.permutation(n) + 1).astype(np.float64) ** -cfg.zipf


def topic_distributions(cfg: SynthConfig, t: int) -> tuple[np.ndarray, np.ndarray]:
    """(near, distant) word distributions for period ``t``.

    Each topic puts mass ``1 - overlap`` on its own words and ``overlap`` on
    a shared word distribution that is identical for both topics.
    """
    base_rng = np.random.default_rng([cfg.seed, 0])
    period_rng = np.random.default_rng([cfg.seed, 1, t])
    parts = []
    for support in topic_supports(cfg):
        w = _zipf_weights(cfg, len(support), base_rng)
        if cfg.drift > 0:
            w = w * np.exp(cfg.drift * period_rng.standard_normal(len(support)))
        p = np.zeros(cfg.vocab_size)
        if len(support):
            p[support] = w / w.sum()
        parts.append(p)
    near_only, distant_only, shared = parts
    o = cfg.overlap if shared.any() else 0.0
    return (1 - o) * near_only + o * shared, (1 - o) * distant_only + o * shared


def synth_vocabulary(cfg: SynthConfig) -> Vocabulary:
    """The full generator vocabulary; index j is word j."""
    return Vocabulary({cfg.word(j): j for j in range(cfg.vocab_size)})


def _draw_tokens(rng, probs, n, mean_length):
    lengths = 1 + rng.poisson(mean_length - 1.0, size=n)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    toks = np.searchsorted(cdf, rng.random(int(lengths.sum())), side="right")
    return np.minimum(toks, len(probs) - 1), lengths


def _tokens_to_csr(toks, lengths, V):
    n = len(lengths)
    rows = np.repeat(np.arange(n), lengths)
    keys, counts = np.unique(rows * V + toks, return_counts=True)
    r = keys // V
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    return CsrBatch(indptr, (keys % V).astype(np.int64), counts.astype(np.float64), V)


def sample_vectors(cfg: SynthConfig, t: int, y: int, n: int, rng: np.random.Generator) -> CsrBatch:
    """``n`` count vectors from class ``y`` of period ``t`` (no corpus built)."""
    near, distant = topic_distributions(cfg, t)
    toks, lengths = _draw_tokens(rng, near if y > 0 else distant, n, cfg.mean_length)
    return _tokens_to_csr(toks, lengths, cfg.vocab_size)


def sample_unlabeled(cfg: SynthConfig, t: int, n: int, rng: np.random.Generator, topics=None):
    """``n`` unlabeled vectors from the prior mixture plus their hidden labels."""
    near, distant = topics if topics is not None else topic_distributions(cfg, t)
    y = np.where(rng.random(n) < cfg.prior(t), 1, -1)
    lengths = 1 + rng.poisson(cfg.mean_length - 1.0, size=n)
    toks = np.empty(int(lengths.sum()), dtype=np.int64)
    u = rng.random(toks.shape[0])
    cdf_n, cdf_d = np.cumsum(near), np.cumsum(distant)
    cdf_n /= cdf_n[-1]
    cdf_d /= cdf_d[-1]
    row_pos = np.repeat(y > 0, lengths)
    toks[row_pos] = np.searchsorted(cdf_n, u[row_pos], side="right")
    toks[~row_pos] = np.searchsorted(cdf_d, u[~row_pos], side="right")
    np.minimum(toks, cfg.vocab_size - 1, out=toks)
    return _tokens_to_csr(toks, lengths, cfg.vocab_size), y


def generate(cfg: SynthConfig) -> tuple[Corpus, GroundTruth]:
    year, month = (int(x) for x in cfg.start_month.split("-"))
    labels_out = []
    docs = []
    truth = {}
    for t in range(1, cfg.T + 1):
        m = (year * 12 + month - 1) + (t - 1)
        labels_out.append(f"{m // 12:04d}-{m % 12 + 1:02d}")
        rng = np.random.default_rng([cfg.seed, 2, t])
        near, distant = topic_distributions(cfg, t)
        toks, lengths = _draw_tokens(rng, near, cfg.n_pos, cfg.mean_length)
        ranks = rng.choice(5, size=cfg.n_pos, p=cfg.pos_rank_probs)
        for i, chunk in enumerate(np.split(toks, np.cumsum(lengths)[:-1])):
            docs.append(Document(f"p{t:03d}-c{i:05d}", t, Kind.CURRENT, int(ranks[i]), tuple(cfg.word(j) for j in chunk)))
        X, y = sample_unlabeled(cfg, t, cfg.n_unl, rng, (near, distant))
        pos_r = rng.choice(5, size=cfg.n_unl, p=cfg.pos_rank_probs)
        neg_r = rng.choice(5, size=cfg.n_unl, p=cfg.neg_rank_probs)
        for i in range(cfg.n_unl):
            doc_id = f"p{t:03d}-f{i:05d}"
            lo, hi = X.indptr[i], X.indptr[i + 1]
            tokens = []
            for j, c in zip(X.indices[lo:hi], X.data[lo:hi]):
                tokens += [cfg.word(int(j))] * int(c)
            rank = pos_r[i] if y[i] > 0 else neg_r[i]
            docs.append(Document(doc_id, t, Kind.FUTURE, int(rank), tuple(tokens)))
            truth[doc_id] = int(y[i])
    return Corpus.from_documents(docs, labels_out), GroundTruth(truth)


def oracle_pn_risk(f, cfg: SynthConfig, n_mc: int, period: int = 1, seed: int = 0, chunk: int = 50_000):
    """Monte Carlo supervised risk pi * E_p[l(f, +1)] + (1 - pi) * E_n[l(f, -1)].

    ``f`` maps a :class:`CsrBatch` to an array of scores.  ``n_mc`` labeled
    draws are taken from each class conditional.  Returns ``(risk, stderr)``.
    """
    if n_mc < 100:
        raise ValueError("n_mc must be >= 100")
    pi = cfg.prior(period)
    rng = np.random.default_rng([seed, 3, period])
    stats = {}
    for y in (1, -1):
        total = total_sq = 0.0
        done = 0
        while done < n_mc:
            n = min(chunk, n_mc - done)
            losses = logistic_loss(np.asarray(f(sample_vectors(cfg, period, y, n, rng)), dtype=np.float64), y)
            losses = np.atleast_1d(losses)
            total += float(losses.sum())
            total_sq += float(np.square(losses).sum())
            done += n
        mean = total / n_mc
        var = max(0.0, (total_sq - n_mc * mean * mean) / (n_mc - 1))
        stats[y] = (mean, var)
    risk = pi * stats[1][0] + (1 - pi) * stats[-1][0]
    se = math.sqrt(pi**2 * stats[1][1] / n_mc + (1 - pi) ** 2 * stats[-1][1] / n_mc)
    return risk, se
