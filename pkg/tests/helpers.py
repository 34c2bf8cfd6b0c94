"""Independent oracles shared by unit and acceptance tests."""

import math

import numpy as np

from horizon_pu.corpus import Corpus, CsrBatch, Document, Kind
from horizon_pu.net import DenseNet
from horizon_pu.purisk import PuConfig, nnpu_objective

FD_STEP = 1e-4
# denominator floor for per-component relative error
REL_FLOOR = 1e-6


def make_corpus(records, labels=None):
    """records: list of (period, kind, rank, "space separated tokens")."""
    docs = []
    for i, (t, kind, rank, text) in enumerate(records):
        docs.append(Document(f"d{i:03d}", t, Kind(kind), rank, tuple(text.split())))
    T = max(t for t, *_ in records)
    return Corpus.from_documents(docs, labels or [f"2016-{m:02d}" for m in range(1, T + 1)])


def random_csr(rng, n, d, density=0.5, max_count=3):
    X = rng.integers(1, max_count + 1, size=(n, d)) * (rng.random((n, d)) < density)
    return CsrBatch.from_dense(X.astype(float))


def random_net(rng, dims):
    weights = [rng.normal(0, 1.0, size=(a, b)) for a, b in zip(dims, dims[1:])]
    biases = [rng.normal(0, 0.5, size=b) for b in dims[1:]]
    return DenseNet(weights, biases)


def min_abs_hidden_preact(net, X):
    _, cache = net.forward(X)
    hidden = cache.pre[:-1] if net.scalar_output else cache.pre
    return min((float(np.min(np.abs(z))) for z in hidden), default=math.inf)


def finite_difference_grads(objective, params, h=FD_STEP):
    """Central differences of ``objective()`` w.r.t. every entry of ``params`` (in place)."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = objective()
            flat[i] = orig - h
            down = objective()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor=REL_FLOOR):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def nnpu_gradcheck(net, Xp, Xu, cfg: PuConfig, weight_decay=0.0):
    _, _, analytic = nnpu_objective(net, Xp, Xu, cfg, weight_decay)

    def objective():
        return nnpu_objective(net, Xp, Xu, cfg, weight_decay)[0]

    numeric = finite_difference_grads(objective, net.params())
    return max_relative_error(analytic, numeric)


def brute_auc(scores, labels):
    """Pairwise-comparison AUC (ties count 1/2)."""
    pos = [s for s, y in zip(scores, labels) if y > 0]
    neg = [s for s, y in zip(scores, labels) if y <= 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------------------
# exhaustive text-mining reference
# ---------------------------------------------------------------------------


def bf_tfidf(group_docs, all_group_docs, k):
    """group_docs: list of token lists; all_group_docs: list of such lists."""
    vocab = sorted({w for docs in all_group_docs for d in docs for w in d})
    n = len(all_group_docs)
    rows = []
    for w in vocab:
        tf = 0
        for d in group_docs:
            for tok in d:
                if tok == w:
                    tf += 1
        if tf == 0:
            continue
        df = 0
        for docs in all_group_docs:
            if any(w in d for d in docs):
                df += 1
        weight = tf * math.log(n / df)
        if weight > 0:
            rows.append((w, weight))
    best = []
    remaining = list(rows)
    while remaining and len(best) < k:
        top = remaining[0]
        for r in remaining[1:]:
            if r[1] > top[1] or (r[1] == top[1] and r[0] < top[0]):
                top = r
        best.append(top)
        remaining.remove(top)
    return best


def bf_jaccard(a, b):
    universe = set(a) | set(b)
    inter = sum(1 for x in universe if x in a and x in b)
    return inter / len(universe)


def bf_network(member_ids, docs_by_id, ranks, all_group_docs, k, threshold, top_edges):
    group_docs = [docs_by_id[i] for i in member_ids]
    top = bf_tfidf(group_docs, all_group_docs, k)
    sets = {w: {i for i in member_ids if w in docs_by_id[i]} for w, _ in top}
    nodes = [(w, wt, sum(ranks[i] for i in sets[w]) / len(sets[w])) for w, wt in top]
    words = sorted(sets)
    pairs = []
    for i in range(len(words)):
        for j in range(i + 1, len(words)):
            pairs.append((words[i], words[j], bf_jaccard(sets[words[i]], sets[words[j]])))
    if threshold is not None:
        edges = [p for p in pairs if p[2] >= threshold]
    else:
        ranked = sorted([p for p in pairs if p[2] > 0], key=lambda p: (-p[2], p[0], p[1]))
        edges = sorted(ranked[:top_edges])
    return nodes, sorted(edges)
