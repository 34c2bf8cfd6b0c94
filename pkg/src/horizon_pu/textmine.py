"""tf-idf keywords per (period, horizon) group and Jaccard co-occurrence networks."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

from .corpus import Corpus

DEFAULT_TOP_K = 50
DEFAULT_TOP_EDGES = 60
HORIZONS = ("near", "distant")


@dataclass(frozen=True)
class Group:
    period: int
    horizon: str
    members: tuple[str, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"group ({self.period}, {self.horizon}) has no members")
        if self.horizon not in HORIZONS:
            raise ValueError(f"horizon must be one of {HORIZONS}")

    @property
    def label(self) -> tuple[int, str]:
        return (self.period, self.horizon)


def groups_from_splits(splits: Mapping[int, object]) -> list[Group]:
    """Groups from split results (anything with ``near`` and ``distant`` id tuples)."""
    out = []
    for t in sorted(splits):
        s = splits[t]
        for horizon in HORIZONS:
            members = tuple(getattr(s, horizon))
            if members:
                out.append(Group(t, horizon, members))
    return out


def _tokens(corpus, doc_id):
    return corpus.get(doc_id).tokens


def _group_counts(group: Group, corpus: Corpus) -> Counter:
    c = Counter()
    for doc_id in group.members:
        c.update(_tokens(corpus, doc_id))
    return c


def tfidf_top_words(group: Group, all_groups: Sequence[Group], corpus: Corpus, k: int = DEFAULT_TOP_K):
    """Top-``k`` (word, weight) pairs of ``group`` with each group as one pseudo-document.

    weight = count in group * ln(N_groups / df); only positive weights are
    returned, ordered by weight descending then word.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(all_groups) < 2:
        raise ValueError("tf-idf needs at least two groups")
    if group not in all_groups:
        raise ValueError("group must be one of all_groups")
    df = Counter()
    for g in all_groups:
        df.update(set(_group_counts(g, corpus)))
    n = len(all_groups)
    tf = _group_counts(group, corpus)
    weighted = [(w, c * math.log(n / df[w])) for w, c in tf.items() if df[w] < n]
    weighted.sort(key=lambda wc: (-wc[1], wc[0]))
    return weighted[:k]


def jaccard(a, b) -> float:
    a, b = set(a), set(b)
    union = a | b
    if not union:
        raise ValueError("Jaccard coefficient undefined for two empty sets")
    return len(a & b) / len(union)


@dataclass(frozen=True)
class Node:
    word: str
    weight: float
    assessment: float


@dataclass(frozen=True)
class Edge:
    a: str
    b: str
    jaccard: float


@dataclass(frozen=True)
class CooccurrenceNetwork:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    threshold: float | None
    label: tuple[int, str] | None = None

    def to_json_obj(self) -> dict:
        return {
            "label": None if self.label is None else {"period": self.label[0], "horizon": self.label[1]},
            "threshold": self.threshold,
            "nodes": [{"word": n.word, "weight": n.weight, "assessment": n.assessment} for n in self.nodes],
            "edges": [{"a": e.a, "b": e.b, "jaccard": e.jaccard} for e in self.edges],
        }


def build_network(
    group: Group,
    all_groups: Sequence[Group],
    corpus: Corpus,
    k: int = DEFAULT_TOP_K,
    edge_threshold: float | None = None,
    top_edges: int = DEFAULT_TOP_EDGES,
) -> CooccurrenceNetwork:
    """Nodes are the top-``k`` tf-idf words; edges carry Jaccard of their document sets.

    With ``edge_threshold`` set, every pair with Jaccard >= threshold is an
    edge.  Without it, the ``top_edges`` strongest co-occurring pairs are kept
    (ties broken by word pair) and the weakest kept value is reported as the
    threshold.
    """
    top = tfidf_top_words(group, all_groups, corpus, k)
    members = {}
    for word, _ in top:
        members[word] = frozenset(d for d in group.members if word in _tokens(corpus, d))
    ranks = corpus.ranks()
    nodes = tuple(
        Node(w, wt, math.fsum(ranks[d] for d in members[w]) / len(members[w])) for w, wt in top
    )
    pairs = []
    for a, b in combinations(sorted(members), 2):
        pairs.append(Edge(a, b, jaccard(members[a], members[b])))
    if edge_threshold is not None:
        kept = [e for e in pairs if e.jaccard >= edge_threshold]
        threshold = edge_threshold
    else:
        ranked = sorted((e for e in pairs if e.jaccard > 0), key=lambda e: (-e.jaccard, e.a, e.b))
        kept = ranked[:top_edges]
        threshold = kept[-1].jaccard if kept else None
    kept.sort(key=lambda e: (e.a, e.b))
    return CooccurrenceNetwork(nodes, tuple(kept), threshold, group.label)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

_COOL = (44, 123, 182)
_NEUTRAL = (154, 205, 50)  # yellow-green at assessment 2
_WARM = (215, 25, 28)


def assessment_color(value: float) -> str:
    """Diverging map on [0, 4]: cool below 2, yellow-green at 2, warm above."""
    v = min(4.0, max(0.0, value))
    lo, hi, frac = (_COOL, _NEUTRAL, v / 2.0) if v <= 2.0 else (_NEUTRAL, _WARM, (v - 2.0) / 2.0)
    rgb = [round(a + (b - a) * frac) for a, b in zip(lo, hi)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _sorted_nodes(net):
    return sorted(net.nodes, key=lambda n: (-n.weight, n.word))


def to_dot(net: CooccurrenceNetwork) -> str:
    name = "cooccurrence" if net.label is None else f"cooccurrence_{net.label[0]}_{net.label[1]}"
    lines = [f"graph {_dot_quote(name)} {{", '  node [style=filled, shape=ellipse, fontname="sans-serif"];']
    for n in _sorted_nodes(net):
        lines.append(
            f"  {_dot_quote(n.word)} [fillcolor={_dot_quote(assessment_color(n.assessment))}, "
            f'tfidf="{n.weight:.6f}", assessment="{n.assessment:.6f}"];'
        )
    for e in sorted(net.edges, key=lambda e: (e.a, e.b)):
        lines.append(
            f"  {_dot_quote(e.a)} -- {_dot_quote(e.b)} "
            f'[weight="{e.jaccard:.6f}", penwidth="{1.0 + 9.0 * e.jaccard:.3f}", len="{2.0 - e.jaccard:.3f}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(net: CooccurrenceNetwork) -> str:
    obj = net.to_json_obj()
    obj["nodes"] = [
        {"word": n.word, "weight": n.weight, "assessment": n.assessment} for n in _sorted_nodes(net)
    ]
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def export_network(net: CooccurrenceNetwork, format: str = "dot") -> bytes:
    if format == "dot":
        return to_dot(net).encode("utf-8")
    if format == "json":
        return to_json(net).encode("utf-8")
    raise ValueError(f"unknown export format {format!r}")


def network_from_json(data: bytes | str) -> CooccurrenceNetwork:
    obj = json.loads(data)
    label = obj.get("label")
    return CooccurrenceNetwork(
        tuple(Node(n["word"], n["weight"], n["assessment"]) for n in obj["nodes"]),
        tuple(Edge(e["a"], e["b"], e["jaccard"]) for e in obj["edges"]),
        obj.get("threshold"),
        None if label is None else (label["period"], label["horizon"]),
    )
