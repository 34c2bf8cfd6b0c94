"""Near/distant split of unlabeled answers, averaged assessments and Welch tests."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, period_slice

DEFAULT_FRACTION = 0.2

TABLE_COLUMNS = (
    "period",
    "mtpu_nf",
    "mtpu_df",
    "orig_current",
    "orig_future",
    "pu1_nf",
    "pu1_df",
    "pu2_nf",
    "pu2_df",
    "t_stat",
    "dof",
    "p_value",
    "stars",
)
MISSING = "NA"


class SplitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# quantile split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    period: int | None
    near: tuple[str, ...]
    distant: tuple[str, ...]
    middle: tuple[str, ...]
    fraction: float


def _items(scores) -> list[tuple[str, float]]:
    if isinstance(scores, Mapping):
        return [(k, float(v)) for k, v in scores.items()]
    return [(k, float(v)) for k, v in scores]


def quantile_split(scores, fraction: float = DEFAULT_FRACTION, period: int | None = None) -> SplitResult:
    """Top ``floor(fraction * n)`` ids by score are near, the bottom as many distant.

    Ordering is by descending score with ascending id breaking ties.
    """
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"fraction must be in (0, 0.5], got {fraction}")
    items = _items(scores)
    n = len(items)
    # guard against 0.2 * 15 = 2.9999... style rounding
    k = math.floor(fraction * n + 1e-9)
    where = f" in period {period}" if period is not None else ""
    if k < 1:
        raise SplitError(f"too few documents{where} to split: n={n}, fraction={fraction}")
    ordered = [i for i, _ in sorted(items, key=lambda it: (-it[1], it[0]))]
    return SplitResult(period, tuple(ordered[:k]), tuple(ordered[n - k :]), tuple(ordered[k : n - k]), fraction)


def mean_assessment(ids: Iterable[str], corpus: Corpus | Mapping[str, int]) -> float:
    ranks = corpus.ranks() if isinstance(corpus, Corpus) else corpus
    vals = [ranks[i] for i in ids]
    if not vals:
        raise ValueError("cannot average an empty id list")
    return math.fsum(vals) / len(vals)


# ---------------------------------------------------------------------------
# Student t distribution
# ---------------------------------------------------------------------------

_FPMIN = 1e-300
_EPS = 1e-16
_MAXIT = 20000


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b); pass ``y = 1 - x`` when known more accurately."""
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0
    if y <= 0.0:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student t with ``dof`` degrees of freedom."""
    if not dof > 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return min(1.0, max(0.0, betainc_reg(dof / 2.0, 0.5, dof / (dof + t2), t2 / (dof + t2))))


def student_t_cdf(t: float, dof: float) -> float:
    half = 0.5 * student_t_sf2(t, dof)
    return 1.0 - half if t > 0 else half


# ---------------------------------------------------------------------------
# Welch test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    dof: float
    p_value: float

    @property
    def sig5(self) -> bool:
        return self.p_value < 0.05

    @property
    def sig1(self) -> bool:
        return self.p_value < 0.01

    @property
    def stars(self) -> str:
        return "**" if self.sig1 else "*" if self.sig5 else ""


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sample t-test with unequal variances; two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = a.size, b.size
    if na < 2 or nb < 2:
        raise ValueError(f"each sample needs at least 2 values (got {na} and {nb})")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0 and vb == 0:
        raise ValueError("both samples have zero variance")
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    t = float((a.mean() - b.mean()) / math.sqrt(se2))
    dof = float(se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1)))
    return WelchResult(t, dof, student_t_sf2(t, dof))


# ---------------------------------------------------------------------------
# rank statistics
# ---------------------------------------------------------------------------


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    _, inv, counts = np.unique(np.asarray(x, dtype=np.float64), return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    return ((ends - counts + 1 + ends) / 2.0)[inv]


def rank_agreement(scores_a, scores_b) -> float:
    """Spearman correlation between two score sets over the same ids."""
    a = dict(_items(scores_a))
    b = dict(_items(scores_b))
    if set(a) != set(b):
        raise ValueError("score sets cover different ids")
    if len(a) < 2:
        raise ValueError("need at least two ids")
    ids = sorted(a)
    ra = average_ranks([a[i] for i in ids])
    rb = average_ranks([b[i] for i in ids])
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        raise ValueError("rank correlation undefined for constant scores")
    return float(ra @ rb) / denom


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve for labels in {+1, -1} (ties count one half)."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) > 0
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both classes")
    r = average_ranks(scores)
    return float((r[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


# ---------------------------------------------------------------------------
# assessment table
# ---------------------------------------------------------------------------


@dataclass
class AssessmentRow:
    period: str
    mean_near: float | None = None
    mean_distant: float | None = None
    mean_current: float | None = None
    mean_future: float | None = None
    pu1_near: float | None = None
    pu1_distant: float | None = None
    pu2_near: float | None = None
    pu2_distant: float | None = None
    welch: WelchResult | None = None
    error: str | None = None
    split: SplitResult | None = field(default=None, repr=False)


def _split_means(scores, corpus, t, fraction):
    split = quantile_split(scores, fraction, period=t)
    return split, mean_assessment(split.near, corpus), mean_assessment(split.distant, corpus)


def assessment_table(
    corpus: Corpus,
    mtpu_scores: Mapping[int, object],
    fraction: float = DEFAULT_FRACTION,
    pu1_scores: Mapping[int, object] | None = None,
    pu2_scores: Mapping[int, object] | None = None,
) -> list[AssessmentRow]:
    """One row per period from per-period scores of the unlabeled documents.

    Score sets map period ``t`` to ``{id: score}`` (or ``(id, score)`` pairs).
    A period whose split or test fails keeps its row with ``error`` set.
    """
    ranks = corpus.ranks()
    rows = []
    for t in range(1, corpus.T + 1):
        row = AssessmentRow(corpus.period_label(t))
        try:
            pos, unl = period_slice(corpus, t)
            row.mean_current = mean_assessment(pos, ranks)
            row.mean_future = mean_assessment(unl, ranks)
            if t not in mtpu_scores:
                raise SplitError(f"no scores for period {t}")
            split, row.mean_near, row.mean_distant = _split_means(mtpu_scores[t], ranks, t, fraction)
            row.split = split
            if pu1_scores is not None:
                _, row.pu1_near, row.pu1_distant = _split_means(pu1_scores[t], ranks, t, fraction)
            if pu2_scores is not None:
                _, row.pu2_near, row.pu2_distant = _split_means(pu2_scores[t], ranks, t, fraction)
            row.welch = welch_ttest([ranks[i] for i in split.near], [ranks[i] for i in split.distant])
        except (ValueError, KeyError) as exc:
            row.error = f"period {t} ({row.period}): {exc}"
        rows.append(row)
    return rows


def _fmt(value, digits):
    return MISSING if value is None else f"{value:.{digits}f}"


def table_csv(rows: Sequence[AssessmentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        wt = r.welch
        w.writerow(
            [
                r.period,
                _fmt(r.mean_near, 3),
                _fmt(r.mean_distant, 3),
                _fmt(r.mean_current, 3),
                _fmt(r.mean_future, 3),
                _fmt(r.pu1_near, 3),
                _fmt(r.pu1_distant, 3),
                _fmt(r.pu2_near, 3),
                _fmt(r.pu2_distant, 3),
                _fmt(wt.t_stat if wt else None, 6),
                _fmt(wt.dof if wt else None, 6),
                _fmt(wt.p_value if wt else None, 6),
                wt.stars if wt else MISSING,
            ]
        )
    return buf.getvalue()


def read_table_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TABLE_COLUMNS:
        raise ValueError(f"unexpected table columns {reader.fieldnames}")
    out = []
    for rec in reader:
        parsed = {"period": rec["period"], "stars": rec["stars"]}
        for col in TABLE_COLUMNS[1:-1]:
            parsed[col] = None if rec[col] == MISSING else float(rec[col])
        out.append(parsed)
    return out


def timeseries_csv(rows: Sequence[AssessmentRow]) -> str:
    """Tidy long-form series (period, series, value, sig_level) for plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("period", "series", "value", "sig_level"))
    for r in rows:
        level = "ns"
        if r.welch is not None:
            level = "1%" if r.welch.sig1 else "5%" if r.welch.sig5 else "ns"
        elif r.error:
            level = MISSING
        for series, value in (
            ("near_future", r.mean_near),
            ("distant_future", r.mean_distant),
            ("current", r.mean_current),
            ("future", r.mean_future),
        ):
            w.writerow((r.period, series, _fmt(value, 3), level))
    return buf.getvalue()
