"""
Retrieval metrics for recommendation runs: set precision/recall, order-aware
sequence precision/recall (longest common subsequence), ROC points with AUC,
and top-N averaging over a gold file of queries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Hashable, Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .errors import CriteriaNotMet, DegenerateLabels, EsdpError, InvalidThreshold, UndefinedMetric
from .extractor import ItemKey
from .query import QueryContext, abstract_query, search
from .repository import MinedRepository

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RetrievalOutcome:
    retrieved: tuple[Hashable, ...]
    relevant: frozenset[Hashable]
    scores: Mapping[Hashable, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.retrieved)) != len(self.retrieved):
            raise ValueError("retrieved identifiers must be distinct")


def precision_recall(outcome: RetrievalOutcome) -> tuple[Fraction, Fraction]:
    if not outcome.retrieved:
        raise UndefinedMetric("precision is undefined for an empty retrieved set")
    if not outcome.relevant:
        raise UndefinedMetric("recall is undefined for an empty relevant set")
    hits = len(set(outcome.retrieved) & outcome.relevant)
    return Fraction(hits, len(outcome.retrieved)), Fraction(hits, len(outcome.relevant))


def lcs_length(first: Sequence, second: Sequence) -> int:
    previous = [0] * (len(second) + 1)
    for a in first:
        current = [0]
        for j, b in enumerate(second, start=1):
            current.append(previous[j - 1] + 1 if a == b else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def sequence_pr(recommended: Sequence, gold: Sequence) -> tuple[Fraction, Fraction]:
    """Relevant statements must appear in gold order: LCS over both lengths."""
    if not gold:
        raise UndefinedMetric("sequence recall is undefined for an empty gold sequence")
    if not recommended:
        raise UndefinedMetric("sequence precision is undefined for an empty recommendation")
    common = lcs_length(recommended, gold)
    return Fraction(common, len(recommended)), Fraction(common, len(gold))


def roc_points(
    scores: Sequence[float],
    labels: Sequence[bool],
    thresholds: Iterable[float] | None = None,
) -> list[tuple[Fraction, Fraction]]:
    """
    (FPR, TPR) per threshold, predicting positive when score >= threshold.
    The (0, 0) and (1, 1) endpoints are always present; points are sorted by
    FPR, then TPR.
    """
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    positives = sum(1 for label in labels if label)
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise DegenerateLabels("ROC needs at least one positive and one negative label")
    if thresholds is None:
        thresholds = sorted(set(scores))

    points = {(Fraction(0), Fraction(0)), (Fraction(1), Fraction(1))}
    for threshold in thresholds:
        tp = sum(1 for s, label in zip(scores, labels) if label and s >= threshold)
        fp = sum(1 for s, label in zip(scores, labels) if not label and s >= threshold)
        points.add((Fraction(fp, negatives), Fraction(tp, positives)))
    return sorted(points)


def auc(points: Sequence[tuple[Fraction, Fraction]]) -> float:
    """Trapezoid-rule area under FPR-sorted ROC points."""
    if len(points) < 2:
        return 0.0
    ordered = sorted(points)
    fpr = np.array([float(x) for x, _ in ordered])
    tpr = np.array([float(y) for _, y in ordered])
    return float(np.trapezoid(tpr, fpr))


@dataclass(frozen=True)
class TopNRow:
    n: int
    precision: float
    recall: float
    queries: int


def top_n_average(
    per_query: Sequence[tuple[Sequence[Hashable], Iterable[Hashable]]],
    ns: Iterable[int],
) -> list[TopNRow]:
    """
    Mean precision and recall at each N over (ranked, relevant) pairs.
    An empty cut-off counts as precision 0; queries without relevant items
    are left out.
    """
    rows = []
    usable = [(list(ranked), frozenset(relevant)) for ranked, relevant in per_query if relevant]
    for n in sorted(set(ns)):
        precisions, recalls = [], []
        for ranked, relevant in usable:
            cut = tuple(dict.fromkeys(ranked[:n]))
            if cut:
                p, r = precision_recall(RetrievalOutcome(cut, relevant))
            else:
                p, r = Fraction(0), Fraction(0)
            precisions.append(float(p))
            recalls.append(float(r))
        rows.append(
            TopNRow(
                n=n,
                precision=float(np.mean(precisions)) if precisions else 0.0,
                recall=float(np.mean(recalls)) if recalls else 0.0,
                queries=len(usable),
            )
        )
    return rows


# ------------------------------------------------------------
# Gold cases
# ------------------------------------------------------------

@dataclass(frozen=True)
class GoldCase:
    statement: str
    expected: tuple[ItemKey, ...]
    line: int = 0


def load_gold_file(path: Path) -> list[GoldCase]:
    """
    Parse `statement<TAB>KIND:name<TAB>KIND:name...` lines; blank lines and
    lines starting with '#' are ignored.
    """
    cases = []
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        statement, *expected = raw.split("\t")
        try:
            keys = tuple(ItemKey.parse(text) for text in expected if text.strip())
        except ValueError as exc:
            raise EsdpError(f"{path}:{number}: {exc}") from exc
        if not keys:
            raise EsdpError(f"{path}:{number}: no expected items")
        cases.append(GoldCase(statement.strip(), keys, number))
    return cases


class EvalCriteria(BaseModel):
    min_precision: float = Field(default=0.0, ge=0.0, le=1.0)
    min_recall: float = Field(default=0.0, ge=0.0, le=1.0)


class EvalConfig(BaseModel):
    criteria: EvalCriteria = EvalCriteria()
    top_n: list[Annotated[int, Field(ge=1)]] = Field(default_factory=lambda: [5], min_length=1)


def load_eval_config(path: Path) -> EvalConfig:
    """Raises pydantic.ValidationError for malformed JSON or out-of-range values."""
    return EvalConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def check_criteria(rows: Sequence[TopNRow], criteria: EvalCriteria) -> None:
    """Gate on the mean precision/recall at the largest N."""
    if not rows:
        return
    last = max(rows, key=lambda row: row.n)
    failures = []
    if last.precision < criteria.min_precision:
        failures.append(f"precision@{last.n} {last.precision:.3f} < {criteria.min_precision}")
    if last.recall < criteria.min_recall:
        failures.append(f"recall@{last.n} {last.recall:.3f} < {criteria.min_recall}")
    if failures:
        raise CriteriaNotMet("; ".join(failures))


@dataclass
class CaseResult:
    case: GoldCase
    ranked_items: list[ItemKey]
    item_scores: dict[ItemKey, float]
    sequence_precision: Fraction | None = None
    sequence_recall: Fraction | None = None
    error: str = ""


@dataclass
class EvalReport:
    cases: list[CaseResult]
    rows: list[TopNRow]
    roc: list[tuple[Fraction, Fraction]] = field(default_factory=list)
    area: float | None = None


def evaluate_gold(
    cases: Sequence[GoldCase],
    repo: MinedRepository,
    ns: Iterable[int],
    context: QueryContext | None = None,
) -> EvalReport:
    """
    Run every gold query against the repository.

    The ranked items of a query are the remaining elements of its
    recommendations in order, de-duplicated; the sequence metrics compare
    the top recommendation's remaining elements with the gold sequence.
    """
    ns = sorted(set(ns))
    if not ns or ns[0] < 1:
        raise InvalidThreshold(f"top_n cut-offs must be >= 1, got {ns}")
    depth = max(ns)
    results = []
    for case in cases:
        try:
            query = abstract_query(case.statement, context)
        except EsdpError as exc:
            logger.warning("gold line %d: %s", case.line, exc)
            results.append(CaseResult(case, [], {}, error=str(exc)))
            continue
        recommendations = search(query, repo, depth)
        ranked: list[ItemKey] = []
        scores: dict[ItemKey, float] = {}
        for rec in recommendations:
            for key in rec.remaining:
                if key not in scores:
                    ranked.append(key)
                scores[key] = max(scores.get(key, 0.0), float(rec.score))
        result = CaseResult(case, ranked, scores)
        if recommendations and recommendations[0].remaining:
            result.sequence_precision, result.sequence_recall = sequence_pr(
                recommendations[0].remaining, case.expected
            )
        results.append(result)

    rows = top_n_average([(r.ranked_items, r.case.expected) for r in results], ns)
    report = EvalReport(results, rows)

    scores, labels = [], []
    for result in results:
        expected = set(result.case.expected)
        for key, value in result.item_scores.items():
            scores.append(value)
            labels.append(key in expected)
    if any(labels) and not all(labels):
        report.roc = roc_points(scores, labels)
        report.area = auc(report.roc)
    else:
        logger.info("ROC skipped: scored items carry a single label")
    return report
