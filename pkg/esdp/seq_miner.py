"""
Frequent sequential pattern mining over a SequenceDatabase.

Mining is delegated to the `prefixspan` package on an integer-encoded copy of
the database; everything user-visible (support ratio, confidence, ranking)
is kept as an exact Fraction and only rounded for display.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Sequence

from prefixspan import PrefixSpan

from .config import DEFAULT_MAX_PATTERNS
from .errors import InvalidThreshold
from .extractor import ItemKey, ItemKind
from .transactions import SequenceDatabase

logger = logging.getLogger(__name__)

DISPLAY_PLACES = Decimal("0.01")


@dataclass(frozen=True)
class SequentialPattern:
    elements: tuple[ItemKey, ...]
    support_count: int
    db_size: int
    # Support of the (k-1)-prefix; equals support_count for 1-patterns.
    prefix_support: int

    @property
    def k(self) -> int:
        return len(self.elements)

    @property
    def kind(self) -> ItemKind:
        return self.elements[0].kind

    @property
    def support_ratio(self) -> Fraction:
        return Fraction(self.support_count, self.db_size)

    @property
    def confidence(self) -> Fraction:
        return Fraction(self.support_count, self.prefix_support)

    @property
    def ranking(self) -> Fraction:
        return self.k * self.support_ratio

    def sort_key(self) -> tuple:
        """Ranking desc, then support desc, then element names."""
        return (
            -self.ranking,
            -self.support_count,
            tuple((key.kind.value, key.name) for key in self.elements),
        )

    def __str__(self) -> str:
        return " -> ".join(str(key) for key in self.elements)


def format_ratio(value: Fraction) -> str:
    """Two decimals, half-up: 7/12 -> "0.58", 35/12 -> "2.92"."""
    with localcontext() as ctx:
        ctx.prec = 50
        exact = Decimal(value.numerator) / Decimal(value.denominator)
        return str(exact.quantize(DISPLAY_PLACES, rounding=ROUND_HALF_UP))


def rank_patterns(patterns: Iterable[SequentialPattern]) -> list[SequentialPattern]:
    return sorted(patterns, key=SequentialPattern.sort_key)


def is_subsequence(alpha: Sequence[ItemKey], sequence: Sequence[ItemKey]) -> bool:
    remaining = iter(sequence)
    return all(item in remaining for item in alpha)


def support(alpha: Sequence[ItemKey], db: SequenceDatabase) -> int:
    """Number of records containing alpha as a (gapped) subsequence."""
    return sum(1 for record in db.records if is_subsequence(alpha, record.items))


def _encode(db: SequenceDatabase) -> tuple[list[list[int]], list[ItemKey]]:
    vocabulary = sorted({key for record in db.records for key in record.items})
    index = {key: position for position, key in enumerate(vocabulary)}
    return [[index[key] for key in record.items] for record in db.records], vocabulary


def _check_threshold(name: str, value: int) -> None:
    if value < 1:
        raise InvalidThreshold(f"{name} must be >= 1, got {value}")


def mine_prefixspan(db: SequenceDatabase, min_support: int) -> set[SequentialPattern]:
    _check_threshold("min_support", min_support)
    if len(db) == 0 or min_support > len(db):
        return set()
    encoded, vocabulary = _encode(db)
    found = PrefixSpan(encoded).frequent(min_support)
    counts = {tuple(pattern): count for count, pattern in found}

    patterns = set()
    for codes, count in counts.items():
        prefix = counts[codes[:-1]] if len(codes) > 1 else count
        patterns.add(
            SequentialPattern(
                elements=tuple(vocabulary[code] for code in codes),
                support_count=count,
                db_size=len(db),
                prefix_support=prefix,
            )
        )
    logger.debug("min_support=%d: %d patterns over %d records", min_support, len(patterns), len(db))
    return patterns


def adaptive_mine(db: SequenceDatabase, max_patterns: int = DEFAULT_MAX_PATTERNS) -> set[SequentialPattern]:
    """
    Mine with the smallest min_support whose result has at most max_patterns
    patterns. Result size never grows with min_support, so the threshold is
    found by binary search. When even min_support = |db| yields too many
    patterns, the best max_patterns of that run by ranking are returned.
    """
    _check_threshold("max_patterns", max_patterns)
    if len(db) == 0:
        return set()
    runs: dict[int, set[SequentialPattern]] = {}

    def run(threshold: int) -> set[SequentialPattern]:
        if threshold not in runs:
            runs[threshold] = mine_prefixspan(db, threshold)
        return runs[threshold]

    high = len(db)
    if len(run(high)) > max_patterns:
        return set(rank_patterns(run(high))[:max_patterns])
    low = 1
    while low < high:
        middle = (low + high) // 2
        if len(run(middle)) <= max_patterns:
            high = middle
        else:
            low = middle + 1
    logger.info("adaptive min_support=%d (%d patterns)", low, len(run(low)))
    return run(low)


def adaptive_threshold(db: SequenceDatabase, patterns: Iterable[SequentialPattern]) -> int:
    """The min_support an adaptive result corresponds to (its weakest support)."""
    return min((p.support_count for p in patterns), default=max(1, len(db)))


def score(pattern: SequentialPattern, db: SequenceDatabase) -> tuple[Fraction, Fraction, Fraction]:
    """(support_ratio, confidence, ranking) recomputed against db."""
    count = support(pattern.elements, db)
    prefix = support(pattern.elements[:-1], db) if pattern.k > 1 else count
    ratio = Fraction(count, len(db))
    return ratio, Fraction(count, prefix), pattern.k * ratio
