"""
Transaction and sequence databases.

A transaction is the unordered set of items used together in one block; a
sequence is the line-ordered list of items of one method block, headed by
its MD item. Sequences feed the sequential miner, transactions are kept for
the persisted XML transaction document.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from lxml import etree

from .extractor import ItemKey, SourceItem
from .tools import canonical_xml

logger = logging.getLogger(__name__)


class Granularity(str, Enum):
    CLASS = "class"
    METHOD = "method"


@dataclass(frozen=True)
class TransactionRecord:
    block_id: str
    items: frozenset[ItemKey]


@dataclass(frozen=True)
class SequenceRecord:
    sid: str
    items: tuple[ItemKey, ...]

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class SequenceDatabase:
    records: tuple[SequenceRecord, ...] = ()
    corpus_label: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def sequences(self) -> list[tuple[ItemKey, ...]]:
        return [record.items for record in self.records]

    @classmethod
    def from_sequences(
        cls, sequences: Iterable[Sequence[ItemKey]], corpus_label: str = ""
    ) -> "SequenceDatabase":
        """Wrap bare item lists, numbering them s1, s2, ..."""
        records = tuple(
            SequenceRecord(f"s{index}", tuple(items))
            for index, items in enumerate(sequences, start=1)
        )
        return cls(records, corpus_label)


def class_path(enclosing: str) -> str:
    """Class part of a block path; a method path loses its last segment."""
    if "(" not in enclosing:
        return enclosing
    head = enclosing.split("(", 1)[0]
    return head.rpartition(".")[0] or head


def _grouped(items: Iterable[SourceItem], granularity: Granularity) -> dict[tuple[str, str], list[SourceItem]]:
    blocks: dict[tuple[str, str], list[SourceItem]] = defaultdict(list)
    for item in items:
        if granularity is Granularity.METHOD:
            if not item.in_method:
                continue
            block = item.enclosing
        else:
            block = class_path(item.enclosing)
        blocks[(block, item.source)].append(item)
    return blocks


def _unique_ids(keys: Iterable[tuple[str, str]]) -> dict[tuple[str, str], str]:
    ids: dict[tuple[str, str], str] = {}
    seen: dict[str, int] = {}
    for key in sorted(keys):
        block = key[0]
        seen[block] = seen.get(block, 0) + 1
        ids[key] = block if seen[block] == 1 else f"{block}#{seen[block]}"
    return ids


def build_transactions(
    items: Iterable[SourceItem], granularity: Granularity | str = Granularity.METHOD
) -> list[TransactionRecord]:
    granularity = Granularity(granularity)
    blocks = _grouped(items, granularity)
    ids = _unique_ids(blocks)
    records = [
        TransactionRecord(ids[key], frozenset(item.key for item in members))
        for key, members in blocks.items()
    ]
    records.sort(key=lambda record: record.block_id)
    return records


def build_sequence_db(
    items: Iterable[SourceItem],
    granularity: Granularity | str = Granularity.METHOD,
    corpus_label: str = "",
) -> SequenceDatabase:
    if Granularity(granularity) is not Granularity.METHOD:
        raise ValueError("sequence databases are built per method block")
    blocks = _grouped(items, Granularity.METHOD)
    ids = _unique_ids(blocks)
    records = []
    for key, members in blocks.items():
        ordered = sorted(members, key=lambda item: (item.line, item.column))
        records.append(SequenceRecord(ids[key], tuple(item.key for item in ordered)))
    records.sort(key=lambda record: record.sid)
    logger.debug("sequence database: %d records", len(records))
    return SequenceDatabase(tuple(records), corpus_label)


def transactions_to_xml(records: Iterable[TransactionRecord], corpus_label: str = "") -> bytes:
    root = etree.Element("esdp-transactions", version="1", corpus=corpus_label)
    for record in sorted(records, key=lambda r: r.block_id):
        node = etree.SubElement(root, "transaction", block=record.block_id)
        for key in sorted(record.items):
            etree.SubElement(node, "item", kind=key.kind.value).text = key.name
    return canonical_xml(root)
