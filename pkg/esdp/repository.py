"""
The mined API repository: a ranked, client-side pattern store persisted as
canonical XML (`esdp-repo.xml`).

`serialize` is byte-deterministic; `parse` validates against the shipped
XSD (`esdp-repo.xsd`) first and then applies the cross-field rules the XSD
cannot express. Every rejection is a SchemaViolation carrying an element
path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import xmlschema
from lxml import etree

from .errors import SchemaViolation
from .extractor import ItemKey, ItemKind
from .seq_miner import SequentialPattern, format_ratio, rank_patterns
from .tools import canonical_xml, write_bytes_atomic

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).with_name("esdp-repo.xsd")
SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class MinedRepository:
    patterns: tuple[SequentialPattern, ...] = ()
    corpus_label: str = ""
    created_at: str = "1970-01-01T00:00:00+00:00"
    min_support_used: int = 1
    version: str = field(default=SCHEMA_VERSION)

    def __len__(self) -> int:
        return len(self.patterns)

    @classmethod
    def from_patterns(
        cls,
        patterns: Iterable[SequentialPattern],
        corpus_label: str,
        created_at: str,
        min_support_used: int,
    ) -> "MinedRepository":
        unique = {p.elements: p for p in patterns}
        return cls(tuple(rank_patterns(unique.values())), corpus_label, created_at, min_support_used)

    def by_kind(self) -> dict[ItemKind, list[SequentialPattern]]:
        grouped: dict[ItemKind, list[SequentialPattern]] = {}
        for pattern in self.patterns:
            grouped.setdefault(pattern.kind, []).append(pattern)
        return grouped


# ------------------------------------------------------------
# Writing
# ------------------------------------------------------------

def _ratio(parent: etree._Element, tag: str, num: int, den: int) -> None:
    node = etree.SubElement(parent, tag, num=str(num), den=str(den))
    node.text = format_ratio(Fraction(num, den))


def serialize(repo: MinedRepository) -> bytes:
    root = etree.Element(
        "esdp-repository",
        version=repo.version,
        corpus=repo.corpus_label,
        created=repo.created_at,
    )
    root.set("min-support", str(repo.min_support_used))
    patterns = etree.SubElement(root, "patterns")
    for pattern in repo.patterns:
        node = etree.SubElement(patterns, "pattern", kind=pattern.kind.value, k=str(pattern.k))
        _ratio(node, "support", pattern.support_count, pattern.db_size)
        _ratio(node, "confidence", pattern.support_count, pattern.prefix_support)
        etree.SubElement(node, "ranking").text = format_ratio(pattern.ranking)
        sequence = etree.SubElement(node, "sequence")
        for position, key in enumerate(pattern.elements, start=1):
            item = etree.SubElement(sequence, "s", i=str(position), kind=key.kind.value)
            item.text = key.name
    return canonical_xml(root)


def save_repository(repo: MinedRepository, path: Path) -> Path:
    written = write_bytes_atomic(serialize(repo), path)
    logger.info("wrote %d patterns to %s", len(repo), written)
    return written


# ------------------------------------------------------------
# Reading
# ------------------------------------------------------------

@lru_cache(maxsize=1)
def repository_schema() -> xmlschema.XMLSchema:
    return xmlschema.XMLSchema(str(SCHEMA_PATH))


def _path(*steps: str) -> str:
    return "/" + "/".join(steps)


def _parse_pattern(node: etree._Element, where: str) -> SequentialPattern:
    support = node.find("support")
    confidence = node.find("confidence")
    ranking = node.find("ranking")
    items = node.findall("sequence/s")

    elements = []
    for position, item in enumerate(items, start=1):
        if int(item.get("i")) != position:
            raise SchemaViolation(f"{where}/sequence/s[{position}]", f"expected i={position}, got i={item.get('i')}")
        elements.append(ItemKey(ItemKind(item.get("kind")), item.text))
    if int(node.get("k")) != len(elements):
        raise SchemaViolation(where, f"k={node.get('k')} but {len(elements)} sequence elements")
    if node.get("kind") != elements[0].kind.value:
        raise SchemaViolation(where, f"kind={node.get('kind')} differs from first element kind {elements[0].kind.value}")

    count, db_size = int(support.get("num")), int(support.get("den"))
    conf_num, prefix = int(confidence.get("num")), int(confidence.get("den"))
    if count > db_size:
        raise SchemaViolation(f"{where}/support", "num exceeds den")
    if conf_num != count:
        raise SchemaViolation(f"{where}/confidence", "num must equal the support count")
    if prefix < count:
        raise SchemaViolation(f"{where}/confidence", "den below the support count")
    if len(elements) == 1 and prefix != count:
        raise SchemaViolation(f"{where}/confidence", "a 1-pattern has confidence 1")

    pattern = SequentialPattern(tuple(elements), count, db_size, prefix)
    for tag, node_value, exact in (
        ("support", support, pattern.support_ratio),
        ("confidence", confidence, pattern.confidence),
        ("ranking", ranking, pattern.ranking),
    ):
        if node_value.text != format_ratio(exact):
            raise SchemaViolation(f"{where}/{tag}", f"{node_value.text!r} does not match {format_ratio(exact)}")
    return pattern


def parse(data: bytes) -> MinedRepository:
    try:
        root = etree.fromstring(data, etree.XMLParser(resolve_entities=False, no_network=True))
    except etree.XMLSyntaxError as exc:
        raise SchemaViolation("/", f"not well-formed: {exc}") from exc

    for error in repository_schema().iter_errors(root):
        where = error.path or "/"
        raise SchemaViolation(where if where.startswith("/") else f"/{where}", error.reason or str(error))

    patterns = []
    for index, node in enumerate(root.findall("patterns/pattern"), start=1):
        patterns.append(_parse_pattern(node, _path("esdp-repository", "patterns", f"pattern[{index}]")))

    seen = set()
    for index, pattern in enumerate(patterns, start=1):
        if pattern.elements in seen:
            raise SchemaViolation(_path("esdp-repository", "patterns", f"pattern[{index}]"), "duplicate sequence")
        seen.add(pattern.elements)
    for index in range(1, len(patterns)):
        if patterns[index - 1].sort_key() > patterns[index].sort_key():
            raise SchemaViolation(
                _path("esdp-repository", "patterns", f"pattern[{index + 1}]"),
                "patterns are not sorted by ranking",
            )

    return MinedRepository(
        patterns=tuple(patterns),
        corpus_label=root.get("corpus"),
        created_at=root.get("created"),
        min_support_used=int(root.get("min-support")),
        version=root.get("version"),
    )


def load_repository(path: Path) -> MinedRepository:
    repo = parse(Path(path).read_bytes())
    logger.debug("loaded %d patterns from %s", len(repo), path)
    return repo


# ------------------------------------------------------------
# Updating
# ------------------------------------------------------------

def merge_update(
    existing: MinedRepository,
    fresh: Iterable[SequentialPattern],
    full_replacement: bool = False,
    created_at: str | None = None,
    min_support_used: int | None = None,
) -> MinedRepository:
    """
    Fold freshly mined patterns into an existing repository.

    Patterns with identical element lists take the fresh scores, new ones are
    inserted, nothing is removed unless full_replacement is set. The existing
    value is never modified.
    """
    merged = {} if full_replacement else {p.elements: p for p in existing.patterns}
    fresh = list(fresh)
    merged.update((p.elements, p) for p in fresh)
    logger.info(
        "merge: %d existing, %d fresh, %d after merge", len(existing), len(fresh), len(merged)
    )
    return replace(
        existing,
        patterns=tuple(rank_patterns(merged.values())),
        created_at=created_at or existing.created_at,
        min_support_used=min_support_used or existing.min_support_used,
    )
