"""
Graph-based object usage models (groums) and frequent pattern growth.

A groum is a DAG over one method: action nodes for constructor calls, method
calls and field accesses, control nodes for if/loop regions. Patterns are
connected induced subgraphs grown one adjacent node at a time; candidate
occurrences are grouped by a structural label vector and confirmed with an
exact label-preserving isomorphism check (networkx VF2).
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx
from networkx.algorithms.isomorphism import categorical_node_match

from .config import DEFAULT_MAX_GROUM_SIZE
from .errors import InvalidThreshold, MalformedControlNesting
from .extractor import ControlKind, ControlMarker, ItemKind, SourceItem, UNKNOWN_RECEIVER, _is_type_reference, simple_name

logger = logging.getLogger(__name__)

ACTION_KINDS = frozenset({ItemKind.CI, ItemKind.MI, ItemKind.FA, ItemKind.CTI, ItemKind.SCI})
EXACT_OCCURRENCE_LIMIT = 20

_label_match = categorical_node_match("label", None)


class NodeRole(str, Enum):
    ACTION = "action"
    CONTROL = "control"


@dataclass(frozen=True)
class GroumNode:
    id: int
    label: str
    role: NodeRole = NodeRole.ACTION


@dataclass(frozen=True)
class Groum:
    nodes: tuple[GroumNode, ...]
    edges: frozenset[tuple[int, int]] = frozenset()
    origin: str = ""

    @cached_property
    def graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        for node in self.nodes:
            graph.add_node(node.id, label=node.label, role=node.role)
        graph.add_edges_from(self.edges)
        return graph

    @classmethod
    def from_graph(cls, graph: nx.DiGraph, origin: str = "") -> "Groum":
        nodes = tuple(
            GroumNode(n, data["label"], data.get("role", NodeRole.ACTION))
            for n, data in sorted(graph.nodes(data=True), key=lambda pair: pair[0])
        )
        return cls(nodes, frozenset(graph.edges()), origin)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass
class GroumPattern:
    representative: Groum
    # graph index -> occurrences (node-id sets of induced subgraphs)
    occurrences: dict[int, list[frozenset[int]]] = field(default_factory=dict)
    frequency: int = 0
    exact: bool = True

    @property
    def size(self) -> int:
        return len(self.representative)


# ------------------------------------------------------------
# Building
# ------------------------------------------------------------

def action_label(item: SourceItem) -> str:
    """Node label of an action item: Type.method, Type.field or Type.<init>."""
    if item.kind is ItemKind.CI:
        return f"{simple_name(item.name.split('(', 1)[0])}.<init>"
    if item.kind is ItemKind.CTI:
        return "this.<init>"
    if item.kind is ItemKind.SCI:
        return "super.<init>"
    head = item.name.split("(", 1)[0]
    receiver, dot, member = head.rpartition(".")
    if not dot:
        return f"this.{member}"
    if receiver in ("super", UNKNOWN_RECEIVER):
        owner = receiver
    elif _is_type_reference(receiver):
        owner = simple_name(receiver)
    else:
        owner = receiver[:1].upper() + receiver[1:]
    return f"{owner}.{member}"


_CONTROL_LABELS = {
    ControlKind.IF_BEGIN: ("IF", ControlKind.IF_END),
    ControlKind.LOOP_BEGIN: ("LOOP", ControlKind.LOOP_END),
}


def build_groum(
    items: Sequence[SourceItem],
    markers: Sequence[ControlMarker] = (),
    origin: str = "",
) -> Groum:
    """
    Groum of one method block.

    Nodes follow line order. Each node gets an edge from the node right
    before it (usage order) and from the nearest earlier action node sharing
    one of its variables (data dependency).
    """
    # at one position: closing markers, then opening markers, then actions
    events: list[tuple[tuple[int, int, int, int], object]] = []
    for position, item in enumerate(items):
        if item.kind in ACTION_KINDS:
            events.append(((item.line, item.column, 2, position), item))
    for marker in markers:
        events.append((marker.order, marker))
    events.sort(key=lambda event: event[0])

    nodes: list[GroumNode] = []
    edges: set[tuple[int, int]] = set()
    last_user: dict[str, int] = {}
    open_regions: list[ControlKind] = []

    for (line, *_), event in events:
        if isinstance(event, ControlMarker):
            if event.kind in _CONTROL_LABELS:
                label, closing = _CONTROL_LABELS[event.kind]
                open_regions.append(closing)
                node = GroumNode(len(nodes), label, NodeRole.CONTROL)
            else:
                if not open_regions or open_regions[-1] is not event.kind:
                    raise MalformedControlNesting(f"{origin or event.enclosing}: unexpected {event.kind.value} at line {line}")
                open_regions.pop()
                continue
        else:
            node = GroumNode(len(nodes), action_label(event))
        if nodes:
            edges.add((nodes[-1].id, node.id))
        if isinstance(event, SourceItem):
            for variable in sorted(event.variables):
                if variable in last_user:
                    edges.add((last_user[variable], node.id))
                last_user[variable] = node.id
        nodes.append(node)

    if open_regions:
        raise MalformedControlNesting(f"{origin}: {len(open_regions)} unclosed control region(s)")
    return Groum(tuple(nodes), frozenset(edges), origin)


def groums_from_items(items: Iterable[SourceItem], markers: Iterable[ControlMarker] = ()) -> list[Groum]:
    """One groum per method block; blocks without any node are skipped."""
    by_block: dict[tuple[str, str], list[SourceItem]] = defaultdict(list)
    marks: dict[tuple[str, str], list[ControlMarker]] = defaultdict(list)
    for item in items:
        if item.in_method:
            by_block[(item.enclosing, item.source)].append(item)
    for marker in markers:
        marks[(marker.enclosing, marker.source)].append(marker)

    groums = []
    for block in sorted(set(by_block) | set(marks)):
        groum = build_groum(by_block.get(block, []), marks.get(block, []), origin=block[0])
        if len(groum):
            groums.append(groum)
    return groums


# ------------------------------------------------------------
# Structural comparison
# ------------------------------------------------------------

def _as_graph(g: Groum | nx.DiGraph) -> nx.DiGraph:
    return g.graph if isinstance(g, Groum) else g


def exas_vector(g: Groum | nx.DiGraph) -> Counter:
    """Multiset of node labels and of (source label, target label) per edge."""
    graph = _as_graph(g)
    labels = nx.get_node_attributes(graph, "label")
    vector: Counter = Counter((labels[n],) for n in graph.nodes)
    vector.update((labels[u], labels[v]) for u, v in graph.edges)
    return vector


def vector_key(g: Groum | nx.DiGraph) -> tuple:
    return tuple(sorted(exas_vector(g).items()))


def label_isomorphic(g1: Groum | nx.DiGraph, g2: Groum | nx.DiGraph) -> bool:
    return nx.is_isomorphic(_as_graph(g1), _as_graph(g2), node_match=_label_match)


def independent_occurrences(occurrences: Sequence[frozenset[int]]) -> tuple[int, bool]:
    """
    Maximum number of pairwise node-disjoint occurrences and whether the
    count is exact. Up to EXACT_OCCURRENCE_LIMIT occurrences this is a
    maximum clique of the disjointness graph; beyond it a greedy pass in
    topological order gives a lower bound.
    """
    occurrences = list(dict.fromkeys(occurrences))
    if not occurrences:
        return 0, True
    if len(occurrences) <= EXACT_OCCURRENCE_LIMIT:
        disjoint = nx.Graph()
        disjoint.add_nodes_from(range(len(occurrences)))
        for i, first in enumerate(occurrences):
            for j in range(i + 1, len(occurrences)):
                if not first & occurrences[j]:
                    disjoint.add_edge(i, j)
        _, size = nx.max_weight_clique(disjoint, weight=None)
        return size, True
    chosen: set[int] = set()
    count = 0
    for occurrence in sorted(occurrences, key=lambda o: (min(o), sorted(o))):
        if not occurrence & chosen:
            chosen |= occurrence
            count += 1
    return count, False


def frequency(occurrences: Sequence[frozenset[int]]) -> int:
    return independent_occurrences(occurrences)[0]


# ------------------------------------------------------------
# Pattern growth
# ------------------------------------------------------------

class _Registry:
    """Isomorphism classes seen so far, bucketed by vector key."""

    def __init__(self) -> None:
        self.buckets: dict[tuple, list[GroumPattern]] = defaultdict(list)

    def find(self, graph: nx.DiGraph, key: tuple) -> GroumPattern | None:
        for known in self.buckets.get(key, []):
            if label_isomorphic(known.representative, graph):
                return known
        return None

    def add(self, pattern: GroumPattern, key: tuple) -> None:
        self.buckets[key].append(pattern)


def _classify(
    candidates: Iterable[tuple[int, frozenset[int]]],
    graphs: Sequence[nx.DiGraph],
    origins: Sequence[str],
) -> list[GroumPattern]:
    classes: dict[tuple, list[GroumPattern]] = defaultdict(list)
    ordered: list[GroumPattern] = []
    for index, nodes in candidates:
        sub = graphs[index].subgraph(nodes)
        key = vector_key(sub)
        for known in classes[key]:
            if label_isomorphic(known.representative, sub):
                known.occurrences.setdefault(index, []).append(nodes)
                break
        else:
            pattern = GroumPattern(Groum.from_graph(sub, origins[index]), {index: [nodes]})
            classes[key].append(pattern)
            ordered.append(pattern)
    for pattern in ordered:
        counts = [independent_occurrences(found) for found in pattern.occurrences.values()]
        pattern.frequency = sum(count for count, _ in counts)
        pattern.exact = all(exact for _, exact in counts)
    return ordered


def _extend(pattern: GroumPattern, unit_label: str, graphs: Sequence[nx.DiGraph]) -> list[tuple[int, frozenset[int]]]:
    found: list[tuple[int, frozenset[int]]] = []
    for index in sorted(pattern.occurrences):
        graph = graphs[index]
        seen: set[frozenset[int]] = set()
        for occurrence in pattern.occurrences[index]:
            border = set()
            for node in occurrence:
                border.update(graph.successors(node))
                border.update(graph.predecessors(node))
            for extra in sorted(border - occurrence):
                if graph.nodes[extra]["label"] != unit_label:
                    continue
                grown = occurrence | {extra}
                if grown not in seen:
                    seen.add(grown)
                    found.append((index, grown))
    return found


def _canonical_order(pattern: GroumPattern) -> tuple:
    graph = pattern.representative.graph
    labels = nx.get_node_attributes(graph, "label")
    return (
        pattern.size,
        vector_key(graph),
        sorted((labels[u], labels[v]) for u, v in graph.edges),
    )


def patt_explorer(
    dataset: Sequence[Groum],
    sigma: int,
    max_size: int | None = DEFAULT_MAX_GROUM_SIZE,
) -> list[GroumPattern]:
    """
    All connected patterns with frequency >= sigma.

    Size-one patterns seed the search; each frequent pattern P is extended by
    every frequent size-one pattern U through nodes adjacent to its
    occurrences, the candidates are split into isomorphism classes and the
    frequent, unseen classes are explored recursively. max_size bounds the
    pattern node count (None for no bound).
    """
    if sigma < 1:
        raise InvalidThreshold(f"sigma must be >= 1, got {sigma}")
    graphs = [g.graph for g in dataset]
    origins = [g.origin for g in dataset]

    seeds = [
        (index, frozenset({node}))
        for index, graph in enumerate(graphs)
        for node in sorted(graph.nodes)
    ]
    units = [p for p in _classify(seeds, graphs, origins) if p.frequency >= sigma]
    units.sort(key=_canonical_order)
    unit_labels = [p.representative.nodes[0].label for p in units]

    registry = _Registry()
    result: list[GroumPattern] = []
    for unit in units:
        registry.add(unit, vector_key(unit.representative))
        result.append(unit)

    def explore(pattern: GroumPattern) -> None:
        if max_size is not None and pattern.size >= max_size:
            return
        for label in unit_labels:
            for candidate in _classify(_extend(pattern, label, graphs), graphs, origins):
                if candidate.frequency < sigma:
                    continue
                key = vector_key(candidate.representative)
                if registry.find(candidate.representative.graph, key) is not None:
                    continue
                registry.add(candidate, key)
                result.append(candidate)
                explore(candidate)

    for unit in units:
        explore(unit)
    result.sort(key=_canonical_order)
    logger.info("patt_explorer: %d patterns over %d groums (sigma=%d)", len(result), len(dataset), sigma)
    return result


# ------------------------------------------------------------
# Reports
# ------------------------------------------------------------

def format_groum(groum: Groum) -> str:
    lines = [f"# {groum.origin}"] if groum.origin else []
    lines += [f"node {node.id} {node.label}" for node in groum.nodes]
    lines += [f"edge {u} {v}" for u, v in sorted(groum.edges)]
    return "\n".join(lines) + "\n"


def format_pattern_report(patterns: Sequence[GroumPattern]) -> str:
    blocks = []
    for rank, pattern in enumerate(patterns, start=1):
        bound = "" if pattern.exact else " (lower bound)"
        header = f"pattern {rank} size={pattern.size} f={pattern.frequency}{bound}"
        blocks.append(header + "\n" + format_groum(pattern.representative))
    return "\n".join(blocks)
