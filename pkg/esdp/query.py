"""
Single-statement queries against a mined repository.

A typed statement is wrapped in a synthetic compilation unit and abstracted
with the corpus extractor, so queries and patterns share one identity space.
Matching patterns are ranked and the chosen one is rendered back into Java
statements (the code skeleton) bound to the variables the context provides.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InvalidThreshold, UnparsableQuery, UnparsableSource
from .extractor import (
    DECLARATION_KINDS,
    MODIFIERS,
    ItemKey,
    ItemKind,
    _is_type_reference,
    extract_items,
    first_error,
    lower_camel,
    parse_java,
    scan_scopes,
    simple_name,
    strip_generics,
)
from .repository import MinedRepository
from .seq_miner import SequentialPattern

logger = logging.getLogger(__name__)

SKELETON_MARK = "// esdp:skeleton"

JAVA_KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue default do
    double else enum extends final finally float for goto if implements import instanceof int
    interface long native new package private protected public return short static strictfp
    super switch synchronized this throw throws transient try void volatile while true false
    null var record yield""".split()
)

PLACEHOLDERS = {
    "int": "0",
    "long": "0L",
    "double": "0.0",
    "float": "0.0f",
    "boolean": "true",
    "char": "'a'",
    "short": "(short) 0",
    "byte": "(byte) 0",
    "String": '""',
    "null": "null",
}

# Statement-level kinds the renderer cannot place inside an ordinary method
# body; they are emitted as comments and left out of the round-trip check.
COMMENT_KINDS = DECLARATION_KINDS | {ItemKind.CTI, ItemKind.SCI}

_ASSIGNED_NAME = re.compile(r"^\s*(?:[\w.$<>\[\], ]+\s+)?([A-Za-z_$][\w$]*)\s*=[^=]")
MEMBER_MODIFIERS = MODIFIERS - {"final"}


@dataclass(frozen=True)
class QueryContext:
    class_name: str = "Query"
    method_name: str = "query"
    variables: Mapping[str, str] = field(default_factory=dict)
    imports: tuple[str, ...] = ()

    def with_imports(self, extra: Iterable[str]) -> "QueryContext":
        merged = tuple(dict.fromkeys((*self.imports, *extra)))
        return QueryContext(self.class_name, self.method_name, dict(self.variables), merged)


@dataclass(frozen=True)
class UserQuery:
    raw_statement: str
    item: ItemKey
    context: QueryContext
    # Variables the statement declares, and variables it assigns without
    # declaring (bound to the static receiver type of a factory call).
    declared: Mapping[str, str] = field(default_factory=dict)
    bound: Mapping[str, str] = field(default_factory=dict)
    form: str = "statement"


@dataclass(frozen=True)
class Recommendation:
    pattern: SequentialPattern
    match_offset: int
    tier: str = "antecedent"

    @property
    def score(self):
        return self.pattern.ranking

    @property
    def remaining(self) -> tuple[ItemKey, ...]:
        return self.pattern.elements[self.match_offset + 1:]


def context_from_source(java_text: str) -> QueryContext:
    """
    Context of an editor buffer: its imports plus the fields, parameters and
    locals visible at the end of its last method.
    """
    items, _ = extract_items(java_text, "<context>")
    imports = tuple(item.name for item in items if item.kind is ItemKind.ID)
    snapshots = scan_scopes(java_text)
    if not snapshots:
        return QueryContext(imports=imports)
    last = snapshots[-1]
    return QueryContext(last.class_name, last.method_name, dict(last.variables), imports)


# ------------------------------------------------------------
# Query abstraction
# ------------------------------------------------------------

def _import_lines(context: QueryContext) -> list[str]:
    return [f"import {path};" for path in context.imports]


def _declaration_lines(variables: Mapping[str, str]) -> list[str]:
    return [f"{declared} {name};" for name, declared in variables.items()]


def _statement_unit(statement: str, context: QueryContext) -> tuple[str, int]:
    lines = _import_lines(context)
    lines.append(f"class {context.class_name} {{")
    lines.append(f"{context.class_name}() {{")
    lines.extend(_declaration_lines(context.variables))
    start = len(lines) + 1
    lines.append(statement)
    lines.extend(["}", "}"])
    return "\n".join(lines) + "\n", start


def _member_unit(statement: str, context: QueryContext) -> tuple[str, int]:
    lines = _import_lines(context)
    lines.append(f"class {context.class_name} {{")
    start = len(lines) + 1
    lines.append(statement)
    lines.append("}")
    return "\n".join(lines) + "\n", start


def _compilation_unit(statement: str, context: QueryContext) -> tuple[str, int]:
    lines = _import_lines(context)
    start = len(lines) + 1
    lines.append(statement)
    return "\n".join(lines) + "\n", start


_FORMS = (
    ("statement", _statement_unit),
    ("member", _member_unit),
    ("unit", _compilation_unit),
)


def _offending_token(source: str) -> str:
    broken = first_error(parse_java(source).root_node)
    if broken is None:
        return ""
    text = broken.text.decode("utf-8").strip()
    return text.split()[0] if text else broken.type


def abstract_query(statement: str, context: QueryContext | None = None) -> UserQuery:
    """
    Abstract one typed statement into its query item.

    The statement is tried as a method-body statement, then as a class
    member, then as a compilation-unit line; the first item on the
    statement's own lines is the query item.
    """
    context = context or QueryContext()
    statement = statement.strip()
    if not statement:
        raise UnparsableQuery("empty query")
    statement_lines = statement.count("\n") + 1
    forms = _FORMS
    if statement.split(maxsplit=1)[0] in MEMBER_MODIFIERS:
        # tree-sitter also accepts these on locals; they only make sense on members
        forms = _FORMS[1:]

    for form, wrap in forms:
        source, start = wrap(statement, context)
        try:
            items, _ = extract_items(source, "<query>")
        except UnparsableSource:
            continue
        own = [item for item in items if start <= item.line < start + statement_lines]
        if not own:
            continue
        declared = {
            name: item.name for item in own if item.kind is ItemKind.VD for name in sorted(item.variables)
        }
        query_item = own[0]
        bound = {}
        assigned = _ASSIGNED_NAME.match(statement)
        if (
            query_item.kind is ItemKind.MI
            and assigned
            and assigned.group(1) not in context.variables
            and assigned.group(1) not in declared
        ):
            receiver = query_item.name.split("(", 1)[0].rpartition(".")[0]
            if _is_type_reference(receiver):
                bound[assigned.group(1)] = receiver
        logger.debug("query %r -> %s (%s form)", statement, query_item.key, form)
        return UserQuery(statement, query_item.key, context, declared, bound, form)

    source, _ = _statement_unit(statement, context)
    token = _offending_token(source)
    if token:
        raise UnparsableQuery("query does not parse as a statement or declaration", token)
    raise UnparsableQuery("query contains no API usage item", statement.split()[0])


# ------------------------------------------------------------
# Search
# ------------------------------------------------------------

def search(query: UserQuery, repo: MinedRepository, top_n: int) -> list[Recommendation]:
    """
    Patterns whose first element is the query item, then patterns containing
    it elsewhere, then patterns with an element whose name contains the query
    name. Each tier keeps the repository's ranking order.
    """
    if top_n < 1:
        raise InvalidThreshold(f"top_n must be >= 1, got {top_n}")
    item = query.item
    results: list[Recommendation] = []
    taken: set[tuple[ItemKey, ...]] = set()

    def take(pattern: SequentialPattern, offset: int, tier: str) -> None:
        if pattern.elements not in taken:
            taken.add(pattern.elements)
            results.append(Recommendation(pattern, offset, tier))

    for pattern in repo.patterns:
        if pattern.elements[0] == item:
            take(pattern, 0, "antecedent")
    if len(results) < top_n:
        for pattern in repo.patterns:
            if item in pattern.elements:
                take(pattern, pattern.elements.index(item), "contains")
    if len(results) < top_n:
        for pattern in repo.patterns:
            for offset, element in enumerate(pattern.elements):
                if item.name in element.name:
                    take(pattern, offset, "name")
                    break
    return results[:top_n]


# ------------------------------------------------------------
# Skeleton rendering
# ------------------------------------------------------------

@dataclass
class _Renderer:
    query: UserQuery
    preamble: list[str] = field(default_factory=list)
    body: list[str] = field(default_factory=list)
    bindings: dict[str, str] = field(default_factory=dict)
    used: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        for variables in (self.query.context.variables, self.query.bound, self.query.declared):
            for name, declared in variables.items():
                self.used.add(name)
                self.bindings.setdefault(self._binding_key(declared), name)

    @staticmethod
    def _binding_key(declared: str) -> str:
        return lower_camel(simple_name(declared))

    def fresh_name(self, declared: str) -> str:
        base = lower_camel(simple_name(declared).replace("[]", "Array")) or "value"
        if base in JAVA_KEYWORDS:
            base += "Value"
        name, counter = base, 1
        while name in self.used:
            counter += 1
            name = f"{base}{counter}"
        self.used.add(name)
        return name

    def declare(self, declared: str, initial: str = "null") -> str:
        name = self.fresh_name(declared)
        self.preamble.append(f"{declared} {name} = {initial};")
        self.bindings.setdefault(self._binding_key(declared), name)
        return name

    def variable_of(self, declared: str) -> str:
        key = self._binding_key(declared)
        if key in self.bindings:
            return self.bindings[key]
        return self.declare(declared, placeholder(declared))

    def receiver_text(self, receiver: str) -> str:
        if receiver in ("super", "unknown") or _is_type_reference(receiver):
            return receiver
        if receiver in self.bindings:
            return self.bindings[receiver]
        return self.declare(receiver[:1].upper() + receiver[1:])

    def render(self, key: ItemKey) -> None:
        kind, name = key.kind, key.name
        if kind in COMMENT_KINDS:
            self.body.append(f"// {kind.value}: {name}")
        elif kind is ItemKind.MI:
            head, _, tail = name.partition("(")
            receiver, dot, method = head.rpartition(".")
            call = f"{method}({arguments(tail)})"
            self.body.append(f"{self.receiver_text(receiver)}.{call};" if dot else f"{call};")
        elif kind is ItemKind.FA:
            receiver, _, member = name.rpartition(".")
            self.body.append(f"{self.receiver_text(receiver)}.{member} = null;")
        elif kind is ItemKind.CI:
            type_name, _, tail = name.partition("(")
            self.body.append(f"new {type_name}({arguments(tail)});")
        elif kind is ItemKind.ACD:
            self.body.append(f"new {name}() {{ }};")
        elif kind is ItemKind.AC:
            base = name.replace("[]", "")
            holder = self.declare("Object")
            self.body.append(f"{holder} = new {base}{'[0]' * name.count('[]')};")
        elif kind is ItemKind.AA:
            element = name[:-2]
            target = "unknown" if element == "unknown" else self.variable_of(name)
            value = "null" if element == "unknown" else placeholder(element)
            self.body.append(f"{target}[0] = {value};")
        elif kind is ItemKind.VD:
            variable = self.fresh_name(name)
            self.body.append(f"{name} {variable} = {placeholder(name)};")
            self.bindings[self._binding_key(name)] = variable
        elif kind is ItemKind.RT:
            if name == "void":
                self.body.append("return;")
            elif name == "null":
                self.body.append("return null;")
            else:
                self.body.append(f"return {self.variable_of(name)};")


def placeholder(declared: str) -> str:
    declared = strip_generics(declared)
    if declared in PLACEHOLDERS:
        return PLACEHOLDERS[declared]
    return f"({declared}) null"


def arguments(tail: str) -> str:
    inner = tail[:-1] if tail.endswith(")") else tail
    if not inner:
        return ""
    return ", ".join(placeholder(part) for part in inner.split(","))


def _render(recommendation: Recommendation, query: UserQuery) -> _Renderer:
    renderer = _Renderer(query)
    for key in recommendation.remaining:
        if key.kind is ItemKind.FD:
            renderer.declare(key.name)
        else:
            renderer.render(key)
    return renderer


def render_skeleton(recommendation: Recommendation, query: UserQuery) -> str:
    """
    Java statements for the pattern elements after the matched item.

    Fresh variables needed for receivers, returns and field declarations are
    declared first; then one statement per remaining element follows, in
    pattern order. A match at the final offset renders as an empty string.
    """
    renderer = _render(recommendation, query)
    lines = renderer.preamble + renderer.body
    return "".join(f"{line}\n" for line in lines)


def expected_round_trip(recommendation: Recommendation) -> list[ItemKey]:
    return [key for key in recommendation.remaining if key.kind not in COMMENT_KINDS]


def verify_skeleton(recommendation: Recommendation, query: UserQuery) -> bool:
    """Re-extract the skeleton inside the query context and compare items."""
    renderer = _render(recommendation, query)
    context = query.context
    lines = _import_lines(context)
    lines.append(f"class {context.class_name} {{")
    lines.append(f"{context.class_name}() {{")
    lines.extend(_declaration_lines(context.variables))
    if query.form == "statement":
        lines.extend(_declaration_lines(query.bound))
        lines.append(query.raw_statement)
    lines.extend(renderer.preamble)
    lines.append(SKELETON_MARK)
    mark = len(lines)
    lines.extend(renderer.body)
    lines.extend(["}", "}"])
    try:
        items, _ = extract_items("\n".join(lines) + "\n", "<skeleton>")
    except UnparsableSource as exc:
        logger.warning("skeleton does not parse: %s", exc)
        return False
    recovered = [item.key for item in items if item.line > mark]
    expected = expected_round_trip(recommendation)
    if recovered != expected:
        logger.info("skeleton round trip differs: %s != %s", recovered, expected)
    return recovered == expected
