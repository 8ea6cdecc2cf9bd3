"""
Source abstraction.

Java source text is parsed with tree-sitter and reduced to a stream of
SourceItem records: one per construct of the seventeen item kinds, each
identified by (kind, name) where the name keeps the type / member signature
and drops local variable identifiers. If/loop statements inside methods are
reported separately as ControlMarker records for the groum builder.

Name resolution is syntactic: simple type names are looked up in the file's
single-type imports and kept as written when absent or ambiguous.

Field access (FA) items are emitted for written fields only: assignment and
increment targets. Reads such as `obj.count` or constants like `AST.JLS3` in
argument position produce no item.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

import tree_sitter_java
from tree_sitter import Language, Node, Parser

from .errors import UnparsableSource

logger = logging.getLogger(__name__)

JAVA_LANGUAGE = Language(tree_sitter_java.language())

UNKNOWN_RECEIVER = "unknown"
UNKNOWN_TYPE = "Object"

PRIMITIVES = frozenset(
    {"int", "long", "short", "byte", "char", "boolean", "float", "double", "void"}
)
MODIFIERS = frozenset(
    {
        "public", "protected", "private", "static", "final", "abstract",
        "transient", "volatile", "synchronized", "native", "strictfp", "default",
    }
)

_CONSTANT_NAME = re.compile(r"^[A-Z][A-Z0-9_]*$")
_DOTTED_NAME = re.compile(r"^[A-Za-z_$][\w$]*(\.[A-Za-z_$][\w$]*)*$")
_GENERIC_ARGS = re.compile(r"<[^<>]*>")

_TYPE_DECLARATIONS = frozenset(
    {
        "class_declaration", "interface_declaration", "enum_declaration",
        "record_declaration", "annotation_type_declaration",
    }
)
_LOOPS = frozenset(
    {"for_statement", "enhanced_for_statement", "while_statement", "do_statement"}
)
_INTEGER_LITERALS = frozenset(
    {
        "decimal_integer_literal", "hex_integer_literal",
        "octal_integer_literal", "binary_integer_literal",
    }
)
_FLOAT_LITERALS = frozenset(
    {"decimal_floating_point_literal", "hex_floating_point_literal"}
)
_BOOLEAN_OPERATORS = frozenset(
    {"==", "!=", "<", ">", "<=", ">=", "&&", "||", "instanceof"}
)
_NUMERIC_RANK = ("double", "float", "long", "int")


class ItemKind(str, Enum):
    PD = "PD"
    ID = "ID"
    TD = "TD"
    FD = "FD"
    CI = "CI"
    MD = "MD"
    MI = "MI"
    II = "II"
    VD = "VD"
    ACD = "ACD"
    AA = "AA"
    AC = "AC"
    CTI = "CTI"
    FA = "FA"
    SCI = "SCI"
    RT = "RT"
    SC = "SC"

    @property
    def description(self) -> str:
        return ITEM_DESCRIPTIONS[self]

    def __str__(self) -> str:
        return self.value


ITEM_DESCRIPTIONS = {
    ItemKind.PD: "Package Declaration",
    ItemKind.ID: "Import Declaration",
    ItemKind.TD: "Type Declaration",
    ItemKind.FD: "Field Declaration",
    ItemKind.CI: "Class Instance Creation",
    ItemKind.MD: "Method Declaration",
    ItemKind.MI: "Method Invocation",
    ItemKind.II: "Interface Implementation",
    ItemKind.VD: "Local Variable Declaration",
    ItemKind.ACD: "Anonymous Class Declaration",
    ItemKind.AA: "Array Access",
    ItemKind.AC: "Array Creation",
    ItemKind.CTI: "Constructor Invocation",
    ItemKind.FA: "Field Access",
    ItemKind.SCI: "Super Constructor Invocation",
    ItemKind.RT: "Return Statement",
    ItemKind.SC: "Super Class Inheritance",
}

# Kinds that only exist at declaration level; they never appear inside a
# method body and are not rendered as statements.
DECLARATION_KINDS = frozenset(
    {ItemKind.PD, ItemKind.ID, ItemKind.TD, ItemKind.FD, ItemKind.MD, ItemKind.II, ItemKind.SC}
)


class ItemKey(NamedTuple):
    """Mining identity of an item."""

    kind: ItemKind
    name: str

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.name}"

    @classmethod
    def parse(cls, text: str) -> "ItemKey":
        kind, sep, name = text.strip().partition(":")
        if not sep or not name:
            raise ValueError(f"expected KIND:name, got {text!r}")
        return cls(ItemKind(kind.strip()), name.strip())


@dataclass(frozen=True)
class SourceItem:
    kind: ItemKind
    name: str
    enclosing: str
    line: int
    column: int = 1
    source: str = ""
    # Identifiers touched by the construct (receiver, target, arguments).
    # Metadata for data-dependency edges, never part of the identity.
    variables: frozenset[str] = frozenset()

    @property
    def key(self) -> ItemKey:
        return ItemKey(self.kind, self.name)

    @property
    def in_method(self) -> bool:
        return "(" in self.enclosing


class ControlKind(str, Enum):
    IF_BEGIN = "IF_BEGIN"
    IF_END = "IF_END"
    LOOP_BEGIN = "LOOP_BEGIN"
    LOOP_END = "LOOP_END"


@dataclass(frozen=True)
class ControlMarker:
    kind: ControlKind
    enclosing: str
    line: int
    column: int = 1
    source: str = ""
    depth: int = 0

    @property
    def is_end(self) -> bool:
        return self.kind in (ControlKind.IF_END, ControlKind.LOOP_END)

    @property
    def order(self) -> tuple[int, int, int, int]:
        """Position key; brace-less regions can close at one point, innermost first."""
        if self.is_end:
            return (self.line, self.column, 0, -self.depth)
        return (self.line, self.column, 1, self.depth)


@dataclass(frozen=True)
class ScopeSnapshot:
    """Names visible at the end of a method body."""

    class_name: str
    method_name: str
    variables: dict[str, str]
    imports: tuple[str, ...]


# ------------------------------------------------------------
# Name helpers
# ------------------------------------------------------------

def strip_generics(text: str) -> str:
    text = "".join(text.split())
    while "<" in text:
        reduced = _GENERIC_ARGS.sub("", text)
        if reduced == text:
            break
        text = reduced
    return text


def simple_name(type_text: str) -> str:
    return strip_generics(type_text).rsplit(".", 1)[-1]


def lower_camel(name: str) -> str:
    return name[:1].lower() + name[1:]


def is_constant_name(name: str) -> bool:
    return bool(_CONSTANT_NAME.match(name))


def _is_type_reference(receiver: str) -> bool:
    if not _DOTTED_NAME.match(receiver):
        return False
    return receiver.rsplit(".", 1)[-1][:1].isupper()


def _declared_type_of(declaration: str) -> str:
    tokens = [tok for tok in strip_generics_spaced(declaration).split() if tok not in MODIFIERS]
    if len(tokens) < 2:
        return tokens[0] if tokens else declaration
    type_text, identifier = tokens[-2], tokens[-1]
    dims = identifier.count("[")
    return type_text + "[]" * dims


def strip_generics_spaced(text: str) -> str:
    """Like strip_generics but keeps the spaces between tokens."""
    text = " ".join(text.split())
    while "<" in text:
        reduced = re.sub(r"\s*<[^<>]*>", "", text)
        if reduced == text:
            break
        text = reduced
    return text


def _normalize_member(raw: str, declared_type: str) -> str:
    head, paren, tail = raw.partition("(")
    receiver, dot, member = head.rpartition(".")
    if not dot:
        return raw
    if declared_type:
        receiver = lower_camel(simple_name(declared_type))
    elif receiver != "super" and not _is_type_reference(receiver):
        receiver = UNKNOWN_RECEIVER
    return f"{receiver}.{member}{paren}{tail}"


def normalize_item(kind: ItemKind, raw_name: str, declared_type: str = "") -> str:
    """
    Reduce a construct's text to its item name.

    Declarations keep only their type ("Connection conn" -> "Connection").
    Member accesses replace the receiver by the lower-camel simple name of
    its declared type ("parser.setKind(int)" with ASTParser ->
    "aSTParser.setKind(int)"); type receivers are kept, anything else becomes
    "unknown".
    """
    raw = " ".join(raw_name.split())
    if kind in (ItemKind.FD, ItemKind.VD):
        return strip_generics(declared_type) if declared_type else _declared_type_of(raw)
    if kind in (ItemKind.MI, ItemKind.FA):
        return _normalize_member(raw, declared_type)
    if declared_type:
        return strip_generics(declared_type)
    return raw


# ------------------------------------------------------------
# Tree walking
# ------------------------------------------------------------

def parse_java(source: str):
    parser = Parser(JAVA_LANGUAGE)
    return parser.parse(source.encode("utf-8"))


def first_error(node: Node) -> Node | None:
    if node.type == "ERROR" or node.is_missing:
        return node
    if not node.has_error:
        return None
    for child in node.children:
        found = first_error(child)
        if found is not None:
            return found
    return node


def _text(node: Node | None) -> str:
    if node is None:
        return ""
    return node.text.decode("utf-8")


def _named(node: Node) -> list[Node]:
    return [child for child in node.named_children if child.type not in ("comment", "line_comment", "block_comment")]


def _unwrap(node: Node) -> Node:
    while node.type in ("parenthesized_expression", "cast_expression"):
        inner = node.child_by_field_name("value") if node.type == "cast_expression" else None
        if inner is None:
            named = _named(node)
            if not named:
                break
            inner = named[-1]
        node = inner
    return node


@dataclass
class _ClassFrame:
    path: str
    simple: str
    superclass: str = ""
    fields: dict[str, str] = field(default_factory=dict)


@dataclass
class _MethodFrame:
    path: str
    name: str
    return_type: str
    locals: dict[str, str] = field(default_factory=dict)


class _Abstractor:
    def __init__(self, file_label: str):
        self.file_label = file_label
        self.package = ""
        self.primary_path = ""
        self.imports: list[str] = []
        self.import_table: dict[str, set[str]] = {}
        self.classes: list[_ClassFrame] = []
        self.method: _MethodFrame | None = None
        self.anonymous_depth = 0
        self.control_depth = 0
        self.targets: dict[int, str] = {}
        self.items: list[SourceItem] = []
        self.markers: list[ControlMarker] = []
        self.snapshots: list[ScopeSnapshot] = []

    # -------- emission --------

    @property
    def enclosing(self) -> str:
        if self.method is not None:
            return self.method.path
        if self.classes:
            return self.classes[-1].path
        return self.primary_path or self.package or self.file_label

    def _emit(
        self,
        kind: ItemKind,
        raw_name: str,
        at: Node,
        declared_type: str = "",
        variables: Iterable[str] = (),
        enclosing: str | None = None,
    ) -> None:
        row, column = at.start_point
        self.items.append(
            SourceItem(
                kind=kind,
                name=normalize_item(kind, raw_name, declared_type),
                enclosing=enclosing or self.enclosing,
                line=row + 1,
                column=column + 1,
                source=self.file_label,
                variables=frozenset(v for v in variables if v),
            )
        )

    def _region(self, begin: ControlKind, end: ControlKind, node: Node) -> None:
        """Visit a control statement between its BEGIN and END markers."""
        if self.method is None:
            self.visit_children(node)
            return
        path = self.method.path
        depth = self.control_depth
        start_row, start_col = node.start_point
        self.markers.append(ControlMarker(begin, path, start_row + 1, start_col + 1, self.file_label, depth))
        self.control_depth += 1
        try:
            self.visit_children(node)
        finally:
            self.control_depth -= 1
        end_row, end_col = node.end_point
        self.markers.append(ControlMarker(end, path, end_row + 1, end_col + 1, self.file_label, depth))

    # -------- resolution --------

    def resolve(self, type_text: str) -> str:
        base = strip_generics(type_text)
        dims = ""
        while base.endswith("[]"):
            base, dims = base[:-2], dims + "[]"
        if "." not in base and base not in PRIMITIVES:
            candidates = self.import_table.get(base, set())
            if len(candidates) == 1:
                base = next(iter(candidates))
        return base + dims

    def type_of(self, node: Node | None) -> str:
        if node is None:
            return UNKNOWN_TYPE
        kind = node.type
        if kind == "generic_type":
            named = _named(node)
            return self.type_of(named[0]) if named else strip_generics(_text(node))
        if kind == "array_type":
            element = node.child_by_field_name("element")
            dims = node.child_by_field_name("dimensions")
            return self.type_of(element) + "[]" * max(1, _text(dims).count("["))
        if kind == "annotated_type":
            named = [child for child in _named(node) if "annotation" not in child.type]
            return self.type_of(named[-1]) if named else UNKNOWN_TYPE
        return self.resolve(_text(node))

    def lookup(self, name: str) -> str:
        if self.method is not None and name in self.method.locals:
            return self.method.locals[name]
        for frame in reversed(self.classes):
            if name in frame.fields:
                return frame.fields[name]
        return ""

    def infer(self, node: Node | None) -> str:
        """Best-effort static type of an expression; '' when unknown."""
        if node is None:
            return ""
        kind = node.type
        if kind in _INTEGER_LITERALS:
            return "long" if _text(node)[-1:] in "lL" else "int"
        if kind in _FLOAT_LITERALS:
            return "float" if _text(node)[-1:] in "fF" else "double"
        if kind in ("true", "false"):
            return "boolean"
        if kind == "character_literal":
            return "char"
        if kind in ("string_literal", "text_block"):
            return "String"
        if kind == "null_literal":
            return "null"
        if kind == "identifier":
            name = _text(node)
            declared = self.lookup(name)
            if declared:
                return declared
            return "int" if is_constant_name(name) else ""
        if kind == "field_access":
            member = _text(node.child_by_field_name("field"))
            target = node.child_by_field_name("object")
            if target is not None and target.type == "this" and self.classes:
                declared = self.classes[-1].fields.get(member, "")
                if declared:
                    return declared
            return "int" if is_constant_name(member) else ""
        if kind == "cast_expression":
            return self.type_of(node.child_by_field_name("type"))
        if kind == "object_creation_expression":
            return self.type_of(node.child_by_field_name("type"))
        if kind == "array_creation_expression":
            return self.type_of(node.child_by_field_name("type")) + "[]" * self._dimension_count(node)
        if kind == "parenthesized_expression":
            named = _named(node)
            return self.infer(named[0]) if named else ""
        if kind == "ternary_expression":
            return self.infer(node.child_by_field_name("consequence"))
        if kind == "binary_expression":
            return self._infer_binary(node)
        if kind == "unary_expression":
            operator = node.child_by_field_name("operator")
            if _text(operator) == "!":
                return "boolean"
            return self.infer(node.child_by_field_name("operand"))
        if kind == "instanceof_expression":
            return "boolean"
        if kind == "class_literal":
            return "Class"
        if kind == "this":
            return self.classes[-1].simple if self.classes else ""
        if kind == "array_access":
            array_type = self.infer(node.child_by_field_name("array"))
            return array_type[:-2] if array_type.endswith("[]") else ""
        if kind == "update_expression":
            named = _named(node)
            return self.infer(named[0]) if named else ""
        if kind == "assignment_expression":
            return self.infer(node.child_by_field_name("left"))
        return ""

    def _infer_binary(self, node: Node) -> str:
        operator = node.child_by_field_name("operator")
        op_text = _text(operator) if operator is not None else _text(node.children[1])
        if op_text in _BOOLEAN_OPERATORS:
            return "boolean"
        left = self.infer(node.child_by_field_name("left"))
        right = self.infer(node.child_by_field_name("right"))
        if op_text == "+" and "String" in (left, right):
            return "String"
        for numeric in _NUMERIC_RANK:
            if numeric in (left, right):
                return numeric
        return "int"

    @staticmethod
    def _dimension_count(node: Node) -> int:
        count = 0
        for child in node.children:
            if child.type == "dimensions_expr":
                count += 1
            elif child.type == "dimensions":
                count += _text(child).count("[")
        return max(1, count)

    def argument_types(self, arguments: Node | None) -> str:
        if arguments is None:
            return ""
        return ",".join(simple_name(self.infer(arg) or UNKNOWN_TYPE) for arg in _named(arguments))

    def receiver(self, target: Node | None) -> tuple[str, str, set[str]]:
        """(raw receiver text, declared type, variables) for a member access."""
        if target is None:
            return "", "", set()
        kind = target.type
        if kind == "this":
            simple = self.classes[-1].simple if self.classes else ""
            return "this", simple, set()
        if kind == "super":
            return "super", "", set()
        if kind == "identifier":
            name = _text(target)
            declared = self.lookup(name)
            if declared:
                return name, declared, {name}
            if name[:1].isupper():
                return self.resolve(name), "", set()
            return name, "", set()
        if kind in ("field_access", "scoped_identifier"):
            inner = target.child_by_field_name("object")
            member = _text(target.child_by_field_name("field"))
            if inner is not None and inner.type == "this":
                declared = self.classes[-1].fields.get(member, "") if self.classes else ""
                return f"this.{member}", declared, {member}
            text = "".join(_text(target).split())
            if _DOTTED_NAME.match(text) and not self.lookup(text.split(".", 1)[0]):
                return text, "", set()
            return UNKNOWN_RECEIVER, "", set()
        if kind in ("cast_expression", "parenthesized_expression", "object_creation_expression"):
            declared = self.infer(target)
            return ("expr", declared, set()) if declared else (UNKNOWN_RECEIVER, "", set())
        return UNKNOWN_RECEIVER, "", set()

    # -------- visiting --------

    def visit(self, node: Node) -> None:
        handler = getattr(self, f"on_{node.type}", None)
        if handler is not None:
            handler(node)
        else:
            self.visit_children(node)

    def visit_children(self, node: Node | None) -> None:
        if node is None:
            return
        for child in node.children:
            self.visit(child)

    def on_program(self, node: Node) -> None:
        for child in node.children:
            if child.type == "package_declaration":
                names = [c for c in _named(child) if c.type in ("identifier", "scoped_identifier")]
                self.package = _text(names[0]) if names else ""
            elif child.type == "import_declaration":
                self._register_import(child)
            elif child.type in _TYPE_DECLARATIONS and not self.primary_path:
                name = _text(child.child_by_field_name("name"))
                self.primary_path = f"{self.package}.{name}" if self.package else name
        self.visit_children(node)

    def _import_path(self, node: Node) -> str:
        names = [c for c in _named(node) if c.type in ("identifier", "scoped_identifier")]
        path = _text(names[0]) if names else ""
        if any(c.type == "asterisk" for c in node.children):
            path += ".*"
        return path

    def _register_import(self, node: Node) -> None:
        path = self._import_path(node)
        self.imports.append(path)
        is_static = any(c.type == "static" for c in node.children)
        if path.endswith(".*") or is_static:
            return
        self.import_table.setdefault(path.rsplit(".", 1)[-1], set()).add(path)

    def on_package_declaration(self, node: Node) -> None:
        self._emit(ItemKind.PD, self.package, node, enclosing=self.primary_path or self.package)

    def on_import_declaration(self, node: Node) -> None:
        self._emit(
            ItemKind.ID,
            self._import_path(node),
            node,
            enclosing=self.primary_path or self.package or self.file_label,
        )

    def _type_declaration(self, node: Node) -> None:
        name = _text(node.child_by_field_name("name"))
        outer = self.classes[-1].path if self.classes else self.package
        path = f"{outer}.{name}" if outer else name
        frame = _ClassFrame(path=path, simple=name)
        body = node.child_by_field_name("body")

        superclass = node.child_by_field_name("superclass")
        if superclass is not None:
            named = _named(superclass)
            frame.superclass = self.type_of(named[0]) if named else ""
        for member in self._members(body):
            if member.type == "field_declaration":
                declared = self.type_of(member.child_by_field_name("type"))
                for declarator in member.children_by_field_name("declarator"):
                    frame.fields[_text(declarator.child_by_field_name("name"))] = self._with_dims(declared, declarator)

        saved_method, saved_anonymous = self.method, self.anonymous_depth
        self.method, self.anonymous_depth = None, 0
        self.classes.append(frame)
        self._emit(ItemKind.TD, path, node)
        if frame.superclass:
            self._emit(ItemKind.SC, frame.superclass, superclass, declared_type=frame.superclass)
        for child in node.children:
            if child.type in ("super_interfaces", "extends_interfaces"):
                for interface in self._interface_types(child):
                    resolved = self.type_of(interface)
                    self._emit(ItemKind.II, resolved, interface, declared_type=resolved)
        self.visit_children(body)
        self.classes.pop()
        self.method, self.anonymous_depth = saved_method, saved_anonymous

    on_class_declaration = _type_declaration
    on_interface_declaration = _type_declaration
    on_enum_declaration = _type_declaration
    on_record_declaration = _type_declaration
    on_annotation_type_declaration = _type_declaration

    @staticmethod
    def _interface_types(node: Node) -> list[Node]:
        types: list[Node] = []
        for child in _named(node):
            if child.type == "type_list":
                types.extend(_named(child))
            else:
                types.append(child)
        return types

    @staticmethod
    def _members(body: Node | None) -> list[Node]:
        if body is None:
            return []
        members: list[Node] = []
        for child in body.children:
            if child.type == "enum_body_declarations":
                members.extend(child.children)
            else:
                members.append(child)
        return members

    def _with_dims(self, declared: str, declarator: Node) -> str:
        dims = declarator.child_by_field_name("dimensions")
        return declared + "[]" * _text(dims).count("[") if dims is not None else declared

    def on_field_declaration(self, node: Node) -> None:
        declarators = node.children_by_field_name("declarator")
        if self.anonymous_depth == 0:
            type_node = node.child_by_field_name("type")
            declared = self.type_of(type_node)
            first = _text(declarators[0].child_by_field_name("name")) if declarators else ""
            names = [_text(d.child_by_field_name("name")) for d in declarators]
            self._emit(
                ItemKind.FD,
                f"{_text(type_node)} {first}",
                node,
                declared_type=declared,
                variables=names,
            )
        for declarator in declarators:
            self._visit_initializer(declarator)

    def _visit_initializer(self, declarator: Node) -> None:
        value = declarator.child_by_field_name("value")
        if value is None:
            return
        self.targets[_unwrap(value).id] = _text(declarator.child_by_field_name("name"))
        self.visit(value)

    def _parameters(self, node: Node) -> list[tuple[str, str]]:
        params = node.child_by_field_name("parameters")
        result: list[tuple[str, str]] = []
        if params is None:
            return result
        for param in _named(params):
            if param.type == "formal_parameter":
                declared = self._with_dims(self.type_of(param.child_by_field_name("type")), param)
                result.append((_text(param.child_by_field_name("name")), declared))
            elif param.type == "spread_parameter":
                type_nodes = [c for c in _named(param) if c.type not in ("modifiers", "variable_declarator")]
                declarator = next((c for c in _named(param) if c.type == "variable_declarator"), None)
                declared = self.type_of(type_nodes[0]) + "[]" if type_nodes else UNKNOWN_TYPE
                name = _text(declarator.child_by_field_name("name")) if declarator is not None else ""
                result.append((name, declared))
        return result

    def _method(self, node: Node) -> None:
        params = self._parameters(node)
        body = node.child_by_field_name("body")
        if self.anonymous_depth > 0 and self.method is not None:
            self.method.locals.update(dict(params))
            self.visit_children(body)
            return
        frame = self.classes[-1] if self.classes else _ClassFrame(self.enclosing, self.enclosing)
        if node.type == "constructor_declaration":
            name, return_type = frame.simple, "void"
        else:
            name = _text(node.child_by_field_name("name"))
            return_type = self.type_of(node.child_by_field_name("type"))
        signature = f"{name}({','.join(simple_name(declared) for _, declared in params)})"
        path = f"{frame.path}.{signature}"
        saved = self.method
        self.method = _MethodFrame(path=path, name=name, return_type=return_type, locals=dict(params))
        self._emit(ItemKind.MD, signature, node)
        self.visit_children(body)
        self.snapshots.append(
            ScopeSnapshot(
                class_name=frame.simple,
                method_name=name,
                variables={**{k: v for f in self.classes for k, v in f.fields.items()}, **self.method.locals},
                imports=tuple(self.imports),
            )
        )
        self.method = saved

    on_method_declaration = _method
    on_constructor_declaration = _method

    def on_local_variable_declaration(self, node: Node) -> None:
        type_node = node.child_by_field_name("type")
        declared = self.type_of(type_node)
        declarators = node.children_by_field_name("declarator")
        names = [_text(d.child_by_field_name("name")) for d in declarators]
        self._emit(
            ItemKind.VD,
            f"{_text(type_node)} {names[0] if names else ''}",
            node,
            declared_type=declared,
            variables=names,
        )
        if self.method is not None:
            for declarator in declarators:
                self.method.locals[_text(declarator.child_by_field_name("name"))] = self._with_dims(declared, declarator)
        for declarator in declarators:
            self._visit_initializer(declarator)

    def _declare_local(self, name_node: Node | None, type_node: Node | None) -> None:
        if self.method is not None and name_node is not None:
            self.method.locals[_text(name_node)] = self.type_of(type_node) if type_node is not None else UNKNOWN_TYPE

    def on_enhanced_for_statement(self, node: Node) -> None:
        self._declare_local(node.child_by_field_name("name"), node.child_by_field_name("type"))
        self._region(ControlKind.LOOP_BEGIN, ControlKind.LOOP_END, node)

    def on_catch_formal_parameter(self, node: Node) -> None:
        type_nodes = [c for c in _named(node) if c.type == "catch_type"]
        declared = _named(type_nodes[0])[0] if type_nodes and _named(type_nodes[0]) else None
        self._declare_local(node.child_by_field_name("name"), declared)

    def on_resource(self, node: Node) -> None:
        self._declare_local(node.child_by_field_name("name"), node.child_by_field_name("type"))
        value = node.child_by_field_name("value")
        if value is not None:
            self.targets[_unwrap(value).id] = _text(node.child_by_field_name("name"))
            self.visit(value)
        else:
            self.visit_children(node)

    def on_lambda_expression(self, node: Node) -> None:
        params = node.child_by_field_name("parameters")
        if params is not None and self.method is not None:
            if params.type == "identifier":
                self.method.locals.setdefault(_text(params), UNKNOWN_TYPE)
            else:
                for param in _named(params):
                    if param.type == "identifier":
                        self.method.locals.setdefault(_text(param), UNKNOWN_TYPE)
                    elif param.type == "formal_parameter":
                        self._declare_local(param.child_by_field_name("name"), param.child_by_field_name("type"))
        self.visit(node.child_by_field_name("body"))

    def on_if_statement(self, node: Node) -> None:
        self._region(ControlKind.IF_BEGIN, ControlKind.IF_END, node)

    def _loop(self, node: Node) -> None:
        self._region(ControlKind.LOOP_BEGIN, ControlKind.LOOP_END, node)

    on_for_statement = _loop
    on_while_statement = _loop
    on_do_statement = _loop

    def on_assignment_expression(self, node: Node) -> None:
        left = node.child_by_field_name("left")
        right = node.child_by_field_name("right")
        if left is not None and left.type == "field_access":
            self._field_access(left)
        else:
            self.visit(left)
        if right is not None:
            if left is not None and left.type == "identifier":
                self.targets[_unwrap(right).id] = _text(left)
            elif left is not None and left.type == "field_access":
                self.targets[_unwrap(right).id] = _text(left.child_by_field_name("field"))
            self.visit(right)

    def on_update_expression(self, node: Node) -> None:
        for child in node.children:
            if child.type == "field_access":
                self._field_access(child)
            else:
                self.visit(child)

    def _field_access(self, node: Node) -> None:
        raw_receiver, declared, variables = self.receiver(node.child_by_field_name("object"))
        member = _text(node.child_by_field_name("field"))
        self._emit(
            ItemKind.FA,
            f"{raw_receiver}.{member}",
            node,
            declared_type=declared,
            variables=variables,
        )
        self.visit(node.child_by_field_name("object"))

    def on_method_invocation(self, node: Node) -> None:
        target = node.child_by_field_name("object")
        name_node = node.child_by_field_name("name")
        arguments = node.child_by_field_name("arguments")
        raw_receiver, declared, variables = self.receiver(target)
        call = f"{_text(name_node)}({self.argument_types(arguments)})"
        raw_name = f"{raw_receiver}.{call}" if raw_receiver else call
        if arguments is not None:
            variables |= {_text(arg) for arg in _named(arguments) if arg.type == "identifier"}
        target_var = self.targets.pop(node.id, "")
        self._emit(
            ItemKind.MI,
            raw_name,
            name_node or node,
            declared_type=declared,
            variables=variables | {target_var},
        )
        self.visit(target)
        self.visit(arguments)

    def on_object_creation_expression(self, node: Node) -> None:
        type_node = node.child_by_field_name("type")
        declared = self.type_of(type_node)
        arguments = node.child_by_field_name("arguments")
        body = next((c for c in node.children if c.type == "class_body"), None)
        target_var = self.targets.pop(node.id, "")
        argument_vars = {_text(a) for a in _named(arguments) if a.type == "identifier"} if arguments is not None else set()
        if body is not None:
            self._emit(ItemKind.ACD, declared, node, declared_type=declared, variables={target_var})
        else:
            self._emit(
                ItemKind.CI,
                f"{declared}({self.argument_types(arguments)})",
                node,
                variables=argument_vars | {target_var},
            )
        self.visit(arguments)
        if body is not None:
            self.anonymous_depth += 1
            self.visit_children(body)
            self.anonymous_depth -= 1

    def on_array_creation_expression(self, node: Node) -> None:
        declared = self.type_of(node.child_by_field_name("type")) + "[]" * self._dimension_count(node)
        self._emit(ItemKind.AC, declared, node, declared_type=declared)
        self.visit_children(node)

    def on_array_access(self, node: Node) -> None:
        array = node.child_by_field_name("array")
        declared = self.infer(array)
        if not declared.endswith("[]"):
            declared = f"{UNKNOWN_RECEIVER}[]"
        variables = {_text(array)} if array is not None and array.type == "identifier" else set()
        self._emit(ItemKind.AA, declared, node, declared_type=declared, variables=variables)
        self.visit_children(node)

    def on_explicit_constructor_invocation(self, node: Node) -> None:
        constructor = node.child_by_field_name("constructor")
        arguments = node.child_by_field_name("arguments")
        keyword = _text(constructor) if constructor is not None else "this"
        kind = ItemKind.SCI if keyword == "super" else ItemKind.CTI
        self._emit(kind, f"{keyword}({self.argument_types(arguments)})", node)
        self.visit(arguments)

    def on_return_statement(self, node: Node) -> None:
        named = _named(node)
        expression = named[0] if named else None
        if expression is None:
            declared = "void"
        else:
            declared = self.infer(expression)
            if declared in ("", "null") and self.method is not None and self.method.return_type != "void":
                declared = self.method.return_type
            declared = declared or UNKNOWN_TYPE
        variables = {_text(expression)} if expression is not None and expression.type == "identifier" else set()
        self._emit(ItemKind.RT, declared, node, declared_type=declared, variables=variables)
        self.visit_children(node)


def _abstract(source: str, file_label: str) -> _Abstractor:
    abstractor = _Abstractor(file_label)
    if not source.strip():
        return abstractor
    tree = parse_java(source)
    broken = first_error(tree.root_node)
    if broken is not None:
        row, column = broken.start_point
        what = "missing token" if broken.is_missing else "syntax error"
        raise UnparsableSource(f"{file_label}: {what}", row + 1, column + 1)
    abstractor.visit(tree.root_node)
    abstractor.items.sort(key=lambda item: (item.line, item.column))
    abstractor.markers.sort(key=lambda marker: marker.order)
    return abstractor


def extract_items(source: str, file_label: str = "<source>") -> tuple[list[SourceItem], list[ControlMarker]]:
    """
    Abstract one Java source text into its item stream and control markers.

    Raises UnparsableSource (with 1-based line/column) when tree-sitter
    reports a syntax error or a missing token such as an unbalanced brace.
    """
    abstractor = _abstract(source, file_label)
    logger.debug("%s: %d items, %d markers", file_label, len(abstractor.items), len(abstractor.markers))
    return abstractor.items, abstractor.markers


def scan_scopes(source: str, file_label: str = "<context>") -> list[ScopeSnapshot]:
    """Visible names at the end of every method body, in source order."""
    return _abstract(source, file_label).snapshots


def dump_items(items: Iterable[SourceItem]) -> str:
    return "".join(f"{item.kind.value}\t{item.name}\t{item.enclosing}\t{item.line}\n" for item in items)
