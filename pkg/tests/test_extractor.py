import random
import re
from collections import Counter

import pytest

from esdp.errors import UnparsableSource
from esdp.extractor import (
    ControlKind,
    ItemKey,
    ItemKind,
    dump_items,
    extract_items,
    normalize_item,
    scan_scopes,
)

KIND_SNIPPETS = [
    (ItemKind.PD, "package foo.biz;\nclass A {}\n", "foo.biz"),
    (ItemKind.ID, "import java.io.File;\nclass A {}\n", "java.io.File"),
    (ItemKind.TD, "public class Example_Class { }\n", "Example_Class"),
    (ItemKind.FD, "class A { private Connection conn; }\n", "Connection"),
    (ItemKind.CI, "class A { void m() { new File(); } }\n", "File()"),
    (ItemKind.MD, "class A { public File method(String s) { return null; } }\n", "method(String)"),
    (ItemKind.MI, "class A { void m(String filename) { method.open(filename); } }\n", "unknown.open(String)"),
    (ItemKind.II, "class A implements Runnable { }\n", "Runnable"),
    (ItemKind.VD, "class A { void m() { String s; } }\n", "String"),
    (ItemKind.ACD, "class A { void m() { new Enumeration() { }; } }\n", "Enumeration"),
    (ItemKind.AA, "class A { void m(int[] array, int i) { array[i]++; } }\n", "int[]"),
    (ItemKind.AC, "class A { void m(int n) { File[] files = new File[n]; } }\n", "File[]"),
    (ItemKind.CTI, "class A { A(int parameter) { this(parameter, 1); } A(int a, int b) { } }\n", "this(int,int)"),
    (ItemKind.FA, "class A { void m(Obj object) { object.field_A = 2; } }\n", "obj.field_A"),
    (ItemKind.SCI, "class A extends B { A(int parameter) { super(parameter); } }\n", "super(int)"),
    (ItemKind.RT, "class A { File m(File aFile) { return aFile; } }\n", "File"),
    (ItemKind.SC, "class A extends SuperClass { }\n", "SuperClass"),
]


@pytest.mark.parametrize("kind, source, expected", KIND_SNIPPETS, ids=[k.value for k, _, _ in KIND_SNIPPETS])
def test_every_kind_is_extracted(kind, source, expected):
    items, _ = extract_items(source)
    names = [item.name for item in items if item.kind is kind]
    assert expected in names


def test_all_seventeen_kinds_are_covered():
    assert {kind for kind, _, _ in KIND_SNIPPETS} == set(ItemKind)
    assert all(kind.description for kind in ItemKind)


@pytest.mark.parametrize(
    "kind, raw, declared, expected",
    [
        (ItemKind.FD, "private Connection conn", "", "Connection"),
        (ItemKind.VD, "String s", "", "String"),
        (ItemKind.VD, "List<String> names", "", "List"),
        (ItemKind.MI, "parser.setKind(int)", "ASTParser", "aSTParser.setKind(int)"),
        (ItemKind.MI, "ASTParser.newParser(int)", "", "ASTParser.newParser(int)"),
        (ItemKind.MI, "method.open(String)", "", "unknown.open(String)"),
        (ItemKind.FA, "object.field_A", "Obj", "obj.field_A"),
        (ItemKind.CI, "File()", "", "File()"),
    ],
)
def test_normalize_item(kind, raw, declared, expected):
    assert normalize_item(kind, raw, declared) == expected


def test_field_declaration_position_and_enclosing():
    source = "package com;\n\npublic class Test {\n\n    private Connection conn;\n}\n"
    items, _ = extract_items(source)
    (field,) = [item for item in items if item.kind is ItemKind.FD]
    assert (field.name, field.enclosing, field.line, field.column) == ("Connection", "com.Test", 5, 5)


def test_empty_source_has_no_items():
    assert extract_items("") == ([], [])
    assert extract_items("   \n\t\n") == ([], [])


def test_search_test_item_order(search_test_source):
    items, markers = extract_items(search_test_source, "SearchTest.java")
    method_keys = [item.key for item in items if item.in_method]
    assert method_keys == [
        ItemKey(ItemKind.MD, "parse(ICompilationUnit)"),
        ItemKey(ItemKind.VD, "ASTParser"),
        ItemKey(ItemKind.MI, "ASTParser.newParser(int)"),
        ItemKey(ItemKind.MI, "aSTParser.setKind(int)"),
        ItemKey(ItemKind.MI, "aSTParser.setSource(ICompilationUnit)"),
        ItemKey(ItemKind.MI, "aSTParser.setResolveBindings(boolean)"),
        ItemKey(ItemKind.VD, "CompilationUnit"),
        ItemKey(ItemKind.MI, "aSTParser.createAST(null)"),
        ItemKey(ItemKind.RT, "CompilationUnit"),
    ]
    assert markers == []
    assert [item.kind for item in items if not item.in_method] == [ItemKind.TD]


def test_items_are_in_source_order(search_test_source):
    items, _ = extract_items(search_test_source)
    positions = [(item.line, item.column) for item in items]
    assert positions == sorted(positions)


@pytest.mark.parametrize("seed", range(5))
def test_local_renaming_keeps_the_item_multiset(search_test_source, seed):
    rng = random.Random(seed)
    renamed = search_test_source
    for old in ("lwUnit", "parser", "cu"):
        fresh = "v" + "".join(rng.choice("abcdefghijklmnop") for _ in range(6))
        renamed = re.sub(rf"\b{old}\b", fresh, renamed)
    assert renamed != search_test_source

    def keys(text):
        return Counter(item.key for item in extract_items(text)[0])

    assert keys(renamed) == keys(search_test_source)


def test_imports_qualify_static_receivers_and_declarations():
    source = (
        "import org.eclipse.jdt.core.dom.ASTParser;\n"
        "import org.eclipse.jdt.core.dom.AST;\n"
        "class C {\n"
        "  void m() {\n"
        "    ASTParser parser = ASTParser.newParser(AST.JLS3);\n"
        "  }\n"
        "}\n"
    )
    items, _ = extract_items(source)
    keys = [item.key for item in items if item.in_method]
    assert ItemKey(ItemKind.VD, "org.eclipse.jdt.core.dom.ASTParser") in keys
    assert ItemKey(ItemKind.MI, "org.eclipse.jdt.core.dom.ASTParser.newParser(int)") in keys


def test_unbalanced_brace_reports_position():
    with pytest.raises(UnparsableSource) as info:
        extract_items("class A {\n  void m() {\n    int x = ;\n  }\n", "Broken.java")
    assert info.value.line >= 1
    assert info.value.column >= 1
    assert "Broken.java" in str(info.value)


def test_syntax_error_line_points_at_the_statement():
    with pytest.raises(UnparsableSource) as info:
        extract_items("class A {\n  void m() {\n    int x = ;\n  }\n}\n")
    assert info.value.line == 3


def test_control_markers_nest_inside_the_method():
    source = (
        "class A {\n"
        "  void m(java.util.List<String> xs) {\n"
        "    for (String x : xs) {\n"
        "      if (x.isEmpty()) {\n"
        "        x.trim();\n"
        "      }\n"
        "    }\n"
        "  }\n"
        "}\n"
    )
    _, markers = extract_items(source)
    assert [m.kind for m in markers] == [
        ControlKind.LOOP_BEGIN,
        ControlKind.IF_BEGIN,
        ControlKind.IF_END,
        ControlKind.LOOP_END,
    ]
    assert {m.enclosing for m in markers} == {"A.m(List)"}
    assert [m.depth for m in markers] == [0, 1, 1, 0]


def test_field_reads_are_not_field_accesses():
    items, _ = extract_items("class A { void m(Obj obj) { int n = obj.count; obj.count = n; } }")
    assert [item.name for item in items if item.kind is ItemKind.FA] == ["obj.count"]


def test_anonymous_class_members_stay_in_the_enclosing_method():
    source = (
        "class A {\n"
        "  void m() {\n"
        "    Runnable r = new Runnable() {\n"
        "      public void run() { System.gc(); }\n"
        "    };\n"
        "  }\n"
        "}\n"
    )
    items, _ = extract_items(source)
    md = [item.name for item in items if item.kind is ItemKind.MD]
    assert md == ["m()"]
    gc = [item for item in items if item.kind is ItemKind.MI]
    assert [item.enclosing for item in gc] == ["A.m()"]


def test_scan_scopes_lists_fields_and_locals(parser_context_source):
    snapshot = scan_scopes(parser_context_source)[-1]
    assert snapshot.class_name == "ParserConfigurations"
    assert snapshot.variables["parser"] == "org.eclipse.jdt.core.dom.ASTParser"
    assert snapshot.variables["lwUnit"] == "org.eclipse.jdt.core.ICompilationUnit"
    assert "org.eclipse.jdt.core.dom.AST" in snapshot.imports


def test_dump_items_is_tab_separated(search_test_source):
    items, _ = extract_items(search_test_source)
    lines = dump_items(items).splitlines()
    assert len(lines) == len(items)
    assert lines[0].split("\t") == ["TD", "SearchTest", "SearchTest", "1"]
