import random
from itertools import combinations, permutations

import networkx as nx
import pytest

from esdp.errors import InvalidThreshold, MalformedControlNesting
from esdp.extractor import ControlKind, ControlMarker, ItemKind, SourceItem, extract_items
from esdp.groum import (
    Groum,
    GroumNode,
    NodeRole,
    action_label,
    build_groum,
    exas_vector,
    format_pattern_report,
    frequency,
    groums_from_items,
    independent_occurrences,
    label_isomorphic,
    patt_explorer,
    vector_key,
)


def chain(*labels, origin=""):
    nodes = tuple(GroumNode(i, label) for i, label in enumerate(labels))
    return Groum(nodes, frozenset((i, i + 1) for i in range(len(labels) - 1)), origin)


def labels_of(groum):
    return [node.label for node in groum.nodes]


# ---- building ----

def test_search_test_groum_is_a_call_chain(search_test_source):
    items, markers = extract_items(search_test_source)
    (groum,) = groums_from_items(items, markers)
    assert labels_of(groum) == [
        "ASTParser.newParser",
        "ASTParser.setKind",
        "ASTParser.setSource",
        "ASTParser.setResolveBindings",
        "ASTParser.createAST",
    ]
    assert groum.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4)})
    assert groum.origin == "SearchTest.parse(ICompilationUnit)"


def test_single_call_has_no_edges():
    items, _ = extract_items("class A { void m() { System.gc(); } }")
    (groum,) = groums_from_items(items)
    assert labels_of(groum) == ["System.gc"] and groum.edges == frozenset()


def test_unrelated_calls_are_joined_by_usage_order():
    items, _ = extract_items("class A { void m() { System.gc(); Runtime.getRuntime(); } }")
    (groum,) = groums_from_items(items)
    assert groum.edges == frozenset({(0, 1)})


def test_data_dependency_skips_intermediate_nodes():
    source = (
        "class A {\n"
        "  void m() {\n"
        "    File f = new File(\"x\");\n"
        "    System.gc();\n"
        "    f.delete();\n"
        "  }\n"
        "}\n"
    )
    items, _ = extract_items(source)
    (groum,) = groums_from_items(items)
    assert labels_of(groum) == ["File.<init>", "System.gc", "File.delete"]
    assert groum.edges == frozenset({(0, 1), (1, 2), (0, 2)})


def test_control_nodes_for_branches_and_loops():
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
    items, markers = extract_items(source)
    (groum,) = groums_from_items(items, markers)
    assert labels_of(groum) == ["LOOP", "IF", "String.isEmpty", "String.trim"]
    assert [node.role for node in groum.nodes[:2]] == [NodeRole.CONTROL, NodeRole.CONTROL]
    assert nx.is_directed_acyclic_graph(groum.graph)


def test_braceless_if_inside_loop_closes_at_the_same_point():
    source = (
        "class A {\n"
        "  void m(java.util.List<String> xs) {\n"
        "    for (String x : xs) if (x.isEmpty()) x.trim();\n"
        "  }\n"
        "}\n"
    )
    items, markers = extract_items(source)
    ends = [marker for marker in markers if marker.is_end]
    assert [marker.kind for marker in ends] == [ControlKind.IF_END, ControlKind.LOOP_END]
    assert (ends[0].line, ends[0].column) == (ends[1].line, ends[1].column)
    (groum,) = groums_from_items(items, markers)
    assert labels_of(groum) == ["LOOP", "IF", "String.isEmpty", "String.trim"]


def test_braceless_loop_in_else_branch():
    source = (
        "class A {\n"
        "  void m(boolean flag, java.util.List<String> xs) {\n"
        "    if (flag) System.gc(); else for (String x : xs) x.trim();\n"
        "  }\n"
        "}\n"
    )
    items, markers = extract_items(source)
    (groum,) = groums_from_items(items, markers)
    assert labels_of(groum) == ["IF", "System.gc", "LOOP", "String.trim"]


def test_equal_positions_close_innermost_first():
    path = "A.m()"
    markers = [
        ControlMarker(ControlKind.LOOP_BEGIN, path, 3, 5, depth=0),
        ControlMarker(ControlKind.LOOP_END, path, 3, 52, depth=0),
        ControlMarker(ControlKind.IF_BEGIN, path, 3, 25, depth=1),
        ControlMarker(ControlKind.IF_END, path, 3, 52, depth=1),
    ]
    groum = build_groum([], markers, path)
    assert labels_of(groum) == ["LOOP", "IF"]


def test_crossed_control_regions_are_rejected():
    path = "A.m()"
    markers = [
        ControlMarker(ControlKind.IF_BEGIN, path, 2),
        ControlMarker(ControlKind.LOOP_BEGIN, path, 3),
        ControlMarker(ControlKind.IF_END, path, 4),
        ControlMarker(ControlKind.LOOP_END, path, 5),
    ]
    with pytest.raises(MalformedControlNesting):
        build_groum([], markers, path)


def test_unclosed_region_is_rejected():
    with pytest.raises(MalformedControlNesting):
        build_groum([], [ControlMarker(ControlKind.LOOP_BEGIN, "A.m()", 2)], "A.m()")


@pytest.mark.parametrize(
    "kind, name, expected",
    [
        (ItemKind.CI, "java.io.File(String)", "File.<init>"),
        (ItemKind.CTI, "this(int)", "this.<init>"),
        (ItemKind.SCI, "super()", "super.<init>"),
        (ItemKind.MI, "aSTParser.setKind(int)", "ASTParser.setKind"),
        (ItemKind.MI, "org.eclipse.jdt.core.dom.ASTParser.newParser(int)", "ASTParser.newParser"),
        (ItemKind.MI, "unknown.open(String)", "unknown.open"),
        (ItemKind.MI, "helper()", "this.helper"),
        (ItemKind.FA, "obj.field_A", "Obj.field_A"),
    ],
)
def test_action_labels(kind, name, expected):
    assert action_label(SourceItem(kind, name, "A.m()", 1)) == expected


# ---- comparison ----

def test_exas_vector_counts_labels_and_edges():
    vector = exas_vector(chain("a", "b", "a"))
    assert vector[("a",)] == 2 and vector[("b",)] == 1
    assert vector[("a", "b")] == 1 and vector[("b", "a")] == 1


def random_groum(rng, size, labels="abc", density=0.4):
    nodes = tuple(GroumNode(i, rng.choice(labels)) for i in range(size))
    edges = frozenset((i, j) for i in range(size) for j in range(i + 1, size) if rng.random() < density)
    return Groum(nodes, edges)


def relabelled(groum, rng):
    order = list(range(len(groum)))
    rng.shuffle(order)
    mapping = dict(zip(range(len(groum)), order))
    return Groum.from_graph(nx.relabel_nodes(groum.graph, mapping))


def brute_isomorphic(g1, g2):
    if len(g1) != len(g2) or len(g1.edges) != len(g2.edges):
        return False
    first, second = g1.graph, g2.graph
    nodes1, nodes2 = sorted(first.nodes), sorted(second.nodes)
    for image in permutations(nodes2):
        mapping = dict(zip(nodes1, image))
        if all(first.nodes[n]["label"] == second.nodes[mapping[n]]["label"] for n in nodes1) and all(
            second.has_edge(mapping[u], mapping[v]) for u, v in first.edges
        ):
            return True
    return False


@pytest.mark.parametrize("seed", range(40))
def test_isomorphism_agrees_with_brute_force(seed):
    rng = random.Random(seed)
    size = rng.randint(1, 5)
    first = random_groum(rng, size, labels="ab")
    second = relabelled(first, rng) if rng.random() < 0.5 else random_groum(rng, size, labels="ab")
    assert label_isomorphic(first, second) == brute_isomorphic(first, second)
    if label_isomorphic(first, second):
        assert vector_key(first) == vector_key(second)


# ---- frequency ----

def test_disjoint_occurrences_count_separately():
    assert frequency([frozenset({0, 1}), frozenset({2, 3})]) == 2


def test_overlapping_occurrences_count_once():
    assert frequency([frozenset({0, 1}), frozenset({1, 2})]) == 1


def test_three_in_a_chain_count_two():
    assert frequency([frozenset({0, 1}), frozenset({1, 2}), frozenset({2, 3})]) == 2


def test_large_occurrence_sets_fall_back_to_a_lower_bound():
    occurrences = [frozenset({i, i + 1}) for i in range(30)]
    count, exact = independent_occurrences(occurrences)
    assert not exact
    assert count == 15


# ---- mining ----

def test_identical_chains():
    dataset = [chain("a", "b") for _ in range(3)]
    patterns = patt_explorer(dataset, 3)
    found = {tuple(labels_of(p.representative)): p.frequency for p in patterns}
    assert found == {("a",): 3, ("b",): 3, ("a", "b"): 3}
    assert all(p.exact for p in patterns)


def test_sigma_above_node_count_finds_nothing():
    assert patt_explorer([chain("a", "b")], 3) == []


def test_invalid_sigma():
    with pytest.raises(InvalidThreshold):
        patt_explorer([chain("a")], 0)


def test_max_size_bounds_growth():
    dataset = [chain("a", "b", "c") for _ in range(2)]
    assert max(p.size for p in patt_explorer(dataset, 2, max_size=2)) == 2
    assert max(p.size for p in patt_explorer(dataset, 2, max_size=None)) == 3


def brute_force_patterns(dataset, sigma):
    classes = []  # [representative graph, {graph index: [node sets]}]
    for index, groum in enumerate(dataset):
        graph = groum.graph
        for size in range(1, len(groum) + 1):
            for nodes in combinations(sorted(graph.nodes), size):
                sub = graph.subgraph(nodes)
                if not nx.is_weakly_connected(sub):
                    continue
                for known in classes:
                    if brute_isomorphic(Groum.from_graph(known[0]), Groum.from_graph(sub)):
                        known[1].setdefault(index, []).append(frozenset(nodes))
                        break
                else:
                    classes.append([sub, {index: [frozenset(nodes)]}])

    def most_disjoint(occurrences):
        for count in range(len(occurrences), 0, -1):
            for chosen in combinations(occurrences, count):
                if all(not a & b for a, b in combinations(chosen, 2)):
                    return count
        return 0

    result = []
    for graph, occurrences in classes:
        total = sum(most_disjoint(found) for found in occurrences.values())
        if total >= sigma:
            result.append((Groum.from_graph(graph), total))
    return result


@pytest.mark.parametrize("seed", range(50))
def test_mining_matches_brute_force(seed):
    rng = random.Random(seed)
    dataset = [random_groum(rng, rng.randint(1, 5)) for _ in range(rng.randint(1, 4))]
    sigma = rng.randint(1, 3)
    mined = patt_explorer(dataset, sigma, max_size=None)
    expected = brute_force_patterns(dataset, sigma)
    assert len(mined) == len(expected)
    for representative, total in expected:
        matches = [p for p in mined if brute_isomorphic(p.representative, representative)]
        assert len(matches) == 1
        assert matches[0].frequency == total
    for pattern in mined:
        for index, occurrences in pattern.occurrences.items():
            for nodes in occurrences:
                assert label_isomorphic(dataset[index].graph.subgraph(nodes), pattern.representative)


def test_astparser_corpus_groum_patterns(astparser_items):
    groums = groums_from_items(astparser_items)
    assert len(groums) == 12
    patterns = patt_explorer(groums, 7)
    largest = max(patterns, key=lambda p: p.size)
    assert largest.size == 5
    assert largest.frequency == 7
    report = format_pattern_report(patterns)
    assert "ASTParser.createAST" in report
    assert report.startswith("pattern 1 size=1")
