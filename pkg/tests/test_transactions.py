import random

import pytest
from lxml import etree

from esdp.extractor import ItemKey, ItemKind, SourceItem, extract_items
from esdp.transactions import (
    Granularity,
    SequenceDatabase,
    build_sequence_db,
    build_transactions,
    class_path,
    transactions_to_xml,
)

TWO_METHODS = """package pkg;

class Cls {
    private Connection conn;

    void open(String filename) {
        File file = new File(filename);
        file.createNewFile();
    }

    void close() {
        conn.close();
    }
}
"""


def _items(source, label="Cls.java"):
    return extract_items(source, label)[0]


def test_one_record_per_method_block():
    records = build_transactions(_items(TWO_METHODS))
    assert [r.block_id for r in records] == ["pkg.Cls.close()", "pkg.Cls.open(String)"]
    opened = records[1].items
    assert ItemKey(ItemKind.VD, "File") in opened
    assert ItemKey(ItemKind.CI, "File(String)") in opened
    assert ItemKey(ItemKind.MI, "file.createNewFile()") in opened


def test_class_granularity_adds_declarations():
    (record,) = build_transactions(_items(TWO_METHODS), Granularity.CLASS)
    assert record.block_id == "pkg.Cls"
    assert ItemKey(ItemKind.FD, "Connection") in record.items
    assert ItemKey(ItemKind.MI, "connection.close()") in record.items


def test_sequences_follow_line_order_even_when_items_arrive_shuffled():
    items = _items(TWO_METHODS)
    shuffled = list(items)
    random.Random(7).shuffle(shuffled)
    assert build_sequence_db(shuffled) == build_sequence_db(items)
    opened = [r for r in build_sequence_db(items) if r.sid == "pkg.Cls.open(String)"][0]
    assert opened.items[0] == ItemKey(ItemKind.MD, "open(String)")
    assert [key.kind for key in opened.items] == [ItemKind.MD, ItemKind.VD, ItemKind.CI, ItemKind.MI]


def test_transaction_is_the_set_of_its_sequence(astparser_items):
    transactions = {r.block_id: r.items for r in build_transactions(astparser_items)}
    db = build_sequence_db(astparser_items)
    assert set(transactions) == {r.sid for r in db}
    for record in db:
        assert transactions[record.sid] == frozenset(record.items)
    in_methods = sum(1 for item in astparser_items if item.in_method)
    assert sum(len(record) for record in db) == in_methods


def test_fixture_corpus_has_twelve_method_sequences(astparser_db):
    assert len(astparser_db) == 12
    assert astparser_db.corpus_label == "astparser"
    assert all(record.items[0].kind is ItemKind.MD for record in astparser_db)


def test_colliding_block_ids_get_a_suffix():
    source = "class A { void m() { System.gc(); } }\n"
    items = _items(source, "one/A.java") + _items(source, "two/A.java")
    assert [r.sid for r in build_sequence_db(items)] == ["A.m()", "A.m()#2"]


def test_sequence_db_is_method_only():
    with pytest.raises(ValueError):
        build_sequence_db([], Granularity.CLASS)


def test_from_sequences_numbers_records():
    a, b = ItemKey(ItemKind.MI, "a()"), ItemKey(ItemKind.MI, "b()")
    db = SequenceDatabase.from_sequences([[a, b], [b]], "toy")
    assert [r.sid for r in db] == ["s1", "s2"]
    assert db.sequences == [(a, b), (b,)]


@pytest.mark.parametrize(
    "enclosing, expected",
    [("pkg.Cls.open(String)", "pkg.Cls"), ("pkg.Cls", "pkg.Cls"), ("m()", "m")],
)
def test_class_path(enclosing, expected):
    assert class_path(enclosing) == expected


def test_transactions_xml_document():
    items = [
        SourceItem(ItemKind.MD, "m()", "A.m()", 1),
        SourceItem(ItemKind.MI, "unknown.run()", "A.m()", 2),
    ]
    data = transactions_to_xml(build_transactions(items), "toy")
    assert data.startswith(b"<?xml version='1.0' encoding='UTF-8'?>")
    root = etree.fromstring(data)
    assert root.tag == "esdp-transactions"
    assert root.get("corpus") == "toy"
    (transaction,) = root.findall("transaction")
    assert transaction.get("block") == "A.m()"
    assert [(i.get("kind"), i.text) for i in transaction.findall("item")] == [
        ("MD", "m()"),
        ("MI", "unknown.run()"),
    ]
