import io

import pytest

from errors import SchemaMismatch, SpecParseError, UnknownAttribute
from relcore import (
    Database,
    JoinQuery,
    Relation,
    database_size,
    is_consistent,
    load_relation_csv,
    natural_join_bruteforce,
    project,
    read_relation_csv,
    relation_to_csv,
    reorder,
    semi_join_reduce,
)
from support import figure1_database, fixture_path, rel, rows


def test_from_rows_sorts_and_dedupes():
    relation = rel("A,B", "a2,b1", "a1,b2", "a2,b1", "a1,b1")
    assert relation.rows == (("a1", "b1"), ("a1", "b2"), ("a2", "b1"))


def test_sort_key_prefix_orders_rows():
    relation = Relation.from_rows(["A", "B"], [("a1", "b2"), ("a2", "b1")], sort_key=["B"])
    assert relation.rows == (("a2", "b1"), ("a1", "b2"))
    assert relation.sort_key == ("B",)


def test_duplicate_attribute_rejected():
    with pytest.raises(SchemaMismatch):
        Relation.from_rows(["A", "A"], [])


def test_wrong_arity_rejected():
    with pytest.raises(SchemaMismatch):
        Relation.from_rows(["A", "B"], [("a1",)])


def test_unknown_sort_key_rejected():
    with pytest.raises(UnknownAttribute):
        Relation.from_rows(["A"], [], sort_key=["B"])


def test_equality_ignores_column_order():
    left = rel("A,B", "a1,b1", "a2,b2")
    right = rel("B,A", "b2,a2", "b1,a1")
    assert left == right
    assert hash(left) == hash(right)
    assert left != rel("A,B", "a1,b1")


def test_membership_follows_schema_order():
    relation = rel("A,B", "a1,b1", "a2,b2")
    assert ("a1", "b1") in relation
    assert ["a2", "b2"] in relation
    assert ("b1", "a1") not in relation
    assert ("a1", "b2") not in relation
    # repeated lookups read the same cached rows
    assert all(("a2", "b2") in relation for _ in range(3))
    assert ("a1", "b1") not in rel("A,B")


def test_utf8_byte_order():
    # Code point order agrees with UTF-8 byte order
    relation = rel("A", "é", "z", "a")
    values = [row[0] for row in relation.rows]
    assert values == sorted(values, key=lambda v: v.encode("utf-8"))


def test_project_set_and_sequence():
    relation = rel("A,B,C", "a1,b1,c1", "a2,b1,c1", "a1,b2,c1")
    assert project(relation, {"C", "B"}).schema == ("B", "C")
    assert project(relation, ["C", "B"]).schema == ("C", "B")
    assert set(project(relation, ["B"]).rows) == rows("b1", "b2")
    with pytest.raises(UnknownAttribute):
        project(relation, ["D"])


def test_nullary_projection():
    relation = rel("A", "a1", "a2")
    assert project(relation, []).rows == ((),)
    assert project(Relation.empty(["A"]), []).rows == ()


def test_reorder():
    relation = rel("A,B", "a1,b1")
    assert reorder(relation, ["B", "A"]).rows == (("b1", "a1"),)
    with pytest.raises(SchemaMismatch):
        reorder(relation, ["A", "C"])


def test_natural_join_figure1():
    database = figure1_database()
    query = JoinQuery.from_database(database)
    result = natural_join_bruteforce(query.relations_of(database))
    assert result.schema == ("A", "B", "C", "D")
    assert len(result) == 8
    assert ("a1", "b3", "c3", "d1") not in result


def test_empty_input_empties_join():
    result = natural_join_bruteforce([rel("A,B", "a1,b1"), Relation.empty(["B", "C"])])
    assert len(result) == 0
    assert result.schema == ("A", "B", "C")


def test_semi_join_reduce():
    left = rel("A,B", "a1,b1", "a1,b3")
    right = rel("B,C", "b1,c1", "b2,c2")
    reduced = semi_join_reduce(left, right)
    assert set(reduced.rows) == rows("a1,b1")
    assert not is_consistent(left, right)
    assert is_consistent(reduced, semi_join_reduce(right, reduced))


def test_semi_join_without_shared_attributes():
    left = rel("A", "a1")
    assert semi_join_reduce(left, rel("B", "b1")) is left
    assert len(semi_join_reduce(left, Relation.empty(["B"]))) == 0


def test_database_size_and_lookup():
    database = figure1_database()
    assert database_size(database) == 14
    assert database.size == 14
    with pytest.raises(UnknownAttribute):
        database["R9"]


def test_query_attributes_in_first_appearance_order():
    query = JoinQuery({"S": ("B", "C"), "R": ("A", "B")})
    assert query.attributes == ("B", "C", "A")


def test_relations_of_aligns_columns():
    database = Database({"R": rel("B,A", "b1,a1")})
    query = JoinQuery({"R": ("A", "B")})
    assert query.relations_of(database)[0].schema == ("A", "B")
    with pytest.raises(SchemaMismatch):
        JoinQuery({"R": ("A", "C")}).relations_of(database)


def test_load_fixture_csv():
    relation = load_relation_csv(fixture_path("figure1", "r1.csv"))
    assert relation.schema == ("A", "B")
    assert len(relation) == 5


def test_csv_dedupes_and_quotes():
    relation = read_relation_csv(io.StringIO('A,B\na1,"b,1"\na1,"b,1"\na2,b2'))
    assert len(relation) == 2
    assert ("a1", "b,1") in relation
    assert relation_to_csv(relation) == 'A,B\na1,"b,1"\na2,b2\n'


@pytest.mark.parametrize(
    "text",
    [
        "",
        "A,A\na,b\n",
        "A,B\na1\n",
    ],
)
def test_malformed_csv(text):
    with pytest.raises(SpecParseError):
        read_relation_csv(io.StringIO(text))


def test_missing_file():
    with pytest.raises(SpecParseError):
        load_relation_csv(fixture_path("nope.csv"))
