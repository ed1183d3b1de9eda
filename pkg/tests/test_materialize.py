import random

import pytest

from errors import InvalidDecomposition, UnknownAttribute
from materialize import bag_join_tree, calibrate, generic_join, reduce_to_acyclic, restrict_query
from relcore import Database, JoinQuery, is_consistent, natural_join_bruteforce, project
from support import (
    acyclic_setup,
    as_set,
    bowtie_database,
    declared_setup,
    figure1_database,
    random_path_database,
    rel,
    rows,
)


def test_generic_join_matches_bruteforce_on_triangle():
    database = Database(
        {
            "R": rel("A,B", "a1,b1", "a1,b2", "a2,b1"),
            "S": rel("B,C", "b1,c1", "b2,c1", "b1,c2"),
            "T": rel("A,C", "a1,c1", "a2,c2", "a1,c2"),
        }
    )
    query = JoinQuery.from_database(database)
    result = generic_join(query, database, ["A", "B", "C"])
    assert result.schema == ("A", "B", "C")
    assert set(result.rows) == rows("a1,b1,c1", "a1,b1,c2", "a1,b2,c1", "a2,b1,c2")


def test_generic_join_output_follows_order():
    database = figure1_database()
    query = JoinQuery.from_database(database)
    result = generic_join(query, database, ["D", "C", "B", "A"])
    assert result.schema == ("D", "C", "B", "A")
    assert result == natural_join_bruteforce(query.relations_of(database))


def test_generic_join_rejects_bad_order():
    database = figure1_database()
    with pytest.raises(UnknownAttribute):
        generic_join(JoinQuery.from_database(database), database, ["A", "B", "C"])


def test_generic_join_randomized_against_bruteforce():
    rng = random.Random(7)
    for _ in range(100):
        database = bowtie_database(rng, domain=3, size=rng.randint(1, 7))
        query = JoinQuery.from_database(database)
        order = list(query.attributes)
        rng.shuffle(order)
        assert generic_join(query, database, order) == natural_join_bruteforce(query.relations_of(database))


def test_restrict_query_drops_disjoint_atoms():
    database = figure1_database()
    query, restricted = restrict_query(JoinQuery.from_database(database), database, {"A", "B"})
    assert query.atoms == {"R1": ("A", "B"), "R2": ("B",)}
    assert set(restricted["R2"].rows) == rows("b1", "b2", "b3", "b4")


def test_calibrate_empties_all_bags_when_one_is_empty(figure1):
    _, decomposition, database = figure1
    relations = {"R1": database["R1"], "R2": rel("B,C"), "R3": database["R3"]}
    calibrated = calibrate(relations, decomposition)
    assert all(len(r) == 0 for r in calibrated.values())


def test_reduce_figure1(figure1):
    query, decomposition, database = figure1
    instance = reduce_to_acyclic(query, decomposition, database)
    bags = instance.database.relations
    assert set(bags["R1"].rows) == rows("a1,b1", "a1,b2", "a2,b1", "a2,b2")
    assert set(bags["R2"].rows) == rows("b1,c1", "b2,c2")
    assert set(bags["R3"].rows) == rows("c1,d1", "c1,d2", "c2,d1", "c2,d2")
    assert instance.join_tree.is_valid()


def test_reduce_rejects_invalid_decomposition():
    database = figure1_database()
    query, decomposition = declared_setup(database, {"b1": "A,B", "b2": "C,D"}, [("b1", "b2")])
    with pytest.raises(InvalidDecomposition):
        reduce_to_acyclic(query, decomposition, database)


def test_reduced_bags_are_globally_consistent():
    rng = random.Random(11)
    for _ in range(100):
        database = bowtie_database(rng, domain=3, size=rng.randint(1, 8))
        query, decomposition = declared_setup(
            database, {"left": "A,B,C", "right": "A,D,E"}, [("left", "right")]
        )
        instance = reduce_to_acyclic(query, decomposition, database)
        result = natural_join_bruteforce(query.relations_of(database))
        for bag, relation in instance.database.relations.items():
            assert as_set(relation, relation.schema) == as_set(project(result, relation.schema), relation.schema)
        left, right = instance.database["left"], instance.database["right"]
        assert is_consistent(left, right)


def test_reduced_path_bags_match_projections():
    rng = random.Random(3)
    for _ in range(100):
        database = random_path_database(rng, length=rng.randint(1, 4))
        query, decomposition = acyclic_setup(database)
        instance = reduce_to_acyclic(query, decomposition, database)
        result = natural_join_bruteforce(query.relations_of(database))
        for bag in decomposition.bags:
            schema = decomposition.bag_schema(bag)
            assert instance.database[bag] == project(result, schema)


def test_bag_join_tree_labels(figure1):
    _, decomposition, _ = figure1
    join_tree = bag_join_tree(decomposition)
    assert join_tree.labels == {("R1", "R2"): frozenset({"B"}), ("R2", "R3"): frozenset({"C"})}
    assert join_tree.is_valid()
