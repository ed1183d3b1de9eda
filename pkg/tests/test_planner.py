import random

import networkx as nx
import pytest

from coverjoin import cover_join, cover_join_all, cover_size_bounds, is_cover
from decomposition import (
    JoinTree,
    build_decomposition,
    enumerate_join_trees,
    gyo_join_tree,
    join_tree_to_decomposition,
)
from errors import SpecParseError, TooLarge, UnsoundPlan
from hypergraph import query_hypergraph
from materialize import reduce_to_acyclic
from planner import (
    Join,
    Leaf,
    compute_cover,
    default_plan,
    enumerate_plan_covers,
    enumerate_plans,
    execute_plan,
    parse_plan,
    validate_plan,
)
from relcore import Database, JoinQuery, Relation
from support import (
    acyclic_setup,
    bowtie_database,
    declared_setup,
    random_path_database,
    random_star_database,
    rel,
)


def chain_instance(relations):
    """Instance over a chain join tree R1 - R2 - ... in declaration order"""
    database = Database(relations)
    query = JoinQuery.from_database(database)
    symbols = list(relations)
    decomposition = build_decomposition(
        query_hypergraph(query),
        {symbol: relation.schema for symbol, relation in relations.items()},
        list(zip(symbols, symbols[1:])),
    )
    return query, decomposition, database, reduce_to_acyclic(query, decomposition, database)


def test_parse_plan():
    plan = parse_plan("((R1*R2)*R3)")
    assert plan == Join(Join(Leaf("R1"), Leaf("R2")), Leaf("R3"))
    assert plan.leaves() == ["R1", "R2", "R3"]
    assert parse_plan(" ( R1 * ( R2*R3 ) ) ").render() == "(R1*(R2*R3))"
    assert parse_plan("bag_1") == Leaf("bag_1")


@pytest.mark.parametrize("text", ["", "(R1*R2", "(R1 R2)", "R1*R2", "(*R1)", "(R1*R2) $"])
def test_parse_plan_errors(text):
    with pytest.raises(SpecParseError):
        parse_plan(text)


def test_enumerate_plans_of_figure1(figure1):
    instance = reduce_to_acyclic(*figure1)
    plans = enumerate_plans(instance.join_tree)
    assert sorted(p.render() for p in plans) == ["((R1*R2)*R3)", "(R1*(R2*R3))"]
    assert all(validate_plan(p, instance.join_tree) for p in plans)


def test_enumerate_plans_of_longer_path():
    path = JoinQuery({"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("C", "D"), "R4": ("D", "E")})
    join_tree = gyo_join_tree(path)
    plans = enumerate_plans(join_tree)
    # binary bracketings of four leaves
    assert len(plans) == 5
    assert all(validate_plan(p, join_tree) for p in plans)


def test_enumerate_plans_of_star_tree():
    query = JoinQuery({"R0": ("H",), "R1": ("H", "A"), "R2": ("H", "B"), "R3": ("H", "C")})
    tree = nx.Graph()
    for leaf in ("R1", "R2", "R3"):
        tree.add_edge("R0", leaf, label=frozenset({"H"}))
    join_tree = JoinTree(query=query, tree=tree)
    plans = enumerate_plans(join_tree)
    assert len(plans) == 6
    assert all(validate_plan(p, join_tree) for p in plans)


def test_enumerate_plans_single_node_and_bound():
    single = nx.Graph()
    single.add_node("R")
    assert enumerate_plans(JoinTree(query=JoinQuery({"R": ("A",)}), tree=single)) == {Leaf("R")}
    with pytest.raises(TooLarge):
        enumerate_plans(gyo_join_tree(JoinQuery({"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("C", "D")})), max_nodes=2)


def test_default_plan_is_left_deep(figure1):
    instance = reduce_to_acyclic(*figure1)
    assert default_plan(instance.join_tree).render() == "((R1*R2)*R3)"


def test_default_plan_is_valid():
    path = gyo_join_tree(JoinQuery({"R1": ("A", "B"), "R2": ("B", "C"), "R3": ("C", "D")}))
    assert validate_plan(default_plan(path), path)
    single = nx.Graph()
    single.add_node("R")
    lone = JoinTree(query=JoinQuery({"R": ("A",)}), tree=single)
    assert validate_plan(default_plan(lone), lone)
    assert validate_plan(Leaf("R"), lone)


def test_validate_plan_rejects_missing_and_repeated_leaves(figure1):
    instance = reduce_to_acyclic(*figure1)
    assert not validate_plan(parse_plan("(R1*R2)"), instance.join_tree)
    assert not validate_plan(parse_plan("((R1*R2)*R2)"), instance.join_tree)
    with pytest.raises(UnsoundPlan):
        execute_plan(parse_plan("(R1*R2)"), instance)


def test_unsound_plan_loses_the_result():
    _, _, _, instance = chain_instance(
        {
            "R1": rel("A,B", "a,b1", "a,b2"),
            "R2": rel("B,C", "b1,c1", "b2,c2"),
            "R3": rel("C,D", "c1,d", "c2,d"),
        }
    )
    plan = parse_plan("((R1*R3)*R2)")
    assert not validate_plan(plan, instance.join_tree)
    with pytest.raises(UnsoundPlan):
        execute_plan(plan, instance)

    # R1 and R3 share nothing, so this pairing is a legitimate cover of their product
    crossed = rel("A,B,C,D", "a,b1,c2,d", "a,b2,c1,d")
    assert crossed in cover_join_all(instance.database["R1"], instance.database["R3"])
    calls = []

    def forced(left, right):
        calls.append(left.schema)
        return crossed if len(calls) == 1 else cover_join(left, right)

    cover = execute_plan(plan, instance, validate=False, operator=forced)
    assert len(calls) == 2
    assert len(cover) == 0


def test_figure1_plans_reach_the_same_covers(figure1):
    query, decomposition, database = figure1
    instance = reduce_to_acyclic(query, decomposition, database)
    k1 = rel("A,B,C,D", "a1,b1,c1,d2", "a2,b1,c1,d1", "a1,b2,c2,d2", "a2,b2,c2,d1")
    k2 = rel("A,B,C,D", "a1,b1,c1,d2", "a2,b1,c1,d1", "a1,b2,c2,d1", "a2,b2,c2,d2")
    left_deep = enumerate_plan_covers(parse_plan("((R1*R2)*R3)"), instance)
    right_deep = enumerate_plan_covers(parse_plan("(R1*(R2*R3))"), instance)
    assert left_deep == right_deep
    assert len(left_deep) == 4
    assert {k1, k2} <= left_deep
    for cover in left_deep:
        assert is_cover(cover, query, decomposition, database).is_cover


def test_some_covers_need_no_plan_at_all():
    database = Database(
        {"R1": rel("A", "a1", "a2"), "R2": rel("B", "b1", "b2"), "R3": rel("C", "c1", "c2")}
    )
    query = JoinQuery.from_database(database)
    target = rel("A,B,C", "a1,b1,c1", "a1,b2,c2", "a2,b1,c2")

    reachable = set()
    join_trees = enumerate_join_trees(query)
    assert len(join_trees) == 3
    for join_tree in join_trees:
        decomposition = join_tree_to_decomposition(join_tree)
        assert is_cover(target, query, decomposition, database).is_cover
        instance = reduce_to_acyclic(query, decomposition, database)
        for plan in enumerate_plans(instance.join_tree):
            reachable |= enumerate_plan_covers(plan, instance)
    assert reachable
    assert target not in reachable


def test_plan_choice_changes_reachable_covers():
    _, _, _, instance = chain_instance(
        {"R1": rel("A", "a1", "a2"), "R2": rel("B", "b1", "b2"), "R3": rel("C", "c1", "c2", "c3")}
    )
    target = rel("A,B,C", "a1,b1,c1", "a2,b2,c2", "a1,b2,c3")
    assert target in enumerate_plan_covers(parse_plan("(R1*(R2*R3))"), instance)
    assert target not in enumerate_plan_covers(parse_plan("((R1*R2)*R3)"), instance)


def test_deterministic_plan_versus_minimum_block_covers():
    query, decomposition, database, instance = chain_instance(
        {
            "R1": rel("A,B", "a1,b1", "a2,b1", "a3,b1"),
            "R2": rel("B,C", "b1,c1", "b1,c2"),
            "R3": rel("C,D", "c1,d1", "c2,d1", "c2,d2"),
        }
    )
    small = rel("A,B,C,D", "a1,b1,c1,d1", "a2,b1,c2,d1", "a3,b1,c2,d2")
    larger = rel("A,B,C,D", "a1,b1,c1,d1", "a2,b1,c1,d1", "a3,b1,c2,d1", "a3,b1,c2,d2")

    cover = compute_cover(query, decomposition, database)
    assert cover.relation == small

    minimum = enumerate_plan_covers(parse_plan("((R1*R2)*R3)"), instance, minimum_only=True)
    assert {small, larger} <= minimum
    assert is_cover(larger, query, decomposition, database).is_cover


def test_compute_cover_with_plan_text(figure1):
    query, decomposition, database = figure1
    cover = compute_cover(query, decomposition, database, plan="(R1*(R2*R3))")
    assert cover.relation.schema == ("A", "B", "C", "D")
    assert len(cover) == 4
    assert is_cover(cover.relation, query, decomposition, database).is_cover


def test_compute_cover_of_empty_database():
    database = Database({"R": Relation.empty(["A", "B"]), "S": rel("B,C", "b1,c1")})
    query, decomposition = acyclic_setup(database)
    cover = compute_cover(query, decomposition, database)
    assert len(cover) == 0
    assert cover.relation.schema == ("A", "B", "C")


def test_every_plan_and_cover_choice_is_sound():
    rng = random.Random(41)
    for _ in range(25):
        if rng.random() < 0.5:
            database = random_path_database(rng, length=rng.randint(2, 3), domain=2, size=3)
        else:
            database = random_star_database(rng, arms=3, domain=2, size=3)
        query, decomposition = acyclic_setup(database)
        instance = reduce_to_acyclic(query, decomposition, database)
        for plan in enumerate_plans(instance.join_tree):
            for cover in enumerate_plan_covers(plan, instance, max_block_nodes=12):
                assert is_cover(cover, query, decomposition, database).is_cover


@pytest.mark.parametrize("shape", ["path", "star", "bowtie"])
def test_compute_cover_randomized(shape):
    rng = random.Random(shape)
    for _ in range(60):
        if shape == "path":
            database = random_path_database(rng, length=rng.randint(1, 4))
            query, decomposition = acyclic_setup(database)
        elif shape == "star":
            database = random_star_database(rng, arms=rng.randint(2, 4))
            query, decomposition = acyclic_setup(database)
        else:
            database = bowtie_database(rng, domain=3, size=rng.randint(2, 8))
            query, decomposition = declared_setup(
                database, {"left": "A,B,C", "right": "A,D,E"}, [("left", "right")]
            )
        lower, upper = cover_size_bounds(query, decomposition, database)
        for seed in (None, rng.randrange(1000)):
            cover = compute_cover(query, decomposition, database, seed=seed)
            assert is_cover(cover.relation, query, decomposition, database).is_cover
            assert lower <= len(cover) <= upper
