"""Bag materialization with generic join, and reduction to a calibrated
acyclic instance over the bags of a decomposition."""

import bisect
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from decomposition import Decomposition, JoinTree, require_valid
from errors import UnknownAttribute
from relcore import Database, JoinQuery, Relation, Row, key_getter, project, reorder, semi_join_reduce

logger = logging.getLogger("cover_engine")


@dataclass
class _TrieNode:
    keys: List[str] = field(default_factory=list)
    children: List["_TrieNode"] = field(default_factory=list)


def _build_trie(rows: Sequence[Row], depth: int = 0) -> _TrieNode:
    node = _TrieNode()
    if rows and depth < len(rows[0]):
        for value, group in itertools.groupby(rows, key=lambda r: r[depth]):
            node.keys.append(value)
            node.children.append(_build_trie(list(group), depth + 1))
    return node


def _leapfrog(nodes: Sequence[_TrieNode]) -> Iterator[Tuple[str, List[int]]]:
    """Values present in every node's sorted key list, with their positions"""
    keys = [n.keys for n in nodes]
    if any(not k for k in keys):
        return
    pos = [0] * len(keys)
    while True:
        target = max(k[p] for k, p in zip(keys, pos))
        aligned = True
        for i, k in enumerate(keys):
            pos[i] = bisect.bisect_left(k, target, pos[i])
            if pos[i] == len(k):
                return
            if k[pos[i]] != target:
                aligned = False
        if aligned:
            yield target, list(pos)
            for i, k in enumerate(keys):
                pos[i] += 1
                if pos[i] == len(k):
                    return


def generic_join(query: JoinQuery, database: Database, attrs_order: Sequence[str]) -> Relation:
    """Worst-case optimal join: bind one attribute at a time by intersecting
    the sorted candidate values of every relation mentioning it."""
    order = list(attrs_order)
    if sorted(order) != sorted(query.attributes):
        raise UnknownAttribute(
            f"attribute order {order} is not a permutation of {list(query.attributes)}"
        )

    tries = []
    attr_sets = []
    for rel in query.relations_of(database):
        if not rel.schema:
            if not rel.rows:
                return Relation.empty(order)
            continue
        local = [a for a in order if a in rel.schema]
        getter = key_getter(rel.schema, local)
        rows = sorted(getter(row) for row in rel.rows)
        tries.append(_build_trie(rows))
        attr_sets.append(local)

    depth_of = [
        [i for i, local in enumerate(attr_sets) if attr in local] for attr in order
    ]
    out: List[Row] = []
    binding: List[str] = []

    def extend(depth: int, cursors: List[_TrieNode]) -> None:
        if depth == len(order):
            out.append(tuple(binding))
            return
        members = depth_of[depth]
        for value, positions in _leapfrog([cursors[i] for i in members]):
            following = list(cursors)
            for i, p in zip(members, positions):
                following[i] = cursors[i].children[p]
            binding.append(value)
            extend(depth + 1, following)
            binding.pop()

    extend(0, tries)
    logger.debug(f"generic join over {order}: {len(out)} rows")
    return Relation.from_rows(order, out)


def restrict_query(
    query: JoinQuery, database: Database, attrs
) -> Tuple[JoinQuery, Database]:
    """X-restriction: every atom cut down to its attributes inside `attrs`"""
    attrs = set(attrs)
    atoms = {}
    relations = {}
    for symbol, schema in query.atoms.items():
        kept = tuple(a for a in schema if a in attrs)
        if not kept:
            continue
        atoms[symbol] = kept
        relations[symbol] = project(reorder(database[symbol], schema), kept)
    return JoinQuery(atoms), Database(relations)


def calibrate(relations: Dict[str, Relation], decomposition: Decomposition) -> Dict[str, Relation]:
    """One bottom-up and one top-down semi-join pass over the rooted tree"""
    relations = dict(relations)
    if any(len(rel) == 0 for rel in relations.values()):
        logger.debug("empty bag relation, emptying every bag")
        return {bag: Relation.empty(rel.schema) for bag, rel in relations.items()}

    parents = decomposition.parents()
    order = decomposition.preorder()
    for child in reversed(order):
        if child in parents:
            parent = parents[child]
            relations[parent] = semi_join_reduce(relations[parent], relations[child])
    for child in order:
        if child in parents:
            relations[child] = semi_join_reduce(relations[child], relations[parents[child]])
    return relations


@dataclass
class AcyclicInstance:
    query: JoinQuery
    join_tree: JoinTree
    database: Database
    decomposition: Decomposition


def bag_join_tree(decomposition: Decomposition) -> JoinTree:
    """The decomposition tree read as a join tree over one atom per bag"""
    bag_query = JoinQuery({bag: decomposition.bag_schema(bag) for bag in sorted(decomposition.bags)})
    tree = nx.Graph()
    tree.add_nodes_from(sorted(decomposition.bags))
    for u, v in decomposition.tree.edges:
        tree.add_edge(u, v, label=decomposition.bags[u] & decomposition.bags[v])
    return JoinTree(query=bag_query, tree=tree)


def reduce_to_acyclic(
    query: JoinQuery,
    decomposition: Decomposition,
    database: Database,
    orders: Optional[Dict[str, Sequence[str]]] = None,
) -> AcyclicInstance:
    require_valid(query, decomposition)
    orders = orders or {}
    global_order = decomposition.attribute_order()

    bag_relations = {}
    for bag in sorted(decomposition.bags):
        bag_query, bag_database = restrict_query(query, database, decomposition.bags[bag])
        order = orders.get(bag) or [a for a in global_order if a in decomposition.bags[bag]]
        rel = generic_join(bag_query, bag_database, order)
        bag_relations[bag] = reorder(rel, decomposition.bag_schema(bag))
        logger.debug(f"bag {bag}: materialized {len(rel)} rows")

    bag_relations = calibrate(bag_relations, decomposition)
    logger.info(
        "calibrated bags: "
        + ", ".join(f"{bag}={len(rel)}" for bag, rel in sorted(bag_relations.items()))
    )

    join_tree = bag_join_tree(decomposition)
    return AcyclicInstance(
        query=join_tree.query,
        join_tree=join_tree,
        database=Database(bag_relations),
        decomposition=decomposition,
    )
