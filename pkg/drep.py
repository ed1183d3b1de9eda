"""Multimap d-representations of covers and constant-delay enumeration."""

import bisect
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx

from coverjoin import Cover, is_cover
from decomposition import Decomposition, require_valid
from errors import NotACover
from relcore import Database, JoinQuery, Relation, Row, key_getter, project

logger = logging.getLogger("cover_engine")


@dataclass
class DTree:
    tree: nx.DiGraph
    # Emission order; every attribute comes after its ancestors
    order: List[str]
    keys: Dict[str, Tuple[str, ...]]

    @property
    def roots(self) -> List[str]:
        return [a for a in self.order if self.tree.in_degree(a) == 0]

    def parent(self, attr: str) -> Optional[str]:
        preds = list(self.tree.predecessors(attr))
        return preds[0] if preds else None

    def preorder(self) -> List[str]:
        rank = {a: i for i, a in enumerate(self.order)}
        result: List[str] = []
        stack = list(reversed(self.roots))
        while stack:
            attr = stack.pop()
            result.append(attr)
            stack.extend(sorted(self.tree.successors(attr), key=rank.get, reverse=True))
        return result


def derive_dtree(decomposition: Decomposition) -> DTree:
    """Walk bags top-down; a bag's new attributes (in name order) hang below
    the last emitted attribute of that bag. key(A) is the set of A's ancestors
    inside the bag that introduced A."""
    require_valid(decomposition.hypergraph, decomposition)
    tree = nx.DiGraph()
    order: List[str] = []
    keys: Dict[str, Tuple[str, ...]] = {}

    for bag in decomposition.preorder():
        members = decomposition.bags[bag]
        for attr in sorted(members):
            if attr in order:
                continue
            co_occurring = [a for a in order if a in members]
            tree.add_node(attr)
            if co_occurring:
                tree.add_edge(co_occurring[-1], attr)
            ancestors = nx.ancestors(tree, attr)
            keys[attr] = tuple(a for a in order if a in ancestors and a in members)
            order.append(attr)
            logger.debug(f"d-tree: {attr} under {co_occurring[-1] if co_occurring else '-'}, key {keys[attr]}")

    return DTree(tree=tree, order=order, keys=keys)


@dataclass
class MultimapDRep:
    dtree: DTree
    # attribute -> key tuple -> sorted distinct values
    maps: Dict[str, Dict[Tuple[str, ...], List[str]]]
    schema: Tuple[str, ...]
    nonempty: bool = True

    @property
    def entries(self) -> int:
        return sum(len(values) for m in self.maps.values() for values in m.values())

    def listing(self, attr: str) -> Relation:
        key = self.dtree.keys[attr]
        rows = [k + (v,) for k, values in self.maps[attr].items() for v in values]
        return Relation.from_rows(key + (attr,), rows)


@dataclass
class DelayMonitor:
    """Counts multimap probes between consecutive emitted tuples"""

    current: int = 0
    max_gap: int = 0
    emitted: int = 0
    gaps: List[int] = field(default_factory=list)

    def probe(self) -> None:
        self.current += 1

    def emit(self) -> None:
        self.max_gap = max(self.max_gap, self.current)
        self.gaps.append(self.current)
        self.current = 0
        self.emitted += 1


def cover_to_drep(
    cover: Cover,
    decomposition: Optional[Decomposition] = None,
    verify_with: Optional[Tuple[JoinQuery, Database]] = None,
) -> MultimapDRep:
    decomposition = decomposition or cover.decomposition
    relation = cover.relation
    if verify_with is not None:
        query, database = verify_with
        verdict = is_cover(relation, query, decomposition, database)
        if not verdict.is_cover:
            raise NotACover(verdict.render())

    dtree = derive_dtree(decomposition)
    order = dtree.preorder()
    maps: Dict[str, Dict[Tuple[str, ...], List[str]]] = {attr: {} for attr in order}
    key_of = {attr: relation.getter(dtree.keys[attr]) for attr in order}
    position = {attr: relation.index(attr) for attr in order}

    # Sorted in d-tree order, most inserts are appends
    for row in sorted(relation.rows, key=relation.getter(order)):
        for attr in order:
            values = maps[attr].setdefault(key_of[attr](row), [])
            value = row[position[attr]]
            if not values or values[-1] < value:
                values.append(value)
            else:
                slot = bisect.bisect_left(values, value)
                if slot == len(values) or values[slot] != value:
                    values.insert(slot, value)

    drep = MultimapDRep(dtree=dtree, maps=maps, schema=relation.schema, nonempty=bool(relation.rows))
    logger.debug(f"d-representation with {drep.entries} entries from {len(relation)} cover rows")
    return drep


def enumerate_result(drep: MultimapDRep, monitor: Optional[DelayMonitor] = None) -> Iterator[Row]:
    """Stream every result tuple once, by nested iteration down the d-tree"""
    order = drep.dtree.preorder()
    n = len(order)
    if n == 0:
        if drep.nonempty:
            yield ()
        return
    if not drep.nonempty:
        return

    keys = [drep.dtree.keys[attr] for attr in order]
    maps = [drep.maps[attr] for attr in order]
    output_positions = [order.index(attr) for attr in drep.schema]
    current: Dict[str, str] = {}
    values: List[List[str]] = [[] for _ in range(n)]
    cursor = [0] * n

    def load(depth: int) -> None:
        if monitor is not None:
            monitor.probe()
        values[depth] = maps[depth].get(tuple(current[k] for k in keys[depth]), [])
        cursor[depth] = 0

    chosen: List[str] = [""] * n
    depth = 0
    load(0)
    while depth >= 0:
        if cursor[depth] < len(values[depth]):
            chosen[depth] = values[depth][cursor[depth]]
            current[order[depth]] = chosen[depth]
            cursor[depth] += 1
            if depth == n - 1:
                if monitor is not None:
                    monitor.emit()
                yield tuple(chosen[i] for i in output_positions)
            else:
                depth += 1
                load(depth)
        else:
            depth -= 1


def count_result(
    cover: Cover,
    decomposition: Optional[Decomposition] = None,
    verify_with: Optional[Tuple[JoinQuery, Database]] = None,
) -> int:
    """|Q(D)| from the cover's bag projections, aggregated bottom-up over the tree"""
    decomposition = decomposition or cover.decomposition
    relation = cover.relation
    if verify_with is not None:
        query, database = verify_with
        verdict = is_cover(relation, query, decomposition, database)
        if not verdict.is_cover:
            raise NotACover(verdict.render())
    if not relation.rows:
        return 0

    children = decomposition.children()
    counts: Dict[str, Dict[Row, int]] = {}
    for bag in decomposition.postorder():
        schema = decomposition.bag_schema(bag)
        local = {row: 1 for row in project(relation, schema).rows}
        for child in children[bag]:
            shared = sorted(decomposition.bags[bag] & decomposition.bags[child])
            child_key = key_getter(decomposition.bag_schema(child), shared)
            ranked = sorted(counts[child].items(), key=lambda item: child_key(item[0]))
            totals = {
                k: sum(c for _, c in group)
                for k, group in itertools.groupby(ranked, key=lambda item: child_key(item[0]))
            }
            parent_key = key_getter(schema, shared)
            for row in local:
                local[row] *= totals.get(parent_key(row), 0)
        counts[bag] = local
    return sum(counts[decomposition.root].values())


def render_drep(drep: MultimapDRep) -> str:
    lines: List[str] = []
    for attr in drep.dtree.preorder():
        key = drep.dtree.keys[attr]
        lines.append(f"[{attr}] key=({','.join(key)})")
        for k in sorted(drep.maps[attr]):
            for value in drep.maps[attr][k]:
                lines.append(f"({','.join(k)}) -> {value}")
    return "\n".join(lines) + "\n"
