import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

from config import get_settings
from errors import SchemaNotCovered, TooLarge, UncoverableNode
from relcore import JoinQuery, Relation, Row, key_getter
from simplex import maximize

logger = logging.getLogger("cover_engine")


@dataclass
class Hypergraph:
    """Multi-hypergraph; edge ids are stable insertion indices"""

    nodes: Tuple[Hashable, ...]
    edges: Dict[int, FrozenSet[Hashable]]
    labels: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(self.nodes)
        node_set = set(self.nodes)
        for edge_id, members in self.edges.items():
            if not set(members) <= node_set:
                raise SchemaNotCovered(f"edge {edge_id} uses nodes outside the hypergraph")

    @classmethod
    def from_edges(
        cls,
        edges: Sequence[Iterable[Hashable]],
        labels: Optional[Sequence[str]] = None,
        nodes: Optional[Sequence[Hashable]] = None,
    ) -> "Hypergraph":
        edge_map = {i: frozenset(e) for i, e in enumerate(edges)}
        if nodes is None:
            ordered: List[Hashable] = []
            for e in edges:
                for v in e:
                    if v not in ordered:
                        ordered.append(v)
            nodes = ordered
        label_map = {i: name for i, name in enumerate(labels)} if labels else {}
        return cls(nodes=tuple(nodes), edges=edge_map, labels=label_map)

    def incident(self, node: Hashable) -> List[int]:
        return [i for i, members in self.edges.items() if node in members]

    def restrict(self, keep: Iterable[Hashable]) -> "Hypergraph":
        """Induced hypergraph on `keep`; edges keep their ids, empty ones vanish"""
        keep = set(keep)
        nodes = tuple(v for v in self.nodes if v in keep)
        edges = {}
        for i, members in self.edges.items():
            inter = members & keep
            if inter:
                edges[i] = frozenset(inter)
        labels = {i: name for i, name in self.labels.items() if i in edges}
        return Hypergraph(nodes=nodes, edges=edges, labels=labels)


@dataclass
class FractionalEdgeCover:
    weights: Dict[int, Fraction]

    @property
    def weight(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def covers(self, hypergraph: Hypergraph) -> bool:
        if any(w < 0 for w in self.weights.values()):
            return False
        for v in hypergraph.nodes:
            total = sum(
                (self.weights.get(i, Fraction(0)) for i in hypergraph.incident(v)),
                Fraction(0),
            )
            if total < 1:
                return False
        return True


@dataclass
class ResultHypergraph:
    base: Hypergraph
    # node id -> (attributes of the part, projected tuple)
    node_tuples: Dict[int, Tuple[Tuple[str, ...], Row]]
    # edge id -> row of the relation
    edge_tuples: Dict[int, Row]
    schema: Tuple[str, ...]

    def rel(self, edge_ids: Iterable[int]) -> Relation:
        return Relation.from_rows(self.schema, (self.edge_tuples[i] for i in edge_ids))


def query_hypergraph(query: JoinQuery) -> Hypergraph:
    return Hypergraph.from_edges(
        [schema for schema in query.atoms.values()],
        labels=list(query.atoms),
        nodes=query.attributes,
    )


def result_hypergraph(relation: Relation, parts: Sequence[Iterable[str]]) -> ResultHypergraph:
    """One node per distinct part-projection, one edge per row"""
    part_sets = [set(p) for p in parts]
    parts = [tuple(a for a in relation.schema if a in p) for p in part_sets]
    if any(len(p) != len(s) for p, s in zip(parts, part_sets)):
        raise SchemaNotCovered(f"parts mention attributes outside {list(relation.schema)}")
    covered = set().union(*parts) if parts else set()
    if covered != set(relation.schema):
        raise SchemaNotCovered(
            f"parts cover {sorted(covered)} but the schema is {list(relation.schema)}"
        )

    node_tuples: Dict[int, Tuple[Tuple[str, ...], Row]] = {}
    node_ids: List[Dict[Row, int]] = []
    for attrs in parts:
        getter = key_getter(relation.schema, attrs)
        ids: Dict[Row, int] = {}
        for values in sorted({getter(row) for row in relation.rows}):
            ids[values] = len(node_tuples)
            node_tuples[len(node_tuples)] = (attrs, values)
        node_ids.append(ids)

    edges: Dict[int, FrozenSet[int]] = {}
    edge_tuples: Dict[int, Row] = {}
    getters = [key_getter(relation.schema, attrs) for attrs in parts]
    for i, row in enumerate(relation.rows):
        edges[i] = frozenset(ids[get(row)] for ids, get in zip(node_ids, getters))
        edge_tuples[i] = row

    base = Hypergraph(nodes=tuple(node_tuples), edges=edges)
    return ResultHypergraph(
        base=base, node_tuples=node_tuples, edge_tuples=edge_tuples, schema=relation.schema
    )


def fractional_edge_cover(hypergraph: Hypergraph) -> FractionalEdgeCover:
    """An optimal fractional edge cover.

    Solved through the dual packing program (node weights, at most 1 per edge),
    whose optimal prices are the edge weights.
    """
    for v in hypergraph.nodes:
        if not hypergraph.incident(v):
            raise UncoverableNode(f"node {v} lies in no edge")
    if not hypergraph.nodes:
        return FractionalEdgeCover(weights={})

    edge_ids = sorted(hypergraph.edges)
    matrix = [
        [1 if v in hypergraph.edges[i] else 0 for v in hypergraph.nodes] for i in edge_ids
    ]
    result = maximize([1] * len(hypergraph.nodes), matrix, [1] * len(edge_ids))
    weights = {i: w for i, w in zip(edge_ids, result.dual) if w != 0}
    return FractionalEdgeCover(weights=weights)


def fractional_edge_cover_number(hypergraph: Hypergraph) -> Fraction:
    return fractional_edge_cover(hypergraph).weight


def is_edge_cover(hypergraph: Hypergraph, edge_ids: Iterable[int]) -> bool:
    covered = set()
    for i in edge_ids:
        covered |= hypergraph.edges[i]
    return covered >= set(hypergraph.nodes)


def is_minimal_edge_cover(hypergraph: Hypergraph, edge_ids: Iterable[int]) -> bool:
    chosen = set(edge_ids)
    if not is_edge_cover(hypergraph, chosen):
        return False
    count: Dict[Hashable, int] = {}
    for i in chosen:
        for v in hypergraph.edges[i]:
            count[v] = count.get(v, 0) + 1
    # Every chosen edge needs a node nobody else covers
    return all(any(count[v] == 1 for v in hypergraph.edges[i]) for i in chosen)


def all_minimal_edge_covers(
    hypergraph: Hypergraph, max_edges: Optional[int] = None
) -> Set[FrozenSet[int]]:
    """Every minimal edge cover, by include/exclude search over edges in id order.

    A branch dies as soon as a chosen edge loses its last private node or a node
    has no remaining edge to cover it.
    """
    bound = max_edges if max_edges is not None else get_settings().max_oracle_edges
    if len(hypergraph.edges) > bound:
        raise TooLarge(f"{len(hypergraph.edges)} edges exceed the oracle bound {bound}")

    edge_ids = sorted(hypergraph.edges)
    if any(not hypergraph.incident(v) for v in hypergraph.nodes):
        return set()

    last: Dict[Hashable, int] = {}
    for pos, i in enumerate(edge_ids):
        for v in hypergraph.edges[i]:
            last[v] = pos
    count = {v: 0 for v in hypergraph.nodes}
    chosen: List[int] = []
    found: Set[FrozenSet[int]] = set()

    def search(pos: int) -> None:
        if pos == len(edge_ids):
            if all(count[v] > 0 for v in hypergraph.nodes):
                found.add(frozenset(chosen))
            return
        edge = hypergraph.edges[edge_ids[pos]]

        for v in edge:
            count[v] += 1
        chosen.append(edge_ids[pos])
        if all(any(count[v] == 1 for v in hypergraph.edges[i]) for i in chosen):
            search(pos + 1)
        chosen.pop()
        for v in edge:
            count[v] -= 1

        if not any(count[v] == 0 and last[v] == pos for v in edge):
            search(pos + 1)

    search(0)
    logger.debug(f"{len(found)} minimal edge covers over {len(edge_ids)} edges")
    return found
