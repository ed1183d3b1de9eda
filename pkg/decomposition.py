import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import networkx as nx

from config import get_settings
from errors import InvalidDecomposition, TooLarge, UncoverableNode
from hypergraph import FractionalEdgeCover, Hypergraph, fractional_edge_cover, query_hypergraph
from relcore import JoinQuery
from schemas import ValidityReport

logger = logging.getLogger("cover_engine")


def _children_map(tree: nx.Graph, root: str) -> Dict[str, List[str]]:
    children: Dict[str, List[str]] = {node: [] for node in tree.nodes}
    for parent, child in nx.bfs_edges(tree, root):
        children[parent].append(child)
    for kids in children.values():
        kids.sort()
    return children


def _preorder(tree: nx.Graph, root: str) -> List[str]:
    children = _children_map(tree, root)
    order: List[str] = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(reversed(children[node]))
    return order


def _connected_within(tree: nx.Graph, nodes: Iterable[str]) -> bool:
    nodes = list(nodes)
    return bool(nodes) and nx.is_connected(tree.subgraph(nodes))


@dataclass
class Decomposition:
    """Tree of bags with one fractional edge cover per bag"""

    hypergraph: Hypergraph
    tree: nx.Graph
    bags: Dict[str, FrozenSet[str]]
    covers: Dict[str, FractionalEdgeCover]

    @property
    def root(self) -> str:
        return min(self.bags)

    @property
    def attributes(self) -> Tuple[str, ...]:
        present = set().union(*self.bags.values()) if self.bags else set()
        ordered = [a for a in self.hypergraph.nodes if a in present]
        return tuple(ordered + sorted(present - set(ordered)))

    def bag_schema(self, bag: str) -> Tuple[str, ...]:
        return tuple(sorted(self.bags[bag]))

    def children(self) -> Dict[str, List[str]]:
        return _children_map(self.tree, self.root)

    def parents(self) -> Dict[str, str]:
        return {child: parent for parent, child in nx.bfs_edges(self.tree, self.root)}

    def preorder(self) -> List[str]:
        return _preorder(self.tree, self.root)

    def postorder(self) -> List[str]:
        return list(reversed(self.preorder()))

    def attribute_order(self) -> List[str]:
        """Attributes by first appearance in a depth-first walk over the bags"""
        order: List[str] = []
        for bag in self.preorder():
            for attr in self.bag_schema(bag):
                if attr not in order:
                    order.append(attr)
        return order


@dataclass
class JoinTree:
    query: JoinQuery
    tree: nx.Graph

    @property
    def root(self) -> str:
        return min(self.tree.nodes)

    @property
    def labels(self) -> Dict[Tuple[str, str], FrozenSet[str]]:
        return {tuple(sorted((u, v))): data["label"] for u, v, data in self.tree.edges(data=True)}

    def preorder(self) -> List[str]:
        return _preorder(self.tree, self.root)

    def is_valid(self) -> bool:
        if set(self.tree.nodes) != set(self.query.atoms) or not nx.is_tree(self.tree):
            return False
        for u, v, data in self.tree.edges(data=True):
            if data.get("label") != frozenset(self.query.atoms[u]) & frozenset(self.query.atoms[v]):
                return False
        for attr in self.query.attributes:
            holders = [s for s, schema in self.query.atoms.items() if attr in schema]
            if not _connected_within(self.tree, holders):
                return False
        return True


def build_decomposition(
    hypergraph: Hypergraph,
    bags: Dict[str, Iterable[str]],
    tree_edges: Iterable[Tuple[str, str]],
) -> Decomposition:
    """Assemble a decomposition, computing a minimum-weight cover for every bag"""
    bags = {name: frozenset(attrs) for name, attrs in bags.items()}
    if not bags:
        raise InvalidDecomposition("a decomposition needs at least one bag")
    tree = nx.Graph()
    tree.add_nodes_from(sorted(bags))
    for u, v in tree_edges:
        if u not in bags or v not in bags:
            raise InvalidDecomposition(f"tree edge {u}-{v} names an undeclared bag")
        tree.add_edge(u, v)

    covers = {}
    for name, attrs in bags.items():
        try:
            covers[name] = fractional_edge_cover(hypergraph.restrict(attrs))
        except UncoverableNode as e:
            raise InvalidDecomposition(f"bag {name}: {e.detail}")
    return Decomposition(hypergraph=hypergraph, tree=tree, bags=bags, covers=covers)


def validate_decomposition(
    query: Union[JoinQuery, Hypergraph], decomposition: Decomposition
) -> ValidityReport:
    hypergraph = query_hypergraph(query) if isinstance(query, JoinQuery) else query
    report = ValidityReport()
    tree = decomposition.tree
    bags = decomposition.bags

    if not bags or not nx.is_tree(tree) or set(tree.nodes) != set(bags):
        report.violations.append("tree: bags do not form a tree")

    nodes = set(hypergraph.nodes)
    for name in sorted(bags):
        unknown = sorted(bags[name] - nodes)
        if unknown:
            report.violations.append(f"bag {name}: unknown attributes {unknown}")

    for edge_id in sorted(hypergraph.edges):
        members = hypergraph.edges[edge_id]
        if not any(members <= attrs for attrs in bags.values()):
            label = hypergraph.labels.get(edge_id, str(edge_id))
            report.violations.append(f"coverage: edge {label} {sorted(members)} is in no bag")

    if tree.number_of_nodes():
        for attr in hypergraph.nodes:
            holders = [name for name, attrs in bags.items() if attr in attrs]
            if holders and not _connected_within(tree, holders):
                report.violations.append(f"connectivity: bags holding {attr} are disconnected")

    for name in sorted(bags):
        restricted = hypergraph.restrict(bags[name])
        cover = decomposition.covers.get(name)
        if cover is None or not cover.covers(restricted):
            report.violations.append(f"cover: bag {name} has no feasible edge cover")
            continue
        try:
            optimum = fractional_edge_cover(restricted).weight
        except UncoverableNode as e:
            report.violations.append(f"cover: bag {name}: {e.detail}")
            continue
        if cover.weight != optimum:
            report.violations.append(
                f"cover: bag {name} weight {cover.weight} exceeds optimum {optimum}"
            )

    for violation in report.violations:
        logger.debug(f"decomposition violation: {violation}")
    return report


def width(decomposition: Decomposition) -> Fraction:
    report = validate_decomposition(decomposition.hypergraph, decomposition)
    if not report.ok:
        raise InvalidDecomposition("; ".join(report.violations))
    return max(cover.weight for cover in decomposition.covers.values())


def require_valid(query: Union[JoinQuery, Hypergraph], decomposition: Decomposition) -> None:
    report = validate_decomposition(query, decomposition)
    if not report.ok:
        raise InvalidDecomposition("; ".join(report.violations))


def gyo_join_tree(query: JoinQuery) -> Optional[JoinTree]:
    """Join tree by GYO ear removal, or None when the query is cyclic.

    The smallest-named ear goes first and hangs off its smallest-named witness.
    """
    schemas = {symbol: frozenset(schema) for symbol, schema in query.atoms.items()}
    remaining = sorted(schemas)
    tree = nx.Graph()
    tree.add_nodes_from(remaining)

    while len(remaining) > 1:
        for ear in remaining:
            others = [s for s in remaining if s != ear]
            shared = {a for a in schemas[ear] if any(a in schemas[s] for s in others)}
            witnesses = [s for s in others if shared <= schemas[s]]
            if witnesses:
                witness = witnesses[0]
                logger.debug(f"GYO: removing ear {ear} with witness {witness}")
                tree.add_edge(ear, witness, label=schemas[ear] & schemas[witness])
                remaining.remove(ear)
                break
        else:
            logger.debug(f"GYO: no ear among {remaining}, query is cyclic")
            return None

    return JoinTree(query=query, tree=tree)


def enumerate_join_trees(query: JoinQuery, max_nodes: Optional[int] = None) -> List[JoinTree]:
    """Every join tree of the query, as spanning trees of the complete graph"""
    bound = max_nodes if max_nodes is not None else get_settings().max_plan_nodes
    symbols = sorted(query.atoms)
    if len(symbols) > bound:
        raise TooLarge(f"{len(symbols)} relations exceed the join tree bound {bound}")
    if len(symbols) == 1:
        single = nx.Graph()
        single.add_node(symbols[0])
        return [JoinTree(query=query, tree=single)]

    complete = nx.complete_graph(symbols)
    trees = []
    for spanning in nx.SpanningTreeIterator(complete):
        tree = nx.Graph()
        tree.add_nodes_from(symbols)
        for u, v in spanning.edges:
            tree.add_edge(u, v, label=frozenset(query.atoms[u]) & frozenset(query.atoms[v]))
        candidate = JoinTree(query=query, tree=tree)
        if candidate.is_valid():
            trees.append(candidate)
    trees.sort(key=lambda jt: sorted(tuple(sorted(e)) for e in jt.tree.edges))
    return trees


def join_tree_to_decomposition(join_tree: JoinTree) -> Decomposition:
    hypergraph = query_hypergraph(join_tree.query)
    bags = {symbol: frozenset(schema) for symbol, schema in join_tree.query.atoms.items()}
    covers = {}
    for edge_id, symbol in enumerate(join_tree.query.atoms):
        weights = {edge_id: Fraction(1)} if bags[symbol] else {}
        covers[symbol] = FractionalEdgeCover(weights=weights)
    tree = nx.Graph()
    tree.add_nodes_from(sorted(bags))
    tree.add_edges_from(join_tree.tree.edges)
    return Decomposition(hypergraph=hypergraph, tree=tree, bags=bags, covers=covers)
