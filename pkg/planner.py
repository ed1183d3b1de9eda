import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Set, Tuple, Union

import networkx as nx

from config import get_settings
from coverjoin import Cover, cover_join, cover_join_all
from decomposition import Decomposition, JoinTree
from errors import SpecParseError, TooLarge, UnsoundPlan
from materialize import AcyclicInstance, reduce_to_acyclic
from relcore import Database, JoinQuery, Relation, reorder

logger = logging.getLogger("cover_engine")


@dataclass(frozen=True)
class Leaf:
    symbol: str

    def leaves(self) -> List[str]:
        return [self.symbol]

    def render(self) -> str:
        return self.symbol


@dataclass(frozen=True)
class Join:
    left: "CoverJoinPlan"
    right: "CoverJoinPlan"
    # Join-tree edge whose removal separates the operands
    split: Optional[Tuple[str, str]] = field(default=None, compare=False)

    def leaves(self) -> List[str]:
        return self.left.leaves() + self.right.leaves()

    def render(self) -> str:
        return f"({self.left.render()}*{self.right.render()})"


CoverJoinPlan = Union[Leaf, Join]
CoverOperator = Callable[[Relation, Relation], Relation]

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\*)|([A-Za-z0-9_.:-]+))")


def parse_plan(text: str) -> CoverJoinPlan:
    """Parse `((R1*R2)*R3)`-style plan expressions"""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            raise SpecParseError(f"bad plan expression at offset {pos}: {text!r}")
        tokens.append(next(g for g in match.groups() if g is not None))
        pos = match.end()

    def parse(i: int) -> Tuple[CoverJoinPlan, int]:
        if i >= len(tokens):
            raise SpecParseError(f"unexpected end of plan: {text!r}")
        if tokens[i] == "(":
            left, i = parse(i + 1)
            if i >= len(tokens) or tokens[i] != "*":
                raise SpecParseError(f"expected '*' in plan: {text!r}")
            right, i = parse(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise SpecParseError(f"expected ')' in plan: {text!r}")
            return Join(left, right), i + 1
        if tokens[i] in (")", "*"):
            raise SpecParseError(f"unexpected {tokens[i]!r} in plan: {text!r}")
        return Leaf(tokens[i]), i + 1

    plan, end = parse(0)
    if end != len(tokens):
        raise SpecParseError(f"trailing input in plan: {text!r}")
    return plan


def enumerate_plans(join_tree: JoinTree, max_nodes: Optional[int] = None) -> Set[CoverJoinPlan]:
    """All plans up to commutativity of each split; the operand holding the
    smaller endpoint of the split edge goes left."""
    bound = max_nodes if max_nodes is not None else get_settings().max_plan_nodes
    nodes = frozenset(join_tree.tree.nodes)
    if len(nodes) > bound:
        raise TooLarge(f"{len(nodes)} join tree nodes exceed the plan bound {bound}")

    memo: Dict[FrozenSet[str], List[CoverJoinPlan]] = {}

    def plans(subset: FrozenSet[str]) -> List[CoverJoinPlan]:
        if subset in memo:
            return memo[subset]
        if len(subset) == 1:
            memo[subset] = [Leaf(next(iter(subset)))]
            return memo[subset]
        subtree = nx.Graph(join_tree.tree.subgraph(subset))
        result: List[CoverJoinPlan] = []
        for u, v in sorted(tuple(sorted(e)) for e in subtree.edges):
            subtree.remove_edge(u, v)
            left = frozenset(nx.node_connected_component(subtree, u))
            subtree.add_edge(u, v)
            right = subset - left
            for lp in plans(left):
                for rp in plans(right):
                    result.append(Join(lp, rp, split=(u, v)))
        memo[subset] = result
        return result

    return set(plans(nodes))


def validate_plan(plan: CoverJoinPlan, join_tree: JoinTree) -> bool:
    tree = join_tree.tree
    leaves = plan.leaves()
    if Counter(leaves) != Counter(list(tree.nodes)):
        return False

    def connected(part: Set[str]) -> bool:
        return nx.is_connected(tree.subgraph(part))

    def check(node: CoverJoinPlan) -> bool:
        if isinstance(node, Leaf):
            return True
        left, right = set(node.left.leaves()), set(node.right.leaves())
        if not connected(left) or not connected(right):
            return False
        crossing = [e for e in tree.edges if (e[0] in left) != (e[1] in left) and (set(e) <= left | right)]
        if len(crossing) != 1:
            return False
        return check(node.left) and check(node.right)

    return check(plan)


def default_plan(join_tree: JoinTree) -> CoverJoinPlan:
    """Left-deep plan adding nodes in depth-first order from the root"""
    order = join_tree.preorder()
    parents = {child: parent for parent, child in nx.bfs_edges(join_tree.tree, join_tree.root)}
    plan: CoverJoinPlan = Leaf(order[0])
    for node in order[1:]:
        plan = Join(plan, Leaf(node), split=(parents[node], node))
    return plan


def execute_plan(
    plan: CoverJoinPlan,
    instance: AcyclicInstance,
    validate: bool = True,
    seed: Optional[int] = None,
    operator: Optional[CoverOperator] = None,
    debug: Optional[bool] = None,
) -> Cover:
    if validate and not validate_plan(plan, instance.join_tree):
        raise UnsoundPlan(f"plan {plan.render()} does not follow the join tree")

    def combine(left: Relation, right: Relation) -> Relation:
        if operator is not None:
            return operator(left, right)
        return cover_join(left, right, seed=seed, debug=debug)

    def run(node: CoverJoinPlan) -> Relation:
        if isinstance(node, Leaf):
            return instance.database[node.symbol]
        return combine(run(node.left), run(node.right))

    relation = run(plan)
    logger.debug(f"plan {plan.render()} produced {len(relation)} rows")
    return Cover(relation=relation, decomposition=instance.decomposition)


def enumerate_plan_covers(
    plan: CoverJoinPlan,
    instance: AcyclicInstance,
    minimum_only: bool = False,
    max_block_nodes: Optional[int] = None,
) -> Set[Relation]:
    """Every relation the plan can return when each operator may pick any cover"""

    def run(node: CoverJoinPlan) -> Set[Relation]:
        if isinstance(node, Leaf):
            return {instance.database[node.symbol]}
        outcomes: Set[Relation] = set()
        for left in run(node.left):
            for right in run(node.right):
                outcomes |= cover_join_all(
                    left, right, max_block_nodes=max_block_nodes, minimum_only=minimum_only
                )
        return outcomes

    return run(plan)


def compute_cover(
    query: JoinQuery,
    decomposition: Decomposition,
    database: Database,
    plan: Optional[Union[str, CoverJoinPlan]] = None,
    seed: Optional[int] = None,
    debug: Optional[bool] = None,
) -> Cover:
    """Reduce to a calibrated acyclic instance, then run a cover-join plan"""
    instance = reduce_to_acyclic(query, decomposition, database)
    if isinstance(plan, str):
        plan = parse_plan(plan)
    if plan is None:
        plan = default_plan(instance.join_tree)
    cover = execute_plan(plan, instance, seed=seed, debug=debug)
    relation = reorder(cover.relation, decomposition.attributes)
    logger.info(f"cover of {len(relation)} rows via {plan.render()}")
    return Cover(relation=relation, decomposition=decomposition)
