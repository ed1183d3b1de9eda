"""The binary cover-join operator and cover verification."""

import itertools
import logging
import random
from collections import Counter
from dataclasses import dataclass
from typing import List, Optional, Sequence, Set, Tuple

from config import get_settings
from decomposition import Decomposition
from errors import InconsistentInputs, SchemaMismatch, TooLarge
from hypergraph import all_minimal_edge_covers, result_hypergraph
from relcore import (
    Database,
    JoinQuery,
    Relation,
    Row,
    key_getter,
    natural_join_bruteforce,
    project,
)
from schemas import CoverVerdict

logger = logging.getLogger("cover_engine")


@dataclass
class Cover:
    relation: Relation
    decomposition: Decomposition

    def __len__(self) -> int:
        return len(self.relation)


@dataclass
class _Block:
    key: Row
    left: List[Row]
    right: List[Row]


class _JoinLayout:
    """Shared/extra attributes of a binary join and its block decomposition"""

    def __init__(self, left: Relation, right: Relation):
        self.shared = [a for a in left.schema if a in right.schema]
        self.extra = [a for a in right.schema if a not in left.schema]
        self.schema = left.schema + tuple(self.extra)
        self.left_key = key_getter(left.schema, self.shared)
        self.right_key = key_getter(right.schema, self.shared)
        self.right_extra = key_getter(right.schema, self.extra)
        self.left = left
        self.right = right

    def merge(self, left_row: Row, right_row: Row) -> Row:
        return left_row + self.right_extra(right_row)

    def blocks(self) -> Tuple[List[_Block], int]:
        """Matching key blocks by one co-scan, plus the number of dangling keys"""
        # Stable sorts keep each block in relation order
        lgroups = [
            (k, list(g))
            for k, g in itertools.groupby(sorted(self.left.rows, key=self.left_key), key=self.left_key)
        ]
        rgroups = [
            (k, list(g))
            for k, g in itertools.groupby(sorted(self.right.rows, key=self.right_key), key=self.right_key)
        ]
        blocks: List[_Block] = []
        dangling = 0
        i = j = 0
        while i < len(lgroups) and j < len(rgroups):
            lkey, rkey = lgroups[i][0], rgroups[j][0]
            if lkey < rkey:
                dangling += 1
                i += 1
            elif rkey < lkey:
                dangling += 1
                j += 1
            else:
                blocks.append(_Block(key=lkey, left=lgroups[i][1], right=rgroups[j][1]))
                i += 1
                j += 1
        dangling += (len(lgroups) - i) + (len(rgroups) - j)
        return blocks, dangling


def cover_join(
    left: Relation,
    right: Relation,
    seed: Optional[int] = None,
    debug: Optional[bool] = None,
) -> Relation:
    """A minimum-size cover of left ⋈ right over the bags {sgn(left), sgn(right)}.

    Within a block the larger side's j-th row pairs with the smaller side's j-th
    row; surplus rows all pair with the smaller side's last row.
    """
    layout = _JoinLayout(left, right)
    blocks, dangling = layout.blocks()
    if debug is None:
        debug = get_settings().debug
    if debug and dangling:
        raise InconsistentInputs(
            f"{dangling} dangling join keys between {left.schema} and {right.schema}"
        )

    rng = random.Random(seed) if seed is not None else None
    rows: List[Row] = []
    for block in blocks:
        lrows, rrows = block.left, block.right
        if rng is not None:
            lrows, rrows = list(lrows), list(rrows)
            rng.shuffle(lrows)
            rng.shuffle(rrows)
        if len(lrows) >= len(rrows):
            last = len(rrows) - 1
            rows.extend(layout.merge(l, rrows[min(j, last)]) for j, l in enumerate(lrows))
        else:
            last = len(lrows) - 1
            rows.extend(layout.merge(lrows[min(j, last)], r) for j, r in enumerate(rrows))

    logger.debug(
        f"cover join {len(left)} x {len(right)} rows in {len(blocks)} blocks -> {len(rows)} rows"
    )
    return Relation.from_rows(layout.schema, rows)


def cover_join_all(
    left: Relation,
    right: Relation,
    max_block_nodes: Optional[int] = None,
    minimum_only: bool = False,
) -> Set[Relation]:
    """Every cover of left ⋈ right, as the product of per-block minimal edge covers.

    With minimum_only, each block contributes only its minimum-size covers.
    """
    bound = max_block_nodes if max_block_nodes is not None else get_settings().max_block_nodes
    layout = _JoinLayout(left, right)
    blocks, _ = layout.blocks()

    per_block: List[List[Tuple[Row, ...]]] = []
    for block in blocks:
        if len(block.left) > bound or len(block.right) > bound:
            raise TooLarge(
                f"block {block.key} has {len(block.left)}x{len(block.right)} rows, bound {bound}"
            )
        joined = Relation.from_rows(
            layout.schema, [layout.merge(l, r) for l in block.left for r in block.right]
        )
        graph = result_hypergraph(joined, [left.schema, right.schema])
        options = [
            graph.rel(edge_ids).rows
            for edge_ids in all_minimal_edge_covers(graph.base, max_edges=len(graph.base.edges))
        ]
        if minimum_only:
            smallest = min(len(o) for o in options)
            options = [o for o in options if len(o) == smallest]
        per_block.append(options)

    covers = {
        Relation.from_rows(layout.schema, itertools.chain.from_iterable(choice))
        for choice in itertools.product(*per_block)
    }
    logger.debug(f"{len(covers)} covers over {len(blocks)} blocks")
    return covers


def _row_dict(schema: Sequence[str], row: Row) -> dict:
    return dict(zip(schema, row))


def is_cover(
    relation: Relation, query: JoinQuery, decomposition: Decomposition, database: Database
) -> CoverVerdict:
    """Check result preservation per bag, then minimality row by row.

    A missing bag tuple is reported as the greatest one absent from the
    relation's projection.
    """
    if set(relation.schema) != set(query.attributes) or len(relation.schema) != len(query.attributes):
        raise SchemaMismatch(
            f"cover schema {list(relation.schema)} differs from query attributes {list(query.attributes)}"
        )
    result = natural_join_bruteforce(query.relations_of(database))

    bags = sorted(decomposition.bags)
    for bag in bags:
        attrs = decomposition.bag_schema(bag)
        expected = set(project(result, attrs).rows)
        got = set(project(relation, attrs).rows)
        missing = sorted(expected - got)
        if missing:
            return CoverVerdict(
                kind="NotResultPreserving", bag=list(attrs), witness=_row_dict(attrs, missing[-1])
            )
        surplus = sorted(got - expected)
        if surplus:
            return CoverVerdict(
                kind="NotResultPreserving", bag=list(attrs), witness=_row_dict(attrs, surplus[0])
            )

    getters = [key_getter(relation.schema, decomposition.bag_schema(bag)) for bag in bags]
    counts = [Counter(get(row) for row in relation.rows) for get in getters]
    for row in relation.rows:
        if all(count[get(row)] >= 2 for get, count in zip(getters, counts)):
            return CoverVerdict(kind="NotMinimal", witness=_row_dict(relation.schema, row))
    return CoverVerdict(kind="Cover")


def cover_size_bounds(
    query: JoinQuery, decomposition: Decomposition, database: Database
) -> Tuple[int, int]:
    """Every cover has between max_B and sum_B of |π_B Q(D)| rows"""
    result = natural_join_bruteforce(query.relations_of(database))
    sizes = [len(project(result, decomposition.bag_schema(bag))) for bag in decomposition.bags]
    return max(sizes, default=0), sum(sizes)
