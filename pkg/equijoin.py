"""Equi-join queries with repeated relations, rewritten as natural joins.

Every atom gets its own attribute names through a signature mapping onto a
database relation. Attributes tied together by the equalities form classes;
the rewritten query extends each atom with the rest of its attributes' classes
so that the equalities become shared attributes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from networkx.utils import UnionFind

from coverjoin import Cover
from decomposition import Decomposition
from errors import InvalidDecomposition, MalformedSignature, UnknownAttribute
from hypergraph import Hypergraph
from planner import CoverJoinPlan, compute_cover
from relcore import Database, JoinQuery, Relation, key_getter, natural_join_bruteforce

logger = logging.getLogger("cover_engine")


@dataclass
class EquiJoinQuery:
    # atom symbol -> its own attributes
    atoms: Dict[str, Tuple[str, ...]]
    # atom symbol -> database relation symbol; need not be injective
    relation_of: Dict[str, str]
    # atom symbol -> atom attribute -> database attribute
    attribute_map: Dict[str, Dict[str, str]]
    equalities: List[Tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.atoms = {symbol: tuple(schema) for symbol, schema in self.atoms.items()}
        seen: Dict[str, str] = {}
        for symbol, schema in self.atoms.items():
            for attr in schema:
                if attr in seen:
                    raise MalformedSignature(f"attribute {attr} used by both {seen[attr]} and {symbol}")
                seen[attr] = symbol
            if symbol not in self.relation_of:
                raise MalformedSignature(f"atom {symbol} names no database relation")
            if set(self.attribute_map.get(symbol, {})) != set(schema):
                raise MalformedSignature(f"atom {symbol}: mapping does not cover exactly {list(schema)}")

    @property
    def attributes(self) -> Tuple[str, ...]:
        return tuple(a for schema in self.atoms.values() for a in schema)

    def check_signature(self, database: Database) -> None:
        """Each atom mapping must be a bijection onto its relation's schema"""
        for symbol, schema in self.atoms.items():
            target = database[self.relation_of[symbol]].schema
            images = [self.attribute_map[symbol][a] for a in schema]
            if len(set(images)) != len(images) or set(images) != set(target):
                raise MalformedSignature(
                    f"atom {symbol}: {dict(self.attribute_map[symbol])} is not a bijection onto {list(target)}"
                )


@dataclass
class EquivalenceClasses:
    classes: List[FrozenSet[str]]
    _index: Dict[str, FrozenSet[str]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {attr: cls for cls in self.classes for attr in cls}

    def class_of(self, attr: str) -> FrozenSet[str]:
        try:
            return self._index[attr]
        except KeyError:
            raise UnknownAttribute(f"unknown attribute {attr}")

    def plus(self, attrs: Iterable[str]) -> FrozenSet[str]:
        """All attributes equivalent to some attribute of `attrs`"""
        result: FrozenSet[str] = frozenset()
        for attr in attrs:
            result |= self.class_of(attr)
        return result

    def is_closed(self, attrs: Iterable[str]) -> bool:
        attrs = frozenset(attrs)
        return self.plus(attrs) == attrs


def closure(equalities: Sequence[Tuple[str, str]], attributes: Sequence[str]) -> EquivalenceClasses:
    known = set(attributes)
    uf = UnionFind(attributes)
    for a, b in equalities:
        unknown = sorted({a, b} - known)
        if unknown:
            raise UnknownAttribute(f"equality {a} = {b} uses undeclared {unknown}")
        uf.union(a, b)
    classes = sorted((frozenset(s) for s in uf.to_sets()), key=min)
    return EquivalenceClasses(classes=classes)


def equi_hypergraph(query: EquiJoinQuery) -> Hypergraph:
    """One edge per atom: the closure of its attributes"""
    classes = closure(query.equalities, query.attributes)
    return Hypergraph.from_edges(
        [classes.plus(schema) for schema in query.atoms.values()],
        labels=list(query.atoms),
        nodes=query.attributes,
    )


def _renamed(query: EquiJoinQuery, database: Database, symbol: str) -> Relation:
    schema = query.atoms[symbol]
    source = database[query.relation_of[symbol]]
    get = key_getter(source.schema, [query.attribute_map[symbol][a] for a in schema])
    return Relation.from_rows(schema, (get(row) for row in source.rows))


def to_natural_join(query: EquiJoinQuery, database: Database) -> Tuple[JoinQuery, Database]:
    query.check_signature(database)
    classes = closure(query.equalities, query.attributes)
    atoms: Dict[str, Tuple[str, ...]] = {}
    relations: Dict[str, Relation] = {}

    for symbol, schema in query.atoms.items():
        renamed = _renamed(query, database, symbol)

        # Drop rows that break an equality between two of the atom's own attributes
        groups = [[schema.index(a) for a in schema if a in cls] for cls in classes.classes]
        groups = [g for g in groups if len(g) > 1]
        kept = [row for row in renamed.rows if all(len({row[i] for i in g}) == 1 for g in groups)]

        added = sorted(classes.plus(schema) - set(schema))
        sources = [schema.index(min(a for a in schema if a in classes.class_of(b))) for b in added]
        extended = schema + tuple(added)
        rows = [row + tuple(row[i] for i in sources) for row in kept]
        atoms[symbol] = extended
        relations[symbol] = Relation.from_rows(extended, rows)
        logger.debug(
            f"equi-join atom {symbol}: {len(renamed)} rows, {len(renamed) - len(kept)} dropped, "
            f"{len(added)} copied columns"
        )

    return JoinQuery(atoms), Database(relations)


def require_closed_bags(query: EquiJoinQuery, decomposition: Decomposition) -> None:
    classes = closure(query.equalities, query.attributes)
    for bag in sorted(decomposition.bags):
        missing = sorted(classes.plus(decomposition.bags[bag]) - decomposition.bags[bag])
        if missing:
            raise InvalidDecomposition(f"bag {bag} lacks equivalent attributes {missing}")


def equi_cover(
    query: EquiJoinQuery,
    decomposition: Decomposition,
    database: Database,
    plan: Optional[Union[str, CoverJoinPlan]] = None,
    seed: Optional[int] = None,
    debug: Optional[bool] = None,
) -> Cover:
    require_closed_bags(query, decomposition)
    natural_query, natural_db = to_natural_join(query, database)
    return compute_cover(natural_query, decomposition, natural_db, plan=plan, seed=seed, debug=debug)


def equi_bruteforce(query: EquiJoinQuery, database: Database) -> Relation:
    """Selection by the equalities over the product of the renamed relations"""
    query.check_signature(database)
    closure(query.equalities, query.attributes)
    product = natural_join_bruteforce([_renamed(query, database, symbol) for symbol in query.atoms])
    checks = [(product.index(a), product.index(b)) for a, b in query.equalities]
    rows = [row for row in product.rows if all(row[i] == row[j] for i, j in checks)]
    return Relation.from_rows(query.attributes, (key_getter(product.schema, query.attributes)(r) for r in rows))
