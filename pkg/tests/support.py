import os
import random
from typing import Dict, List, Sequence, Tuple

from decomposition import Decomposition, build_decomposition, gyo_join_tree, join_tree_to_decomposition
from hypergraph import query_hypergraph
from relcore import Database, JoinQuery, Relation

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "fixtures")


def fixture_path(*parts: str) -> str:
    return os.path.join(FIXTURES, *parts)


def rel(schema: str, *rows: str) -> Relation:
    """rel("A,B", "a1,b1", "a2,b1")"""
    return Relation.from_rows(schema.split(","), [row.split(",") for row in rows])


def rows(*values: str) -> set:
    return {tuple(v.split(",")) for v in values}


def figure1_database() -> Database:
    return Database(
        {
            "R1": rel("A,B", "a1,b1", "a1,b2", "a2,b1", "a2,b2", "a1,b3"),
            "R2": rel("B,C", "b1,c1", "b2,c2", "b3,c3", "b4,c4"),
            "R3": rel("C,D", "c1,d1", "c1,d2", "c2,d1", "c2,d2", "c4,d1"),
        }
    )


def acyclic_setup(database: Database) -> Tuple[JoinQuery, Decomposition]:
    query = JoinQuery.from_database(database)
    return query, join_tree_to_decomposition(gyo_join_tree(query))


def declared_setup(
    database: Database, bags: Dict[str, str], edges: Sequence[Tuple[str, str]] = ()
) -> Tuple[JoinQuery, Decomposition]:
    query = JoinQuery.from_database(database)
    decomposition = build_decomposition(
        query_hypergraph(query), {name: attrs.split(",") for name, attrs in bags.items()}, edges
    )
    return query, decomposition


def random_relation(rng: random.Random, schema: str, domain: int, size: int) -> Relation:
    attrs = schema.split(",")
    return Relation.from_rows(
        attrs,
        [[f"{a.lower()}{rng.randrange(domain)}" for a in attrs] for _ in range(size)],
    )


def random_path_database(rng: random.Random, length: int = 3, domain: int = 3, size: int = 6) -> Database:
    """R1(X0,X1) ... Rn(Xn-1,Xn)"""
    return Database(
        {f"R{i + 1}": random_relation(rng, f"X{i},X{i + 1}", domain, rng.randint(1, size)) for i in range(length)}
    )


def random_star_database(rng: random.Random, arms: int = 3, domain: int = 3, size: int = 6) -> Database:
    """R1(H,Y1) ... Rn(H,Yn) around a shared hub attribute"""
    return Database(
        {f"R{i + 1}": random_relation(rng, f"H,Y{i + 1}", domain, rng.randint(1, size)) for i in range(arms)}
    )


def bowtie_database(rng: random.Random, domain: int = 3, size: int = 6) -> Database:
    """Two triangles sharing the attribute A"""
    return Database(
        {
            "R": random_relation(rng, "A,B", domain, size),
            "S": random_relation(rng, "B,C", domain, size),
            "T": random_relation(rng, "A,C", domain, size),
            "U": random_relation(rng, "A,D", domain, size),
            "V": random_relation(rng, "D,E", domain, size),
            "W": random_relation(rng, "A,E", domain, size),
        }
    )


def as_set(relation: Relation, schema: Sequence[str]) -> set:
    get = relation.getter(schema)
    return {get(row) for row in relation.rows}


def canonical(relations) -> List[frozenset]:
    return sorted((frozenset(r.rows) for r in relations), key=sorted)
