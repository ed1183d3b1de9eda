"""Line-oriented job specs.

One directive per line, `#` starts a comment:

    relation R1 A,B r1.csv       schema optional; defaults to the CSV header
    query R1 R2 R3               atoms of a natural join; defaults to every relation
    bag b1 A,B
    edge b1 b2
    plan ((b1*b2)*b3)
    atom R1 uses R map A1->A, A2->B
    eq A2 = A3
    semiring sumproduct-rational
    factor f1 A,B f1.csv
    free A,B
    bound C:sum, D:max
    order A,B,C,D
    domain C 5

File paths are relative to the spec file.
"""

import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Optional

from decomposition import Decomposition, build_decomposition, gyo_join_tree, join_tree_to_decomposition
from equijoin import EquiJoinQuery, equi_hypergraph, to_natural_join
from errors import InvalidDecomposition, SchemaMismatch, SpecParseError, ValidationError
from faq import FAQQuery, FactorRelation, get_semiring, load_factor_csv, residual_query
from hypergraph import query_hypergraph
from relcore import Database, JoinQuery, load_relation_csv, reorder
from schemas import AtomDecl, BagDecl, FactorDecl, JobSpec, RelationDecl

logger = logging.getLogger("cover_engine")

_ATOM = re.compile(r"^(\S+)\s+uses\s+(\S+)\s+map\s+(.+)$")
_EQ = re.compile(r"^(\S+)\s*=\s*(\S+)$")


def _names(text: str) -> List[str]:
    return [name for name in re.split(r"[,\s]+", text.strip()) if name]


def _parse_line(spec: JobSpec, directive: str, rest: str, where: str) -> None:
    args = rest.split()
    if directive == "relation":
        if len(args) == 2:
            spec.relations.append(RelationDecl(name=args[0], schema=[], path=args[1]))
        elif len(args) == 3:
            spec.relations.append(RelationDecl(name=args[0], schema=_names(args[1]), path=args[2]))
        else:
            raise SpecParseError(f"{where}: expected `relation <name> [<attrs>] <path>`")
    elif directive == "query":
        spec.query.extend(_names(rest))
    elif directive == "bag":
        if not args:
            raise SpecParseError(f"{where}: expected `bag <name> <attrs>`")
        spec.bags.append(BagDecl(name=args[0], attributes=_names(" ".join(args[1:]))))
    elif directive == "edge":
        if len(args) != 2:
            raise SpecParseError(f"{where}: expected `edge <bag> <bag>`")
        spec.edges.append((args[0], args[1]))
    elif directive == "plan":
        spec.plan = rest.strip()
    elif directive == "atom":
        match = _ATOM.match(rest.strip())
        if not match:
            raise SpecParseError(f"{where}: expected `atom <name> uses <relation> map A->B, ...`")
        mapping = {}
        for pair in match.group(3).split(","):
            if "->" not in pair:
                raise SpecParseError(f"{where}: bad mapping {pair.strip()!r}")
            src, dst = (part.strip() for part in pair.split("->", 1))
            if not src or not dst or src in mapping:
                raise SpecParseError(f"{where}: bad mapping {pair.strip()!r}")
            mapping[src] = dst
        spec.atoms.append(AtomDecl(name=match.group(1), relation=match.group(2), mapping=mapping))
    elif directive == "eq":
        match = _EQ.match(rest.strip())
        if not match:
            raise SpecParseError(f"{where}: expected `eq <attr> = <attr>`")
        spec.equalities.append((match.group(1), match.group(2)))
    elif directive == "semiring":
        if len(args) != 1:
            raise SpecParseError(f"{where}: expected `semiring <name>`")
        spec.semiring = args[0]
    elif directive == "factor":
        if len(args) != 3:
            raise SpecParseError(f"{where}: expected `factor <name> <attrs> <path>`")
        spec.factors.append(FactorDecl(name=args[0], attributes=_names(args[1]), path=args[2]))
    elif directive == "free":
        spec.free.extend(_names(rest))
    elif directive == "bound":
        for item in _names(rest):
            attr, sep, op = item.partition(":")
            if not sep or not attr or not op:
                raise SpecParseError(f"{where}: expected `<attr>:<aggregate>`, got {item!r}")
            spec.bound[attr] = op
    elif directive == "order":
        spec.order.extend(_names(rest))
    elif directive == "domain":
        if len(args) != 2 or not args[1].isdigit():
            raise SpecParseError(f"{where}: expected `domain <attr> <size>`")
        spec.domains[args[0]] = int(args[1])
    else:
        raise SpecParseError(f"{where}: unknown directive {directive!r}")


def parse_spec(text: str, source: str = "<spec>") -> JobSpec:
    spec = JobSpec(source=source)
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        directive, _, rest = line.partition(" ")
        _parse_line(spec, directive, rest, f"{source}:{line_no}")
    if spec.semiring and spec.atoms:
        raise SpecParseError(f"{source}: a spec is either an FAQ or an equi-join, not both")
    return spec


def load_spec(path: str) -> JobSpec:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise SpecParseError(f"cannot read {path}: {e}")
    return parse_spec(text, source=path)


@dataclass
class Job:
    spec: JobSpec
    decomposition: Decomposition
    # Natural join, or the rewrite of an equi-join
    query: Optional[JoinQuery] = None
    database: Optional[Database] = None
    equi: Optional[EquiJoinQuery] = None
    # Database before the equi-join rewrite
    source_database: Optional[Database] = None
    faq: Optional[FAQQuery] = None


def _resolve(spec: JobSpec, path: str) -> str:
    if os.path.isabs(path) or spec.source.startswith("<"):
        return path
    return os.path.join(os.path.dirname(spec.source), path)


def load_database(spec: JobSpec) -> Database:
    relations = {}
    for decl in spec.relations:
        if decl.name in relations:
            raise SpecParseError(f"{spec.source}: relation {decl.name} declared twice")
        relation = load_relation_csv(_resolve(spec, decl.path))
        if decl.schema_:
            if sorted(decl.schema_) != sorted(relation.schema):
                raise SchemaMismatch(
                    f"relation {decl.name}: declared {decl.schema_}, file has {list(relation.schema)}"
                )
            relation = reorder(relation, decl.schema_)
        relations[decl.name] = relation
        logger.debug(f"loaded {decl.name}{relation.schema}: {len(relation)} rows")
    return Database(relations)


def _declared_decomposition(spec: JobSpec, hypergraph) -> Optional[Decomposition]:
    if not spec.bags:
        return None
    bags: Dict[str, List[str]] = {}
    for decl in spec.bags:
        if decl.name in bags:
            raise InvalidDecomposition(f"bag {decl.name} declared twice")
        bags[decl.name] = decl.attributes
    return build_decomposition(hypergraph, bags, spec.edges)


def _gyo_decomposition(query: JoinQuery) -> Decomposition:
    join_tree = gyo_join_tree(query)
    if join_tree is None:
        raise InvalidDecomposition("the query is cyclic; declare a decomposition with `bag` and `edge`")
    return join_tree_to_decomposition(join_tree)


def _natural_job(spec: JobSpec) -> Job:
    database = load_database(spec)
    symbols = spec.query or [decl.name for decl in spec.relations]
    query = JoinQuery({symbol: database[symbol].schema for symbol in symbols})
    decomposition = _declared_decomposition(spec, query_hypergraph(query)) or _gyo_decomposition(query)
    return Job(spec=spec, decomposition=decomposition, query=query, database=database)


def _equi_job(spec: JobSpec) -> Job:
    database = load_database(spec)
    equi = EquiJoinQuery(
        atoms={atom.name: tuple(atom.mapping) for atom in spec.atoms},
        relation_of={atom.name: atom.relation for atom in spec.atoms},
        attribute_map={atom.name: dict(atom.mapping) for atom in spec.atoms},
        equalities=list(spec.equalities),
    )
    query, rewritten = to_natural_join(equi, database)
    decomposition = _declared_decomposition(spec, equi_hypergraph(equi)) or _gyo_decomposition(query)
    return Job(
        spec=spec,
        decomposition=decomposition,
        query=query,
        database=rewritten,
        equi=equi,
        source_database=database,
    )


def _load_factor(spec: JobSpec, decl: FactorDecl, semiring) -> FactorRelation:
    factor = load_factor_csv(_resolve(spec, decl.path), decl.name, semiring)
    if sorted(factor.attrs) != sorted(decl.attributes):
        raise SchemaMismatch(f"factor {decl.name}: declared {decl.attributes}, file has {list(factor.attrs)}")
    positions = [factor.attrs.index(a) for a in decl.attributes]
    items = [(tuple(key[i] for i in positions), value) for key, value in factor.values.items()]
    return FactorRelation.build(decl.name, decl.attributes, items, semiring)


def _faq_job(spec: JobSpec) -> Job:
    if not spec.semiring:
        raise ValidationError("an FAQ spec needs a `semiring` line")
    semiring = get_semiring(spec.semiring)
    factors = [_load_factor(spec, decl, semiring) for decl in spec.factors]
    q = FAQQuery(
        semiring=semiring,
        free=tuple(spec.free),
        bound=dict(spec.bound),
        factors=factors,
        order=tuple(spec.order) if spec.order else None,
        domains=dict(spec.domains),
    )
    residual = residual_query(q)
    decomposition = _declared_decomposition(spec, residual.hypergraph)
    if decomposition is None:
        decomposition = _faq_default_decomposition(residual)
    return Job(spec=spec, decomposition=decomposition, faq=q)


def _faq_default_decomposition(residual: FAQQuery) -> Decomposition:
    """GYO over the residual factors, or one bag of all free attributes"""
    hypergraph = residual.hypergraph
    atoms = {f.name: f.attrs for f in residual.factors if f.attrs}
    join_tree = gyo_join_tree(JoinQuery(atoms)) if atoms else None
    if join_tree is not None and len(atoms) == len(residual.factors):
        return build_decomposition(hypergraph, dict(atoms), list(join_tree.tree.edges))
    return build_decomposition(hypergraph, {"b0": residual.free}, [])


def load_job(spec: JobSpec) -> Job:
    kind = spec.kind
    logger.info(f"loading {kind} job from {spec.source}")
    if kind == "faq":
        return _faq_job(spec)
    if kind == "equi":
        return _equi_job(spec)
    return _natural_job(spec)

