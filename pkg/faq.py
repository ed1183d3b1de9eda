"""Functional aggregate queries over commutative semirings.

Bound attributes are eliminated innermost-first (InsideOut); the bound-free
residual is split into per-bag functions whose listing representations are
calibrated and cover-joined. Every factor keeps only its non-zero entries.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import networkx as nx

from coverjoin import Cover
from decomposition import Decomposition, JoinTree, build_decomposition, require_valid
from drep import DelayMonitor, cover_to_drep, enumerate_result
from errors import (
    BadMapping,
    EmptyIntersection,
    MalformedOrder,
    SpecParseError,
    UnknownAttribute,
    ValidationError,
)
from hypergraph import FractionalEdgeCover, Hypergraph, fractional_edge_cover_number, query_hypergraph
from materialize import AcyclicInstance, calibrate, generic_join
from planner import default_plan, execute_plan
from relcore import Database, JoinQuery, Relation, Row, key_getter, read_relation_csv, reorder

logger = logging.getLogger("cover_engine")

PRODUCT = "product"
VALUE_COLUMN = "__value"


@dataclass(frozen=True)
class Semiring:
    name: str
    zero: Any
    one: Any
    add: Callable[[Any, Any], Any]
    mul: Callable[[Any, Any], Any]
    # Admissible aggregates sharing zero and one with mul
    aggregates: Dict[str, Callable[[Any, Any], Any]]
    primary: str
    parse: Callable[[str], Any]
    format: Callable[[Any], str]

    def power(self, value: Any, exponent: int) -> Any:
        result, base = self.one, value
        while exponent:
            if exponent & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            exponent >>= 1
        return result

    def aggregate(self, op: str) -> Callable[[Any, Any], Any]:
        if op == PRODUCT:
            return self.mul
        try:
            return self.aggregates[op]
        except KeyError:
            raise ValidationError(f"aggregate {op!r} is not admissible in semiring {self.name}")


def _parse_boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true"):
        return True
    if value in ("0", "false"):
        return False
    raise SpecParseError(f"not a boolean value: {text!r}")


def _parse_count(text: str) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise SpecParseError(f"not a count: {text!r}")
    if value < 0:
        raise SpecParseError(f"negative count: {text!r}")
    return value


def _parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise SpecParseError(f"not a rational: {text!r}")


def _parse_nonnegative_rational(text: str) -> Fraction:
    value = _parse_rational(text)
    if value < 0:
        raise SpecParseError(f"negative value in a max-product factor: {text!r}")
    return value


def _add(a, b):
    return a + b


def _mul(a, b):
    return a * b


SEMIRINGS: Dict[str, Semiring] = {
    "boolean": Semiring(
        name="boolean",
        zero=False,
        one=True,
        add=lambda a, b: a or b,
        mul=lambda a, b: a and b,
        aggregates={"or": lambda a, b: a or b},
        primary="or",
        parse=_parse_boolean,
        format=lambda v: "1" if v else "0",
    ),
    "count": Semiring(
        name="count",
        zero=0,
        one=1,
        add=_add,
        mul=_mul,
        aggregates={"sum": _add, "max": max},
        primary="sum",
        parse=_parse_count,
        format=str,
    ),
    "sumproduct-rational": Semiring(
        name="sumproduct-rational",
        zero=Fraction(0),
        one=Fraction(1),
        add=_add,
        mul=_mul,
        aggregates={"sum": _add},
        primary="sum",
        parse=_parse_rational,
        format=str,
    ),
    "maxproduct-rational": Semiring(
        name="maxproduct-rational",
        zero=Fraction(0),
        one=Fraction(1),
        add=max,
        mul=_mul,
        aggregates={"max": max, "sum": _add},
        primary="max",
        parse=_parse_nonnegative_rational,
        format=str,
    ),
}


def get_semiring(name: str) -> Semiring:
    try:
        return SEMIRINGS[name]
    except KeyError:
        raise SpecParseError(f"unknown semiring {name!r}; expected one of {sorted(SEMIRINGS)}")


@dataclass
class FactorRelation:
    name: str
    attrs: Tuple[str, ...]
    # Listing representation: key tuple over attrs -> non-zero value
    values: Dict[Row, Any]

    @classmethod
    def build(cls, name: str, attrs: Sequence[str], items, semiring: Semiring) -> "FactorRelation":
        attrs = tuple(attrs)
        if len(set(attrs)) != len(attrs):
            raise ValidationError(f"factor {name} repeats an attribute: {attrs}")
        values = {tuple(k): v for k, v in sorted(items, key=lambda kv: kv[0]) if v != semiring.zero}
        return cls(name=name, attrs=attrs, values=values)

    def __len__(self) -> int:
        return len(self.values)

    def keys_relation(self) -> Relation:
        return Relation.from_rows(self.attrs, self.values)

    def as_relation(self, semiring: Semiring, value_column: str = VALUE_COLUMN) -> Relation:
        rows = [k + (semiring.format(v),) for k, v in self.values.items()]
        return Relation.from_rows(self.attrs + (value_column,), rows)


def factor_from_relation(
    name: str, relation: Relation, semiring: Semiring, value_column: str = VALUE_COLUMN
) -> FactorRelation:
    if not relation.schema or relation.schema[-1] != value_column:
        raise SpecParseError(f"factor {name}: last column must be {value_column}")
    attrs = relation.schema[:-1]
    items: Dict[Row, Any] = {}
    for row in relation.rows:
        key, value = row[:-1], semiring.parse(row[-1])
        if key in items and items[key] != value:
            raise SpecParseError(f"factor {name}: conflicting values for {key}")
        items[key] = value
    return FactorRelation.build(name, attrs, items.items(), semiring)


def load_factor_csv(path: str, name: str, semiring: Semiring) -> FactorRelation:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            relation = read_relation_csv(handle, source=path)
    except OSError as e:
        raise SpecParseError(f"cannot read {path}: {e}")
    return factor_from_relation(name, relation, semiring)


@dataclass
class EliminationStep:
    attribute: str
    aggregate: str
    partial: Tuple[FrozenSet[str], ...]
    union: FrozenSet[str]


@dataclass
class FAQQuery:
    semiring: Semiring
    free: Tuple[str, ...]
    bound: Dict[str, str]
    factors: List[FactorRelation]
    order: Optional[Tuple[str, ...]] = None
    domains: Dict[str, int] = field(default_factory=dict)
    active_domains: Dict[str, int] = field(default_factory=dict)
    history: List[EliminationStep] = field(default_factory=list)

    def __post_init__(self):
        self.free = tuple(self.free)
        if self.order is not None:
            self.order = tuple(self.order)
        declared = set(self.free) | set(self.bound)
        if len(declared) != len(self.free) + len(self.bound):
            raise ValidationError("an attribute is declared both free and bound")
        used = {a for f in self.factors for a in f.attrs}
        if used - declared:
            raise UnknownAttribute(f"factor attributes {sorted(used - declared)} are neither free nor bound")
        if declared - used:
            raise UnknownAttribute(f"attributes {sorted(declared - used)} appear in no factor")
        for attr, op in self.bound.items():
            self.semiring.aggregate(op)
        if not self.active_domains:
            for attr in self.attributes:
                values = {key[f.attrs.index(attr)] for f in self.factors if attr in f.attrs for key in f.values}
                self.active_domains[attr] = len(values)

    @property
    def attributes(self) -> Tuple[str, ...]:
        return self.free + tuple(self.bound)

    @property
    def hypergraph(self) -> Hypergraph:
        return Hypergraph.from_edges(
            [f.attrs for f in self.factors],
            labels=[f.name for f in self.factors],
            nodes=self.attributes,
        )

    def domain_size(self, attr: str) -> int:
        return self.domains.get(attr, self.active_domains.get(attr, 0))

    def tau(self, order: Optional[Sequence[str]] = None) -> Tuple[str, ...]:
        tau = tuple(order) if order is not None else (self.order or self.attributes)
        if sorted(tau) != sorted(self.attributes):
            raise MalformedOrder(f"order {list(tau)} is not a permutation of {list(self.attributes)}")
        if set(tau[: len(self.free)]) != set(self.free):
            raise MalformedOrder(f"order {list(tau)} does not start with the free attributes {list(self.free)}")
        return tau


def _multiply(factors: Sequence[FactorRelation], semiring: Semiring, attrs: Sequence[str]) -> Dict[Row, Any]:
    """⊗-product of factors over the union of their attributes (ordered as `attrs`)"""
    scalar = semiring.one
    proper = []
    for f in factors:
        if f.attrs:
            proper.append(f)
        elif () in f.values:
            scalar = semiring.mul(scalar, f.values[()])
        else:
            return {}
    if scalar == semiring.zero:
        return {}

    query = JoinQuery({f"f{i}": f.attrs for i, f in enumerate(proper)})
    database = Database({f"f{i}": f.keys_relation() for i, f in enumerate(proper)})
    joined = generic_join(query, database, attrs)
    getters = [key_getter(tuple(attrs), f.attrs) for f in proper]

    out: Dict[Row, Any] = {}
    for row in joined.rows:
        value = scalar
        for f, get in zip(proper, getters):
            value = semiring.mul(value, f.values[get(row)])
        if value != semiring.zero:
            out[row] = value
    return out


def _absorb(host: FactorRelation, guest: FactorRelation, semiring: Semiring) -> FactorRelation:
    getter = key_getter(host.attrs, guest.attrs)
    guest_items = sorted(guest.values.items())
    merged: Dict[Row, Any] = {}
    i = 0
    for row, value in sorted(host.values.items(), key=lambda kv: getter(kv[0])):
        key = getter(row)
        while i < len(guest_items) and guest_items[i][0] < key:
            i += 1
        if i < len(guest_items) and guest_items[i][0] == key:
            product = semiring.mul(value, guest_items[i][1])
            if product != semiring.zero:
                merged[row] = product
    return FactorRelation.build(host.name, host.attrs, merged.items(), semiring)


def absorb_subset_factors(q: FAQQuery) -> FAQQuery:
    """Merge every factor whose attributes lie inside another's into that one"""
    factors = list(q.factors)
    merged = True
    while merged:
        merged = False
        for i, j in itertools.permutations(range(len(factors)), 2):
            host, guest = factors[i], factors[j]
            if set(guest.attrs) <= set(host.attrs) and (len(guest.attrs) < len(host.attrs) or i < j):
                logger.debug(f"absorbing {guest.name} into {host.name}")
                factors[i] = _absorb(host, guest, q.semiring)
                del factors[j]
                merged = True
                break
    return replace(q, factors=factors)


def indicator_projection(f: FactorRelation, attrs, semiring: Semiring) -> FactorRelation:
    attrs = set(attrs)
    kept = tuple(a for a in f.attrs if a in attrs)
    if not kept:
        raise EmptyIntersection(f"factor {f.name} shares no attribute with {sorted(attrs)}")
    getter = key_getter(f.attrs, kept)
    items = {getter(key): semiring.one for key in f.values}
    return FactorRelation.build(f"{f.name}/{''.join(kept)}", kept, items.items(), semiring)


def elimination_sequence(
    edges: Sequence[Sequence[str]], tau: Sequence[str], bound: Dict[str, str], n_free: int
) -> List[EliminationStep]:
    """Structural elimination from the last attribute of tau down to the first.

    Free attributes are eliminated like a non-product aggregate.
    """
    current = [frozenset(e) for e in edges if e]
    steps: List[EliminationStep] = []
    for j in reversed(range(len(tau))):
        attr = tau[j]
        op = bound[attr] if j >= n_free else "free"
        partial = tuple(e for e in current if attr in e)
        union = frozenset().union(*partial) if partial else frozenset({attr})
        if op == PRODUCT:
            current = [e - {attr} for e in current]
        else:
            current = [e for e in current if attr not in e] + [union - {attr}]
        current = [e for e in current if e]
        steps.append(EliminationStep(attribute=attr, aggregate=op, partial=partial, union=union))
    return steps


def faq_width(q: FAQQuery, order: Optional[Sequence[str]] = None) -> Fraction:
    tau = q.tau(order)
    hypergraph = q.hypergraph
    steps = elimination_sequence([f.attrs for f in q.factors], tau, q.bound, len(q.free))
    widths = [
        fractional_edge_cover_number(hypergraph.restrict(step.union))
        for step in steps
        if step.aggregate != PRODUCT
    ]
    return max(widths, default=Fraction(0))


def eliminate_bound(q: FAQQuery) -> FAQQuery:
    """Eliminate bound attributes in reverse order, recording each step"""
    tau = q.tau()
    semiring = q.semiring
    n_free = len(q.free)
    rank = {a: i for i, a in enumerate(tau)}
    factors = list(q.factors)
    history: List[EliminationStep] = []

    for j in reversed(range(n_free, len(tau))):
        attr = tau[j]
        op = q.bound[attr]
        partial = [f for f in factors if attr in f.attrs]
        untouched = [f for f in factors if attr not in f.attrs]

        if op == PRODUCT:
            size = q.domain_size(attr)
            produced = [
                FactorRelation.build(
                    f.name, f.attrs, ((k, semiring.power(v, size)) for k, v in f.values.items()), semiring
                )
                for f in untouched
            ]
            for f in partial:
                rest = tuple(a for a in f.attrs if a != attr)
                getter = key_getter(f.attrs, rest)
                items = []
                ranked = sorted(f.values.items(), key=lambda kv: getter(kv[0]))
                for key, group in itertools.groupby(ranked, key=lambda kv: getter(kv[0])):
                    group = [v for _, v in group]
                    # Any missing domain value contributes a zero
                    if len(group) == size:
                        value = semiring.one
                        for v in group:
                            value = semiring.mul(value, v)
                        items.append((key, value))
                produced.append(FactorRelation.build(f.name, rest, items, semiring))
            factors = produced
            union = frozenset().union(*(f.attrs for f in partial)) if partial else frozenset({attr})
        else:
            union_attrs = sorted({a for f in partial for a in f.attrs}, key=rank.get)
            union = frozenset(union_attrs)
            outside = [f for f in untouched if union & set(f.attrs)]
            indicators = [indicator_projection(f, union, semiring) for f in outside]
            product = _multiply(partial + indicators, semiring, union_attrs)

            rest = tuple(a for a in union_attrs if a != attr)
            getter = key_getter(tuple(union_attrs), rest)
            combine = semiring.aggregate(op)
            items = []
            ranked = sorted(product.items(), key=lambda kv: getter(kv[0]))
            for key, group in itertools.groupby(ranked, key=lambda kv: getter(kv[0])):
                value = None
                for _, v in group:
                    value = v if value is None else combine(value, v)
                items.append((key, value))
            factors = untouched + [FactorRelation.build(f"psi_{attr}", rest, items, semiring)]

        history.append(
            EliminationStep(
                attribute=attr,
                aggregate=op,
                partial=tuple(frozenset(f.attrs) for f in partial),
                union=union,
            )
        )
        logger.debug(f"eliminated {attr} ({op}): {len(factors)} factors remain")

    return replace(q, bound={}, factors=factors, order=tau[:n_free], history=history)


@dataclass
class BagFunctionSet:
    functions: Dict[str, FactorRelation]
    mapping: Dict[str, str]
    value_columns: Dict[str, str]


def value_column(bag: str) -> str:
    return f"__beta_{bag}"


def bag_functions(
    q: FAQQuery, decomposition: Decomposition, mapping: Optional[Dict[str, str]] = None
) -> BagFunctionSet:
    """Per bag: mapped factors times indicator projections of overlapping ones,
    calibrated across the tree"""
    if q.bound:
        raise MalformedOrder("bag functions need a query without bound attributes")
    bags = decomposition.bags
    semiring = q.semiring

    if mapping is None:
        mapping = {}
        for f in q.factors:
            holders = sorted(b for b in bags if set(f.attrs) <= bags[b])
            if not holders:
                raise BadMapping(f"factor {f.name} {list(f.attrs)} fits in no bag")
            mapping[f.name] = holders[0]
    for f in q.factors:
        bag = mapping.get(f.name)
        if bag not in bags or not set(f.attrs) <= bags[bag]:
            raise BadMapping(f"factor {f.name} {list(f.attrs)} is not inside bag {bag}")

    raw: Dict[str, Dict[Row, Any]] = {}
    for bag in sorted(bags):
        overlapping = [indicator_projection(f, bags[bag], semiring) for f in q.factors if set(f.attrs) & bags[bag]]
        mapped = [f for f in q.factors if mapping[f.name] == bag]
        raw[bag] = _multiply(overlapping + mapped, semiring, decomposition.bag_schema(bag))

    keys = {
        bag: Relation.from_rows(decomposition.bag_schema(bag), values) for bag, values in raw.items()
    }
    keys = calibrate(keys, decomposition)
    functions = {}
    for bag in sorted(bags):
        surviving = keys[bag].rows
        functions[bag] = FactorRelation(
            name=f"beta_{bag}",
            attrs=decomposition.bag_schema(bag),
            values={k: raw[bag][k] for k in surviving},
        )
    return BagFunctionSet(
        functions=functions,
        mapping=dict(mapping),
        value_columns={bag: value_column(bag) for bag in sorted(bags)},
    )


@dataclass
class FAQCover(Cover):
    semiring: Semiring
    free: Tuple[str, ...]
    value_columns: Tuple[str, ...]


def residual_query(q: FAQQuery) -> FAQQuery:
    """Absorb, eliminate the bound attributes, absorb again"""
    return absorb_subset_factors(eliminate_bound(absorb_subset_factors(q)))


def extended_instance(bag_set: BagFunctionSet, decomposition: Decomposition, semiring: Semiring) -> AcyclicInstance:
    """The bag relations with one value column each, over the same tree"""
    schemas = {
        bag: decomposition.bag_schema(bag) + (bag_set.value_columns[bag],) for bag in sorted(decomposition.bags)
    }
    query = JoinQuery(schemas)
    hypergraph = query_hypergraph(query)
    covers = {bag: FractionalEdgeCover(weights={i: Fraction(1)}) for i, bag in enumerate(query.atoms)}
    join_tree = nx.Graph()
    join_tree.add_nodes_from(sorted(schemas))
    for u, v in decomposition.tree.edges:
        join_tree.add_edge(u, v, label=frozenset(schemas[u]) & frozenset(schemas[v]))
    ext_tree = nx.Graph()
    ext_tree.add_nodes_from(sorted(schemas))
    ext_tree.add_edges_from(decomposition.tree.edges)
    extended = Decomposition(
        hypergraph=hypergraph,
        tree=ext_tree,
        bags={bag: frozenset(schema) for bag, schema in schemas.items()},
        covers=covers,
    )
    database = Database(
        {
            bag: bag_set.functions[bag].as_relation(semiring, bag_set.value_columns[bag])
            for bag in sorted(decomposition.bags)
        }
    )
    return AcyclicInstance(
        query=query, join_tree=JoinTree(query=query, tree=join_tree), database=database, decomposition=extended
    )


def faq_cover(
    q: FAQQuery,
    decomposition: Decomposition,
    seed: Optional[int] = None,
    debug: Optional[bool] = None,
) -> FAQCover:
    """Cover of the FAQ result; rows carry one value column per bag"""
    residual = residual_query(q)
    decomposition = build_decomposition(residual.hypergraph, decomposition.bags, decomposition.tree.edges)
    require_valid(residual.hypergraph, decomposition)
    bag_set = bag_functions(residual, decomposition)
    instance = extended_instance(bag_set, decomposition, q.semiring)
    cover = execute_plan(default_plan(instance.join_tree), instance, seed=seed, debug=debug)

    columns = tuple(bag_set.value_columns[bag] for bag in sorted(decomposition.bags))
    relation = reorder(cover.relation, q.free + columns)
    logger.info(f"FAQ cover of {len(relation)} rows over {len(columns)} bags")
    return FAQCover(
        relation=relation,
        decomposition=instance.decomposition,
        semiring=q.semiring,
        free=q.free,
        value_columns=columns,
    )


def faq_enumerate(cover: FAQCover, monitor: Optional[DelayMonitor] = None) -> Iterator[Tuple[Row, Any]]:
    """Free tuples with their values: the ⊗ of the row's bag value columns"""
    drep = cover_to_drep(cover)
    schema = drep.schema
    free_positions = [schema.index(a) for a in cover.free]
    value_positions = [schema.index(c) for c in cover.value_columns]
    semiring = cover.semiring
    for row in enumerate_result(drep, monitor=monitor):
        value = semiring.one
        for pos in value_positions:
            value = semiring.mul(value, semiring.parse(row[pos]))
        yield tuple(row[i] for i in free_positions), value


def _brute_domains(q: FAQQuery) -> Dict[str, List[str]]:
    domains = {}
    for attr in q.attributes:
        values = sorted({key[f.attrs.index(attr)] for f in q.factors if attr in f.attrs for key in f.values})
        declared = q.domains.get(attr, len(values))
        # Declared values beyond the active ones take part in no factor
        values += [f"\uffffpad{i}" for i in range(max(0, declared - len(values)))]
        domains[attr] = values
    return domains


def faq_bruteforce(q: FAQQuery) -> Dict[Row, Any]:
    """Nested-loop evaluation over the (active or declared) domains"""
    tau = q.tau()
    semiring = q.semiring
    domains = _brute_domains(q)
    n_free = len(q.free)
    getters = [(f, key_getter(tau, f.attrs)) for f in q.factors]

    def evaluate(assignment: List[str], depth: int) -> Any:
        if depth == len(tau):
            row = tuple(assignment)
            value = semiring.one
            for f, get in getters:
                value = semiring.mul(value, f.values.get(get(row), semiring.zero))
            return value
        attr = tau[depth]
        combine = semiring.aggregate(q.bound[attr])
        total = None
        for v in domains[attr]:
            assignment.append(v)
            value = evaluate(assignment, depth + 1)
            assignment.pop()
            total = value if total is None else combine(total, value)
        # Empty domain: the empty ⊕ is zero, the empty ⊗ is one
        if total is None:
            return semiring.one if q.bound[attr] == PRODUCT else semiring.zero
        return total

    free_in_tau = tau[:n_free]
    positions = [free_in_tau.index(a) for a in q.free]
    result: Dict[Row, Any] = {}
    for values in itertools.product(*(domains[a] for a in free_in_tau)):
        value = evaluate(list(values), n_free)
        if value != semiring.zero:
            result[tuple(values[p] for p in positions)] = value
    return result
