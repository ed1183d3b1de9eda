"""Immutable in-memory relations with sort-based operators.

Values are Python strings. Python compares strings by code point, which is the
same order as comparing their UTF-8 encodings byte by byte.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple

from errors import SchemaMismatch, SpecParseError, UnknownAttribute

logger = logging.getLogger("cover_engine")

Row = Tuple[str, ...]
Schema = Tuple[str, ...]


def key_getter(schema: Sequence[str], attrs: Sequence[str]) -> Callable[[Row], Row]:
    """Return a function mapping a row over `schema` to its values on `attrs`"""
    positions = [schema.index(a) for a in attrs]
    return lambda row: tuple(row[i] for i in positions)


@dataclass(frozen=True, eq=False)
class Relation:
    schema: Schema
    rows: Tuple[Row, ...]
    sort_key: Schema = ()

    @classmethod
    def from_rows(
        cls,
        schema: Iterable[str],
        rows: Iterable[Sequence[str]],
        sort_key: Optional[Iterable[str]] = None,
    ) -> "Relation":
        schema = tuple(schema)
        if len(set(schema)) != len(schema):
            raise SchemaMismatch(f"duplicate attribute in schema {schema}")
        prefix = tuple(sort_key) if sort_key is not None else schema
        unknown = [a for a in prefix if a not in schema]
        if unknown:
            raise UnknownAttribute(f"sort key attributes {unknown} not in schema {schema}")
        full_key = prefix + tuple(a for a in schema if a not in prefix)
        getter = key_getter(schema, full_key)

        materialized = []
        for row in rows:
            row = tuple(row)
            if len(row) != len(schema):
                raise SchemaMismatch(f"row {row} does not match schema {schema}")
            materialized.append(row)
        materialized.sort(key=getter)

        # Dedupe adjacent equal rows
        unique: List[Row] = []
        for row in materialized:
            if not unique or unique[-1] != row:
                unique.append(row)
        return cls(schema=schema, rows=tuple(unique), sort_key=prefix)

    @classmethod
    def empty(cls, schema: Iterable[str]) -> "Relation":
        return cls.from_rows(schema, [])

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[Row]:
        return iter(self.rows)

    def __contains__(self, row) -> bool:
        return tuple(row) in self._row_set

    @cached_property
    def _row_set(self) -> FrozenSet[Row]:
        return frozenset(self.rows)

    @property
    def attributes(self) -> FrozenSet[str]:
        return frozenset(self.schema)

    def index(self, attr: str) -> int:
        try:
            return self.schema.index(attr)
        except ValueError:
            raise UnknownAttribute(f"attribute {attr} not in schema {self.schema}")

    def getter(self, attrs: Sequence[str]) -> Callable[[Row], Row]:
        missing = [a for a in attrs if a not in self.schema]
        if missing:
            raise UnknownAttribute(f"attributes {missing} not in schema {self.schema}")
        return key_getter(self.schema, attrs)

    def canonical_rows_for(self, schema: Sequence[str]) -> FrozenSet[Row]:
        getter = self.getter(schema)
        return frozenset(getter(row) for row in self.rows)

    @cached_property
    def _canonical(self):
        ordered = tuple(sorted(self.schema))
        return ordered, self.canonical_rows_for(ordered)

    # Relations compare as sets of tuples, independent of column order
    def __eq__(self, other) -> bool:
        if not isinstance(other, Relation):
            return NotImplemented
        return self._canonical == other._canonical

    def __hash__(self) -> int:
        return hash(self._canonical)

    def __repr__(self) -> str:
        return f"Relation({','.join(self.schema)}; {len(self.rows)} rows)"


@dataclass
class Database:
    relations: Dict[str, Relation] = field(default_factory=dict)

    def __getitem__(self, symbol: str) -> Relation:
        try:
            return self.relations[symbol]
        except KeyError:
            raise UnknownAttribute(f"unknown relation symbol {symbol}")

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.relations

    @property
    def size(self) -> int:
        return database_size(self)


@dataclass
class JoinQuery:
    """Natural join query: relation symbol -> schema"""

    atoms: Dict[str, Schema]

    def __post_init__(self):
        self.atoms = {symbol: tuple(schema) for symbol, schema in self.atoms.items()}

    @classmethod
    def from_database(cls, database: Database) -> "JoinQuery":
        return cls({symbol: rel.schema for symbol, rel in database.relations.items()})

    @property
    def symbols(self) -> List[str]:
        return list(self.atoms)

    @property
    def attributes(self) -> Schema:
        seen: List[str] = []
        for schema in self.atoms.values():
            for attr in schema:
                if attr not in seen:
                    seen.append(attr)
        return tuple(seen)

    def relations_of(self, database: Database) -> List[Relation]:
        """Relations for each atom, columns aligned to the atom schema"""
        result = []
        for symbol, schema in self.atoms.items():
            rel = database[symbol]
            if set(rel.schema) != set(schema):
                raise SchemaMismatch(
                    f"relation {symbol} has schema {rel.schema}, query expects {schema}"
                )
            result.append(reorder(rel, schema))
        return result


def database_size(database: Database) -> int:
    return sum(len(rel) for rel in database.relations.values())


def reorder(relation: Relation, schema: Sequence[str]) -> Relation:
    schema = tuple(schema)
    if schema == relation.schema:
        return relation
    if set(schema) != set(relation.schema) or len(schema) != len(relation.schema):
        raise SchemaMismatch(f"cannot reorder {relation.schema} as {schema}")
    getter = relation.getter(schema)
    return Relation.from_rows(schema, (getter(row) for row in relation.rows))


def project(relation: Relation, attrs: Iterable[str]) -> Relation:
    """Duplicate-free projection, sorted on the projected attributes.

    A set keeps the relation's column order; a sequence fixes the output order.
    """
    if isinstance(attrs, (set, frozenset)):
        unknown = sorted(a for a in attrs if a not in relation.schema)
        keep = [a for a in relation.schema if a in attrs]
    else:
        keep = []
        for a in attrs:
            if a not in keep:
                keep.append(a)
        unknown = [a for a in keep if a not in relation.schema]
    if unknown:
        raise UnknownAttribute(f"cannot project {relation.schema} on unknown {unknown}")
    getter = key_getter(relation.schema, keep)
    return Relation.from_rows(keep, (getter(row) for row in relation.rows))


def _shared(left: Relation, right: Relation) -> List[str]:
    return [a for a in left.schema if a in right.schema]


def _pair_join(left: Relation, right: Relation) -> Relation:
    shared = _shared(left, right)
    extra = [a for a in right.schema if a not in left.schema]
    left_key = key_getter(left.schema, shared)
    right_key = key_getter(right.schema, shared)
    right_extra = key_getter(right.schema, extra)
    rows = []
    for lrow in left.rows:
        lk = left_key(lrow)
        for rrow in right.rows:
            if right_key(rrow) == lk:
                rows.append(lrow + right_extra(rrow))
    return Relation.from_rows(left.schema + tuple(extra), rows)


def natural_join_bruteforce(relations: Sequence[Relation]) -> Relation:
    """Nested-loop natural join; the oracle for everything else"""
    result = Relation.from_rows((), [()])
    for rel in relations:
        result = _pair_join(result, rel)
    return result


def semi_join_reduce(relation: Relation, other: Relation) -> Relation:
    """Rows of `relation` with at least one partner in `other`"""
    shared = _shared(relation, other)
    if not shared:
        return relation if other.rows else Relation.empty(relation.schema)

    left_key = key_getter(relation.schema, shared)
    right_key = key_getter(other.schema, shared)
    right_keys = sorted(right_key(row) for row in other.rows)

    kept: List[Row] = []
    i = 0
    for row in sorted(relation.rows, key=left_key):
        k = left_key(row)
        while i < len(right_keys) and right_keys[i] < k:
            i += 1
        if i < len(right_keys) and right_keys[i] == k:
            kept.append(row)
    if len(kept) == len(relation.rows):
        return relation
    return Relation.from_rows(relation.schema, kept, sort_key=relation.sort_key)


def is_consistent(left: Relation, right: Relation) -> bool:
    return (
        len(semi_join_reduce(left, right)) == len(left)
        and len(semi_join_reduce(right, left)) == len(right)
    )


def load_relation_csv(path: str) -> Relation:
    """Load a relation from a CSV file with a header line"""
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return read_relation_csv(handle, source=path)
    except OSError as e:
        raise SpecParseError(f"cannot read {path}: {e}")


def read_relation_csv(handle: TextIO, source: str = "<stream>") -> Relation:
    reader = csv.reader(handle)
    try:
        header = next(reader)
    except StopIteration:
        raise SpecParseError(f"{source}: missing header line")
    except csv.Error as e:
        raise SpecParseError(f"{source}: {e}")
    header = [name.strip() for name in header]
    if len(set(header)) != len(header) or any(not name for name in header):
        raise SpecParseError(f"{source}: bad header {header}")

    rows = []
    try:
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SpecParseError(
                    f"{source}:{line_no}: expected {len(header)} values, got {len(row)}"
                )
            rows.append(row)
    except csv.Error as e:
        raise SpecParseError(f"{source}: {e}")
    relation = Relation.from_rows(header, rows)
    if len(relation) != len(rows):
        logger.debug(f"{source}: dropped {len(rows) - len(relation)} duplicate rows")
    return relation


def store_relation_csv(relation: Relation, handle: TextIO) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(relation.schema)
    writer.writerows(relation.rows)


def relation_to_csv(relation: Relation) -> str:
    buffer = io.StringIO()
    store_relation_csv(relation, buffer)
    return buffer.getvalue()
