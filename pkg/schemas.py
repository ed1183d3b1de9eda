from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field


class ValidityReport(BaseModel):
    violations: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


class CoverVerdict(BaseModel):
    kind: Literal["Cover", "NotResultPreserving", "NotMinimal"]
    bag: Optional[List[str]] = None
    witness: Optional[Dict[str, str]] = None

    @property
    def is_cover(self) -> bool:
        return self.kind == "Cover"

    def witness_values(self) -> Tuple[str, ...]:
        return tuple((self.witness or {}).values())

    def render(self) -> str:
        if self.kind == "Cover":
            return "Cover"
        values = "(" + ",".join(self.witness_values()) + ")"
        if self.kind == "NotMinimal":
            return f"NotMinimal({values})"
        return "NotResultPreserving({" + ",".join(self.bag or []) + "}, " + values + ")"


class RelationDecl(BaseModel):
    name: str
    schema_: List[str] = Field(alias="schema")
    path: str

    class Config:
        populate_by_name = True


class BagDecl(BaseModel):
    name: str
    attributes: List[str]


class AtomDecl(BaseModel):
    name: str
    relation: str
    mapping: Dict[str, str]


class FactorDecl(BaseModel):
    name: str
    attributes: List[str]
    path: str


class JobSpec(BaseModel):
    source: str = "<spec>"
    relations: List[RelationDecl] = Field(default_factory=list)
    query: List[str] = Field(default_factory=list)
    bags: List[BagDecl] = Field(default_factory=list)
    edges: List[Tuple[str, str]] = Field(default_factory=list)
    atoms: List[AtomDecl] = Field(default_factory=list)
    equalities: List[Tuple[str, str]] = Field(default_factory=list)
    semiring: Optional[str] = None
    factors: List[FactorDecl] = Field(default_factory=list)
    free: List[str] = Field(default_factory=list)
    bound: Dict[str, str] = Field(default_factory=dict)
    order: List[str] = Field(default_factory=list)
    domains: Dict[str, int] = Field(default_factory=dict)
    plan: Optional[str] = None

    @property
    def kind(self) -> Literal["natural", "equi", "faq"]:
        if self.factors or self.semiring:
            return "faq"
        if self.atoms:
            return "equi"
        return "natural"


class StatsReport(BaseModel):
    database_size: int
    cover_size: int
    result_size: int
    width: str
    bag_sizes: Dict[str, int]

    def render(self) -> str:
        lines = [
            f"database_size: {self.database_size}",
            f"cover_size: {self.cover_size}",
            f"result_size: {self.result_size}",
            f"width: {self.width}",
        ]
        lines.extend(f"bag {name}: {size}" for name, size in self.bag_sizes.items())
        return "\n".join(lines)
