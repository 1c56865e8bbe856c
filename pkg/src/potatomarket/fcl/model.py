"""Immutable syntax tree for parsed FCL function blocks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class SourcePos:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class FclError(ValueError):
    """Syntax or semantic problem in an FCL source, with its location."""

    def __init__(self, message: str, pos: Optional[SourcePos] = None):
        self.message = message
        self.pos = pos
        where = f"line {pos.line}, column {pos.column}: " if pos else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    type: str = "REAL"
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LinguisticTerm:
    """Piecewise-linear membership function given by ordered ``(x, mu)`` points."""

    name: str
    points: tuple[tuple[float, float], ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)

    @property
    def span(self) -> tuple[float, float]:
        return self.points[0][0], self.points[-1][0]


@dataclass(frozen=True)
class FuzzifyBlock:
    variable: str
    terms: tuple[LinguisticTerm, ...]
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)

    def term(self, name: str) -> Optional[LinguisticTerm]:
        for t in self.terms:
            if t.name == name:
                return t
        return None

    @property
    def span(self) -> tuple[float, float]:
        return min(t.span[0] for t in self.terms), max(t.span[1] for t in self.terms)


@dataclass(frozen=True)
class DefuzzifyBlock:
    variable: str
    terms: tuple[LinguisticTerm, ...]
    range: tuple[float, float]
    default: float = 0.0
    method: str = "COG"
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)

    def term(self, name: str) -> Optional[LinguisticTerm]:
        for t in self.terms:
            if t.name == name:
                return t
        return None


@dataclass(frozen=True)
class Is:
    variable: str
    term: str
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


Expr = Union[Is, Not, And, Or]


@dataclass(frozen=True)
class Consequent:
    variable: str
    term: str
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Rule:
    id: int
    antecedent: Expr
    consequents: tuple[Consequent, ...]
    weight: float = 1.0
    pos: Optional[SourcePos] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class RuleBlock:
    name: str
    rules: tuple[Rule, ...] = ()
    and_method: str = "MIN"
    or_method: str = "MAX"
    activation: str = "MIN"
    accumulation: str = "MAX"


@dataclass(frozen=True)
class FuzzyProgram:
    name: str
    inputs: tuple[VariableDecl, ...]
    outputs: tuple[VariableDecl, ...]
    fuzzify_blocks: tuple[FuzzifyBlock, ...]
    defuzzify_blocks: tuple[DefuzzifyBlock, ...]
    rule_blocks: tuple[RuleBlock, ...]

    def fuzzify(self, variable: str) -> Optional[FuzzifyBlock]:
        for b in self.fuzzify_blocks:
            if b.variable == variable:
                return b
        return None

    def defuzzify(self, variable: str) -> Optional[DefuzzifyBlock]:
        for b in self.defuzzify_blocks:
            if b.variable == variable:
                return b
        return None

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.outputs)
