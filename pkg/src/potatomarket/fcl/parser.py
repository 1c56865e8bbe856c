"""Recursive-descent parser and canonical printer for the supported FCL subset.

Supported: one FUNCTION_BLOCK with REAL VAR_INPUT/VAR_OUTPUT declarations,
FUZZIFY and DEFUZZIFY blocks whose terms are point lists, COG defuzzification
with DEFAULT and RANGE, and RULEBLOCKs using MIN/MAX operators.  Keywords are
case-insensitive; ``//`` and ``(* ... *)`` comments are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import (
    And,
    Consequent,
    DefuzzifyBlock,
    FclError,
    FuzzifyBlock,
    FuzzyProgram,
    Is,
    LinguisticTerm,
    Not,
    Or,
    Rule,
    RuleBlock,
    SourcePos,
    VariableDecl,
)

KEYWORDS = {
    "FUNCTION_BLOCK", "END_FUNCTION_BLOCK", "VAR_INPUT", "VAR_OUTPUT", "END_VAR", "REAL",
    "FUZZIFY", "END_FUZZIFY", "DEFUZZIFY", "END_DEFUZZIFY", "TERM", "METHOD", "COG",
    "DEFAULT", "RANGE", "RULEBLOCK", "END_RULEBLOCK", "AND", "OR", "NOT", "ACT", "ACCU",
    "MIN", "MAX", "RULE", "IF", "THEN", "IS", "WITH",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>\(\*.*?\*\))
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>:=|\.\.|[:;,()+\-])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "kw", "ident", "number", "punct", "eof"
    value: str
    pos: SourcePos


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise FclError(f"unexpected character {text[i]!r}", SourcePos(line, i - line_start + 1))
        kind = m.lastgroup
        value = m.group()
        pos = SourcePos(line, i - line_start + 1)
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "block_comment":
            nls = value.count("\n")
            if nls:
                line += nls
                line_start = i + value.rfind("\n") + 1
        elif kind == "ident":
            upper = value.upper()
            if upper in KEYWORDS:
                tokens.append(Token("kw", upper, pos))
            else:
                tokens.append(Token("ident", value, pos))
        elif kind in ("number", "punct"):
            tokens.append(Token(kind, value, pos))
        i = m.end()
    tokens.append(Token("eof", "", SourcePos(line, len(text) - line_start + 1)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def _describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.value)

    def error(self, expected: str) -> FclError:
        return FclError(f"expected {expected}, found {self._describe(self.tok)}", self.tok.pos)

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "kw" and self.tok.value in words

    def at_punct(self, p: str) -> bool:
        return self.tok.kind == "punct" and self.tok.value == p

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            raise self.error(word)
        return self.advance()

    def expect_punct(self, p: str) -> Token:
        if not self.at_punct(p):
            raise self.error(f"'{p}'")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(what)
        return self.advance()

    def number(self) -> float:
        sign = 1.0
        while self.at_punct("-") or self.at_punct("+"):
            if self.advance().value == "-":
                sign = -sign
        if self.tok.kind != "number":
            raise self.error("number")
        return sign * float(self.advance().value)

    # grammar

    def program(self) -> FuzzyProgram:
        self.expect_kw("FUNCTION_BLOCK")
        name = self.advance().value if self.tok.kind == "ident" else ""
        inputs: list[VariableDecl] = []
        outputs: list[VariableDecl] = []
        fuzzify: list[FuzzifyBlock] = []
        defuzzify: list[DefuzzifyBlock] = []
        blocks: list[RuleBlock] = []
        while not self.at_kw("END_FUNCTION_BLOCK"):
            if self.at_kw("VAR_INPUT"):
                inputs.extend(self.var_section("VAR_INPUT"))
            elif self.at_kw("VAR_OUTPUT"):
                outputs.extend(self.var_section("VAR_OUTPUT"))
            elif self.at_kw("FUZZIFY"):
                fuzzify.append(self.fuzzify_block())
            elif self.at_kw("DEFUZZIFY"):
                defuzzify.append(self.defuzzify_block())
            elif self.at_kw("RULEBLOCK"):
                blocks.append(self.rule_block())
            else:
                raise self.error("section keyword or END_FUNCTION_BLOCK")
        self.advance()
        if self.tok.kind != "eof":
            raise self.error("end of input")
        program = FuzzyProgram(name, tuple(inputs), tuple(outputs), tuple(fuzzify),
                               tuple(defuzzify), tuple(blocks))
        check_program(program)
        return program

    def var_section(self, kw: str) -> list[VariableDecl]:
        self.expect_kw(kw)
        out = []
        while not self.at_kw("END_VAR"):
            tok = self.expect_ident("variable name or END_VAR")
            self.expect_punct(":")
            if not self.at_kw("REAL"):
                raise FclError(f"variable {tok.value!r}: only REAL is supported", self.tok.pos)
            self.advance()
            self.expect_punct(";")
            out.append(VariableDecl(tok.value, "REAL", pos=tok.pos))
        self.advance()
        return out

    def term(self) -> LinguisticTerm:
        self.expect_kw("TERM")
        tok = self.expect_ident("term name")
        self.expect_punct(":=")
        points = []
        while self.at_punct("("):
            self.advance()
            x = self.number()
            self.expect_punct(",")
            mu = self.number()
            self.expect_punct(")")
            points.append((x, mu))
        if not points:
            raise self.error("'(' starting a point list")
        self.expect_punct(";")
        return LinguisticTerm(tok.value, tuple(points), pos=tok.pos)

    def fuzzify_block(self) -> FuzzifyBlock:
        start = self.expect_kw("FUZZIFY")
        var = self.expect_ident("variable name")
        terms = []
        while not self.at_kw("END_FUZZIFY"):
            if not self.at_kw("TERM"):
                raise self.error("TERM or END_FUZZIFY")
            terms.append(self.term())
        self.advance()
        return FuzzifyBlock(var.value, tuple(terms), pos=var.pos or start.pos)

    def defuzzify_block(self) -> DefuzzifyBlock:
        self.expect_kw("DEFUZZIFY")
        var = self.expect_ident("variable name")
        terms = []
        method = "COG"
        default = 0.0
        rng: Optional[tuple[float, float]] = None
        while not self.at_kw("END_DEFUZZIFY"):
            if self.at_kw("TERM"):
                terms.append(self.term())
            elif self.at_kw("METHOD"):
                self.advance()
                self.expect_punct(":")
                if not self.at_kw("COG"):
                    raise FclError("only METHOD : COG is supported", self.tok.pos)
                method = self.advance().value
                self.expect_punct(";")
            elif self.at_kw("DEFAULT"):
                self.advance()
                self.expect_punct(":=")
                default = self.number()
                self.expect_punct(";")
            elif self.at_kw("RANGE"):
                pos = self.advance().pos
                self.expect_punct(":=")
                self.expect_punct("(")
                lo = self.number()
                self.expect_punct("..")
                hi = self.number()
                self.expect_punct(")")
                self.expect_punct(";")
                if not lo < hi:
                    raise FclError(f"RANGE of {var.value!r} is empty: ({lo} .. {hi})", pos)
                rng = (lo, hi)
            else:
                raise self.error("TERM, METHOD, DEFAULT, RANGE or END_DEFUZZIFY")
        end = self.advance()
        if rng is None:
            raise FclError(f"DEFUZZIFY {var.value!r} has no RANGE", end.pos)
        return DefuzzifyBlock(var.value, tuple(terms), rng, default, method, pos=var.pos)

    def rule_block(self) -> RuleBlock:
        self.expect_kw("RULEBLOCK")
        name = self.advance().value if self.tok.kind == "ident" else ""
        methods = {"AND": "MIN", "OR": "MAX", "ACT": "MIN", "ACCU": "MAX"}
        rules: list[Rule] = []
        while not self.at_kw("END_RULEBLOCK"):
            if self.at_kw(*methods):
                key = self.advance().value
                self.expect_punct(":")
                want = methods[key]
                if not self.at_kw(want):
                    raise FclError(f"{key} method must be {want}", self.tok.pos)
                self.advance()
                self.expect_punct(";")
            elif self.at_kw("RULE"):
                rules.append(self.rule())
            else:
                raise self.error("RULE, operator setting or END_RULEBLOCK")
        self.advance()
        return RuleBlock(name, tuple(rules))

    def rule(self) -> Rule:
        start = self.expect_kw("RULE")
        if self.tok.kind != "number" or not self.tok.value.isdigit():
            raise self.error("integer rule number")
        rule_id = int(self.advance().value)
        self.expect_punct(":")
        self.expect_kw("IF")
        antecedent = self.or_expr()
        self.expect_kw("THEN")
        consequents = [self.consequent()]
        while self.at_punct(","):
            self.advance()
            consequents.append(self.consequent())
        weight = 1.0
        if self.at_kw("WITH"):
            wpos = self.advance().pos
            weight = self.number()
            if not 0.0 <= weight <= 1.0:
                raise FclError(f"rule weight {weight} outside [0, 1]", wpos)
        self.expect_punct(";")
        return Rule(rule_id, antecedent, tuple(consequents), weight, pos=start.pos)

    def consequent(self) -> Consequent:
        var = self.expect_ident("output variable")
        self.expect_kw("IS")
        term = self.expect_ident("term name")
        return Consequent(var.value, term.value, pos=term.pos)

    def or_expr(self):
        left = self.and_expr()
        while self.at_kw("OR"):
            self.advance()
            left = Or(left, self.and_expr())
        return left

    def and_expr(self):
        left = self.unary()
        while self.at_kw("AND"):
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self):
        if self.at_kw("NOT"):
            self.advance()
            return Not(self.unary())
        if self.at_punct("("):
            self.advance()
            inner = self.or_expr()
            self.expect_punct(")")
            return inner
        var = self.expect_ident("input variable")
        self.expect_kw("IS")
        negate = False
        if self.at_kw("NOT"):
            self.advance()
            negate = True
        term = self.expect_ident("term name")
        atom = Is(var.value, term.value, pos=term.pos)
        return Not(atom) if negate else atom


def _check_terms(owner: str, terms: Iterable[LinguisticTerm]) -> None:
    seen = set()
    for t in terms:
        if t.name in seen:
            raise FclError(f"duplicate term {t.name!r} in {owner}", t.pos)
        seen.add(t.name)
        if len(t.points) < 2:
            raise FclError(f"term {t.name!r} needs at least two points", t.pos)
        for (x0, _), (x1, _) in zip(t.points, t.points[1:]):
            if not x1 > x0:
                raise FclError(f"term {t.name!r}: x points must be strictly increasing", t.pos)
        for _, mu in t.points:
            if not 0.0 <= mu <= 1.0:
                raise FclError(f"term {t.name!r}: membership {mu} outside [0, 1]", t.pos)


def _atoms(expr):
    if isinstance(expr, Is):
        yield expr
    elif isinstance(expr, Not):
        yield from _atoms(expr.operand)
    else:
        yield from _atoms(expr.left)
        yield from _atoms(expr.right)


def check_program(program: FuzzyProgram) -> None:
    """Semantic checks; raises :class:`FclError` on the first problem."""
    declared: dict[str, VariableDecl] = {}
    for v in program.inputs + program.outputs:
        if v.name in declared:
            raise FclError(f"duplicate variable {v.name!r}", v.pos)
        declared[v.name] = v
    inputs = set(program.input_names)
    outputs = set(program.output_names)

    fuzz: dict[str, FuzzifyBlock] = {}
    for b in program.fuzzify_blocks:
        if b.variable not in inputs:
            raise FclError(f"FUZZIFY for undeclared input {b.variable!r}", b.pos)
        if b.variable in fuzz:
            raise FclError(f"duplicate FUZZIFY block for {b.variable!r}", b.pos)
        if not b.terms:
            raise FclError(f"FUZZIFY {b.variable!r} declares no terms", b.pos)
        _check_terms(f"FUZZIFY {b.variable}", b.terms)
        fuzz[b.variable] = b
    defuzz: dict[str, DefuzzifyBlock] = {}
    for b in program.defuzzify_blocks:
        if b.variable not in outputs:
            raise FclError(f"DEFUZZIFY for undeclared output {b.variable!r}", b.pos)
        if b.variable in defuzz:
            raise FclError(f"duplicate DEFUZZIFY block for {b.variable!r}", b.pos)
        _check_terms(f"DEFUZZIFY {b.variable}", b.terms)
        defuzz[b.variable] = b
    for v in program.outputs:
        if v.name not in defuzz:
            raise FclError(f"output {v.name!r} has no DEFUZZIFY block", v.pos)

    for block in program.rule_blocks:
        ids = set()
        for rule in block.rules:
            if rule.id in ids:
                raise FclError(f"duplicate rule number {rule.id} in RULEBLOCK {block.name}", rule.pos)
            ids.add(rule.id)
            for atom in _atoms(rule.antecedent):
                if atom.variable not in inputs:
                    raise FclError(f"rule {rule.id}: undeclared input variable {atom.variable!r}", atom.pos)
                fb = fuzz.get(atom.variable)
                if fb is None or fb.term(atom.term) is None:
                    raise FclError(
                        f"rule {rule.id}: undeclared term {atom.term!r} of variable {atom.variable!r}", atom.pos
                    )
            for c in rule.consequents:
                if c.variable not in outputs:
                    raise FclError(f"rule {rule.id}: undeclared output variable {c.variable!r}", c.pos)
                if defuzz[c.variable].term(c.term) is None:
                    raise FclError(f"rule {rule.id}: undeclared term {c.term!r} of variable {c.variable!r}", c.pos)


def parse_fcl(text: str) -> FuzzyProgram:
    return _Parser(text).program()


def load_fcl(path) -> FuzzyProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_fcl(fh.read())


# --- printing ---------------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:.6f}"


def _points(term: LinguisticTerm) -> str:
    return " ".join(f"({_num(x)}, {_num(mu)})" for x, mu in term.points)


def _expr(e, top: bool = True) -> str:
    if isinstance(e, Is):
        return f"{e.variable} IS {e.term}"
    if isinstance(e, Not):
        if isinstance(e.operand, Is):
            return f"{e.operand.variable} IS NOT {e.operand.term}"
        return f"NOT {_expr(e.operand, top=False)}"
    op = "AND" if isinstance(e, And) else "OR"
    text = f"{_expr(e.left, top=False)} {op} {_expr(e.right, top=False)}"
    return text if top else f"({text})"


def print_fcl(program: FuzzyProgram) -> str:
    out = [f"FUNCTION_BLOCK {program.name}".rstrip(), ""]
    for kw, decls in (("VAR_INPUT", program.inputs), ("VAR_OUTPUT", program.outputs)):
        if decls:
            out.append(kw)
            out.extend(f"    {v.name} : REAL;" for v in decls)
            out.extend(["END_VAR", ""])
    for b in program.fuzzify_blocks:
        out.append(f"FUZZIFY {b.variable}")
        out.extend(f"    TERM {t.name} := {_points(t)};" for t in b.terms)
        out.extend(["END_FUZZIFY", ""])
    for b in program.defuzzify_blocks:
        out.append(f"DEFUZZIFY {b.variable}")
        out.extend(f"    TERM {t.name} := {_points(t)};" for t in b.terms)
        out.append(f"    METHOD : {b.method};")
        out.append(f"    DEFAULT := {_num(b.default)};")
        out.append(f"    RANGE := ({_num(b.range[0])} .. {_num(b.range[1])});")
        out.extend(["END_DEFUZZIFY", ""])
    for block in program.rule_blocks:
        out.append(f"RULEBLOCK {block.name}".rstrip())
        out.extend(["    AND : MIN;", "    OR : MAX;", "    ACT : MIN;", "    ACCU : MAX;"])
        for r in block.rules:
            cons = ", ".join(f"{c.variable} IS {c.term}" for c in r.consequents)
            weight = f" WITH {_num(r.weight)}" if r.weight != 1.0 else ""
            out.append(f"    RULE {r.id} : IF {_expr(r.antecedent)} THEN {cons}{weight};")
        out.extend(["END_RULEBLOCK", ""])
    out.append("END_FUNCTION_BLOCK")
    return "\n".join(out) + "\n"
