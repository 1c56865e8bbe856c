"""FCL (IEC 61131-7 subset) parsing and Mamdani inference."""

from .engine import Aggregate, activations, defuzzify_cog, evaluate, membership
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
    VariableDecl,
)
from .parser import load_fcl, parse_fcl, print_fcl

__all__ = [
    "Aggregate", "And", "Consequent", "DefuzzifyBlock", "FclError", "FuzzifyBlock",
    "FuzzyProgram", "Is", "LinguisticTerm", "Not", "Or", "Rule", "RuleBlock", "VariableDecl",
    "activations", "defuzzify_cog", "evaluate", "load_fcl", "membership", "parse_fcl", "print_fcl",
]
