"""Mamdani inference over parsed FCL programs.

Rule strength uses MIN for AND, MAX for OR and ``1 - mu`` for NOT, scaled by the
rule weight.  Consequent terms are clipped at the rule strength (MIN
activation), combined with MAX, and defuzzified by center of gravity.  Because
every membership function is piecewise linear, the COG integrals are computed
exactly segment by segment instead of by sampling.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Mapping, Sequence

from .model import And, DefuzzifyBlock, FclError, FuzzyProgram, Is, LinguisticTerm, Not, Or


def membership(term: LinguisticTerm, x: float) -> float:
    """Degree of ``x`` in ``term``; linear between points, 0 outside the span."""
    pts = term.points
    if x < pts[0][0] or x > pts[-1][0]:
        return 0.0
    xs = [p[0] for p in pts]
    i = bisect_right(xs, x) - 1
    if i >= len(pts) - 1:
        return pts[-1][1]
    (x0, y0), (x1, y1) = pts[i], pts[i + 1]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def _segment_values(term: LinguisticTerm, a: float, b: float) -> tuple[float, float]:
    """Values at ``a`` and ``b`` of the linear piece of ``term`` covering (a, b).

    Callers guarantee no term point lies strictly inside (a, b), so the piece
    is found from the midpoint; one-sided limits make jumps at span edges harmless.
    """
    pts = term.points
    mid = 0.5 * (a + b)
    if mid < pts[0][0] or mid > pts[-1][0]:
        return 0.0, 0.0
    xs = [p[0] for p in pts]
    i = min(bisect_right(xs, mid) - 1, len(pts) - 2)
    (x0, y0), (x1, y1) = pts[i], pts[i + 1]
    slope = (y1 - y0) / (x1 - x0)
    return y0 + slope * (a - x0), y0 + slope * (b - x0)


class Aggregate:
    """Accumulated output membership: max over terms clipped at their levels."""

    def __init__(self, components: Sequence[tuple[LinguisticTerm, float]] = ()):
        self.components = [(t, float(level)) for t, level in components if level > 0.0]

    def __call__(self, x: float) -> float:
        best = 0.0
        for term, level in self.components:
            best = max(best, min(level, membership(term, x)))
        return best

    def _breakpoints(self, lo: float, hi: float) -> list[float]:
        xs = {lo, hi}
        for term, level in self.components:
            pts = term.points
            for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
                if lo < x0 < hi:
                    xs.add(x0)
                if (y0 - level) * (y1 - level) < 0.0:
                    xc = x0 + (level - y0) * (x1 - x0) / (y1 - y0)
                    if lo < xc < hi:
                        xs.add(xc)
            if lo < pts[-1][0] < hi:
                xs.add(pts[-1][0])
        return sorted(xs)

    def moments(self, lo: float, hi: float) -> tuple[float, float]:
        """Exact (integral of mu, integral of x*mu) over [lo, hi]."""
        area = 0.0
        moment = 0.0
        bps = self._breakpoints(lo, hi)
        for a, b in zip(bps, bps[1:]):
            if b <= a:
                continue
            lines = []
            for term, level in self.components:
                ya, yb = _segment_values(term, a, b)
                lines.append((min(ya, level), min(yb, level)))
            if not lines:
                continue
            # split where two component lines cross so the max is linear on each piece
            cuts = {a, b}
            for i in range(len(lines)):
                for j in range(i + 1, len(lines)):
                    da = lines[i][0] - lines[j][0]
                    db = lines[i][1] - lines[j][1]
                    if da * db < 0.0:
                        cuts.add(a + (b - a) * da / (da - db))
            cuts_sorted = sorted(cuts)
            width = b - a
            for p, q in zip(cuts_sorted, cuts_sorted[1:]):
                if q <= p:
                    continue
                tp = (p - a) / width
                tq = (q - a) / width
                fp = max(ya + (yb - ya) * tp for ya, yb in lines)
                fq = max(ya + (yb - ya) * tq for ya, yb in lines)
                h = q - p
                area += 0.5 * (fp + fq) * h
                moment += h / 6.0 * (p * (2.0 * fp + fq) + q * (fp + 2.0 * fq))
        return area, moment


def defuzzify_cog(aggregated: Aggregate, range_: tuple[float, float], default: float = 0.0) -> float:
    lo, hi = range_
    if not lo < hi:
        raise ValueError(f"degenerate defuzzification range ({lo}, {hi})")
    area, moment = aggregated.moments(lo, hi)
    if area <= 0.0:
        return default
    return min(hi, max(lo, moment / area))


def _degree(expr, crisp: Mapping[str, float], program: FuzzyProgram) -> float:
    if isinstance(expr, Is):
        return membership(program.fuzzify(expr.variable).term(expr.term), crisp[expr.variable])
    if isinstance(expr, Not):
        return 1.0 - _degree(expr.operand, crisp, program)
    if isinstance(expr, And):
        return min(_degree(expr.left, crisp, program), _degree(expr.right, crisp, program))
    if isinstance(expr, Or):
        return max(_degree(expr.left, crisp, program), _degree(expr.right, crisp, program))
    raise TypeError(f"unknown expression node {expr!r}")


def fuzzify_inputs(program: FuzzyProgram, inputs: Mapping[str, float]) -> dict[str, float]:
    """Check coverage and clamp each crisp input to its FUZZIFY span."""
    missing = [n for n in program.input_names if n not in inputs]
    if missing:
        raise FclError(f"missing input variable(s): {', '.join(missing)}")
    crisp = {}
    for name in program.input_names:
        x = float(inputs[name])
        block = program.fuzzify(name)
        if block is not None:
            lo, hi = block.span
            x = min(hi, max(lo, x))
        crisp[name] = x
    return crisp


def activations(program: FuzzyProgram, inputs: Mapping[str, float]) -> dict[str, dict[str, float]]:
    """Per output variable, the accumulated activation level of each term."""
    crisp = fuzzify_inputs(program, inputs)
    levels: dict[str, dict[str, float]] = {name: {} for name in program.output_names}
    for block in program.rule_blocks:
        for rule in block.rules:
            strength = _degree(rule.antecedent, crisp, program) * rule.weight
            for c in rule.consequents:
                terms = levels[c.variable]
                terms[c.term] = max(terms.get(c.term, 0.0), strength)
    return levels


def aggregate_for(block: DefuzzifyBlock, term_levels: Mapping[str, float]) -> Aggregate:
    return Aggregate([(block.term(name), level) for name, level in sorted(term_levels.items())])


def evaluate(program: FuzzyProgram, inputs: Mapping[str, float]) -> dict[str, float]:
    levels = activations(program, inputs)
    out = {}
    for name in program.output_names:
        block = program.defuzzify(name)
        out[name] = defuzzify_cog(aggregate_for(block, levels[name]), block.range, block.default)
    return out
