"""Generators and independent oracles shared by the test modules."""

from __future__ import annotations

import random
from decimal import Decimal, localcontext
from pathlib import Path

import numpy as np

from potatomarket.market import bundled_data_dir

SCRIPT_DIR = bundled_data_dir() / "script"
ORACLE_SAMPLES = 100_001


# random FCL programs

def _r6(x: float) -> float:
    return round(x, 6)


def _increasing(rng: random.Random, lo: float, hi: float, n: int) -> list[float]:
    """n distinct 6-decimal values in [lo, hi], increasing, first lo and last hi."""
    inner = sorted({_r6(rng.uniform(lo, hi)) for _ in range(n - 2)} - {_r6(lo), _r6(hi)})
    return [_r6(lo)] + inner + [_r6(hi)]


def _input_terms(rng: random.Random, lo: float, hi: float, count: int) -> list[list[tuple[float, float]]]:
    terms = []
    for _ in range(count):
        a, b = sorted(rng.uniform(lo, hi) for _ in range(2))
        if b - a < 0.05 * (hi - lo):
            a, b = lo, hi
        xs = _increasing(rng, a, b, rng.choice([2, 3, 4]))
        terms.append([(x, _r6(rng.random())) for x in xs])
    # cover the whole span so clamping never leaves an input outside every term
    terms[0][0] = (_r6(lo), terms[0][0][1])
    terms[-1][-1] = (_r6(hi), terms[-1][-1][1])
    return terms


def _output_terms(rng: random.Random, lo: float, hi: float, count: int) -> list[list[tuple[float, float]]]:
    """Terms that rise from and fall back to 0 inside the range, so mu is continuous."""
    terms = []
    for _ in range(count):
        a, b = sorted(rng.uniform(lo, hi) for _ in range(2))
        if b - a < 0.05 * (hi - lo):
            mid = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
            a, b = mid - 0.05 * (hi - lo), mid + 0.05 * (hi - lo)
        xs = _increasing(rng, a, b, rng.choice([3, 4, 5]))
        mus = [0.0] + [_r6(rng.uniform(0.2, 1.0)) for _ in xs[1:-1]] + [0.0]
        terms.append(list(zip(xs, mus)))
    return terms


def _expr(rng: random.Random, inputs: dict, depth: int) -> str:
    if depth == 0 or rng.random() < 0.35:
        var = rng.choice(sorted(inputs))
        term = rng.choice(inputs[var])
        if rng.random() < 0.2:
            return f"{var} IS NOT {term}"
        return f"{var} IS {term}"
    if rng.random() < 0.15:
        return f"NOT ({_expr(rng, inputs, depth - 1)})"
    op = rng.choice(["AND", "OR"])
    return f"({_expr(rng, inputs, depth - 1)} {op} {_expr(rng, inputs, depth - 1)})"


def _points(points) -> str:
    return " ".join(f"({x:.6f}, {mu:.6f})" for x, mu in points)


def random_fcl(seed: int, n_inputs: int = 2, n_outputs: int = 1) -> str:
    """A random well-formed program in the supported FCL subset."""
    rng = random.Random(seed)
    spans, inputs, lines = {}, {}, [f"FUNCTION_BLOCK gen{seed}", "VAR_INPUT"]
    for i in range(n_inputs):
        lines.append(f"    in{i} : REAL;")
    lines += ["END_VAR", "VAR_OUTPUT"]
    for j in range(n_outputs):
        lines.append(f"    out{j} : REAL;")
    lines.append("END_VAR")
    for i in range(n_inputs):
        lo = _r6(rng.uniform(-10, 5))
        hi = _r6(lo + rng.uniform(1, 20))
        spans[f"in{i}"] = (lo, hi)
        terms = _input_terms(rng, lo, hi, rng.choice([2, 3, 4]))
        inputs[f"in{i}"] = [f"t{k}" for k in range(len(terms))]
        lines.append(f"FUZZIFY in{i}")
        lines += [f"    TERM t{k} := {_points(p)};" for k, p in enumerate(terms)]
        lines.append("END_FUZZIFY")
    outputs = {}
    for j in range(n_outputs):
        lo = _r6(rng.uniform(-5, 5))
        hi = _r6(lo + rng.uniform(1, 10))
        terms = _output_terms(rng, lo, hi, rng.choice([2, 3, 4]))
        outputs[f"out{j}"] = [f"o{k}" for k in range(len(terms))]
        lines.append(f"DEFUZZIFY out{j}")
        lines += [f"    TERM o{k} := {_points(p)};" for k, p in enumerate(terms)]
        lines += ["    METHOD : COG;", f"    DEFAULT := {_r6(rng.uniform(lo, hi)):.6f};",
                  f"    RANGE := ({lo:.6f} .. {hi:.6f});", "END_DEFUZZIFY"]
    lines += ["RULEBLOCK rules", "    AND : MIN;", "    OR : MAX;", "    ACT : MIN;", "    ACCU : MAX;"]
    for r in range(1, rng.randint(1, 6) + 1):
        ant = _expr(rng, inputs, 2)
        outs = sorted(rng.sample(sorted(outputs), rng.randint(1, n_outputs)))
        cons = ", ".join(f"{o} IS {rng.choice(outputs[o])}" for o in outs)
        weight = "" if rng.random() < 0.5 else f" WITH {_r6(rng.uniform(0.1, 1.0)):.6f}"
        lines.append(f"    RULE {r} : IF {ant} THEN {cons}{weight};")
    lines += ["END_RULEBLOCK", "END_FUNCTION_BLOCK"]
    return "\n".join(lines) + "\n"


def random_inputs(program, rng: random.Random) -> dict[str, float]:
    return {v: rng.uniform(*program.fuzzify(v).span) for v in program.input_names}


# dense-sampling oracle, written without the engine

def _mu(points, x):
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    x = np.asarray(x, dtype=float)
    inside = (x >= xs[0]) & (x <= xs[-1])
    return np.where(inside, np.interp(x, xs, ys), 0.0)


def _strength(expr, program, crisp) -> float:
    kind = type(expr).__name__
    if kind == "Is":
        return float(_mu(program.fuzzify(expr.variable).term(expr.term).points, crisp[expr.variable]))
    if kind == "Not":
        return 1.0 - _strength(expr.operand, program, crisp)
    a, b = _strength(expr.left, program, crisp), _strength(expr.right, program, crisp)
    return min(a, b) if kind == "And" else max(a, b)


def oracle_evaluate(program, inputs: dict[str, float], samples: int = ORACLE_SAMPLES) -> dict[str, float]:
    crisp = {}
    for name in program.input_names:
        lo, hi = program.fuzzify(name).span
        crisp[name] = min(hi, max(lo, inputs[name]))
    results = {}
    for out in program.output_names:
        block = program.defuzzify(out)
        lo, hi = block.range
        xs = np.linspace(lo, hi, samples)
        agg = np.zeros_like(xs)
        for rb in program.rule_blocks:
            for rule in rb.rules:
                level = _strength(rule.antecedent, program, crisp) * rule.weight
                for c in rule.consequents:
                    if c.variable == out and level > 0:
                        agg = np.maximum(agg, np.minimum(level, _mu(block.term(c.term).points, xs)))
        w = np.ones(samples)
        w[0] = w[-1] = 0.5
        area = float(np.sum(w * agg))
        results[out] = block.default if area <= 0 else float(np.sum(w * agg * xs) / area)
    return results


def dense_cog(fn, lo: float, hi: float, samples: int = ORACLE_SAMPLES) -> float:
    xs = np.linspace(lo, hi, samples)
    ys = np.array([fn(x) for x in xs])
    w = np.ones(samples)
    w[0] = w[-1] = 0.5
    return float(np.sum(w * ys * xs) / np.sum(w * ys))


# extended-precision MLP loss for finite differences

def decimal_loss(params, x, t, window: int, hidden: int, digits: int = 40):
    """0.5 * (forward - t)**2 evaluated in ``digits``-digit decimal arithmetic."""
    with localcontext() as ctx:
        ctx.prec = digits
        p = [v if isinstance(v, Decimal) else Decimal(float(v)) for v in params]
        xs = [Decimal(float(v)) for v in x]
        one = Decimal(1)
        hid = []
        for i in range(hidden):
            z = sum((p[i * window + k] * xs[k] for k in range(window)), Decimal(0)) + p[hidden * window + i]
            hid.append(one / (one + (-z).exp()))
        base = hidden * window + hidden
        z = sum((p[base + i] * hid[i] for i in range(hidden)), Decimal(0)) + p[base + hidden]
        y = one / (one + (-z).exp())
        return (y - Decimal(float(t))) ** 2 / 2


def decimal_central_difference(params, x, t, window: int, hidden: int, eps: float = 1e-5) -> list[float]:
    grads = []
    with localcontext() as ctx:
        ctx.prec = 40
        e = Decimal(eps)
        for i in range(len(params)):
            up = list(map(Decimal, map(float, params)))
            down = list(up)
            up[i] += e
            down[i] -= e
            fd = (decimal_loss(up, x, t, window, hidden) - decimal_loss(down, x, t, window, hidden)) / (2 * e)
            grads.append(float(fd))
    return grads


# scenario fuzzing

AGENT_TEMPLATE = """
[AGENT]
gui = 0
name = {name}
role = {role}
stock_kg = {stock}
money_rp = {money}
seed_kg = {seed}
min_diameter_cm = {dmin}
max_diameter_cm = {dmax}
production_usage_kg = {usage}
production_income_rp = {pinc}
market_income_rp = {minc}
normal_buy_price_rp = {buy}
normal_pledge_price_rp = {pledge}
harvest_failure_chance = {fail}
field_ha = {field}
plant_cost_rp = {cost}
fcl_path = {fcl}
count = {count}
"""


def random_scenario_text(seed: int, max_years: int = 2) -> str:
    """A valid random scenario with parameters in the ranges of the agent table."""
    rng = random.Random(seed)
    roles = [0, 1, 2] + [rng.choice([0, 1, 2]) for _ in range(rng.randint(0, 4))]
    rng.shuffle(roles)
    blocks = []
    names = {0: "P", 1: "D", 2: "K"}
    fcl = {0: "produsen", 1: "distributor", 2: "konsumen"}
    for i, role in enumerate(roles):
        dmin = round(rng.choice([0, rng.uniform(0, 6)]), 2)
        dmax = round(rng.choice([0, dmin + rng.uniform(0, 6)]), 2)
        blocks.append(AGENT_TEMPLATE.format(
            name=f"{names[role]}{i + 1}", role=role,
            stock=round(rng.uniform(0, 300), 3), money=round(rng.uniform(0, 3e6), 2),
            seed=round(rng.uniform(0, 400), 3) if role == 0 else round(rng.uniform(0, 50), 3),
            dmin=dmin, dmax=dmax,
            usage=round(rng.uniform(0, 200), 3) if role == 2 else 0,
            pinc=round(rng.uniform(0, 40000), 2) if role == 2 else 0,
            minc=round(rng.uniform(0, 3000), 2), buy=round(rng.uniform(0, 9000), 2),
            pledge=round(rng.uniform(0, 9000), 2) if role == 2 else 0,
            fail=round(rng.random(), 3),
            field=round(rng.uniform(0, 3), 3) if role == 0 else 0,
            cost=round(rng.uniform(0, 80000), 2),
            fcl=(SCRIPT_DIR / f"{fcl[role]}.fcl").as_posix(), count=rng.randint(1, 2)))
    head = (f"[GLOBAL]\nblocks = {len(blocks)}\nstart_year = {rng.randint(1990, 2020)}\n"
            f"years = {rng.randint(1, max_years)}\nharvest_ratio = {round(rng.uniform(0.5, 4), 3)}\n"
            f"seed_per_ha = {round(rng.uniform(100, 2000), 2)}\nautonom = 1\n"
            f"growth_months = {rng.randint(1, 6)}\n")
    return head + "".join(blocks)


def write_scenario(tmp: Path, text: str, name: str = "fuzz.scn") -> Path:
    path = tmp / name
    path.write_text(text, encoding="utf-8")
    return path
