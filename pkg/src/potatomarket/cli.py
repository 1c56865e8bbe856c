"""simctl: run, step, validate and benchmark market scenarios."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TextIO

from .market import Simulation, bundled_data_dir
from .predict import TrainConfig, predict_next, series_seed
from .report import METRICS, YearlySeries, write_series
from .scenario import (
    AgentSpec,
    GlobalSpec,
    Scenario,
    ScenarioError,
    format_diagnostics,
    has_errors,
    parse_scenario,
    scenario_diagnostics,
)

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_RUNTIME = 0, 1, 2
DEFAULT_LADDER = (2, 7, 12, 17, 22)


@dataclass(frozen=True)
class RunOptions:
    scenario_path: Path
    out_dir: Path
    seed: int = 42
    wall_delay_ms: int = 0
    log_messages: bool = False


def agent_series(sim: Simulation, seed: int, config: TrainConfig = TrainConfig()) -> list[YearlySeries]:
    """Finance and commodity series for every agent, each with its predicted next value."""
    out = []
    for agent in sim.agents():
        for metric in METRICS:
            values = agent.state.finance_series if metric == "finance" else agent.state.commodity_series
            cfg = dataclasses.replace(config, seed=series_seed(seed, agent.name, metric))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                predicted = predict_next([values[y] for y in sorted(values)], cfg) if values else None
            out.append(YearlySeries.from_mapping(agent.name, metric, values, predicted))
    return out


def write_outputs(sim: Simulation, out_dir: Path, seed: int, log_messages: bool = False) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for series in agent_series(sim, seed):
        written.extend(write_series(series, out_dir))
    if log_messages:
        path = out_dir / "messages.tsv"
        path.write_text(sim.world.dump_log(), encoding="utf-8")
        written.append(path)
    return written


def format_status(sim: Simulation, name: str) -> str:
    agent = sim.market.get(name)
    if agent is None:
        return f"no such agent: {name}"
    st = agent.state
    lines = [
        f"{name} ({agent.service}) at {sim.date if sim.months_done else 'start'}",
        f"  money  {st.money_rp:.2f} Rp",
        f"  stock  {st.stock_kg:.2f} kg in {len(st.stock)} lots",
        f"  seed   {st.seed_kg:.2f} kg",
        f"  field  {st.spec.field_ha:.2f} Ha, {len(st.batches)} planted batch(es)",
    ]
    if st.pledge is not None:
        p = st.pledge
        lines.append(f"  pledge {p.produsen}->{p.konsumen} at {p.price_rp_per_kg:.2f} ({p.status})")
    for entry in agent.log[-5:]:
        lines.append(f"  log    {entry}")
    return "\n".join(lines)


def summary(sim: Simulation, seconds: float) -> str:
    return (f"agents={len(sim.market)} months={sim.months_done} "
            f"messages={sim.world.total_sent} duration={seconds:.2f}s")


def _load(path: Path, err: TextIO) -> Optional[Scenario]:
    if not path.is_file():
        print(f"error: cannot read scenario {path}", file=err)
        return None
    diags = scenario_diagnostics(path)
    if has_errors(diags):
        print(format_diagnostics(diags), file=err)
        return None
    if diags:
        print(format_diagnostics(diags), file=err)
    try:
        return parse_scenario(path)
    except ScenarioError as exc:
        print(format_diagnostics(exc.diagnostics), file=err)
        return None


def _pace(opts: RunOptions) -> None:
    if opts.wall_delay_ms > 0:
        time.sleep(opts.wall_delay_ms / 1000.0)


def cmd_run(opts: RunOptions, stdin: Optional[TextIO] = None, out: Optional[TextIO] = None,
            err: Optional[TextIO] = None) -> int:
    stdin, out, err = stdin or sys.stdin, out or sys.stdout, err or sys.stderr
    scenario = _load(opts.scenario_path, err)
    if scenario is None:
        return EXIT_DIAGNOSTICS
    started = time.perf_counter()
    try:
        sim = Simulation(scenario, seed=opts.seed, keep_log=True)
        if scenario.global_.autonom:
            sim.run(on_month=lambda _: _pace(opts))
        elif not _repl(sim, opts, stdin, out):
            return EXIT_OK
        write_outputs(sim, opts.out_dir, opts.seed, opts.log_messages)
    except Exception as exc:  # noqa: BLE001 - any simulation failure maps to one exit code
        print(f"error: simulation failed: {exc}", file=err)
        return EXIT_RUNTIME
    print(summary(sim, time.perf_counter() - started), file=out)
    return EXIT_OK


def _repl(sim: Simulation, opts: RunOptions, stdin: TextIO, out: TextIO) -> bool:
    """Manual stepping; True once every month ran, False if the user quit early."""
    print(f"manual mode: {sim.total_months} months; commands: step [n], status <agent>, quit", file=out)
    while True:
        if sim.months_done >= sim.total_months:
            sim.finish()
            print("simulation complete", file=out)
            return True
        print("simctl> ", end="", file=out, flush=True)
        line = stdin.readline()
        if not line:
            return False
        words = line.split()
        if not words:
            continue
        cmd, args = words[0].lower(), words[1:]
        if cmd == "quit":
            print(f"stopped after {sim.months_done} months; no outputs written", file=out)
            return False
        if cmd == "step":
            try:
                n = int(args[0]) if args else 1
            except ValueError:
                print(f"bad step count: {args[0]}", file=out)
                continue
            for _ in range(max(0, min(n, sim.total_months - sim.months_done))):
                sim.step_month()
                _pace(opts)
            print(f"now at {sim.date} ({sim.months_done}/{sim.total_months})", file=out)
        elif cmd == "status" and len(args) == 1:
            print(format_status(sim, args[0]), file=out)
        else:
            print(f"unknown command: {line.strip()}", file=out)


def cmd_validate(path: Path, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    if not path.is_file():
        print(f"error: cannot read scenario {path}", file=out)
        return EXIT_DIAGNOSTICS
    diags = scenario_diagnostics(path)
    print(format_diagnostics(diags), file=out)
    return EXIT_DIAGNOSTICS if has_errors(diags) else EXIT_OK


# strain benchmark

@dataclass(frozen=True)
class BenchRow:
    per_role: int
    total_agents: int
    seconds: float
    peak_in_flight: int
    messages: int


def bench_scenario(per_role: int, years: int, template: Optional[Scenario] = None) -> Scenario:
    """Clone the dummy blocks into ``per_role`` agents of each role.

    Clones alternate between the template's agents of a role and are numbered
    P1..Pn, D(n+1)..D(2n), K(2n+1)..K(3n).
    """
    template = template or parse_scenario(bundled_data_dir() / "dummy.scn")
    by_role: dict[str, list[AgentSpec]] = {}
    for spec in template.blocks:
        by_role.setdefault(spec.service, []).append(spec)
    blocks = []
    for offset, (role, prefix) in enumerate((("produsen", "P"), ("distributor", "D"), ("konsumen", "K"))):
        pool = by_role[role]
        for i in range(per_role):
            number = offset * per_role + i + 1
            blocks.append(dataclasses.replace(pool[i % len(pool)], name=f"{prefix}{number}", agent_count=1))
    global_ = dataclasses.replace(template.global_, block_count=len(blocks), duration_years=years, autonom=True)
    return Scenario(global_, tuple(blocks), template.base_dir)


def run_bench(ladder, years: int = 8, seed: int = 42) -> list[BenchRow]:
    template = parse_scenario(bundled_data_dir() / "dummy.scn")
    rows = []
    for n in ladder:
        scenario = bench_scenario(n, years, template)
        started = time.perf_counter()
        sim = Simulation(scenario, seed=seed, keep_log=False)
        sim.run()
        rows.append(BenchRow(n, len(scenario.blocks), time.perf_counter() - started,
                             sim.world.peak_in_flight, sim.world.total_sent))
    return rows


def format_bench(rows) -> str:
    lines = ["per_role\ttotal_agents\tseconds\tpeak_in_flight\tmessages"]
    for r in rows:
        lines.append(f"{r.per_role}\t{r.total_agents}\t{r.seconds:.3f}\t{r.peak_in_flight}\t{r.messages}")
    return "\n".join(lines)


def _ladder(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}")
    return values


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simctl", description="Potato commodity market simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write tables and charts")
    run.add_argument("scenario", type=Path)
    run.add_argument("-o", "--out", type=Path, default=None,
                     help="output directory (default: $SIMCTL_OUT or ./out)")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--wall-delay-ms", type=_non_negative, default=0)
    run.add_argument("--log-messages", action="store_true", help="also write messages.tsv")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario", type=Path)

    bench = sub.add_parser("bench", help="run the strain ladder")
    bench.add_argument("--ladder", type=_ladder, default=list(DEFAULT_LADDER))
    bench.add_argument("--years", type=int, default=8)
    bench.add_argument("--seed", type=int, default=42)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        out_dir = args.out or Path(os.environ.get("SIMCTL_OUT", "out"))
        return cmd_run(RunOptions(args.scenario, out_dir, args.seed, args.wall_delay_ms, args.log_messages))
    if args.command == "validate":
        return cmd_validate(args.scenario)
    print(format_bench(run_bench(args.ladder, args.years, args.seed)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
