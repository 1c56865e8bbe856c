"""Scenario files: one ``[GLOBAL]`` section followed by ``[AGENT]`` blocks.

Example::

    [GLOBAL]
    blocks = 1
    start_year = 2002
    ...

    [AGENT]
    name = P1
    role = 0
    ...

Role codes are 0 (produsen), 1 (distributor) and 2 (konsumen); 3 is accepted
as an alias for konsumen with a warning.  ``harvest_failure_chance`` is a
probability fraction in [0, 1], so 0.45 means a 45 % chance.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

ROLE_NAMES = {0: "produsen", 1: "distributor", 2: "konsumen"}
ROLE_CODES = {v: k for k, v in ROLE_NAMES.items()}
KONSUMEN_ALIAS = 3

GLOBAL_KEYS = ("blocks", "start_year", "years", "harvest_ratio", "seed_per_ha", "autonom")
GLOBAL_OPTIONAL = {
    "growth_months": 4,
    "diameter_mean_cm": 5.5,
    "diameter_sd_cm": 1.2,
    "diameter_min_cm": 1.0,
    "diameter_max_cm": 12.0,
    "lot_kg": 10.0,
}
AGENT_KEYS = (
    "gui", "name", "role", "stock_kg", "money_rp", "seed_kg", "min_diameter_cm", "max_diameter_cm",
    "production_usage_kg", "production_income_rp", "market_income_rp", "normal_buy_price_rp",
    "normal_pledge_price_rp", "harvest_failure_chance", "field_ha", "plant_cost_rp", "fcl_path", "count",
)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{self.level}: {where}{self.message}"


def format_diagnostics(diags: list[Diagnostic]) -> str:
    if not diags:
        return "OK"
    return "\n".join(str(d) for d in diags)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.level == "error" for d in diags)


class ScenarioError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__(format_diagnostics(diagnostics))


@dataclass(frozen=True)
class GlobalSpec:
    block_count: int
    start_year: int
    duration_years: int
    harvest_ratio: float
    seed_per_ha: float
    autonom: bool
    growth_months: int = 4
    diameter_mean_cm: float = 5.5
    diameter_sd_cm: float = 1.2
    diameter_min_cm: float = 1.0
    diameter_max_cm: float = 12.0
    lot_kg: float = 10.0

    @property
    def months(self) -> int:
        return 12 * self.duration_years


@dataclass(frozen=True)
class AgentSpec:
    name: str
    role: int
    gui: bool = False
    stock_start_kg: float = 0.0
    money_start_rp: float = 0.0
    seed_start_kg: float = 0.0
    min_diameter_cm: float = 0.0
    max_diameter_cm: float = 0.0
    production_usage_kg: float = 0.0
    production_income_rp_per_kg: float = 0.0
    market_income_rp_per_kg: float = 0.0
    normal_buy_price_rp_per_kg: float = 0.0
    normal_pledge_price_rp_per_kg: float = 0.0
    harvest_failure_chance: float = 0.0
    field_ha: float = 0.0
    plant_cost_rp_per_ha: float = 0.0
    fcl_path: str = ""
    agent_count: int = 1

    @property
    def service(self) -> str:
        return ROLE_NAMES[self.role]


@dataclass(frozen=True)
class Scenario:
    global_: GlobalSpec
    blocks: tuple[AgentSpec, ...]
    base_dir: Path = field(default=Path("."), compare=False)

    def expanded(self) -> list[AgentSpec]:
        """One spec per agent; blocks with count > 1 become name-1, name-2, ..."""
        out = []
        for b in self.blocks:
            if b.agent_count == 1:
                out.append(dataclasses.replace(b, agent_count=1))
            else:
                out.extend(dataclasses.replace(b, name=f"{b.name}-{i}", agent_count=1)
                           for i in range(1, b.agent_count + 1))
        return out

    def fcl_file(self, spec: AgentSpec) -> Path:
        return self.base_dir / spec.fcl_path


# map from file keys to AgentSpec fields, plus value kinds
_AGENT_FIELDS = {
    "gui": ("gui", "bool"),
    "name": ("name", "str"),
    "role": ("role", "int"),
    "stock_kg": ("stock_start_kg", "real"),
    "money_rp": ("money_start_rp", "real"),
    "seed_kg": ("seed_start_kg", "real"),
    "min_diameter_cm": ("min_diameter_cm", "real"),
    "max_diameter_cm": ("max_diameter_cm", "real"),
    "production_usage_kg": ("production_usage_kg", "real"),
    "production_income_rp": ("production_income_rp_per_kg", "real"),
    "market_income_rp": ("market_income_rp_per_kg", "real"),
    "normal_buy_price_rp": ("normal_buy_price_rp_per_kg", "real"),
    "normal_pledge_price_rp": ("normal_pledge_price_rp_per_kg", "real"),
    "harvest_failure_chance": ("harvest_failure_chance", "real"),
    "field_ha": ("field_ha", "real"),
    "plant_cost_rp": ("plant_cost_rp_per_ha", "real"),
    "fcl_path": ("fcl_path", "str"),
    "count": ("agent_count", "int"),
}
_GLOBAL_FIELDS = {
    "blocks": ("block_count", "int"),
    "start_year": ("start_year", "int"),
    "years": ("duration_years", "int"),
    "harvest_ratio": ("harvest_ratio", "real"),
    "seed_per_ha": ("seed_per_ha", "real"),
    "autonom": ("autonom", "bool"),
    "growth_months": ("growth_months", "int"),
    "diameter_mean_cm": ("diameter_mean_cm", "real"),
    "diameter_sd_cm": ("diameter_sd_cm", "real"),
    "diameter_min_cm": ("diameter_min_cm", "real"),
    "diameter_max_cm": ("diameter_max_cm", "real"),
    "lot_kg": ("lot_kg", "real"),
}


def _convert(kind: str, raw: str):
    if kind == "str":
        if not raw:
            raise ValueError("empty value")
        return raw
    if kind == "int":
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{raw!r} is not an integer")
        return int(value)
    if kind == "bool":
        if raw in ("1", "true", "True"):
            return True
        if raw in ("0", "false", "False"):
            return False
        raise ValueError(f"{raw!r} is not a boolean (0/1)")
    value = float(raw)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"{raw!r} is not finite")
    return value


@dataclass
class _Section:
    kind: str
    line: int
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)


def _split_sections(text: str, diags: list[Diagnostic]) -> list[_Section]:
    sections: list[_Section] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            kind = line[1:-1].strip().upper()
            if kind not in ("GLOBAL", "AGENT"):
                diags.append(Diagnostic("error", f"unknown section [{kind}]", lineno))
                kind = "UNKNOWN"
            sections.append(_Section(kind, lineno))
            continue
        if "=" not in line:
            diags.append(Diagnostic("error", f"expected 'key = value', got {line!r}", lineno))
            continue
        if not sections:
            diags.append(Diagnostic("error", "key outside of any section", lineno))
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        sec = sections[-1]
        if key in sec.values:
            diags.append(Diagnostic("error", f"duplicate key {key!r}", lineno))
            continue
        sec.values[key] = value
        sec.lines[key] = lineno
    return sections


def _read_fields(sec: _Section, spec_fields: dict, required: tuple, diags: list[Diagnostic]) -> Optional[dict]:
    out = {}
    ok = True
    for key in required:
        if key not in sec.values:
            diags.append(Diagnostic("error", f"[{sec.kind}] missing key {key!r}", sec.line))
            ok = False
    for key, raw in sec.values.items():
        if key not in spec_fields:
            diags.append(Diagnostic("warning", f"[{sec.kind}] unknown key {key!r} ignored", sec.lines[key]))
            continue
        attr, kind = spec_fields[key]
        try:
            out[attr] = _convert(kind, raw)
        except (ValueError, OverflowError) as exc:
            diags.append(Diagnostic("error", f"[{sec.kind}] key {key!r}: {exc}", sec.lines[key]))
            ok = False
    return out if ok else None


def parse_scenario_text(text: str, base_dir: Path = Path("."), check_files: bool = True
                        ) -> tuple[Optional[Scenario], list[Diagnostic]]:
    """Parse scenario text; never raises on bad input, returns diagnostics instead."""
    diags: list[Diagnostic] = []
    sections = _split_sections(text, diags)
    globals_ = [s for s in sections if s.kind == "GLOBAL"]
    agents = [s for s in sections if s.kind == "AGENT"]
    if not globals_:
        diags.append(Diagnostic("error", "missing [GLOBAL] section"))
        return None, diags
    if len(globals_) > 1:
        diags.append(Diagnostic("error", "more than one [GLOBAL] section", globals_[1].line))
    if sections[0].kind != "GLOBAL":
        diags.append(Diagnostic("error", "[GLOBAL] must be the first section", globals_[0].line))

    gvals = _read_fields(globals_[0], _GLOBAL_FIELDS, GLOBAL_KEYS, diags)
    gspec = None
    if gvals is not None:
        gspec = GlobalSpec(**gvals)
        gline = globals_[0].line
        for attr in ("block_count", "duration_years", "growth_months"):
            if getattr(gspec, attr) < 1:
                diags.append(Diagnostic("error", f"{attr} must be a positive integer", gline))
        for attr in ("harvest_ratio", "seed_per_ha", "lot_kg"):
            if not getattr(gspec, attr) > 0:
                diags.append(Diagnostic("error", f"{attr} must be positive", gline))
        if gspec.diameter_sd_cm < 0 or not 0 < gspec.diameter_min_cm <= gspec.diameter_max_cm:
            diags.append(Diagnostic("error", "invalid diameter model parameters", gline))
        if gspec.block_count != len(agents):
            diags.append(Diagnostic(
                "error", f"block count mismatch: expected {gspec.block_count} [AGENT] sections, found {len(agents)}",
                gline))

    specs: list[AgentSpec] = []
    for sec in agents:
        vals = _read_fields(sec, _AGENT_FIELDS, AGENT_KEYS, diags)
        if vals is None:
            continue
        role = vals["role"]
        if role == KONSUMEN_ALIAS:
            diags.append(Diagnostic("warning", f"agent {vals['name']!r}: role code 3 read as konsumen (2)",
                                    sec.lines["role"]))
            vals["role"] = ROLE_CODES["konsumen"]
        elif role not in ROLE_NAMES:
            diags.append(Diagnostic("error", f"agent {vals['name']!r}: unknown role code {role}", sec.lines["role"]))
            continue
        spec = AgentSpec(**vals)
        bad = _field_range_errors(spec)
        for msg in bad:
            diags.append(Diagnostic("error", f"agent {spec.name!r}: {msg}", sec.line))
        if bad:
            continue
        if any(c.isspace() for c in spec.name):
            diags.append(Diagnostic("error", f"agent name {spec.name!r} contains whitespace", sec.lines["name"]))
            continue
        if check_files:
            path = base_dir / spec.fcl_path
            try:
                readable = path.is_file() and os.access(path, os.R_OK)
            except (OSError, ValueError):
                readable = False
            if not readable:
                diags.append(Diagnostic("error", f"agent {spec.name!r}: unreadable FCL path {spec.fcl_path!r}",
                                        sec.lines["fcl_path"]))
                continue
        specs.append(spec)

    if has_errors(diags) or gspec is None:
        return None, diags
    scenario = Scenario(gspec, tuple(specs), base_dir=base_dir)
    names = [s.name for s in scenario.expanded()]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        diags.append(Diagnostic("error", f"duplicate agent names: {', '.join(dupes)}"))
        return None, diags
    return scenario, diags


def _field_range_errors(spec: AgentSpec) -> list[str]:
    errors = []
    for f in dataclasses.fields(spec):
        value = getattr(spec, f.name)
        if isinstance(value, float) and value < 0:
            errors.append(f"{f.name} must be non-negative")
    if not 0.0 <= spec.harvest_failure_chance <= 1.0:
        errors.append("harvest_failure_chance must be a fraction in [0, 1]")
    if spec.agent_count < 1:
        errors.append("count must be a positive integer")
    return errors


def parse_scenario(path) -> Scenario:
    """Load a scenario file; raises :class:`ScenarioError` if it has errors.

    FCL paths are resolved relative to the scenario file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError([Diagnostic("error", f"cannot read scenario {str(path)!r}: {exc}")]) from None
    scenario, diags = parse_scenario_text(text, base_dir=path.resolve().parent)
    if scenario is None:
        raise ScenarioError(diags)
    return scenario


def scenario_diagnostics(path) -> list[Diagnostic]:
    """Parse-time plus semantic diagnostics for a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return [Diagnostic("error", f"cannot read scenario {str(path)!r}: {exc}")]
    scenario, diags = parse_scenario_text(text, base_dir=path.resolve().parent)
    if scenario is not None:
        diags.extend(validate(scenario))
    return diags


def validate(scenario: Scenario) -> list[Diagnostic]:
    diags = []
    for spec in scenario.blocks:
        role = spec.service
        if role == "konsumen" and spec.production_usage_kg == 0:
            diags.append(Diagnostic("warning", f"konsumen {spec.name!r} has production_usage_kg 0 and never produces"))
        if role == "produsen" and spec.field_ha == 0 and spec.seed_start_kg > 0:
            diags.append(Diagnostic("warning", f"produsen {spec.name!r} has seed but no field to plant it in"))
        if role != "produsen" and spec.field_ha > 0:
            diags.append(Diagnostic("error", f"{role} {spec.name!r} cannot own a field (field_ha must be 0)"))
        if spec.min_diameter_cm > 0 and spec.max_diameter_cm > 0 and spec.min_diameter_cm > spec.max_diameter_cm:
            diags.append(Diagnostic(
                "error", f"agent {spec.name!r}: min_diameter_cm {spec.min_diameter_cm} > max_diameter_cm "
                         f"{spec.max_diameter_cm}"))
    return diags


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_scenario(scenario: Scenario) -> str:
    """Serialize back to the file format; re-parsing yields an equal Scenario."""
    g = scenario.global_
    lines = ["[GLOBAL]"]
    for key, (attr, _) in _GLOBAL_FIELDS.items():
        value = getattr(g, attr)
        if key in GLOBAL_OPTIONAL and value == GLOBAL_OPTIONAL[key]:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    for spec in scenario.blocks:
        lines.extend(["", "[AGENT]"])
        for key, (attr, _) in _AGENT_FIELDS.items():
            lines.append(f"{key} = {_fmt(getattr(spec, attr))}")
    return "\n".join(lines) + "\n"
