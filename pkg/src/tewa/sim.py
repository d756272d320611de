"""Scenario ingestion and the deterministic tick loop.

One tick is one simulated second. Each tick: red kinematics advance, the SRA
folds in its radar status observation, newly detected tracks pass the IFF
filter and are released to the ADDCA, and the ADDCA handles one queued event.
Events between agents arrive on the following tick.
"""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import agents, threat
from .agents import (
    ADDCA, ENV, NEW_CLUSTER, SRA, AddcaBeliefs, DirectionCenterAgent, Event,
    SurveillanceRadarAgent, TraceEntry, WeaponStock,
)
from .errors import ParseError, ValidationError
from .evaluation import TraceReport, check_trace_conflicts

MACH_KM_S = 0.343


# -- scenario ----------------------------------------------------------------

@dataclass(frozen=True)
class Platform:
    kind: str
    lethality: str
    value: float


@dataclass(frozen=True)
class AirGroup:
    id: str
    kind: str
    count: int
    position: tuple[float, float]
    mach: float
    altitude: float
    aoa: float
    intent: Mapping[str, float]
    iff_response: str | None = None
    spacing_km: float = 0.0


@dataclass(frozen=True)
class Radar:
    theta_jam: float = 0.3
    k: int = 3
    detection_range_km: float = 200.0
    iff_code: str = "IFF"
    jitter_km: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    arena: tuple[float, float]
    defended_asset: tuple[float, float]
    cl: float
    platforms: Mapping[str, Platform]
    red_force: tuple[AirGroup, ...]
    weapons: tuple[WeaponStock, ...]
    radar: Radar = Radar()
    friendly_air: tuple[AirGroup, ...] = ()
    interceptors: int = 0
    window: int = 10
    solver: str = "ga"
    generations: int = 30

    def catalogue(self) -> dict[str, str]:
        return {k: p.lethality for k, p in self.platforms.items()}

    def order_of_battle(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.red_force:
            out[g.kind] = out.get(g.kind, 0) + g.count
        return out


def _need(doc, key, path):
    if not isinstance(doc, Mapping) or key not in doc:
        raise ValidationError(f"{path}.{key}" if path else key, "missing required field")
    return doc[key]


def _num(v, path, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(path, f"expected a finite number, got {v!r}")
    if lo is not None and v < lo:
        raise ValidationError(path, f"must be >= {lo}")
    if hi is not None and v > hi:
        raise ValidationError(path, f"must be <= {hi}")
    return float(v)


def _pair(v, path):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValidationError(path, "expected [x, y]")
    return (_num(v[0], f"{path}[0]"), _num(v[1], f"{path}[1]"))


def _group(doc, path, platforms, arena) -> AirGroup:
    kind = _need(doc, "kind", path)
    if kind not in platforms:
        raise ValidationError(f"{path}.kind", f"unknown platform kind {kind!r}")
    count = _need(doc, "count", path)
    if not isinstance(count, int) or count < 1:
        raise ValidationError(f"{path}.count", "must be a positive integer")
    pos = _pair(_need(doc, "position", path), f"{path}.position")
    if not (0 <= pos[0] <= arena[0] and 0 <= pos[1] <= arena[1]):
        raise ValidationError(f"{path}.position", f"{pos} lies outside the arena {arena}")
    intent = _need(doc, "intent", path)
    if not isinstance(intent, Mapping) or not intent:
        raise ValidationError(f"{path}.intent", "expected a class -> evidence mapping")
    for c, e in intent.items():
        if c not in threat.INTENT_CLASSES:
            raise ValidationError(f"{path}.intent.{c}", "unknown intent class")
        _num(e, f"{path}.intent.{c}", lo=0)
    if abs(sum(intent.values()) - 1.0) > 1e-9:
        raise ValidationError(f"{path}.intent", "evidence must sum to 1")
    return AirGroup(
        id=str(_need(doc, "id", path)),
        kind=kind,
        count=count,
        position=pos,
        mach=_num(_need(doc, "mach", path), f"{path}.mach", lo=0),
        altitude=_num(_need(doc, "altitude_km", path), f"{path}.altitude_km", lo=0),
        aoa=_num(_need(doc, "aoa_deg", path), f"{path}.aoa_deg", lo=0, hi=90),
        intent=dict(intent),
        iff_response=doc.get("iff_response"),
        spacing_km=_num(doc.get("spacing_km", 0.0), f"{path}.spacing_km", lo=0),
    )


def scenario_from_dict(doc: Mapping) -> Scenario:
    arena = _pair(_need(doc, "arena_km", ""), "arena_km")
    if arena[0] <= 0 or arena[1] <= 0:
        raise ValidationError("arena_km", "extent must be positive")
    asset = _pair(_need(doc, "defended_asset", ""), "defended_asset")
    cl = _num(_need(doc, "cl", ""), "cl", 0, 1)

    platforms = {}
    for kind, p in _need(doc, "platforms", "").items():
        path = f"platforms.{kind}"
        leth = _need(p, "lethality", path)
        if leth not in threat.LETHALITY:
            raise ValidationError(f"{path}.lethality", f"must be one of {threat.LETHALITY}")
        platforms[kind] = Platform(kind, leth, _num(_need(p, "value", path), f"{path}.value", lo=1e-12))

    red = _need(doc, "red_force", "")
    if not isinstance(red, list) or not red:
        raise ValidationError("red_force", "must list at least one group")
    red_force = tuple(_group(g, f"red_force[{i}]", platforms, arena) for i, g in enumerate(red))
    friendly = tuple(
        _group(g, f"friendly_air[{i}]", platforms, arena) for i, g in enumerate(doc.get("friendly_air", []))
    )
    ids = [g.id for g in red_force + friendly]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ValidationError("red_force", f"duplicate group ids {dup}")

    blue = _need(doc, "blue_force", "")
    weapons = []
    for i, w in enumerate(_need(blue, "weapons", "blue_force")):
        path = f"blue_force.weapons[{i}]"
        inv = _need(w, "inventory", path)
        if not isinstance(inv, int) or inv < 0:
            raise ValidationError(f"{path}.inventory", "must be a non-negative integer")
        salvo = dict(w.get("salvo", {}))
        kp = dict(_need(w, "kill_prob", path))
        for k in list(salvo) + list(kp):
            if k not in platforms:
                raise ValidationError(f"{path}", f"unknown platform kind {k!r}")
        for k, n in salvo.items():
            if not isinstance(n, int) or n < 1:
                raise ValidationError(f"{path}.salvo.{k}", "must be a positive integer")
        for k, p in kp.items():
            _num(p, f"{path}.kill_prob.{k}", 0, 1)
        weapons.append(WeaponStock(str(_need(w, "id", path)), inv, salvo, kp))
    interceptors = blue.get("interceptors", 0)
    if not isinstance(interceptors, int) or interceptors < 0:
        raise ValidationError("blue_force.interceptors", "must be a non-negative integer")

    r = doc.get("radar", {})
    radar = Radar(
        theta_jam=_num(r.get("theta_jam", 0.3), "radar.theta_jam", lo=0),
        k=int(r.get("k", 3)),
        detection_range_km=_num(r.get("detection_range_km", 200.0), "radar.detection_range_km", lo=0),
        iff_code=str(r.get("iff_code", "IFF")),
        jitter_km=_num(r.get("jitter_km", 0.0), "radar.jitter_km", lo=0),
    )
    if radar.k < 1:
        raise ValidationError("radar.k", "must be >= 1")
    a = doc.get("addca", {})
    solver = a.get("solver", "ga")
    if solver not in ("ga", "greedy", "exact"):
        raise ValidationError("addca.solver", f"unknown solver {solver!r}")
    return Scenario(
        name=str(doc.get("name", "scenario")),
        arena=arena,
        defended_asset=asset,
        cl=cl,
        platforms=platforms,
        red_force=red_force,
        weapons=tuple(weapons),
        radar=radar,
        friendly_air=friendly,
        interceptors=interceptors,
        window=int(a.get("window", 10)),
        solver=solver,
        generations=int(a.get("generations", 30)),
    )


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


def bundled_scenario_path(name: str = "paper_iv") -> Path:
    return Path(str(resources.files("tewa") / "data" / f"{name}.json"))


# -- random streams ----------------------------------------------------------

def derive_seed(root: int, replication: int, label: str) -> int:
    """Independent 64-bit seed per (root, replication, subsystem label)."""
    ss = np.random.SeedSequence([root, replication, zlib.crc32(label.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def poisson_variate(rng: np.random.Generator, mean: float) -> int:
    """Poisson draw by sequential search of the inverse CDF."""
    u = rng.random()
    k = 0
    p = math.exp(-mean)
    cdf = p
    while u > cdf:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0 and k > mean:
            break
    return k


@dataclass(frozen=True)
class JamInjection:
    enabled: bool = True
    scale: float = 1.0
    duty: float = 0.4
    mean_burst: float = 4.0


def jam_schedule(rng: np.random.Generator, ticks: int, inj: JamInjection) -> list[bool]:
    """Two-state Markov on/off process with stationary on-fraction ``duty``."""
    if not inj.enabled:
        return [False] * ticks
    leave_on = 1.0 / inj.mean_burst
    enter_on = inj.duty / (1.0 - inj.duty) * leave_on
    on = rng.random() < inj.duty
    out = []
    for t in range(ticks):
        if t > 0:
            on = rng.random() >= leave_on if on else rng.random() < enter_on
        out.append(on)
    return out


def generate_status_stream(
    seed: int, ticks: int, jam_injection: bool | JamInjection = False, mean: float = 20.0,
    with_schedule: bool = False,
):
    """Radar status counts, Poisson(``mean``); injected jams raise the mean by ``scale``."""
    if ticks < 2:
        raise ValueError("ticks must be >= 2")
    inj = jam_injection if isinstance(jam_injection, JamInjection) else JamInjection(enabled=bool(jam_injection))
    rng = np.random.default_rng(seed)
    sched = jam_schedule(rng, ticks, inj)
    values = [poisson_variate(rng, mean * (1.0 + inj.scale) if on else mean) for on in sched]
    return (values, sched) if with_schedule else values


# -- run ---------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    ticks: int = 120
    replications: int = 1
    jam: JamInjection = JamInjection()
    solver: str | None = None
    generations: int | None = None
    inject_fault_at: int | None = None

    def __post_init__(self):
        if self.ticks < 2:
            raise ValidationError("ticks", "must be >= 2")
        if self.replications < 1:
            raise ValidationError("replications", "must be >= 1")


@dataclass
class Unit:
    id: str
    group: AirGroup
    x: float
    y: float
    friendly_code: bool
    released: bool = False
    filtered: bool = False


@dataclass
class RunReport:
    scenario: str
    seed: int
    replication: int
    ticks: int
    threat_lists: list = field(default_factory=list)
    allocations: list = field(default_factory=list)
    intercepts: list = field(default_factory=list)
    trace: list[TraceEntry] = field(default_factory=list)
    events: list = field(default_factory=list)
    jam_count: int = 0
    message_count: int = 0
    rd_ticks: int = 0
    friendly_filtered: int = 0
    released: int = 0
    leaked: int = 0
    initial_inventory: dict = field(default_factory=dict)
    final_inventory: dict = field(default_factory=dict)
    conflicts: TraceReport | None = None

    @property
    def jam_rate(self) -> float:
        return self.jam_count / self.rd_ticks if self.rd_ticks else 0.0

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "replication": self.replication,
            "ticks": self.ticks,
            "counts": {
                "rd_ticks": self.rd_ticks,
                "jam_count": self.jam_count,
                "message_count": self.message_count,
                "released_tracks": self.released,
                "friendly_filtered": self.friendly_filtered,
                "leaked": self.leaked,
            },
            "inventory": {"initial": self.initial_inventory, "final": self.final_inventory},
            "threat_lists": [
                {"tick": t, "threats": [{"target_id": s.target_id, "score": s.score, "rank": s.rank} for s in lst]}
                for t, lst in self.threat_lists
            ],
            "allocations": [{"tick": t, **a} for t, a in self.allocations],
            "intercepts": [{"tick": t, **a} for t, a in self.intercepts],
            "conflicts": self.conflicts.to_dict() if self.conflicts else None,
        }


def _spawn_units(groups: Sequence[AirGroup], asset, rng, jitter: float, code: str) -> list[Unit]:
    units = []
    for g in groups:
        dx, dy = g.position[0] - asset[0], g.position[1] - asset[1]
        dist = math.hypot(dx, dy) or 1.0
        ux, uy = dx / dist, dy / dist
        for i in range(g.count):
            x = g.position[0] + ux * g.spacing_km * i
            y = g.position[1] + uy * g.spacing_km * i
            if jitter > 0:
                x += rng.uniform(-jitter, jitter)
                y += rng.uniform(-jitter, jitter)
            units.append(Unit(f"{g.id}-{i + 1:02d}", g, x, y, friendly_code=False))
    return units


def run(scenario: Scenario, config: SimConfig, replication: int = 0) -> RunReport:
    """One replication of the closed-loop air-defense simulation."""
    red_rng = np.random.default_rng(derive_seed(config.seed, replication, "red"))
    sra_seed = derive_seed(config.seed, replication, "sra")
    ga_seed = derive_seed(config.seed, replication, "ga") % (2**31)

    radar = scenario.radar
    asset = scenario.defended_asset
    units = _spawn_units(scenario.red_force, asset, red_rng, radar.jitter_km, radar.iff_code)
    units += _spawn_units(scenario.friendly_air, asset, red_rng, radar.jitter_km, radar.iff_code)

    sra = SurveillanceRadarAgent(radar.theta_jam, radar.k)
    beliefs = AddcaBeliefs(
        cl=scenario.cl,
        weapons=[WeaponStock(w.id, w.inventory, dict(w.salvo), dict(w.kill_prob)) for w in scenario.weapons],
        target_values={k: p.value for k, p in scenario.platforms.items()},
        interceptors=scenario.interceptors,
        window=scenario.window,
        solver=config.solver or scenario.solver,
        generations=config.generations if config.generations is not None else scenario.generations,
        seed=ga_seed,
        rulebase=threat.threat_rulebase(),
    )
    addca = DirectionCenterAgent(beliefs)
    status = generate_status_stream(sra_seed, config.ticks, config.jam)
    report = RunReport(scenario.name, config.seed, replication, config.ticks)
    report.initial_inventory = dict(beliefs.initial_inventory)
    pending: list[Event] = []

    def route(ev: Event):
        report.events.append((ev.tick, ev.source, ev.target, ev.kind))
        if ev.target == ADDCA:
            pending.append(ev)

    for t in range(config.ticks):
        for ev in pending:
            addca.post(ev)
        pending = []

        # red kinematics
        if t > 0:
            for u in units:
                if u.id in beliefs.engaged:
                    continue
                dx, dy = asset[0] - u.x, asset[1] - u.y
                dist = math.hypot(dx, dy)
                step = u.group.mach * MACH_KM_S
                if dist <= step:
                    u.x, u.y = asset
                else:
                    u.x += dx / dist * step
                    u.y += dy / dist * step

        # SRA
        out = sra.observe(status[t], t)
        if out is not None:
            entry, evs = out
            if config.inject_fault_at == t:
                entry = replace(entry, state=(False, True, True, True))
            report.trace.append(entry)
            report.rd_ticks += 1
            report.jam_count += entry.belief == "Jammed"
            report.message_count += len(evs)
            for ev in evs:
                route(ev)

        # track release through the IFF filter
        fresh = []
        for u in units:
            rng_km = math.hypot(u.x - asset[0], u.y - asset[1])
            if u.filtered or u.id in beliefs.engaged:
                continue
            if not u.released:
                if rng_km > radar.detection_range_km:
                    continue
                if threat.iff_classify(u.group.iff_response, radar.iff_code) == threat.FRIENDLY:
                    u.filtered = True
                    report.friendly_filtered += 1
                    continue
                u.released = True
                fresh.append(u.id)
            beliefs.tracks[u.id] = threat.TargetTrack(
                id=u.id,
                range=rng_km,
                velocity=u.group.mach,
                altitude=u.group.altitude,
                aoa=u.group.aoa,
                lethality=scenario.platforms[u.group.kind].lethality,
                intent_evidence=u.group.intent,
                iff=threat.SUSPECT,
                kind=u.group.kind,
            )
        if fresh:
            report.released += len(fresh)
            addca.post(Event(NEW_CLUSTER, tuple(fresh), t, ENV, ADDCA))

        # ADDCA
        step = addca.step(t)
        if step is not None:
            entry, evs, outcome = step
            report.trace.append(entry)
            for ev in evs:
                route(ev)
            if "threats" in outcome:
                report.threat_lists.append((t, outcome["threats"]))
            if "allocation" in outcome:
                report.allocations.append((t, outcome["allocation"]))
            if "intercept" in outcome:
                report.intercepts.append((t, outcome["intercept"]))

    report.leaked = sum(
        1 for u in units
        if u.released and u.id not in beliefs.engaged and (u.x, u.y) == tuple(asset)
    )
    report.final_inventory = {w.id: w.inventory for w in beliefs.weapons}
    report.conflicts = check_trace_conflicts(report.trace)
    return report


def _run_one(args):
    scenario, config, rep = args
    return run(scenario, config, rep)


def run_replications(scenario: Scenario, config: SimConfig, workers: int = 1) -> list[RunReport]:
    """All replications, ordered by index whatever the schedule."""
    jobs = [(scenario, config, r) for r in range(config.replications)]
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


# -- reports -----------------------------------------------------------------

def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


THREAT_COLUMNS = ["tick", "target_id", "score", "rank"]
ALLOCATION_COLUMNS = ["tick", "weapon", "target_type", "count", "tvd"]
REPLICATION_COLUMNS = ["replication", "seed", "rd_ticks", "jam_count", "message_count", "released_tracks", "conflicts"]


def report_files(report: RunReport) -> dict[str, str]:
    """File name -> content for one replication's report."""
    threats = [(t, s.target_id, s.score, s.rank) for t, lst in report.threat_lists for s in lst]
    allocs = []
    for t, a in report.allocations:
        for w, wid in enumerate(a["weapons"]):
            for s, sid in enumerate(a["target_types"]):
                if a["y"][w][s]:
                    allocs.append((t, wid, sid, a["y"][w][s], a["tvd"]))
    return {
        "report.json": json.dumps(report.to_dict(), indent=1) + "\n",
        "threats.csv": _csv(threats, THREAT_COLUMNS),
        "allocations.csv": _csv(allocs, ALLOCATION_COLUMNS),
        "trace.csv": agents.trace_to_csv(report.trace),
    }


def summarize(reports: Sequence[RunReport]) -> dict:
    rd = sum(r.rd_ticks for r in reports)
    jams = sum(r.jam_count for r in reports)
    return {
        "replications": len(reports),
        "rd_ticks": rd,
        "jam_count": jams,
        "message_count": sum(r.message_count for r in reports),
        "jam_rate": jams / rd if rd else 0.0,
        "conflicts": sum(len(r.conflicts.conflicts) for r in reports if r.conflicts),
    }


def emit_report(reports: RunReport | Sequence[RunReport], out_dir, formats=("json", "csv")) -> list[Path]:
    """Write reports under ``out_dir``; one ``rep_NNNN`` folder per replication."""
    if isinstance(reports, RunReport):
        reports = [reports]
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for r in reports:
            d = out / f"rep_{r.replication:04d}"
            d.mkdir(exist_ok=True)
            for name, text in report_files(r).items():
                if name.endswith(".json") and "json" not in formats:
                    continue
                if name.endswith(".csv") and "csv" not in formats:
                    continue
                (d / name).write_text(text)
                written.append(d / name)
        rows = [
            (r.replication, r.seed, r.rd_ticks, r.jam_count, r.message_count, r.released,
             len(r.conflicts.conflicts) if r.conflicts else 0)
            for r in reports
        ]
        (out / "replications.csv").write_text(_csv(rows, REPLICATION_COLUMNS))
        (out / "summary.json").write_text(json.dumps(summarize(reports), indent=1) + "\n")
        written += [out / "replications.csv", out / "summary.json"]
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return written
