"""A small BDI runtime and the two command-and-control agents.

Plan selection follows the relevant -> context -> max-rank pipeline: plans
whose ``relevant_to`` matches the event are filtered by their context
predicate over the beliefset, expanded into ranked instances, and the highest
ranked instance runs.

``SRA``   surveillance radar agent: jamming detection and ECCM.
``ADDCA`` air defense direction center agent: threat prioritization and
          weapon allocation.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import deque
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import threat, wta
from .errors import EmptyCandidates, UnknownEvent, ZeroBaseline
from .fuzzy import RuleBase

log = logging.getLogger(__name__)

SRA = "SRA"
ADDCA = "ADDCA"
ENV = "env"

# event kinds
STATUS_OBSERVED = "StatusObserved"
JAMMING_DETECTED = "JammingDetected"
JAMMING_SUSPECTED = "JammingSuspected"
NEW_CLUSTER = "NewClusterEvent"
NEW_CLUSTER_PRIORITY = "NewClusterPriorityEvent"
ALLOCATION_REQUESTED = "AllocationRequested"
INTERCEPTOR_TASKED = "InterceptorTasked"


@dataclass(frozen=True)
class Event:
    kind: str
    payload: Any = None
    tick: int = 0
    source: str = ""
    target: str = ""


def _always(beliefs, event) -> bool:
    return True


@dataclass
class Plan:
    id: str
    relevant_to: str
    context: Callable[[Any, Event], bool] = _always
    rank: float = 0.0
    body: Callable | None = None
    # (beliefs, event) -> [(binding, rank)]; None means a single instance at ``rank``
    expand: Callable[[Any, Event], list] | None = None

    def instances(self, beliefs, event) -> list[PlanInstance]:
        if self.expand is None:
            return [PlanInstance(self, None, float(self.rank))]
        return [PlanInstance(self, b, float(r)) for b, r in self.expand(beliefs, event)]


@dataclass(frozen=True)
class PlanInstance:
    plan: Plan
    binding: Any
    rank: float

    @property
    def id(self) -> str:
        return self.plan.id if self.binding is None else f"{self.plan.id}[{self.binding}]"


@dataclass(frozen=True)
class TraceEntry:
    tick: int
    agent: str
    state: tuple[bool, ...]
    selected_plan: str | None
    argmax_plan: str | None = None
    belief: str = ""
    events: tuple[str, ...] = ()


def applicable_plans(library: Iterable[Plan], event: Event, beliefs) -> list[Plan]:
    return [p for p in library if p.relevant_to == event.kind and p.context(beliefs, event)]


def meta_select(candidates: Sequence):
    """Highest-rank candidate; the earliest one wins a tie."""
    if not candidates:
        raise EmptyCandidates("no applicable plan to select from")
    best = candidates[0]
    for c in candidates[1:]:
        if c.rank > best.rank:
            best = c
    return best


def _argmax_id(instances: Sequence[PlanInstance]) -> str | None:
    if not instances:
        return None
    ranks = [i.rank for i in instances]
    return instances[int(np.argmax(ranks))].id


def deliberate(library: Iterable[Plan], event: Event, beliefs):
    """Run one MPR cycle. Returns ``(selected instance or None, argmax id)``."""
    plans = applicable_plans(library, event, beliefs)
    instances = [i for p in plans for i in p.instances(beliefs, event)]
    if not instances:
        return None, None
    return meta_select(instances), _argmax_id(instances)


class Agent:
    """Plan library plus a FIFO inbox; one event is handled per tick."""

    name = "agent"
    plan_ids: tuple[str, ...] = ()

    def __init__(self, beliefs, plans: Sequence[Plan]):
        self.beliefs = beliefs
        self.plans = list(plans)
        self.inbox: deque[Event] = deque()

    def post(self, event: Event):
        self.inbox.append(event)


# -- SRA ---------------------------------------------------------------------

def compute_rd(n_t: float, n_next: float) -> float:
    if n_t == 0:
        raise ZeroBaseline("relative difference undefined for a zero baseline")
    return abs((n_t - n_next) / n_t)


@dataclass
class SraBeliefs:
    theta: float = 0.3
    k: int = 3
    history: list[float] = field(default_factory=list)
    rd: float | None = None
    jammed: bool = False
    streak: int = 0
    messaging: bool = False


def _sra_plans() -> list[Plan]:
    return [
        Plan("p1", STATUS_OBSERVED, lambda b, e: not b.jammed, rank=1.0),
        Plan("p2", STATUS_OBSERVED, lambda b, e: b.jammed, rank=1.0),
        Plan("p3", JAMMING_DETECTED, lambda b, e: b.streak >= b.k, rank=1.0),
        Plan("p4", JAMMING_DETECTED, lambda b, e: b.streak < b.k, rank=1.0),
    ]


SRA_PLAN_IDS = ("p1", "p2", "p3", "p4")
SRA_PLANS = _sra_plans()


def sra_step(beliefs: SraBeliefs, observation: float, tick: int = 0, plans=SRA_PLANS):
    """Fold one status observation into the SRA's beliefs and run its plans.

    Jamming is believed when the relative difference to the previous status
    exceeds ``theta``. A fresh jam triggers frequency hopping (p4); once the
    jam has persisted ``k`` ticks the radar messages the ADDCA (p3) instead,
    posting one JammingSuspected event per episode.
    """
    if not beliefs.history:
        raise ValueError("sra_step needs a prior observation")
    prev = beliefs.history[-1]
    beliefs.history.append(observation)
    rd = compute_rd(prev, observation)
    beliefs.rd = rd
    beliefs.jammed = rd > beliefs.theta
    beliefs.streak = beliefs.streak + 1 if beliefs.jammed else 0

    active = []
    argmax = None
    chosen, argmax = deliberate(plans, Event(STATUS_OBSERVED, observation, tick, SRA, SRA), beliefs)
    if chosen is not None:
        active.append(chosen.id)
        if chosen.id == "p2":
            chosen2, argmax = deliberate(plans, Event(JAMMING_DETECTED, rd, tick, SRA, SRA), beliefs)
            if chosen2 is not None:
                active.append(chosen2.id)
                chosen = chosen2

    events = []
    sending = "p3" in active
    if sending and not beliefs.messaging:
        events.append(Event(JAMMING_SUSPECTED, {"rd": rd}, tick, SRA, ADDCA))
    beliefs.messaging = sending

    entry = TraceEntry(
        tick=tick,
        agent=SRA,
        state=tuple(p in active for p in SRA_PLAN_IDS),
        selected_plan=chosen.id if chosen else None,
        argmax_plan=argmax,
        belief="Jammed" if beliefs.jammed else "NotJammed",
        events=tuple(e.kind for e in events),
    )
    return entry, events


class SurveillanceRadarAgent(Agent):
    name = SRA
    plan_ids = SRA_PLAN_IDS

    def __init__(self, theta: float = 0.3, k: int = 3):
        super().__init__(SraBeliefs(theta=theta, k=k), _sra_plans())

    def observe(self, n: float, tick: int):
        """Returns ``(entry, events)``, or ``None`` when no RD can be formed."""
        if not self.beliefs.history:
            self.beliefs.history.append(n)
            return None
        try:
            return sra_step(self.beliefs, n, tick, self.plans)
        except ZeroBaseline:
            log.info("tick %d: zero status baseline, RD skipped", tick)
            return None


# -- ADDCA -------------------------------------------------------------------

@dataclass
class WeaponStock:
    """A blue weapon type with per-target-kind engagement data."""

    id: str
    inventory: int
    salvo: Mapping[str, int]
    kill_prob: Mapping[str, float]


@dataclass
class AddcaBeliefs:
    cl: float
    weapons: list[WeaponStock]
    target_values: Mapping[str, float]
    tracks: dict[str, threat.TargetTrack] = field(default_factory=dict)
    engaged: set[str] = field(default_factory=set)
    interceptors: int = 0
    investigated: set[str] = field(default_factory=set)
    window: int = 10
    solver: str = "ga"
    generations: int = 30
    seed: int = 0
    rulebase: RuleBase | None = None
    scores: dict[str, float] = field(default_factory=dict)
    initial_inventory: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.initial_inventory:
            self.initial_inventory = {w.id: w.inventory for w in self.weapons}

    def picture(self) -> list[threat.TargetTrack]:
        """Unengaged hostile tracks in id order."""
        return [t for i, t in sorted(self.tracks.items()) if i not in self.engaged and t.iff != threat.FRIENDLY]


def _score_picture(beliefs: AddcaBeliefs) -> list[threat.ThreatScore]:
    tracks = beliefs.picture()
    if not tracks:
        return []
    ranked = threat.prioritize(tracks, beliefs.cl, beliefs.rulebase)
    beliefs.scores.update({s.target_id: s.score for s in ranked})
    return ranked


def _expand_cluster(beliefs: AddcaBeliefs, event: Event):
    return [(s.target_id, s.score) for s in _score_picture(beliefs)]


def _expand_priority(beliefs: AddcaBeliefs, event: Event):
    return [
        (row["target_id"], row["score"])
        for row in event.payload
        if row["target_id"] in beliefs.tracks and row["target_id"] not in beliefs.engaged
    ]


def _expand_intercept(beliefs: AddcaBeliefs, event: Event):
    ranked = _score_picture(beliefs)
    return [(s.target_id, s.score) for s in ranked if s.target_id not in beliefs.investigated]


def _body_cluster(beliefs: AddcaBeliefs, inst: PlanInstance, event: Event):
    ranked = _score_picture(beliefs)
    payload = [{"target_id": s.target_id, "score": s.score, "rank": s.rank} for s in ranked]
    return [Event(NEW_CLUSTER_PRIORITY, payload, event.tick, ADDCA, ADDCA)], {"threats": ranked}


def allocation_instance(beliefs: AddcaBeliefs, ranked_ids: Sequence[str]):
    """WTA instance over the top-priority targets, one target type per kind."""
    top = [t for t in ranked_ids if t in beliefs.tracks and t not in beliefs.engaged][: beliefs.window]
    kinds: list[str] = []
    members: dict[str, list[str]] = {}
    for tid in top:
        kind = beliefs.tracks[tid].kind or beliefs.tracks[tid].lethality
        if kind not in members:
            kinds.append(kind)
            members[kind] = []
        members[kind].append(tid)
    weapons = tuple(
        wta.WeaponType(
            w.id,
            w.inventory,
            tuple(int(w.salvo.get(k, 1)) for k in kinds),
            tuple(float(w.kill_prob.get(k, 0.0)) for k in kinds),
        )
        for w in beliefs.weapons
    )
    targets = tuple(
        wta.TargetTypeSpec(k, len(members[k]), float(beliefs.target_values.get(k, 1.0))) for k in kinds
    )
    return wta.WtaInstance(weapons, targets), members


def _body_priority(beliefs: AddcaBeliefs, inst: PlanInstance, event: Event):
    ranked_ids = [row["target_id"] for row in event.payload]
    instance, members = allocation_instance(beliefs, ranked_ids)
    if instance.shape[1] == 0 or instance.shape[0] == 0:
        y = np.zeros(instance.shape, dtype=np.int64)
    elif beliefs.solver == "ga":
        y, _ = wta.solve_ga(instance, seed=beliefs.seed + event.tick, generations=beliefs.generations)
    elif beliefs.solver == "exact":
        y, _ = wta.solve_exact(instance)
    else:
        y, _ = wta.solve_greedy(instance)
    ok, why = wta.feasible(instance, y)
    if not ok:
        raise RuntimeError(f"infeasible allocation: {why}")

    assignments = []
    for s, tt in enumerate(instance.targets):
        queue = list(members[tt.id])
        for w, wt in enumerate(instance.weapons):
            for _ in range(int(y[w, s])):
                tid = queue.pop(0)
                assignments.append((tid, wt.id))
                beliefs.engaged.add(tid)
    for w, stock in enumerate(beliefs.weapons):
        stock.inventory -= int((y[w] * instance.N[w]).sum())
        assert stock.inventory >= 0
    payload = {
        "weapons": [w.id for w in instance.weapons],
        "target_types": [t.id for t in instance.targets],
        "y": y.tolist(),
        "tvd": wta.evaluate_tvd(instance, y),
        "assignments": assignments,
    }
    return [Event(ALLOCATION_REQUESTED, payload, event.tick, ADDCA, ENV)], {"allocation": payload}


def _body_intercept(beliefs: AddcaBeliefs, inst: PlanInstance, event: Event):
    beliefs.interceptors -= 1
    beliefs.investigated.add(inst.binding)
    payload = {"target_id": inst.binding}
    return [Event(INTERCEPTOR_TASKED, payload, event.tick, ADDCA, ENV)], {"intercept": payload}


ADDCA_PLAN_IDS = ("p1", "p2", "p3")
ADDCA_EVENTS = (NEW_CLUSTER, NEW_CLUSTER_PRIORITY, JAMMING_SUSPECTED)


def _addca_plans() -> list[Plan]:
    return [
        Plan("p1", NEW_CLUSTER, body=_body_cluster, expand=_expand_cluster),
        Plan("p2", NEW_CLUSTER_PRIORITY, body=_body_priority, expand=_expand_priority),
        Plan("p3", JAMMING_SUSPECTED, lambda b, e: b.interceptors > 0, body=_body_intercept, expand=_expand_intercept),
    ]


ADDCA_PLANS = _addca_plans()


def addca_step(beliefs: AddcaBeliefs, event: Event, tick: int | None = None, plans=ADDCA_PLANS):
    """Handle one ADDCA event: exactly the max-rank plan instance executes.

    Returns ``(entry, events, outcome)``; ``outcome`` carries the threat list
    or allocation produced by the executed plan.
    """
    if event.kind not in ADDCA_EVENTS:
        raise UnknownEvent(f"ADDCA has no plan for {event.kind!r}")
    tick = event.tick if tick is None else tick
    chosen, argmax = deliberate(plans, event, beliefs)
    events: list[Event] = []
    outcome: dict = {}
    if chosen is not None:
        events, outcome = chosen.plan.body(beliefs, chosen, Event(event.kind, event.payload, tick, event.source, event.target))
    entry = TraceEntry(
        tick=tick,
        agent=ADDCA,
        state=tuple(chosen is not None and chosen.plan.id == p for p in ADDCA_PLAN_IDS),
        selected_plan=chosen.id if chosen else None,
        argmax_plan=argmax,
        belief=event.kind,
        events=tuple(e.kind for e in events),
    )
    return entry, events, outcome


class DirectionCenterAgent(Agent):
    name = ADDCA
    plan_ids = ADDCA_PLAN_IDS

    def __init__(self, beliefs: AddcaBeliefs):
        super().__init__(beliefs, _addca_plans())

    def step(self, tick: int):
        if not self.inbox:
            return None
        return addca_step(self.beliefs, self.inbox.popleft(), tick, self.plans)


# -- trace CSV ---------------------------------------------------------------

TRACE_BASE = ["tick", "agent"]
TRACE_TAIL = ["selected_plan", "events", "argmax_plan", "belief"]


def trace_to_csv(entries: Sequence[TraceEntry]) -> str:
    width = max((len(e.state) for e in entries), default=4)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_BASE + [f"p{i + 1}" for i in range(width)] + TRACE_TAIL)
    for e in entries:
        flags = [int(b) for b in e.state] + [""] * (width - len(e.state))
        w.writerow([e.tick, e.agent, *flags, e.selected_plan or "", "|".join(e.events), e.argmax_plan or "", e.belief])
    return buf.getvalue()


def trace_from_csv(text: str) -> list[TraceEntry]:
    from .errors import MalformedTrace

    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    header = rows[0]
    pcols = [i for i, h in enumerate(header) if h.startswith("p") and h[1:].isdigit()]
    try:
        col = {h: header.index(h) for h in ("tick", "agent", "selected_plan", "events")}
    except ValueError as exc:
        raise MalformedTrace(f"trace header missing column: {exc}") from None
    opt = {h: header.index(h) for h in ("argmax_plan", "belief") if h in header}
    out = []
    for n, row in enumerate(rows[1:], 2):
        try:
            flags = tuple(row[i] == "1" for i in pcols if row[i] != "")
            out.append(TraceEntry(
                tick=int(row[col["tick"]]),
                agent=row[col["agent"]],
                state=flags,
                selected_plan=row[col["selected_plan"]] or None,
                argmax_plan=(row[opt["argmax_plan"]] or None) if "argmax_plan" in opt else None,
                belief=row[opt["belief"]] if "belief" in opt else "",
                events=tuple(x for x in row[col["events"]].split("|") if x),
            ))
        except (IndexError, ValueError) as exc:
            raise MalformedTrace(f"line {n}: {exc}") from None
    return out
