"""Fuzzy threat assessment over sensed target tracks."""
from __future__ import annotations

import csv
import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fuzzy
from .errors import EmptyTrackList, UnknownPlatform, ZeroVector
from .fuzzy import INF, FuzzyVariable, Label, OutputLabel, Rule, RuleBase, Trapezoid

LESS_LETHAL, LETHAL, VERY_LETHAL = "LessLethal", "Lethal", "VeryLethal"
LETHALITY = (LESS_LETHAL, LETHAL, VERY_LETHAL)

FRIENDLY, SUSPECT, UNKNOWN = "Friendly", "Suspect", "Unknown"

INTENT_CLASSES = (
    "Strike", "Interdiction", "Suppression", "TacticalBombing", "StrategicBombing",
    "Electronic", "CloseAirSupport", "Escort", "Surveillance", "Reconnaissance",
)

# label order is least to most dangerous; danger index = position / 4
INTENT_GROUPS = (
    ("Surveillance", "Reconnaissance"),
    ("CloseAirSupport", "Escort"),
    ("StrategicBombing", "Electronic"),
    ("Suppression", "TacticalBombing"),
    ("Strike", "Interdiction"),
)
INTENT_GROUP_DANGER = (0.0, 0.25, 0.5, 0.75, 1.0)


def group_name(pair) -> str:
    return "+".join(pair)


_GROUP_OF = {c: g for g, pair in enumerate(INTENT_GROUPS) for c in pair}

DEFAULT_CATALOGUE = {
    "cruise_missile": VERY_LETHAL,
    "air_to_surface_missile": VERY_LETHAL,
    "smart_bomb": VERY_LETHAL,
    "ballistic_missile": VERY_LETHAL,
    "fighter_group": VERY_LETHAL,
    "bomber_group": VERY_LETHAL,
    "fighter": LETHAL,
    "bomber": LETHAL,
    "ea_aircraft": LESS_LETHAL,
    "awacs": LESS_LETHAL,
    "uav": LESS_LETHAL,
    "cargo": LESS_LETHAL,
    "helicopter": LESS_LETHAL,
}


@dataclass(frozen=True)
class TargetTrack:
    id: str
    range: float
    velocity: float
    altitude: float
    aoa: float
    lethality: str
    intent_evidence: tuple[float, ...]
    iff: str = UNKNOWN
    kind: str = ""

    def __post_init__(self):
        ev = self.intent_evidence
        if isinstance(ev, Mapping):
            unknown = set(ev) - set(INTENT_CLASSES)
            if unknown:
                raise ValueError(f"unknown intent classes {sorted(unknown)}")
            ev = tuple(float(ev.get(c, 0.0)) for c in INTENT_CLASSES)
        ev = tuple(float(e) for e in ev)
        object.__setattr__(self, "intent_evidence", ev)
        if len(ev) != len(INTENT_CLASSES):
            raise ValueError(f"intent_evidence needs {len(INTENT_CLASSES)} values")
        if any(e < 0 for e in ev) or abs(sum(ev) - 1.0) > 1e-9:
            raise ValueError(f"track {self.id}: intent evidence must be non-negative and sum to 1")
        for name in ("range", "velocity", "altitude"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"track {self.id}: {name} must be finite and >= 0")
        if not 0.0 <= self.aoa <= 90.0:
            raise ValueError(f"track {self.id}: aoa must lie in [0, 90]")
        if self.lethality not in LETHALITY:
            raise ValueError(f"track {self.id}: unknown lethality {self.lethality!r}")
        if self.iff not in (FRIENDLY, SUSPECT, UNKNOWN):
            raise ValueError(f"track {self.id}: unknown iff state {self.iff!r}")


@dataclass(frozen=True)
class ThreatScore:
    target_id: str
    score: float
    rank: int = 1


def _numeric(name, unit, shapes):
    return FuzzyVariable(name, tuple(Label(n, Trapezoid(*bp)) for n, bp in shapes), unit)


THREAT_VARIABLES = (
    _numeric("range", "km", [
        ("Far", (120, 160, INF, INF)),
        ("Medium", (40, 80, 120, 160)),
        ("Close", (-INF, 0, 40, 80)),
    ]),
    _numeric("velocity", "Mach", [
        ("Slow", (-INF, 0, 0.4, 0.8)),
        ("Medium", (0.4, 0.8, 1.2, 1.6)),
        ("Fast", (1.2, 1.6, INF, INF)),
    ]),
    _numeric("altitude", "km", [
        ("High", (6, 9, INF, INF)),
        ("Medium", (1, 3, 6, 9)),
        ("Low", (-INF, 0, 1, 3)),
    ]),
    _numeric("aoa", "deg", [
        ("Low", (-INF, 0, 15, 35)),
        ("Medium", (15, 35, 55, 75)),
        ("High", (55, 75, INF, INF)),
    ]),
    FuzzyVariable("target_type", tuple(Label(n) for n in LETHALITY)),
    FuzzyVariable(
        "intent",
        tuple(Label(group_name(p), members=p, danger=d) for p, d in zip(INTENT_GROUPS, INTENT_GROUP_DANGER)),
    ),
)

THREAT_OUTPUTS = (
    OutputLabel("Low", 0.2, Trapezoid(-INF, 0.0, 0.2, 0.4)),
    OutputLabel("Medium", 0.5, Trapezoid(0.3, 0.45, 0.55, 0.7)),
    OutputLabel("High", 0.8, Trapezoid(0.6, 0.8, 1.0, INF)),
)

R1 = Rule(("Far", "Slow", "High", "Low", LESS_LETHAL, group_name(INTENT_GROUPS[0])), "Low")
R1215 = Rule(("Close", "Fast", "Low", "High", VERY_LETHAL, group_name(INTENT_GROUPS[-1])), "High")


@lru_cache(maxsize=1)
def threat_rulebase() -> RuleBase:
    """The 1215-rule threat grid interpolated from the two extreme anchors."""
    skeleton = RuleBase(THREAT_VARIABLES, THREAT_OUTPUTS, ())
    return fuzzy.interpolate_rules([R1, R1215], skeleton)


def compute_aoa(velocity_vector, longitudinal_axis, plane_normal=(0.0, 0.0, 1.0)) -> float:
    """Angle in degrees between the velocity projected onto a plane and the axis.

    The plane contains ``longitudinal_axis`` and is given by its normal, which
    defaults to the vertical (projection onto z = 0).
    """
    v = np.asarray(velocity_vector, dtype=float)
    ax = np.asarray(longitudinal_axis, dtype=float)
    nrm = np.asarray(plane_normal, dtype=float)
    if np.linalg.norm(v) == 0 or np.linalg.norm(ax) == 0:
        raise ZeroVector("velocity and axis must be nonzero")
    if np.linalg.norm(nrm) == 0:
        raise ZeroVector("plane normal must be nonzero")
    nrm = nrm / np.linalg.norm(nrm)
    if abs(np.dot(ax, nrm)) > 1e-9 * np.linalg.norm(ax):
        raise ValueError("projection plane must contain the longitudinal axis")
    proj = v - np.dot(v, nrm) * nrm
    if np.linalg.norm(proj) <= 1e-12 * np.linalg.norm(v):
        raise ZeroVector("velocity projection onto the plane vanishes")
    angle = math.degrees(math.atan2(np.linalg.norm(np.cross(proj, ax)), np.dot(proj, ax)))
    return min(180.0, max(0.0, angle))


def _cl_factor(cl: float, danger: float) -> float:
    return cl + (1.0 - cl) * (1.0 - danger)


def _check_cl(cl: float) -> float:
    cl = float(cl)
    if not 0.0 <= cl <= 1.0:
        raise ValueError(f"conflict level must lie in [0, 1], got {cl}")
    return cl


def intent_membership(evidence: Sequence[float], cl: float) -> tuple[float, ...]:
    """Per-group intent grades, in ``INTENT_GROUPS`` order.

    Each group takes the larger evidence of its two classes, scaled down for
    dangerous groups when the conflict level is low (peace time).
    """
    cl = _check_cl(cl)
    ev = dict(zip(INTENT_CLASSES, evidence))
    out = []
    for pair, d in zip(INTENT_GROUPS, INTENT_GROUP_DANGER):
        g = max(ev[pair[0]], ev[pair[1]]) * _cl_factor(cl, d)
        out.append(min(1.0, max(0.0, g)))
    return tuple(out)


def scaled_class_evidence(evidence: Sequence[float], cl: float) -> dict[str, float]:
    """Class evidence scaled by its group's conflict-level factor.

    Taking the max over each pair of these gives :func:`intent_membership`.
    """
    cl = _check_cl(cl)
    return {
        c: min(1.0, max(0.0, e * _cl_factor(cl, INTENT_GROUP_DANGER[_GROUP_OF[c]])))
        for c, e in zip(INTENT_CLASSES, evidence)
    }


def classify_lethality(kind: str, catalogue: Mapping | None = None) -> str:
    catalogue = DEFAULT_CATALOGUE if catalogue is None else catalogue
    try:
        entry = catalogue[kind]
    except KeyError:
        raise UnknownPlatform(f"platform {kind!r} is not in the catalogue") from None
    lethality = entry["lethality"] if isinstance(entry, Mapping) else entry
    if lethality not in LETHALITY:
        raise UnknownPlatform(f"platform {kind!r} has bad lethality {lethality!r}")
    return lethality


def engine_intent(evidence: Sequence[float], cl: float) -> dict[str, float]:
    """Class grades fed to the engine's intent variable.

    At cl = 0 evidence lying wholly on the most hostile group is scaled to
    nothing and no rule could fire. The weighted average is invariant to a
    common scale, so the cl -> 0+ limit is the unscaled evidence; use it.
    """
    intent = scaled_class_evidence(evidence, cl)
    if not any(intent.values()):
        intent = dict(zip(INTENT_CLASSES, map(float, evidence)))
    return intent


def fuzzify(track: TargetTrack, cl: float) -> dict:
    intent = engine_intent(track.intent_evidence, cl)
    return {
        "range": track.range,
        "velocity": track.velocity,
        "altitude": track.altitude,
        "aoa": track.aoa,
        "target_type": track.lethality,
        "intent": intent,
    }


def assess_threat(track: TargetTrack, cl: float, rb: RuleBase | None = None) -> ThreatScore:
    rb = threat_rulebase() if rb is None else rb
    return ThreatScore(track.id, fuzzy.infer(rb, fuzzify(track, cl)))


def prioritize(tracks: Sequence[TargetTrack], cl: float, rb: RuleBase | None = None) -> list[ThreatScore]:
    """Rank tracks by threat; ties go to the closer track, then the smaller id."""
    if not tracks:
        raise EmptyTrackList("no tracks to prioritize")
    if any(t.iff == FRIENDLY for t in tracks):
        raise ValueError("friendly tracks must be filtered before prioritization")
    rb = threat_rulebase() if rb is None else rb
    scores = fuzzy.infer_many(rb, [fuzzify(t, cl) for t in tracks])
    order = sorted(range(len(tracks)), key=lambda i: (-scores[i], tracks[i].range, tracks[i].id))
    return [ThreatScore(tracks[i].id, float(scores[i]), rank) for rank, i in enumerate(order, 1)]


def iff_classify(response, expected) -> str:
    if not expected:
        raise ValueError("expected IFF code must be non-empty")
    return FRIENDLY if response is not None and response == expected else SUSPECT


def release_tracks(tracks: Sequence[TargetTrack]) -> list[TargetTrack]:
    """Drop friendly tracks; Unknown is kept and handled as Suspect."""
    return [t for t in tracks if t.iff != FRIENDLY]


def threats_to_csv(scores: Sequence[ThreatScore]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target_id", "score", "rank"])
    for s in scores:
        w.writerow([s.target_id, repr(s.score), s.rank])
    return buf.getvalue()


def track_from_dict(d: Mapping) -> TargetTrack:
    return TargetTrack(
        id=str(d["id"]),
        range=float(d["range"]),
        velocity=float(d["velocity"]),
        altitude=float(d["altitude"]),
        aoa=float(d["aoa"]),
        lethality=d["lethality"],
        intent_evidence=d["intent_evidence"],
        iff=d.get("iff", UNKNOWN),
        kind=d.get("kind", ""),
    )
