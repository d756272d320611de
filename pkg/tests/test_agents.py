import numpy as np
import pytest
from hypothesis import given, strategies as st

from tewa import agents, threat
from tewa.agents import (
    ADDCA, ENV, JAMMING_SUSPECTED, NEW_CLUSTER, NEW_CLUSTER_PRIORITY, AddcaBeliefs, Event, Plan,
    PlanInstance, SraBeliefs, SurveillanceRadarAgent, WeaponStock,
)
from tewa.errors import EmptyCandidates, MalformedTrace, UnknownEvent, ZeroBaseline
from tewa.evaluation import check_trace_conflicts


def test_applicable_plans_filters_relevance_and_context():
    lib = [Plan("a", "E"), Plan("b", "E", lambda b, e: False), Plan("c", "F")]
    assert agents.applicable_plans(lib, Event("X"), None) == []
    assert [p.id for p in agents.applicable_plans(lib, Event("F"), None)] == ["c"]
    assert [p.id for p in agents.applicable_plans(lib, Event("E"), None)] == ["a"]


def _inst(*ranks):
    return [PlanInstance(Plan(f"p{i}", "E"), None, r) for i, r in enumerate(ranks)]


def test_meta_select_examples():
    assert agents.meta_select(_inst(0.2, 0.9, 0.5)).plan.id == "p1"
    assert agents.meta_select(_inst(0.5, 0.5)).plan.id == "p0"
    one = _inst(0.1)
    assert agents.meta_select(one) is one[0]
    with pytest.raises(EmptyCandidates):
        agents.meta_select([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_meta_select_is_first_argmax(ranks):
    c = _inst(*ranks)
    assert agents.meta_select(c) is c[int(np.argmax(ranks))]


@pytest.mark.parametrize("a, b, rd", [(20, 20, 0.0), (20, 30, 0.5), (10, 0, 1.0)])
def test_compute_rd(a, b, rd):
    assert agents.compute_rd(a, b) == rd


def test_compute_rd_zero_baseline():
    with pytest.raises(ZeroBaseline):
        agents.compute_rd(0, 5)


def _run_sra(stream, k=3):
    sra = SurveillanceRadarAgent(0.3, k)
    out = [sra.observe(n, t) for t, n in enumerate(stream)]
    return [o for o in out if o is not None]


def test_sra_constant_stream_never_jammed():
    steps = _run_sra([20] * 50)
    assert all(e.state == (True, False, False, False) and not ev for e, ev in steps)
    assert check_trace_conflicts([e for e, _ in steps]).clean


def test_sra_escalation_hop_then_message():
    # alternating 20/40 keeps RD at 1.0 or 0.5: jammed every tick
    steps = _run_sra([20, 40, 20, 40, 20, 40])
    states = [e.state for e, _ in steps]
    assert states[0] == (False, True, False, True)  # fresh jam: hop
    assert states[1] == (False, True, False, True)
    assert states[2] == (False, True, True, False)  # third consecutive: message
    assert states[3] == (False, True, True, False)
    kinds = [[x.kind for x in ev] for _, ev in steps]
    assert kinds == [[], [], [JAMMING_SUSPECTED], [], []]


def test_sra_message_rearms_after_clear():
    stream = [20, 40, 20, 40, 40, 40, 20, 40, 20, 40]
    steps = _run_sra(stream)
    sent = [e.tick for e, ev in steps if ev]
    assert sent == [3, 8]  # jammed 1-3, clear 4-5, jammed again 6-8


def test_sra_zero_baseline_skips():
    sra = SurveillanceRadarAgent()
    sra.observe(0, 0)
    assert sra.observe(10, 1) is None


def test_sra_step_needs_prior():
    with pytest.raises(ValueError):
        agents.sra_step(SraBeliefs(), 20)


@given(st.lists(st.integers(1, 60), min_size=2, max_size=80))
def test_sra_trace_always_clean_and_messages_are_rising_edges(stream):
    steps = _run_sra(stream)
    trace = [e for e, _ in steps]
    assert check_trace_conflicts(trace).clean
    p3 = [e.state[2] for e in trace]
    edges = sum(1 for i, on in enumerate(p3) if on and (i == 0 or not p3[i - 1]))
    assert sum(len(ev) for _, ev in steps) == edges
    for e in trace:
        assert e.state[0] == (e.belief == "NotJammed")


# -- ADDCA -------------------------------------------------------------------

R1_TRACK = threat.TargetTrack("r1", 250, 0.3, 12, 5, "LessLethal", {"Reconnaissance": 1.0}, kind="uav")
R1215_TRACK = threat.TargetTrack("r1215", 10, 2.5, 0.5, 85, "VeryLethal", {"Strike": 1.0}, kind="cruise_missile")


def _beliefs(inventory=4, tracks=(R1_TRACK, R1215_TRACK), **kw):
    return AddcaBeliefs(
        cl=1.0,
        weapons=[WeaponStock("SAM", inventory, {}, {"uav": 0.6, "cruise_missile": 0.8})],
        target_values={"uav": 2.0, "cruise_missile": 10.0},
        tracks={t.id: t for t in tracks},
        rulebase=threat.threat_rulebase(),
        **kw,
    )


def test_addca_new_cluster_prioritizes():
    b = _beliefs(tracks=(R1_TRACK,))
    entry, evs, outcome = agents.addca_step(b, Event(NEW_CLUSTER, ("r1",), 0, ENV, ADDCA))
    assert [e.kind for e in evs] == [NEW_CLUSTER_PRIORITY]
    assert evs[0].payload[0]["target_id"] == "r1" and evs[0].payload[0]["rank"] == 1
    assert entry.state == (True, False, False)


def test_addca_priority_order_of_archetypes():
    b = _beliefs()
    _, evs, outcome = agents.addca_step(b, Event(NEW_CLUSTER, ("r1", "r1215"), 0, ENV, ADDCA))
    assert [r["target_id"] for r in evs[0].payload] == ["r1215", "r1"]
    entry, _, _ = agents.addca_step(b, evs[0], 1)
    # the selected plan instance is bound to the top threat
    assert entry.selected_plan == "p2[r1215]" == entry.argmax_plan


def test_addca_zero_inventory_allocates_nothing():
    b = _beliefs(inventory=0)
    _, evs, _ = agents.addca_step(b, Event(NEW_CLUSTER, ("r1", "r1215"), 0, ENV, ADDCA))
    _, evs2, outcome = agents.addca_step(b, evs[0], 1)
    assert not np.any(outcome["allocation"]["y"])
    assert b.engaged == set()


def test_addca_allocation_consumes_and_engages():
    b = _beliefs(inventory=1)
    _, evs, _ = agents.addca_step(b, Event(NEW_CLUSTER, ("r1", "r1215"), 0, ENV, ADDCA))
    _, _, outcome = agents.addca_step(b, evs[0], 1)
    assert outcome["allocation"]["assignments"] == [("r1215", "SAM")]
    assert b.weapons[0].inventory == 0 and b.engaged == {"r1215"}
    # second pass cannot re-engage or overdraw
    _, evs, _ = agents.addca_step(b, Event(NEW_CLUSTER, (), 2, ENV, ADDCA))
    _, _, outcome = agents.addca_step(b, evs[0], 3)
    assert not np.any(outcome["allocation"]["y"]) and b.weapons[0].inventory == 0


def test_addca_jamming_tasks_interceptor_until_exhausted():
    b = _beliefs(interceptors=1)
    entry, evs, outcome = agents.addca_step(b, Event(JAMMING_SUSPECTED, {}, 0, "SRA", ADDCA))
    assert outcome["intercept"]["target_id"] == "r1215"
    assert entry.state == (False, False, True)
    entry, evs, outcome = agents.addca_step(b, Event(JAMMING_SUSPECTED, {}, 1, "SRA", ADDCA))
    assert entry.selected_plan is None and not evs


def test_addca_unknown_event():
    with pytest.raises(UnknownEvent):
        agents.addca_step(_beliefs(), Event("Picnic"))


def test_direction_center_fifo():
    dc = agents.DirectionCenterAgent(_beliefs())
    assert dc.step(0) is None
    dc.post(Event(NEW_CLUSTER, (), 0, ENV, ADDCA))
    dc.post(Event(JAMMING_SUSPECTED, {}, 0, "SRA", ADDCA))
    assert dc.step(1)[0].belief == NEW_CLUSTER
    assert dc.step(2)[0].belief == JAMMING_SUSPECTED


def test_trace_csv_round_trip():
    steps = _run_sra([20, 40, 20, 40, 20, 20])
    trace = [e for e, _ in steps]
    b = _beliefs()
    trace.append(agents.addca_step(b, Event(NEW_CLUSTER, (), 9, ENV, ADDCA))[0])
    text = agents.trace_to_csv(trace)
    assert text.splitlines()[0] == "tick,agent,p1,p2,p3,p4,selected_plan,events,argmax_plan,belief"
    assert agents.trace_from_csv(text) == trace


def test_trace_from_csv_rejects_missing_columns():
    with pytest.raises(MalformedTrace):
        agents.trace_from_csv("tick,agent,p1\n0,SRA,1\n")
