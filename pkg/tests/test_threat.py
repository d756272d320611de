import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import reference_threat
from tewa import threat
from tewa.errors import EmptyTrackList, UnknownPlatform, ZeroVector
from tewa.threat import TargetTrack


def track(id="t", range=100.0, velocity=1.0, altitude=5.0, aoa=40.0, lethality="Lethal", intent=None, **kw):
    return TargetTrack(id, range, velocity, altitude, aoa, lethality, intent or {"Strike": 1.0}, **kw)


R1_TRACK = track("r1", 250, 0.3, 12, 5, "LessLethal", {"Reconnaissance": 1.0})
R1215_TRACK = track("r1215", 10, 2.5, 0.5, 85, "VeryLethal", {"Strike": 1.0})
MIXED = track("mix", 120, 1.0, 5, 40, "Lethal", {"Strike": 0.5, "Escort": 0.5})


def test_archetype_scores():
    assert threat.assess_threat(R1_TRACK, 0.0).score == pytest.approx(0.2, abs=1e-12)
    assert threat.assess_threat(R1215_TRACK, 1.0).score == pytest.approx(0.8, abs=1e-12)


def test_mixed_track_matches_reference():
    got = threat.assess_threat(MIXED, 0.5).score
    ref = reference_threat(120, 1.0, 5, 40, "Lethal", {"Strike": 0.5, "Escort": 0.5}, 0.5)
    assert got == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("v, axis, deg", [
    ((3, 0, 0), (1, 0, 0), 0.0),
    ((0, 2, 0), (1, 0, 0), 90.0),
    ((1, 1, 0), (1, 0, 0), 45.0),
    ((-1, 0, 0), (1, 0, 0), 180.0),
    ((1, 1, 5), (1, 0, 0), 45.0),  # the vertical component is projected out
])
def test_compute_aoa(v, axis, deg):
    assert threat.compute_aoa(v, axis) == pytest.approx(deg)


def test_compute_aoa_zero_vector():
    with pytest.raises(ZeroVector):
        threat.compute_aoa((0, 0, 0), (1, 0, 0))
    with pytest.raises(ZeroVector):
        threat.compute_aoa((1, 0, 0), (0, 0, 0))


def _evidence(**kw):
    return tuple(kw.get(c, 0.0) for c in threat.INTENT_CLASSES)


def test_intent_membership_full_war_is_raw():
    ev = _evidence(Strike=0.2, Interdiction=0.3, Escort=0.4, Reconnaissance=0.1)
    assert threat.intent_membership(ev, 1.0) == pytest.approx((0.1, 0.4, 0.0, 0.0, 0.3))


def test_intent_membership_peace_keeps_benign_group():
    ev = _evidence(Surveillance=1.0)
    assert threat.intent_membership(ev, 0.0)[0] == 1.0


def test_intent_membership_formula():
    ev = _evidence(Strike=0.5, Reconnaissance=0.5)
    cl = 0.5
    expected = [0.0] * 5
    expected[0] = 0.5 * (cl + (1 - cl) * 1.0)  # least dangerous group is unscaled
    expected[4] = 0.5 * (cl + (1 - cl) * 0.0)  # most dangerous group is halved
    assert threat.intent_membership(ev, cl) == pytest.approx(tuple(expected))


@given(st.lists(st.floats(0, 1), min_size=10, max_size=10).filter(lambda v: sum(v) > 0), st.floats(0, 1))
def test_intent_membership_bounded_and_matches_scaled_evidence(raw, cl):
    s = sum(raw)
    ev = [r / s for r in raw]
    g = threat.intent_membership(ev, cl)
    assert all(0.0 <= x <= 1.0 for x in g)
    scaled = threat.scaled_class_evidence(ev, cl)
    assert g == pytest.approx(tuple(max(scaled[a], scaled[b]) for a, b in threat.INTENT_GROUPS))


def test_cl_out_of_range():
    with pytest.raises(ValueError):
        threat.intent_membership(_evidence(Strike=1.0), 1.5)


@pytest.mark.parametrize("kind, cls", [
    ("cruise_missile", "VeryLethal"), ("bomber", "Lethal"), ("fighter", "Lethal"), ("awacs", "LessLethal"),
    ("ea_aircraft", "LessLethal"), ("bomber_group", "VeryLethal"),
])
def test_classify_lethality(kind, cls):
    assert threat.classify_lethality(kind) == cls


def test_classify_lethality_unknown_and_scenario_catalogue():
    with pytest.raises(UnknownPlatform):
        threat.classify_lethality("zeppelin")
    assert threat.classify_lethality("drone", {"drone": {"lethality": "Lethal", "value": 3}}) == "Lethal"


def test_prioritize_orders_archetypes():
    out = threat.prioritize([R1_TRACK, R1215_TRACK], 0.5)
    assert [s.target_id for s in out] == ["r1215", "r1"]
    assert [s.rank for s in out] == [1, 2]


def test_prioritize_single_and_ties():
    assert threat.prioritize([MIXED], 0.5)[0].rank == 1
    a, b = track("b"), track("a")
    assert [s.target_id for s in threat.prioritize([a, b], 0.5)] == ["a", "b"]
    near, far = track("z", range=50.0), track("y", range=50.0 - 1e-9)
    # equal scores on the Close plateau; closer wins before id
    assert threat.prioritize([near, far], 0.5)[0].target_id == "y"


def test_prioritize_errors():
    with pytest.raises(EmptyTrackList):
        threat.prioritize([], 0.5)
    with pytest.raises(ValueError):
        threat.prioritize([track(iff=threat.FRIENDLY)], 0.5)


@given(st.lists(st.tuples(st.floats(0, 250), st.floats(0, 3), st.floats(0, 14), st.floats(0, 90),
                          st.sampled_from(threat.LETHALITY), st.sampled_from(threat.INTENT_CLASSES)),
                min_size=1, max_size=12), st.floats(0, 1))
def test_prioritize_ranks_are_permutation_and_sorted(rows, cl):
    tracks = [track(f"t{i}", *r[:5], intent={r[5]: 1.0}) for i, r in enumerate(rows)]
    out = threat.prioritize(tracks, cl)
    assert sorted(s.rank for s in out) == list(range(1, len(tracks) + 1))
    scores = [s.score for s in out]
    assert scores == sorted(scores, reverse=True)
    assert all(0.0 <= s <= 1.0 for s in scores)


GRID = 60


@pytest.mark.parametrize("field, lo, hi, direction", [
    ("range", 0, 260, -1), ("velocity", 0, 3, 1), ("altitude", 0, 14, -1), ("aoa", 0, 90, 1),
])
@pytest.mark.parametrize("cl", [0.0, 0.5, 1.0])
def test_monotone_in_kinematics(field, lo, hi, direction, cl):
    rng = np.random.default_rng(hash((field, cl)) % 2**32)
    for _ in range(5):
        base = dict(range=rng.uniform(0, 250), velocity=rng.uniform(0, 3), altitude=rng.uniform(0, 14),
                    aoa=rng.uniform(0, 90), lethality=str(rng.choice(threat.LETHALITY)),
                    intent={str(rng.choice(threat.INTENT_CLASSES)): 1.0})
        scores = [threat.assess_threat(track(**{**base, field: x}), cl).score for x in np.linspace(lo, hi, GRID)]
        assert np.all(direction * np.diff(scores) >= -1e-12)


def test_monotone_in_lethality_and_intent_danger():
    for cl in (0.0, 0.5, 1.0):
        s = [threat.assess_threat(track(lethality=l), cl).score for l in threat.LETHALITY]
        assert s == sorted(s)
        s = [threat.assess_threat(track(intent={g[0]: 1.0}), cl).score for g in threat.INTENT_GROUPS]
        assert s == sorted(s)


def test_iff():
    assert threat.iff_classify("X1", "X1") == threat.FRIENDLY
    assert threat.iff_classify("X2", "X1") == threat.SUSPECT
    assert threat.iff_classify(None, "X1") == threat.SUSPECT
    with pytest.raises(ValueError):
        threat.iff_classify("X1", "")


@given(st.text(max_size=6), st.text(min_size=1, max_size=6))
def test_iff_never_false_friend(resp, code):
    if resp != code:
        assert threat.iff_classify(resp, code) == threat.SUSPECT


def test_release_drops_friendly_keeps_unknown():
    ts = [track("f", iff=threat.FRIENDLY), track("u", iff=threat.UNKNOWN), track("s", iff=threat.SUSPECT)]
    assert [t.id for t in threat.release_tracks(ts)] == ["u", "s"]


@pytest.mark.parametrize("kw", [
    {"range": -1.0}, {"aoa": 91.0}, {"lethality": "Deadly"}, {"intent": {"Strike": 0.5}},
    {"intent": {"Picnic": 1.0}}, {"velocity": float("nan")},
])
def test_track_validation(kw):
    with pytest.raises(ValueError):
        track(**kw)


def test_threats_csv():
    text = threat.threats_to_csv(threat.prioritize([R1_TRACK, R1215_TRACK], 1.0))
    lines = text.splitlines()
    assert lines[0] == "target_id,score,rank"
    assert lines[1].startswith("r1215,") and lines[1].endswith(",1")
