"""Reference implementations written without the package's internals.

The Mamdani evaluator hard-codes the threat system's breakpoints and grid,
walks every antecedent combination, and banding uses exact fractions. The WTA
oracle enumerates every integer matrix inside the per-cell bounds.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

INF = float("inf")

RANGE = [(120, 160, INF, INF), (40, 80, 120, 160), (-INF, 0, 40, 80)]  # Far, Medium, Close
VELOCITY = [(-INF, 0, 0.4, 0.8), (0.4, 0.8, 1.2, 1.6), (1.2, 1.6, INF, INF)]  # Slow, Medium, Fast
ALTITUDE = [(6, 9, INF, INF), (1, 3, 6, 9), (-INF, 0, 1, 3)]  # High, Medium, Low
AOA = [(-INF, 0, 15, 35), (15, 35, 55, 75), (55, 75, INF, INF)]  # Low, Medium, High
LETHALITY = ["LessLethal", "Lethal", "VeryLethal"]
GROUPS = [
    ("Surveillance", "Reconnaissance"),
    ("CloseAirSupport", "Escort"),
    ("StrategicBombing", "Electronic"),
    ("Suppression", "TacticalBombing"),
    ("Strike", "Interdiction"),
]
GROUP_DANGER = [0.0, 0.25, 0.5, 0.75, 1.0]
REPRESENTATIVE = {"Low": 0.2, "Medium": 0.5, "High": 0.8}


def trap(x, a, b, c, d):
    if b <= x <= c:
        return 1.0
    if x < b:
        if a == -INF:
            return 1.0
        return 0.0 if x <= a else (x - a) / (b - a)
    if d == INF:
        return 1.0
    return 0.0 if x >= d else (d - x) / (d - c)


@lru_cache(maxsize=None)
def consequent(idx):
    # idx: label index per variable, benign = 0
    sizes = (3, 3, 3, 3, 3, 5)
    mean = sum(Fraction(i, n - 1) for i, n in zip(idx, sizes)) / len(sizes)
    if mean < Fraction(1, 3):
        return "Low"
    if mean < Fraction(2, 3):
        return "Medium"
    return "High"


def reference_threat(range_km, mach, alt_km, aoa_deg, lethality, evidence, cl):
    """lethality: class name or {class: grade}; evidence: {intent class: value}."""
    g_range = [trap(range_km, *t) for t in RANGE]
    g_vel = [trap(mach, *t) for t in VELOCITY]
    g_alt = [trap(alt_km, *t) for t in ALTITUDE]
    g_aoa = [trap(aoa_deg, *t) for t in AOA]
    if isinstance(lethality, str):
        g_leth = [1.0 if c == lethality else 0.0 for c in LETHALITY]
    else:
        g_leth = [float(lethality.get(c, 0.0)) for c in LETHALITY]
    g_int = []
    for pair, d in zip(GROUPS, GROUP_DANGER):
        f = cl + (1 - cl) * (1 - d)
        g_int.append(max(min(1.0, evidence.get(c, 0.0) * f) for c in pair))
    if not any(g_int):  # limit cl -> 0+ when scaling removes all evidence
        g_int = [max(evidence.get(c, 0.0) for c in pair) for pair in GROUPS]

    grades = [g_range, g_vel, g_alt, g_aoa, g_leth, g_int]
    live = [[i for i, g in enumerate(gs) if g > 0.0] for gs in grades]
    num = den = 0.0
    for idx in itertools.product(*live):
        w = 1.0
        for gs, i in zip(grades, idx):
            w *= gs[i]
        num += w * REPRESENTATIVE[consequent(idx)]
        den += w
    if den == 0.0:
        raise ZeroDivisionError("no rule fired")
    return num / den


def enumerate_wta(NI, NT, N, C):
    """Best TVD and every optimal matrix (as nested lists), by brute force.

    TVD is accumulated in exact rational arithmetic over the float entries of
    C, so ties are exact and the returned optimum is the correctly rounded sum.
    """
    W, S = len(NI), len(NT)
    Cq = [[Fraction(c) for c in row] for row in C]
    bounds = [[min(NT[s], NI[w] // N[w][s]) for s in range(S)] for w in range(W)]
    cells = [(w, s) for w in range(W) for s in range(S)]
    best, argbest = None, []
    for vals in itertools.product(*[range(bounds[w][s] + 1) for w, s in cells]):
        y = [[0] * S for _ in range(W)]
        for (w, s), v in zip(cells, vals):
            y[w][s] = v
        if any(sum(y[w][s] * N[w][s] for s in range(S)) > NI[w] for w in range(W)):
            continue
        if any(sum(y[w][s] for w in range(W)) > NT[s] for s in range(S)):
            continue
        tvd = sum((y[w][s] * Cq[w][s] for w in range(W) for s in range(S)), Fraction(0))
        if best is None or tvd > best:
            best, argbest = tvd, [y]
        elif tvd == best:
            argbest.append(y)
    return float(best), argbest
