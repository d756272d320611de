"""Mamdani fuzzy inference with trapezoidal memberships.

Antecedent grades combine by product, consequents defuzzify by the weighted
average of each output label's representative value. A complete rule grid can
be interpolated from a handful of anchor rules through per-label danger
indices.
"""
from __future__ import annotations

import itertools
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Union

import numpy as np

from .errors import ConflictingAnchors, NoRuleFired, UnknownLabel

INF = math.inf

ANCHOR = "anchor"
INTERPOLATED = "interpolated"


@dataclass(frozen=True)
class Trapezoid:
    """Breakpoints ``a <= b <= c <= d``. ``a=-inf`` / ``d=+inf`` give semi-trapezoids."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if any(math.isnan(v) for v in (self.a, self.b, self.c, self.d)):
            raise ValueError("trapezoid breakpoints must not be NaN")
        if not (self.a <= self.b <= self.c <= self.d):
            raise ValueError(f"breakpoints out of order: {self.as_tuple()}")
        if math.isinf(self.b) and math.isinf(self.c):
            raise ValueError("at least one of b, c must be finite")

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def __call__(self, x):
        return membership_grade(self, x)


def membership_grade(t: Trapezoid, x: float) -> float:
    if x < t.b:
        if t.a == -INF:
            return 1.0
        if x <= t.a:
            return 0.0
        return (x - t.a) / (t.b - t.a)
    if x > t.c:
        if t.d == INF:
            return 1.0
        if x >= t.d:
            return 0.0
        return (t.d - x) / (t.d - t.c)
    return 1.0


@dataclass(frozen=True)
class Label:
    """A fuzzy label.

    Numeric labels carry a ``shape``. Graded labels have no shape; their grade
    is the maximum of the supplied grades of their ``members`` (a fuzzy OR over
    classes, e.g. "Reconnaissance or Surveillance").
    """

    name: str
    shape: Trapezoid | None = None
    members: tuple[str, ...] = ()
    danger: float | None = None

    def __post_init__(self):
        if self.shape is None and not self.members:
            object.__setattr__(self, "members", (self.name,))


@dataclass(frozen=True)
class FuzzyVariable:
    name: str
    labels: tuple[Label, ...]
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def graded(self) -> bool:
        return any(lab.shape is None for lab in self.labels)

    @property
    def label_names(self) -> tuple[str, ...]:
        return tuple(lab.name for lab in self.labels)

    def index(self, label: str) -> int:
        for i, lab in enumerate(self.labels):
            if lab.name == label:
                return i
        raise UnknownLabel(f"variable {self.name!r} has no label {label!r}")

    def danger_indices(self) -> tuple[Fraction, ...]:
        n = len(self.labels)
        out = []
        for i, lab in enumerate(self.labels):
            if lab.danger is not None:
                out.append(Fraction(lab.danger).limit_denominator(10**6))
            else:
                out.append(Fraction(i, n - 1) if n > 1 else Fraction(0))
        return tuple(out)

    def grades(self, value) -> np.ndarray:
        """Grade of every label for one crisp input.

        Numeric variables take a real. Graded variables take either a mapping
        of class name to grade, or a single class name (grade 1, others 0).
        """
        if not self.graded:
            return np.array([membership_grade(lab.shape, float(value)) for lab in self.labels])
        if isinstance(value, str):
            value = {value: 1.0}
        if not isinstance(value, Mapping):
            raise TypeError(f"variable {self.name!r} expects a class->grade mapping")
        return np.array([max(float(value.get(m, 0.0)) for m in lab.members) for lab in self.labels])


@dataclass(frozen=True)
class OutputLabel:
    name: str
    representative: float
    shape: Trapezoid


@dataclass(frozen=True)
class Rule:
    antecedent: tuple[str, ...]
    consequent: str
    origin: str = ANCHOR

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(self.antecedent))


Inputs = Union[Sequence[Any], Mapping[str, Any]]


@dataclass(frozen=True)
class RuleBase:
    variables: tuple[FuzzyVariable, ...]
    outputs: tuple[OutputLabel, ...]
    rules: tuple[Rule, ...] = field(default=())

    def __post_init__(self):
        for name in ("variables", "outputs", "rules"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def variable(self, name: str) -> FuzzyVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def output(self, name: str) -> OutputLabel:
        for o in self.outputs:
            if o.name == name:
                return o
        raise UnknownLabel(f"no output label {name!r}")

    def grid_size(self) -> int:
        return math.prod(len(v.labels) for v in self.variables)

    @cached_property
    def _compiled(self):
        idx = np.empty((len(self.rules), len(self.variables)), dtype=np.intp)
        rep = np.empty(len(self.rules))
        for r, rule in enumerate(self.rules):
            if len(rule.antecedent) != len(self.variables):
                raise UnknownLabel(f"rule {r} has {len(rule.antecedent)} antecedents")
            for v, (var, lab) in enumerate(zip(self.variables, rule.antecedent)):
                idx[r, v] = var.index(lab)
            rep[r] = self.output(rule.consequent).representative
        return idx, rep

    def label_grades(self, inputs: Inputs) -> list[np.ndarray]:
        if isinstance(inputs, Mapping):
            values = [inputs[v.name] for v in self.variables]
        else:
            values = list(inputs)
        if len(values) != len(self.variables):
            raise ValueError(f"expected {len(self.variables)} inputs, got {len(values)}")
        return [var.grades(x) for var, x in zip(self.variables, values)]

    def strengths(self, inputs: Inputs) -> np.ndarray:
        """Firing strength of every rule, in rule order."""
        idx, _ = self._compiled
        grades = self.label_grades(inputs)
        w = np.ones(len(self.rules))
        for v, g in enumerate(grades):
            w *= g[idx[:, v]]
        return w


def fire_rule(rb: RuleBase, r: Rule, inputs: Inputs) -> float:
    if len(r.antecedent) != len(rb.variables):
        raise UnknownLabel(f"rule names {len(r.antecedent)} labels for {len(rb.variables)} variables")
    pos = [var.index(lab) for var, lab in zip(rb.variables, r.antecedent)]
    grades = rb.label_grades(inputs)
    w = 1.0
    for i, g in zip(pos, grades):
        w *= float(g[i])
    return w


def infer(rb: RuleBase, inputs: Inputs) -> float:
    _, rep = rb._compiled
    w = rb.strengths(inputs)
    total = float(w.sum())
    if total <= 0.0:
        raise NoRuleFired("no rule fires for the given inputs")
    return float(np.dot(w, rep) / total)


def infer_many(rb: RuleBase, batch: Sequence[Inputs]) -> np.ndarray:
    """Vectorised :func:`infer` over a batch of input vectors."""
    idx, rep = rb._compiled
    if len(batch) == 0:
        return np.empty(0)
    n = len(batch)
    per_var = [[] for _ in rb.variables]
    for inputs in batch:
        for v, g in enumerate(rb.label_grades(inputs)):
            per_var[v].append(g)
    w = np.ones((n, len(rb.rules)))
    for v, rows in enumerate(per_var):
        w *= np.asarray(rows)[:, idx[:, v]]
    total = w.sum(axis=1)
    if np.any(total <= 0.0):
        bad = int(np.flatnonzero(total <= 0.0)[0])
        raise NoRuleFired(f"no rule fires for batch item {bad}")
    return (w @ rep) / total


def interpolated_consequent(rb: RuleBase, antecedent: Sequence[str]) -> str:
    """Consequent from the mean danger index of the antecedent labels.

    With outputs ordered from least to most dangerous, the mean index in
    [0, 1] is split into equal bands; band edges belong to the upper band.
    """
    total = Fraction(0)
    for var, lab in zip(rb.variables, antecedent):
        total += var.danger_indices()[var.index(lab)]
    mean = total / len(rb.variables)
    n_out = len(rb.outputs)
    k = min(n_out - 1, math.floor(mean * n_out))
    return rb.outputs[k].name


def interpolate_rules(anchors: Sequence[Rule], rb: RuleBase) -> RuleBase:
    """Complete the antecedent grid of ``rb`` around ``anchors``.

    Anchors are kept verbatim (including their ``origin``); every other
    combination gets an interpolated consequent. Rules come out in grid order,
    first variable varying slowest.
    """
    given: dict[tuple[str, ...], Rule] = {}
    for rule in anchors:
        if len(rule.antecedent) != len(rb.variables):
            raise UnknownLabel(f"anchor {rule.antecedent} does not cover every variable")
        for var, lab in zip(rb.variables, rule.antecedent):
            var.index(lab)
        rb.output(rule.consequent)
        prev = given.get(rule.antecedent)
        if prev is not None and prev.consequent != rule.consequent:
            raise ConflictingAnchors(
                f"{rule.antecedent}: {prev.consequent!r} vs {rule.consequent!r}"
            )
        given.setdefault(rule.antecedent, rule)

    rules = []
    for combo in itertools.product(*(v.label_names for v in rb.variables)):
        if combo in given:
            rules.append(given[combo])
        else:
            rules.append(Rule(combo, interpolated_consequent(rb, combo), INTERPOLATED))
    return RuleBase(rb.variables, rb.outputs, tuple(rules))


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str = ""


def _coverage_gaps(var: FuzzyVariable) -> list[float]:
    pts = sorted({p for lab in var.labels for p in lab.shape.as_tuple() if math.isfinite(p)})
    if not pts:
        return []
    probes = [pts[0] - 1.0, pts[-1] + 1.0, *pts]
    probes += [(lo + hi) / 2 for lo, hi in zip(pts, pts[1:])]
    return sorted(
        x for x in probes if max(membership_grade(lab.shape, x) for lab in var.labels) == 0.0
    )


def validate_rulebase(rb: RuleBase) -> list[Violation]:
    out: list[Violation] = []
    for var in rb.variables:
        names = var.label_names
        if len(names) < 2:
            out.append(Violation("TooFewLabels", var.name))
        for dup in sorted({n for n in names if names.count(n) > 1}):
            out.append(Violation("DuplicateLabel", f"{var.name}.{dup}"))
        if not var.graded:
            for x in _coverage_gaps(var):
                out.append(Violation("CoverageGap", var.name, f"no label covers x={x:g}"))
    for o in rb.outputs:
        if not (o.shape.b <= o.representative <= o.shape.c):
            out.append(Violation("RepresentativeOutsidePlateau", o.name))

    seen: dict[tuple[str, ...], int] = {}
    for i, rule in enumerate(rb.rules):
        where = f"rule[{i}]"
        if len(rule.antecedent) != len(rb.variables):
            out.append(Violation("ArityMismatch", where, f"{len(rule.antecedent)} antecedents"))
            continue
        ok = True
        for var, lab in zip(rb.variables, rule.antecedent):
            if lab not in var.label_names:
                out.append(Violation("UnknownLabel", where, f"{var.name}={lab!r}"))
                ok = False
        if rule.consequent not in {o.name for o in rb.outputs}:
            out.append(Violation("UnknownLabel", where, f"consequent {rule.consequent!r}"))
        if not ok:
            continue
        if rule.antecedent in seen:
            out.append(Violation("DuplicateAntecedent", where, f"same as rule[{seen[rule.antecedent]}]"))
        else:
            seen[rule.antecedent] = i

    for combo in itertools.product(*(v.label_names for v in rb.variables)):
        if combo not in seen:
            out.append(Violation("MissingRule", ",".join(combo)))
    return out


# -- JSON ------------------------------------------------------------------

def _bp_out(t: Trapezoid):
    return [None if math.isinf(v) else v for v in t.as_tuple()]


def _bp_in(bp) -> Trapezoid:
    a, b, c, d = bp
    return Trapezoid(
        -INF if a is None else float(a),
        -INF if b is None else float(b),
        INF if c is None else float(c),
        INF if d is None else float(d),
    )


def rulebase_to_dict(rb: RuleBase, anchors_only: bool = False) -> dict:
    variables = []
    for var in rb.variables:
        labels = []
        for lab in var.labels:
            entry: dict[str, Any] = {"name": lab.name}
            if lab.shape is not None:
                entry["breakpoints"] = _bp_out(lab.shape)
            else:
                entry["members"] = list(lab.members)
            if lab.danger is not None:
                entry["danger"] = lab.danger
            labels.append(entry)
        variables.append({"name": var.name, "unit": var.unit, "labels": labels})
    rules = [r for r in rb.rules if not anchors_only or r.origin == ANCHOR]
    doc = {
        "variables": variables,
        "outputs": [
            {"name": o.name, "representative": o.representative, "breakpoints": _bp_out(o.shape)}
            for o in rb.outputs
        ],
        "rules": [{"if": list(r.antecedent), "then": r.consequent, "origin": r.origin} for r in rules],
    }
    if anchors_only:
        doc["interpolate"] = True
    return doc


def rulebase_from_dict(doc: Mapping) -> RuleBase:
    variables = []
    for v in doc["variables"]:
        labels = []
        for lab in v["labels"]:
            shape = _bp_in(lab["breakpoints"]) if "breakpoints" in lab else None
            labels.append(Label(lab["name"], shape, tuple(lab.get("members", ())), lab.get("danger")))
        variables.append(FuzzyVariable(v["name"], tuple(labels), v.get("unit", "")))
    outputs = [OutputLabel(o["name"], float(o["representative"]), _bp_in(o["breakpoints"])) for o in doc["outputs"]]
    rules = [Rule(tuple(r["if"]), r["then"], r.get("origin", ANCHOR)) for r in doc.get("rules", [])]
    rb = RuleBase(tuple(variables), tuple(outputs), tuple(rules))
    if doc.get("interpolate"):
        rb = interpolate_rules(rb.rules, rb)
    return rb


def dumps(rb: RuleBase, anchors_only: bool = False) -> str:
    return json.dumps(rulebase_to_dict(rb, anchors_only), indent=1)


def loads(text: str) -> RuleBase:
    return rulebase_from_dict(json.loads(text))
