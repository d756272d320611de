"""Logical and statistical evaluation of agent behaviour.

Logical: propositional conflict rules checked against per-tick plan-state
vectors. Statistical: Kolmogorov-Smirnov goodness of fit against a library of
parametric families, with fitted candidates ranked by ``D_n``.
"""
from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .agents import ADDCA, ADDCA_PLAN_IDS, SRA, SRA_PLAN_IDS, TraceEntry
from .errors import (
    InvalidParameters, MalformedTrace, NoApplicableFamily, UnsupportedAlpha, UnsupportedSample,
)


# -- logical -----------------------------------------------------------------

@dataclass(frozen=True)
class ConflictRule:
    """Violated when the guard holds, every plan in ``when`` is active, and

    * all of ``forbidden`` are active together, or
    * none of ``required`` is active.

    ``guard`` is compared to the entry's recorded belief; ``None`` means always.
    """

    name: str
    forbidden: frozenset = frozenset()
    guard: str | None = None
    agent: str | None = None
    when: frozenset = frozenset()
    required: frozenset = frozenset()

    def __post_init__(self):
        for f in ("forbidden", "when", "required"):
            object.__setattr__(self, f, frozenset(getattr(self, f)))
        if self.guard is None and not self.required and len(self.forbidden) < 2:
            raise ValueError(f"{self.name}: an unguarded rule needs >= 2 forbidden plans")

    def violated(self, entry: TraceEntry, plan_ids: Sequence[str]) -> bool:
        if self.agent is not None and entry.agent != self.agent:
            return False
        if self.guard is not None and entry.belief != self.guard:
            return False
        active = {p for p, on in zip(plan_ids, entry.state) if on}
        if not self.when <= active:
            return False
        if self.forbidden and self.forbidden <= active:
            return True
        return bool(self.required) and not (self.required & active)


def sra_rules(literal_p4_pair: bool = False) -> list[ConflictRule]:
    """SRA goal conflicts.

    Hopping (p4) is an ECCM sub-goal of the jammed state (p2), so the fourth
    mutual-exclusion pair is taken as p4 with the not-jammed goal p1.
    ``literal_p4_pair`` adds p4 with p2 instead, which flags every hop tick.
    """
    rules = [
        ConflictRule("p3^p4", {"p3", "p4"}, agent=SRA),
        ConflictRule("p1^p2", {"p1", "p2"}, agent=SRA),
        ConflictRule("p3^p1", {"p3", "p1"}, agent=SRA),
        ConflictRule("p4^p2", {"p4", "p2"}, agent=SRA) if literal_p4_pair else ConflictRule("p4^p1", {"p4", "p1"}, agent=SRA),
        # jammed: p1 is ruled out, some ECCM goal must hold
        ConflictRule("eq5", {"p1"}, guard="Jammed", agent=SRA, required={"p2", "p3", "p4"}),
        # not jammed: p2, p3, p4 ruled out, p1 must hold
        ConflictRule("eq6:p1", guard="NotJammed", agent=SRA, required={"p1"}),
        # not jammed while p2 is active: p3 or p4 must hold (checked as written)
        ConflictRule("eq7", guard="NotJammed", agent=SRA, when={"p2"}, required={"p3", "p4"}),
    ]
    rules += [ConflictRule(f"eq6:{p}", {p}, guard="NotJammed", agent=SRA) for p in ("p2", "p3", "p4")]
    return rules


def addca_rules() -> list[ConflictRule]:
    return [
        ConflictRule(f"{a}^{b}", {a, b}, agent=ADDCA)
        for i, a in enumerate(ADDCA_PLAN_IDS)
        for b in ADDCA_PLAN_IDS[i + 1:]
    ]


def default_rules() -> list[ConflictRule]:
    return sra_rules() + addca_rules()


PLAN_IDS = {SRA: SRA_PLAN_IDS, ADDCA: ADDCA_PLAN_IDS}


@dataclass(frozen=True)
class Conflict:
    tick: int
    agent: str
    rule: str


@dataclass
class TraceReport:
    total_ticks: int
    conflicts: list[Conflict] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.conflicts

    def to_dict(self) -> dict:
        return {
            "total_ticks": self.total_ticks,
            "clean": self.clean,
            "conflicts": [{"tick": c.tick, "agent": c.agent, "rule": c.rule} for c in self.conflicts],
        }

    def to_text(self) -> str:
        head = f"{self.total_ticks} ticks checked: " + ("no conflicts" if self.clean else f"{len(self.conflicts)} conflict(s)")
        return "\n".join([head] + [f"  tick {c.tick} {c.agent}: {c.rule}" for c in self.conflicts])


def check_trace_conflicts(trace: Sequence[TraceEntry], rules: Iterable[ConflictRule] | None = None) -> TraceReport:
    """Flag every entry that violates a rule or did not run its argmax plan."""
    rules = default_rules() if rules is None else list(rules)
    seen: set[tuple[int, str]] = set()
    last_tick: dict[str, int] = {}
    width: dict[str, int] = {}
    conflicts: list[Conflict] = []
    for e in trace:
        key = (e.tick, e.agent)
        if key in seen:
            raise MalformedTrace(f"duplicate entry for tick {e.tick}, agent {e.agent}")
        if e.tick < last_tick.get(e.agent, -1):
            raise MalformedTrace(f"agent {e.agent}: tick {e.tick} after {last_tick[e.agent]}")
        if width.setdefault(e.agent, len(e.state)) != len(e.state):
            raise MalformedTrace(f"agent {e.agent}: state width changed at tick {e.tick}")
        seen.add(key)
        last_tick[e.agent] = e.tick
        plan_ids = PLAN_IDS.get(e.agent, tuple(f"p{i + 1}" for i in range(len(e.state))))
        for rule in rules:
            if rule.violated(e, plan_ids):
                conflicts.append(Conflict(e.tick, e.agent, rule.name))
        if e.argmax_plan is not None and e.selected_plan != e.argmax_plan:
            conflicts.append(Conflict(e.tick, e.agent, "max-rank"))
    ticks = {e.tick for e in trace}
    return TraceReport(len(ticks), conflicts)


# -- statistical -------------------------------------------------------------

FAMILIES = (
    "Uniform", "Normal", "Exponential", "Gamma", "Weibull",
    "Lognormal", "InverseGaussian", "GeneralizedExtremeValue", "Beta",
)

PARAM_NAMES = {
    "Uniform": ("low", "high"),
    "Normal": ("mu", "sigma"),
    "Exponential": ("scale",),
    "Gamma": ("shape", "scale"),
    "Weibull": ("shape", "scale"),
    "Lognormal": ("mu", "sigma"),
    "InverseGaussian": ("mu", "lam"),
    "GeneralizedExtremeValue": ("xi", "loc", "scale"),
    "Beta": ("a", "b"),
}


@dataclass(frozen=True)
class DistributionSpec:
    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.family not in PARAM_NAMES:
            raise InvalidParameters(f"unknown family {self.family!r}")
        if len(self.params) != len(PARAM_NAMES[self.family]):
            raise InvalidParameters(f"{self.family} takes {PARAM_NAMES[self.family]}")
        if not all(math.isfinite(p) for p in self.params):
            raise InvalidParameters(f"{self.family}: non-finite parameter")
        p = self.params
        bad = {
            "Uniform": lambda: p[1] <= p[0],
            "Normal": lambda: p[1] <= 0,
            "Exponential": lambda: p[0] <= 0,
            "Gamma": lambda: p[0] <= 0 or p[1] <= 0,
            "Weibull": lambda: p[0] <= 0 or p[1] <= 0,
            "Lognormal": lambda: p[1] <= 0,
            "InverseGaussian": lambda: p[0] <= 0 or p[1] <= 0,
            "GeneralizedExtremeValue": lambda: p[2] <= 0,
            "Beta": lambda: p[0] <= 0 or p[1] <= 0,
        }[self.family]()
        if bad:
            raise InvalidParameters(f"{self.family}{self.params} outside the valid domain")

    def frozen(self):
        """The equivalent frozen ``scipy.stats`` distribution."""
        p = self.params
        f = self.family
        if f == "Uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if f == "Normal":
            return stats.norm(loc=p[0], scale=p[1])
        if f == "Exponential":
            return stats.expon(scale=p[0])
        if f == "Gamma":
            return stats.gamma(p[0], scale=p[1])
        if f == "Weibull":
            return stats.weibull_min(p[0], scale=p[1])
        if f == "Lognormal":
            return stats.lognorm(p[1], scale=math.exp(p[0]))
        if f == "InverseGaussian":
            return stats.invgauss(p[0] / p[1], scale=p[1])
        if f == "GeneralizedExtremeValue":
            # scipy's shape is the negated xi
            return stats.genextreme(-p[0], loc=p[1], scale=p[2])
        return stats.beta(p[0], p[1])

    def cdf(self, x):
        return self.frozen().cdf(x)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(zip(PARAM_NAMES[self.family], self.params))}


def ks_statistic(sample: Sequence[float], spec: DistributionSpec) -> float:
    """``sup_x |F_n(x) - F(x)|`` evaluated exactly at the sample's steps."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 1:
        raise ValueError("sample must be non-empty")
    F = np.asarray(spec.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - F)), np.max(np.abs((i - 1) / n - F))))


KS_COEFFICIENTS = {0.10: 1.22, 0.05: 1.36, 0.01: 1.63}


def ks_critical(alpha: float, n: int) -> float:
    """Asymptotic critical value ``c(alpha) / sqrt(n)``."""
    for a, c in KS_COEFFICIENTS.items():
        if math.isclose(alpha, a):
            if n < 1:
                raise ValueError("n must be >= 1")
            return c / math.sqrt(n)
    raise UnsupportedAlpha(f"alpha must be one of {sorted(KS_COEFFICIENTS)}")


def _support_ok(family: str, x: np.ndarray) -> str | None:
    if family in ("Exponential",) and np.any(x < 0):
        return "needs x >= 0"
    if family in ("Gamma", "Weibull", "Lognormal", "InverseGaussian") and np.any(x <= 0):
        return "needs x > 0"
    if family == "Beta" and (np.any(x <= 0) or np.any(x >= 1)):
        return "needs 0 < x < 1"
    if family in ("Normal", "Uniform", "GeneralizedExtremeValue", "Lognormal", "Gamma", "Weibull", "Beta") and np.ptp(x) == 0:
        return "needs a non-degenerate sample"
    return None


def _mle(frozen_of, x, start, lower):
    """Maximise the log-likelihood over parameters bounded below by ``lower``."""

    def nll(theta):
        try:
            ll = frozen_of(theta).logpdf(x).sum()
        except (ValueError, FloatingPointError):
            return 1e300
        return -ll if np.isfinite(ll) else 1e300

    bounds = [(lo, None) for lo in lower]
    res = optimize.minimize(nll, np.asarray(start, dtype=float), method="L-BFGS-B", bounds=bounds)
    best = res.x if nll(res.x) <= nll(start) else np.asarray(start, dtype=float)
    if nll(best) >= 1e300:
        raise UnsupportedSample("likelihood maximisation found no finite optimum")
    return best


def fit_distribution(sample: Sequence[float], family: str, min_n: int = 8) -> DistributionSpec:
    x = np.asarray(sample, dtype=float)
    if family not in PARAM_NAMES:
        raise InvalidParameters(f"unknown family {family!r}")
    if x.size < min_n:
        raise UnsupportedSample(f"need at least {min_n} observations")
    if not np.all(np.isfinite(x)):
        raise UnsupportedSample("sample has non-finite values")
    why = _support_ok(family, x)
    if why:
        raise UnsupportedSample(f"{family} {why}")
    m, v = float(x.mean()), float(x.var())
    if family == "Uniform":
        return DistributionSpec(family, (x.min(), x.max()))
    if family == "Normal":
        return DistributionSpec(family, (m, math.sqrt(v)))
    if family == "Exponential":
        if m <= 0:
            raise UnsupportedSample("Exponential needs a positive mean")
        return DistributionSpec(family, (m,))
    if family == "Lognormal":
        lx = np.log(x)
        return DistributionSpec(family, (lx.mean(), lx.std()))
    if family == "InverseGaussian":
        inv = float(np.mean(1.0 / x - 1.0 / m))
        if inv <= 0:
            raise UnsupportedSample("InverseGaussian shape estimate is not positive")
        return DistributionSpec(family, (m, 1.0 / inv))
    if family == "Gamma":
        k0 = m * m / v
        th = _mle(lambda t: stats.gamma(t[0], scale=t[1]), x, (k0, v / m), (1e-8, 1e-12))
        return DistributionSpec(family, tuple(th))
    if family == "Weibull":
        cv = math.sqrt(v) / m
        c0 = max(cv ** -1.086, 0.05)
        lam0 = m / math.gamma(1 + 1 / c0)
        th = _mle(lambda t: stats.weibull_min(t[0], scale=t[1]), x, (c0, lam0), (1e-8, 1e-12))
        return DistributionSpec(family, tuple(th))
    if family == "Beta":
        common = m * (1 - m) / v - 1
        a0, b0 = max(m * common, 1e-3), max((1 - m) * common, 1e-3)
        th = _mle(lambda t: stats.beta(t[0], t[1]), x, (a0, b0), (1e-8, 1e-8))
        return DistributionSpec(family, tuple(th))
    # GEV: moments of the Gumbel limit start the search at xi = 0
    scale0 = math.sqrt(6 * v) / math.pi
    loc0 = m - 0.5772156649 * scale0
    best = None
    for xi0 in (0.0, 0.1, -0.1, 0.3, -0.3):
        s0 = scale0
        # keep every observation inside the start point's support
        if xi0 > 0:
            s0 = max(s0, xi0 * (loc0 - x.min()) * 1.01)
        elif xi0 < 0:
            s0 = max(s0, -xi0 * (x.max() - loc0) * 1.01)
        th = _gev_mle(x, (xi0, loc0, s0))
        if th is not None:
            ll = stats.genextreme(-th[0], loc=th[1], scale=th[2]).logpdf(x).sum()
            if best is None or ll > best[0]:
                best = (ll, th)
    if best is None or not np.isfinite(best[0]):
        raise UnsupportedSample("GEV likelihood maximisation failed")
    return DistributionSpec(family, tuple(best[1]))


def _gev_mle(x, start):
    def nll(t):
        xi, loc, log_s = t
        ll = stats.genextreme(-xi, loc=loc, scale=math.exp(log_s)).logpdf(x).sum()
        return -ll if np.isfinite(ll) else 1e300

    t0 = np.array([start[0], start[1], math.log(start[2])])
    if nll(t0) >= 1e300:
        return None
    res = optimize.minimize(nll, t0, method="L-BFGS-B", bounds=[(-5.0, 5.0), (None, None), (None, None)])
    t = res.x if nll(res.x) <= nll(t0) else t0
    return (float(t[0]), float(t[1]), math.exp(t[2]))


@dataclass
class FitResult:
    spec: DistributionSpec
    ks: float
    rank: int = 0

    def decision(self, alpha: float, n: int) -> dict:
        crit = ks_critical(alpha, n)
        return {
            "alpha": alpha,
            "critical": crit,
            "reject_h0": self.ks > crit,
            # inverted reading: H0 is accepted when D_n exceeds the critical value
            "reject_h0_inverted_polarity": not (self.ks > crit),
        }


@dataclass
class FitReport:
    n: int
    results: list[FitResult]
    skipped: dict[str, str] = field(default_factory=dict)

    @property
    def best(self) -> FitResult:
        return self.results[0]

    def to_dict(self, alpha: float = 0.05) -> dict:
        return {
            "n": self.n,
            "alpha": alpha,
            "critical": ks_critical(alpha, self.n),
            "fits": [
                {**r.spec.to_dict(), "ks": r.ks, "rank": r.rank, **{k: v for k, v in r.decision(alpha, self.n).items() if k.startswith("reject")}}
                for r in self.results
            ],
            "skipped": dict(self.skipped),
        }


def rank_fits(sample: Sequence[float], families: Sequence[str] = FAMILIES) -> FitReport:
    """Fit every applicable family and rank by ascending ``D_n``."""
    x = np.asarray(sample, dtype=float)
    results: list[tuple[float, int, FitResult]] = []
    skipped: dict[str, str] = {}
    for order, fam in enumerate(families):
        try:
            spec = fit_distribution(x, fam)
            d = ks_statistic(x, spec)
        except (UnsupportedSample, InvalidParameters) as exc:
            skipped[fam] = str(exc)
            continue
        if not math.isfinite(d):
            skipped[fam] = "KS statistic is not finite"
            continue
        results.append((d, order, FitResult(spec, d)))
    if not results:
        raise NoApplicableFamily(f"no family applies: {skipped}")
    results.sort(key=lambda t: (t[0], t[1]))
    ranked = []
    for rank, (_, _, r) in enumerate(results, 1):
        r.rank = rank
        ranked.append(r)
    return FitReport(int(x.size), ranked, skipped)


def order_statistics_sim(n: int, groups: int, which: str = "min", seed: int = 0) -> np.ndarray:
    """Minimum (or maximum) of ``n`` Uniform(0, 1) draws, for each group."""
    if n < 1 or groups < 1:
        raise ValueError("n and groups must be >= 1")
    if which not in ("min", "max"):
        raise ValueError("which must be 'min' or 'max'")
    u = np.random.default_rng(seed).random((groups, n))
    return u.min(axis=1) if which == "min" else u.max(axis=1)


def dumps_fit_report(report: FitReport, alpha: float = 0.05) -> str:
    return json.dumps(report.to_dict(alpha), indent=2)
