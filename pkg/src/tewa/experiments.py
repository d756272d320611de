"""Canned experiments: jamming, threat surfaces, order statistics, GA scaling."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, fuzzy, threat, wta
from .agents import SurveillanceRadarAgent
from .errors import UnknownExperiment
from .sim import JamInjection, derive_seed, generate_status_stream

EXPERIMENTS = ("jamming", "surfaces", "order_stats", "scaling")


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1) + "\n")


# -- jamming -----------------------------------------------------------------

def jamming(seed: int = 0, replications: int = 500, ticks: int = 100, theta: float = 0.3, k: int = 3,
            injection: JamInjection = JamInjection(), fit_ticks: int = 100) -> dict:
    """SRA over injected Poisson streams, plus a fit of clean-stream RD values."""
    rows = []
    for r in range(replications):
        sra = SurveillanceRadarAgent(theta, k)
        jams = msgs = rd_ticks = 0
        for t, n in enumerate(generate_status_stream(derive_seed(seed, r, "sra"), ticks, injection)):
            out = sra.observe(n, t)
            if out is None:
                continue
            entry, evs = out
            rd_ticks += 1
            jams += entry.belief == "Jammed"
            msgs += len(evs)
        rows.append((r, rd_ticks, jams, msgs))
    rd_total = sum(r[1] for r in rows)
    jam_total = sum(r[2] for r in rows)
    msg_total = sum(r[3] for r in rows)

    clean = generate_status_stream(derive_seed(seed, 0, "eval"), fit_ticks, False)
    rd = [abs((a - b) / a) for a, b in zip(clean, clean[1:]) if a != 0]
    fits = evaluation.rank_fits(rd)
    return {
        "summary": {
            "replications": replications,
            "ticks": ticks,
            "theta": theta,
            "k": k,
            "injection": {"scale": injection.scale, "duty": injection.duty, "mean_burst": injection.mean_burst},
            "rd_ticks": rd_total,
            "jam_count": jam_total,
            "message_count": msg_total,
            "jam_rate": jam_total / rd_total if rd_total else 0.0,
            "runs_with_jam": sum(1 for r in rows if r[2] > 0),
        },
        "replications": rows,
        "rd_fit": fits,
    }


# -- threat surfaces ---------------------------------------------------------

# inputs held fixed while two axes vary
SURFACE_BASE = {
    "range": 100.0,
    "velocity": 1.0,
    "altitude": 5.0,
    "aoa": 45.0,
    "lethality": 1.0,  # index into LETHALITY, blended between neighbours
    "intent": 2.0,  # index into INTENT_GROUPS, blended between neighbours
}

SURFACES = {
    "a_range_velocity": (("range", 0.0, 250.0), ("velocity", 0.0, 3.0)),
    "b_intent_target_type": (("intent", 0.0, 4.0), ("lethality", 0.0, 2.0)),
    "c_altitude_aoa": (("altitude", 0.0, 12.0), ("aoa", 0.0, 90.0)),
    "d_target_type_range": (("lethality", 0.0, 2.0), ("range", 0.0, 250.0)),
}

# +1: threat should not fall as the axis grows; -1: should not rise
SURFACE_DIRECTION = {"range": -1, "velocity": 1, "altitude": -1, "aoa": 1, "lethality": 1, "intent": 1}


def _blend(position: float, names) -> dict[str, float]:
    i = min(int(np.floor(position)), len(names) - 2)
    f = position - i
    out = {n: 0.0 for n in names}
    out[names[i]] += 1.0 - f
    out[names[i + 1]] += f
    return out


def surface_inputs(point: dict, cl: float = 1.0) -> dict:
    groups = _blend(point["intent"], [g[0] for g in threat.INTENT_GROUPS])
    evidence = [groups.get(c, 0.0) for c in threat.INTENT_CLASSES]
    return {
        "range": point["range"],
        "velocity": point["velocity"],
        "altitude": point["altitude"],
        "aoa": point["aoa"],
        "target_type": _blend(point["lethality"], threat.LETHALITY),
        "intent": threat.engine_intent(evidence, cl),
    }


@dataclass
class Surface:
    name: str
    x_name: str
    y_name: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray  # z[i, j] at (x[i], y[j])

    def rows(self):
        for i, xv in enumerate(self.x):
            for j, yv in enumerate(self.y):
                yield (float(xv), float(yv), float(self.z[i, j]))


def threat_surface(name: str, size: int = 50, cl: float = 1.0) -> Surface:
    (xn, x0, x1), (yn, y0, y1) = SURFACES[name]
    xs, ys = np.linspace(x0, x1, size), np.linspace(y0, y1, size)
    inputs = [surface_inputs({**SURFACE_BASE, xn: xv, yn: yv}, cl) for xv in xs for yv in ys]
    z = fuzzy.infer_many(threat.threat_rulebase(), inputs).reshape(size, size)
    return Surface(name, xn, yn, xs, ys, z)


def monotonicity_violations(s: Surface, slack: float = 1e-12) -> int:
    dx = SURFACE_DIRECTION[s.x_name] * np.diff(s.z, axis=0)
    dy = SURFACE_DIRECTION[s.y_name] * np.diff(s.z, axis=1)
    return int((dx < -slack).sum() + (dy < -slack).sum())


def surfaces(size: int = 50, cl: float = 1.0) -> list[Surface]:
    return [threat_surface(n, size, cl) for n in SURFACES]


# -- order statistics --------------------------------------------------------

def order_stats(seed: int = 0, n: int = 10, groups: int = 500, alpha: float = 0.05) -> dict:
    out = {}
    for which, oracle in (("min", (1.0, float(n))), ("max", (float(n), 1.0))):
        sample = evaluation.order_statistics_sim(n, groups, which, seed=derive_seed(seed, 0, f"eval-{which}"))
        ref = evaluation.DistributionSpec("Beta", oracle)
        d = evaluation.ks_statistic(sample, ref)
        crit = evaluation.ks_critical(alpha, len(sample))
        out[which] = {
            "n": n,
            "groups": groups,
            "oracle": ref.to_dict(),
            "oracle_ks": d,
            "critical": crit,
            "oracle_accepted": d <= crit,
            "fits": evaluation.rank_fits(sample).to_dict(alpha),
        }
    return out


# -- GA scaling --------------------------------------------------------------

SCALING_TARGET_COUNTS = (5, 10, 20, 30)


def scaling_instance(per_target_type: int, seed: int = 0) -> wta.WtaInstance:
    """3 weapon types x 10 units against 3 target types x ``per_target_type``."""
    rng = np.random.default_rng(derive_seed(seed, 0, "scaling"))
    p = np.round(rng.uniform(0.3, 0.9, size=(3, 3)), 2)
    weapons = tuple(wta.WeaponType(f"W{w + 1}", 10, (1, 1, 1), tuple(p[w])) for w in range(3))
    targets = tuple(wta.TargetTypeSpec(f"T{s + 1}", per_target_type, float(v)) for s, v in enumerate((10, 6, 3)))
    return wta.WtaInstance(weapons, targets)


def scaling(seed: int = 0, generations: int = 200, budget: float | None = None) -> list[dict]:
    rows = []
    for m in SCALING_TARGET_COUNTS:
        inst = scaling_instance(m, seed)
        t0 = time.perf_counter()
        y, tvd = wta.solve_ga(inst, budget=budget, seed=seed, generations=generations)
        dt = time.perf_counter() - t0
        total_value = float(np.dot(inst.NT, [t.value for t in inst.targets]))
        ok, _ = wta.feasible(inst, y)
        _, greedy_tvd = wta.solve_greedy(inst)
        rows.append({
            "weapons": int(inst.NI.sum()),
            "targets": int(inst.NT.sum()),
            "tvd": tvd,
            "greedy_tvd": greedy_tvd,
            "quality": tvd / total_value,
            "seconds": dt,
            "feasible": ok,
        })
    return rows


# -- dispatcher --------------------------------------------------------------

def experiment(name: str, seed: int = 0, out_dir=None, **kw) -> list[Path]:
    """Run a canned experiment and write its files under ``out_dir``."""
    if name not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    out = Path(out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if name == "jamming":
        res = jamming(seed, **kw)
        _write_json(out / "jamming_summary.json", res["summary"])
        _write_csv(out / "jamming_replications.csv", ["replication", "rd_ticks", "jam_count", "message_count"],
                   res["replications"])
        _write_json(out / "rd_fit.json", res["rd_fit"].to_dict())
        files = ["jamming_summary.json", "jamming_replications.csv", "rd_fit.json"]
    elif name == "surfaces":
        for s in surfaces(**kw):
            _write_csv(out / f"surface_{s.name}.csv", [s.x_name, s.y_name, "threat"], s.rows())
            files.append(f"surface_{s.name}.csv")
    elif name == "order_stats":
        _write_json(out / "order_stats.json", order_stats(seed, **kw))
        files = ["order_stats.json"]
    else:
        rows = scaling(seed, **kw)
        _write_csv(out / "scaling.csv", list(rows[0]), [list(r.values()) for r in rows])
        files = ["scaling.csv"]
    return [out / f for f in files]
