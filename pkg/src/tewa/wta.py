"""Weapon allocation as an integer program.

Maximise the target value destroyed, ``sum_ws y_ws * C_ws``, subject to

* inventory:  ``sum_s y_ws * N_ws <= NI_w`` for every weapon type ``w``
* targets:    ``sum_w y_ws <= NT_s``        for every target type ``s``
* ``y_ws >= 0`` and integer.

Three solvers share that model: exhaustive branch-and-bound, a ratio greedy,
and a greedy-seeded genetic algorithm.
"""
from __future__ import annotations

import json
import math
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InstanceTooLarge, ParseError, ValidationError

DEFAULT_EXACT_CAP = 10**7


@dataclass(frozen=True)
class WeaponType:
    id: str
    inventory: int
    salvo: tuple[int, ...]
    kill_prob: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "salvo", tuple(int(n) for n in self.salvo))
        object.__setattr__(self, "kill_prob", tuple(float(p) for p in self.kill_prob))
        if self.inventory < 0:
            raise ValidationError(f"weapons[{self.id}].NI", "inventory must be >= 0")
        if any(n < 1 for n in self.salvo):
            raise ValidationError(f"weapons[{self.id}].N", "salvo sizes must be >= 1")
        if any(not 0.0 <= p <= 1.0 for p in self.kill_prob):
            raise ValidationError(f"weapons[{self.id}].P", "kill probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class TargetTypeSpec:
    id: str
    count: int
    value: float

    def __post_init__(self):
        if self.count < 0:
            raise ValidationError(f"targets[{self.id}].NT", "count must be >= 0")
        if not self.value > 0:
            raise ValidationError(f"targets[{self.id}].V", "value must be > 0")


def build_cws(weapons: Sequence[WeaponType], targets: Sequence[TargetTypeSpec]) -> np.ndarray:
    """Payoff per allocated unit: target value times kill probability."""
    V = np.array([t.value for t in targets], dtype=float)
    P = np.array([[w.kill_prob[s] for s in range(len(targets))] for w in weapons], dtype=float)
    return P.reshape(len(weapons), len(targets)) * V


@dataclass(frozen=True, eq=False)
class WtaInstance:
    weapons: tuple[WeaponType, ...]
    targets: tuple[TargetTypeSpec, ...]
    C: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "weapons", tuple(self.weapons))
        object.__setattr__(self, "targets", tuple(self.targets))
        S = len(self.targets)
        for w in self.weapons:
            if len(w.salvo) != S or len(w.kill_prob) != S:
                raise DimensionMismatch(f"weapon {w.id} rows must have {S} entries")
        C = build_cws(self.weapons, self.targets) if self.C is None else np.asarray(self.C, dtype=float)
        if C.shape != (len(self.weapons), S):
            raise DimensionMismatch(f"C has shape {C.shape}, expected {(len(self.weapons), S)}")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise ValidationError("C", "payoffs must be finite and >= 0")
        C = C.copy()
        C.flags.writeable = False
        object.__setattr__(self, "C", C)

    @property
    def shape(self) -> tuple[int, int]:
        return self.C.shape

    @property
    def NI(self) -> np.ndarray:
        return np.array([w.inventory for w in self.weapons], dtype=np.int64)

    @property
    def NT(self) -> np.ndarray:
        return np.array([t.count for t in self.targets], dtype=np.int64)

    @property
    def N(self) -> np.ndarray:
        return np.array([w.salvo for w in self.weapons], dtype=np.int64).reshape(self.shape)

    def cell_bounds(self) -> np.ndarray:
        """Largest value each y_ws can take on its own."""
        return np.minimum(self.NI[:, None] // self.N, self.NT[None, :])


def _check_dims(instance: WtaInstance, y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != instance.shape:
        raise DimensionMismatch(f"allocation shape {y.shape} != instance shape {instance.shape}")
    return y


def evaluate_tvd(instance: WtaInstance, y) -> float:
    y = _check_dims(instance, y)
    # y_ws copies of C_ws through fsum: the correctly rounded exact sum, free
    # of per-product rounding, so every solver and oracle agrees bit for bit
    terms = []
    for v, c in zip(y.ravel().tolist(), instance.C.ravel().tolist()):
        n = int(v)
        if n != v:
            terms.append(float(v) * c)
        else:
            terms.extend([c if n > 0 else -c] * abs(n))
    return math.fsum(terms)


def feasible(instance: WtaInstance, y) -> tuple[bool, list[str]]:
    y = _check_dims(instance, y)
    violated = []
    for w, s in zip(*np.nonzero(y < 0)):
        violated.append(f"nonnegative[{instance.weapons[w].id},{instance.targets[s].id}]: y={y[w, s]}")
    used = (y * instance.N).sum(axis=1)
    for w, wt in enumerate(instance.weapons):
        if used[w] > wt.inventory:
            violated.append(f"inventory[{wt.id}]: {used[w]} > {wt.inventory}")
    assigned = y.sum(axis=0)
    for s, tt in enumerate(instance.targets):
        if assigned[s] > tt.count:
            violated.append(f"targets[{tt.id}]: {assigned[s]} > {tt.count}")
    return not violated, violated


def search_space(instance: WtaInstance) -> int:
    return math.prod(int(b) + 1 for b in instance.cell_bounds().ravel())


def solve_exact(instance: WtaInstance, cap: int = DEFAULT_EXACT_CAP) -> tuple[np.ndarray, float]:
    """Optimal allocation by depth-first branch and bound.

    Candidates are visited in lexicographic order and only a strictly better
    TVD replaces the incumbent, so ties resolve to the smallest matrix.
    """
    W, S = instance.shape
    space = search_space(instance)
    if space > cap:
        raise InstanceTooLarge(f"search space {space} exceeds cap {cap}; use greedy or ga")
    C = instance.C.ravel()
    N = instance.N.ravel()
    inv = [int(v) for v in instance.NI]
    nt = [int(v) for v in instance.NT]
    cells = W * S
    y = [0] * cells
    best = {"tvd": 0.0, "y": [0] * cells}

    def bound(k: int) -> float:
        total = 0.0
        for j in range(k, cells):
            w, s = divmod(j, S)
            if C[j] > 0:
                total += C[j] * min(inv[w] // N[j], nt[s])
        return total

    def tol(v: float) -> float:
        return 1e-12 * max(1.0, abs(v))

    def dfs(k: int, value: float):
        if k == cells:
            if value > best["tvd"] + tol(best["tvd"]):
                best["tvd"] = value
                best["y"] = list(y)
            return
        if value + bound(k) <= best["tvd"] + tol(best["tvd"]):
            return
        w, s = divmod(k, S)
        hi = min(inv[w] // N[k], nt[s])
        for v in range(hi + 1):
            y[k] = v
            inv[w] -= v * N[k]
            nt[s] -= v
            dfs(k + 1, value + v * C[k])
            inv[w] += v * N[k]
            nt[s] += v
        y[k] = 0

    dfs(0, 0.0)
    out = np.array(best["y"], dtype=np.int64).reshape(W, S)
    return out, evaluate_tvd(instance, out)


def _ratio_order(instance: WtaInstance) -> list[int]:
    ratio = (instance.C / instance.N).ravel()
    return sorted(range(ratio.size), key=lambda j: (-ratio[j], j))


def solve_greedy(instance: WtaInstance) -> tuple[np.ndarray, float]:
    """Assign units to the best payoff-per-weapon pair until nothing fits."""
    W, S = instance.shape
    C = instance.C.ravel()
    N = instance.N.ravel()
    inv = instance.NI.copy()
    nt = instance.NT.copy()
    y = np.zeros(W * S, dtype=np.int64)
    for j in _ratio_order(instance):
        if C[j] <= 0:
            break
        w, s = divmod(j, S)
        k = min(inv[w] // N[j], nt[s])
        if k > 0:
            y[j] += k
            inv[w] -= k * N[j]
            nt[s] -= k
    y = y.reshape(W, S)
    return y, evaluate_tvd(instance, y)


def repair(instance: WtaInstance, y: np.ndarray, order: Sequence[int] | None = None) -> np.ndarray:
    """Decrement the lowest payoff-per-weapon entries until ``y`` is feasible."""
    W, S = instance.shape
    y = np.maximum(np.asarray(y, dtype=np.int64), 0).reshape(W, S).copy()
    if order is None:
        order = _ratio_order(instance)
    worst_first = list(reversed(order))
    N = instance.N
    NI = instance.NI
    NT = instance.NT
    used = (y * N).sum(axis=1)
    assigned = y.sum(axis=0)
    while True:
        over_w = used > NI
        over_s = assigned > NT
        if not over_w.any() and not over_s.any():
            return y
        for j in worst_first:
            w, s = divmod(j, S)
            if y[w, s] > 0 and (over_w[w] or over_s[s]):
                y[w, s] -= 1
                used[w] -= N[w, s]
                assigned[s] -= 1
                break


@dataclass
class GaStats:
    generations: int = 0
    elapsed: float = 0.0
    history: list = field(default_factory=list)


def solve_ga(
    instance: WtaInstance,
    budget: float | None = None,
    seed: int = 0,
    generations: int | None = 200,
    population: int = 50,
    tournament: int = 3,
    mutation_rate: float = 0.1,
    patience: int | None = None,
    stats: GaStats | None = None,
) -> tuple[np.ndarray, float]:
    """Greedy-seeded integer GA.

    With ``budget`` (seconds) the search runs on the wall clock, stopping early
    only if ``generations`` or ``patience`` (generations without improvement)
    is reached first. Without a budget it runs exactly ``generations``
    generations and is fully determined by ``seed``.
    """
    if budget is not None and budget <= 0:
        raise ValueError("budget must be > 0")
    if budget is None and (generations is None or generations < 0):
        raise ValueError("generation mode needs generations >= 0")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    W, S = instance.shape
    cells = W * S
    order = _ratio_order(instance)
    ub = instance.cell_bounds().ravel()
    C = instance.C.ravel()
    Nmat, NI, NT = instance.N, instance.NI, instance.NT

    greedy_y, _ = solve_greedy(instance)
    pop = [greedy_y.ravel().copy()]
    while len(pop) < population:
        raw = rng.integers(0, ub + 1) if cells else np.zeros(0, dtype=np.int64)
        pop.append(repair(instance, raw, order).ravel())
    pop = np.asarray(pop).reshape(population, cells)
    fit = pop @ C
    best_i = int(np.argmax(fit))
    best, best_fit = pop[best_i].copy(), fit[best_i]

    memo: dict[bytes, np.ndarray] = {}
    gen = stall = 0
    while True:
        if budget is not None:
            if time.perf_counter() - start >= budget:
                break
            if generations is not None and gen >= generations:
                break
        elif gen >= generations:
            break
        if patience is not None and stall >= patience:
            break

        P = pop.shape[0]
        n_child = population - 1
        entrants = rng.integers(0, P, size=(n_child, 2, tournament))
        winners = np.take_along_axis(entrants, np.argmax(fit[entrants], axis=2)[..., None], axis=2)[..., 0]
        stacked = pop
        mask = rng.random((n_child, cells)) < 0.5
        kids = np.where(mask, stacked[winners[:, 0]], stacked[winners[:, 1]])
        mutate = rng.random(n_child) < mutation_rate
        where = rng.integers(0, max(cells, 1), size=n_child)
        step = np.where(rng.random(n_child) < 0.5, 1, -1)
        if cells:
            kids[mutate, where[mutate]] += step[mutate]
        # feasible children pass through; repair (memoized) only the rest
        grid = kids.reshape(n_child, W, S)
        ok = ((kids >= 0).all(axis=1)
              & ((grid * Nmat).sum(axis=2) <= NI).all(axis=1)
              & (grid.sum(axis=1) <= NT).all(axis=1))
        for r in np.flatnonzero(~ok):
            key = kids[r].tobytes()
            fixed = memo.get(key)
            if fixed is None:
                fixed = memo[key] = repair(instance, kids[r], order).ravel()
            kids[r] = fixed
        pop = np.vstack([best[None, :], kids])
        fit = pop @ C
        i = int(np.argmax(fit))
        if fit[i] > best_fit:
            best, best_fit = pop[i].copy(), fit[i]
            stall = 0
        else:
            stall += 1
        gen += 1
        if stats is not None:
            stats.history.append(float(best_fit))

    if stats is not None:
        stats.generations = gen
        stats.elapsed = time.perf_counter() - start
    y = best.reshape(W, S).astype(np.int64)
    return y, evaluate_tvd(instance, y)


@dataclass
class Solution:
    y: np.ndarray
    tvd: float
    solver: str
    seed: int | None = None
    budget: float | None = None
    generations: int | None = None

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "seed": self.seed,
            "budget": self.budget,
            "generations": self.generations,
            "TVD": self.tvd,
            "y": self.y.tolist(),
        }


def solve(
    instance: WtaInstance,
    solver: str = "exact",
    budget: float | None = None,
    seed: int = 0,
    generations: int | None = 200,
    **kwargs,
) -> Solution:
    if solver == "exact":
        y, tvd = solve_exact(instance, **kwargs)
        return Solution(y, tvd, solver)
    if solver == "greedy":
        y, tvd = solve_greedy(instance)
        return Solution(y, tvd, solver)
    if solver == "ga":
        y, tvd = solve_ga(instance, budget=budget, seed=seed, generations=generations, **kwargs)
        return Solution(y, tvd, solver, seed, budget, generations)
    raise ValueError(f"unknown solver {solver!r}")


# -- JSON ------------------------------------------------------------------

def instance_to_dict(instance: WtaInstance) -> dict:
    return {
        "weapons": [
            {"id": w.id, "NI": w.inventory, "N": list(w.salvo), "P": list(w.kill_prob)}
            for w in instance.weapons
        ],
        "targets": [{"id": t.id, "NT": t.count, "V": t.value} for t in instance.targets],
    }


def instance_from_dict(doc: Mapping) -> WtaInstance:
    try:
        weapons = [
            WeaponType(str(w["id"]), int(w["NI"]), tuple(w["N"]), tuple(w["P"]))
            for w in doc["weapons"]
        ]
        targets = [TargetTypeSpec(str(t["id"]), int(t["NT"]), float(t["V"])) for t in doc["targets"]]
    except KeyError as exc:
        raise ValidationError("instance", f"missing field {exc.args[0]!r}") from None
    return WtaInstance(tuple(weapons), tuple(targets), doc.get("C"))


def load_instance(path) -> WtaInstance:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return instance_from_dict(doc)
