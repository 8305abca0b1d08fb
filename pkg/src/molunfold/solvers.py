"""Search strategies for the unfolding problem.

``exhaustive``, ``random_search`` and ``geodock_greedy`` work on the geometric
objective directly; ``simulated_annealing`` minimizes the QUBO and reports the
geometric value of its best feasible decode. Every solver returns a
:class:`SolverRun`.

Timing goes through a clock. :class:`WallClock` reads a monotonic timer.
:class:`VirtualClock` charges a fixed nominal cost per unit of work, so traces,
time limits and the serialized run are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .encoder import AngleGrid, Infeasible, decode_indices
from .geometry import objective_fragment, objective_fragment_batch
from .quadratizer import QuboProblem
from .topology import TorsionModel

__all__ = [
    "SolverRun",
    "SaConfig",
    "WallClock",
    "VirtualClock",
    "make_clock",
    "SearchSpaceTooLarge",
    "AllRestartsInfeasible",
    "exhaustive",
    "random_search",
    "geodock_greedy",
    "simulated_annealing",
    "anneal_qubo",
    "is_tie",
    "MAX_EXHAUSTIVE",
]

MAX_EXHAUSTIVE = 10**7
_CHUNK = 1 << 15


class SearchSpaceTooLarge(ValueError):
    pass


class AllRestartsInfeasible(RuntimeError):
    pass


def is_tie(a: float, b: float, tol: float = 1e-9) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class WallClock:
    name = "wall"

    def __init__(self):
        self._start = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self._start

    def charge(self, kind: str, n: int = 1) -> None:
        pass

    def spawn(self) -> "WallClock":
        return WallClock()


class VirtualClock:
    """Deterministic clock advanced only by :meth:`charge`."""

    name = "virtual"
    # nominal seconds per unit of work, roughly a vectorized evaluation on one core
    COSTS = {"objective": 2e-6, "flip": 2e-8}

    def __init__(self, costs: dict | None = None):
        self.costs = dict(self.COSTS if costs is None else costs)
        self._t = 0.0

    def now(self) -> float:
        return self._t

    def charge(self, kind: str, n: int = 1) -> None:
        self._t += self.costs[kind] * n

    def spawn(self) -> "VirtualClock":
        return VirtualClock(self.costs)


def make_clock(clock=None):
    if clock is None or clock == "wall":
        return WallClock()
    if clock == "virtual":
        return VirtualClock()
    if hasattr(clock, "now") and hasattr(clock, "charge"):
        return clock
    raise ValueError(f"unknown clock {clock!r}")


@dataclass
class SolverRun:
    solver: str
    seed: int | None
    config: dict
    best_value: float
    best_indices: tuple[int, ...]
    best_angles_deg: list[float]
    occurrences: int
    wall_time_s: float
    trace: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.occurrences < 1:
            raise ValueError("occurrences must be >= 1")
        values = [v for _, v in self.trace]
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("trace values must be non-decreasing")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["best_indices"] = list(self.best_indices)
        out["trace"] = [[float(t), float(v)] for t, v in self.trace]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SolverRun":
        return cls(
            solver=data["solver"],
            seed=data.get("seed"),
            config=dict(data.get("config", {})),
            best_value=float(data["best_value"]),
            best_indices=tuple(int(i) for i in data.get("best_indices", ())),
            best_angles_deg=[float(a) for a in data["best_angles_deg"]],
            occurrences=int(data["occurrences"]),
            wall_time_s=float(data["wall_time_s"]),
            trace=[(float(t), float(v)) for t, v in data.get("trace", [])],
        )

    @classmethod
    def from_json(cls, text: str) -> "SolverRun":
        return cls.from_dict(json.loads(text))


def _angles_deg(grid: AngleGrid, indices) -> list[float]:
    return [float(grid.degrees[k]) for k in indices]


def _config(tm: TorsionModel, grid: AngleGrid, clock, **extra) -> dict:
    cfg = {"ligand": tm.molecule.name, "M": tm.n_torsions, "d": grid.d, "clock": clock.name}
    cfg.update(extra)
    return cfg


class _Tracker:
    """Running best with tie counting and an improvement trace."""

    def __init__(self):
        self.best = -math.inf
        self.indices: tuple[int, ...] = ()
        self.count = 0
        self.trace: list[tuple[float, float]] = []

    def feed(self, values: np.ndarray, indices: np.ndarray, t0: float, t1: float) -> None:
        n = len(values)
        if n == 0:
            return
        top = float(values.max())
        if top > self.best and not is_tie(top, self.best):
            # first position of the new best, then count everything tied with it
            pos = int(np.flatnonzero(values >= top - 1e-9 * max(1.0, abs(top)))[0])
            self.best = float(values[pos])
            self.indices = tuple(int(k) for k in indices[pos])
            self.count = 0
            frac = (pos + 1) / n
            self.trace.append((t0 + frac * (t1 - t0), self.best))
        tol = 1e-9 * max(1.0, abs(self.best))
        self.count += int(np.count_nonzero(np.abs(values - self.best) <= tol))


def exhaustive(tm: TorsionModel, grid: AngleGrid, *, clock=None) -> SolverRun:
    """Evaluate all ``d ** M`` grid assignments; ties go to the lexicographically smallest."""
    clock = make_clock(clock)
    d, m = grid.d, tm.n_torsions
    total = d**m
    if total > MAX_EXHAUSTIVE:
        raise SearchSpaceTooLarge(f"{d}^{m} = {total} assignments exceeds {MAX_EXHAUSTIVE}")
    tracker = _Tracker()
    shape = (d,) * m
    for start in range(0, total, _CHUNK):
        stop = min(total, start + _CHUNK)
        idx = np.stack(np.unravel_index(np.arange(start, stop), shape), axis=1)
        t0 = clock.now()
        values = objective_fragment_batch(tm, grid.values[idx])
        clock.charge("objective", len(idx))
        tracker.feed(values, idx, t0, clock.now())
    return SolverRun(
        solver="exhaustive",
        seed=None,
        config=_config(tm, grid, clock, evaluations=total),
        best_value=tracker.best,
        best_indices=tracker.indices,
        best_angles_deg=_angles_deg(grid, tracker.indices),
        occurrences=tracker.count,
        wall_time_s=clock.now(),
        trace=tracker.trace,
    )


def _random_worker(tm, grid, time_limit, seed_seq, clock, batch, max_samples):
    rng = np.random.default_rng(seed_seq)
    tracker = _Tracker()
    drawn = 0
    while True:
        n = batch if max_samples is None else min(batch, max_samples - drawn)
        idx = rng.integers(0, grid.d, size=(n, tm.n_torsions))
        t0 = clock.now()
        values = objective_fragment_batch(tm, grid.values[idx])
        clock.charge("objective", n)
        t1 = clock.now()
        over = t1 >= time_limit
        if t1 > time_limit and drawn > 0:
            # keep only the samples that fit inside the budget
            keep = max(1, int(n * (time_limit - t0) / (t1 - t0))) if t1 > t0 else n
            keep = min(keep, n)
            idx, values = idx[:keep], values[:keep]
            t1 = t0 + (t1 - t0) * keep / n
            n = keep
        tracker.feed(values, idx, t0, t1)
        drawn += n
        # decide on the untruncated time so round-off cannot buy an extra batch
        if over or (max_samples is not None and drawn >= max_samples):
            return tracker, drawn, min(t1, max(time_limit, t0))


def random_search(tm: TorsionModel, grid: AngleGrid, time_limit: float, seed: int = 0, *,
                  workers: int = 1, jobs: int = 1, clock="wall", batch: int = 64,
                  max_samples: int | None = None) -> SolverRun:
    """Uniform sampling of the angle grid by ``workers`` independent streams until the deadline."""
    if not time_limit > 0:
        raise ValueError("time_limit must be positive")
    if workers < 1 or jobs < 1:
        raise ValueError("workers and jobs must be >= 1")
    base = make_clock(clock)
    clocks = [base] + [base.spawn() for _ in range(workers - 1)]
    seeds = np.random.SeedSequence(seed).spawn(workers)

    def work(w):
        return _random_worker(tm, grid, time_limit, seeds[w], clocks[w], batch, max_samples)

    if jobs == 1 or workers == 1:
        results = [work(w) for w in range(workers)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, range(workers)))

    # deterministic merge: best value, then lowest worker index
    best_w = max(range(workers), key=lambda w: (results[w][0].best, -w))
    best = results[best_w][0]
    occurrences = sum(r[0].count for r in results if is_tie(r[0].best, best.best))
    events = sorted((t, v) for r in results for t, v in r[0].trace)
    trace, top = [], -math.inf
    for t, v in events:
        if v > top:
            trace.append((t, v))
            top = v
    samples = sum(r[1] for r in results)
    return SolverRun(
        solver="random",
        seed=seed,
        config=_config(tm, grid, base, time_limit=time_limit, workers=workers, samples=samples),
        best_value=best.best,
        best_indices=best.indices,
        best_angles_deg=_angles_deg(grid, best.indices),
        occurrences=occurrences,
        wall_time_s=max(r[2] for r in results),
        trace=trace,
    )


def centrality_order(tm: TorsionModel) -> list[int]:
    """Torsions by decreasing bond centrality (sum over both endpoints), model order on ties."""
    c = tm.centrality
    return sorted(range(tm.n_torsions), key=lambda i: (-(c[tm.torsions[i].near - 1] + c[tm.torsions[i].far - 1]), i))


def geodock_greedy(tm: TorsionModel, grid: AngleGrid, rounds: int = 10, *, clock="wall") -> SolverRun:
    """One-torsion-at-a-time sweeps from the input conformation until a pass stops improving."""
    if tm.n_torsions < 1:
        raise ValueError("model has no torsions")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    clock = make_clock(clock)
    order = centrality_order(tm)
    current = np.zeros(tm.n_torsions, dtype=int)
    best = objective_fragment(tm, grid.values[current])
    clock.charge("objective")
    trace = [(clock.now(), best)]
    passes = 0
    for _ in range(rounds):
        passes += 1
        improved = False
        for i in order:
            cand = np.repeat(current[None, :], grid.d, axis=0)
            cand[:, i] = np.arange(grid.d)
            values = objective_fragment_batch(tm, grid.values[cand])
            clock.charge("objective", grid.d)
            k = int(np.argmax(values))
            if values[k] > best and not is_tie(values[k], best):
                current[i] = k
                best = float(values[k])
                trace.append((clock.now(), best))
                improved = True
        if not improved:
            break
    indices = tuple(int(k) for k in current)
    return SolverRun(
        solver="geodock",
        seed=None,
        config=_config(tm, grid, clock, rounds=rounds, passes=passes, order=order),
        best_value=best,
        best_indices=indices,
        best_angles_deg=_angles_deg(grid, indices),
        occurrences=1,
        wall_time_s=clock.now(),
        trace=trace,
    )


@dataclass(frozen=True)
class SaConfig:
    epochs: int = 500
    t_max: float | None = None
    t_min: float = 1e-3
    cooling_ratio: float | None = None
    sweeps_per_epoch: int = 1
    restarts: int = 10
    seed: int = 0
    repair: bool = False
    debug: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.sweeps_per_epoch < 1 or self.restarts < 1:
            raise ValueError("epochs, sweeps_per_epoch and restarts must be >= 1")
        if not self.t_min > 0:
            raise ValueError("t_min must be positive")
        if self.t_max is not None and not self.t_max > self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.cooling_ratio is not None and not 0 < self.cooling_ratio < 1:
            raise ValueError("cooling_ratio must be in (0, 1)")

    def schedule(self, q: QuboProblem) -> tuple[float, float, np.ndarray]:
        """``(t_max, ratio, per-epoch temperatures)``, filling in defaults from ``q``."""
        t_max = self.t_max if self.t_max is not None else _default_t_max(q, self.t_min)
        ratio = self.cooling_ratio if self.cooling_ratio is not None else (self.t_min / t_max) ** (1.0 / self.epochs)
        temps = np.maximum(t_max * ratio ** np.arange(self.epochs), self.t_min)
        return t_max, ratio, temps


def _default_t_max(q: QuboProblem, t_min: float) -> float:
    mass = np.zeros(q.n_vars)
    for i, c in q.linear.items():
        mass[i] += abs(c)
    for (a, b), c in q.quadratic.items():
        mass[a] += abs(c)
        mass[b] += abs(c)
    return max(float(mass.max(initial=0.0)), 2.0 * t_min)


def _csr(q: QuboProblem):
    n = q.n_vars
    h = np.zeros(n)
    for i, c in q.linear.items():
        h[i] = c
    rows = [[] for _ in range(n)]
    for (a, b), c in q.quadratic.items():
        rows[a].append((b, c))
        rows[b].append((a, c))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i, r in enumerate(rows):
        indptr[i + 1] = indptr[i] + len(r)
    indices = np.array([j for r in rows for j, _ in r], dtype=np.int64)
    data = np.array([c for r in rows for _, c in r], dtype=np.float64)
    return indptr, indices, data, h


@numba.njit(cache=True, nogil=True)
def _sa_kernel(indptr, indices, data, h, x, best_x, orders, uniforms, temps, energy, best_energy):
    n = h.shape[0]
    local = h.copy()
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            local[i] += data[p] * x[indices[p]]
    for s in range(orders.shape[0]):
        t = temps[s]
        for r in range(n):
            i = orders[s, r]
            step = 1 - 2 * x[i]
            de = step * local[i]
            if de < 0.0 or uniforms[s, r] < math.exp(-de / t):
                x[i] += step
                energy += de
                for p in range(indptr[i], indptr[i + 1]):
                    local[indices[p]] += data[p] * step
                if energy < best_energy:
                    best_energy = energy
                    best_x[:] = x
    return energy, best_energy


@dataclass
class _Restart:
    bits: np.ndarray
    energy: float
    work: int
    finished: float = 0.0


def _one_restart(csr, q: QuboProblem, cfg: SaConfig, temps: np.ndarray, seed_seq) -> _Restart:
    indptr, indices, data, h = csr
    n = q.n_vars
    rng = np.random.default_rng(seed_seq)
    x = rng.integers(0, 2, size=n).astype(np.int64)
    rows = cfg.epochs * cfg.sweeps_per_epoch
    orders = rng.permuted(np.tile(np.arange(n, dtype=np.int64), (rows, 1)), axis=1)
    uniforms = rng.random((rows, n))
    per_row = np.repeat(temps, cfg.sweeps_per_epoch)
    energy = q.evaluate(x)
    best_x = x.copy()
    best = energy
    # checkpoint the incremental energy against a full evaluation every 50 epochs
    span = 50 * cfg.sweeps_per_epoch if cfg.debug else rows
    for lo in range(0, rows, span):
        hi = min(rows, lo + span)
        energy, best = _sa_kernel(indptr, indices, data, h, x, best_x, orders[lo:hi], uniforms[lo:hi],
                                  per_row[lo:hi], energy, best)
        if cfg.debug:
            full = q.evaluate(x)
            if not is_tie(full, energy, 1e-9):
                raise AssertionError(f"incremental energy {energy} drifted from {full}")
    return _Restart(bits=best_x.astype(np.int8), energy=q.evaluate(best_x), work=rows * n)


def anneal_qubo(q: QuboProblem, cfg: SaConfig, *, jobs: int = 1) -> list[_Restart]:
    """Raw SA restarts on any QUBO; each result holds the best bits and energy of one restart."""
    if q.n_vars == 0:
        raise ValueError("QUBO has no variables")
    _, _, temps = cfg.schedule(q)
    csr = _csr(q)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    if jobs == 1:
        return [_one_restart(csr, q, cfg, temps, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda s: _one_restart(csr, q, cfg, temps, s), seeds))


def _repair(bits: np.ndarray, n_torsions: int, d: int) -> np.ndarray:
    blocks = bits[: n_torsions * d].reshape(n_torsions, d)
    out = np.zeros_like(blocks)
    out[np.arange(n_torsions), blocks.argmax(axis=1)] = 1
    return out.reshape(-1)


def simulated_annealing(q: QuboProblem, cfg: SaConfig = SaConfig(), *, jobs: int = 1, clock="wall",
                        context: dict | None = None) -> SolverRun:
    """Single-flip Metropolis annealing on ``q``, reported through the geometric objective.

    Infeasible restarts are discarded (or projected when ``cfg.repair``). The
    reported best is the feasible restart with the largest geometric value;
    ``occurrences`` counts feasible restarts tied with it.
    """
    if q.hubo is None or q.hubo.model is None:
        raise ValueError("simulated_annealing needs a QUBO built from an encoded torsion model; use anneal_qubo")
    clock = make_clock(clock)
    tm, grid, vm = q.hubo.model, q.hubo.grid, q.hubo.variable_map
    t_max, ratio, temps = cfg.schedule(q)
    csr = _csr(q)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    def run(s):
        return _one_restart(csr, q, cfg, temps, s)

    if jobs == 1:
        restarts = []
        for s in seeds:
            restarts.append(run(s))
            clock.charge("flip", restarts[-1].work)
            restarts[-1].finished = clock.now()
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            restarts = list(pool.map(run, seeds))
        for r in restarts:
            clock.charge("flip", r.work)
            r.finished = clock.now()

    feasible = []
    for r in restarts:
        bits = r.bits[: vm.n]
        if cfg.repair:
            bits = _repair(bits, vm.n_torsions, vm.d)
        idx = decode_indices(vm, bits)
        if isinstance(idx, Infeasible):
            continue
        value = objective_fragment(tm, grid.values[list(idx)])
        clock.charge("objective")
        feasible.append((r, idx, value))
    if not feasible:
        raise AllRestartsInfeasible(
            f"all {cfg.restarts} restarts decoded to infeasible assignments; increase the a_const factor"
        )

    best_r, best_idx, best_value = max(feasible, key=lambda item: item[2])
    occurrences = sum(1 for _, _, v in feasible if is_tie(v, best_value))
    trace, top = [], -math.inf
    for r, _, v in feasible:
        if v > top:
            trace.append((r.finished, v))
            top = v
    config = dict(context or {})
    config.update(_config(tm, grid, clock, epochs=cfg.epochs, sweeps_per_epoch=cfg.sweeps_per_epoch,
                          restarts=cfg.restarts, t_max=t_max, t_min=cfg.t_min, cooling_ratio=ratio,
                          repair=cfg.repair, a_const=q.hubo.a_const, chop_hubo=q.hubo.chop_threshold,
                          n_qubo_vars=q.n_vars, feasible_restarts=len(feasible),
                          best_energy=best_r.energy))
    return SolverRun(
        solver="sa",
        seed=cfg.seed,
        config=config,
        best_value=best_value,
        best_indices=best_idx,
        best_angles_deg=_angles_deg(grid, best_idx),
        occurrences=occurrences,
        wall_time_s=clock.now(),
        trace=trace,
    )
