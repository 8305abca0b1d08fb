"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that the session summary prints, then
asserts. Tolerances are the stated ones; nothing here is loosened.
"""

import itertools
import json
import subprocess
import sys
import time

import numpy as np
from molunfold.bench import build_report, degradation_study, load_runs, normalized_gain, report_json, tts
from molunfold.encoder import AngleGrid, a_const_base, build_hubo, encode, optimization_polynomial
from molunfold.geometry import apply_torsions, objective_fragment, objective_full, torsion_transform
from molunfold.polynomial import BinaryPolynomial
from molunfold.quadratizer import chop_qubo, lift_assignment, quadratize
from molunfold.solvers import SaConfig, SolverRun, exhaustive, geodock_greedy, is_tie, simulated_annealing
from molunfold.topology import build_torsion_model

from conftest import ACCEPTANCE_LINES, LIGANDS

GRID = AngleGrid(8)


def record(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _models(ligands, m):
    out = {}
    for name, mol in ligands.items():
        tm = build_torsion_model(mol, m)
        if tm.n_torsions == m:
            out[name] = tm
    return out


def test_1_encoder_master_consistency(ligands):
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for m in (1, 2, 3):
        for tm in _models(ligands, m).values():
            hubo = build_hubo(tm, GRID, 1.0)
            idx = np.array(list(itertools.product(range(GRID.d), repeat=m)))
            assert len(idx) <= 512
            bits = np.array([encode(hubo.variable_map, row) for row in idx])
            hubo_values = hubo.polynomial.evaluate_many(bits)
            for row, h in zip(idx, hubo_values):
                geo = objective_fragment(tm, GRID.values[row])
                worst = max(worst, abs(h + geo) / max(abs(geo), 1e-300))
                checked += 1
    elapsed = time.perf_counter() - start
    record(1, "encoder master consistency", worst <= 1e-6 and elapsed < 60,
           f"{checked} assignments, max relative error {worst:.2e}, {elapsed:.1f}s")


def _random_hubo(rng):
    n = int(rng.integers(3, 11))
    terms = {}
    for _ in range(int(rng.integers(1, 9))):
        size = int(rng.integers(1, 5))
        key = tuple(sorted(rng.choice(n, size=min(size, n), replace=False).tolist()))
        terms[key] = terms.get(key, 0.0) + float(rng.uniform(-10, 10))
    return BinaryPolynomial(terms), n


def _all_bits(n):
    return ((np.arange(2**n)[:, None] >> np.arange(n)[::-1]) & 1).astype(np.int8)


def test_2_quadratization_exactness():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    bad = []
    for k in range(100):
        poly, n = _random_hubo(rng)
        q = quadratize(poly, n_vars=n)
        x = _all_bits(n)
        hubo_values = poly.evaluate_many(x)
        qubo_min = q.evaluate_many(_all_bits(q.n_vars)).min()
        lifted = np.array([lift_assignment(q, row) for row in x])
        lifted_values = q.evaluate_many(lifted)
        if abs(qubo_min - hubo_values.min()) > 1e-9 or np.max(np.abs(lifted_values - hubo_values)) > 1e-9:
            bad.append(k)
    elapsed = time.perf_counter() - start
    record(2, "quadratization exactness", not bad and elapsed < 60,
           f"100 random HUBOs, mismatches {bad or 'none'}, {elapsed:.1f}s")


def test_3_penalty_dominance(ligands):
    # a_const = factor * max |optimization coefficient|, minimizer found by enumerating all 2^16 assignments
    outcomes = {}
    for name, tm in _models(ligands, 2).items():
        objective = optimization_polynomial(tm, GRID)
        base = a_const_base(objective, "max-coefficient")
        for factor in (1, 2, 5, 10):
            hubo = build_hubo(tm, GRID, factor * base, objective=objective)
            q = quadratize(hubo)
            bits = _all_bits(q.n_vars)
            energies = q.evaluate_many(bits)
            best = bits[int(np.argmin(energies))][: hubo.n_vars].reshape(2, GRID.d)
            outcomes[(name, factor)] = bool(np.all(best.sum(axis=1) == 1))
    failing = sorted(f"{name}@{factor}" for (name, factor), ok in outcomes.items() if not ok)
    record(3, "penalty dominance", not failing,
           f"{sum(outcomes.values())}/{len(outcomes)} feasible; infeasible minimizers: {failing or 'none'}")


def test_4_coarse_grain_degradation(ligands):
    start = time.perf_counter()
    losses = {name: degradation_study(tm, 72, 8) for name, tm in _models(ligands, 2).items()}
    elapsed = time.perf_counter() - start
    ok = all(0 <= v <= 5 for v in losses.values()) and elapsed < 300
    detail = ", ".join(f"{k} {v:.2f}%" for k, v in sorted(losses.items()))
    record(4, "coarse-grain degradation", ok, f"{detail}; mean {np.mean(list(losses.values())):.2f}%, {elapsed:.1f}s")


def test_5_sa_recovers_optimum(ligands):
    start = time.perf_counter()
    hits = {}
    for name, tm in _models(ligands, 2).items():
        optimum = exhaustive(tm, GRID, clock="virtual").best_value
        objective = optimization_polynomial(tm, GRID)
        q = quadratize(build_hubo(tm, GRID, 2.0 * a_const_base(objective), objective=objective))
        found = 0
        for seed in range(10):
            run = simulated_annealing(q, SaConfig(epochs=500, restarts=10, seed=seed), clock="virtual")
            found += is_tie(run.best_value, optimum)
        hits[name] = found
    elapsed = time.perf_counter() - start
    ok = all(v >= 9 for v in hits.values()) and elapsed < 120
    record(5, "SA recovers the optimum", ok,
           ", ".join(f"{k} {v}/10" for k, v in sorted(hits.items())) + f", {elapsed:.1f}s")


def test_6_greedy_bound(ligands):
    problems = []
    checked = 0
    for m in (1, 2, 3, 4):
        for name, tm in _models(ligands, m).items():
            optimum = exhaustive(tm, GRID, clock="virtual").best_value
            run = geodock_greedy(tm, GRID, clock="virtual")
            values = [v for _, v in run.trace]
            checked += 1
            if run.best_value > optimum and not is_tie(run.best_value, optimum):
                problems.append(f"{name} M={m} exceeds optimum")
            if any(b < a for a, b in zip(values, values[1:])):
                problems.append(f"{name} M={m} trace not monotone")
            if m == 1 and run.best_value != optimum:
                problems.append(f"{name} M=1 {run.best_value!r} != {optimum!r}")
    record(6, "greedy bound", not problems, f"{checked} instances; {problems or 'all within bound'}")


def test_7_term_count_relations(ligands):
    problems = []
    chops = (0, 30, 60, 100, 200)
    checked = 0
    for m in (1, 2, 3, 4):
        for name, tm in _models(ligands, m).items():
            objective = optimization_polynomial(tm, GRID)
            hubo = build_hubo(tm, GRID, 2.0 * a_const_base(objective), objective=objective)
            counts = hubo.term_counts()
            checked += 1
            if counts["linear"] != m * GRID.d:
                problems.append(f"{name} M={m} linear {counts['linear']}")
            if hubo.degree > 2 * m:
                problems.append(f"{name} M={m} degree {hubo.degree}")
            q = quadratize(hubo)
            entries = [chop_qubo(q, t).n_entries for t in chops]
            if any(b > a for a, b in zip(entries, entries[1:])):
                problems.append(f"{name} M={m} entries {entries}")
    record(7, "term-count relations", not problems, f"{checked} instances; {problems or 'all hold'}")


def test_8_geometry_suite(ligands):
    rng = np.random.default_rng(8)
    orth = det = 0.0
    for _ in range(1000):
        p, q = rng.normal(size=3) * 5, rng.normal(size=3) * 5
        r = torsion_transform(p, q, rng.uniform(-4 * np.pi, 4 * np.pi))[:3, :3]
        orth = max(orth, np.abs(r @ r.T - np.eye(3)).max())
        det = max(det, abs(np.linalg.det(r) - 1.0))
    rigid = period = 0.0
    for mol in ligands.values():
        tm = build_torsion_model(mol)
        base = tm.molecule.coordinates
        for _ in range(20):
            theta = rng.uniform(0, 2 * np.pi, tm.n_torsions)
            moved = apply_torsions(tm, theta).coordinates
            for frag in tm.fragments:
                rows = np.asarray(frag.atoms) - 1
                before = np.linalg.norm(base[rows, None] - base[None, rows], axis=-1)
                after = np.linalg.norm(moved[rows, None] - moved[None, rows], axis=-1)
                rigid = max(rigid, np.abs(after - before).max())
            shift = theta + 2 * np.pi * rng.integers(-3, 4, tm.n_torsions)
            for f in (objective_fragment, objective_full):
                a, b = f(tm, theta), f(tm, shift)
                period = max(period, abs(a - b) / max(abs(a), 1.0))
    ok = orth <= 1e-9 and det <= 1e-9 and rigid <= 1e-6 and period <= 1e-9
    record(8, "geometry suite", ok,
           f"orthogonality {orth:.1e}, determinant {det:.1e}, rigid distances {rigid:.1e}, periodicity {period:.1e}")


def test_9_metrics_arithmetic(tmp_path, test_ligand):
    probe = SolverRun("random", 0, {}, 1.0, (0,), [0.0], 4, 10.0)
    tts_ok = tts(probe) == 2.5
    tm = build_torsion_model(test_ligand, 2)
    run = exhaustive(tm, GRID, clock="virtual")
    gain_ok = normalized_gain(run, run.best_value) == 1.0

    out = tmp_path / "bench"
    cmd = [sys.executable, "-m", "molunfold.cli", "bench", str(LIGANDS / "thienyloxy_ethyl_furan.mol2"),
           "--levels", "1,2", "--solver", "all", "--time-limit", "0.02", "--epochs", "100", "--restarts", "3",
           "--window", "0.1", "--resolution", "0.01", "--out", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)
    rebuilt = build_report(load_runs(out / "runs"), window=0.1, resolution=0.01)
    rebuild_ok = report_json(rebuilt).encode() == (out / "report" / "report.json").read_bytes()
    record(9, "metrics arithmetic", tts_ok and gain_ok and rebuild_ok,
           f"tts(10 s, 4) = {tts(probe)}, exhaustive gain = {normalized_gain(run, run.best_value)}, "
           f"report rebuilt byte-identical = {rebuild_ok}")


def test_10_determinism(tmp_path):
    ligand = str(LIGANDS / "procaine.mol2")
    outputs = []
    for attempt in ("first", "second"):
        out = tmp_path / attempt
        cmd = [sys.executable, "-m", "molunfold.cli", "solve", ligand, "--max-torsions", "3", "--solver", "random,sa",
               "--seed", "11", "--jobs", "1", "--time-limit", "0.05", "--restarts", "4", "--epochs", "200", "--repair", "true",
               "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.json"))})
    same = outputs[0] == outputs[1] and len(outputs[0]) == 2
    solvers = sorted(json.loads(b)["solver"] for b in outputs[0].values())
    record(10, "determinism", same, f"{solvers} SolverRun JSON byte-identical across two processes = {same}")

