import itertools

import numpy as np
import pytest

from molunfold.encoder import AngleGrid, build_hubo
from molunfold.geometry import objective_fragment
from molunfold.polynomial import BinaryPolynomial
from molunfold.quadratizer import quadratize
from molunfold.solvers import (
    AllRestartsInfeasible,
    SaConfig,
    SearchSpaceTooLarge,
    SolverRun,
    VirtualClock,
    anneal_qubo,
    centrality_order,
    exhaustive,
    geodock_greedy,
    is_tie,
    make_clock,
    random_search,
    simulated_annealing,
)
from molunfold.topology import build_torsion_model

GRID = AngleGrid(8)


@pytest.fixture(scope="module")
def tm2(test_ligand):
    return build_torsion_model(test_ligand, 2)


def test_exhaustive_matches_brute_force(tm2):
    run = exhaustive(tm2, GRID, clock="virtual")
    values = {idx: objective_fragment(tm2, GRID.values[list(idx)]) for idx in itertools.product(range(8), repeat=2)}
    best = max(values.values())
    assert run.best_value == pytest.approx(best, rel=1e-12)
    assert run.best_indices == min(k for k, v in values.items() if is_tie(v, best))
    assert run.occurrences == sum(is_tie(v, best) for v in values.values())
    assert run.best_angles_deg == [45.0 * k for k in run.best_indices]


def test_exhaustive_limit(ligands):
    tm = build_torsion_model(ligands["procaine"])
    with pytest.raises(SearchSpaceTooLarge):
        exhaustive(tm, AngleGrid(72))


def test_virtual_clock_is_deterministic():
    clock = VirtualClock()
    clock.charge("objective", 10)
    clock.charge("flip", 100)
    assert clock.now() == pytest.approx(10 * 2e-6 + 100 * 2e-8)
    assert make_clock("virtual").now() == 0.0
    with pytest.raises(ValueError):
        make_clock("sundial")


def test_random_search_respects_budget(tm2):
    run = random_search(tm2, GRID, 0.01, seed=3, clock="virtual")
    assert run.wall_time_s <= 0.01 + 1e-12
    assert run.config["samples"] == 5000
    assert run.best_value <= exhaustive(tm2, GRID, clock="virtual").best_value + 1e-9


def test_random_search_workers_merge(tm2):
    one = random_search(tm2, GRID, 0.005, seed=1, workers=3, clock="virtual")
    two = random_search(tm2, GRID, 0.005, seed=1, workers=3, jobs=3, clock="virtual")
    assert one.to_json() == two.to_json()
    assert one.config["samples"] == 3 * 2500


def test_random_search_max_samples(tm2):
    run = random_search(tm2, GRID, 10.0, seed=0, clock="virtual", max_samples=100)
    assert run.config["samples"] == 100


def test_geodock_order_and_monotone(test_ligand):
    tm = build_torsion_model(test_ligand)
    order = centrality_order(tm)
    sums = [tm.centrality[tm.torsions[i].near - 1] + tm.centrality[tm.torsions[i].far - 1] for i in order]
    assert sums == sorted(sums, reverse=True)
    run = geodock_greedy(tm, GRID, clock="virtual")
    values = [v for _, v in run.trace]
    assert values == sorted(values)
    assert run.trace[0][1] == pytest.approx(objective_fragment(tm, np.zeros(tm.n_torsions)))
    assert run.best_value == pytest.approx(objective_fragment(tm, GRID.values[list(run.best_indices)]))


def test_solver_run_validation_and_json(tm2):
    run = exhaustive(tm2, GRID, clock="virtual")
    assert SolverRun.from_json(run.to_json()).to_json() == run.to_json()
    with pytest.raises(ValueError):
        SolverRun("x", None, {}, 1.0, (0,), [0.0], 0, 1.0)
    with pytest.raises(ValueError):
        SolverRun("x", None, {}, 1.0, (0,), [0.0], 1, 1.0, [(0.0, 2.0), (1.0, 1.0)])


def test_schedule_is_geometric():
    q = quadratize(BinaryPolynomial({(0,): -1.0, (0, 1): 2.0}))
    cfg = SaConfig(epochs=10, t_min=0.01)
    t_max, ratio, temps = cfg.schedule(q)
    assert t_max == pytest.approx(3.0)
    assert temps[0] == pytest.approx(3.0)
    np.testing.assert_allclose(temps[1:] / temps[:-1], ratio)
    assert ratio ** 10 == pytest.approx(0.01 / 3.0)


@pytest.mark.parametrize("seed", range(5))
def test_anneal_finds_small_qubo_minimum(seed):
    rng = np.random.default_rng(seed)
    n = 10
    terms = {(i,): rng.uniform(-5, 5) for i in range(n)}
    terms.update({(i, j): rng.uniform(-5, 5) for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.4})
    q = quadratize(BinaryPolynomial(terms), n_vars=n)
    all_bits = np.array(list(itertools.product([0, 1], repeat=n)))
    best = q.evaluate_many(all_bits).min()
    restarts = anneal_qubo(q, SaConfig(epochs=200, restarts=5, seed=seed, debug=True))
    assert min(r.energy for r in restarts) == pytest.approx(best, abs=1e-9)
    for r in restarts:
        assert q.evaluate(r.bits) == pytest.approx(r.energy)


def test_sa_on_torsions(tm2):
    q = quadratize(build_hubo(tm2, GRID, 2.0 * 10.0))
    run = simulated_annealing(q, SaConfig(restarts=4, seed=1), clock="virtual")
    assert run.best_value == pytest.approx(objective_fragment(tm2, GRID.values[list(run.best_indices)]))
    assert 1 <= run.occurrences <= run.config["feasible_restarts"] <= 4


def test_sa_all_infeasible(tm2):
    # a vanishing penalty lets the objective pull several bits per torsion
    q = quadratize(build_hubo(tm2, GRID, 1e-6))
    with pytest.raises(AllRestartsInfeasible):
        simulated_annealing(q, SaConfig(restarts=3, epochs=50, seed=0), clock="virtual")
    run = simulated_annealing(q, SaConfig(restarts=3, epochs=50, seed=0, repair=True), clock="virtual")
    assert run.config["repair"] is True


def test_sa_needs_encoded_model():
    q = quadratize(BinaryPolynomial({(0,): 1.0}))
    with pytest.raises(ValueError):
        simulated_annealing(q)


def test_sa_config_validation():
    with pytest.raises(ValueError):
        SaConfig(epochs=0)
    with pytest.raises(ValueError):
        SaConfig(t_max=1e-4)
    with pytest.raises(ValueError):
        SaConfig(cooling_ratio=1.5)


def test_ties_relative():
    assert is_tie(1e6, 1e6 + 1e-4)
    assert not is_tie(1.0, 1.0 + 1e-6)
    assert is_tie(float("inf"), float("inf"))
    assert not is_tie(float("-inf"), 0.0)


@pytest.mark.parametrize("m,d", [(1, 8), (2, 8), (3, 4)])
def test_one_hot_only_reaches_zero(m, d):
    from molunfold.encoder import VariableMap, one_hot_penalty

    q = quadratize(one_hot_penalty(VariableMap(m, d)))
    hits = 0
    for seed in range(10):
        restarts = anneal_qubo(q, SaConfig(epochs=500, restarts=1, seed=seed))
        hits += restarts[0].energy == pytest.approx(0.0, abs=1e-9)
    assert hits >= 9
