import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molunfold.geometry import (
    DegenerateAxis,
    apply_torsions,
    compose,
    objective_fragment,
    objective_fragment_batch,
    objective_full,
    torsion_transform,
    unfold_source,
)
from molunfold.topology import build_torsion_model

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)
angle = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(vec, vec, angle)
def test_rotation_is_proper(p, q, theta):
    if np.linalg.norm(q - p) < 1e-3:
        return
    t = torsion_transform(p, q, theta)
    r = t[:3, :3]
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
    # points on the axis stay put
    for s in (0.0, 0.3, 1.0):
        point = np.append(p + s * (q - p), 1.0)
        np.testing.assert_allclose(t @ point, point, atol=1e-9)


def test_right_handed_quarter_turn():
    t = torsion_transform([0, 0, 0], [0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(t @ [1, 0, 0, 1], [0, 1, 0, 1], atol=1e-12)


def test_degenerate_axis():
    with pytest.raises(DegenerateAxis):
        torsion_transform([1, 1, 1], [1, 1, 1], 0.3)


def test_compose_order():
    a = torsion_transform([0, 0, 0], [0, 0, 1], 0.4)
    b = torsion_transform([1, 0, 0], [1, 1, 0], 1.1)
    np.testing.assert_allclose(compose([a, b]), a @ b)
    with pytest.raises(ValueError):
        compose([])


def test_fragments_move_rigidly(ligands):
    rng = np.random.default_rng(0)
    for m in ligands.values():
        tm = build_torsion_model(m)
        base = tm.molecule.coordinates
        for _ in range(5):
            moved = apply_torsions(tm, rng.uniform(0, 2 * np.pi, tm.n_torsions)).coordinates
            for frag in tm.fragments:
                rows = np.asarray(frag.atoms) - 1
                before = np.linalg.norm(base[rows, None] - base[None, rows], axis=-1)
                after = np.linalg.norm(moved[rows, None] - moved[None, rows], axis=-1)
                np.testing.assert_allclose(after, before, atol=1e-6)


def test_bond_lengths_kept(ligands):
    rng = np.random.default_rng(1)
    for m in ligands.values():
        tm = build_torsion_model(m)
        moved = unfold_source(tm, rng.uniform(0, 2 * np.pi, tm.n_torsions))
        for b in m.bonds:
            before = np.linalg.norm(m.atom(b.a).position - m.atom(b.b).position)
            after = np.linalg.norm(moved.atom(b.a).position - moved.atom(b.b).position)
            assert after == pytest.approx(before, abs=1e-6)


def test_periodicity(ligands):
    rng = np.random.default_rng(2)
    for m in ligands.values():
        tm = build_torsion_model(m)
        theta = rng.uniform(0, 2 * np.pi, tm.n_torsions)
        for i in range(tm.n_torsions):
            shifted = theta.copy()
            shifted[i] += 2 * np.pi
            assert objective_fragment(tm, shifted) == pytest.approx(objective_fragment(tm, theta), rel=1e-9)
            assert objective_full(tm, shifted) == pytest.approx(objective_full(tm, theta), rel=1e-9)


def test_zero_angles_keep_input(test_ligand):
    tm = build_torsion_model(test_ligand)
    np.testing.assert_allclose(unfold_source(tm, np.zeros(tm.n_torsions)).coordinates, test_ligand.coordinates)


def test_batch_matches_single(test_ligand):
    tm = build_torsion_model(test_ligand, 3)
    rng = np.random.default_rng(3)
    angles = rng.uniform(0, 2 * np.pi, (20, 3))
    expected = [objective_fragment(tm, a) for a in angles]
    np.testing.assert_allclose(objective_fragment_batch(tm, angles), expected, rtol=1e-12)


def test_fragment_objective_brute_force(test_ligand):
    tm = build_torsion_model(test_ligand, 2)
    theta = np.array([0.7, 2.1])
    coords = apply_torsions(tm, theta).coordinates
    total = 0.0
    for fi, fj in itertools.combinations(tm.fragments, 2):
        a, b = fi.representative_atom, fj.representative_atom
        crossed = set(fi.influence_set) ^ set(fj.influence_set)
        if crossed and tm.distances[a - 1, b - 1] >= 3:
            total += float(np.sum((coords[a - 1] - coords[b - 1]) ** 2))
    assert objective_fragment(tm, theta) == pytest.approx(total, rel=1e-12)


def test_wrong_angle_count(test_ligand):
    tm = build_torsion_model(test_ligand, 2)
    with pytest.raises(ValueError):
        objective_fragment(tm, [0.0])
    with pytest.raises(ValueError):
        objective_fragment(tm, [0.0, np.nan])
