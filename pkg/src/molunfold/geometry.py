"""Rigid torsion rotations and the unfolding objective.

Each torsion rotates everything on its far side (away from the center atom)
about the bond axis, near endpoint to far endpoint, right-handed for positive
angles. A fragment's placement composes the transforms of its influence set
center-outward, all expressed in the original coordinates.
"""

from __future__ import annotations

import numpy as np

from .mol2 import Molecule
from .topology import TorsionModel

__all__ = [
    "DegenerateAxis",
    "torsion_transform",
    "compose",
    "check_angles",
    "fragment_transforms",
    "apply_torsions",
    "unfold_source",
    "objective_full",
    "objective_fragment",
    "objective_fragment_batch",
]


class DegenerateAxis(ValueError):
    pass


def _skew(u: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])


def torsion_transform(axis_from, axis_to, theta: float) -> np.ndarray:
    """4x4 homogeneous rotation by ``theta`` about the line ``axis_from -> axis_to``."""
    p = np.asarray(axis_from, dtype=float)
    axis = np.asarray(axis_to, dtype=float) - p
    norm = np.linalg.norm(axis)
    if norm <= 1e-9:
        raise DegenerateAxis("rotation axis endpoints coincide")
    u = axis / norm
    c, s = np.cos(theta), np.sin(theta)
    rot = c * np.eye(3) + s * _skew(u) + (1.0 - c) * np.outer(u, u)
    out = np.eye(4)
    out[:3, :3] = rot
    out[:3, 3] = p - rot @ p
    return out


def compose(transforms) -> np.ndarray:
    """Left-to-right product; the first transform is the outermost factor."""
    transforms = list(transforms)
    if not transforms:
        raise ValueError("compose needs at least one transform")
    out = transforms[0]
    for t in transforms[1:]:
        out = out @ t
    return out


def check_angles(tm: TorsionModel, angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (tm.n_torsions,):
        raise ValueError(f"expected {tm.n_torsions} torsion angles, got shape {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise ValueError("torsion angles must be finite")
    return angles


def _axes(tm: TorsionModel) -> tuple[np.ndarray, np.ndarray]:
    coords = tm.molecule.coordinates
    near = np.array([coords[t.near - 1] for t in tm.torsions])
    far = np.array([coords[t.far - 1] for t in tm.torsions])
    return near, far


def fragment_transforms(tm: TorsionModel, angles) -> list[np.ndarray]:
    angles = check_angles(tm, angles)
    near, far = _axes(tm)
    single = [torsion_transform(near[i], far[i], angles[i]) for i in range(tm.n_torsions)]
    return [compose([single[i] for i in f.influence_set]) if f.influence_set else np.eye(4) for f in tm.fragments]


def _moved_coordinates(tm: TorsionModel, angles) -> np.ndarray:
    coords = tm.molecule.coordinates
    homo = np.hstack([coords, np.ones((len(coords), 1))])
    out = coords.copy()
    for frag, transform in zip(tm.fragments, fragment_transforms(tm, angles)):
        rows = np.asarray(frag.atoms) - 1
        out[rows] = (homo[rows] @ transform.T)[:, :3]
    return out


def apply_torsions(tm: TorsionModel, angles) -> Molecule:
    """The pruned molecule with every fragment moved by its torsions."""
    return tm.molecule.with_coordinates(_moved_coordinates(tm, angles))


def unfold_source(tm: TorsionModel, angles) -> Molecule:
    """The unpruned input molecule, terminal hydrogens riding on their heavy atom."""
    source = tm.source if tm.source is not None else tm.molecule
    pruned = tm.molecule
    kept = {orig: new for new, orig in enumerate(pruned.original_ids or range(1, pruned.n_atoms + 1), start=1)}
    adj = source.adjacency()
    frag_of_source = []
    for atom in source.atoms:
        anchor = kept.get(atom.id)
        if anchor is None:
            anchor = kept[adj[atom.id][0]]
        frag_of_source.append(tm.atom_fragment[anchor - 1])
    transforms = fragment_transforms(tm, angles)
    coords = source.coordinates
    homo = np.hstack([coords, np.ones((len(coords), 1))])
    moved = np.array([(transforms[f] @ homo[i])[:3] for i, f in enumerate(frag_of_source)])
    return source.with_coordinates(moved)


def objective_full(tm: TorsionModel, angles) -> float:
    """Sum of squared distances over every eligible atom pair, in square angstroms."""
    coords = _moved_coordinates(tm, angles)
    pairs = tm.eligible_atom_pairs
    if len(pairs) == 0:
        return 0.0
    diff = coords[pairs[:, 0] - 1] - coords[pairs[:, 1] - 1]
    return float(np.sum(diff * diff))


def objective_fragment(tm: TorsionModel, angles) -> float:
    """Sum of squared distances between representatives of eligible fragment pairs."""
    pairs = tm.eligible_fragment_pairs
    if not pairs:
        return 0.0
    coords = _moved_coordinates(tm, angles)
    reps = np.array([coords[f.representative_atom - 1] for f in tm.fragments])
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    diff = reps[i] - reps[j]
    return float(np.sum(diff * diff))


def _batch_rotations(near: np.ndarray, far: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """(batch, 4, 4) transforms for one torsion over a vector of angles."""
    u = (far - near) / np.linalg.norm(far - near)
    c = np.cos(theta)[:, None, None]
    s = np.sin(theta)[:, None, None]
    rot = c * np.eye(3) + s * _skew(u) + (1.0 - c) * np.outer(u, u)
    out = np.zeros((len(theta), 4, 4))
    out[:, :3, :3] = rot
    out[:, :3, 3] = near - rot @ near
    out[:, 3, 3] = 1.0
    return out


def objective_fragment_batch(tm: TorsionModel, angles: np.ndarray) -> np.ndarray:
    """:func:`objective_fragment` for every row of an ``(n, M)`` angle array."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    if angles.shape[1] != tm.n_torsions:
        raise ValueError(f"expected {tm.n_torsions} columns, got {angles.shape[1]}")
    pairs = tm.eligible_fragment_pairs
    if not pairs:
        return np.zeros(len(angles))
    near, far = _axes(tm)
    single = [_batch_rotations(near[i], far[i], angles[:, i]) for i in range(tm.n_torsions)]
    coords = tm.molecule.coordinates
    reps = []
    for frag in tm.fragments:
        point = np.append(coords[frag.representative_atom - 1], 1.0)
        p = np.broadcast_to(point, (len(angles), 4))
        # rightmost factor acts first: apply the outermost torsion first
        for i in reversed(frag.influence_set):
            p = np.einsum("nij,nj->ni", single[i], p)
        reps.append(p[:, :3])
    reps = np.stack(reps, axis=1)
    i = np.array([p[0] for p in pairs])
    j = np.array([p[1] for p in pairs])
    diff = reps[:, i] - reps[:, j]
    return np.einsum("npc,npc->n", diff, diff)
