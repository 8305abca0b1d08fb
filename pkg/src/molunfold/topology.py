"""Torsional structure of a ligand graph.

Terminal hydrogens are pruned, rotatable bonds are the single/aromatic
bridges whose removal leaves at least two atoms on either side, and the atom
of highest betweenness centrality anchors the torsion ordering. Atoms are
grouped into rigid fragments by their rotatable influence set: the rotatable
bonds crossed by the shortest path from the center atom.

Torsion indices are 0-based positions in ``TorsionModel.torsions``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mol2 import Atom, Bond, BondKind, Molecule

__all__ = [
    "TopologyError",
    "EmptyAfterPruning",
    "DisconnectedGraph",
    "NoRotatableBonds",
    "Torsion",
    "Fragment",
    "TorsionModel",
    "Excluded",
    "prune_terminal_hydrogens",
    "find_rotatable_bonds",
    "betweenness_centrality",
    "build_torsion_model",
    "pair_eligibility",
    "graph_distances",
]

ROTATABLE_KINDS = frozenset({BondKind.SINGLE, BondKind.AROMATIC})


class TopologyError(ValueError):
    pass


class EmptyAfterPruning(TopologyError):
    pass


class DisconnectedGraph(TopologyError):
    pass


class NoRotatableBonds(TopologyError):
    pass


def prune_terminal_hydrogens(m: Molecule) -> Molecule:
    """Drop every hydrogen of degree 1 together with its bond.

    Survivors are renumbered from 1 in their original order; ``original_ids``
    records where each came from.
    """
    adj = m.adjacency()
    keep = [a for a in m.atoms if not (a.element == "H" and len(adj[a.id]) == 1)]
    if len(keep) < 2:
        raise EmptyAfterPruning(f"{m.name!r}: {len(keep)} atom(s) left after removing terminal hydrogens")
    new_id = {a.id: i for i, a in enumerate(keep, start=1)}
    atoms = tuple(
        Atom(id=new_id[a.id], element=a.element, position=a.position.copy(), name=a.name, atom_type=a.atom_type)
        for a in keep
    )
    bonds = tuple(
        Bond(new_id[b.a], new_id[b.b], b.kind) for b in m.bonds if b.a in new_id and b.b in new_id
    )
    source = m.original_ids or tuple(range(1, m.n_atoms + 1))
    return Molecule(m.name, atoms, bonds, tuple(source[a.id - 1] for a in keep))


def _bfs(adj: dict[int, list[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def graph_distances(m: Molecule) -> np.ndarray:
    """All-pairs hop counts; entry ``[i, j]`` is for atom ids ``i + 1``, ``j + 1``."""
    adj = m.adjacency()
    out = np.full((m.n_atoms, m.n_atoms), -1, dtype=int)
    for s in adj:
        for t, d in _bfs(adj, s).items():
            out[s - 1, t - 1] = d
    return out


def _bridges(m: Molecule) -> set[tuple[int, int]]:
    """Bridge edges as sorted id pairs (iterative Tarjan low-link)."""
    adj = m.adjacency()
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    found: set[tuple[int, int]] = set()
    counter = 0
    for root in adj:
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, 0, iter(adj[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if v in disc:
                    low[u] = min(low[u], disc[v])
                else:
                    disc[v] = low[v] = counter
                    counter += 1
                    stack.append((v, u, iter(adj[v])))
                    advanced = True
                    break
            if advanced:
                continue
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] > disc[p]:
                    found.add((min(p, u), max(p, u)))
    return found


def _side_size(adj: dict[int, list[int]], start: int, blocked: int) -> int:
    seen = {start, blocked}
    queue = deque([start])
    count = 0
    while queue:
        u = queue.popleft()
        count += 1
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return count


def find_rotatable_bonds(m: Molecule) -> list[Bond]:
    """Single or aromatic bridges leaving two atoms or more on each side."""
    adj = m.adjacency()
    bridges = _bridges(m)
    out = []
    for bond in m.bonds:
        if bond.kind not in ROTATABLE_KINDS or bond.key not in bridges:
            continue
        if _side_size(adj, bond.a, bond.b) >= 2 and _side_size(adj, bond.b, bond.a) >= 2:
            out.append(bond)
    return out


def betweenness_centrality(m: Molecule) -> dict[int, float]:
    """Unnormalized betweenness over unordered pairs, unweighted (Brandes)."""
    adj = m.adjacency()
    if not adj:
        return {}
    if len(_bfs(adj, next(iter(adj)))) != len(adj):
        raise DisconnectedGraph(f"{m.name!r} is not connected")
    score = {v: 0.0 for v in adj}
    for s in adj:
        order = []
        preds: dict[int, list[int]] = {v: [] for v in adj}
        sigma = dict.fromkeys(adj, 0.0)
        dist = dict.fromkeys(adj, -1)
        sigma[s], dist[s] = 1.0, 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = dict.fromkeys(adj, 0.0)
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                score[w] += delta[w]
    # every unordered pair was counted from both endpoints
    return {v: c / 2.0 for v, c in score.items()}


@dataclass(frozen=True)
class Torsion:
    """A rotatable bond oriented from the endpoint nearer the center outward."""

    index: int
    bond: Bond
    near: int
    far: int

    @property
    def key(self) -> tuple[int, int]:
        return self.bond.key


@dataclass(frozen=True)
class Fragment:
    index: int
    atoms: tuple[int, ...]
    influence_set: tuple[int, ...]
    representative_atom: int


@dataclass(frozen=True)
class Excluded:
    """A fragment or atom pair left out of the objective and the rule it fails."""

    condition: int
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True, eq=False)
class TorsionModel:
    molecule: Molecule
    center_atom: int
    torsions: tuple[Torsion, ...]
    fragments: tuple[Fragment, ...]
    influence: tuple[tuple[int, ...], ...]  # per atom (row = id - 1)
    centrality: tuple[float, ...]
    distances: np.ndarray
    source: Molecule | None = None
    n_rotatable_total: int = 0

    @property
    def n_torsions(self) -> int:
        return len(self.torsions)

    @property
    def n_fragments(self) -> int:
        return len(self.fragments)

    @cached_property
    def atom_fragment(self) -> np.ndarray:
        """Fragment index of every atom, indexed by ``id - 1``."""
        out = np.empty(self.molecule.n_atoms, dtype=int)
        for frag in self.fragments:
            out[np.asarray(frag.atoms) - 1] = frag.index
        return out

    def path_torsions(self, a: int, b: int) -> tuple[int, ...]:
        """Torsions crossed walking the shortest path from atom ``a`` to atom ``b``."""
        ia, ib = self.influence[a - 1], self.influence[b - 1]
        common = 0
        while common < min(len(ia), len(ib)) and ia[common] == ib[common]:
            common += 1
        return tuple(reversed(ia[common:])) + ib[common:]

    def atom_pair_eligibility(self, a: int, b: int) -> tuple[int, ...] | Excluded:
        torsions = self.path_torsions(a, b)
        if not torsions:
            return Excluded(1, "no rotatable bond on the shortest path")
        if self.distances[a - 1, b - 1] < 3:
            return Excluded(2, "shortest path has fewer than three edges")
        return torsions

    @cached_property
    def eligible_fragment_pairs(self) -> tuple[tuple[int, int, tuple[int, ...]], ...]:
        """``(i, j, torsions)`` for every eligible fragment pair, ``i < j``."""
        out = []
        for i, fi in enumerate(self.fragments):
            for fj in self.fragments[i + 1:]:
                torsions = pair_eligibility(self, fi, fj)
                if torsions:
                    out.append((fi.index, fj.index, torsions))
        return tuple(out)

    @cached_property
    def eligible_atom_pairs(self) -> np.ndarray:
        """(n_pairs, 2) array of 1-based atom ids, ``a < b``."""
        n = self.molecule.n_atoms
        pairs = [
            (a, b)
            for a in range(1, n + 1)
            for b in range(a + 1, n + 1)
            if self.atom_pair_eligibility(a, b)
        ]
        return np.array(pairs, dtype=int).reshape(-1, 2)

    def to_dict(self) -> dict:
        m = self.molecule
        return {
            "name": m.name,
            "atoms": [
                {
                    "id": a.id,
                    "original_id": m.original_ids[a.id - 1] if m.original_ids else a.id,
                    "element": a.element,
                    "position": [float(v) for v in a.position],
                    "centrality": self.centrality[a.id - 1],
                    "fragment": int(self.atom_fragment[a.id - 1]),
                    "influence_set": list(self.influence[a.id - 1]),
                }
                for a in m.atoms
            ],
            "bonds": [{"a": b.a, "b": b.b, "kind": b.kind.value} for b in m.bonds],
            "center_atom": self.center_atom,
            "rotatable_total": self.n_rotatable_total,
            "torsions": [
                {"index": t.index, "near": t.near, "far": t.far, "kind": t.bond.kind.value} for t in self.torsions
            ],
            "fragments": [
                {
                    "index": f.index,
                    "atoms": list(f.atoms),
                    "influence_set": list(f.influence_set),
                    "representative_atom": f.representative_atom,
                }
                for f in self.fragments
            ],
            "eligible_fragment_pairs": [
                {"fragments": [i, j], "torsions": list(t)} for i, j, t in self.eligible_fragment_pairs
            ],
        }


def _lexicographic_paths(adj: dict[int, list[int]], source: int) -> dict[int, tuple[int, ...]]:
    """Shortest path from ``source`` to every atom, ties broken by smallest id sequence."""
    paths = {source: (source,)}
    layer = [source]
    while layer:
        candidates: dict[int, int] = {}
        rank = {u: i for i, u in enumerate(layer)}
        # layer is sorted by path order, so the first predecessor seen is the best one
        for u in layer:
            for v in adj[u]:
                if v not in paths and v not in candidates:
                    candidates[v] = u
        nxt = sorted(candidates, key=lambda v: (rank[candidates[v]], v))
        for v in nxt:
            paths[v] = paths[candidates[v]] + (v,)
        layer = nxt
    return paths


def build_torsion_model(m: Molecule, max_torsions: int | None = None, *, prune: bool = True) -> TorsionModel:
    """Derive the torsion model of ``m``.

    With ``max_torsions`` only the first M rotatable bonds in model order stay
    free; the others are treated as rigid.
    """
    source = m
    pruned = prune_terminal_hydrogens(m) if prune else m
    adj = pruned.adjacency()
    centrality = betweenness_centrality(pruned)
    ids = sorted(centrality)
    best = max(centrality.values())
    center = min(v for v in ids if centrality[v] >= best - 1e-9)

    rotatable = find_rotatable_bonds(pruned)
    if not rotatable:
        raise NoRotatableBonds(f"{pruned.name!r} has no rotatable bonds")
    dist_center = _bfs(adj, center)

    def order_key(bond: Bond):
        return (min(dist_center[bond.a], dist_center[bond.b]), bond.key)

    rotatable.sort(key=order_key)
    n_total = len(rotatable)
    if max_torsions is not None:
        if max_torsions < 1:
            raise ValueError("max_torsions must be at least 1")
        rotatable = rotatable[:max_torsions]
    torsions = []
    for i, bond in enumerate(rotatable):
        near, far = (bond.a, bond.b) if dist_center[bond.a] < dist_center[bond.b] else (bond.b, bond.a)
        torsions.append(Torsion(i, bond, near, far))
    by_key = {t.key: t.index for t in torsions}

    paths = _lexicographic_paths(adj, center)
    influence = []
    for atom_id in range(1, pruned.n_atoms + 1):
        path = paths[atom_id]
        crossed = tuple(
            by_key[key] for key in ((min(u, v), max(u, v)) for u, v in zip(path, path[1:])) if key in by_key
        )
        influence.append(crossed)

    distances = graph_distances(pruned)
    groups: dict[tuple[int, ...], list[int]] = {}
    for atom_id, inf in enumerate(influence, start=1):
        groups.setdefault(inf, []).append(atom_id)
    fragments = []
    for index, inf in enumerate(sorted(groups, key=lambda s: (len(s), s))):
        members = tuple(groups[inf])
        sub = distances[np.ix_(np.asarray(members) - 1, np.asarray(members) - 1)]
        totals = sub.sum(axis=1)
        representative = members[int(np.argmin(totals))]
        fragments.append(Fragment(index, members, inf, representative))

    return TorsionModel(
        molecule=pruned,
        center_atom=center,
        torsions=tuple(torsions),
        fragments=tuple(fragments),
        influence=tuple(influence),
        centrality=tuple(centrality[v] for v in ids),
        distances=distances,
        source=source,
        n_rotatable_total=n_total,
    )


def pair_eligibility(tm: TorsionModel, f1: Fragment, f2: Fragment) -> tuple[int, ...] | Excluded:
    """Torsions between two fragments' representative atoms, or why the pair is skipped.

    A pair contributes only when the path joining the representatives crosses
    a rotatable bond and has at least three edges.
    """
    if f1.index == f2.index or f1.influence_set == f2.influence_set:
        return Excluded(1, "same fragment: relative position never changes")
    return tm.atom_pair_eligibility(f1.representative_atom, f2.representative_atom)
