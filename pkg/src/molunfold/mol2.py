"""TRIPOS MOL2 reading and writing.

Only the ``MOLECULE``, ``ATOM`` and ``BOND`` record sections are read; every
other section is skipped. Coordinates are in angstroms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Atom",
    "Bond",
    "BondKind",
    "Molecule",
    "Mol2Error",
    "MissingSection",
    "AtomCountMismatch",
    "DanglingBondReference",
    "UnknownBondKind",
    "MalformedCoordinate",
    "parse_mol2",
    "write_mol2",
    "read_mol2",
]


class Mol2Error(ValueError):
    """Base class for MOL2 parse failures; ``line`` is 1-based (0 if unknown)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class MissingSection(Mol2Error):
    pass


class AtomCountMismatch(Mol2Error):
    pass


class DanglingBondReference(Mol2Error):
    pass


class UnknownBondKind(Mol2Error):
    pass


class MalformedCoordinate(Mol2Error):
    pass


class BondKind(enum.Enum):
    SINGLE = "1"
    DOUBLE = "2"
    TRIPLE = "3"
    AMIDE = "am"
    AROMATIC = "ar"


@dataclass(frozen=True)
class Atom:
    id: int
    element: str
    position: np.ndarray
    name: str = ""
    atom_type: str = ""

    def __eq__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return (
            self.id == other.id
            and self.element == other.element
            and self.name == other.name
            and self.atom_type == other.atom_type
            and np.array_equal(self.position, other.position)
        )

    __hash__ = None


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    kind: BondKind = BondKind.SINGLE

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass(frozen=True)
class Molecule:
    name: str
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = field(default_factory=tuple)
    # ids of these atoms in the molecule this one was derived from; empty means identity
    original_ids: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))
        object.__setattr__(self, "original_ids", tuple(self.original_ids))
        if self.original_ids and len(self.original_ids) != len(self.atoms):
            raise ValueError("original_ids must map every atom")
        ids = [a.id for a in self.atoms]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("atom ids must be contiguous from 1 in file order")
        seen = set()
        for bond in self.bonds:
            if bond.a == bond.b:
                raise ValueError(f"self bond on atom {bond.a}")
            if not (1 <= bond.a <= len(ids) and 1 <= bond.b <= len(ids)):
                raise ValueError(f"bond {bond.a}-{bond.b} references a missing atom")
            if bond.key in seen:
                raise ValueError(f"duplicate bond {bond.a}-{bond.b}")
            seen.add(bond.key)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def coordinates(self) -> np.ndarray:
        """(n_atoms, 3) array of positions, row ``i`` is atom ``i + 1``."""
        if not self.atoms:
            return np.zeros((0, 3))
        return np.array([a.position for a in self.atoms], dtype=float)

    def atom(self, atom_id: int) -> Atom:
        return self.atoms[atom_id - 1]

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {a.id: [] for a in self.atoms}
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        for nbrs in adj.values():
            nbrs.sort()
        return adj

    def with_coordinates(self, coords: np.ndarray) -> "Molecule":
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.n_atoms, 3):
            raise ValueError(f"expected ({self.n_atoms}, 3) coordinates, got {coords.shape}")
        atoms = tuple(replace(a, position=coords[i].copy()) for i, a in enumerate(self.atoms))
        return Molecule(self.name, atoms, self.bonds, self.original_ids)


def _sections(lines: list[str]) -> dict[str, list[tuple[int, str]]]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line.startswith("@<TRIPOS>"):
            current = line[len("@<TRIPOS>"):].strip().upper()
            if current == "MOLECULE" and current in sections:
                # multi-molecule archives are not supported: keep the first record
                current = None
                break
            sections.setdefault(current, [])
            continue
        if current is None or not line or line.startswith("#"):
            continue
        sections[current].append((lineno, line))
    return sections


def parse_mol2(text: str) -> Molecule:
    """Parse a single-molecule MOL2 record.

    Raises a :class:`Mol2Error` subclass carrying the offending line number.
    """
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    # the MOLECULE header lines may be blank (comment line), so read it positionally
    header_at = next((i for i, line in enumerate(lines) if line.strip().upper() == "@<TRIPOS>MOLECULE"), None)
    sections = _sections(lines)
    for required in ("MOLECULE", "ATOM", "BOND"):
        if required not in sections:
            raise MissingSection(f"missing @<TRIPOS>{required} section")

    name = lines[header_at + 1].strip() if header_at + 1 < len(lines) else ""
    counts_line = header_at + 3
    try:
        counts = lines[header_at + 2].split()
        n_atoms = int(counts[0])
        n_bonds = int(counts[1]) if len(counts) > 1 else 0
    except (IndexError, ValueError):
        raise AtomCountMismatch("MOLECULE record has no atom/bond counts", counts_line) from None

    atoms: list[Atom] = []
    for lineno, line in sections["ATOM"]:
        fields = line.split()
        if len(fields) < 6:
            raise MalformedCoordinate(f"ATOM record needs at least 6 fields, got {len(fields)}", lineno)
        try:
            atom_id = int(fields[0])
        except ValueError:
            raise MalformedCoordinate(f"bad atom id {fields[0]!r}", lineno) from None
        if atom_id != len(atoms) + 1:
            raise AtomCountMismatch(f"atom id {atom_id} out of sequence (expected {len(atoms) + 1})", lineno)
        try:
            xyz = np.array([float(v) for v in fields[2:5]])
        except ValueError:
            raise MalformedCoordinate(f"non-numeric coordinate in {fields[2:5]}", lineno) from None
        if not np.all(np.isfinite(xyz)):
            raise MalformedCoordinate("coordinate is not finite", lineno)
        atom_type = fields[5]
        element = atom_type.split(".")[0]
        atoms.append(Atom(id=atom_id, element=element, position=xyz, name=fields[1], atom_type=atom_type))
    if len(atoms) != n_atoms:
        raise AtomCountMismatch(f"header declares {n_atoms} atoms, found {len(atoms)}", counts_line)

    bonds: list[Bond] = []
    seen: set[tuple[int, int]] = set()
    for lineno, line in sections["BOND"]:
        fields = line.split()
        if len(fields) < 4:
            raise DanglingBondReference(f"BOND record needs 4 fields, got {len(fields)}", lineno)
        try:
            a, b = int(fields[1]), int(fields[2])
        except ValueError:
            raise DanglingBondReference(f"bad bond endpoints {fields[1:3]}", lineno) from None
        for end in (a, b):
            if not 1 <= end <= n_atoms:
                raise DanglingBondReference(f"bond references atom {end} of {n_atoms}", lineno)
        if a == b:
            raise DanglingBondReference(f"bond joins atom {a} to itself", lineno)
        try:
            kind = BondKind(fields[3].lower())
        except ValueError:
            raise UnknownBondKind(f"unsupported bond type {fields[3]!r}", lineno) from None
        bond = Bond(a, b, kind)
        if bond.key in seen:
            raise DanglingBondReference(f"duplicate bond {a}-{b}", lineno)
        seen.add(bond.key)
        bonds.append(bond)
    if len(bonds) != n_bonds:
        raise AtomCountMismatch(f"header declares {n_bonds} bonds, found {len(bonds)}", counts_line)

    return Molecule(name=name, atoms=tuple(atoms), bonds=tuple(bonds))


def read_mol2(path) -> Molecule:
    return parse_mol2(Path(path).read_text())


def _fmt(value: float) -> str:
    out = f"{value:.4f}"
    # avoid writing "-0.0000"
    return "0.0000" if out == "-0.0000" else out


def write_mol2(m: Molecule) -> str:
    """Serialize ``m``; coordinates are rounded to 4 decimals."""
    lines = [
        "@<TRIPOS>MOLECULE",
        m.name or "molecule",
        f"{m.n_atoms} {len(m.bonds)} 0 0 0",
        "SMALL",
        "NO_CHARGES",
        "",
        "@<TRIPOS>ATOM",
    ]
    for atom in m.atoms:
        x, y, z = (_fmt(float(v)) for v in atom.position)
        atom_type = atom.atom_type or atom.element
        name = atom.name or f"{atom.element}{atom.id}"
        lines.append(f"{atom.id:7d} {name:<8s} {x:>10s} {y:>10s} {z:>10s} {atom_type}")
    lines.append("@<TRIPOS>BOND")
    for k, bond in enumerate(m.bonds, start=1):
        lines.append(f"{k:6d} {bond.a:5d} {bond.b:5d} {bond.kind.value}")
    return "\n".join(lines) + "\n"
