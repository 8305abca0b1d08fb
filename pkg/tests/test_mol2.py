import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molunfold.mol2 import (
    Atom,
    AtomCountMismatch,
    Bond,
    BondKind,
    DanglingBondReference,
    MalformedCoordinate,
    MissingSection,
    Molecule,
    UnknownBondKind,
    parse_mol2,
    read_mol2,
    write_mol2,
)

from conftest import LIGAND_FILES

WATER = """@<TRIPOS>MOLECULE
water
3 2 0 0 0
SMALL
NO_CHARGES

@<TRIPOS>ATOM
      1 O1    0.0000  0.0000  0.0000 O.3   1 HOH  -0.8
      2 H1    0.9572  0.0000  0.0000 H     1 HOH   0.4
      3 H2   -0.2400  0.9266  0.0000 H     1 HOH   0.4
@<TRIPOS>BOND
     1     1     2 1
     2     1     3 1
@<TRIPOS>SUBSTRUCTURE
     1 HOH  1 GROUP
"""


def _record(atoms, bonds, n_atoms=None, n_bonds=None):
    n_atoms = len(atoms) if n_atoms is None else n_atoms
    n_bonds = len(bonds) if n_bonds is None else n_bonds
    lines = ["@<TRIPOS>MOLECULE", "m", f"{n_atoms} {n_bonds}", "SMALL", "", "@<TRIPOS>ATOM"]
    lines += atoms
    lines.append("@<TRIPOS>BOND")
    lines += bonds
    return "\n".join(lines) + "\n"


def test_water_record():
    m = parse_mol2(WATER)
    assert m.name == "water"
    assert [a.element for a in m.atoms] == ["O", "H", "H"]
    assert [b.kind for b in m.bonds] == [BondKind.SINGLE, BondKind.SINGLE]
    np.testing.assert_allclose(m.atom(2).position, [0.9572, 0, 0])


def test_crlf_accepted():
    assert parse_mol2(WATER.replace("\n", "\r\n")).n_atoms == 3


def test_element_from_sybyl_prefix():
    m = parse_mol2(WATER)
    assert m.atom(1).atom_type == "O.3" and m.atom(1).element == "O"


def test_dangling_bond_reference_reports_line():
    atoms = [f"{i} C{i} {i}.0 0 0 C.3" for i in range(1, 6)]
    text = _record(atoms, ["1 1 99 1"])
    with pytest.raises(DanglingBondReference) as err:
        parse_mol2(text)
    assert err.value.line == 13


@pytest.mark.parametrize("kind", ["du", "un", "nc"])
def test_unknown_bond_kind(kind):
    text = _record(["1 C 0 0 0 C.3", "2 C 1.5 0 0 C.3"], [f"1 1 2 {kind}"])
    with pytest.raises(UnknownBondKind):
        parse_mol2(text)


def test_bond_kinds_map():
    atoms = [f"{i} C{i} {1.4 * i} 0 0 C.ar" for i in range(1, 7)]
    bonds = ["1 1 2 1", "2 2 3 2", "3 3 4 3", "4 4 5 am", "5 5 6 ar"]
    kinds = [b.kind for b in parse_mol2(_record(atoms, bonds)).bonds]
    assert kinds == [BondKind.SINGLE, BondKind.DOUBLE, BondKind.TRIPLE, BondKind.AMIDE, BondKind.AROMATIC]


def test_missing_section():
    with pytest.raises(MissingSection):
        parse_mol2(WATER.split("@<TRIPOS>BOND")[0])


def test_atom_count_mismatch():
    with pytest.raises(AtomCountMismatch):
        parse_mol2(_record(["1 C 0 0 0 C.3", "2 C 1.5 0 0 C.3"], ["1 1 2 1"], n_atoms=3))


def test_bond_count_mismatch():
    with pytest.raises(AtomCountMismatch):
        parse_mol2(_record(["1 C 0 0 0 C.3", "2 C 1.5 0 0 C.3"], ["1 1 2 1"], n_bonds=2))


@pytest.mark.parametrize("coord", ["abc", "nan", "inf"])
def test_malformed_coordinate(coord):
    with pytest.raises(MalformedCoordinate) as err:
        parse_mol2(_record(["1 C 0 0 0 C.3", f"2 C 1.5 {coord} 0 C.3"], ["1 1 2 1"]))
    assert err.value.line == 8


def test_bundled_test_ligand_counts(test_ligand):
    assert (test_ligand.n_atoms, len(test_ligand.bonds)) == (23, 24)


@pytest.mark.parametrize("path", LIGAND_FILES, ids=lambda p: p.stem)
def test_fixture_counts_match_records(path):
    text = path.read_text()
    header = text.split("@<TRIPOS>MOLECULE")[1].strip().splitlines()[1].split()
    atom_lines = [l for l in text.split("@<TRIPOS>ATOM")[1].split("@<TRIPOS>")[0].splitlines() if l.strip()]
    bond_lines = [l for l in text.split("@<TRIPOS>BOND")[1].split("@<TRIPOS>")[0].splitlines() if l.strip()]
    m = read_mol2(path)
    assert m.n_atoms == int(header[0]) == len(atom_lines)
    assert len(m.bonds) == int(header[1]) == len(bond_lines)
    # ids follow file order
    assert [a.id for a in m.atoms] == [int(l.split()[0]) for l in atom_lines]


@pytest.mark.parametrize("path", LIGAND_FILES, ids=lambda p: p.stem)
def test_roundtrip_fixtures(path):
    first = read_mol2(path)
    second = parse_mol2(write_mol2(first))
    assert [a.element for a in first.atoms] == [a.element for a in second.atoms]
    assert [(b.a, b.b, b.kind) for b in first.bonds] == [(b.a, b.b, b.kind) for b in second.bonds]
    np.testing.assert_allclose(first.coordinates, second.coordinates, atol=5e-5)
    third = parse_mol2(write_mol2(second))
    assert third == second


def test_rounding_to_four_decimals():
    m = Molecule("r", (Atom(1, "C", np.array([1.23456, -0.00001, 2.0])), Atom(2, "C", np.array([0.0, 0.0, 0.0]))))
    text = write_mol2(m)
    assert "1.2346" in text and "-0.0000" not in text
    assert parse_mol2(text).atom(1).position[0] == 1.2346


def test_two_atoms_without_bonds():
    m = Molecule("pair", (Atom(1, "C", np.zeros(3)), Atom(2, "C", np.ones(3))))
    text = write_mol2(m)
    assert "@<TRIPOS>BOND" in text
    back = parse_mol2(text)
    assert back.n_atoms == 2 and back.bonds == ()


def test_molecule_invariants():
    atoms = (Atom(1, "C", np.zeros(3)), Atom(2, "C", np.ones(3)))
    with pytest.raises(ValueError):
        Molecule("x", atoms, (Bond(1, 1),))
    with pytest.raises(ValueError):
        Molecule("x", atoms, (Bond(1, 2), Bond(2, 1)))
    with pytest.raises(ValueError):
        Molecule("x", atoms, (Bond(1, 3),))


coords = st.floats(min_value=-999, max_value=999, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(coords, coords, coords), min_size=2, max_size=8))
def test_roundtrip_property(points):
    atoms = tuple(Atom(i + 1, "C", np.array(p)) for i, p in enumerate(points))
    bonds = tuple(Bond(i, i + 1) for i in range(1, len(points)))
    m = Molecule("prop", atoms, bonds)
    once = parse_mol2(write_mol2(m))
    np.testing.assert_allclose(once.coordinates, np.round(m.coordinates, 4), atol=1e-9)
    assert parse_mol2(write_mol2(once)) == once
