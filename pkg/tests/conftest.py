from pathlib import Path

import pytest

from molunfold.mol2 import read_mol2

LIGANDS = Path(__file__).resolve().parents[1] / "src" / "molunfold" / "data" / "ligands"
LIGAND_FILES = sorted(LIGANDS.glob("*.mol2"))

# acceptance results collected by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def ligands():
    return {p.stem: read_mol2(p) for p in LIGAND_FILES}


@pytest.fixture(scope="session")
def test_ligand(ligands):
    return ligands["thienyloxy_ethyl_furan"]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
