"""Generate the bundled test ligands from idealized internal coordinates.

The ligands are built atom by atom with the NeRF construction (bond length,
bond angle, dihedral relative to three placed atoms), rings are closed as
regular polygons and hydrogens are added from local geometry. Chain dihedrals
are set to gauche values so the stored conformations are folded.

Run from the repository root:

    python tools/build_fixtures.py
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "molunfold" / "data" / "ligands"

TETRA = 109.47


def place(c, b, a, bond, angle, torsion):
    """Position of D bonded to c with angle D-c-b and dihedral D-c-b-a (degrees)."""
    angle, torsion = np.radians(angle), np.radians(torsion)
    bc = c - b
    bc /= np.linalg.norm(bc)
    n = np.cross(b - a, bc)
    n /= np.linalg.norm(n)
    m = np.cross(n, bc)
    d = np.array(
        [-bond * np.cos(angle), bond * np.sin(angle) * np.cos(torsion), bond * np.sin(angle) * np.sin(torsion)]
    )
    return c + d[0] * bc + d[1] * m + d[2] * n


def unit(v):
    return v / np.linalg.norm(v)


class Builder:
    def __init__(self, name):
        self.name = name
        self.atoms = []  # (name, sybyl, xyz)
        self.bonds = []  # (i, j, kind), 0-based

    def add(self, sybyl, xyz, name=None):
        element = sybyl.split(".")[0]
        idx = len(self.atoms)
        self.atoms.append([name or f"{element}{idx + 1}", sybyl, np.asarray(xyz, dtype=float)])
        return idx

    def pos(self, i):
        """Coordinates of atom ``i``; raw coordinate arrays pass through."""
        if isinstance(i, np.ndarray):
            return i
        return self.atoms[i][2]

    def bond(self, i, j, kind="1"):
        self.bonds.append((i, j, kind))

    def chain(self, sybyl, to, ref1, ref2, length, angle, torsion, kind="1"):
        i = self.add(sybyl, place(self.pos(to), self.pos(ref1), self.pos(ref2), length, angle, torsion))
        self.bond(to, i, kind)
        return i

    def ring(self, sybyls, start, ext, ext_ref, length, torsion, kind="ar", closing_kind=None):
        """Close a regular ring starting at ``start`` which is bonded to ``ext``."""
        n = len(sybyls) + 1
        interior = 180.0 * (n - 2) / n
        exo = (360.0 - interior) / 2.0
        members = [start]
        prev2, prev1 = ext_ref, ext
        cur = start
        for k, syb in enumerate(sybyls):
            ang = exo if k == 0 else interior
            tor = torsion if k == 0 else (180.0 if k == 1 else 0.0)
            nxt = self.add(syb, place(self.pos(cur), self.pos(prev1), self.pos(prev2), length, ang, tor))
            self.bond(cur, nxt, kind)
            prev2, prev1, cur = prev1, cur, nxt
            members.append(nxt)
        self.bond(members[-1], start, closing_kind or kind)
        return members

    def neighbors(self, i):
        out = []
        for a, b, _ in self.bonds:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return out

    def h_planar(self, i, length=1.08):
        nb = self.neighbors(i)
        x = self.pos(i)
        direction = unit(sum(unit(x - self.pos(j)) for j in nb))
        self.bond(i, self.add("H", x + length * direction))

    def h_methine(self, i, length=1.09):
        self.h_planar(i, length)

    def h_methylene(self, i, length=1.09):
        a, b = self.neighbors(i)
        x = self.pos(i)
        u = unit(unit(x - self.pos(a)) + unit(x - self.pos(b)))
        w = unit(np.cross(self.pos(a) - x, self.pos(b) - x))
        half = np.radians(TETRA / 2.0)
        for sign in (1.0, -1.0):
            self.bond(i, self.add("H", x + length * (np.cos(half) * u + sign * np.sin(half) * w)))

    def h_methyl(self, i, ref, length=1.09, count=3, start=60.0):
        (a,) = self.neighbors(i)
        for k in range(count):
            self.bond(i, self.add("H", place(self.pos(i), self.pos(a), self.pos(ref), length, TETRA, start + 120.0 * k)))

    def h_amine2(self, i, ref, length=1.01):
        (a,) = self.neighbors(i)
        for tor in (0.0, 180.0):
            self.bond(i, self.add("H", place(self.pos(i), self.pos(a), self.pos(ref), length, 120.0, tor)))

    # ------------------------------------------------------------------
    def graph_distances(self):
        n = len(self.atoms)
        dist = np.full((n, n), np.inf)
        adj = {i: self.neighbors(i) for i in range(n)}
        for s in range(n):
            dist[s, s] = 0
            frontier = [s]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in adj[u]:
                        if dist[s, v] == np.inf:
                            dist[s, v] = dist[s, u] + 1
                            nxt.append(v)
                frontier = nxt
        return dist

    def check(self, radii, tolerance=0.4, min_separation=4):
        dist = self.graph_distances()
        assert np.isfinite(dist).all(), f"{self.name}: disconnected"
        worst = np.inf
        clashes = []
        for i, j in itertools.combinations(range(len(self.atoms)), 2):
            d = np.linalg.norm(self.pos(i) - self.pos(j))
            if dist[i, j] == 1:
                assert 0.9 < d < 1.8, (self.name, i, j, d)
            if dist[i, j] >= min_separation:
                ei = self.atoms[i][1].split(".")[0]
                ej = self.atoms[j][1].split(".")[0]
                margin = d - (radii[ei] + radii[ej] - tolerance)
                worst = min(worst, margin)
                if margin <= 0:
                    clashes.append((i + 1, j + 1, round(float(d), 3)))
        if clashes:
            raise ValueError(f"{self.name}: van der Waals clashes {clashes}")
        return worst

    def mol2(self):
        lines = ["@<TRIPOS>MOLECULE", self.name, f"{len(self.atoms):5d} {len(self.bonds):5d}     1     0     0"]
        lines += ["SMALL", "NO_CHARGES", "", "@<TRIPOS>ATOM"]
        for k, (name, syb, xyz) in enumerate(self.atoms, start=1):
            lines.append(
                f"{k:7d} {name:<8s} {xyz[0]:10.4f} {xyz[1]:10.4f} {xyz[2]:10.4f} {syb:<6s} 1  LIG1  0.0000"
            )
        lines.append("@<TRIPOS>BOND")
        for k, (a, b, kind) in enumerate(self.bonds, start=1):
            lines.append(f"{k:6d} {a + 1:5d} {b + 1:5d} {kind}")
        lines += ["@<TRIPOS>SUBSTRUCTURE", "     1 LIG1        1 GROUP             0 ****  ****    0", ""]
        return "\n".join(lines)


def thienyloxy_ethyl_furan():
    """2-[2-(thiophen-2-yloxy)ethyl]furan: 23 atoms, 24 bonds, 4 torsions."""
    b = Builder("thienyloxy_ethyl_furan")
    o = b.add("O.3", [0.0, 0.0, 0.0])
    c7 = b.add("C.3", [1.42, 0.0, 0.0])
    c8 = b.add("C.3", place(b.pos(c7), b.pos(o), np.array([0.0, 1.0, 0.0]), 1.53, TETRA, 180.0))
    b.bond(o, c7)
    b.bond(c7, c8)
    # thiophene carbon on the ether oxygen
    c2 = b.add("C.ar", place(b.pos(o), b.pos(c7), b.pos(c8), 1.36, 117.0, 70.0))
    b.bond(o, c2)
    ring_t = b.ring(["S.2", "C.ar", "C.ar", "C.ar"], c2, o, c7, 1.52, -100.0)
    _, s1, c5, c4, c3 = ring_t
    # furan on the far methylene, gauche about C7-C8
    c9 = b.add("C.ar", place(b.pos(c8), b.pos(c7), b.pos(o), 1.50, 112.0, 65.0))
    b.bond(c8, c9)
    ring_f = b.ring(["O.2", "C.ar", "C.ar", "C.ar"], c9, c8, c7, 1.37, -75.0)
    _, o13, c12, c11, c10 = ring_f
    for atom in (c3, c4, c5, c10, c11, c12):
        b.h_planar(atom)
    for atom in (c7, c8):
        b.h_methylene(atom)
    return b


def ibuprofen(tor=(60.0, 75.0, -75.0, 180.0)):
    """2-[4-(2-methylpropyl)phenyl]propanoic acid."""
    b = Builder("ibuprofen")
    c1 = b.add("C.ar", [0.0, 0.0, 0.0])
    cb = b.add("C.3", place(b.pos(c1), np.array([-1.0, 1.0, 0.0]), np.array([-1.0, 1.0, 1.0]), 1.51, 120.0, 0.0))  # benzylic CH2
    b.bond(c1, cb)
    ring = b.ring(["C.ar"] * 5, c1, cb, b.pos(cb) + np.array([0.0, 0.0, 1.0]), 1.39, 90.0)
    r1, r2, r3, r4, r5, r6 = ring
    # isobutyl: CH2-CH(CH3)2
    ch = b.chain("C.3", cb, c1, r2, 1.53, 112.0, tor[0])
    m1 = b.chain("C.3", ch, cb, c1, 1.53, 110.0, 60.0)
    m2 = b.chain("C.3", ch, cb, c1, 1.53, 110.0, 180.0)
    # para position carries the propanoic acid
    ca = b.chain("C.3", r4, r3, r2, 1.52, 120.0, 180.0)
    cm = b.chain("C.3", ca, r4, r3, 1.53, 110.0, tor[1])
    cc = b.chain("C.2", ca, r4, r3, 1.52, 110.0, tor[2])
    o1 = b.chain("O.2", cc, ca, r4, 1.21, 123.0, tor[3], kind="2")
    o2 = b.chain("O.3", cc, ca, r4, 1.34, 112.0, tor[3] + 180.0)
    for atom in (r2, r3, r5, r6):
        b.h_planar(atom)
    b.h_methylene(cb)
    b.h_methine(ch)
    b.h_methyl(m1, cb)
    b.h_methyl(m2, cb)
    b.h_methine(ca)
    b.h_methyl(cm, cc)
    b.bond(o2, b.add("H", place(b.pos(o2), b.pos(cc), b.pos(o1), 0.97, 107.0, 0.0)))
    return b


def procaine(tor=(120.0, -120.0, 120.0, 120.0, 180.0, -75.0, 120.0)):
    """2-(diethylamino)ethyl 4-aminobenzoate."""
    b = Builder("procaine")
    c1 = b.add("C.ar", [0.0, 0.0, 0.0])
    ref, ref2 = np.array([-1.0, 1.0, 0.0]), np.array([-1.0, 1.0, 1.0])
    cc = b.add("C.2", place(b.pos(c1), ref, ref2, 1.48, 120.0, 0.0))
    b.bond(c1, cc)
    ring = b.ring(["C.ar"] * 5, c1, cc, ref2, 1.39, 90.0)
    r1, r2, r3, r4, r5, r6 = ring
    n_an = b.chain("N.pl3", r4, r3, r2, 1.38, 120.0, 180.0)
    o_db = b.chain("O.2", cc, r1, r2, 1.21, 123.0, 25.0, kind="2")
    o_es = b.chain("O.3", cc, r1, r2, 1.34, 113.0, -155.0)
    ca = b.chain("C.3", o_es, cc, r1, 1.45, 116.0, tor[0])
    cb = b.chain("C.3", ca, o_es, cc, 1.52, 108.0, tor[1])
    n_am = b.chain("N.3", cb, ca, o_es, 1.47, 112.0, tor[2])
    e1 = b.chain("C.3", n_am, cb, ca, 1.47, 111.0, tor[3])
    e1m = b.chain("C.3", e1, n_am, cb, 1.53, 112.0, tor[4])
    e2 = b.chain("C.3", n_am, cb, ca, 1.47, 111.0, tor[5])
    e2m = b.chain("C.3", e2, n_am, cb, 1.53, 112.0, tor[6])
    for atom in (r2, r3, r5, r6):
        b.h_planar(atom)
    b.h_amine2(n_an, r3)
    for atom in (ca, cb, e1, e2):
        b.h_methylene(atom)
    b.h_methyl(e1m, n_am)
    b.h_methyl(e2m, n_am)
    return b


def felbinac():
    """2-(4-phenylphenyl)acetic acid."""
    b = Builder("felbinac")
    c1 = b.add("C.ar", [0.0, 0.0, 0.0])
    ref, ref2 = np.array([-1.0, 1.0, 0.0]), np.array([-1.0, 1.0, 1.0])
    cm = b.add("C.3", place(b.pos(c1), ref, ref2, 1.51, 120.0, 0.0))
    b.bond(c1, cm)
    ring = b.ring(["C.ar"] * 5, c1, cm, ref2, 1.39, 90.0)
    r1, r2, r3, r4, r5, r6 = ring
    p1 = b.chain("C.ar", r4, r3, r2, 1.49, 120.0, 180.0)
    ring2 = b.ring(["C.ar"] * 5, p1, r4, r3, 1.39, 40.0)
    q1, q2, q3, q4, q5, q6 = ring2
    cc = b.chain("C.2", cm, r1, r2, 1.52, 112.0, 95.0)
    o1 = b.chain("O.2", cc, cm, r1, 1.21, 123.0, 30.0, kind="2")
    o2 = b.chain("O.3", cc, cm, r1, 1.34, 112.0, -150.0)
    for atom in (r2, r3, r5, r6, q2, q3, q4, q5, q6):
        b.h_planar(atom)
    b.h_methylene(cm)
    b.bond(o2, b.add("H", place(b.pos(o2), b.pos(cc), b.pos(o1), 0.97, 107.0, 0.0)))
    return b


BONDI = {"H": 1.20, "C": 1.70, "N": 1.55, "O": 1.52, "S": 1.80}


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for build in (thienyloxy_ethyl_furan, ibuprofen, procaine, felbinac):
        b = build()
        margin = b.check(BONDI)
        path = OUT_DIR / f"{b.name}.mol2"
        path.write_text(b.mol2())
        print(f"{path.name}: {len(b.atoms)} atoms, {len(b.bonds)} bonds, min vdW margin {margin:.3f} A")


if __name__ == "__main__":
    main()
