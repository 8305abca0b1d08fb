"""HUBO encoding of the unfolding objective.

Every torsion angle is one-hot encoded on a uniform grid of ``d`` steps
anchored at zero. Sines and cosines become linear forms in the step bits, so
each rotation-matrix entry is linear in one torsion's bits and the squared
distance between two fragment representatives is a multilinear polynomial of
degree at most twice the number of torsions on their path.

The expansion is done numerically: a representative's position is a dense
tensor over the per-torsion local basis ``(1, x_1, ..., x_d)``, and squaring
maps each axis onto the basis ``{1, x_k, x_k x_l}`` using ``x_k ** 2 == x_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polynomial import NOISE_FLOOR, BinaryPolynomial, evaluate
from .topology import TorsionModel

__all__ = [
    "AngleGrid",
    "VariableMap",
    "HuboProblem",
    "Infeasible",
    "NoEligiblePairs",
    "one_hot_penalty",
    "trig_poly",
    "optimization_polynomial",
    "build_hubo",
    "a_const_base",
    "A_CONST_BASES",
    "decode",
    "decode_indices",
    "encode",
    "evaluate",
]


class NoEligiblePairs(ValueError):
    pass


@dataclass(frozen=True)
class AngleGrid:
    """``d`` equally spaced angles ``0, 2pi/d, ..., 2pi(d-1)/d``."""

    d: int = 8

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"granularity must be an integer >= 2, got {self.d!r}")

    @property
    def step(self) -> float:
        return 2.0 * np.pi / self.d

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.d) * self.step

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.d) * (360.0 / self.d)


@dataclass(frozen=True)
class VariableMap:
    """Bit ``i * d + k`` is set when torsion ``i`` takes grid step ``k`` (both 0-based)."""

    n_torsions: int
    d: int

    @property
    def n(self) -> int:
        return self.n_torsions * self.d

    def index(self, torsion: int, step: int) -> int:
        if not (0 <= torsion < self.n_torsions and 0 <= step < self.d):
            raise IndexError(f"(torsion={torsion}, step={step}) outside {self.n_torsions}x{self.d}")
        return torsion * self.d + step

    def inverse(self, var: int) -> tuple[int, int]:
        if not 0 <= var < self.n:
            raise IndexError(f"variable {var} outside 0..{self.n - 1}")
        return divmod(var, self.d)

    def block(self, torsion: int) -> range:
        return range(torsion * self.d, (torsion + 1) * self.d)


@dataclass(frozen=True)
class Infeasible:
    """Decoding failed: these torsions do not have exactly one bit set."""

    torsions: tuple[int, ...]

    def __bool__(self):
        return False


@dataclass(frozen=True, eq=False)
class HuboProblem:
    polynomial: BinaryPolynomial
    objective: BinaryPolynomial
    variable_map: VariableMap
    grid: AngleGrid
    a_const: float
    constraint_terms: frozenset
    chop_threshold: float
    model: TorsionModel | None = None

    @property
    def degree(self) -> int:
        return self.polynomial.degree

    @property
    def n_vars(self) -> int:
        return self.variable_map.n

    def term_counts(self) -> dict[str, int]:
        by_degree = self.polynomial.count_by_degree()
        return {
            "linear": by_degree.get(1, 0),
            "quadratic": by_degree.get(2, 0),
            "higher": sum(v for k, v in by_degree.items() if k > 2),
        }

    def to_text(self) -> str:
        return self.polynomial.to_text(self.n_vars)


def one_hot_penalty(vm: VariableMap) -> BinaryPolynomial:
    """``sum_i (sum_k x_ik - 1) ** 2`` expanded with ``x ** 2 == x``."""
    terms: dict[tuple[int, ...], float] = {}
    for i in range(vm.n_torsions):
        block = list(vm.block(i))
        for a in block:
            terms[(a,)] = -1.0
        for pos, a in enumerate(block):
            for b in block[pos + 1:]:
                terms[(a, b)] = 2.0
    return BinaryPolynomial(terms, constant=float(vm.n_torsions))


def trig_poly(vm: VariableMap, i: int, grid: AngleGrid) -> tuple[BinaryPolynomial, BinaryPolynomial]:
    """Linear forms equal to ``sin`` and ``cos`` of torsion ``i`` on one-hot inputs."""
    vals = grid.values
    sin = BinaryPolynomial({(vm.index(i, k),): np.sin(vals[k]) for k in range(grid.d)})
    cos = BinaryPolynomial({(vm.index(i, k),): np.cos(vals[k]) for k in range(grid.d)})
    return sin, cos


def _skew(u: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])


class _Expander:
    """Dense-tensor expansion of representative distances for one model and grid."""

    def __init__(self, tm: TorsionModel, grid: AngleGrid):
        self.tm = tm
        self.d = grid.d
        d = grid.d
        sin, cos = np.sin(grid.values), np.cos(grid.values)
        coords = tm.molecule.coordinates
        self.rot = []
        self.shift = []
        for t in tm.torsions:
            p0 = coords[t.near - 1]
            u = coords[t.far - 1] - p0
            u = u / np.linalg.norm(u)
            alpha = np.outer(u, u)
            beta = _skew(u)
            gamma = np.eye(3) - alpha
            r = np.empty((3, 3, d + 1))
            r[:, :, 0] = alpha
            r[:, :, 1:] = beta[:, :, None] * sin + gamma[:, :, None] * cos
            s = np.empty((3, d + 1))
            s[:, 0] = p0 - alpha @ p0
            s[:, 1:] = -(np.outer(beta @ p0, sin) + np.outer(gamma @ p0, cos))
            self.rot.append(r)
            self.shift.append(s)
        # local square: (a, b) in {1, x_1..x_d}^2 -> {1, x_k, x_k x_l}
        local = [()] + [(k,) for k in range(d)] + [(k, m) for k in range(d) for m in range(k + 1, d)]
        slot = {key: n for n, key in enumerate(local)}
        prod = np.zeros((len(local), d + 1, d + 1))
        for a in range(d + 1):
            for b in range(d + 1):
                key = tuple(sorted({k - 1 for k in (a, b) if k}))
                prod[slot[key], a, b] = 1.0
        self.local = local
        self.prod = prod

    def position(self, atom: int, torsions: tuple[int, ...]) -> np.ndarray:
        """Tensor of shape ``(3, d+1, ...)``, one axis per torsion in the given order."""
        p = self.tm.molecule.coordinates[atom - 1].copy()
        for t in reversed(torsions):
            moved = np.einsum("rcj,c...->rj...", self.rot[t], p)
            lead = (slice(None), slice(None)) + (0,) * (p.ndim - 1)
            moved[lead] += self.shift[t]
            p = moved
        return p

    def squared_distance(self, frag_a, frag_b) -> tuple[tuple[int, ...], np.ndarray]:
        """Squared representative distance as a tensor over the local square basis."""
        ia, ib = frag_a.influence_set, frag_b.influence_set
        common = 0
        while common < min(len(ia), len(ib)) and ia[common] == ib[common]:
            common += 1
        side_a, side_b = ia[common:], ib[common:]
        axes = tuple(sorted(side_a + side_b))
        k = len(axes)
        delta = np.zeros((3,) + (self.d + 1,) * k)
        for sign, atom, side in ((1.0, frag_a.representative_atom, side_a), (-1.0, frag_b.representative_atom, side_b)):
            tensor = self.position(atom, side)
            order = sorted(range(len(side)), key=lambda n: side[n])
            tensor = np.transpose(tensor, (0,) + tuple(1 + n for n in order))
            owned = set(side)
            idx = (slice(None),) + tuple(slice(None) if ax in owned else 0 for ax in axes)
            delta[idx] += sign * tensor
        # Gram matrix over the joint (a, b) index, then fold each axis pair (a_j, b_j) onto l_j
        flat = delta.reshape(3, -1)
        square = (flat.T @ flat).reshape((self.d + 1,) * (2 * k))
        perm = [n for j in range(k) for n in (j, k + j)]
        square = np.transpose(square, perm).reshape(((self.d + 1) ** 2,) * k)
        fold = self.prod.reshape(len(self.local), -1)
        for _ in range(k):
            # contract the leading (a_j, b_j) axis and append l_j at the end
            square = np.moveaxis(np.tensordot(fold, square, axes=([1], [0])), 0, -1)
        return axes, square

    def add_pair(self, acc: dict, frag_a, frag_b, scale: float) -> float:
        """Accumulate ``scale * |a - b| ** 2`` into ``acc``; returns its constant part."""
        axes, square = self.squared_distance(frag_a, frag_b)
        if not axes:
            return scale * float(square)
        d = self.d
        nz = np.argwhere(np.abs(square) >= NOISE_FLOOR)
        values = square[tuple(nz.T)]
        constant = 0.0
        for row, value in zip(nz, values):
            key = []
            for ax, slot in zip(axes, row):
                key.extend(ax * d + k for k in self.local[slot])
            key = tuple(key)
            if key:
                acc[key] = acc.get(key, 0.0) + scale * value
            else:
                constant += scale * value
        return constant


def optimization_polynomial(tm: TorsionModel, grid: AngleGrid) -> BinaryPolynomial:
    """Negated sum of squared representative distances over eligible fragment pairs."""
    pairs = tm.eligible_fragment_pairs
    if not pairs:
        raise NoEligiblePairs(f"{tm.molecule.name!r}: no fragment pair satisfies the distance conditions")
    expander = _Expander(tm, grid)
    acc: dict[tuple[int, ...], float] = {}
    constant = 0.0
    for i, j, _ in pairs:
        constant += expander.add_pair(acc, tm.fragments[i], tm.fragments[j], -1.0)
    poly = BinaryPolynomial(constant=constant)
    poly.terms = {k: c for k, c in acc.items() if abs(c) >= NOISE_FLOOR}
    return poly


A_CONST_BASES = ("max-coefficient", "incident")


def a_const_base(objective: BinaryPolynomial, base: str = "max-coefficient") -> float:
    """Scale that ``a_const`` factors multiply.

    ``max-coefficient`` is the largest ``|c|`` among the optimization terms.
    ``incident`` is the largest total ``|c|`` over the terms sharing one
    variable; any factor above 1 then provably makes every global minimizer
    one-hot, since fixing one torsion's block lowers the penalty by at least
    ``a_const`` while moving the objective by at most that mass.
    Returns 1 when the objective does not depend on the angles at all.
    """
    if base == "max-coefficient":
        value = objective.max_abs_coefficient()
    elif base == "incident":
        mass: dict[int, float] = {}
        for key, c in objective.terms.items():
            for i in key:
                mass[i] = mass.get(i, 0.0) + abs(c)
        value = max(mass.values(), default=0.0)
    else:
        raise ValueError(f"unknown a_const base {base!r}; expected one of {A_CONST_BASES}")
    # an angle-independent objective is satisfied by any positive penalty
    return value if value > 0 else 1.0


def build_hubo(tm: TorsionModel, grid: AngleGrid, a_const: float, chop: float = 0.0,
               *, objective: BinaryPolynomial | None = None) -> HuboProblem:
    """``a_const * one_hot_penalty - sum of squared distances``, with small optimization terms chopped.

    Terms whose key also appears in the one-hot penalty are never chopped.
    A precomputed ``objective`` from :func:`optimization_polynomial` may be
    passed to skip the expansion.
    """
    if not a_const > 0:
        raise ValueError("a_const must be positive")
    if chop < 0:
        raise ValueError("chop must be non-negative")
    vm = VariableMap(tm.n_torsions, grid.d)
    if objective is None:
        objective = optimization_polynomial(tm, grid)
    penalty = one_hot_penalty(vm)
    constraint_keys = frozenset(penalty.terms)
    kept = objective.chop(chop, exempt=constraint_keys) if chop > 0 else objective.copy()
    total = kept + penalty * float(a_const)
    # penalty keys stay even if the sum cancels to zero
    for key in constraint_keys:
        total.terms.setdefault(key, 0.0)
    return HuboProblem(
        polynomial=total,
        objective=kept,
        variable_map=vm,
        grid=grid,
        a_const=float(a_const),
        constraint_terms=constraint_keys,
        chop_threshold=float(chop),
        model=tm,
    )


def decode_indices(vm: VariableMap, bits) -> tuple[int, ...] | Infeasible:
    bits = np.asarray(bits)
    if len(bits) < vm.n:
        raise ValueError(f"assignment has {len(bits)} bits, need {vm.n}")
    blocks = bits[: vm.n].reshape(vm.n_torsions, vm.d).astype(bool)
    counts = blocks.sum(axis=1)
    bad = tuple(int(i) for i in np.flatnonzero(counts != 1))
    if bad:
        return Infeasible(bad)
    return tuple(int(k) for k in blocks.argmax(axis=1))


def decode(vm: VariableMap, bits, grid: AngleGrid) -> np.ndarray | Infeasible:
    """Torsion angles in radians for a one-hot assignment, else :class:`Infeasible`."""
    idx = decode_indices(vm, bits)
    if isinstance(idx, Infeasible):
        return idx
    return grid.values[list(idx)]


def encode(vm: VariableMap, indices) -> np.ndarray:
    bits = np.zeros(vm.n, dtype=np.int8)
    for i, k in enumerate(indices):
        bits[vm.index(i, int(k))] = 1
    return bits
