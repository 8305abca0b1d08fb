"""HUBO to QUBO reduction by pair substitution.

Each step picks the variable pair shared by the most remaining terms of degree
three or more, replaces it by a fresh ancilla ``a`` in all of them and adds the
penalty ``P * (x_u x_v - 2 x_u a - 2 x_v a + 3 a)``, which is zero exactly when
``a == x_u and x_v`` and at least ``P`` otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoder import HuboProblem
from .polynomial import NOISE_FLOOR, BinaryPolynomial, IndexOutOfRange

__all__ = ["QuboProblem", "quadratize", "chop_qubo", "lift_assignment", "default_penalty_scale"]


@dataclass(eq=False)
class QuboProblem:
    linear: dict[int, float]
    quadratic: dict[tuple[int, int], float]
    constant: float
    n_original: int
    ancillas: list[tuple[int, tuple[int, int]]] = field(default_factory=list)
    penalty_scale: float = 0.0
    # entries exempt from chop_qubo: one-hot constraint terms and ancilla penalties
    protected: frozenset = frozenset()
    hubo: HuboProblem | None = None

    @property
    def n_vars(self) -> int:
        return self.n_original + len(self.ancillas)

    @property
    def n_entries(self) -> int:
        return len(self.linear) + len(self.quadratic)

    def copy(self) -> "QuboProblem":
        return QuboProblem(dict(self.linear), dict(self.quadratic), self.constant, self.n_original,
                           list(self.ancillas), self.penalty_scale, self.protected, self.hubo)

    def to_polynomial(self) -> BinaryPolynomial:
        poly = BinaryPolynomial(constant=self.constant)
        poly.terms = {(i,): c for i, c in self.linear.items()}
        poly.terms.update(self.quadratic)
        return poly

    def evaluate(self, bits) -> float:
        bits = np.asarray(bits)
        if len(bits) < self.n_vars:
            raise IndexOutOfRange(f"assignment has {len(bits)} bits, QUBO has {self.n_vars}")
        return self.to_polynomial().evaluate(bits)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        """Energies of every row of a 0/1 matrix, via dense ``x h + x J x``."""
        bits = np.asarray(bits, dtype=float)
        h, j = self.dense()
        return self.constant + bits @ h + np.einsum("ni,ij,nj->n", bits, j, bits)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Linear vector and upper-triangular coupling matrix."""
        n = self.n_vars
        h = np.zeros(n)
        for i, c in self.linear.items():
            h[i] = c
        j = np.zeros((n, n))
        for (a, b), c in self.quadratic.items():
            j[a, b] = c
        return h, j

    def to_text(self) -> str:
        lines = [f"# vars {self.n_vars}", f"# original {self.n_original}", f"# constant {self.constant:.17g}"]
        entries = [((i, i), c) for i, c in self.linear.items()] + list(self.quadratic.items())
        for (a, b), c in sorted(entries):
            lines.append(f"{a} {b} {c:.17g}")
        return "\n".join(lines) + "\n"

    def ancillas_json(self) -> str:
        payload = {
            "n_original": self.n_original,
            "penalty_scale": self.penalty_scale,
            "ancillas": [{"index": a, "pair": list(pair)} for a, pair in self.ancillas],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def term_counts(self) -> dict[str, int]:
        return {"linear": len(self.linear), "quadratic": len(self.quadratic), "ancillas": len(self.ancillas)}


def default_penalty_scale(poly: BinaryPolynomial) -> float:
    """``2 * (1 + sum |c|)`` over terms of degree three or more."""
    return 2.0 * (1.0 + sum(abs(c) for k, c in poly.terms.items() if len(k) >= 3))


def _pairs(key):
    for p in range(len(key)):
        for q in range(p + 1, len(key)):
            yield key[p], key[q]


def _reduce(poly: BinaryPolynomial, n_vars: int, scale: float):
    terms = dict(poly.terms)
    index: dict[tuple[int, int], set] = {}
    for key in terms:
        if len(key) >= 3:
            for pair in _pairs(key):
                index.setdefault(pair, set()).add(key)

    ancillas: list[tuple[int, tuple[int, int]]] = []
    penalty: dict[tuple[int, ...], float] = {}
    nxt = n_vars
    while index:
        best = max(index.items(), key=lambda item: (len(item[1]), tuple(-v for v in item[0])))[0]
        u, v = best
        a = nxt
        nxt += 1
        ancillas.append((a, best))
        for key in sorted(index[best]):
            coef = terms.pop(key)
            for pair in _pairs(key):
                bucket = index[pair]
                bucket.discard(key)
                if not bucket:
                    del index[pair]
            new = tuple(sorted([x for x in key if x != u and x != v] + [a]))
            had = new in terms
            terms[new] = terms.get(new, 0.0) + coef
            if not had and len(new) >= 3:
                for pair in _pairs(new):
                    index.setdefault(pair, set()).add(new)
        for key, c in (((u, v), scale), ((u, a), -2.0 * scale), ((v, a), -2.0 * scale), ((a,), 3.0 * scale)):
            penalty[key] = penalty.get(key, 0.0) + c
    return terms, penalty, ancillas


def quadratize(h: HuboProblem | BinaryPolynomial, penalty_scale: float | None = None, *,
               n_vars: int | None = None) -> QuboProblem:
    """Reduce ``h`` to degree two, preserving minima over the original variables."""
    if isinstance(h, HuboProblem):
        poly, hubo, n = h.polynomial, h, h.n_vars
        protected = set(h.constraint_terms)
    else:
        poly, hubo, n = h, None, h.n_vars
        protected = set()
    if n_vars is not None:
        if n_vars < poly.n_vars:
            raise ValueError(f"n_vars={n_vars} but polynomial uses {poly.n_vars}")
        n = n_vars
    scale = default_penalty_scale(poly) if penalty_scale is None else float(penalty_scale)
    if scale <= 0:
        raise ValueError("penalty_scale must be positive")
    terms, penalty, ancillas = _reduce(poly, n, scale)
    protected.update(penalty)
    for key, c in penalty.items():
        terms[key] = terms.get(key, 0.0) + c

    linear: dict[int, float] = {}
    quadratic: dict[tuple[int, int], float] = {}
    for key, c in terms.items():
        if abs(c) < NOISE_FLOOR and key not in protected:
            continue
        if len(key) == 1:
            linear[key[0]] = c
        else:
            quadratic[key] = c
    return QuboProblem(
        linear=dict(sorted(linear.items())),
        quadratic=dict(sorted(quadratic.items())),
        constant=poly.constant,
        n_original=n,
        ancillas=ancillas,
        penalty_scale=scale if ancillas else 0.0,
        protected=frozenset(protected),
        hubo=hubo,
    )


def chop_qubo(q: QuboProblem, threshold: float) -> QuboProblem:
    """Drop unprotected entries with ``|coef| < threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    out = q.copy()
    if threshold == 0:
        return out
    out.linear = {i: c for i, c in q.linear.items() if abs(c) >= threshold or (i,) in q.protected}
    out.quadratic = {k: c for k, c in q.quadratic.items() if abs(c) >= threshold or k in q.protected}
    return out


def lift_assignment(q: QuboProblem, bits) -> np.ndarray:
    """Extend original bits with each ancilla set to the AND of its pair."""
    bits = np.asarray(bits)
    if len(bits) != q.n_original:
        raise ValueError(f"expected {q.n_original} original bits, got {len(bits)}")
    out = np.zeros(q.n_vars, dtype=np.int8)
    out[: q.n_original] = bits
    # ancillas are created in order, so a pair never refers to a later ancilla
    for a, (u, v) in q.ancillas:
        out[a] = out[u] & out[v]
    return out
