"""Sparse multilinear polynomials over binary variables.

Terms are keyed by sorted, duplicate-free tuples of variable indices. Since
``x * x == x`` for binary ``x``, products merge index sets instead of raising
powers.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping

import numpy as np

__all__ = ["BinaryPolynomial", "IndexOutOfRange", "NOISE_FLOOR", "evaluate"]

# coefficients below this are treated as round-off and dropped
NOISE_FLOOR = 1e-12


class IndexOutOfRange(IndexError):
    pass


def _key(indices: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(set(int(i) for i in indices)))


class BinaryPolynomial:
    """``constant + sum(coef * prod(x[i] for i in key))``."""

    __slots__ = ("constant", "terms")

    def __init__(self, terms: Mapping | None = None, constant: float = 0.0, *, normalize: bool = True):
        self.constant = float(constant)
        self.terms: dict[tuple[int, ...], float] = {}
        if terms:
            for key, coef in terms.items():
                key = _key(key)
                if not key:
                    self.constant += float(coef)
                    continue
                self.terms[key] = self.terms.get(key, 0.0) + float(coef)
        if normalize:
            self._drop_noise()

    def _drop_noise(self) -> None:
        self.terms = {k: c for k, c in self.terms.items() if abs(c) >= NOISE_FLOOR}

    @classmethod
    def from_linear(cls, coefs: Mapping[int, float], constant: float = 0.0) -> "BinaryPolynomial":
        return cls({(i,): c for i, c in coefs.items()}, constant)

    def copy(self) -> "BinaryPolynomial":
        out = BinaryPolynomial(constant=self.constant)
        out.terms = dict(self.terms)
        return out

    @property
    def degree(self) -> int:
        return max((len(k) for k in self.terms), default=0)

    @property
    def n_vars(self) -> int:
        """One past the largest variable index in use."""
        return max((k[-1] for k in self.terms), default=-1) + 1

    def variables(self) -> set[int]:
        return {i for k in self.terms for i in k}

    def __len__(self) -> int:
        return len(self.terms)

    def count_by_degree(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for k in self.terms:
            out[len(k)] = out.get(len(k), 0) + 1
        return dict(sorted(out.items()))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def __eq__(self, other):
        if not isinstance(other, BinaryPolynomial):
            return NotImplemented
        return self.constant == other.constant and self.terms == other.terms

    def __repr__(self):
        return f"BinaryPolynomial(n_terms={len(self.terms)}, degree={self.degree}, constant={self.constant:g})"

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = self.copy()
            out.constant += other
            return out
        out = self.copy()
        out.constant += other.constant
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0.0) + c
        out._drop_noise()
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            out = BinaryPolynomial(constant=self.constant * other)
            out.terms = {k: c * other for k, c in self.terms.items()}
            out._drop_noise()
            return out
        acc: dict[tuple[int, ...], float] = {}
        left = [((), self.constant)] + list(self.terms.items())
        right = [((), other.constant)] + list(other.terms.items())
        for ka, ca in left:
            if ca == 0.0:
                continue
            for kb, cb in right:
                if cb == 0.0:
                    continue
                key = ka if not kb else (kb if not ka else tuple(sorted(set(ka) | set(kb))))
                acc[key] = acc.get(key, 0.0) + ca * cb
        constant = acc.pop((), 0.0)
        out = BinaryPolynomial(constant=constant)
        out.terms = acc
        out._drop_noise()
        return out

    __rmul__ = __mul__

    def chop(self, threshold: float, exempt: Iterable[tuple[int, ...]] = ()) -> "BinaryPolynomial":
        """Drop terms with ``|coef| < threshold`` unless their key is exempt."""
        if threshold < 0:
            raise ValueError("chop threshold must be non-negative")
        exempt = set(exempt)
        out = BinaryPolynomial(constant=self.constant)
        out.terms = {k: c for k, c in self.terms.items() if abs(c) >= threshold or k in exempt}
        return out

    def evaluate(self, bits) -> float:
        return evaluate(self, bits)

    def evaluate_many(self, bits: np.ndarray) -> np.ndarray:
        """Values for every row of a 0/1 matrix."""
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise ValueError("evaluate_many expects a 2-D array")
        if self.terms and self.n_vars > bits.shape[1]:
            raise IndexOutOfRange(f"polynomial uses variable {self.n_vars - 1}, rows have {bits.shape[1]}")
        b = bits.astype(bool)
        out = np.full(len(bits), self.constant)
        for key, coef in self.terms.items():
            out += coef * np.logical_and.reduce(b[:, key], axis=1)
        return out

    def to_text(self, n_vars: int | None = None) -> str:
        n = self.n_vars if n_vars is None else n_vars
        lines = [f"# vars {n}", f"# constant {self.constant:.17g}"]
        for key in sorted(self.terms, key=lambda k: (len(k), k)):
            lines.append(f"{' '.join(map(str, key))} : {self.terms[key]:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> tuple["BinaryPolynomial", int]:
        """Parse :meth:`to_text` output; returns ``(polynomial, n_vars)``."""
        n_vars, constant, terms = None, 0.0, {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "vars":
                    n_vars = int(parts[1])
                elif len(parts) == 2 and parts[0] == "constant":
                    constant = float(parts[1])
                continue
            lhs, sep, rhs = line.partition(":")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'i j ... : coeff'")
            key = tuple(int(v) for v in lhs.split())
            if list(key) != sorted(set(key)):
                raise ValueError(f"line {lineno}: indices must be sorted and distinct")
            terms[key] = terms.get(key, 0.0) + float(rhs)
        poly = cls(constant=constant)
        poly.terms = {k: c for k, c in terms.items() if k}
        poly.constant += terms.get((), 0.0)
        if n_vars is None:
            n_vars = poly.n_vars
        return poly, n_vars


def evaluate(p: BinaryPolynomial, bits) -> float:
    """Value of ``p`` at one 0/1 assignment."""
    bits = np.asarray(bits)
    if p.terms and p.n_vars > len(bits):
        raise IndexOutOfRange(f"polynomial uses variable {p.n_vars - 1}, assignment has {len(bits)} bits")
    total = p.constant
    for key, coef in p.terms.items():
        if all(bits[i] for i in key):
            total += coef
    return float(total)
