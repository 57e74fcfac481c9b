"""Sparse multivariate polynomials, monomial bases, and the moment functional.

Monomials are immutable exponent vectors stored sparsely; polynomials map
monomials to real coefficients. Everything downstream (objectives, KKT
constraints, moment matrices) is expressed in this representation, so the
arithmetic here is exact up to a coefficient pruning threshold that keeps
floating-point dust out of supports.
"""

from __future__ import annotations

import json
import math
from itertools import combinations_with_replacement
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InvalidInput, MissingMoment

#: Coefficients smaller than this in magnitude are dropped after arithmetic.
COEFF_EPS = 1e-12


class Monomial:
    """An exponent vector: a sparse map variable-index -> positive power.

    The empty monomial is the constant 1. Instances are immutable and
    hashable so they can serve as dictionary keys in polynomials, bases,
    and moment vectors.
    """

    __slots__ = ("exps", "_hash")

    def __init__(self, exps: Iterable[tuple[int, int]] = ()):
        items = tuple(sorted((v, p) for v, p in exps if p != 0))
        for v, p in items:
            if p < 0 or v < 0:
                raise InvalidInput(f"bad exponent entry ({v}, {p})")
        self.exps = items
        self._hash = hash(items)

    @staticmethod
    def from_dict(d: Mapping[int, int]) -> "Monomial":
        return Monomial(d.items())

    @staticmethod
    def variable(v: int, power: int = 1) -> "Monomial":
        return Monomial([(v, power)])

    def degree(self) -> int:
        return sum(p for _, p in self.exps)

    def variables(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.exps)

    def power(self, v: int) -> int:
        for w, p in self.exps:
            if w == v:
                return p
        return 0

    def __mul__(self, other: "Monomial") -> "Monomial":
        if not self.exps:
            return other
        if not other.exps:
            return self
        d = dict(self.exps)
        for v, p in other.exps:
            d[v] = d.get(v, 0) + p
        return Monomial(d.items())

    def parity(self) -> tuple[int, ...]:
        """Indices of variables with odd exponent."""
        return tuple(v for v, p in self.exps if p % 2 == 1)

    def is_even(self) -> bool:
        return all(p % 2 == 0 for _, p in self.exps)

    def halve(self) -> "Monomial":
        if not self.is_even():
            raise InvalidInput(f"monomial {self} is not a square")
        return Monomial((v, p // 2) for v, p in self.exps)

    def divides(self, other: "Monomial") -> bool:
        od = dict(other.exps)
        return all(od.get(v, 0) >= p for v, p in self.exps)

    def divide(self, other: "Monomial") -> "Monomial":
        """self / other; requires other | self."""
        d = dict(self.exps)
        for v, p in other.exps:
            if d.get(v, 0) < p:
                raise InvalidInput(f"{other} does not divide {self}")
            d[v] -= p
        return Monomial(d.items())

    def evaluate(self, point: Sequence[float]) -> float:
        out = 1.0
        for v, p in self.exps:
            out *= point[v] ** p
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Monomial) and self.exps == other.exps

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Monomial") -> bool:
        # Graded order with deterministic tie-break; used only for stable sorting.
        return (self.degree(), self.exps) < (other.degree(), other.exps)

    def __repr__(self) -> str:
        if not self.exps:
            return "1"
        return "*".join(f"x{v}" + (f"^{p}" if p > 1 else "") for v, p in self.exps)


ONE = Monomial()


class Poly:
    """A sparse polynomial: map Monomial -> coefficient over ``nvars`` variables."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms: Mapping[Monomial, float] | None = None, nvars: int = 0):
        self.nvars = nvars
        self.terms: dict[Monomial, float] = {}
        if terms:
            for m, c in terms.items():
                if abs(c) > COEFF_EPS:
                    self.terms[m] = float(c)

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero(nvars: int) -> "Poly":
        return Poly({}, nvars)

    @staticmethod
    def constant(c: float, nvars: int) -> "Poly":
        return Poly({ONE: c}, nvars)

    @staticmethod
    def variable(v: int, nvars: int) -> "Poly":
        if v >= nvars:
            raise InvalidInput(f"variable {v} out of range for nvars={nvars}")
        return Poly({Monomial.variable(v): 1.0}, nvars)

    @staticmethod
    def monomial(m: Monomial, coeff: float, nvars: int) -> "Poly":
        return Poly({m: coeff}, nvars)

    # -- basic queries -------------------------------------------------
    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(m.degree() for m in self.terms)

    def support(self) -> set[Monomial]:
        return set(self.terms)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out.update(m.variables())
        return out

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, m: Monomial) -> float:
        return self.terms.get(m, 0.0)

    def with_nvars(self, nvars: int) -> "Poly":
        """Reinterpret over a larger variable universe (indices unchanged)."""
        if nvars < self.nvars:
            hi = max((max(m.variables(), default=-1) for m in self.terms), default=-1)
            if hi >= nvars:
                raise InvalidInput("cannot shrink variable universe below used indices")
        return Poly(self.terms, nvars)

    # -- arithmetic ----------------------------------------------------
    def _check(self, other: "Poly") -> None:
        if self.nvars != other.nvars:
            raise InvalidInput(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly(out, self.nvars)

    def __sub__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) - c
        return Poly(out, self.nvars)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()}, self.nvars)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 * m2
                out[m] = out.get(m, 0.0) + c1 * c2
        return Poly(out, self.nvars)

    def scale(self, c: float) -> "Poly":
        return Poly({m: c * v for m, v in self.terms.items()}, self.nvars)

    def mul_monomial(self, mono: Monomial, coeff: float = 1.0) -> "Poly":
        return Poly({m * mono: c * coeff for m, c in self.terms.items()}, self.nvars)

    def grad(self, var: int) -> "Poly":
        """Exact partial derivative with respect to variable ``var``."""
        if var >= self.nvars:
            raise InvalidInput(f"variable {var} out of range for nvars={self.nvars}")
        out: dict[Monomial, float] = {}
        for m, c in self.terms.items():
            p = m.power(var)
            if p == 0:
                continue
            d = dict(m.exps)
            d[var] = p - 1
            dm = Monomial(d.items())
            out[dm] = out.get(dm, 0.0) + c * p
        return Poly(out, self.nvars)

    def evaluate(self, point: Sequence[float]) -> float:
        return sum(c * m.evaluate(point) for m, c in self.terms.items())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = [f"{c:+g}*{m}" for m, c in sorted(self.terms.items(), key=lambda t: t[0])]
        return " ".join(parts)

    # -- serialization (debug dumps) ------------------------------------
    def to_jsonable(self) -> list[dict]:
        out = []
        for m, c in sorted(self.terms.items(), key=lambda t: t[0]):
            out.append({"exponents": {str(v): p for v, p in m.exps}, "coeff": c})
        return out

    @staticmethod
    def from_jsonable(data: list[dict], nvars: int) -> "Poly":
        terms = {}
        for item in data:
            m = Monomial((int(v), int(p)) for v, p in item["exponents"].items())
            terms[m] = float(item["coeff"])
        return Poly(terms, nvars)

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable())


def degree_and_halfdeg(f: Poly) -> tuple[int, int]:
    """Degree of ``f`` and the half-degree ceil(deg/2) used as localizing order."""
    d = f.degree()
    return d, (d + 1) // 2


def make_basis(var_subset: Iterable[int], d: int) -> list[Monomial]:
    """All monomials over ``var_subset`` with degree <= d, graded-lex ordered.

    The first element is the constant monomial; size is C(n+d, d).
    """
    variables = sorted(set(var_subset))
    if not variables:
        raise InvalidInput("empty variable subset")
    if d < 0:
        raise InvalidInput("negative degree")
    basis: list[Monomial] = []
    for deg in range(d + 1):
        level = []
        for combo in combinations_with_replacement(variables, deg):
            counts: dict[int, int] = {}
            for v in combo:
                counts[v] = counts.get(v, 0) + 1
            m = Monomial(counts.items())
            # Graded lex within a degree: larger power on the earliest
            # variable first, i.e. sort by exponents descending.
            key = tuple(-m.power(v) for v in variables)
            level.append((key, m))
        level.sort(key=lambda t: t[0])
        basis.extend(m for _, m in level)
    return basis


def basis_size(n: int, d: int) -> int:
    return math.comb(n + d, d)


class MomentVector:
    """Pseudo-moment values y_alpha keyed by monomial; y_1 anchors at 1."""

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping[Monomial, float] | None = None):
        self.entries: dict[Monomial, float] = dict(entries) if entries else {}

    def __getitem__(self, m: Monomial) -> float:
        try:
            return self.entries[m]
        except KeyError:
            raise MissingMoment(m) from None

    def __setitem__(self, m: Monomial, v: float) -> None:
        self.entries[m] = float(v)

    def __contains__(self, m: Monomial) -> bool:
        return m in self.entries

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.entries)

    @property
    def y0(self) -> float:
        return self.entries.get(ONE, 0.0)


def apply_Ly(y: MomentVector, f: Poly) -> float:
    """The linearizing functional: f = sum f_a x^a  ->  sum f_a y_a."""
    total = 0.0
    for m, c in f.terms.items():
        total += c * y[m]
    return total
