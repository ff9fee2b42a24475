"""Exact scalars and sparse exact linear algebra.

Vectors are sparse ``dict`` objects mapping a column key to a nonzero
scalar. Column keys only need to be mutually comparable; elimination
pivots on the smallest key, so the pivot order follows the caller's basis
order.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

Vector = Dict[Hashable, object]


def as_fraction(value) -> Fraction:
    """Parse ``"p/q"``, ints, or Fractions into a Fraction.

    Floats are rejected so inexact input cannot leak into exact code paths.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed rational {value!r}") from exc
    if isinstance(value, QuadraticNumber):
        if value.b == 0:
            return value.a
        raise ValueError(f"{value} is irrational")
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def fraction_str(value: Fraction) -> str:
    """Canonical ``"p/q"`` form; integers keep the ``/1`` denominator."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def squarefree_split(n: int) -> Tuple[int, int]:
    """Return ``(s, d)`` with ``n = s*s*d`` and ``d`` squarefree (sign kept in d)."""
    if n == 0:
        return 0, 0
    sign = -1 if n < 0 else 1
    n = abs(n)
    s, d = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            d *= p
        p += 1
    d *= n
    return s, sign * d


def exact_sqrt(value, allow_complex: bool = False):
    """Square root of a rational, as a Fraction when possible.

    Irrational roots come back as a :class:`QuadraticNumber` in Q(sqrt(d)).
    Negative input needs ``allow_complex`` (then ``d < 0``).
    """
    q = as_fraction(value)
    if q == 0:
        return Fraction(0)
    if q < 0 and not allow_complex:
        raise ValueError(f"sqrt of negative rational {q} is not real")
    # sqrt(p/q) = sqrt(p*q)/q
    s, d = squarefree_split(q.numerator * q.denominator)
    if d == 1:
        return Fraction(s, q.denominator)
    return QuadraticNumber(0, Fraction(s, q.denominator), d)


class QuadraticNumber:
    """Element ``a + b*sqrt(d)`` of a quadratic field, ``d`` squarefree, ``d != 1``.

    Mixing with Fractions and ints is allowed; mixing two different ``d`` is not.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d: int):
        if d == 1 or d == 0:
            raise ValueError("d must be squarefree and different from 0, 1")
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.d = int(d)

    def _coerce(self, other):
        if isinstance(other, QuadraticNumber):
            if other.d != self.d:
                raise ValueError(f"mixed quadratic fields sqrt({self.d}) and sqrt({other.d})")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadraticNumber(other, 0, self.d)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadraticNumber(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadraticNumber(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadraticNumber(
            self.a * o.a + self.b * o.b * self.d, self.a * o.b + self.b * o.a, self.d
        )

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        return self.a * self.a - self.d * self.b * self.b

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self.a, -self.b, self.d)

    def inverse(self) -> "QuadraticNumber":
        nrm = self.norm()
        if nrm == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        return QuadraticNumber(self.a / nrm, -self.b / nrm, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o * self.inverse()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.b == 0 and self.a == other
        if isinstance(other, QuadraticNumber):
            return (self.a, self.b, self.d) == (other.a, other.b, other.d)
        return NotImplemented

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        if self.d < 0:
            if self.b != 0:
                raise TypeError("complex quadratic number has no float value")
            return float(self.a)
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __complex__(self):
        return complex(float(self.a), 0.0) + float(self.b) * complex(0.0, math.sqrt(-self.d)) \
            if self.d < 0 else complex(float(self))

    def __repr__(self):
        return f"QuadraticNumber({self.a}, {self.b}, {self.d})"

    def __str__(self):
        return f"{self.a} + {self.b}*sqrt({self.d})"


def height(value) -> Fraction:
    """Exact size of a scalar: ``|c|`` for rationals, ``max(|a|, |b|)`` in Q(sqrt d).

    Zero exactly when the scalar is zero; used for exact residuals.
    """
    if isinstance(value, QuadraticNumber):
        return max(abs(value.a), abs(value.b))
    return abs(Fraction(value))


def to_json_scalar(value):
    """Rationals as ``"p/q"``, quadratic numbers as ``{"a","b","d"}``."""
    if isinstance(value, QuadraticNumber):
        return {"a": fraction_str(value.a), "b": fraction_str(value.b), "d": value.d}
    return fraction_str(Fraction(value))


# ---------------------------------------------------------------------------
# sparse vectors
# ---------------------------------------------------------------------------


def vec_axpy(y: Vector, alpha, x: Mapping) -> None:
    """In place ``y += alpha * x`` dropping exact zeros."""
    for k, v in x.items():
        s = y.get(k, 0) + alpha * v
        if s:
            y[k] = s
        else:
            y.pop(k, None)


def vec_scale(x: Mapping, alpha) -> Vector:
    if not alpha:
        return {}
    return {k: alpha * v for k, v in x.items()}


class Echelon:
    """Incremental Gauss-Jordan elimination over an exact field.

    Rows are inserted one at a time; each stored row has a leading 1 at its
    pivot (its smallest key) and, with ``reduced=True``, zeros in every other
    pivot column. Rows in disjoint column blocks never interact, so a block
    diagonal matrix is eliminated block by block for free.
    """

    def __init__(self, reduced: bool = True):
        self.reduced = reduced
        self.rows: Dict[Hashable, Vector] = {}
        # column -> pivots whose rows contain that column (only kept when reduced)
        self._occ: Dict[Hashable, set] = {}

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def pivots(self) -> List[Hashable]:
        return sorted(self.rows)

    def reduce(self, vec: Mapping) -> Vector:
        """Remainder of ``vec`` after elimination against the stored rows."""
        r = dict(vec)
        if self.reduced:
            for c in [c for c in r if c in self.rows]:
                coef = r.get(c)
                if coef:
                    vec_axpy(r, -coef, self.rows[c])
            return r
        while True:
            hits = [c for c in r if c in self.rows]
            if not hits:
                return r
            c = min(hits)
            vec_axpy(r, -r[c], self.rows[c])

    def insert(self, vec: Mapping) -> Optional[Vector]:
        """Add a row; returns the normalized new row or ``None`` if dependent."""
        r = self.reduce(vec)
        if not r:
            return None
        piv = min(r)
        inv = 1 / r[piv] if not isinstance(r[piv], int) else Fraction(1, r[piv])
        r = {k: v * inv for k, v in r.items()}
        if self.reduced:
            for other in list(self._occ.get(piv, ())):
                row = self.rows[other]
                coef = row[piv]
                for k in row:
                    self._occ.setdefault(k, set()).discard(other)
                vec_axpy(row, -coef, r)
                for k in row:
                    self._occ.setdefault(k, set()).add(other)
            for k in r:
                if k != piv:
                    self._occ.setdefault(k, set()).add(piv)
        self.rows[piv] = r
        return r

    def contains(self, vec: Mapping) -> bool:
        return not self.reduce(vec)

    def nullspace(self, columns: Sequence[Hashable]) -> List[Vector]:
        """Basis of ``{v : row . v = 0 for all rows}`` over the given columns.

        Requires ``reduced=True``. One vector per free column, in column order.
        """
        if not self.reduced:
            raise ValueError("nullspace needs a reduced echelon form")
        basis = []
        for f in columns:
            if f in self.rows:
                continue
            v = {f: Fraction(1)}
            for p in self._occ.get(f, ()):
                v[p] = -self.rows[p][f]
            basis.append(v)
        return basis


def rank(rows: Iterable[Mapping]) -> int:
    ech = Echelon(reduced=False)
    for r in rows:
        ech.insert(r)
    return ech.rank


def nullspace(rows: Iterable[Mapping], columns: Sequence[Hashable]) -> List[Vector]:
    ech = Echelon(reduced=True)
    for r in rows:
        ech.insert(r)
    return ech.nullspace(columns)


def transpose(rows: Mapping[Hashable, Mapping]) -> Dict[Hashable, Vector]:
    """Transpose a dict-of-rows sparse matrix."""
    out: Dict[Hashable, Vector] = {}
    for i, row in rows.items():
        for j, v in row.items():
            out.setdefault(j, {})[i] = v
    return out


def dense_rank_float(matrix, rel_tol: float) -> int:
    """Numerical rank: singular values above ``rel_tol * max singular value``."""
    import numpy as np

    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
