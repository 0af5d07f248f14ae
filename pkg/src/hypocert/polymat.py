"""Exact matrices over the rationals, the Gaussian rationals and Q(i)[xi].

Entries of a :class:`ConstMatrix` are ``Fraction`` (real data such as A, Ba,
Bs) or :class:`GaussianRational`.  Entries of a :class:`PolyMatrix` are
:class:`Poly`, polynomials in a real indeterminate ``xi`` with coefficients of
either kind.  All objects are immutable.

One fraction-free elimination routine serves both rank over a field and rank
over the polynomial ring (hence over its fraction field), together with the
determinant needed for exceptional-point detection.

>>> A = ConstMatrix.from_rows([[0, 1], [1, 0]])
>>> G = PolyMatrix.linear(A.scale(I_UNIT), ConstMatrix.zeros(2, 2))
>>> (G @ G).eval_at(3)
ConstMatrix([[-9, 0], [0, -9]])
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _Rational
from typing import Callable, Iterable, Sequence

__all__ = [
    "GaussianRational",
    "I_UNIT",
    "Poly",
    "ConstMatrix",
    "PolyMatrix",
    "RealRoot",
    "as_exact",
    "poly_mat_mul",
    "eval_at",
    "rank_const",
    "generic_rank",
    "poly_rank",
    "determinant",
    "exceptional_real_points",
    "real_roots",
    "sturm_sequence",
]


def as_exact(x) -> Fraction | GaussianRational:
    """Coerce ints, Fractions, exact strings and Gaussian rationals.

    Floats are accepted only when they are integral, to keep data exact.
    """
    if isinstance(x, (Fraction, GaussianRational)):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not matrix entries")
    if isinstance(x, (int, _Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float) and x.is_integer():
        return Fraction(int(x))
    if isinstance(x, complex):
        if x.real.is_integer() and x.imag.is_integer():
            return GaussianRational(int(x.real), int(x.imag))
    raise TypeError(f"cannot use {x!r} as an exact entry")


class GaussianRational:
    """Element re + i*im of Q(i)."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @staticmethod
    def _lift(x) -> GaussianRational | None:
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
            return GaussianRational(x, 0)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussianRational((self.re * o.re + self.im * o.im) / d,
                                (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def conjugate(self) -> GaussianRational:
        return GaussianRational(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


I_UNIT = GaussianRational(0, 1)


def _conj(c):
    return c.conjugate() if isinstance(c, GaussianRational) else c


def _is_real(c) -> bool:
    return not isinstance(c, GaussianRational) or c.im == 0


def _real(c) -> Fraction:
    return c.re if isinstance(c, GaussianRational) else Fraction(c)


class Poly:
    """Univariate polynomial; ``coeffs[k]`` multiplies ``xi**k``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_exact(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @classmethod
    def const(cls, c) -> Poly:
        return cls((c,))

    @classmethod
    def monomial(cls, c, k: int) -> Poly:
        return cls([0] * k + [c])

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def lead(self):
        return self.coeffs[-1]

    def valuation(self) -> int | None:
        """Lowest power with nonzero coefficient (None for zero)."""
        for k, c in enumerate(self.coeffs):
            if c != 0:
                return k
        return None

    @staticmethod
    def _lift(x) -> Poly | None:
        if isinstance(x, Poly):
            return x
        try:
            return Poly.const(as_exact(x))
        except TypeError:
            return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        a, b = self.coeffs, o.coeffs
        if len(a) < len(b):
            a, b = b, a
        return Poly([x + y for x, y in zip(a, b)] + list(a[len(b):]))

    __radd__ = __add__

    def __neg__(self):
        return Poly([-c for c in self.coeffs])

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        if not self.coeffs or not o.coeffs:
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            if x == 0:
                continue
            for j, y in enumerate(o.coeffs):
                out[i + j] = out[i + j] + x * y
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self.coeffs == o.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __call__(self, x):
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def conjugate(self) -> Poly:
        """Coefficient-wise conjugate (the conjugate for real ``xi``)."""
        return Poly([_conj(c) for c in self.coeffs])

    def is_real(self) -> bool:
        return all(_is_real(c) for c in self.coeffs)

    def real_part(self) -> Poly:
        return Poly([_real(c) for c in self.coeffs])

    def derivative(self) -> Poly:
        return Poly([k * c for k, c in enumerate(self.coeffs)][1:])

    def divmod(self, other: Poly) -> tuple[Poly, Poly]:
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        q = [Fraction(0)] * max(len(rem) - dq, 0)
        lead = other.lead()
        for k in range(len(rem) - 1, dq - 1, -1):
            c = rem[k]
            if c == 0:
                continue
            f = c / lead
            q[k - dq] = f
            for j, d in enumerate(other.coeffs):
                rem[k - dq + j] = rem[k - dq + j] - f * d
        return Poly(q), Poly(rem[:dq] if dq > 0 else [])

    def exact_div(self, other: Poly) -> Poly:
        q, r = self.divmod(other)
        if not r.is_zero():
            raise ArithmeticError("inexact polynomial division")
        return q

    def monic(self) -> Poly:
        return Poly([c / self.lead() for c in self.coeffs])

    def strip_xi(self) -> tuple[Poly, int]:
        """Split off the largest power of xi: returns (p / xi**k, k)."""
        v = self.valuation()
        if v is None:
            return self, 0
        return Poly(self.coeffs[v:]), v

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            parts.append(_fmt(c) if k == 0 else f"{_fmt(c)}*xi^{k}")
        return " + ".join(parts)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    while not b.is_zero():
        a, b = b, a.divmod(b)[1]
    return a.monic() if not a.is_zero() else a


def squarefree(p: Poly) -> Poly:
    g = poly_gcd(p, p.derivative())
    return p.exact_div(g).monic()


def _fmt(e) -> str:
    return str(e) if isinstance(e, Fraction) else repr(e)


class _Matrix:
    __slots__ = ("rows", "cols", "entries")
    _zero: Callable = staticmethod(lambda: Fraction(0))

    def __init__(self, entries: Sequence[Sequence], rows: int | None = None,
                 cols: int | None = None):
        grid = tuple(tuple(self._coerce(e) for e in row) for row in entries)
        r = len(grid) if rows is None else rows
        c = (len(grid[0]) if grid else 0) if cols is None else cols
        if len(grid) != r or any(len(row) != c for row in grid):
            raise ValueError("ragged or mis-sized matrix grid")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", c)
        object.__setattr__(self, "entries", grid)

    def __setattr__(self, name, value):
        raise AttributeError("matrices are immutable")

    @staticmethod
    def _coerce(e):
        return as_exact(e)

    @classmethod
    def from_rows(cls, rows):
        return cls(rows)

    @classmethod
    def zeros(cls, r: int, c: int):
        return cls([[cls._zero()] * c for _ in range(r)], r, c)

    @classmethod
    def identity(cls, n: int):
        one = cls._coerce(1)
        return cls([[one if i == j else cls._zero() for j in range(n)]
                    for i in range(n)], n, n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.shape == other.shape and self.entries == other.entries

    def __hash__(self):
        return hash((type(self).__name__, self.entries))

    def _same(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other):
        self._same(other)
        return type(self)([[a + b for a, b in zip(r, s)]
                           for r, s in zip(self.entries, other.entries)],
                          self.rows, self.cols)

    def __sub__(self, other):
        self._same(other)
        return type(self)([[a - b for a, b in zip(r, s)]
                           for r, s in zip(self.entries, other.entries)],
                          self.rows, self.cols)

    def __neg__(self):
        return type(self)([[-a for a in r] for r in self.entries],
                          self.rows, self.cols)

    def scale(self, c):
        return type(self)([[c * a for a in r] for r in self.entries],
                          self.rows, self.cols)

    def __matmul__(self, other):
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        cls = PolyMatrix if PolyMatrix in (type(self), type(other)) else ConstMatrix
        cols = list(zip(*other.entries)) if other.rows else [()] * other.cols
        out = []
        for row in self.entries:
            new = []
            for col in cols:
                acc = cls._zero()
                for a, b in zip(row, col):
                    if a != 0 and b != 0:
                        acc = acc + a * b
                new.append(acc)
            out.append(new)
        return cls(out, self.rows, other.cols)

    def transpose(self):
        return type(self)([list(c) for c in zip(*self.entries)]
                          if self.rows else [], self.cols, self.rows)

    @property
    def T(self):
        return self.transpose()

    def conj_transpose(self):
        return type(self)([[_conj(e) if not isinstance(e, Poly) else e.conjugate()
                            for e in c] for c in zip(*self.entries)]
                          if self.rows else [], self.cols, self.rows)

    @property
    def H(self):
        return self.conj_transpose()

    def vstack(self, *others):
        rows = list(self.entries)
        for o in others:
            if o.cols != self.cols:
                raise ValueError("column mismatch in vstack")
            rows.extend(o.entries)
        cls = PolyMatrix if any(isinstance(m, PolyMatrix)
                                for m in (self,) + others) else type(self)
        return cls(rows, len(rows), self.cols)

    def row_block(self, start: int, stop: int):
        return type(self)(self.entries[start:stop], stop - start, self.cols)

    def select_rows(self, idx: Sequence[int]):
        return type(self)([self.entries[i] for i in idx], len(idx), self.cols)

    def is_zero(self) -> bool:
        return all(e == 0 for r in self.entries for e in r)

    def __repr__(self):
        body = ", ".join("[" + ", ".join(_fmt(e) for e in r) + "]"
                         for r in self.entries)
        return f"{type(self).__name__}([{body}])"


class ConstMatrix(_Matrix):
    """Dense matrix with Fraction or GaussianRational entries."""

    __slots__ = ()

    def is_real(self) -> bool:
        return all(_is_real(e) for r in self.entries for e in r)

    def is_symmetric(self) -> bool:
        return self.rows == self.cols and self == self.transpose()

    def is_skew(self) -> bool:
        return self.rows == self.cols and self == -self.transpose()

    def vec(self) -> tuple:
        return tuple(e for r in self.entries for e in r)

    def to_complex(self):
        import numpy as np
        return np.array([[complex(e) for e in r] for r in self.entries],
                        dtype=complex).reshape(self.rows, self.cols)

    def to_float(self):
        import numpy as np
        return np.array([[float(_real(e)) for e in r] for r in self.entries],
                        dtype=float).reshape(self.rows, self.cols)


class PolyMatrix(_Matrix):
    """Dense matrix with :class:`Poly` entries in the real indeterminate xi."""

    __slots__ = ()
    _zero = staticmethod(Poly)

    @staticmethod
    def _coerce(e):
        return e if isinstance(e, Poly) else Poly.const(as_exact(e))

    @classmethod
    def from_const(cls, M: ConstMatrix) -> PolyMatrix:
        return cls([[Poly.const(e) for e in r] for r in M.entries],
                   M.rows, M.cols)

    @classmethod
    def linear(cls, C1: ConstMatrix, C0: ConstMatrix) -> PolyMatrix:
        """The matrix ``xi*C1 + C0``."""
        C1._same(C0)
        return cls([[Poly((b, a)) for a, b in zip(r1, r0)]
                    for r1, r0 in zip(C1.entries, C0.entries)],
                   C1.rows, C1.cols)

    @property
    def degree(self) -> int:
        return max((e.degree for r in self.entries for e in r), default=-1)

    def eval_at(self, xi) -> ConstMatrix:
        x = as_exact(xi)
        return ConstMatrix([[e(x) for e in r] for r in self.entries],
                           self.rows, self.cols)

    def coefficient(self, k: int) -> ConstMatrix:
        """Matrix coefficient of ``xi**k``."""
        return ConstMatrix([[e.coeffs[k] if k < len(e.coeffs) else Fraction(0)
                             for e in r] for r in self.entries],
                           self.rows, self.cols)


def poly_mat_mul(P: PolyMatrix, Q: PolyMatrix) -> PolyMatrix:
    return P @ Q


def eval_at(P: PolyMatrix, xi) -> ConstMatrix:
    return P.eval_at(xi)


# -- fraction-free elimination ------------------------------------------------

def _bareiss(grid: Sequence[Sequence], div: Callable) -> tuple[int, object, int]:
    """Fraction-free row echelon reduction.

    Returns (rank, last pivot, sign of the row permutation).  For a square
    nonsingular input the determinant is ``sign * last pivot``.
    """
    M = [list(r) for r in grid]
    nr = len(M)
    nc = len(M[0]) if nr else 0
    prev = None
    rank = 0
    sign = 1
    for col in range(nc):
        if rank == nr:
            break
        piv = next((i for i in range(rank, nr) if M[i][col] != 0), None)
        if piv is None:
            continue
        if piv != rank:
            M[rank], M[piv] = M[piv], M[rank]
            sign = -sign
        p = M[rank][col]
        for i in range(rank + 1, nr):
            a = M[i][col]
            row_i = M[i]
            row_p = M[rank]
            for j in range(col + 1, nc):
                v = row_i[j] * p - a * row_p[j]
                row_i[j] = v if prev is None else div(v, prev)
            row_i[col] = row_i[col] * 0
        prev = p
        rank += 1
    return rank, prev, sign


def _field_div(a, b):
    return a / b


def _poly_div(a: Poly, b: Poly) -> Poly:
    return a.exact_div(b)


def rank_const(M: ConstMatrix) -> int:
    """Exact rank of a constant matrix.

    >>> rank_const(ConstMatrix.from_rows([[1, 2], [2, 4]]))
    1
    """
    if M.rows == 0 or M.cols == 0:
        return 0
    return _bareiss(M.entries, _field_div)[0]


def poly_rank(M: PolyMatrix) -> int:
    """Rank over the fraction field by fraction-free polynomial elimination."""
    if M.rows == 0 or M.cols == 0:
        return 0
    return _bareiss(M.entries, _poly_div)[0]


def determinant(M: ConstMatrix | PolyMatrix):
    if M.rows != M.cols:
        raise ValueError("determinant of a non-square matrix")
    poly = isinstance(M, PolyMatrix)
    if M.rows == 0:
        return Poly.const(1) if poly else Fraction(1)
    rank, last, sign = _bareiss(M.entries, _poly_div if poly else _field_div)
    if rank < M.rows:
        return Poly() if poly else Fraction(0)
    return last if sign == 1 else -last


def sample_points(count: int = 3, seed: int = 0, bound: int = 10**4) -> list[Fraction]:
    """Distinct nonzero random rationals with |num|, den <= bound."""
    rng = random.Random(seed)
    pts: list[Fraction] = []
    while len(pts) < count:
        x = Fraction(rng.randint(-bound, bound), rng.randint(1, bound))
        if x != 0 and x not in pts:
            pts.append(x)
    return pts


def generic_rank(M: PolyMatrix, seed: int = 0) -> int:
    """Rank of M over the field of rational functions in xi.

    Evaluated at three random rationals; any disagreement between samples
    is settled by exact polynomial elimination.
    """
    ranks = {rank_const(M.eval_at(x)) for x in sample_points(3, seed)}
    if len(ranks) == 1:
        return ranks.pop()
    return poly_rank(M)


# -- real roots -----------------------------------------------------------------

@dataclass(frozen=True)
class RealRoot:
    """A real root of ``poly`` isolated in the closed interval [lo, hi]."""

    poly: tuple
    lo: Fraction
    hi: Fraction

    @property
    def approx(self) -> float:
        return float((self.lo + self.hi) / 2)

    def __str__(self):
        return f"{self.approx:.12g}"


def sturm_sequence(p: Poly) -> list[Poly]:
    seq = [p, p.derivative()]
    while not seq[-1].is_zero():
        seq.append(-(seq[-2].divmod(seq[-1])[1]))
    return seq[:-1]


def _sign_changes(seq: Sequence[Poly], x: Fraction) -> int:
    signs = [s for s in (q(x) for q in seq) if s != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def real_roots(p: Poly, width: Fraction = Fraction(1, 2**40)) -> list[RealRoot]:
    """Isolate the distinct real roots of a real polynomial (Sturm)."""
    if p.is_zero():
        raise ValueError("the zero polynomial has no isolated roots")
    p = squarefree(p.real_part())
    if p.degree < 1:
        return []
    seq = sturm_sequence(p)
    bound = 1 + max(abs(c / p.lead()) for c in p.coeffs[:-1])
    out: list[RealRoot] = []
    stack = [(-bound, bound)]
    while stack:
        lo, hi = stack.pop()
        n = _sign_changes(seq, lo) - _sign_changes(seq, hi)
        if n == 0:
            continue
        if n == 1 and hi - lo <= width:
            out.append(RealRoot(p.coeffs, lo, hi))
            continue
        mid = (lo + hi) / 2
        if p(mid) == 0:
            out.append(RealRoot(p.coeffs, mid, mid))
            # shrink away from the exact root so it is not counted twice
            eps = (hi - lo) / 2**20
            while p(mid - eps) == 0 or p(mid + eps) == 0 or \
                    _sign_changes(seq, mid - eps) - _sign_changes(seq, mid + eps) != 1:
                eps /= 2
            stack.append((lo, mid - eps))
            stack.append((mid + eps, hi))
        else:
            stack.append((lo, mid))
            stack.append((mid, hi))
    return sorted(out, key=lambda r: r.lo)


def _gram_det(M: PolyMatrix) -> Poly:
    d = determinant(M.H @ M)
    if not d.is_real():
        raise ArithmeticError("Gram determinant has non-real coefficients")
    return d.real_part()


def _independent_rows(M: PolyMatrix, seed: int) -> list[int]:
    x = sample_points(1, seed + 1)[0]
    E = M.eval_at(x)
    chosen: list[int] = []
    for i in range(M.rows):
        if rank_const(E.select_rows(chosen + [i])) > len(chosen):
            chosen.append(i)
    return chosen


def exceptional_real_points(M: PolyMatrix, seed: int = 0) -> list[RealRoot]:
    """Real xi != 0 where the full-column-rank M(xi) loses rank.

    det(MᴴM) is the sum of |minor|² over all maximal minors, so its real
    roots are exactly the rank-drop points.  A square row selection that
    reaches full rank must vanish at each of them, which is checked.
    """
    if generic_rank(M, seed) < M.cols:
        raise ValueError("exceptional points need full generic column rank")
    full, _ = _gram_det(M).strip_xi()
    if full.degree < 1:
        return []
    sel = M.select_rows(_independent_rows(M, seed))
    if sel.rows == M.cols:
        d = determinant(sel)
        check = (d * d.conjugate()).real_part()
        # only the real roots are common zeros of every minor
        sq = squarefree(full)
        if len(real_roots(poly_gcd(sq, check))) != len(real_roots(sq)):
            raise ArithmeticError("row-selection cross-check failed")
    return [r for r in real_roots(full) if not (r.lo <= 0 <= r.hi)]
