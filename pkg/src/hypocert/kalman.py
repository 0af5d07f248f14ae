"""Kalman stack, the inhomogeneous Kalman condition and the exponents alpha, beta.

For the Fourier-mode system ``U' = -(i xi A + Ba + Bs) U`` the stack of order
K is the (K+1)n x n polynomial matrix with blocks ``Bs (i xi A + Ba)^k``.
The condition of order K holds when this stack has rank n at every real
``xi != 0``.

The exponents are read off the smallest singular value:

* ``alpha``: ``sigma_min(W(xi)) ~ xi^-alpha`` as ``xi -> oo`` where W stacks
  ``|xi|^-k Bs (i xi A + Ba)^k``;
* ``beta``: ``sigma_min(M(xi)) ~ xi^beta`` as ``xi -> 0``.

W is handled as a polynomial matrix in ``t = 1/xi``:
``|xi|^-k (i xi A + Ba)^k = (i A + t Ba)^k`` for ``xi > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Sequence

import numpy as np

from . import verify
from .errors import InvalidSystem, NonIntegerSlope
from .polymat import (I_UNIT, ConstMatrix, PolyMatrix, RealRoot, determinant,
                      exceptional_real_points, generic_rank, rank_const)

__all__ = [
    "SystemSpec",
    "KalmanCertificate",
    "ExponentEstimate",
    "build_kalman_stack",
    "build_weighted_stack",
    "check_kalman",
    "estimate_alpha",
    "estimate_beta",
    "kalman_certificate",
    "newton_exponent",
    "is_psd",
    "SLOPE_TOL",
]

SLOPE_TOL = 0.15
HF_EXPONENTS = tuple(range(6, 21))
LF_EXPONENTS = tuple(range(6, 21))
FIT_POINTS = 8


def is_psd(M: ConstMatrix) -> bool:
    """Exact positive-semidefiniteness test for a real symmetric matrix.

    Symmetric elimination on Fractions: a negative pivot, or a zero pivot
    with a nonzero row, rules out PSD.

    >>> is_psd(ConstMatrix.from_rows([[1, 1], [1, 1]]))
    True
    >>> is_psd(ConstMatrix.from_rows([[0, 1], [1, 0]]))
    False
    """
    S = [list(r) for r in M.entries]
    n = len(S)
    alive = list(range(n))
    while alive:
        k = alive.pop(0)
        d = S[k][k]
        if d < 0:
            return False
        if d == 0:
            if any(S[k][j] != 0 for j in alive):
                return False
            continue
        for i in alive:
            f = S[i][k] / d
            if f:
                for j in alive:
                    S[i][j] -= f * S[k][j]
    return True


@dataclass(frozen=True)
class SystemSpec:
    """The triple (A, Ba, Bs) of a partially dissipative system.

    A symmetric, Ba skew-symmetric, Bs symmetric positive semidefinite and
    nonzero; all entries exact rationals.
    """

    A: ConstMatrix
    Ba: ConstMatrix
    Bs: ConstMatrix
    label: str = ""

    def __post_init__(self):
        n = self.A.rows
        for name, M in (("A", self.A), ("Ba", self.Ba), ("Bs", self.Bs)):
            if M.shape != (n, n):
                raise InvalidSystem(f"{name} has shape {M.shape}, expected {(n, n)}")
            if not M.is_real():
                raise InvalidSystem(f"{name} must be real")
        _require(self.A, lambda i, j: self.A[i, j] == self.A[j, i], "A", "symmetric")
        _require(self.Ba, lambda i, j: self.Ba[i, j] == -self.Ba[j, i], "Ba",
                 "skew-symmetric")
        _require(self.Bs, lambda i, j: self.Bs[i, j] == self.Bs[j, i], "Bs", "symmetric")
        if self.Bs.is_zero():
            raise InvalidSystem("Bs must be nonzero")
        if not is_psd(self.Bs):
            raise InvalidSystem("Bs must be positive semidefinite")
        if n > 64:
            raise InvalidSystem("dimension above 64 is not supported")

    @classmethod
    def from_rows(cls, A, Ba, Bs, label: str = "") -> SystemSpec:
        return cls(ConstMatrix.from_rows(A), ConstMatrix.from_rows(Ba),
                   ConstMatrix.from_rows(Bs), label)

    @property
    def n(self) -> int:
        return self.A.rows

    @cached_property
    def kappa(self) -> float:
        """Smallest positive eigenvalue of Bs (the damping of its range)."""
        ev = np.linalg.eigvalsh(self.Bs.to_float())
        r = rank_const(self.Bs)
        return float(np.sort(ev)[-r])

    @property
    def generator(self) -> PolyMatrix:
        """``i xi A + Ba`` as a polynomial matrix."""
        return PolyMatrix.linear(self.A.scale(I_UNIT), self.Ba)

    def full_generator(self, xi) -> np.ndarray:
        """Dense ``i xi A + Ba + Bs`` in double precision."""
        return 1j * float(xi) * self.A.to_float() + self.Ba.to_float() + self.Bs.to_float()


def _require(M: ConstMatrix, ok, name: str, what: str) -> None:
    for i in range(M.rows):
        for j in range(i, M.cols):
            if not ok(i, j):
                raise InvalidSystem(
                    f"{name} is not {what}: {name}[{i}][{j}] = {M[i, j]} "
                    f"but {name}[{j}][{i}] = {M[j, i]}")


def _stack(Bs: ConstMatrix, G: PolyMatrix, K: int) -> PolyMatrix:
    block = PolyMatrix.from_const(Bs)
    blocks = [block]
    for _ in range(K):
        block = block @ G
        blocks.append(block)
    return blocks[0].vstack(*blocks[1:])


def build_kalman_stack(sys: SystemSpec, K: int) -> PolyMatrix:
    """Blocks ``Bs (i xi A + Ba)^k`` for k = 0..K, stacked by rows."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    return _stack(sys.Bs, sys.generator, K)


def build_weighted_stack(sys: SystemSpec, K: int) -> PolyMatrix:
    """Blocks ``Bs (i A + t Ba)^k`` in ``t = 1/xi`` (the HF weighted stack)."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    G = PolyMatrix.linear(sys.Ba, sys.A.scale(I_UNIT))
    return _stack(sys.Bs, G, K)


@dataclass(frozen=True)
class ExponentEstimate:
    value: int
    fit: verify.SlopeFit
    samples: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class KalmanCertificate:
    holds: bool
    K: int | None
    generic_ranks: tuple[int, ...]
    exceptional_points: tuple[RealRoot, ...] = ()
    alpha: int | None = None
    beta: int | None = None
    fit_diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "K": self.K,
            "generic_ranks": list(self.generic_ranks),
            "exceptional_points": [str(r) for r in self.exceptional_points],
            "alpha": self.alpha,
            "beta": self.beta,
            "fit_diagnostics": self.fit_diagnostics,
        }


def check_kalman(sys: SystemSpec, kmax: int | None = None) -> KalmanCertificate:
    """Smallest order K <= kmax at which the condition holds at every xi != 0."""
    kmax = sys.n - 1 if kmax is None else kmax
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    ranks: list[int] = []
    exceptional: list[RealRoot] = []
    for K in range(kmax + 1):
        M = build_kalman_stack(sys, K)
        r = generic_rank(M)
        ranks.append(r)
        if r < sys.n:
            continue
        exceptional = exceptional_real_points(M)
        if not exceptional:
            return KalmanCertificate(True, K, tuple(ranks))
    return KalmanCertificate(False, None, tuple(ranks), tuple(exceptional))


def _fit_exponent(M: PolyMatrix, eval_points: Sequence[Fraction], log_xi: Sequence[float],
                  sign: int, what: str) -> ExponentEstimate:
    ys = [verify.smin_oracle(M, x) for x in eval_points]
    fit = verify.slope_fit(log_xi, [float(np.log2(y)) for y in ys], last=FIT_POINTS)
    val = sign * fit.slope
    k = round(val)
    if abs(val - k) > SLOPE_TOL:
        raise NonIntegerSlope(fit.slope, what)
    samples = tuple((2.0 ** lx, y) for lx, y in zip(log_xi, ys))
    return ExponentEstimate(max(int(k), 0), fit, samples)


def estimate_alpha(sys: SystemSpec, K: int,
                   exponents: Sequence[int] = HF_EXPONENTS) -> ExponentEstimate:
    """alpha = -slope of log2 sigma_min(W(xi)) against log2 xi, xi = 2^j."""
    W = build_weighted_stack(sys, K)
    t = [Fraction(1, 2 ** j) for j in exponents]
    return _fit_exponent(W, t, [float(j) for j in exponents], -1, "HF sigma_min slope")


def estimate_beta(sys: SystemSpec, K: int,
                  exponents: Sequence[int] = LF_EXPONENTS) -> ExponentEstimate:
    """beta = slope of log2 sigma_min(M(xi)) against log2 xi, xi = 2^-j."""
    M = build_kalman_stack(sys, K)
    xi = [Fraction(1, 2 ** j) for j in exponents]
    return _fit_exponent(M, xi, [-float(j) for j in exponents], 1, "LF sigma_min slope")


def kalman_certificate(sys: SystemSpec, kmax: int | None = None) -> KalmanCertificate:
    """check_kalman followed by both exponent fits when the condition holds."""
    cert = check_kalman(sys, kmax)
    if not cert.holds:
        return cert
    a = estimate_alpha(sys, cert.K)
    b = estimate_beta(sys, cert.K)
    diag = {
        "alpha_slope": a.fit.slope, "alpha_max_residual": a.fit.max_residual,
        "beta_slope": b.fit.slope, "beta_max_residual": b.fit.max_residual,
    }
    return KalmanCertificate(True, cert.K, cert.generic_ranks, (), a.value, b.value, diag)


def newton_exponent(M: PolyMatrix) -> Fraction:
    """Exponent v with ``sigma_min(M(s)) ~ s^v`` as ``s -> 0``, symbolically.

    Newton polygon of ``det(M^H M - x I)`` in x: the coefficient of ``x^i``
    is, up to sign, the sum of principal minors of size ``n - i``.  Intended
    as a cross-check for small n (it enumerates all 2^n principal minors).
    """
    H = M.H @ M
    n = H.rows
    orders: dict[int, int] = {n: 0}
    for size in range(1, n + 1):
        e = None
        for idx in combinations(range(n), size):
            sub = H.select_rows(idx).transpose().select_rows(idx).transpose()
            d = determinant(sub)
            e = d if e is None else e + d
        v = e.valuation()
        if v is not None:
            orders[n - size] = v
    if 0 not in orders:
        raise ValueError("M does not have full column rank")
    c0 = orders[0]
    best = max(Fraction(c0 - v, i) for i, v in orders.items() if i >= 1)
    return best / 2
