"""Frequency-pointwise Lyapunov functionals.

A functional is ``1/2 |U|^2 + sum_t eps^p_t w_t(xi) F_t(U)`` where each
term F_t is one of

* ``Re``:   ``Re <P U, Q U>``
* ``ImXi``: ``xi Im <P U, Q U>`` (the Fourier image of a pairing with one dx)

with real matrices P, Q and ``<x, y> = sum x_i conj(y_i)``.  The weight is
``|xi|^xi_power`` times ``sign(xi)^parity``.  Every functional is a Hermitian
quadratic form ``U^H H(xi) U`` and, along ``U' = -G U`` with
``G = i xi A + Ba + Bs``, its derivative is ``-U^H D(xi) U`` where
``D = Bs + sum w_t (G^H K_t + K_t G)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .errors import NotEquivalent, RegimeMismatch
from .kalman import SystemSpec
from .polymat import I_UNIT, ConstMatrix
from .tree import PathReport, Regime, word_label

__all__ = [
    "AdmissibleSequence",
    "Term",
    "TermKind",
    "LyapunovFunctional",
    "admissible_sequence",
    "kalman_eps_powers",
    "synthesize_kalman_functional",
    "synthesize_improved_functional",
    "quadratic_forms",
    "quadratic_forms_mp",
    "weight",
    "evaluate",
    "ddt_evaluate",
    "equivalence_constants",
    "dissipation_rate",
    "choose_epsilon",
    "default_xi_samples",
    "render_text",
    "render_latex",
    "EPS_SWEEP",
]

EPS_SWEEP = tuple(Fraction(1, 2 ** k) for k in range(2, 13))
C1_FLOOR = Fraction(1, 4)
MP_DPS = 60


@dataclass(frozen=True)
class AdmissibleSequence:
    p: tuple[Fraction, ...]
    q: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.p)

    def eps_power(self, k: int) -> Fraction:
        """p_k (1-based)."""
        return self.p[k - 1]


def admissible_sequence(K: int) -> AdmissibleSequence:
    """p_1 = 1, q_1 = 1/2, p_k = p_{k-1} + 3/4 q_{k-1}, q_k = q_{k-1}/2.

    >>> admissible_sequence(3).p
    (Fraction(1, 1), Fraction(11, 8), Fraction(25, 16))
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    p = [Fraction(1)]
    q = [Fraction(1, 2)]
    for _ in range(1, K):
        p.append(p[-1] + Fraction(3, 4) * q[-1])
        q.append(q[-1] / 2)
    for k in range(1, K):
        gap = p[k] - p[k - 1]
        if not (0 < q[k] < gap < q[k - 1]) or p[k] <= 0:
            raise AssertionError(f"admissibility fails at k={k + 1}")
    return AdmissibleSequence(tuple(p), tuple(q))


class TermKind(str, enum.Enum):
    RE = "Re"
    IMXI = "ImXi"


@dataclass(frozen=True)
class Term:
    eps_power: Fraction
    xi_power: int
    left: ConstMatrix
    right: ConstMatrix
    kind: TermKind
    parity: int = 0
    scale: Fraction = Fraction(1)
    left_label: str = "P"
    right_label: str = "Q"

    def kernel(self) -> ConstMatrix:
        """Hermitian K0 with ``F(U) = U^H K0 U`` (the xi factor of ImXi excluded)."""
        PtQ = self.left.T @ self.right
        QtP = PtQ.T
        if self.kind == TermKind.RE:
            return (QtP + PtQ).scale(self.scale / 2)
        return (QtP - PtQ).scale(-I_UNIT * self.scale / 2)

    @cached_property
    def kernel_complex(self) -> np.ndarray:
        return self.kernel().to_complex()

    def xi_factor(self, xi: float):
        """Full frequency factor, including the xi of an ImXi pairing."""
        s = 1 if xi > 0 else -1
        f = abs(xi) ** self.xi_power * (s ** self.parity)
        return f * xi if self.kind == TermKind.IMXI else f


@dataclass(frozen=True)
class LyapunovFunctional:
    regime: Regime
    terms: tuple[Term, ...]
    epsilon: Fraction = Fraction(0)
    source: str = ""
    notes: tuple[str, ...] = ()
    # compact (text, latex) lines replacing the term-by-term display
    display: tuple[tuple[str, str], ...] = ()
    includes_energy: bool = field(default=True, init=False)

    def with_epsilon(self, eps) -> LyapunovFunctional:
        return replace(self, epsilon=Fraction(eps))

    @property
    def n(self) -> int:
        return self.terms[0].left.cols if self.terms else 0


def _check_regime(regime: Regime, xi) -> None:
    if xi == 0:
        raise RegimeMismatch("xi must be nonzero")
    if regime == Regime.HF and abs(xi) < 1:
        raise RegimeMismatch(f"HF functional evaluated at |xi| = {abs(xi)} < 1")
    if regime == Regime.LF and abs(xi) > 1:
        raise RegimeMismatch(f"LF functional evaluated at |xi| = {abs(xi)} > 1")


def weight(regime: Regime | str, xi, exponent) -> float:
    """Decay weight ``|xi|^-2a`` (HF) or ``|xi|^2b`` (LF)."""
    e = float(exponent)
    return abs(float(xi)) ** (-2 * e if Regime(regime) == Regime.HF else 2 * e)


# -- assembly ------------------------------------------------------------------

def _eps_factor(eps: Fraction, power: Fraction) -> float:
    return float(eps) ** float(power) if eps else (1.0 if power == 0 else 0.0)


def quadratic_forms(L: LyapunovFunctional, sys: SystemSpec, xi: float):
    """(H, D) in double precision: ``L = U^H H U`` and ``dL/dt = -U^H D U``."""
    n = sys.n
    G = sys.full_generator(xi)
    H = 0.5 * np.eye(n, dtype=complex)
    D = sys.Bs.to_float().astype(complex)
    for t in L.terms:
        c = _eps_factor(L.epsilon, t.eps_power) * t.xi_factor(float(xi))
        if c == 0:
            continue
        K = c * t.kernel_complex
        H += K
        D += G.conj().T @ K + K @ G
    return H, D


def _mpf(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def _to_mp(M: ConstMatrix) -> mpmath.matrix:
    out = mpmath.matrix(M.rows, M.cols)
    for i, row in enumerate(M.entries):
        for j, e in enumerate(row):
            out[i, j] = mpmath.mpc(_mpf(Fraction(getattr(e, "re", e))),
                                   _mpf(Fraction(getattr(e, "im", 0))))
    return out


def quadratic_forms_mp(L: LyapunovFunctional, sys: SystemSpec, xi, dps: int = MP_DPS):
    """(H, D) as mpmath matrices; xi and the weights are exact up to ``dps``."""
    x = Fraction(xi)
    n = sys.n
    with mpmath.workdps(dps):
        mx = _mpf(x)
        G = _to_mp(sys.Ba + sys.Bs) + mpmath.mpc(0, 1) * mx * _to_mp(sys.A)
        GH = G.transpose_conj()
        H = mpmath.eye(n) * mpmath.mpf(0.5)
        D = _to_mp(sys.Bs)
        for t in L.terms:
            if L.epsilon == 0:
                break
            c = _mpf(L.epsilon) ** _mpf(t.eps_power)
            c *= abs(mx) ** t.xi_power * (1 if x > 0 else -1) ** t.parity
            if t.kind == TermKind.IMXI:
                c *= mx
            K = c * _to_mp(t.kernel())
            H += K
            D += GH * K + K * G
        return H, D


def evaluate(L: LyapunovFunctional, xi: float, U) -> float:
    """Value of the functional at the Fourier state U."""
    _check_regime(L.regime, xi)
    U = np.asarray(U, dtype=complex)
    val = 0.5 * float(np.real(np.vdot(U, U)))
    for t in L.terms:
        c = _eps_factor(L.epsilon, t.eps_power) * t.xi_factor(float(xi))
        if c:
            val += c * float(np.real(np.vdot(U, t.kernel_complex @ U)))
    return val


def ddt_evaluate(L: LyapunovFunctional, sys: SystemSpec, xi: float, U) -> float:
    """Exact time derivative of the functional along the mode equation."""
    _check_regime(L.regime, xi)
    _, D = quadratic_forms(L, sys, xi)
    U = np.asarray(U, dtype=complex)
    return -float(np.real(np.vdot(U, D @ U)))


def _eigs(M: mpmath.matrix) -> list:
    return sorted(mpmath.re(v) for v in mpmath.eigh(M, eigvals_only=True))


def equivalence_constants(L: LyapunovFunctional, xi_samples: Sequence, sys: SystemSpec | None = None,
                          dps: int = MP_DPS) -> tuple[float, float]:
    """min and max eigenvalue of H(xi) over the samples (c1 |U|^2 <= L <= c2 |U|^2)."""
    if sys is None:
        sys = _dummy_system(L)
    lo, hi = None, None
    with mpmath.workdps(dps):
        for xi in xi_samples:
            _check_regime(L.regime, xi)
            H, _ = quadratic_forms_mp(L, sys, xi, dps)
            ev = _eigs(H)
            lo = ev[0] if lo is None else min(lo, ev[0])
            hi = ev[-1] if hi is None else max(hi, ev[-1])
    c1, c2 = float(lo), float(hi)
    if c1 <= 0:
        raise NotEquivalent(f"c1 = {c1:.3g} <= 0; epsilon too large")
    return c1, c2


def _dummy_system(L: LyapunovFunctional) -> SystemSpec:
    # H does not depend on the dynamics; any valid system of the right size works
    n = L.n or 1
    Z = ConstMatrix.zeros(n, n)
    return SystemSpec(Z, Z, ConstMatrix.identity(n))


def dissipation_rate(L: LyapunovFunctional, sys: SystemSpec, xi, dps: int = MP_DPS):
    """Smallest lambda with ``U^H D U >= lambda U^H H U``: the sharp pointwise rate.

    Returns (lambda, eigenvector as a numpy array).
    """
    with mpmath.workdps(dps):
        H, D = quadratic_forms_mp(L, sys, xi, dps)
        C = mpmath.cholesky(H)
        Ci = mpmath.inverse(C)
        S = Ci * D * Ci.transpose_conj()
        S = (S + S.transpose_conj()) / 2
        ev, V = mpmath.eigh(S)
        k = min(range(len(ev)), key=lambda i: mpmath.re(ev[i]))
        v = Ci.transpose_conj() * V[:, k]
        vec = np.array([complex(v[i]) for i in range(sys.n)])
        return float(mpmath.re(ev[k])), vec / np.linalg.norm(vec)


def default_xi_samples(regime: Regime | str, count: int = 10) -> list[Fraction]:
    """HF: xi = 2^1..2^count.  LF: xi = 2^-1/2 .. 2^-count/2 in half-octave steps."""
    if Regime(regime) == Regime.HF:
        return [Fraction(2) ** j for j in range(1, count + 1)]
    return [Fraction(2.0 ** (-j / 2)) for j in range(1, count + 1)]


def _admissible_at(L: LyapunovFunctional, sys: SystemSpec, xi_samples, dps: int) -> bool:
    with mpmath.workdps(dps):
        for xi in xi_samples:
            H, D = quadratic_forms_mp(L, sys, xi, dps)
            if _eigs(H)[0] < _mpf(C1_FLOOR):
                return False
            try:
                mpmath.cholesky((D + D.transpose_conj()) / 2)
            except ValueError:
                return False
    return True


def choose_epsilon(L: LyapunovFunctional, sys: SystemSpec, xi_samples=None,
                   sweep: Sequence[Fraction] = EPS_SWEEP, dps: int = MP_DPS) -> LyapunovFunctional:
    """Largest epsilon in the sweep with c1 >= 1/4 and D positive definite at every sample."""
    if xi_samples is None:
        xi_samples = default_xi_samples(L.regime)
    if not L.terms:
        return L.with_epsilon(sweep[0])
    for eps in sweep:
        cand = L.with_epsilon(eps)
        if _admissible_at(cand, sys, xi_samples, dps):
            return cand
    raise NotEquivalent("no epsilon in the sweep gives an equivalent decreasing functional")


# -- synthesis -----------------------------------------------------------------

def kalman_eps_powers(K: int) -> list[Fraction]:
    """m_k = k - k^2 / (4 K^2), k = 1..K: increasing and strictly concave."""
    return [k - Fraction(k * k, 4 * K * K) for k in range(1, K + 1)]


def _power_coefficients(sys: SystemSpec, k: int) -> list[ConstMatrix]:
    """C_a with ``(i xi A + Ba)^k = sum_a (i xi)^a C_a``, C_a real."""
    n = sys.n
    coeffs = [ConstMatrix.identity(n)]
    for _ in range(k):
        nxt = [ConstMatrix.zeros(n, n) for _ in range(len(coeffs) + 1)]
        for a, C in enumerate(coeffs):
            nxt[a] = nxt[a] + C @ sys.Ba
            nxt[a + 1] = nxt[a + 1] + C @ sys.A
        coeffs = nxt
    return coeffs


def _g_label(k: int) -> str:
    if k == 0:
        return "B^sU"
    if k == 1:
        return "B^s(iξA+B^a)U"
    return f"B^s(iξA+B^a)^{k}U"


def synthesize_kalman_functional(sys: SystemSpec, K: int, regime: Regime | str) -> LyapunovFunctional:
    """Generic functional: ``sum_k eps^m_k |xi|^-2k Re<Bs G^(k-1) U, Bs G^k U>`` (HF weight only).

    Each pairing is expanded in powers of xi with real coefficient matrices;
    ``i^(a-b)`` turns the pieces into Re or Im pairings.
    """
    regime = Regime(regime)
    terms: list[Term] = []
    m = kalman_eps_powers(K) if K >= 1 else []
    for k in range(1, K + 1):
        P = [sys.Bs @ C for C in _power_coefficients(sys, k - 1)]
        Q = [sys.Bs @ C for C in _power_coefficients(sys, k)]
        hf = -2 * k if regime == Regime.HF else 0
        for a, Pa in enumerate(P):
            for b, Qb in enumerate(Q):
                if (Pa.T @ Qb).is_zero():
                    continue
                d = (a - b) % 4
                lbl = (_g_label(k - 1), _g_label(k))
                if d in (0, 2):
                    terms.append(Term(m[k - 1], a + b + hf, Pa, Qb, TermKind.RE,
                                      (a + b) % 2, Fraction(1 if d == 0 else -1), *lbl))
                else:
                    terms.append(Term(m[k - 1], a + b - 1 + hf, Pa, Qb, TermKind.IMXI,
                                      (a + b - 1) % 2, Fraction(-1 if d == 1 else 1), *lbl))
    display = []
    for k in range(1, K + 1):
        e = _frac_text(m[k - 1])
        w_txt = f"·|ξ|^{-2 * k}" if regime == Regime.HF else ""
        w_tex = rf"|\xi|^{{{-2 * k}}}" if regime == Regime.HF else ""
        g1 = "" if k - 1 == 0 else ("(iξA+B^a)" if k - 1 == 1 else f"(iξA+B^a)^{k - 1}")
        g2 = "(iξA+B^a)" if k == 1 else f"(iξA+B^a)^{k}"
        t1 = r"(i\xi A+B^a)" if k - 1 == 1 else (rf"(i\xi A+B^a)^{{{k - 1}}}" if k > 2 else "")
        t2 = r"(i\xi A+B^a)" if k == 1 else rf"(i\xi A+B^a)^{{{k}}}"
        display.append((f"ε^{e}{w_txt}·Re⟨B^s{g1}U, B^s{g2}U⟩",
                        rf"\varepsilon^{{{e}}}{w_tex}\,\mathrm{{Re}}\langle B^s{t1}\widehat U, "
                        rf"B^s{t2}\widehat U\rangle"))
    return LyapunovFunctional(regime, tuple(terms), Fraction(0), f"Kalman(K={K})",
                              display=tuple(display))


def synthesize_improved_functional(report: PathReport,
                                   seq: AdmissibleSequence | None = None) -> LyapunovFunctional:
    """Functional read off a tree path: one term group per chosen node."""
    sys = report.system
    if sys is None:
        raise ValueError("path report carries no system")
    if report.fallback is not None or not report.complete:
        raise ValueError("improved functional needs a complete path without fallback")
    top = max((nd.eps_index for nd in report.nodes), default=1)
    if seq is None:
        seq = admissible_sequence(max(top, 1))
    if len(seq) < top:
        raise ValueError(f"admissible sequence of length {len(seq)} < {top}")
    hf = report.regime == Regime.HF
    A, Ba = sys.A, sys.Ba
    terms: list[Term] = []
    for nd in report.nodes:
        if nd.parent is None:
            continue
        par = report.nodes[nd.parent]
        X, name = par.matrix, word_label(par.word)
        XA, XB = X @ A, X @ Ba
        p = seq.eps_power(nd.eps_index)
        loss = nd.accumulated_loss
        if hf:
            w = -2 * loss if (nd.cancellation and nd.case_tag in ("Right", "MixedRight")) \
                else -2 - 2 * loss
        else:
            w = 2 * loss
        lA, lB = name + "AU", name + "B^aU"
        if nd.case_tag in ("Left", "EitherLeft", "MixedLeft"):
            terms.append(Term(p, w, X, XA, TermKind.IMXI, 0, Fraction(1), name + "U", lA))
        else:
            terms.append(Term(p, w, X, XB, TermKind.RE, 0, Fraction(1), name + "U", lB))
        if nd.case_tag.startswith("Mixed") and nd.m:
            if nd.variant == "Case1":
                terms.append(Term(p, w, XA, XB @ A, TermKind.RE, 0, nd.m, lA,
                                  name + "B^aAU"))
            else:
                terms.append(Term(p, w, XA @ Ba, XB, TermKind.RE, 0, nd.m,
                                  name + "AB^aU", lB))
    return LyapunovFunctional(report.regime, tuple(terms), Fraction(0), "TreeImproved",
                              report.notes)


# -- pretty printing -----------------------------------------------------------

def _frac_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _term_text(t: Term) -> str:
    parts = []
    if abs(t.scale) != 1:
        parts.append(_frac_text(abs(t.scale)))
    if t.eps_power:
        parts.append("ε" if t.eps_power == 1 else f"ε^{_frac_text(t.eps_power)}")
    if t.xi_power:
        parts.append(f"|ξ|^{t.xi_power}")
    if t.parity:
        parts.append("sgn(ξ)")
    coef = "·".join(parts) if parts else "1"
    if t.kind == TermKind.RE:
        body = f"Re⟨{t.left_label}, {t.right_label}⟩"
    else:
        body = f"Im⟨{t.left_label}, ξ{t.right_label}⟩"
    return f"{coef}·{body}"


def render_text(L: LyapunovFunctional) -> str:
    """Plain-text display, one term per line after the energy."""
    if L.display:
        return "\n".join(["½|U|²"] + ["+ " + d[0] for d in L.display])
    lines = ["½|U|²"] + [("- " if t.scale < 0 else "+ ") + _term_text(t) for t in L.terms]
    return "\n".join(lines)


def _tex_label(s: str) -> str:
    return s.replace("U", r"\widehat U").replace("ξ", r"\xi ")


def _term_latex(t: Term) -> str:
    parts = []
    if abs(t.scale) != 1:
        s = abs(t.scale)
        parts.append(str(s.numerator) if s.denominator == 1 else
                     rf"\tfrac{{{s.numerator}}}{{{s.denominator}}}")
    if t.eps_power:
        parts.append(r"\varepsilon" if t.eps_power == 1 else
                     rf"\varepsilon^{{{_frac_text(t.eps_power)}}}")
    if t.xi_power:
        parts.append(rf"|\xi|^{{{t.xi_power}}}")
    if t.parity:
        parts.append(r"\operatorname{sgn}\xi")
    coef = " ".join(parts)
    l, r = _tex_label(t.left_label), _tex_label(t.right_label)
    if t.kind == TermKind.RE:
        body = rf"\mathrm{{Re}}\langle {l}, {r}\rangle"
    else:
        body = rf"\mathrm{{Im}}\langle {l}, \xi {r}\rangle"
    return f"{coef} {body}".strip()


def render_latex(L: LyapunovFunctional) -> str:
    out = r"\tfrac12|\widehat U|^2"
    if L.display:
        return out + "".join(" + " + d[1] for d in L.display)
    for t in L.terms:
        out += (" - " if t.scale < 0 else " + ") + _term_latex(t)
    return out
