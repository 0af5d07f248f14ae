"""Binary-tree path selection for the improved Lyapunov functionals.

Nodes are matrices ``X = Bs W`` where W is a word in the letters A (left
child) and Ba (right child).  Starting from ``Bs``, every chosen node is
examined once, level by level and leftmost first; its children are added
when they increase the rank of the stacked node matrices.

Each node carries

* ``discrepancy``: 0 or 1, added to the loss of its children;
* ``accumulated_loss``: the sum of discrepancies along the ancestry
  (alpha_k in HF, beta_k in LF);
* ``weighted``: whether the norm recovered at the node carries an extra
  frequency weight, in which case its exponent is ``loss + 1``.

Pairings vanish identically by integration by parts:
``(P dx U, Q U) = 0`` for all U iff ``P^T Q`` is symmetric.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .errors import KalmanViolated, NoSolution, NotRankOne
from .kalman import SystemSpec
from .polymat import ConstMatrix, rank_const

__all__ = [
    "Regime",
    "Case",
    "Node",
    "MixedRecord",
    "PathReport",
    "DecayCertificate",
    "MixingCoefficient",
    "classify_node",
    "span_coefficients",
    "solve_mixing_coefficient",
    "check_cancellation",
    "pairing_matrix",
    "run_tree",
    "certificate_from_path",
    "without_cancellations",
    "rank_one_fast_path",
    "word_matrix",
    "word_label",
]


class Regime(str, enum.Enum):
    HF = "HF"
    LF = "LF"


class Case(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    BOTH = "Both"
    EITHER = "Either"
    STOP = "Stop"


A_LETTER = "A"
B_LETTER = "Ba"


def word_matrix(sys: SystemSpec, word: Sequence[str]) -> ConstMatrix:
    """Product of the letters of ``word`` (identity for the empty word)."""
    W = ConstMatrix.identity(sys.n)
    for letter in word:
        W = W @ (sys.A if letter == A_LETTER else sys.Ba)
    return W


def word_label(word: Sequence[str]) -> str:
    """Readable node name, e.g. ('Ba', 'A') -> 'B^sB^aA', ('A', 'A') -> 'B^sA^2'."""
    out = "B^s"
    i = 0
    while i < len(word):
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        name = "A" if word[i] == A_LETTER else "B^a"
        power = j - i
        if power == 1:
            out += name
        elif name == "A":
            out += f"A^{power}"
        else:
            out += f"(B^a)^{power}"
        i = j
    return out


@dataclass(frozen=True)
class Node:
    word: tuple[str, ...]
    matrix: ConstMatrix
    level: int
    discrepancy: int
    case_tag: str
    cancellation: bool
    accumulated_loss: int
    weighted: bool = False
    eps_index: int = 0
    parent: int | None = None
    variant: str | None = None
    m: Fraction | None = None

    @property
    def label(self) -> str:
        return word_label(self.word)

    @property
    def gamma(self) -> int:
        """Exponent of the frequency weight on the recovered norm."""
        return self.accumulated_loss + (1 if self.weighted else 0)


@dataclass(frozen=True)
class MixedRecord:
    parent: str
    m: Fraction
    assumption_set: str
    cancellation: bool
    m_free: bool = False
    condition: str = ""


@dataclass(frozen=True)
class PathReport:
    regime: Regime
    nodes: tuple[Node, ...]
    final_rank: int
    complete: bool
    mixed_data: tuple[MixedRecord, ...] = ()
    fallback: str | None = None
    notes: tuple[str, ...] = ()
    system: SystemSpec | None = field(default=None, repr=False, compare=False)

    @property
    def words(self) -> list[tuple[str, ...]]:
        return [nd.word for nd in self.nodes]

    def labels(self) -> list[str]:
        return [nd.label for nd in self.nodes]


@dataclass(frozen=True)
class DecayCertificate:
    regime: Regime
    exponent: int
    provenance: str
    exponent_per_node: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MixingCoefficient:
    m: Fraction
    free: bool = False


# -- exact linear algebra helpers -------------------------------------------

def _rank(mats: Sequence[ConstMatrix]) -> int:
    return rank_const(mats[0].vstack(*mats[1:]))


def span_coefficients(X: ConstMatrix, basis: Sequence[ConstMatrix]) -> tuple | None:
    """Coefficients c with ``X = sum c_i basis_i`` as matrices, or None.

    Solved exactly on the vectorized matrices; free coefficients are set to 0.
    """
    if not basis:
        return () if X.is_zero() else None
    cols = [B.vec() for B in basis]
    target = X.vec()
    rows = [[c[r] for c in cols] + [target[r]] for r in range(len(target))]
    nb = len(basis)
    pivots: list[int] = []
    rank = 0
    for col in range(nb):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank][col]
        rows[rank] = [v / p for v in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        pivots.append(col)
        rank += 1
    if any(rows[i][nb] != 0 for i in range(rank, len(rows))):
        return None
    coeffs = [Fraction(0)] * nb
    for i, col in enumerate(pivots):
        coeffs[col] = rows[i][nb]
    return tuple(coeffs)


def _in_span(X: ConstMatrix, basis: Sequence[ConstMatrix]) -> bool:
    return span_coefficients(X, basis) is not None


def _skew(M: ConstMatrix) -> ConstMatrix:
    return M - M.T


def pairing_matrix(P: ConstMatrix, Q: ConstMatrix) -> ConstMatrix:
    """``P^T Q``: the pairing ``(P dx U, Q U)`` vanishes iff it is symmetric."""
    return P.T @ Q


def _solve_scalar(S1: ConstMatrix, S0: ConstMatrix) -> MixingCoefficient:
    """m with ``Skew(m S1 - S0) = 0``: exact least squares plus residual check."""
    s1 = _skew(S1).vec()
    s0 = _skew(S0).vec()
    nrm = sum(x * x for x in s1)
    if nrm == 0:
        if all(x == 0 for x in s0):
            return MixingCoefficient(Fraction(0), free=True)
        raise NoSolution("pairing condition cannot hold for any m")
    m = sum(a * b for a, b in zip(s0, s1)) / nrm
    if any(m * a != b for a, b in zip(s1, s0)):
        raise NoSolution("no m makes the pairing vanish identically")
    return MixingCoefficient(m)


def _mixing_terms(X: ConstMatrix, sys: SystemSpec, condition: str):
    """(S1, S0) with the pairing matrix equal to ``m S1 - S0``."""
    A, Ba = sys.A, sys.Ba
    XA = X @ A
    XB = X @ Ba
    if condition == "cancellation11":
        # (XA dx U, -XBa U + m XBa A^2 U)
        return pairing_matrix(XA, XB @ A @ A), pairing_matrix(XA, XB)
    if condition == "cancellation12":
        # (m XA Ba A dx U - XA dx U, XBa U)
        return pairing_matrix(XA @ Ba @ A, XB), pairing_matrix(XA, XB)
    if condition == "cancellation21":
        # (X U - m X A^2 U, XBa A dx U); transpose of a dx-first pairing
        Q = XB @ A
        return -pairing_matrix(Q, X @ A @ A), -pairing_matrix(Q, X)
    if condition == "cancellation22":
        Q = XB @ A
        return -pairing_matrix(Q, XA @ Ba), -pairing_matrix(Q, X)
    raise ValueError(f"unknown condition {condition!r}")


def _pairing_at(X: ConstMatrix, m, sys: SystemSpec, condition: str) -> ConstMatrix:
    if condition == "right":
        XA, XB = X @ sys.A, X @ sys.Ba
        return pairing_matrix(XA, XB) + pairing_matrix(XB @ sys.A, X)
    S1, S0 = _mixing_terms(X, sys, condition)
    return S1.scale(Fraction(m)) - S0


_VARIANT_CONDITION = {"Case1": "cancellation11", "Case2": "cancellation12"}
_CANCEL_CONDITION = {"Case1": "cancellation21", "Case2": "cancellation22", "Right": "right"}


def solve_mixing_coefficient(X: ConstMatrix, sys: SystemSpec, variant: str) -> MixingCoefficient:
    """Mixing coefficient m of the mixed case (Case1 or Case2).

    ``free=True`` flags an identically vanishing equation (any m works).
    Raises NoSolution when no m exists.
    """
    S1, S0 = _mixing_terms(X, sys, _VARIANT_CONDITION[variant])
    return _solve_scalar(S1, S0)


def check_cancellation(X: ConstMatrix, m, sys: SystemSpec, variant: str) -> bool:
    """Whether the cancellation pairing of ``variant`` vanishes identically."""
    return _pairing_at(X, 0 if m is None else m, sys, _CANCEL_CONDITION[variant]).is_symmetric()


def classify_node(stack: Sequence[ConstMatrix], X: ConstMatrix, sys: SystemSpec,
                  regime: Regime | str = Regime.HF) -> Case:
    """Rank-based case of node X given the stacked chosen nodes.

    Tested in the order Stop, Either, Both, Left, Right.  When both children
    grow the rank, the B^a-child adds nothing beyond the A-child and the two
    ranks differ, the A-child is taken (Left).
    """
    XA, XB = X @ sys.A, X @ sys.Ba
    r = _rank(list(stack))
    rA = _rank(list(stack) + [XA])
    rB = _rank(list(stack) + [XB])
    rAB = _rank(list(stack) + [XA, XB])
    if rA == r and rB == r:
        return Case.STOP
    if rA > r and rB > r and rAB == rA == rB:
        return Case.EITHER
    if rA > r and rAB > rA:
        return Case.BOTH
    if rA > r:
        return Case.LEFT
    return Case.RIGHT


# -- discrepancy rules ------------------------------------------------------

def _rule(regime: Regime, tag: str, variant: str | None, cancelled: bool) -> tuple[int, bool]:
    """(discrepancy, weighted) of a node created with ``tag``."""
    if regime == Regime.LF:
        if tag in ("Left", "EitherLeft"):
            return 1, True
        return 0, False
    if tag in ("Left", "EitherLeft"):
        return 0, False
    if tag in ("Right", "EitherRight"):
        return (0, False) if cancelled else (1, True)
    if tag == "MixedLeft":
        if variant == "Case1":
            return (0, False) if cancelled else (1, False)
        return 0, False
    if tag == "MixedRight":
        if variant == "Case1":
            return (0, False) if cancelled else (1, True)
        return 0, not cancelled
    raise ValueError(f"unknown tag {tag!r}")


def _eps_step(tag: str, cancelled: bool) -> int:
    return 2 if tag == "MixedRight" and cancelled else 1


def _rebuild(nodes: Sequence[Node], regime: Regime, allow_cancellation: bool) -> tuple[Node, ...]:
    out: list[Node] = []
    for nd in nodes:
        if nd.parent is None:
            out.append(nd)
            continue
        par = out[nd.parent]
        canc = nd.cancellation and allow_cancellation
        delta, weighted = _rule(regime, nd.case_tag, nd.variant, canc)
        out.append(replace(
            nd, discrepancy=delta, weighted=weighted, cancellation=canc,
            accumulated_loss=par.accumulated_loss + par.discrepancy,
            eps_index=par.eps_index + _eps_step(nd.case_tag, canc)))
    return tuple(out)


def _try_mixed(stack, X, sys) -> tuple[str, MixingCoefficient, bool, str] | None:
    """First mixed variant whose assumptions hold: (variant, m, cancelled, note)."""
    A, Ba = sys.A, sys.Ba
    XA, XB = X @ A, X @ Ba
    # Case1: the A-child is a dead end
    if _in_span(XA @ A, stack) and _in_span(XA @ Ba, stack):
        try:
            mc = solve_mixing_coefficient(X, sys, "Case1")
        except NoSolution:
            mc = None
        if mc is not None and _in_span(XB @ A @ Ba, list(stack) + [XB @ A, XB]):
            cond = _in_span(XB @ Ba, list(stack) + [XA, XB])
            mc, note = _settle_free(mc, X, sys, "cancellation21", cond)
            canc = cond and check_cancellation(X, mc.m, sys, "Case1")
            return "Case1", mc, canc, note
    # Case2: the B^a-child is a dead end
    if _in_span(XB @ Ba, stack) and _in_span(XB @ A, stack):
        try:
            mc = solve_mixing_coefficient(X, sys, "Case2")
        except NoSolution:
            mc = None
        if mc is not None and _in_span(XA @ Ba @ Ba, list(stack) + [XA]):
            mc, note = _settle_free(mc, X, sys, "cancellation22", True)
            canc = check_cancellation(X, mc.m, sys, "Case2")
            return "Case2", mc, canc, note
    return None


def _settle_free(mc: MixingCoefficient, X, sys, condition: str, cond: bool):
    """Pick m when any value works: the one giving cancellation if it exists, else 0."""
    if not mc.free:
        return mc, ""
    if cond:
        try:
            mc2 = _solve_scalar(*_mixing_terms(X, sys, condition))
            return MixingCoefficient(mc2.m, free=True), "m free; chosen for cancellation"
        except NoSolution:
            pass
    return mc, "m free; set to 0"


def run_tree(sys: SystemSpec, regime: Regime | str = Regime.HF) -> PathReport:
    """Deterministic path through the tree for one frequency regime."""
    regime = Regime(regime)
    n = sys.n
    root = Node((), sys.Bs, 0, 0, "Root", False, 0)
    nodes: list[Node] = [root]
    stack = [sys.Bs]
    rank = rank_const(sys.Bs)
    mixed: list[MixedRecord] = []
    notes: list[str] = []
    fallback = None
    frontier = [0]

    def add(parent: int, letter: str, tag: str, variant=None, canc=False, m=None):
        nonlocal rank
        par = nodes[parent]
        X = par.matrix @ (sys.A if letter == A_LETTER else sys.Ba)
        delta, weighted = _rule(regime, tag, variant, canc)
        nd = Node(par.word + (letter,), X, par.level + 1, delta, tag, canc,
                  par.accumulated_loss + par.discrepancy, weighted,
                  par.eps_index + _eps_step(tag, canc), parent, variant, m)
        nodes.append(nd)
        stack.append(X)
        new_rank = rank_const(stack[0].vstack(*stack[1:]))
        if new_rank <= rank:
            raise AssertionError("accepted node did not increase the rank")
        rank = new_rank
        return len(nodes) - 1

    while rank < n and fallback is None:
        nxt: list[int] = []
        for idx in frontier:
            if rank == n or fallback is not None:
                break
            X = nodes[idx].matrix
            case = classify_node(stack, X, sys, regime)
            if case == Case.STOP:
                continue
            if case == Case.LEFT:
                nxt.append(add(idx, A_LETTER, "Left"))
            elif case == Case.RIGHT:
                canc = False
                if regime == Regime.HF:
                    XB = X @ sys.Ba
                    cond = _in_span(XB @ sys.Ba, stack + [XB])
                    canc = cond and check_cancellation(X, None, sys, "Right")
                nxt.append(add(idx, B_LETTER, "Right", "Right" if canc else None, canc))
            elif case == Case.EITHER:
                if regime == Regime.HF:
                    nxt.append(add(idx, A_LETTER, "EitherLeft"))
                else:
                    nxt.append(add(idx, B_LETTER, "EitherRight"))
            else:  # Both
                if regime == Regime.LF:
                    fallback = "LF-mixed-encountered"
                    notes.append(f"mixed case at {nodes[idx].label} in LF")
                    break
                got = _try_mixed(stack, X, sys)
                if got is None:
                    fallback = "HF-mixed-unavailable"
                    notes.append(f"mixed assumptions fail at {nodes[idx].label}")
                    break
                variant, mc, canc, note = got
                if note:
                    notes.append(note)
                mixed.append(MixedRecord(nodes[idx].label, mc.m, variant, canc, mc.free,
                                         _CANCEL_CONDITION[variant]))
                nxt.append(add(idx, A_LETTER, "MixedLeft", variant, canc, mc.m))
                nxt.append(add(idx, B_LETTER, "MixedRight", variant, canc, mc.m))
        if fallback is None and rank < n and not nxt:
            raise KalmanViolated(f"stacked rank stuck at {rank} < {n}")
        frontier = nxt
    return PathReport(regime, tuple(nodes), rank, rank == n, tuple(mixed), fallback,
                      tuple(notes), sys)


def certificate_from_path(report: PathReport, fallback_exponent: int | None = None,
                          force_no_cancellation: bool = False) -> DecayCertificate:
    """Decay exponent (alpha~ or beta~) read off the path.

    On fallback the exponent comes from the generic Kalman estimate, which
    must then be supplied as ``fallback_exponent``.
    """
    if report.fallback is not None:
        if fallback_exponent is None:
            raise ValueError("fallback path needs the generic Kalman exponent")
        return DecayCertificate(report.regime, fallback_exponent, "KalmanGeneric")
    nodes = report.nodes
    if force_no_cancellation:
        nodes = _rebuild(nodes, report.regime, allow_cancellation=False)
    per = {nd.label: nd.gamma for nd in nodes}
    return DecayCertificate(report.regime, max(per.values()), "TreeImproved", per)


def without_cancellations(report: PathReport) -> PathReport:
    """The same path with every cancellation flag cleared and losses recomputed."""
    return replace(report, nodes=_rebuild(report.nodes, report.regime, False))


# -- rank-one fast path ----------------------------------------------------

@dataclass(frozen=True)
class KernelReport:
    p: tuple
    scale: Fraction
    conditions: dict

    def holds(self, name: str) -> bool:
        return self.conditions[name]["holds"]


def _rank_one_factor(Bs: ConstMatrix) -> tuple[tuple, Fraction]:
    if rank_const(Bs) != 1:
        raise NotRankOne("Bs must have rank one")
    r = next(i for i in range(Bs.rows) if Bs[i, i] != 0)
    p = tuple(Bs.entries[r])
    return p, 1 / Bs[r, r]


def rank_one_fast_path(sys: SystemSpec, W: ConstMatrix, m) -> KernelReport:
    """Kernel tests for the four pairing conditions when ``Bs = c p p^T``.

    For ``X = Bs W`` a pairing ``(X P' dx U, X Q' U)`` is a multiple of
    ``(u.dx U)(v.U)`` with ``u = P'^T W^T p`` and ``v = Q'^T W^T p``; it
    vanishes in particular when u = 0 or v = 0.
    """
    p, c = _rank_one_factor(sys.Bs)
    n = sys.n
    A, Ba = sys.A, sys.Ba
    I = ConstMatrix.identity(n)
    m = Fraction(m)
    pairs = {
        "suff11": (A, Ba @ (A @ A).scale(m) - Ba),
        "suff12": (A @ Ba @ A .scale(m) - A, Ba),
        "suff21": (I - (A @ A).scale(m), Ba @ A),
        "suff22": (I - (A @ Ba).scale(m), Ba @ A),
    }
    pv = ConstMatrix([[x] for x in p])
    Wtp = W.T @ pv
    out = {}
    for name, (P, Q) in pairs.items():
        u = (P.T @ Wtp).is_zero()
        v = (Q.T @ Wtp).is_zero()
        which = "first" if u else ("second" if v else None)
        out[name] = {"holds": u or v, "kernel": which}
    return KernelReport(p, c, out)
