"""Exception types shared across modules."""
from __future__ import annotations


class HypocertError(Exception):
    """Base class for all package errors."""


class InvalidSystem(HypocertError, ValueError):
    """The matrices do not have the required symmetry or sign structure."""


class NonIntegerSlope(HypocertError):
    """A fitted log-log slope is not within tolerance of an integer."""

    def __init__(self, slope: float, what: str = "slope"):
        super().__init__(f"{what} {slope:.4f} is not within 0.15 of an integer")
        self.slope = slope


class KalmanViolated(HypocertError):
    """The stacked rank cannot reach n; the Kalman condition fails."""


class NoSolution(HypocertError):
    """No mixing coefficient satisfies the mixed-case pairing condition."""


class NotRankOne(HypocertError):
    """The rank-one fast path was called with rank(Bs) != 1."""


class RegimeMismatch(HypocertError, ValueError):
    """A frequency lies outside the regime of a functional."""


class NotEquivalent(HypocertError):
    """The functional is not bounded below by a positive multiple of |U|^2."""


class StepTooLarge(HypocertError, ValueError):
    """The RK4 step violates the stability margin."""


class InsufficientDecay(HypocertError):
    """A trajectory did not decay enough to fit a rate."""
