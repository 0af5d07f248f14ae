"""Numerical checks: sigma_min, spectra, RK4 trajectories, slope fits, monitors.

Rates of order 1e-12 to 1e-24 appear at the ends of the default frequency
sweeps, beyond what double precision can resolve next to eigenvalues of size
1e6.  Singular values and spectra are therefore computed with mpmath; the
time integration and functional monitoring run in double precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

import mpmath
import numpy as np
from scipy.linalg import expm

from .errors import InsufficientDecay, NonIntegerSlope, StepTooLarge
from .polymat import ConstMatrix, PolyMatrix, as_exact

if TYPE_CHECKING:  # pragma: no cover
    from .kalman import SystemSpec
    from .lyapunov import LyapunovFunctional

__all__ = [
    "SpectralSample",
    "SlopeFit",
    "SpectralFit",
    "Trajectory",
    "MonitorResult",
    "smin_oracle",
    "slope_fit",
    "spectral_rate",
    "fit_hf_exponent",
    "fit_lf_exponent",
    "rk4_propagator",
    "integrate_mode",
    "integrate_modes",
    "exact_solution",
    "decay_fit",
    "lyapunov_monitor",
    "monitor_sweep",
    "SweepResult",
    "max_dt",
]

SLOPE_TOL = 0.15
SPECTRAL_DPS = 60


def _mp_matrix(M: ConstMatrix) -> mpmath.matrix:
    out = mpmath.matrix(M.rows, M.cols)
    for i, row in enumerate(M.entries):
        for j, e in enumerate(row):
            re = getattr(e, "re", e)
            im = getattr(e, "im", 0)
            out[i, j] = mpmath.mpc(mpmath.mpf(re.numerator) / re.denominator,
                                   mpmath.mpf(Fraction(im).numerator) / Fraction(im).denominator)
    return out


def _exact_xi(xi) -> Fraction:
    if isinstance(xi, float):
        return Fraction(xi)
    return as_exact(xi)


def smin_oracle(M: PolyMatrix | ConstMatrix, xi=None, dps: int | None = None) -> float:
    """Smallest singular value of M(xi), from the eigenvalues of MᴴM.

    MᴴM is formed exactly and diagonalized in extended precision, so values
    far below double-precision epsilon relative to ||M|| are resolved.

    >>> smin_oracle(ConstMatrix.from_rows([[1, 0], [0, Fraction(1, 1024)]]))
    0.0009765625
    """
    if isinstance(M, PolyMatrix):
        x = _exact_xi(xi)
        E = M.eval_at(x)
        scale = abs(math.log10(abs(float(x)))) if x != 0 else 0.0
        deg = max(M.degree, 1)
    else:
        E, scale, deg = M, 0.0, 1
    if dps is None:
        dps = 40 + int(4 * deg * scale)
    G = E.H @ E
    with mpmath.workdps(dps):
        ev = mpmath.eigh(_mp_matrix(G), eigvals_only=True)
        lam = min(mpmath.re(v) for v in ev)
        return float(mpmath.sqrt(max(lam, 0)))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    max_residual: float
    window: tuple[float, float]

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "max_residual": self.max_residual, "window": list(self.window)}


def slope_fit(x: Sequence[float], y: Sequence[float], last: int | None = None) -> SlopeFit:
    """Least-squares line through the last ``last`` points of (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if last is not None:
        x, y = x[-last:], y[-last:]
    if len(x) < 2:
        raise ValueError("need at least two points for a slope")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return SlopeFit(float(slope), float(intercept), float(np.max(np.abs(resid))),
                    (float(2.0 ** x.min()), float(2.0 ** x.max())))


@dataclass(frozen=True)
class SpectralSample:
    xi: float
    eigenvalues: tuple[complex, ...]
    rate: float


def spectral_rate(sys: SystemSpec, xi, dps: int = SPECTRAL_DPS) -> SpectralSample:
    """Spectrum of ``i xi A + Ba + Bs`` and its smallest real part."""
    x = _exact_xi(xi)
    if x == 0:
        raise ValueError("xi must be nonzero")
    with mpmath.workdps(dps):
        G = _mp_matrix(sys.Ba + sys.Bs) + mpmath.mpc(0, 1) * (
            mpmath.mpf(x.numerator) / x.denominator) * _mp_matrix(sys.A)
        ev = mpmath.eig(G, left=False, right=False)
        rate = min(mpmath.re(v) for v in ev)
        eig = tuple(sorted((complex(v) for v in ev), key=lambda z: (z.real, z.imag)))
        return SpectralSample(float(x), eig, float(rate))


@dataclass(frozen=True)
class SpectralFit:
    exponent: int
    fit: SlopeFit
    samples: tuple[SpectralSample, ...]


def _spectral_fit(sys, xs, logx, sign, what, last) -> SpectralFit:
    samples = tuple(spectral_rate(sys, x) for x in xs)
    rates = [s.rate for s in samples]
    if min(rates) <= 0:
        raise NonIntegerSlope(float("nan"), f"{what} (nonpositive rate)")
    fit = slope_fit(logx, [math.log2(r) for r in rates], last=last)
    val = sign * fit.slope / 2
    k = round(val)
    if abs(val - k) > SLOPE_TOL:
        raise NonIntegerSlope(fit.slope / 2, what)
    return SpectralFit(max(int(k), 0), fit, samples)


def fit_hf_exponent(sys: SystemSpec, exponents: Sequence[int] = range(8, 21),
                    last: int = 8) -> SpectralFit:
    """alpha_spec = -slope/2 of log2 rate against log2 xi for xi = 2^j."""
    xs = [Fraction(2) ** j for j in exponents]
    return _spectral_fit(sys, xs, [float(j) for j in exponents], -1,
                         "HF spectral half-slope", last)


def fit_lf_exponent(sys: SystemSpec, exponents: Sequence[int] = range(8, 21),
                    last: int = 8) -> SpectralFit:
    """beta_spec = slope/2 of log2 rate against log2 xi for xi = 2^-j."""
    xs = [Fraction(1, 2 ** j) for j in exponents]
    return _spectral_fit(sys, xs, [-float(j) for j in exponents], 1,
                         "LF spectral half-slope", last)


# -- time integration -----------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    xi: float
    times: np.ndarray
    states: np.ndarray
    dt: float
    method: str = "RK4"


def max_dt(sys: SystemSpec, xi: float) -> float:
    nA = np.linalg.norm(sys.A.to_float(), 2)
    nB = np.linalg.norm((sys.Ba + sys.Bs).to_float(), 2)
    return 0.01 / (1 + abs(xi) * nA + nB)


def rk4_propagator(G: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for ``U' = -G U`` as a matrix."""
    n = G.shape[0]
    I = np.eye(n, dtype=complex)
    k1 = -G
    k2 = -G @ (I + 0.5 * dt * k1)
    k3 = -G @ (I + 0.5 * dt * k2)
    k4 = -G @ (I + dt * k3)
    return I + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _sample_propagator(sys: SystemSpec, xi: float, T: float, dt: float | None,
                       samples: int, check_dt: bool) -> tuple[np.ndarray, float]:
    limit = max_dt(sys, xi)
    if dt is None:
        dt = limit
    elif check_dt and dt > limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:g} exceeds the stability margin {limit:g}")
    intervals = samples - 1
    stride = max(1, math.ceil(T / dt / intervals))
    dt = T / (stride * intervals)
    S = rk4_propagator(sys.full_generator(xi), dt)
    return np.linalg.matrix_power(S, stride), dt


def integrate_modes(sys: SystemSpec, xi: float, U0s, T: float, dt: float | None = None,
                    samples: int = 201, check_dt: bool = True) -> list[Trajectory]:
    """RK4 trajectories of several initial states (columns of ``U0s``) at one xi.

    The step matrix is applied ``stride`` times between samples by binary
    powering, which gives the same iterates as stepping one by one and keeps
    long horizons affordable.  The step is shrunk so that an integer number
    of steps separates samples.
    """
    P, dt = _sample_propagator(sys, xi, T, dt, samples, check_dt)
    U = np.array(U0s, dtype=complex, ndmin=2)
    if U.shape[0] != sys.n:
        U = U.T
    states = np.empty((samples,) + U.shape, dtype=complex)
    states[0] = U
    for k in range(1, samples):
        U = P @ U
        states[k] = U
    if not np.all(np.isfinite(states)):
        raise FloatingPointError("trajectory diverged")
    times = np.linspace(0.0, T, samples)
    return [Trajectory(float(xi), times, states[:, :, j], dt) for j in range(U.shape[1])]


def integrate_mode(sys: SystemSpec, xi: float, U0, T: float, dt: float | None = None,
                   samples: int = 201, check_dt: bool = True) -> Trajectory:
    """RK4 trajectory of ``U' = -(i xi A + Ba + Bs) U`` sampled at ``samples`` times."""
    U0 = np.asarray(U0, dtype=complex).reshape(-1, 1)
    return integrate_modes(sys, xi, U0, T, dt, samples, check_dt)[0]


def exact_solution(sys: SystemSpec, xi: float, U0, t: float) -> np.ndarray:
    """Matrix-exponential reference ``exp(-t G) U0``."""
    return expm(-t * sys.full_generator(xi)) @ np.asarray(U0, dtype=complex)


def decay_fit(traj: Trajectory) -> float:
    """Decay rate from log|U| against t over the final half of the run."""
    norms = np.linalg.norm(traj.states, axis=1)
    if norms[-1] > 1e-3 * norms[0]:
        raise InsufficientDecay(f"|U(T)|/|U(0)| = {norms[-1] / norms[0]:.3g} > 1e-3")
    half = len(norms) // 2
    fit = np.polyfit(traj.times[half:], np.log(norms[half:]), 1)
    return float(-fit[0])


# -- Lyapunov monitoring --------------------------------------------------------

@dataclass(frozen=True)
class MonitorResult:
    passed: bool
    nonincreasing: bool
    c_empirical: float
    worst_margin: float
    details: dict = field(default_factory=dict)


def lyapunov_monitor(L: LyapunovFunctional, sys: SystemSpec, traj: Trajectory,
                     predicted_exponent: int) -> MonitorResult:
    """Check that L decreases and dL/dt <= -c w(xi) L along a trajectory.

    ``w(xi)`` is ``|xi|^(-2 exponent)`` in HF and ``|xi|^(2 exponent)`` in LF.
    The returned ``c_empirical`` is the largest c sustained at every sample.
    """
    from .lyapunov import quadratic_forms, weight

    H, D = quadratic_forms(L, sys, traj.xi)
    X = traj.states
    vals = np.real(np.einsum("ti,ij,tj->t", X.conj(), H, X))
    ddt = -np.real(np.einsum("ti,ij,tj->t", X.conj(), D, X))
    w = weight(L.regime, traj.xi, predicted_exponent)
    live = vals > 0
    ratios = -ddt[live] / (w * vals[live])
    c = float(np.min(ratios)) if ratios.size else float("inf")
    steps = np.diff(vals)
    strict = bool(np.all(steps < 0))
    # relative slack for rounding in the monotonicity check
    nonincreasing = bool(np.all(steps <= 1e-12 * vals[:-1]))
    return MonitorResult(nonincreasing and c > 0, nonincreasing, c,
                         float(np.max(ddt / np.maximum(vals, 1e-300))),
                         {"strictly_decreasing": strict})


@dataclass(frozen=True)
class SweepResult:
    regime: str
    exponent: int
    xi: tuple[float, ...]
    c: tuple[float, ...]
    strictly_decreasing: bool
    states: int

    @property
    def spread(self) -> float:
        return max(self.c) / min(self.c) if min(self.c) > 0 else float("inf")

    @property
    def passed(self) -> bool:
        return self.strictly_decreasing and min(self.c) > 0 and self.spread <= 10

    def as_dict(self) -> dict:
        return {"regime": self.regime, "exponent": self.exponent, "xi": list(self.xi),
                "c": list(self.c), "spread": self.spread, "states": self.states,
                "strictly_decreasing": self.strictly_decreasing, "passed": self.passed}


def monitor_sweep(L: LyapunovFunctional, sys: SystemSpec, exponent: int, xi_samples,
                  states: int = 64, seed: int = 0, samples: int = 201) -> SweepResult:
    """Monitor L on ``states`` trajectories per sampled xi.

    The states are the slowest eigenvector of the generator, the state of
    least relative dissipation for L, and random complex vectors.  Each run
    lasts eight slowest-mode decay times.  ``c`` is normalized by the
    certified weight, so a sharp certificate gives a flat profile.
    """
    from .lyapunov import dissipation_rate

    rng = np.random.default_rng(seed)
    n = sys.n
    cs, xs = [], []
    strict = True
    for xi in xi_samples:
        x = float(xi)
        rate = spectral_rate(sys, xi).rate
        ev, V = np.linalg.eig(sys.full_generator(x))
        slow = V[:, int(np.argmin(ev.real))]
        _, v = dissipation_rate(L, sys, xi)
        rand = rng.standard_normal((n, max(states - 2, 0))) \
            + 1j * rng.standard_normal((n, max(states - 2, 0)))
        U0 = np.column_stack([slow, v, rand])[:, :states]
        U0 = U0 / np.linalg.norm(U0, axis=0)
        runs = [lyapunov_monitor(L, sys, tr, exponent)
                for tr in integrate_modes(sys, x, U0, 8.0 / rate, samples=samples)]
        strict &= all(r.details["strictly_decreasing"] for r in runs)
        cs.append(min(r.c_empirical for r in runs))
        xs.append(x)
    return SweepResult(L.regime.value, exponent, tuple(xs), tuple(cs), strict, states)
