"""Decay-rate certification for partially dissipative hyperbolic systems.

Given exact rational matrices (A, Ba, Bs) of ``U_t + A U_x + (Ba + Bs) U = 0``
the package decides the Kalman rank condition, builds Lyapunov functionals
along a binary tree of operator products, reads off decay exponents and
checks them against spectra and time integration.
"""
from .errors import (HypocertError, InsufficientDecay, InvalidSystem, KalmanViolated,
                     NoSolution, NonIntegerSlope, NotEquivalent, NotRankOne,
                     RegimeMismatch, StepTooLarge)
from .kalman import KalmanCertificate, SystemSpec, check_kalman, kalman_certificate
from .lyapunov import (LyapunovFunctional, admissible_sequence, choose_epsilon,
                       synthesize_improved_functional, synthesize_kalman_functional)
from .tree import PathReport, Regime, certificate_from_path, run_tree
from .zoo import load_system, zoo_file

__version__ = "0.1.0"

__all__ = [
    "SystemSpec", "KalmanCertificate", "check_kalman", "kalman_certificate",
    "Regime", "PathReport", "run_tree", "certificate_from_path",
    "LyapunovFunctional", "admissible_sequence", "synthesize_kalman_functional",
    "synthesize_improved_functional", "choose_epsilon",
    "load_system", "zoo_file",
    "HypocertError", "InvalidSystem", "NonIntegerSlope", "KalmanViolated", "NoSolution",
    "NotRankOne", "RegimeMismatch", "NotEquivalent", "StepTooLarge", "InsufficientDecay",
]
