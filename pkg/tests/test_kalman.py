from fractions import Fraction as F

import numpy as np
import pytest
import sympy

from hypocert.errors import InvalidSystem
from hypocert.kalman import (SystemSpec, build_kalman_stack, build_weighted_stack,
                             check_kalman, estimate_alpha, estimate_beta, is_psd,
                             kalman_certificate, newton_exponent)
from hypocert.polymat import ConstMatrix, PolyMatrix, Poly, generic_rank
from hypocert.verify import smin_oracle

from helpers import EXCEPTIONAL, spec


class TestSystemSpec:
    def test_nonsymmetric_A_names_entry(self):
        with pytest.raises(InvalidSystem, match=r"A\[0\]\[1\] = 1 but A\[1\]\[0\] = 2"):
            SystemSpec.from_rows([[0, 1], [2, 0]], [[0, 0], [0, 0]], [[1, 0], [0, 0]])

    def test_ba_must_be_skew(self):
        with pytest.raises(InvalidSystem, match="skew"):
            SystemSpec.from_rows([[0, 1], [1, 0]], [[1, 0], [0, 0]], [[1, 0], [0, 0]])

    def test_bs_psd_and_nonzero(self):
        Z = [[0, 0], [0, 0]]
        with pytest.raises(InvalidSystem, match="positive semidefinite"):
            SystemSpec.from_rows(Z, Z, [[1, 2], [2, 1]])
        with pytest.raises(InvalidSystem, match="nonzero"):
            SystemSpec.from_rows(Z, Z, Z)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidSystem, match="shape"):
            SystemSpec.from_rows([[0]], [[0, 0], [0, 0]], [[1, 0], [0, 0]])

    def test_is_psd(self):
        assert is_psd(ConstMatrix.from_rows([[2, 1], [1, 1]]))
        assert not is_psd(ConstMatrix.from_rows([[1, 0], [0, -1]]))
        assert is_psd(ConstMatrix.from_rows([[0, 0], [0, 0]]))

    def test_kappa(self):
        assert spec("timoshenko", b=3).kappa == pytest.approx(3.0)


class TestStacks:
    def test_block_shapes(self):
        s = spec("sugimoto")
        assert build_kalman_stack(s, 2).shape == (9, 3)
        assert build_weighted_stack(s, 2).shape == (9, 3)
        with pytest.raises(ValueError):
            build_kalman_stack(s, -1)

    def test_weighted_stack_is_scaled_kalman_stack(self):
        s = spec("timoshenko")
        M = build_kalman_stack(s, 2)
        W = build_weighted_stack(s, 2)
        xi = F(7, 3)
        Mx, Wt = M.eval_at(xi), W.eval_at(1 / xi)
        for k in range(3):
            for r in range(4):
                for c in range(4):
                    assert Wt[4 * k + r, c] == Mx[4 * k + r, c] / xi ** k


class TestCheckKalman:
    @pytest.mark.parametrize("name,K", [("damped-wave", 1), ("toy2x2", 1), ("toy3x3", 2),
                                        ("sugimoto", 2), ("timoshenko", 3),
                                        ("timoshenko-memory", 4)])
    def test_orders(self, name, K):
        cert = check_kalman(spec(name))
        assert cert.holds and cert.K == K

    def test_sugimoto_rejects_K1(self):
        cert = check_kalman(spec("sugimoto"))
        assert cert.generic_ranks[:2] == (1, 2)

    def test_kmax_too_small(self):
        cert = check_kalman(spec("sugimoto"), kmax=1)
        assert not cert.holds and cert.K is None

    def test_exceptional_frequency_fails_condition(self):
        cert = check_kalman(EXCEPTIONAL)
        assert not cert.holds
        assert [p.approx for p in cert.exceptional_points] == pytest.approx([-1, 1])

    def test_full_rank_bs_is_order_zero(self):
        s = SystemSpec.from_rows([[1, 0], [0, 2]], [[0, 1], [-1, 0]], [[1, 0], [0, 1]])
        assert check_kalman(s).K == 0


class TestExponents:
    @pytest.mark.parametrize("name,alpha,beta", [
        ("damped-wave", 0, 1), ("sugimoto", 1, 1), ("toy2x2", 1, 0), ("toy3x3", 1, 2),
        ("timoshenko", 1, 3), ("timoshenko-memory", 1, 4)])
    def test_certificate(self, name, alpha, beta):
        cert = kalman_certificate(spec(name))
        assert (cert.alpha, cert.beta) == (alpha, beta)
        assert abs(cert.fit_diagnostics["alpha_slope"] + alpha) < 0.15

    @pytest.mark.parametrize("name", ["damped-wave", "sugimoto", "toy3x3", "timoshenko"])
    def test_newton_polygon_agrees(self, name):
        s = spec(name)
        K = check_kalman(s).K
        assert newton_exponent(build_kalman_stack(s, K)) == estimate_beta(s, K).value
        assert newton_exponent(build_weighted_stack(s, K)) == estimate_alpha(s, K).value

    def test_3x3_beta_from_sympy_singular_values(self):
        # independent oracle: exact characteristic polynomial of M^H M in sympy
        s = spec("toy3x3")
        M = build_kalman_stack(s, 2)
        lam = sympy.symbols("lam")
        vals = []
        for j in (10, 12):
            E = M.eval_at(F(1, 2 ** j))
            S = sympy.Matrix([[sympy.Rational(str(getattr(e, "re", e)))
                               + sympy.I * sympy.Rational(str(getattr(e, "im", 0)))
                               for e in r] for r in E.entries])
            cp = sympy.Poly((S.H * S).charpoly(lam).as_expr(), lam)
            roots = sympy.Poly(sympy.expand(cp.as_expr()), lam).nroots(n=80, maxsteps=200)
            vals.append(float(sympy.sqrt(min(sympy.re(r) for r in roots))))
        assert np.log2(vals[0] / vals[1]) / 2 == pytest.approx(2, abs=0.05)

    def test_smin_oracle_matches_numpy_when_well_conditioned(self):
        s = spec("sugimoto")
        M = build_kalman_stack(s, 2)
        E = M.eval_at(F(3, 2))
        ref = np.linalg.svd(E.to_complex(), compute_uv=False).min()
        assert smin_oracle(M, F(3, 2)) == pytest.approx(ref, rel=1e-10)
