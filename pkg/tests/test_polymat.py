from fractions import Fraction as F

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from hypocert.kalman import build_kalman_stack
from hypocert.polymat import (I_UNIT, ConstMatrix, GaussianRational, Poly, PolyMatrix,
                              determinant, eval_at, exceptional_real_points, generic_rank,
                              poly_gcd, poly_mat_mul, poly_rank, rank_const, real_roots,
                              sample_points, squarefree)

from helpers import EXCEPTIONAL, spec

small = st.fractions(min_value=-20, max_value=20, max_denominator=12)
gauss = st.builds(GaussianRational, small, small)


def to_sympy(M):
    return sympy.Matrix([[sympy.Rational(e.re.numerator, e.re.denominator)
                          + sympy.I * sympy.Rational(e.im.numerator, e.im.denominator)
                          if isinstance(e, GaussianRational) else
                          sympy.Rational(e.numerator, e.denominator) for e in r]
                         for r in M.entries])


class TestGaussianRational:
    def test_arithmetic(self):
        z = GaussianRational(1, 2)
        w = GaussianRational(F(1, 2), -1)
        assert z * w == GaussianRational(F(5, 2), 0)
        assert (z / w) * w == z
        assert z - z == 0
        assert I_UNIT * I_UNIT == -1

    @given(gauss, gauss)
    def test_matches_complex(self, z, w):
        assert complex(z * w) == pytest.approx(complex(z) * complex(w))
        assert complex(z + w) == pytest.approx(complex(z) + complex(w))
        if w:
            assert (z / w) * w == z

    def test_real_values_hash_like_fractions(self):
        assert hash(GaussianRational(F(3, 4), 0)) == hash(F(3, 4))
        assert GaussianRational(2, 0) == 2

    def test_conjugate_and_abs2(self):
        z = GaussianRational(3, -4)
        assert z.conjugate() == GaussianRational(3, 4)
        assert z.abs2() == 25


class TestPoly:
    def test_trim_and_degree(self):
        assert Poly([1, 0, 0]).degree == 0
        assert Poly([]).is_zero()

    def test_divmod(self):
        p = Poly([-1, 0, 1])
        q, r = p.divmod(Poly([1, 1]))
        assert q == Poly([-1, 1]) and r.is_zero()

    def test_gcd_and_squarefree(self):
        p = Poly([1, 1]) ** 2 * Poly([-2, 1])
        assert poly_gcd(p, p.derivative()) == Poly([1, 1])
        assert squarefree(p).monic() == (Poly([1, 1]) * Poly([-2, 1])).monic()

    def test_strip_xi(self):
        p, k = Poly([0, 0, 3, 1]).strip_xi()
        assert k == 2 and p == Poly([3, 1])

    @given(st.lists(small, min_size=1, max_size=5), st.lists(small, min_size=1, max_size=5), small)
    def test_evaluation_homomorphism(self, a, b, x):
        p, q = Poly(a), Poly(b)
        assert (p * q)(x) == p(x) * q(x)
        assert (p + q)(x) == p(x) + q(x)

    def test_real_roots_against_sympy(self):
        x = sympy.symbols("x")
        p = Poly([-2, 0, 1]) * Poly([F(1, 3), -1]) * Poly([1, 0, 1])
        roots = real_roots(p)
        expected = sorted(float(r) for r in sympy.real_roots(sympy.Poly(
            (x**2 - 2) * (sympy.Rational(1, 3) - x) * (x**2 + 1))))
        assert [r.approx for r in roots] == pytest.approx(expected, abs=1e-10)

    def test_exact_rational_root_is_isolated_once(self):
        roots = real_roots(Poly([0, 1]) * Poly([-1, 1]))
        assert len(roots) == 2
        assert [r.approx for r in roots] == pytest.approx([0.0, 1.0], abs=1e-12)


class TestMatrices:
    def test_damped_wave_square(self):
        G = spec("damped-wave").generator
        sq = poly_mat_mul(G, G)
        assert sq == PolyMatrix([[Poly([0, 0, -1]), Poly()], [Poly(), Poly([0, 0, -1])]])

    def test_sugimoto_second_power_entries(self):
        s = spec("sugimoto", a=3, Omega=5, omega=7, epsilon=F(1, 2))
        M = PolyMatrix.from_const(s.Bs) @ s.generator @ s.generator
        # row 2 of Bs (iξA+Ba)^2: entry (2,1) = -a eps Omega i xi, (2,2) = -eps (Omega^2 + omega^2)
        assert M[1, 0] == Poly([0, GaussianRational(0, -3 * F(1, 2) * 5)])
        assert M[1, 1] == Poly([-F(1, 2) * (25 + 49)])

    def test_eval_at_toy(self):
        s = spec("toy2x2", a=3, b=5)
        E = eval_at(s.generator, 1)
        assert E == ConstMatrix([[GaussianRational(0, 3), 1], [-1, GaussianRational(0, 5)]])
        assert eval_at(PolyMatrix.linear(s.A.scale(I_UNIT), ConstMatrix.zeros(2, 2)), 0).is_zero()

    def test_identity_product(self):
        G = spec("timoshenko").generator
        assert PolyMatrix.identity(4) @ G == G

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ConstMatrix.identity(2) @ ConstMatrix.identity(3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_rank_matches_sympy(self, seed):
        rng = np.random.default_rng(seed)
        r, c = rng.integers(1, 5, size=2)
        k = rng.integers(1, min(r, c) + 1)
        M = rng.integers(-3, 4, size=(r, k)) @ rng.integers(-3, 4, size=(k, c))
        C = ConstMatrix.from_rows(M.tolist())
        assert rank_const(C) == to_sympy(C).rank()

    def test_determinant_matches_sympy(self):
        C = ConstMatrix.from_rows([[2, F(1, 3), 0], [1, 5, -2], [F(-7, 2), 0, 1]])
        assert determinant(C) == F(str(to_sympy(C).det()))

    def test_poly_determinant(self):
        s = spec("toy2x2", a=1, b=2)
        M = build_kalman_stack(s, 1)
        sq = M.select_rows([0, 2])
        xi = sympy.symbols("xi")
        assert sympy.Matrix([[1, 0], [sympy.I * xi, 1]]).det() == 1
        assert determinant(sq) == Poly([1])
        assert determinant(PolyMatrix.linear(ConstMatrix.identity(2), ConstMatrix.zeros(2, 2))) \
            == Poly([0, 0, 1])

    def test_poly_rank(self):
        s = spec("sugimoto")
        assert poly_rank(build_kalman_stack(s, 1)) == 2
        assert poly_rank(build_kalman_stack(s, 2)) == 3


class TestGenericRank:
    def test_sample_points_deterministic(self):
        assert sample_points(3, 7) == sample_points(3, 7)
        assert all(x != 0 for x in sample_points(10, 1))

    def test_generic_rank_matches_exact(self):
        for name in ("sugimoto", "timoshenko", "timoshenko-memory"):
            s = spec(name)
            for K in range(s.n):
                M = build_kalman_stack(s, K)
                assert generic_rank(M) == poly_rank(M)

    def test_exceptional_points(self):
        M = build_kalman_stack(EXCEPTIONAL, 2)
        assert generic_rank(M) == 3
        pts = exceptional_real_points(M)
        assert [p.approx for p in pts] == pytest.approx([-1.0, 1.0])
        # the rank really drops there
        E = to_sympy(M.eval_at(1))
        assert E.rank() == 2

    def test_no_exceptional_points_for_zoo(self):
        for name, K in (("damped-wave", 1), ("sugimoto", 2), ("timoshenko", 3)):
            assert exceptional_real_points(build_kalman_stack(spec(name), K)) == []

    def test_complex_gram_roots_are_not_rank_drops(self):
        # det(MᴴM) = 1 + xi^2 vanishes only off the real line; the selected minor is 1
        M = PolyMatrix([[Poly([1])], [Poly([0, 1])]], 2, 1)
        assert exceptional_real_points(M) == []
