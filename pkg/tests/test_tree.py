from fractions import Fraction as F

import pytest

from hypocert.errors import KalmanViolated, NotRankOne
from hypocert.kalman import SystemSpec
from hypocert.polymat import ConstMatrix
from hypocert.tree import (Case, Regime, certificate_from_path, check_cancellation,
                           classify_node, rank_one_fast_path, run_tree,
                           solve_mixing_coefficient, span_coefficients, without_cancellations,
                           word_label, word_matrix)

from helpers import spec


def labels(report):
    return report.labels()


def hf(name, **params):
    return run_tree(spec(name, **params), Regime.HF)


class TestLabels:
    def test_word_label(self):
        assert word_label(()) == "B^s"
        assert word_label(("A", "A")) == "B^sA^2"
        assert word_label(("Ba", "A")) == "B^sB^aA"
        assert word_label(("A", "Ba", "Ba")) == "B^sA(B^a)^2"


class TestClassify:
    def test_left_and_right(self):
        s = spec("damped-wave")
        assert classify_node([s.Bs], s.Bs, s) == Case.LEFT
        s = spec("sugimoto")
        assert classify_node([s.Bs], s.Bs, s) == Case.RIGHT

    def test_either(self):
        s = SystemSpec.from_rows([[0, 1], [1, 0]], [[0, 1], [-1, 0]], [[1, 0], [0, 0]])
        assert classify_node([s.Bs], s.Bs, s) == Case.EITHER
        assert run_tree(s, "HF").nodes[1].case_tag == "EitherLeft"
        assert run_tree(s, "LF").nodes[1].case_tag == "EitherRight"

    def test_both(self):
        s = spec("timoshenko")
        assert classify_node([s.Bs], s.Bs, s) == Case.BOTH

    def test_stop(self):
        s = spec("timoshenko")
        X = s.Bs @ s.A @ s.A  # B^s A^2 adds nothing once B^s, B^sA, B^sB^a are in
        stack = [s.Bs, s.Bs @ s.A, s.Bs @ s.Ba]
        assert classify_node(stack, X, s) == Case.STOP

    def test_span_coefficients(self):
        E = ConstMatrix.identity(2)
        N = ConstMatrix.from_rows([[0, 1], [0, 0]])
        X = ConstMatrix.from_rows([[3, F(1, 2)], [0, 3]])
        assert span_coefficients(X, [E, N]) == (3, F(1, 2))
        assert span_coefficients(N.T, [E, N]) is None
        assert span_coefficients(ConstMatrix.zeros(2, 2), []) == ()


class TestPaths:
    def test_damped_wave(self):
        assert labels(hf("damped-wave")) == ["B^s", "B^sA"]

    def test_sugimoto(self):
        r = hf("sugimoto")
        assert labels(r) == ["B^s", "B^sB^a", "B^sB^aA"]
        assert certificate_from_path(r).exponent == 1
        assert certificate_from_path(run_tree(spec("sugimoto"), "LF")).exponent == 1

    def test_timoshenko(self):
        r = hf("timoshenko")
        assert labels(r) == ["B^s", "B^sA", "B^sB^a", "B^sB^aA"]
        assert [nd.case_tag for nd in r.nodes[1:]] == ["MixedLeft", "MixedRight", "Left"]
        (mix,) = r.mixed_data
        assert (mix.parent, mix.m, mix.assumption_set) == ("B^s", 1, "Case1")

    def test_timoshenko_memory(self):
        r = hf("timoshenko-memory")
        assert labels(r) == ["B^s", "B^sA", "B^sA^2", "B^sAB^a", "B^sAB^aA"]
        (mix,) = r.mixed_data
        assert (mix.parent, mix.m) == ("B^sA", 1)

    @pytest.mark.parametrize("b", [2, 3, F(1, 2)])
    def test_3x3_mixing_coefficient(self, b):
        (mix,) = hf("toy3x3", a=1, b=b).mixed_data
        assert mix.m == 1 / F(b) ** 2

    def test_losses_and_eps_indices(self):
        r = hf("timoshenko", a=2)
        assert [(nd.accumulated_loss, nd.discrepancy, nd.weighted, nd.eps_index)
                for nd in r.nodes[1:]] == [(0, 1, False, 1), (0, 1, True, 1), (1, 0, False, 2)]
        r = hf("timoshenko", a=1)
        assert [(nd.accumulated_loss, nd.discrepancy, nd.weighted, nd.eps_index)
                for nd in r.nodes[1:]] == [(0, 0, False, 1), (0, 0, False, 2), (0, 0, False, 3)]

    def test_lf_mixed_falls_back(self):
        r = run_tree(spec("toy3x3"), "LF")
        assert r.fallback == "LF-mixed-encountered"
        with pytest.raises(ValueError):
            certificate_from_path(r)
        assert certificate_from_path(r, fallback_exponent=2).provenance == "KalmanGeneric"

    def test_kalman_violation(self):
        s = SystemSpec.from_rows([[1, 0], [0, 2]], [[0, 0], [0, 0]], [[1, 0], [0, 0]])
        with pytest.raises(KalmanViolated):
            run_tree(s, "HF")

    def test_deterministic(self):
        s = spec("timoshenko-memory")
        assert run_tree(s, "HF") == run_tree(s, "HF")


class TestCancellation:
    @pytest.mark.parametrize("a,expected", [(1, 0), (-1, 0), (2, 1), (F(1, 2), 1)])
    def test_timoshenko(self, a, expected):
        r = hf("timoshenko", a=a)
        assert certificate_from_path(r).exponent == expected
        assert certificate_from_path(r, force_no_cancellation=True).exponent == 1
        assert certificate_from_path(without_cancellations(r)).exponent == 1

    @pytest.mark.parametrize("a,b,expected", [(1, 1, 0), (2, -2, 0), (1, 2, 1), (3, 1, 1)])
    def test_3x3(self, a, b, expected):
        assert certificate_from_path(hf("toy3x3", a=a, b=b)).exponent == expected

    @pytest.mark.parametrize("a,b,expected", [(1, 1, 0), (3, 3, 0), (1, 2, 1), (2, -2, 1)])
    def test_2x2_right_path(self, a, b, expected):
        r = hf("toy2x2", a=a, b=b)
        assert certificate_from_path(r).exponent == expected
        assert r.nodes[1].cancellation == (expected == 0)

    @pytest.mark.parametrize("c1,c2,expected", [(F(3, 5), F(4, 5), 0), (F(5, 13), F(12, 13), 0),
                                                (1, 1, 1), (F(1, 2), F(1, 2), 1)])
    def test_memory(self, c1, c2, expected):
        assert certificate_from_path(hf("timoshenko-memory", c1=c1, c2=c2)).exponent == expected

    def test_mixing_coefficient_solver(self):
        s = spec("timoshenko")
        mc = solve_mixing_coefficient(s.Bs, s, "Case1")
        assert mc.m == 1 and not mc.free
        assert check_cancellation(s.Bs, 1, spec("timoshenko", a=1), "Case1")
        assert not check_cancellation(s.Bs, 1, s, "Case1")


class TestRankOne:
    @pytest.mark.parametrize("a", [1, 2, 3])
    def test_timoshenko_fast_path(self, a):
        s = spec("timoshenko", a=a)
        W = word_matrix(s, ())
        rep = rank_one_fast_path(s, W, 1)
        assert rep.holds("suff21") == (a * a == 1)
        assert rep.holds("suff21") == check_cancellation(s.Bs, 1, s, "Case1")
        # only m = 1 puts p in the kernel for the mixing condition
        assert rep.holds("suff11")
        assert not rank_one_fast_path(s, W, 2).holds("suff11")

    def test_memory_fast_path_consistent(self):
        for c1, c2 in ((F(3, 5), F(4, 5)), (1, 1)):
            s = spec("timoshenko-memory", c1=c1, c2=c2)
            W = word_matrix(s, ("A",))
            X = s.Bs @ W
            rep = rank_one_fast_path(s, W, 1)
            if rep.holds("suff21"):
                assert check_cancellation(X, 1, s, "Case1")
            assert rep.holds("suff21") == (c1 ** 2 + c2 ** 2 == 1)

    def test_requires_rank_one(self):
        s = SystemSpec.from_rows([[1, 0], [0, 2]], [[0, 1], [-1, 0]], [[1, 0], [0, 1]])
        with pytest.raises(NotRankOne):
            rank_one_fast_path(s, ConstMatrix.identity(2), 0)
