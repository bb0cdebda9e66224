import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphmax.exponents import (
    TRIANGLE_ORDER,
    ExponentPoint,
    InadmissibleError,
    classify_region,
    d_exponent,
    extra_term,
    figure1_vertices,
    format_fraction,
    quadrangle_Q,
    random_admissible_point,
    s2,
    s2_branch,
    s2_branch_value,
    s_n,
    s_n_branch_value,
    sigma,
    sigma_terms,
    smoothing_endpoint,
    transfer_alpha,
)


def P(a, b, n):
    return ExponentPoint(F(a), F(b), n)


@st.composite
def admissible_points(draw, dims=(2, 3, 4, 5, 8)):
    n = draw(st.sampled_from(dims))
    den = draw(st.integers(1, 400))
    a = draw(st.integers(0, den))
    b = draw(st.integers(0, a))
    return ExponentPoint(F(a, den), F(b, den), n)


class TestExponentPoint:
    def test_parse(self):
        pt = ExponentPoint.parse("3/5, 1/5", 3)
        assert pt.xy == (F(3, 5), F(1, 5))
        assert pt.admissible

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ExponentPoint(F(3, 2), F(0), 2)
        with pytest.raises(ValueError):
            ExponentPoint(F(1, 2), F(0), 1)
        with pytest.raises(ValueError):
            ExponentPoint.parse("1/2", 2)

    def test_string_form(self):
        assert str(P("1/2", 0, 2)) == "(1/2, 0/1)"
        assert format_fraction(F(-3, 4)) == "-3/4"


class TestSigma:
    def test_l2_point(self):
        pt = P("1/2", "1/2", 2)
        assert sigma_terms(pt) == (F(-1, 2), 0, 0)
        assert sigma(pt) == 0

    def test_focusing_endpoint(self):
        pt = P("1/2", 0, 2)
        assert sigma_terms(pt) == (F(1, 2), F(1, 4), 0)
        assert sigma(pt) == F(1, 2)

    def test_vanishes_at_p4(self):
        # maximands at (3/5, 1/5), n = 3: 3/5 - 3/5, 6/5 - 6/5, 9/5 - 2 (by hand)
        pt = P("3/5", "1/5", 3)
        assert sigma_terms(pt) == (0, 0, F(-1, 5))
        assert sigma(pt) == 0

    def test_rejects_inadmissible(self):
        with pytest.raises(InadmissibleError):
            sigma(P("1/4", "1/2", 2))

    @given(admissible_points(), st.integers(1, 50))
    def test_nonincreasing_in_inv_q(self, pt, k):
        lower = ExponentPoint(pt.inv_p, pt.inv_q * F(k, k + 1), pt.dim)
        assert sigma(lower) >= sigma(pt)

    @given(st.integers(2, 12), st.integers(1, 200), st.integers(0, 200))
    def test_diagonal_reduction(self, n, den, a):
        a = min(a, den)
        ip = F(a, den)
        pt = ExponentPoint(ip, ip, n)
        expected = max(ip - F(n - 1, 2), -(n - 1) * ip, n * ip - n + 1)
        assert sigma(pt) == expected
        if ip <= F(1, 2):
            assert sigma(pt) == max(ip - F(n - 1, 2), -(n - 1) * ip)


class TestDExponent:
    def test_examples(self):
        assert d_exponent(P("3/5", "1/5", 3)) == 0
        assert extra_term(P("3/5", "1/5", 3)) == F(-3, 10)
        assert d_exponent(P(0, 0, 3)) == 0
        assert sigma(P(0, 0, 3)) == 0

    def test_point_c(self):
        # sigma_3(C) = max(-1, -1/2, -1/2); extra term = 1/4 - 1/4 - 1/2
        pt = P("1/2", "1/2", 3)
        assert extra_term(pt) == F(-1, 2)
        assert d_exponent(pt) == F(-1, 2)

    def test_rejects_plane(self):
        with pytest.raises(ValueError):
            d_exponent(P("1/2", "1/2", 2))

    @settings(max_examples=300)
    @given(admissible_points(dims=(3, 4, 5, 6)))
    def test_equals_sigma_off_abc(self, pt):
        if classify_region(pt).tag != "ABC":
            assert d_exponent(pt) == sigma(pt)


class TestS2:
    def test_examples(self):
        assert s2(P("1/4", "1/4", 2)) == 0
        assert s2(P("1/2", "1/2", 2)) == 0
        assert s2(P(1, 0, 2)) == F(3, 2)
        assert s2(P(0, 0, 2)) == F(1, 2)

    def test_branch_boundary_q_equals_3p_prime(self):
        # q = 3p' at 1/p = 1/4: 1/q = 1/4
        pt = P("1/4", "1/4", 2)
        assert s2_branch_value(pt, 1) == s2_branch_value(pt, 2) == 0

    @given(st.integers(1, 300), st.integers(0, 300))
    def test_continuity_on_branch_lines(self, den, a):
        ip = F(min(a, den), den)
        for iq in ((1 - ip) / 3, 1 - ip):
            if iq <= ip:
                pt = ExponentPoint(ip, iq, 2)
                vals = {s2_branch_value(pt, b) for b in (1, 2, 3) if _adjacent(pt, b)}
                assert len(vals) == 1

    def test_branch_selection(self):
        assert s2_branch(P(0, 0, 2)) == 1
        assert s2_branch(P("1/2", "1/2", 2)) == 2
        assert s2_branch(P(1, "1/2", 2)) == 3


def _adjacent(pt, branch):
    ip, iq = pt.xy
    if branch == 1:
        return 3 * iq <= 1 - ip
    if branch == 2:
        return 3 * iq >= 1 - ip and iq <= 1 - ip
    return iq >= 1 - ip


class TestSn:
    def test_endpoint_orders(self):
        assert s_n(P(0, 0, 3)) == 1
        assert s_n(P(1, 0, 3)) == 2
        assert s_n(P("3/7", "2/7", 3)) == F(2, 7)

    def test_rejects_plane(self):
        with pytest.raises(ValueError):
            s_n(P(0, 0, 2))

    def test_rejects_outside(self):
        with pytest.raises(InadmissibleError):
            s_n(P("1/4", "1/2", 3))

    @pytest.mark.parametrize("n", [3, 4, 5, 7, 10])
    def test_continuity_on_shared_edges(self, n):
        v = figure1_vertices(n)
        tris = {tag: [v[c] for c in tag] for tag in TRIANGLE_ORDER}
        for t1 in TRIANGLE_ORDER:
            for t2 in TRIANGLE_ORDER:
                shared = set(tris[t1]) & set(tris[t2])
                if t1 >= t2 or len(shared) < 2:
                    continue
                a, b = sorted(shared)
                for k in range(11):
                    w = F(k, 10)
                    pt = ExponentPoint(a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1]), n)
                    assert s_n_branch_value(pt, t1) == s_n_branch_value(pt, t2), (t1, t2, pt)


class TestClassifyRegion:
    def test_vertex_c_tie_break(self):
        label = classify_region(P("1/2", "1/2", 3))
        assert (label.tag, label.boundary) == ("BCE", True)

    def test_interior_cde(self):
        label = classify_region(P("9/10", "1/5", 3))
        assert (label.tag, label.boundary) == ("CDE", False)

    def test_origin(self):
        label = classify_region(P(0, 0, 3))
        assert (label.tag, label.boundary) == ("AOE", True)

    def test_p4_on_edge_be(self):
        assert classify_region(P("3/5", "1/5", 3)).tag == "ABE"
        assert classify_region(P("3/5", "1/5", 3)).boundary

    def test_outside(self):
        assert classify_region(P("1/4", "1/2", 3)).tag == "OUTSIDE"

    def test_plane_rejected(self):
        with pytest.raises(ValueError):
            classify_region(P(0, 0, 2))

    @settings(max_examples=300)
    @given(admissible_points(dims=(3, 4, 6, 9)))
    def test_first_hit_is_deterministic(self, pt):
        a, b = classify_region(pt), classify_region(pt)
        assert a == b and a.tag in TRIANGLE_ORDER


class TestVertices:
    def test_n3(self):
        v = figure1_vertices(3)
        assert v["A"] == (F(1, 4), F(1, 4))
        assert v["B"] == (F(3, 7), F(2, 7))
        assert v["C"] == (F(1, 2), F(1, 2))
        assert v["D"] == (1, 1) and v["E"] == (1, 0)

    @pytest.mark.parametrize("n", range(3, 13))
    def test_b_is_smoothing_endpoint(self, n):
        ip0, iq0, s0 = smoothing_endpoint(n)
        assert figure1_vertices(n)["B"] == (ip0, iq0)
        assert s_n(ExponentPoint(ip0, iq0, n)) == s0
        # p0 = 2(n^2+2n-1)/((n-1)(n+3))
        assert 1 / ip0 == F(2 * (n * n + 2 * n - 1), (n - 1) * (n + 3))


class TestTransfer:
    def test_examples(self):
        pt = P("1/2", "1/2", 2)
        assert transfer_alpha(s2(pt), pt) == sigma(pt) == 0
        e = P(1, 0, 3)
        assert transfer_alpha(s_n(e), e) == 1 == sigma_terms(e)[2]
        assert transfer_alpha(F(1, 1), P("1/2", 0, 3)) == 0

    @given(st.fractions(-5, 5), st.fractions(-5, 5))
    def test_monotone_in_s(self, s, t):
        pt = P("1/3", "1/5", 4)
        if s <= t:
            assert transfer_alpha(s, pt) <= transfer_alpha(t, pt)


class TestIdentities:
    @settings(max_examples=500)
    @given(admissible_points(dims=(2,)))
    def test_plane_identity(self, pt):
        assert sigma(pt) == s2(pt) - F(1, 2) + pt.inv_q

    @settings(max_examples=500)
    @given(admissible_points(dims=(3, 4, 5, 8)))
    def test_higher_identity(self, pt):
        n = pt.dim
        assert d_exponent(pt) == s_n(pt) - F(n - 1, 2) + pt.inv_q

    def test_abc_branch_is_extra_term(self):
        rng = random.Random(3)
        hits = 0
        while hits < 200:
            pt = random_admissible_point(rng, 3)
            if classify_region(pt).tag == "ABC":
                hits += 1
                assert s_n_branch_value(pt, "ABC") - 1 + pt.inv_q == extra_term(pt)


class TestQuadrangle:
    def test_plane_degenerates(self):
        q = quadrangle_Q(2)
        assert q.corners[1] == q.corners[2] == (F(1, 2), F(1, 2))

    def test_corners(self):
        assert quadrangle_Q(3).corners[3] == (F(3, 5), F(1, 5))
        assert quadrangle_Q(10).corners[1] == (F(9, 10), F(9, 10))
        with pytest.raises(ValueError):
            quadrangle_Q(1)

    def test_corners_lie_on_closure(self):
        for n in range(2, 9):
            Q = quadrangle_Q(n)
            for c in Q.corners:
                assert Q.contains(ExponentPoint(c[0], c[1], n))

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_recovery(self, n):
        rng = random.Random(n)
        Q = quadrangle_Q(n)
        inside = outside = 0
        while inside < 300 or outside < 300:
            pt = random_admissible_point(rng, n, max_den=331)
            if Q.contains(pt, closed=False):
                inside += 1
                assert d_exponent(pt) < 0
            elif not Q.contains(pt):
                outside += 1
                assert sigma(pt) > 0
