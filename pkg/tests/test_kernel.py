from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from jetstar.kernel import (
    CRat,
    CR_I,
    CR_ONE,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    coord_jets,
    exp_nu_nonneg,
    filtration_degree,
    invert_jet_matrix,
    jet_deriv,
    jet_inverse,
    jet_mul,
    jet_substitute,
    nu_jet,
    parse_jet,
    render_jet,
)

SP = VarSpace(1, 1)
TR = TruncationSpec(-2, 4, 8)


def zzb():
    z, zb = coord_jets(SP, TR)
    return z, zb


class TestCRat:
    def test_field_ops(self):
        a = CRat(Fraction(1, 2), Fraction(3))
        b = CRat(2, Fraction(-1, 3))
        assert a + b == CRat(Fraction(5, 2), Fraction(8, 3))
        assert a * b - b * a == CRat(0)
        assert (a / b) * b == a
        assert CR_I * CR_I == CRat(-1)

    def test_div_by_zero(self):
        with pytest.raises(ZeroDivisionError):
            CRat(1) / CRat(0)

    def test_abs2_exact(self):
        assert CRat(Fraction(3, 5), Fraction(4, 5)).abs2() == 1


class TestNuSeries:
    def test_mul_window(self):
        a = NuSeries({0: 1, 1: 2}, nu_max=4)
        b = NuSeries({-1: 1}, nu_min=-1, nu_max=4)
        c = a * b
        assert c.coeff(-1) == 1 and c.coeff(0) == 2
        assert c.nu_max == 3  # 4 + (-1)

    def test_inverse_geometric(self):
        a = NuSeries({0: 1, 1: -1}, nu_max=4)
        inv = a.inverse()
        assert [inv.coeff(k) for k in range(5)] == [CRat(1)] * 5
        assert (a * inv).coeff(0) == 1
        assert all((a * inv).coeff(k) == 0 for k in range(1, 4))

    def test_inverse_laurent_shift(self):
        a = NuSeries({-1: 2}, nu_min=-1, nu_max=3)
        inv = a.inverse()
        assert inv.coeff(1) == CRat(Fraction(1, 2))
        assert (a * inv).coeff(0) == 1

    def test_exp_oracle(self):
        # Maclaurin coefficients of exp, frozen independently
        a = NuSeries({1: 3}, nu_max=4)
        e = exp_nu_nonneg(a)
        assert [e.coeff(k) for k in range(5)] == [
            CRat(1),
            CRat(3),
            CRat(Fraction(9, 2)),
            CRat(Fraction(9, 2)),
            CRat(Fraction(27, 8)),
        ]

    def test_exp_rejects_negative_valuation(self):
        with pytest.raises(ValueError):
            exp_nu_nonneg(NuSeries({-1: 1}, nu_min=-1, nu_max=2))

    def test_exp_rejects_constant(self):
        with pytest.raises(ValueError):
            exp_nu_nonneg(NuSeries({0: 1}, nu_max=2))


class TestVarSpace:
    def test_single_copy_names(self):
        sp = VarSpace(1, 2)
        assert sp.names() == ["z1", "z2", "zb1", "zb2"]

    def test_multi_copy_names_and_order(self):
        sp = VarSpace(2, 1)
        assert sp.names() == ["z1_c1", "zb1_c1", "z1_c2", "zb1_c2"]
        assert sp.index(1, 1, 0) == 3
        assert sp.copy_of(2) == 1 and sp.kind_of(2) == 0


class TestJetBasics:
    def test_mul_window_drop(self):
        z, zb = zzb()
        a = nu_jet(SP, TR, -1) * z
        b = nu_jet(SP, TR) * zb
        assert a * b == z * zb

    def test_deriv(self):
        z, zb = zzb()
        got = jet_deriv(z * z * zb, 0)
        assert got == 2 * (z * zb)

    def test_deg_cap(self):
        z, _ = zzb()
        tight = TruncationSpec(0, 2, 3)
        zz = Jet.var(SP, tight, 0, 2)
        assert (zz * zz).is_zero  # degree 4 > cap 3

    def test_eval0(self):
        z, zb = zzb()
        j = z * zb + nu_jet(SP, TR) * 5 + Jet.const(SP, TR, 7)
        s = j.eval0()
        assert s.coeff(0) == 7 and s.coeff(1) == 5

    def test_substitute_roundtrip(self):
        sp2 = VarSpace(2, 1)
        tr = TR
        z, zb = zzb()
        j = z * z * zb + nu_jet(SP, TR, -1) * z
        fwd = jet_substitute(j, sp2, {0: 2, 1: 3}, trunc=tr)
        back = jet_substitute(fwd, SP, {2: 0, 3: 1, 0: None, 1: None}, trunc=tr)
        assert back == j

    def test_substitute_freeze(self):
        z, zb = zzb()
        j = z * zb + z
        frozen = jet_substitute(j, SP, {0: 0, 1: None})
        assert frozen == z

    def test_kind_check(self):
        z, zb = zzb()
        with pytest.raises(ValueError):
            jet_substitute(z * zb, SP, {0: 0, 1: 0}, kind_check=True)


class TestFiltration:
    def test_frozen_values(self):
        z, _ = zzb()
        assert filtration_degree(nu_jet(SP, TR)) == 2
        assert filtration_degree(z) == 1
        assert filtration_degree(nu_jet(SP, TR, -1) * z * z) == 0
        assert filtration_degree(Jet.zero(SP, TR)) is None


class TestInvertJetMatrix:
    def test_geometric_series_oracle(self):
        # 1/(1 - z*zb) = sum (z*zb)^k, frozen to the degree cap
        z, zb = zzb()
        a = Jet.const(SP, TR, 1) - z * zb
        inv = invert_jet_matrix([[a]])[0][0]
        expect = Jet.zero(SP, TR)
        p = Jet.const(SP, TR, 1)
        for _ in range(5):
            expect = expect + p
            p = p * (z * zb)
        assert inv == expect
        assert a * inv == Jet.const(SP, TR, 1)

    def test_jet_inverse_alias(self):
        z, zb = zzb()
        a = Jet.const(SP, TR, 2) + nu_jet(SP, TR) * z * zb
        assert jet_inverse(a) * a == Jet.const(SP, TR, 1)

    def test_two_by_two(self):
        z, zb = zzb()
        one = Jet.const(SP, TR, 1)
        m = [[one + z * zb, z * 0], [z * zb, one * 2]]
        inv = invert_jet_matrix(m)
        for i in range(2):
            for j in range(2):
                s = sum((m[i][k] * inv[k][j] for k in range(2)), Jet.zero(SP, TR))
                assert s == (one if i == j else Jet.zero(SP, TR))

    def test_singular_constant_part(self):
        z, zb = zzb()
        with pytest.raises(ValueError):
            invert_jet_matrix([[z * zb]])

    def test_nonpositive_filtration_rejected(self):
        z, zb = zzb()
        a = Jet.const(SP, TR, 1) + nu_jet(SP, TR, -1) * z * zb
        with pytest.raises(ValueError):
            invert_jet_matrix([[a]])


class TestTextFormat:
    def test_render_golden(self):
        z, zb = zzb()
        assert render_jet(z * zb + nu_jet(SP, TR)) == "z1*zb1 + nu"

    def test_parse_golden(self):
        z, zb = zzb()
        assert parse_jet("nu + z1*zb1", SP, TR) == z * zb + nu_jet(SP, TR)

    def test_complex_and_negative(self):
        z, zb = zzb()
        j = z * CRat(Fraction(1, 2), Fraction(-3, 4)) - zb * 2 + nu_jet(SP, TR, -1)
        text = render_jet(j)
        assert parse_jet(text, SP, TR) == j

    def test_spec_coefficient_form(self):
        z, _ = zzb()
        got = parse_jet("1/2+3/4 i * z1", SP, TR)
        assert got == Jet.const(SP, TR, Fraction(1, 2)) + z * CRat(0, Fraction(3, 4))

    def test_strict_window(self):
        with pytest.raises(ValueError):
            parse_jet("nu^-7", SP, TR)

    def test_multi_copy_roundtrip(self):
        sp = VarSpace(2, 2)
        tr = TruncationSpec(-1, 3, 6)
        j = (
            Jet.var(sp, tr, sp.index(0, 0, 1)) * Jet.var(sp, tr, sp.index(1, 1, 0))
            + Jet.nu(sp, tr, 2) * 3
        )
        assert parse_jet(render_jet(j), sp, tr) == j


# hypothesis strategies kept small so runs stay quick

coeffs = st.integers(-3, 3).map(CRat)
exps1 = st.tuples(st.integers(0, 2), st.integers(0, 2))
nus = st.integers(-1, 2)


@st.composite
def jets(draw):
    n = draw(st.integers(0, 4))
    terms = {}
    for _ in range(n):
        key = (draw(nus), draw(exps1))
        terms[key] = draw(coeffs)
    return Jet(SP, TR, terms)


@settings(max_examples=60, deadline=None)
@given(jets(), jets(), jets())
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c


@settings(max_examples=60, deadline=None)
@given(jets(), jets())
def test_mul_associative_within_window(a, b):
    one = Jet.const(SP, TR, 1)
    assert (a * b) * one == a * (b * one)


@settings(max_examples=60, deadline=None)
@given(jets(), jets())
def test_filtration_inequality(a, b):
    fa, fb = filtration_degree(a), filtration_degree(b)
    fab = filtration_degree(a * b)
    if fa is not None and fb is not None and fab is not None:
        assert fab >= fa + fb


@settings(max_examples=60, deadline=None)
@given(jets())
def test_text_roundtrip(a):
    assert parse_jet(render_jet(a), SP, TR) == a


@settings(max_examples=40, deadline=None)
@given(jets())
def test_truncation_coherence(a):
    # truncating after a product equals computing in the tighter window
    tight = TruncationSpec(0, 2, 4)
    b = a.retruncate(tight)
    z, zb = zzb()
    lhs = (a * (z * zb)).retruncate(tight)
    rhs = b.retruncate(tight) * (z * zb).retruncate(tight)
    assert lhs == rhs
