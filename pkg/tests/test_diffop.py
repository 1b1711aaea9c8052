"""Operators and origin-supported distributions.

Frozen values here were computed by hand from the defining formulas
(Leibniz expansion for composition, the finite logarithm series for the
oscillatory test) before the implementation existed.
"""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from jetstar.kernel import (
    CRat,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    coord_jets,
    nu_jet,
)
from jetstar.diffop import (
    BilinearForm,
    DiffOperator,
    OscillatoryReport,
    PointDistribution,
    ad_mult,
    beta_form,
    dist_is_natural,
    dist_of_operator,
    dist_to_operator,
    exp_operator,
    is_natural,
    is_oscillatory,
    log_operator_unipotent,
    matrix_rank,
    op_apply,
    op_compose,
    operator_from_jet_action,
    tensor_dist,
)

SP = VarSpace(1, 1)
TR = TruncationSpec(-2, 4, 6)


def d_op(var, nu_exp=0):
    return DiffOperator.deriv(SP, TR, var, nu_exp)


def test_constructor_normalizes_nu_content():
    z, zb = coord_jets(SP, TR)
    nu = nu_jet(SP, TR)
    a = DiffOperator(SP, TR, {(0, (1, 0)): nu * z + zb})
    assert set(a.terms) == {(0, (1, 0)), (1, (1, 0))}
    assert a.terms[(1, (1, 0))] == z
    assert a.terms[(0, (1, 0))] == zb


def test_op_apply_golden():
    z, zb = coord_jets(SP, TR)
    a = d_op(0, nu_exp=1)
    got = op_apply(a, z * z * zb)
    assert got == 2 * nu_jet(SP, TR) * z * zb


def test_compose_leibniz_golden():
    # d_z after multiplication by z is z d_z + 1
    z, zb = coord_jets(SP, TR)
    comp = op_compose(d_op(0), DiffOperator.mult(z))
    one = Jet.const(SP, TR, 1)
    want = DiffOperator(SP, TR, {(0, (1, 0)): z, (0, (0, 0)): one})
    assert comp == want


def test_compose_is_application():
    z, zb = coord_jets(SP, TR)
    a = DiffOperator(SP, TR, {(1, (1, 1)): Jet.const(SP, TR, 1), (0, (1, 0)): zb})
    b = DiffOperator(SP, TR, {(0, (0, 1)): z * z})
    h = z * z * zb + z * zb * zb
    assert op_apply(op_compose(a, b), h) == op_apply(a, op_apply(b, h))


def test_ad_mult_golden():
    # [z, d_z] acts as -1
    z, zb = coord_jets(SP, TR)
    got = ad_mult(z, d_op(0))
    want = DiffOperator(SP, TR, {(0, (0, 0)): Jet.const(SP, TR, -1)})
    assert got == want


def test_ad_mult_double_leibniz():
    # [nu^-1 z zb, nu^2 d dbar] = -nu (z d_z + zb d_zb + 1)
    z, zb = coord_jets(SP, TR)
    phi = (z * zb).shift_nu(-1)
    a = DiffOperator(SP, TR, {(2, (1, 1)): Jet.const(SP, TR, 1)})
    want = DiffOperator(
        SP,
        TR,
        {(1, (1, 0)): -z, (1, (0, 1)): -zb, (1, (0, 0)): Jet.const(SP, TR, -1)},
    )
    assert ad_mult(phi, a) == want


def test_ad_mult_nilpotent_in_order():
    z, zb = coord_jets(SP, TR)
    phi = z * z * zb
    a = DiffOperator(SP, TR, {(2, (1, 1)): Jet.const(SP, TR, 1)})
    once = ad_mult(phi, a)
    twice = ad_mult(phi, once)
    third = ad_mult(phi, twice)
    assert twice.max_order() == 0 and not twice.is_zero
    assert third.is_zero


def test_ad_mult_is_commutator():
    z, zb = coord_jets(SP, TR)
    phi = z * zb + nu_jet(SP, TR) * z
    a = DiffOperator(SP, TR, {(0, (2, 1)): Jet.const(SP, TR, 1), (1, (1, 0)): zb})
    h = z * z * zb
    lhs = op_apply(ad_mult(phi, a), h)
    rhs = phi * op_apply(a, h) - op_apply(a, phi * h)
    assert lhs == rhs


def test_is_natural():
    ok, w = is_natural(d_op(0, nu_exp=1))
    assert ok and w is None
    bad = DiffOperator(SP, TR, {(0, (0, 1)): Jet.const(SP, TR, 1)})
    ok, w = is_natural(bad)
    assert not ok and w == (0, (0, 1))


def test_exp_log_roundtrip():
    x = DiffOperator(SP, TR, {(2, (1, 1)): Jet.const(SP, TR, 1)})
    a = exp_operator(x)
    # exp(nu^2 d d) = sum nu^{2k}/k! d^k db^k within the window
    want = {
        (0, (0, 0)): Jet.const(SP, TR, 1),
        (2, (1, 1)): Jet.const(SP, TR, 1),
        (4, (2, 2)): Jet.const(SP, TR, Fraction(1, 2)),
    }
    assert a == DiffOperator(SP, TR, want)
    assert log_operator_unipotent(a) == x


def test_oscillatory_gaussian():
    # exp(nu d db) carries the exponent nu * log = nu^2 d db
    a = exp_operator(DiffOperator(SP, TR, {(1, (1, 1)): Jet.const(SP, TR, 1)}))
    rep = is_oscillatory(a)
    assert rep.ok
    assert rep.exponent == DiffOperator(SP, TR, {(2, (1, 1)): Jet.const(SP, TR, 1)})


def test_oscillatory_first_order():
    # 1 + nu d_z has exponent nu^2 d - nu^3 d^2/2 + nu^4 d^3/3, natural
    a = DiffOperator.identity(SP, TR) + d_op(0, nu_exp=1)
    rep = is_oscillatory(a)
    assert rep.ok
    want = DiffOperator(
        SP,
        TR,
        {
            (2, (1, 0)): Jet.const(SP, TR, 1),
            (3, (2, 0)): Jet.const(SP, TR, Fraction(-1, 2)),
            (4, (3, 0)): Jet.const(SP, TR, Fraction(1, 3)),
        },
    )
    assert rep.exponent == want


def test_oscillatory_rejects_high_order():
    # 1 + nu d_z^2 fails: the nu^3 term of the exponent has order 4
    bad = DiffOperator(SP, TR, {(1, (2, 0)): Jet.const(SP, TR, 1)})
    rep = is_oscillatory(DiffOperator.identity(SP, TR) + bad)
    assert not rep.ok
    assert rep.reason == "exponent is not natural"
    assert rep.witness == (3, (4, 0))


def test_oscillatory_rejects_non_unit_head():
    z, zb = coord_jets(SP, TR)
    with pytest.raises(ValueError, match="identity"):
        is_oscillatory(DiffOperator.mult(1 + z))
    with pytest.raises(ValueError, match="identity"):
        is_oscillatory(d_op(0, nu_exp=1))


def test_oscillatory_identity():
    rep = is_oscillatory(DiffOperator.identity(SP, TR))
    assert rep.ok and rep.exponent.is_zero


def test_operator_from_jet_action_roundtrip():
    z, zb = coord_jets(SP, TR)
    a = DiffOperator(SP, TR, {(1, (1, 1)): Jet.const(SP, TR, 1), (0, (1, 0)): z})
    action = {}
    for p in range(3):
        for q in range(3 - p):
            mono = Jet.monomial(SP, TR, 0, (p, q))
            action[(p, q)] = op_apply(a, mono)
    assert operator_from_jet_action(action, SP, TR, 2) == a


def test_operator_from_jet_action_inconsistent():
    # order-3 action cannot be matched by an order-2 operator
    a = DiffOperator(SP, TR, {(0, (3, 0)): Jet.const(SP, TR, 1)})
    action = {}
    for p in range(4):
        for q in range(4 - p):
            mono = Jet.monomial(SP, TR, 0, (p, q))
            action[(p, q)] = op_apply(a, mono)
    with pytest.raises(ValueError, match="order <= 2"):
        operator_from_jet_action(action, SP, TR, 2)


def test_dist_apply_golden():
    z, zb = coord_jets(SP, TR)
    u = PointDistribution(SP, TR, {(1, (0, 0)): 1, (2, (1, 1)): 1})
    assert u.apply(z * zb) == NuSeries({2: 1})
    assert u.apply(Jet.const(SP, TR, 1)) == NuSeries({1: 1})


def test_dist_pairing_factorial():
    u = PointDistribution(SP, TR, {(0, (2, 0)): 1})
    mono = Jet.monomial(SP, TR, 0, (2, 0))
    assert u.apply(mono) == NuSeries({0: 2})
    assert u.apply(Jet.monomial(SP, TR, 0, (1, 1))).is_zero


def test_dist_apply_certified_window():
    u = PointDistribution(SP, TR, {(-1, (0, 0)): 1})
    h = Jet.const(SP, TR, 1)
    got = u.apply(h)
    # a nu^-1 mass cannot see past nu^3 of a window-4 argument
    assert got.nu_max == 3


def test_dist_operator_roundtrips():
    u = PointDistribution(SP, TR, {(1, (1, 0)): CRat(1, 2), (2, (1, 1)): 3})
    assert dist_of_operator(dist_to_operator(u)) == u
    z, zb = coord_jets(SP, TR)
    a = DiffOperator(SP, TR, {(1, (1, 0)): Jet.const(SP, TR, 1) + z})
    # only the value of the coefficient at the base point survives
    assert dist_of_operator(a) == PointDistribution(SP, TR, {(1, (1, 0)): 1})


def test_dist_is_natural():
    ok, _ = dist_is_natural(PointDistribution(SP, TR, {(1, (1, 0)): 1}))
    assert ok
    ok, w = dist_is_natural(PointDistribution(SP, TR, {(0, (0, 1)): 1}))
    assert not ok and w == (0, (0, 1))


def test_tensor_dist():
    sp2 = VarSpace(2, 1)
    tr = TR
    u = PointDistribution(SP, TR, {(1, (1, 0)): 1})
    v = PointDistribution(SP, TR, {(0, (0, 1)): 2})
    w = tensor_dist([u, v], sp2, tr)
    assert w == PointDistribution(sp2, tr, {(1, (1, 0, 0, 1)): 2})
    h = Jet.monomial(sp2, tr, 0, (1, 0, 0, 1))
    assert w.apply(h) == NuSeries({1: 2})


def test_matrix_rank():
    one, zero = CRat(1), CRat(0)
    assert matrix_rank([[one, zero], [zero, one]]) == 2
    assert matrix_rank([[one, one], [one, one]]) == 1
    assert matrix_rank([[zero, zero], [zero, zero]]) == 0


def test_beta_form_golden():
    u = PointDistribution(SP, TR, {(0, (0, 0)): 1, (1, (1, 1)): 1})
    b = beta_form(u)
    assert b.entry(0, 1) == 1 and b.entry(1, 0) == 1
    assert b.entry(0, 0) == 0 and b.entry(1, 1) == 0
    assert b.rank == 2


def test_beta_form_diagonal_factor():
    # repeated index picks up the factorial 2
    u = PointDistribution(SP, TR, {(0, (0, 0)): 1, (1, (2, 0)): CRat(Fraction(1, 2))})
    b = beta_form(u)
    assert b.entry(0, 0) == 1
    assert b.rank == 1


def test_beta_form_preconditions():
    with pytest.raises(ValueError, match="delta"):
        beta_form(PointDistribution(SP, TR, {(1, (1, 1)): 1}))
    with pytest.raises(ValueError, match="order"):
        beta_form(PointDistribution(SP, TR, {(0, (0, 0)): 1, (1, (2, 1)): 1}))


# -- property tests
#
# identities between composition routes hold exactly only while every
# intermediate coefficient stays inside the degree window, so the
# strategies run on a window wide enough for three degree-4 factors

TRP = TruncationSpec(-2, 4, 12)

scalars = st.integers(-3, 3)
exps2 = st.tuples(st.integers(0, 2), st.integers(0, 2))


@st.composite
def jets(draw, nu_lo=0, nu_hi=2):
    n = draw(st.integers(1, 3))
    terms = {}
    for _ in range(n):
        nu = draw(st.integers(nu_lo, nu_hi))
        e = draw(exps2)
        terms[(nu, e)] = CRat(draw(scalars), draw(scalars))
    return Jet(SP, TRP, terms)


@st.composite
def operators(draw):
    n = draw(st.integers(1, 2))
    terms = {}
    for _ in range(n):
        r = draw(st.integers(0, 2))
        g = draw(exps2)
        terms[(r, g)] = draw(jets())
    return DiffOperator(SP, TRP, terms)


@settings(max_examples=40, deadline=None)
@given(operators(), operators(), jets())
def test_compose_extensional(a, b, h):
    assert op_apply(op_compose(a, b), h) == op_apply(a, op_apply(b, h))


@settings(max_examples=30, deadline=None)
@given(operators(), operators(), operators())
def test_compose_associative(a, b, c):
    assert op_compose(op_compose(a, b), c) == op_compose(a, op_compose(b, c))


@settings(max_examples=30, deadline=None)
@given(jets(), operators(), operators())
def test_ad_mult_derivation(phi, a, b):
    lhs = ad_mult(phi, op_compose(a, b))
    rhs = op_compose(ad_mult(phi, a), b) + op_compose(a, ad_mult(phi, b))
    assert lhs == rhs
