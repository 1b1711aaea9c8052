"""Cyclic phases and the closed-chain trace identity.

Flat two-copy golden, derived by hand: with u = lambda(z (x) zb), both
sides of the trace identity equal nu^2.  The left side is the chain
trace of u . u, which only shifts the nu-level; the right side pairs
u (x) u against e^G with G = -nu^{-1}(z1 - z2)(zb1 - zb2), where the
four contributing chains add up as nu^2 - nu^2 - nu^2 + 2 nu^2.
"""

import random

import pytest

from jetstar.calabi import (
    annihilator_residual,
    calabi_g,
    chain_trace,
    copy_space,
    critical_check,
    factorizable_trace,
    frozen_phase,
    main_theorem_residual,
    w_functional,
)
from jetstar.diffop import PointDistribution, tensor_dist
from jetstar.distalg import bullet, lambda_of, n_trace, tensor
from jetstar.kernel import (
    ANTI,
    HOLO,
    CRat,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    jet_deriv,
)
from jetstar.oscact import PhaseJet
from jetstar.star import (
    FlatStarEngine,
    PotentialJet,
    StarEngine,
    potential_flat,
    potential_fubini_study,
    potential_hyperbolic,
)

SP = VarSpace(1, 1)
TR = TruncationSpec(-2, 4, 8)
TR_H = TruncationSpec(-2, 3, 8)

FLAT = FlatStarEngine(1, TR)
FLAT2 = FlatStarEngine(2, TR)
HYP = StarEngine(potential_hyperbolic(1, TR_H))

DELTA = PointDistribution.delta(SP, TR)


def jet_zw(p, q, space=SP, trunc=TR):
    """The monomial z^p zb^q on the first axis of a single copy."""
    exps = [0] * space.n_vars
    exps[space.index(0, HOLO, 0)] = p
    exps[space.index(0, ANTI, 0)] = q
    return Jet.monomial(space, trunc, 0, tuple(exps), 1)


def lam_pair(p, q, engine=FLAT):
    return lambda_of(tensor(jet_zw(p, 0, engine.space, engine.trunc),
                            jet_zw(0, q, engine.space, engine.trunc)), engine)


def random_split_poly(rng, kind, space=SP, trunc=TR):
    """Random polynomial of one kind only, degree <= 2, small integer coefficients."""
    terms = {}
    for _ in range(3):
        deg = rng.randint(0, 2)
        exps = [0] * space.n_vars
        for _ in range(deg):
            exps[space.index(0, kind, rng.randrange(space.cdim))] += 1
        c = rng.randint(-3, 3)
        key = (0, tuple(exps))
        if c:
            terms[key] = terms.get(key, CRat(0)) + CRat(c)
    terms = {k: v for k, v in terms.items() if v}
    if not terms:
        return Jet.const(space, trunc, 1)
    return Jet(space, trunc, terms)


def random_factorizable(rng, l, engine):
    pairs = []
    for _ in range(l):
        f = random_split_poly(rng, HOLO, engine.space, engine.trunc)
        g = random_split_poly(rng, ANTI, engine.space, engine.trunc)
        pairs.append((f, g))
    us = [lambda_of(tensor(f, g), engine) for f, g in pairs]
    return pairs, us


# -- the cyclic phase


def test_one_copy_phase_is_zero():
    assert calabi_g(FLAT.potential, 1).body.is_zero
    assert calabi_g(HYP.potential, 1).body.is_zero


def test_rejects_empty_cycle():
    with pytest.raises(ValueError, match="at least one copy"):
        calabi_g(FLAT.potential, 0)


def test_flat_pair_golden():
    sp2 = copy_space(1, 2)
    assert sp2 == VarSpace(2, 1)
    z1, zb1, z2, zb2 = (Jet.var(sp2, TR, i) for i in range(4))
    want = ((z1 - z2) * (zb1 - zb2)).shift_nu(-1) * CRat(-1)
    assert calabi_g(FLAT.potential, 2).body == want


def _gauge_shift(rng, space, trunc):
    """Random a(z) + b(zb); the nu^{-1} slice keeps degree >= 2."""
    body = Jet.zero(space, trunc)
    for kind in (HOLO, ANTI):
        for _ in range(2):
            nu = rng.choice([-1, 0, 1])
            deg = rng.randint(2 if nu < 0 else 1, 3)
            exps = [0] * space.n_vars
            exps[space.index(0, kind, rng.randrange(space.cdim))] += deg
            body = body + Jet.monomial(space, trunc, nu, tuple(exps), rng.randint(-3, 3))
    return body


def test_gauge_invariance():
    rng = random.Random(41)
    for pot in (FLAT.potential, HYP.potential):
        for _ in range(5):
            shifted = PotentialJet(
                pot.body + _gauge_shift(rng, pot.space, pot.trunc),
                pot.tail_degree,
                pot.name,
            )
            for l in (2, 3):
                assert calabi_g(shifted, l) == calabi_g(pot, l)


# -- the frozen phase and its critical point


def test_frozen_flat_golden():
    ph = frozen_phase(FLAT.potential, 1)
    assert ph.body == Jet.monomial(SP, TR, -1, (1, 1), -1)
    assert ph.body.eval0().is_zero
    for i in range(2):
        assert jet_deriv(ph.body, i).eval0().is_zero


def test_frozen_flat_hessian_nondegenerate():
    ph = frozen_phase(FLAT.potential, 1)
    h = [[jet_deriv(jet_deriv(ph.body, i), j).eval0() for j in range(2)] for i in range(2)]
    assert h[0][1] == NuSeries.nu(-1, -1)
    det = h[0][0] * h[1][1] - h[0][1] * h[1][0]
    assert det == NuSeries.nu(-2, -1)


def test_frozen_two_copies_valid_phase():
    ph = frozen_phase(HYP.potential, 2)
    assert ph.body.eval0().is_zero


def test_critical_check_builtins():
    for make in (potential_flat, potential_hyperbolic, potential_fubini_study):
        pot = make(1, TR_H)
        for l in range(1, 4):
            rep = critical_check(pot, l)
            assert rep.ok, (pot.name, l, rep.witnesses)
            assert not rep.witnesses
    rep = critical_check(potential_flat(2, TR), 2)
    assert rep.ok


# -- trace identity, exact flat cases


def test_main_one_copy():
    assert main_theorem_residual([DELTA], FLAT).is_zero
    assert main_theorem_residual([lam_pair(1, 1)], FLAT).is_zero


def test_main_flat_pair_golden():
    u = lam_pair(1, 1)
    assert n_trace(bullet(u, u, FLAT)) == NuSeries.nu(2)
    assert main_theorem_residual([u, u], FLAT).is_zero


def test_main_flat_delta_pair():
    assert n_trace(bullet(DELTA, DELTA, FLAT)) == 1
    assert main_theorem_residual([DELTA, DELTA], FLAT).is_zero


def test_main_flat_triple():
    u = lam_pair(1, 1)
    assert chain_trace([u, u, u], FLAT) == NuSeries.nu(3)
    assert main_theorem_residual([u, u, u], FLAT).is_zero


def test_main_flat_mixed_tuple():
    us = [lam_pair(2, 2), lam_pair(1, 1)]
    assert main_theorem_residual(us, FLAT).is_zero


def test_main_random_factorizable():
    rng = random.Random(42)
    for l in (1, 2, 3):
        for _ in range(2):
            _, us = random_factorizable(rng, l, FLAT)
            assert main_theorem_residual(us, FLAT).is_zero


def test_main_two_axes():
    f = jet_zw(1, 0, FLAT2.space, TR) * jet_zw(0, 0, FLAT2.space, TR)
    exps = [0] * 4
    exps[FLAT2.space.index(0, HOLO, 1)] = 1
    f = f + Jet.monomial(FLAT2.space, TR, 0, tuple(exps), 2)
    g = jet_zw(0, 1, FLAT2.space, TR)
    u = lambda_of(tensor(f, g), FLAT2)
    assert main_theorem_residual([u, u], FLAT2).is_zero


def test_main_hyperbolic_pair():
    u = lam_pair(1, 1, HYP)
    assert main_theorem_residual([u, u], HYP).is_zero


def test_trace_is_cyclic():
    us = [lam_pair(2, 1), lam_pair(1, 2), DELTA]
    rotated = us[1:] + us[:1]
    assert chain_trace(us, FLAT) == chain_trace(rotated, FLAT)


def test_factorizable_product_formula():
    rng = random.Random(43)
    for l in (2, 3):
        pairs, us = random_factorizable(rng, l, FLAT)
        assert chain_trace(us, FLAT) == factorizable_trace(pairs, FLAT)


def test_main_detects_phase_spoil():
    # nu^{-1} z1 zb2 doubles one cross coupling of the flat pair phase
    sp2 = copy_space(1, 2)
    shift = PhaseJet(Jet.monomial(sp2, TR, -1, (1, 0, 0, 1), 1))
    u = lam_pair(1, 1)
    res = main_theorem_residual([u, u], FLAT, phase_shift=shift)
    assert res == NuSeries.nu(2, -1)


# -- the W functional and the annihilators


def test_w_functional_matches_chain_trace():
    # block traces reach down by |gamma|/2, so the tensor must keep rows
    # above nu_max or their in-window W contributions are lost
    u = lam_pair(1, 1)
    v = lam_pair(2, 2)
    sp2 = copy_space(1, 2)
    wide = TruncationSpec(TR.nu_min, 2 * TR.nu_max, TR.deg_max)
    t = tensor_dist([u, v], sp2, wide)
    assert w_functional(t, FLAT) == chain_trace([u, v], FLAT)
    assert w_functional(u, FLAT) == n_trace(u)


def test_w_functional_dimension_guard():
    with pytest.raises(ValueError, match="dimensions differ"):
        w_functional(DELTA, FLAT2)


def test_annihilator_one_copy():
    u = lam_pair(1, 1)
    for kind in (HOLO, ANTI):
        assert annihilator_residual([u], FLAT, 0, 0, kind).is_zero


def test_annihilator_flat_pair():
    u = lam_pair(1, 1)
    for copy in (0, 1):
        for kind in (HOLO, ANTI):
            assert annihilator_residual([u, u], FLAT, copy, 0, kind).is_zero


def test_annihilator_delta_pair():
    assert annihilator_residual([DELTA, DELTA], FLAT, 0, 0, HOLO).is_zero


def test_annihilator_random():
    rng = random.Random(44)
    _, us = random_factorizable(rng, 2, FLAT)
    for copy in (0, 1):
        assert annihilator_residual(us, FLAT, copy, 0, HOLO).is_zero
        assert annihilator_residual(us, FLAT, copy, 0, ANTI).is_zero


def test_annihilator_hyperbolic():
    u = lam_pair(1, 1, HYP)
    assert annihilator_residual([u, u], HYP, 0, 0, HOLO).is_zero
