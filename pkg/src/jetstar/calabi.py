"""Cyclic multi-point phase functions and the trace identity verifier.

For a classifying potential P the cyclic l-point function is

    G(x_1, ..., x_l) = sum_i P(z_i, zb_{i+1}) - sum_i P(z_i, zb_i)

with indices mod l.  It vanishes to second order at the diagonal base
point, is blind to gauge shifts P -> P + a(z) + b(zb), and collapses to
zero at l = 1.  For the flat one-dimensional potential and l = 2 it is
the closed form -nu^{-1}(z_1 - z_2)(zb_1 - zb_2).

The main identity equates two scalars built from natural distributions
u_1, ..., u_l:

    trace(u_1 . ... . u_l)  =  <(u_1 (x) ... (x) u_l) o e^G, 1>,

bullet chain on the left, oscillatory action on the right.  The right
side is evaluated through conjugation only; e^G itself is never formed.
The annihilator identities state that the transpose of nu d_i - nu d_iG
in any coordinate direction lands in the kernel of the same trace
functional, which is realized here by splitting each derivative term of
an l-copy distribution into per-copy blocks and tracing the bullet
chain of their preimages.
"""

from dataclasses import dataclass

from .diffop import PointDistribution, tensor_dist
from .distalg import bullet, c_mul, c_trace, lambda_g_inverse, n_trace
from .kernel import (
    ANTI,
    HOLO,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    jet_deriv,
    jet_substitute,
    mtotal,
)
from .oscact import FieldJet, PhaseJet, exp_pair_one, transpose_field
from .star import PotentialJet, reframed


def copy_space(m: int, l: int) -> VarSpace:
    return VarSpace(l, m)


def _pair_term(body: Jet, target: VarSpace, hol_copy: int, ant_copy: int) -> Jet:
    """P(z_i, zb_j): relabel the single-copy potential variables."""
    src = body.space
    plan = {}
    for a in range(src.cdim):
        plan[src.index(0, HOLO, a)] = target.index(hol_copy, HOLO, a)
        plan[src.index(0, ANTI, a)] = target.index(ant_copy, ANTI, a)
    return jet_substitute(body, target, plan)


def calabi_g(pot: PotentialJet, l: int) -> PhaseJet:
    """The cyclic l-point function of the potential."""
    if l < 1:
        raise ValueError("need at least one copy")
    target = copy_space(pot.m, l)
    acc = Jet.zero(target, pot.trunc)
    for i in range(l):
        acc = acc + _pair_term(pot.body, target, i, (i + 1) % l)
        acc = acc - _pair_term(pot.body, target, i, i)
    return PhaseJet(acc)


def frozen_phase(pot: PotentialJet, l: int) -> PhaseJet:
    """The (l+1)-point function with the first copy frozen at the origin."""
    if l < 1:
        raise ValueError("need at least one copy")
    g = calabi_g(pot, l + 1)
    src = g.space
    target = copy_space(pot.m, l)
    plan = {}
    for i in range(l + 1):
        for kind in (HOLO, ANTI):
            for a in range(pot.m):
                s = src.index(i, kind, a)
                plan[s] = None if i == 0 else target.index(i - 1, kind, a)
    return PhaseJet(jet_substitute(g.body, target, plan))


@dataclass(frozen=True)
class CriticalReport:
    ok: bool
    value: NuSeries
    witnesses: tuple


def critical_check(pot: PotentialJet, l: int) -> CriticalReport:
    """Critical point at the diagonal origin, plus the gradient display.

    Verifies that the l-point function vanishes at the origin with all
    first partials, and that each partial equals the corresponding
    difference of relabeled potential derivatives as a full jet.
    """
    g = calabi_g(pot, l)
    space = g.space
    bad = []
    value = g.body.eval0()
    if not value.is_zero:
        bad.append(("value", ""))
    for i in range(space.n_vars):
        if not jet_deriv(g.body, i).eval0().is_zero:
            bad.append(("gradient", space.name(i)))
    for i in range(l):
        for a in range(pot.m):
            dp = jet_deriv(pot.body, pot.space.index(0, HOLO, a))
            lhs = jet_deriv(g.body, space.index(i, HOLO, a))
            rhs = _pair_term(dp, space, i, (i + 1) % l) - _pair_term(dp, space, i, i)
            if lhs != rhs:
                bad.append(("gradient display", space.name(space.index(i, HOLO, a))))
            dq = jet_deriv(pot.body, pot.space.index(0, ANTI, a))
            lhs = jet_deriv(g.body, space.index(i, ANTI, a))
            rhs = _pair_term(dq, space, (i - 1) % l, i) - _pair_term(dq, space, i, i)
            if lhs != rhs:
                bad.append(("gradient display", space.name(space.index(i, ANTI, a))))
    return CriticalReport(not bad, value, tuple(bad))


# -- the trace functional on l-copy distributions


def dist_filtration(u: PointDistribution) -> int:
    """Largest filtration grade 2r - |gamma| among the terms of u."""
    return max((2 * r - mtotal(g) for (r, g) in u.terms), default=0)


def _deepened(engine, nu_floor: int):
    """Lower window floor for the block preimages, raised ceiling too.

    Every basis element touched by a grade <= 0 stage has its whole
    image band inside nu <= deg_max/2, so lifting the ceiling there
    keeps each stage solve fully determined.
    """
    trunc = engine.trunc
    floor = min(nu_floor, trunc.nu_min)
    top = max(trunc.nu_max, trunc.deg_max // 2)
    return reframed(engine, TruncationSpec(floor, top, trunc.deg_max))


def chain_trace(us, engine) -> NuSeries:
    """Trace of the bullet chain, on a window wide enough to trust it.

    Preimages of the intermediate products live at filtration grades up
    to the sum s of the factors' grades, and the stage solve at grade s
    stays uniquely determined only while every basis element's image band
    fits under the ceiling; the band tops cap at min(s - nu_min,
    (s + deg_max)/2), so the ceiling is lifted to clear that.
    """
    if not us:
        raise ValueError("need at least one factor")
    if len(us) == 1:
        return n_trace(us[0])
    trunc = engine.trunc
    total = sum(dist_filtration(u) for u in us)
    vis = min(total - trunc.nu_min, (total + trunc.deg_max + 1) // 2)
    eng = engine
    if vis > trunc.nu_max:
        eng = reframed(engine, TruncationSpec(trunc.nu_min, vis, trunc.deg_max))
    acc = us[0].retruncate(eng.trunc)
    for u in us[1:]:
        acc = bullet(acc, u.retruncate(eng.trunc), eng)
    return n_trace(acc).truncate(trunc.nu_max)


def _w_chain(engine, blocks) -> NuSeries:
    """Trace of the bullet chain of the per-copy derivative generators."""
    memo = engine.memo.setdefault("wchain", {})
    got = memo.get(blocks)
    if got is None:
        floor = -2 * max(mtotal(b) for b in blocks) - 2
        eng = _deepened(engine, min(floor, engine.trunc.nu_min))
        single = VarSpace(1, engine.m)
        parts = [
            lambda_g_inverse(
                PointDistribution(single, eng.trunc, {(0, b): 1}), eng
            )
            for b in blocks
        ]
        f = parts[0]
        for p in parts[1:]:
            f = c_mul(f, p, eng)
        got = c_trace(f, eng)
        memo[blocks] = got
    return got


def w_functional(t: PointDistribution, engine) -> NuSeries:
    """The cyclic trace functional on a distribution over l copies.

    Extends trace(u_1 . ... . u_l) from tensors to arbitrary derivative
    sums by splitting each multi-index into per-copy blocks; linearity
    makes the extension unique.
    """
    space = t.space
    if space.cdim != engine.m:
        raise ValueError("distribution and engine dimensions differ")
    n = 2 * space.cdim
    out = NuSeries({}, engine.trunc.nu_min, engine.trunc.nu_max)
    for (r, gamma), c in t.terms.items():
        blocks = tuple(
            tuple(gamma[i * n : (i + 1) * n]) for i in range(space.copies)
        )
        out = out + _w_chain(engine, blocks).shift(r) * c
    return out


# -- the two sides of the trace identity


def _certified_top(engine) -> int:
    cert = engine.certified_nu_top(0)
    if cert < 0:
        raise ValueError("window cannot certify any order of the residual")
    return cert


def _widened_setup(us, engine, extra_nu: int, phase_shift):
    l = len(us)
    trunc = engine.trunc
    wide = TruncationSpec(
        min(trunc.nu_min, -1), l * trunc.nu_max + extra_nu, trunc.deg_max
    )
    space_l = copy_space(engine.m, l)
    g = calabi_g(engine.potential.retruncate(wide), l)
    if phase_shift is not None:
        g = PhaseJet(g.body + phase_shift.body.retruncate(wide))
    tens = tensor_dist([u.retruncate(wide) for u in us], space_l, wide)
    return space_l, wide, g, tens


def main_theorem_residual(us, engine, phase_shift: PhaseJet | None = None) -> NuSeries:
    """Bullet-chain trace minus the oscillatory pairing, certified order.

    ``phase_shift`` adds a jet to the cyclic phase before pairing; it
    exists for negative controls and must be left None in normal use.
    """
    if not us:
        raise ValueError("need at least one distribution")
    cert = _certified_top(engine)
    lhs = chain_trace(us, engine)
    _space_l, _wide, g, tens = _widened_setup(us, engine, 0, phase_shift)
    rhs = exp_pair_one(tens, g)
    return (lhs - rhs).truncate(cert)


def annihilator_residual(
    us,
    engine,
    copy: int,
    axis: int = 0,
    kind: int = HOLO,
    phase_shift: PhaseJet | None = None,
) -> NuSeries:
    """Trace of the transposed direction field, expected to vanish.

    The direction is nu d - nu (dG) along the given copy, axis, and
    kind; its transpose against the tensor distribution is traced with
    the same cyclic functional as the main identity.
    """
    if not us:
        raise ValueError("need at least one distribution")
    cert = _certified_top(engine)
    trunc = engine.trunc
    # block traces reach down by half the derivative order, so the tensor
    # must keep rows that far above nu_max for W to see every term
    orders = sum(u.max_order() for u in us)
    extra = max(1, trunc.nu_max + (orders + 2) // 2 - len(us) * trunc.nu_max)
    space_l, wide, g, tens = _widened_setup(us, engine, extra, phase_shift)
    v = FieldJet.coordinate(space_l, wide, space_l.index(copy, kind, axis))
    t = transpose_field(tens, v, g)
    return w_functional(t, engine).truncate(cert)


def factorizable_trace(pairs, engine) -> NuSeries:
    """Closed product formula for the trace of a chain of split tensors.

    For u_i built from f_i (x) g_i the chain trace is the cyclic product
    of the scalars (g_i star f_{i+1})(0).
    """
    total = NuSeries.const(1, nu_max=engine.trunc.nu_max)
    l = len(pairs)
    for i in range(l):
        g_i = pairs[i][1]
        f_next = pairs[(i + 1) % l][0]
        total = total * engine.star(g_i, f_next).eval0()
    return total
