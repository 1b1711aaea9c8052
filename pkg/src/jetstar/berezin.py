"""Berezin transform and the Wick-type product it conjugates to.

The transform B sends a jet f to the jet whose value against the product
is star(anti part, holo part) monomial by monomial.  It is unipotent
(identity plus terms of positive nu-level), fixes holomorphic and
antiholomorphic jets, and intertwines the base product with the opposite
ordering: B(f *' g) = Bf * Bg, where *' is the Wick-type product built
here.  All maps are linear over Laurent scalars and are represented by
their images on coordinate monomials.
"""

from fractions import Fraction

from .diffop import DiffOperator, PointDistribution, operator_from_jet_action
from .kernel import (
    CRat,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    mfact,
    multi_indices,
)


class JetLinMap:
    """Linear map on jets, stored through its images of monomials.

    Images are materialized on demand and memoized.  Linearity over the
    scalar ring means a term nu^n * c * x^mu maps to nu^n * c * image(mu).
    """

    def __init__(self, space: VarSpace, trunc: TruncationSpec, fn, name: str = ""):
        self.space = space
        self.trunc = trunc
        self.name = name
        self._fn = fn
        self._images: dict = {}

    def image(self, exps) -> Jet:
        exps = tuple(exps)
        got = self._images.get(exps)
        if got is None:
            got = self._fn(exps)
            self._images[exps] = got
        return got

    def apply(self, f: Jet) -> Jet:
        if f.space != self.space:
            raise ValueError("jet lives on a different variable space")
        out = Jet.zero(self.space, self.trunc)
        for (nu, exps), c in f.items_sorted():
            term = self.image(exps).shift_nu(nu)
            out = out + Jet(self.space, self.trunc,
                            {k: v * c for k, v in term.terms.items()},
                            strict=False)
        return out

    def after(self, other: "JetLinMap") -> "JetLinMap":
        if other.space != self.space:
            raise ValueError("composition across variable spaces")

        def fn(exps):
            return self.apply(other.image(exps))

        return JetLinMap(self.space, self.trunc, fn,
                         name=f"{self.name}.{other.name}")

    @staticmethod
    def identity(space: VarSpace, trunc: TruncationSpec) -> "JetLinMap":
        def fn(exps):
            return Jet.monomial(space, trunc, 0, exps)

        return JetLinMap(space, trunc, fn, name="id")


def _split_monomial(space: VarSpace, exps):
    """Exponents of the holomorphic and antiholomorphic halves."""
    holo = list(space.zero_exps())
    anti = list(space.zero_exps())
    for i, e in enumerate(exps):
        if space.kind_of(i) == 0:
            holo[i] = e
        else:
            anti[i] = e
    return tuple(holo), tuple(anti)


def berezin_map(engine) -> JetLinMap:
    """Transform sending z^a zb^b to star(zb^b, z^a).  Cached per engine."""
    got = engine.memo.get("berezin")
    if got is not None:
        return got
    space, trunc = engine.space, engine.trunc

    def fn(exps):
        holo, anti = _split_monomial(space, exps)
        return engine.star(Jet.monomial(space, trunc, 0, anti),
                           Jet.monomial(space, trunc, 0, holo))

    bmap = JetLinMap(space, trunc, fn, name="berezin")
    engine.memo["berezin"] = bmap
    return bmap


def berezin_inverse(engine) -> JetLinMap:
    """Neumann inverse of the transform.  Cached per engine.

    Requires unipotence: the image of each monomial must be the monomial
    plus terms of strictly higher nu-level.  Each application of (B - 1)
    raises the nu floor, so the series stops within the window.
    """
    got = engine.memo.get("berezin_inv")
    if got is not None:
        return got
    bmap = berezin_map(engine)
    space, trunc = engine.space, engine.trunc
    span = trunc.nu_max - trunc.nu_min + 1

    def fn(exps):
        mono = Jet.monomial(space, trunc, 0, exps)
        diff = bmap.apply(mono) - mono
        if not diff.is_zero and min(diff.nu_levels()) <= 0:
            raise ValueError("transform is not unipotent on this window")
        acc = mono
        cur = mono
        for _ in range(span):
            cur = cur - bmap.apply(cur)
            if cur.is_zero:
                break
            acc = acc + cur
        return acc

    inv = JetLinMap(space, trunc, fn, name="berezin_inv")
    engine.memo["berezin_inv"] = inv
    return inv


def wick_star(f: Jet, g: Jet, engine) -> Jet:
    """Opposite-ordered product conjugate to the base one: B^(-1)(Bf * Bg)."""
    bmap = berezin_map(engine)
    return berezin_inverse(engine).apply(engine.star(bmap.apply(f), bmap.apply(g)))


def conjugation_check(a: Jet, b: Jet, engine):
    """Residual maps of the multiplication conjugation identities.

    For holomorphic a and antiholomorphic b the transform conjugates plain
    multiplication into one-sided star multiplication: star(b, .) should
    equal B o (b .) o B^(-1), and star(., a) should equal B o (a .) o B^(-1).
    Returns the two difference maps (left one for b, right one for a);
    both are zero on every monomial within the certified window.
    """
    space, trunc = engine.space, engine.trunc
    bmap = berezin_map(engine)
    binv = berezin_inverse(engine)

    def left_fn(exps):
        mono = Jet.monomial(space, trunc, 0, exps)
        return engine.star(b, mono) - bmap.apply(b * binv.image(exps))

    def right_fn(exps):
        mono = Jet.monomial(space, trunc, 0, exps)
        return engine.star(mono, a) - bmap.apply(a * binv.image(exps))

    return (JetLinMap(space, trunc, left_fn, name="conj_left"),
            JetLinMap(space, trunc, right_fn, name="conj_right"))


def k_functional(factors, engine) -> NuSeries:
    """Origin value of the transformed product of the given jets.

    Computes star(Bf_1, ..., Bf_l) at the origin and, independently, the
    transform of the Wick-type product f_1 *' ... *' f_l at the origin.
    The two agree within the certified window; disagreement is an error.
    Empty input returns 1.
    """
    factors = list(factors)
    trunc = engine.trunc
    if not factors:
        return NuSeries.const(1).truncate(trunc.nu_max)
    bmap = berezin_map(engine)
    direct = bmap.apply(factors[0])
    for f in factors[1:]:
        direct = engine.star(direct, bmap.apply(f))
    wick = factors[0]
    for f in factors[1:]:
        wick = wick_star(wick, f, engine)
    cert = engine.certified_nu_top()
    v1 = direct.eval0().truncate(cert)
    v2 = bmap.apply(wick).eval0().truncate(cert)
    if v1 != v2:
        raise ValueError("transport of the product through the transform failed")
    return v1


def berezin_operator(engine, max_order: int | None = None) -> DiffOperator:
    """The transform as a differential operator on the truncation window.

    max_order bounds the derivative order of the reconstruction and the
    degree of the monomials whose images feed it; defaults to deg_max.
    """
    space, trunc = engine.space, engine.trunc
    if max_order is None:
        max_order = trunc.deg_max
    bmap = berezin_map(engine)
    action = {}
    for mu in multi_indices(space.n_vars, min(max_order, trunc.deg_max)):
        action[mu] = bmap.image(mu)
    return operator_from_jet_action(action, space, trunc, max_order=max_order)


def berezin_dist(engine) -> PointDistribution:
    """Origin evaluation after the transform, as a point distribution."""
    space, trunc = engine.space, engine.trunc
    bmap = berezin_map(engine)
    terms = {}
    for mu in multi_indices(space.n_vars, trunc.deg_max):
        val = bmap.image(mu).eval0()
        if val.is_zero:
            continue
        inv = CRat(Fraction(1, mfact(mu)))
        for r, c in val.terms.items():
            terms[(r, mu)] = c * inv
    return PointDistribution(space, trunc, terms)
