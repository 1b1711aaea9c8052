"""Action of oscillatory exponents on point distributions.

The exponent e^phi itself is never materialized: for u = delta o N the
action u o e^phi is e^{phi(0)} . delta o (e^{-phi} N e^{phi}), and the
conjugated operator is the finite sum of adjoint chains

    e^{-phi} N e^{phi} = sum_k (1/k!) (-ad_phi)^k N,

which terminates because each commutator with a multiplication lowers
the derivative order.  The nu^{-1} part of the phase lowers the
nu-order of a chain term no faster than its derivative order, so the
chains stay natural; the gauge (vanishing value and gradient of the
nu^{-1} part at the origin) keeps the scalar factor e^{phi(0)} inside
the exact coefficient ring.

The module also carries the transpose of nu-scaled vector fields, the
stationary-phase axiom residual for a (phase, density) pair, and the
Gram pairing test with its exact fraction-free determinant.
"""

from dataclasses import dataclass
from fractions import Fraction

from .diffop import (
    DiffOperator,
    PointDistribution,
    ad_mult,
    dist_is_natural,
    dist_of_operator,
    dist_to_operator,
    exp_operator,
    is_natural,
    op_compose,
)
from .kernel import (
    ANTI,
    HOLO,
    CRat,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    exp_nu_nonneg,
    jet_deriv,
    jet_inverse,
    mtotal,
    multi_indices,
)


class PhaseJet:
    """Oscillatory phase: nu-degree at least -1, critical at the origin.

    The nu^{-1} part must vanish at the origin together with its first
    derivatives; without that gauge the conjugation sums acquire genuine
    poles and the origin value e^{phi(0)} leaves the scalar ring.
    """

    __slots__ = ("body", "space", "trunc")

    def __init__(self, body: Jet):
        levels = body.nu_levels()
        if levels and levels[0] < -1:
            raise ValueError("phase has nu-degree below -1")
        lead = body.nu_part(-1)
        for (_, exps), _c in lead.terms.items():
            if mtotal(exps) <= 1:
                raise ValueError(
                    "nu^-1 part of the phase needs vanishing value and "
                    "gradient at the origin"
                )
        self.body = body
        self.space = body.space
        self.trunc = body.trunc

    @staticmethod
    def zero(space: VarSpace, trunc: TruncationSpec) -> "PhaseJet":
        return PhaseJet(Jet.zero(space, trunc))

    def __add__(self, other: "PhaseJet") -> "PhaseJet":
        return PhaseJet(self.body + other.body)

    def __eq__(self, other) -> bool:
        return isinstance(other, PhaseJet) and self.body == other.body

    def __repr__(self):
        return f"PhaseJet({self.body!r})"


class DensityJet:
    """Formal density: no negative nu-powers, invertible at the origin."""

    __slots__ = ("body",)

    def __init__(self, body: Jet):
        levels = body.nu_levels()
        if levels and levels[0] < 0:
            raise ValueError("density has negative nu-degree")
        if not body.coeff(0, body.space.zero_exps()):
            raise ValueError("density vanishes at the origin")
        self.body = body

    @staticmethod
    def one(space: VarSpace, trunc: TruncationSpec) -> "DensityJet":
        return DensityJet(Jet.const(space, trunc, 1))


class FieldJet:
    """Formal vector field: one coefficient jet per variable."""

    __slots__ = ("space", "trunc", "components")

    def __init__(self, space: VarSpace, trunc: TruncationSpec, components):
        comps = dict(components)
        for i in comps:
            if not (0 <= i < space.n_vars):
                raise ValueError("component index out of range")
        self.space = space
        self.trunc = trunc
        self.components = {
            i: c for i, c in comps.items() if not c.is_zero
        }

    @staticmethod
    def coordinate(space: VarSpace, trunc: TruncationSpec, i: int) -> "FieldJet":
        return FieldJet(space, trunc, {i: Jet.const(space, trunc, 1)})

    def apply(self, f: Jet) -> Jet:
        out = Jet.zero(self.space, self.trunc)
        for i, c in self.components.items():
            out = out + c * jet_deriv(f, i)
        return out


def conjugate_by_exp(n: DiffOperator, phase: PhaseJet) -> DiffOperator:
    """e^{-phi} N e^{phi} through the finite adjoint chains."""
    ok, witness = is_natural(n)
    if not ok:
        raise ValueError(f"operator is not natural at {witness}")
    out = n
    cur = n
    order = n.max_order()
    fact = 1
    for k in range(1, order + 1):
        cur = ad_mult(phase.body, cur).scale(-1)
        if cur.is_zero:
            break
        fact *= k
        out = out + cur.scale(Fraction(1, fact))
    ok, witness = is_natural(out)
    assert ok, f"conjugation lost naturality at {witness}"
    return out


def act_exp(u: PointDistribution, phase: PhaseJet) -> PointDistribution:
    """u o e^phi.  Requires the phase value at the origin to vanish."""
    n = dist_to_operator(u)
    conj = conjugate_by_exp(n, phase)
    factor = exp_nu_nonneg(phase.body.eval0())
    return dist_of_operator(conj).scale_series(factor)


def transpose_field(
    u: PointDistribution, v: FieldJet, phase: PhaseJet
) -> PointDistribution:
    """u o (nu v - nu (v phi)), the transpose of the scaled field."""
    space, trunc = u.space, u.trunc
    terms = {}
    for i, c in v.components.items():
        gamma = [0] * space.n_vars
        gamma[i] = 1
        terms[(1, tuple(gamma))] = c
    w = DiffOperator(space, trunc, terms)
    vphi = v.apply(phase.body).shift_nu(1)
    w = w - DiffOperator.mult(vphi)
    return dist_of_operator(op_compose(dist_to_operator(u), w))


def div_density(v: FieldJet, rho: DensityJet) -> Jet:
    """div_rho v = sum_i d_i(rho v^i) / rho."""
    body = rho.body
    inv = jet_inverse(body)
    out = Jet.zero(v.space, v.trunc)
    for i, c in v.components.items():
        out = out + jet_deriv(body * c, i) * inv
    return out


def foi_residual(
    lam: PointDistribution,
    phase: PhaseJet,
    rho: DensityJet,
    v: FieldJet,
    f: Jet,
) -> NuSeries:
    """Residual of the stationary-phase axiom on the test jet f."""
    arg = v.apply(f) + (v.apply(phase.body) + div_density(v, rho)) * f
    return lam.apply(arg)


def gaussian_foi(m: int, trunc: TruncationSpec):
    """The flat Gaussian triple (distribution, phase, density).

    The distribution is delta o exp(nu sum_k d_k dbar_k); its phase is
    -nu^{-1} sum_k z_k zb_k with unit density.
    """
    space = VarSpace(1, m)
    terms = {}
    for a in range(m):
        gamma = [0] * space.n_vars
        gamma[space.index(0, HOLO, a)] = 1
        gamma[space.index(0, ANTI, a)] = 1
        terms[(1, tuple(gamma))] = Jet.const(space, trunc, 1)
    lam = dist_of_operator(exp_operator(DiffOperator(space, trunc, terms)))
    body = Jet.zero(space, trunc)
    for a in range(m):
        exps = [0] * space.n_vars
        exps[space.index(0, HOLO, a)] = 1
        exps[space.index(0, ANTI, a)] = 1
        body = body + Jet.monomial(space, trunc, -1, tuple(exps), -1)
    return lam, PhaseJet(body), DensityJet.one(space, trunc)


def exp_pair_one(u: PointDistribution, phase: PhaseJet) -> NuSeries:
    """<u o e^phi, 1> without materializing the conjugated operator.

    e^{-phi} d^gamma e^phi applied to 1 is the ordered product of the
    commuting first-order factors (d_i + d_i phi); the product jets
    follow the recursion W_{gamma+e_i} = d_i W + (d_i phi) W and are
    shared across the terms of u.  The factors stack one nu^{-1} each,
    so the jets are rebuilt on a window deep enough for the full chain.
    """
    ok, witness = dist_is_natural(u)
    if not ok:
        raise ValueError(f"distribution is not natural at {witness}")
    depth = u.max_order()
    trunc = u.trunc
    if trunc.nu_min > -depth:
        trunc = TruncationSpec(-depth, trunc.nu_max, trunc.deg_max)
    space = u.space
    body = phase.body.retruncate(trunc)
    grads = [jet_deriv(body, i) for i in range(space.n_vars)]
    memo = {space.zero_exps(): Jet.const(space, trunc, 1)}

    def chain(gamma):
        got = memo.get(gamma)
        if got is None:
            i = next(k for k, g in enumerate(gamma) if g)
            below = list(gamma)
            below[i] -= 1
            prev = chain(tuple(below))
            got = jet_deriv(prev, i) + grads[i] * prev
            memo[gamma] = got
        return got

    total = NuSeries({}, trunc.nu_min, trunc.nu_max)
    for (r, gamma), c in u.terms.items():
        total = total + chain(gamma).eval0().shift(r) * c
    return total * exp_nu_nonneg(body.eval0())


# -- Gram pairing test


@dataclass(frozen=True)
class GramReport:
    basis: tuple
    matrix: tuple
    det: NuSeries
    verdict: str
    required_nu_max: int | None


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            v = out.get(k, CRat()) + x * y
            if v:
                out[k] = v
            elif k in out:
                del out[k]
    return out


def _poly_sub(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, y in b.items():
        v = out.get(k, CRat()) - y
        if v:
            out[k] = v
        elif k in out:
            del out[k]
    return out


def _poly_div_exact(a: dict, b: dict) -> dict | None:
    """Exact division of Laurent polynomials; None when it fails."""
    if not b:
        raise ZeroDivisionError("division by the zero polynomial")
    if not a:
        return {}
    rem = dict(a)
    blead = max(b)
    bc = b[blead]
    out = {}
    while rem:
        alead = max(rem)
        q = alead - blead
        c = rem[alead] / bc
        out[q] = c
        for j, y in b.items():
            k = j + q
            v = rem.get(k, CRat()) - c * y
            if v:
                rem[k] = v
            elif k in rem:
                del rem[k]
        if rem and max(rem) >= alead:
            return None
        if len(out) > 4096:
            return None
    return out


def _bareiss_det(mat):
    """Fraction-free determinant over Laurent polynomials in nu.

    Returns the determinant dict, or None when an exact division fails
    (possible when window truncation clipped the entries).
    """
    n = len(mat)
    m = [[dict(mat[i][j]) for j in range(n)] for i in range(n)]
    sign = 1
    prev = {0: CRat(1)}
    for k in range(n - 1):
        if not m[k][k]:
            swap = None
            for i in range(k + 1, n):
                if m[i][k]:
                    swap = i
                    break
            if swap is None:
                continue
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = _poly_sub(
                    _poly_mul(m[i][j], m[k][k]), _poly_mul(m[i][k], m[k][j])
                )
                got = _poly_div_exact(num, prev)
                if got is None:
                    return None
                m[i][j] = got
            m[i][k] = {}
        prev = m[k][k]
        if not prev:
            return {}
    out = m[n - 1][n - 1]
    if sign < 0:
        out = {k: CRat() - v for k, v in out.items()}
    return out


def pairing_gram(lam: PointDistribution, deg_bound: int) -> GramReport:
    """Gram matrix of the pairing (f, g) -> lam(f g) on low monomials.

    The verdict is three-valued: nondegenerate when the determinant has a
    nonzero coefficient inside the window, degenerate when it vanishes
    and the window is wide enough to trust that, inconclusive otherwise.
    """
    space, trunc = lam.space, lam.trunc
    basis = list(multi_indices(space.n_vars, deg_bound))
    entries = []
    for mu in basis:
        row = []
        mono_mu = Jet.monomial(space, trunc, 0, mu)
        for nu_ in basis:
            prod = mono_mu * Jet.monomial(space, trunc, 0, nu_)
            row.append(lam.apply(prod))
        entries.append(row)
    required = sum(mtotal(mu) for mu in basis)
    mat = [[dict(s.terms) for s in row] for row in entries]
    det = _bareiss_det(mat)
    if det:
        verdict = "nondegenerate"
        req = None
    elif det is not None and trunc.nu_max >= required:
        verdict = "degenerate"
        req = None
    else:
        verdict = "inconclusive"
        req = required
    det_series = NuSeries(det or {}, nu_min=min([0] + list(det or {})),
                          nu_max=trunc.nu_max)
    return GramReport(
        basis=tuple(basis),
        matrix=tuple(tuple(row) for row in entries),
        det=det_series,
        verdict=verdict,
        required_nu_max=req,
    )
