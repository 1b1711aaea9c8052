"""Formal differential operators and origin-supported distributions.

An operator is a finite sum of terms nu^r c(x) d^gamma with nu-free jet
coefficients c, the nu content always normalized into the exponent r.  A
distribution pairs a jet h with sum nu^r a_{r,gamma} (d^gamma h)(0).

Naturality (the nu^r component has derivative order at most r) is the
structural property most of the downstream machinery relies on, so it is
checked here with an explicit witness instead of being assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .kernel import (
    CRat,
    CR_ONE,
    CR_ZERO,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    _crat,
    jet_deriv_multi,
    madd,
    mbinom,
    mfact,
    msub,
    msubindices,
    mtotal,
    multi_indices,
)


class DiffOperator:
    """terms: (nu exponent r, derivative multi-index gamma) -> coefficient Jet."""

    __slots__ = ("space", "trunc", "terms")

    def __init__(self, space: VarSpace, trunc: TruncationSpec, terms=None):
        clean = {}
        if terms:
            for (r, gamma), coeff in terms.items():
                if coeff.is_zero:
                    continue
                for s in coeff.nu_levels():
                    rr = r + s
                    if rr < trunc.nu_min or rr > trunc.nu_max:
                        continue
                    part = coeff.nu_part(s)
                    key = (rr, gamma)
                    prev = clean.get(key)
                    clean[key] = part if prev is None else prev + part
        clean = {k: v for k, v in clean.items() if not v.is_zero}
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "trunc", trunc)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("DiffOperator is immutable")

    @staticmethod
    def identity(space, trunc) -> "DiffOperator":
        one = Jet.const(space, trunc, 1)
        return DiffOperator(space, trunc, {(0, space.zero_exps()): one})

    @staticmethod
    def mult(jet: Jet) -> "DiffOperator":
        """Multiplication by a jet, nu content folded into r."""
        return DiffOperator(jet.space, jet.trunc, {(0, jet.space.zero_exps()): jet})

    @staticmethod
    def deriv(space, trunc, var: int, nu_exp: int = 0, coeff=1) -> "DiffOperator":
        gamma = [0] * space.n_vars
        gamma[var] = 1
        c = Jet.const(space, trunc, coeff)
        return DiffOperator(space, trunc, {(nu_exp, tuple(gamma)): c})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def items_sorted(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def __add__(self, other):
        out = {k: v for k, v in self.terms.items()}
        for k, v in other.terms.items():
            cur = out.get(k)
            s = v if cur is None else cur + v
            if s.is_zero:
                out.pop(k, None)
            else:
                out[k] = s
        return DiffOperator(self.space, self.trunc, out)

    def __neg__(self):
        return DiffOperator(self.space, self.trunc, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "DiffOperator":
        if isinstance(c, (int, Fraction, CRat)):
            return DiffOperator(self.space, self.trunc, {k: v * c for k, v in self.terms.items()})
        raise TypeError("scale expects an exact scalar")

    def shift_nu(self, k: int) -> "DiffOperator":
        return DiffOperator(self.space, self.trunc, {(r + k, g): v for (r, g), v in self.terms.items()})

    def max_order(self) -> int:
        return max((mtotal(g) for (_, g) in self.terms), default=0)

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash((self.space, tuple(sorted((k, v._hash_key()) for k, v in self.terms.items()))))

    def __repr__(self):
        body = ", ".join(f"nu^{r} d^{g}" for (r, g) in sorted(self.terms))
        return f"DiffOperator[{body or '0'}]"


def op_apply(a: DiffOperator, h: Jet) -> Jet:
    out = Jet.zero(a.space, h.trunc)
    for (r, gamma), coeff in a.terms.items():
        piece = coeff * jet_deriv_multi(h, gamma)
        out = out + piece.shift_nu(r)
    return out


def op_compose(a: DiffOperator, b: DiffOperator) -> DiffOperator:
    """The operator equal to a after b on every jet, h -> a(b(h))."""
    out = {}
    for (r1, g1), c1 in a.terms.items():
        for (r2, g2), c2 in b.terms.items():
            r = r1 + r2
            for delta in msubindices(g1):
                rest = msub(g1, delta)
                dcoef = jet_deriv_multi(c2, delta)
                if dcoef.is_zero:
                    continue
                coeff = c1 * dcoef * mbinom(g1, delta)
                if coeff.is_zero:
                    continue
                key = (r, madd(rest, g2))
                cur = out.get(key)
                out[key] = coeff if cur is None else cur + coeff
    return DiffOperator(a.space, a.trunc, out)


def ad_mult(phi: Jet, a: DiffOperator) -> DiffOperator:
    """Commutator of multiplication by phi with a.

    Only the derivative part contributes, each term loses at least one
    derivative order, so iterated calls terminate.
    """
    out = {}
    levels = [(s, phi.nu_part(s)) for s in phi.nu_levels()]
    for (r, gamma), coeff in a.terms.items():
        if mtotal(gamma) == 0:
            continue
        for s, phis in levels:
            for delta in msubindices(gamma):
                if mtotal(delta) == 0:
                    continue
                dphi = jet_deriv_multi(phis, delta)
                if dphi.is_zero:
                    continue
                piece = coeff * dphi * (-mbinom(gamma, delta))
                if piece.is_zero:
                    continue
                key = (r + s, msub(gamma, delta))
                cur = out.get(key)
                out[key] = piece if cur is None else cur + piece
    return DiffOperator(a.space, a.trunc, out)


def is_natural(a: DiffOperator):
    """Naturality check with a witness term on failure."""
    for (r, gamma) in a.terms:
        if r < 0 or mtotal(gamma) > r:
            return False, (r, gamma)
    return True, None


def exp_operator(x: DiffOperator) -> DiffOperator:
    """exp of an operator all of whose terms carry nu^r with r >= 1."""
    for (r, _g) in x.terms:
        if r < 1:
            raise ValueError("exp_operator needs strictly positive nu grading")
    acc = DiffOperator.identity(x.space, x.trunc)
    power = acc
    k = 0
    while True:
        k += 1
        power = op_compose(power, x).scale(Fraction(1, k))
        if power.is_zero or k > x.trunc.nu_max - min(x.trunc.nu_min, 0) + 1:
            break
        acc = acc + power
    return acc


def log_operator_unipotent(a: DiffOperator) -> DiffOperator:
    """log of 1 + D where every term of D carries nu^r with r >= 1."""
    ident = DiffOperator.identity(a.space, a.trunc)
    d = a - ident
    for (r, _g) in d.terms:
        if r < 1:
            raise ValueError("operator is not unipotent in the nu grading")
    acc = DiffOperator(a.space, a.trunc)
    power = ident
    k = 0
    while True:
        k += 1
        power = op_compose(power, d)
        if power.is_zero or k > a.trunc.nu_max + 1:
            break
        acc = acc + power.scale(Fraction((-1) ** (k + 1), k))
    return acc


@dataclass(frozen=True)
class OscillatoryReport:
    ok: bool
    exponent: "DiffOperator | None"
    witness: "tuple | None"
    reason: str


def is_oscillatory(a: DiffOperator) -> OscillatoryReport:
    """Decide whether a = exp(nu^-1 X) for a natural X with X_0 = X_1 = 0.

    Works at truncation: the logarithm series is finite because a - 1 is
    nu-graded positive, and the verdict is only as strong as the window.
    A nu^0 part other than the identity is a precondition failure.
    """
    space, trunc = a.space, a.trunc
    zero_key = (0, space.zero_exps())
    for (r, g), c in a.terms.items():
        if r == 0:
            if (r, g) != zero_key or c != Jet.const(space, trunc, 1):
                raise ValueError("nu^0 part is not the identity")
    if zero_key not in a.terms:
        raise ValueError("nu^0 part is not the identity")
    x = log_operator_unipotent(a).shift_nu(1)
    for (r, gamma) in x.terms:
        if r < 2:
            return OscillatoryReport(False, x, (r, gamma), "exponent has nu^0 or nu^1 content")
    ok, witness = is_natural(x)
    if not ok:
        return OscillatoryReport(False, x, witness, "exponent is not natural")
    return OscillatoryReport(True, x, None, "")


def operator_from_jet_action(action, space: VarSpace, trunc: TruncationSpec, max_order: int) -> DiffOperator:
    """Reconstruct an operator of order <= max_order from monomial images.

    ``action`` maps exponent tuples to image jets (a dict, or a callable
    used to fill one).  Reconstruction is triangular in the derivative
    order; any extra supplied images act as consistency checks and the
    first mismatch raises.
    """
    if callable(action):
        action = {mu: action(mu) for mu in multi_indices(space.n_vars, max_order)}
    coeffs: dict[tuple, Jet] = {}
    by_order = sorted((mu for mu in action if mtotal(mu) <= max_order), key=mtotal)
    for mu in by_order:
        img = action[mu]
        acc = img
        for gamma, c in coeffs.items():
            rest = msub(mu, gamma)
            if rest is None:
                continue
            fall = mfact(mu) // mfact(rest)
            mono = Jet.monomial(space, img.trunc, 0, rest, fall)
            acc = acc - c * mono
        coeffs[mu] = acc * CRat(Fraction(1, mfact(mu)))
    op = DiffOperator(space, trunc, {(0, g): c for g, c in coeffs.items()})
    for mu, img in action.items():
        if mtotal(mu) <= max_order:
            continue
        mono = Jet.monomial(space, img.trunc, 0, mu)
        got = op_apply(op, mono)
        if got != img:
            raise ValueError(f"no operator of order <= {max_order} matches the action at {mu}")
    return op




# ---------------------------------------------------------------------------
# distributions


class PointDistribution:
    """A distribution supported at the origin, terms (r, gamma) -> CRat."""

    __slots__ = ("space", "trunc", "terms")

    def __init__(self, space: VarSpace, trunc: TruncationSpec, terms=None):
        clean = {}
        if terms:
            for (r, gamma), c in terms.items():
                c = _crat(c)
                if c and trunc.nu_min <= r <= trunc.nu_max:
                    clean[(r, gamma)] = c
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "trunc", trunc)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("PointDistribution is immutable")

    @staticmethod
    def delta(space, trunc) -> "PointDistribution":
        return PointDistribution(space, trunc, {(0, space.zero_exps()): CR_ONE})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def items_sorted(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def apply(self, h: Jet) -> NuSeries:
        # anything above either stored window is unknown, so the certified
        # top follows the Laurent product rule with true valuations
        u_val = min((r for (r, _g) in self.terms), default=0)
        h_val = min((s for (s, _e) in h.terms), default=0)
        cap = min(self.trunc.nu_max + h_val, h.trunc.nu_max + u_val)
        out = {}
        for (r, gamma), a in self.terms.items():
            fact = mfact(gamma)
            for (s, exps), hc in h.terms.items():
                if exps != gamma:
                    continue
                k = r + s
                if k > cap:
                    continue
                v = out.get(k, CR_ZERO) + a * hc * fact
                if v:
                    out[k] = v
                else:
                    out.pop(k, None)
        return NuSeries(out, min(self.trunc.nu_min, h.trunc.nu_min), cap)

    def __add__(self, other):
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, CR_ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return PointDistribution(self.space, self.trunc, out)

    def __neg__(self):
        return PointDistribution(self.space, self.trunc, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "PointDistribution":
        c = _crat(c)
        return PointDistribution(self.space, self.trunc, {k: v * c for k, v in self.terms.items()})

    def scale_series(self, s: NuSeries) -> "PointDistribution":
        out = {}
        for (r, gamma), a in self.terms.items():
            for k, c in s.terms.items():
                key = (r + k, gamma)
                v = out.get(key, CR_ZERO) + a * c
                if v:
                    out[key] = v
                else:
                    out.pop(key, None)
        return PointDistribution(self.space, self.trunc, out)

    def shift_nu(self, k: int) -> "PointDistribution":
        return PointDistribution(
            self.space, self.trunc, {(r + k, g): c for (r, g), c in self.terms.items()}
        )

    def retruncate(self, trunc: TruncationSpec) -> "PointDistribution":
        return PointDistribution(self.space, trunc, self.terms)

    def max_order(self) -> int:
        return max((mtotal(g) for (_, g) in self.terms), default=0)

    def __eq__(self, other):
        if not isinstance(other, PointDistribution):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash((self.space, tuple(self.items_sorted())))

    def __repr__(self):
        bits = []
        for (r, g), c in self.items_sorted():
            bits.append(f"nu^{r}*{c}*d^{g}")
        return "PointDistribution[" + (" + ".join(bits) or "0") + "]"


def dist_is_natural(u: PointDistribution):
    for (r, gamma) in u.terms:
        if r < 0 or mtotal(gamma) > r:
            return False, (r, gamma)
    return True, None


def dist_to_operator(u: PointDistribution) -> DiffOperator:
    terms = {}
    for (r, gamma), c in u.terms.items():
        coeff = Jet.const(u.space, u.trunc, c)
        key = (r, gamma)
        terms[key] = coeff if key not in terms else terms[key] + coeff
    return DiffOperator(u.space, u.trunc, terms)


def dist_of_operator(a: DiffOperator) -> PointDistribution:
    """delta after a: only coefficient values at the base point survive."""
    zero_e = a.space.zero_exps()
    out = {}
    for (r, gamma), coeff in a.terms.items():
        c0 = coeff.coeff(0, zero_e)
        if not c0:
            continue
        key = (r, gamma)
        cur = out.get(key, CR_ZERO) + c0
        if cur:
            out[key] = cur
        else:
            out.pop(key, None)
    return PointDistribution(a.space, a.trunc, out)


def tensor_dist(factors, space: VarSpace, trunc: TruncationSpec) -> PointDistribution:
    """Tensor product of single-copy distributions on the product space."""
    if len(factors) != space.copies:
        raise ValueError("need one factor per copy")
    cdim = space.cdim
    acc = {(0, ()): CR_ONE}
    for u in factors:
        if u.space.cdim != cdim or u.space.copies != 1:
            raise ValueError("tensor factors must be single-copy of matching dimension")
        nxt = {}
        for (r0, g0), c0 in acc.items():
            for (r, gamma), c in u.terms.items():
                key = (r0 + r, g0 + gamma)
                v = nxt.get(key, CR_ZERO) + c0 * c
                if v:
                    nxt[key] = v
                else:
                    nxt.pop(key, None)
        acc = nxt
    return PointDistribution(space, trunc, acc)


# ---------------------------------------------------------------------------
# the order-nu bilinear form of an oscillatory-shaped distribution


@dataclass(frozen=True)
class BilinearForm:
    space: VarSpace
    entries: tuple  # 2m x 2m, exact scalars
    rank: int

    def entry(self, i: int, j: int) -> CRat:
        return self.entries[i][j]


def matrix_rank(rows) -> int:
    """Exact rank over Q(i) by Gaussian elimination."""
    m = [list(r) for r in rows]
    nrow = len(m)
    ncol = len(m[0]) if nrow else 0
    rank = 0
    row = 0
    for col in range(ncol):
        piv = None
        for r in range(row, nrow):
            if m[r][col]:
                piv = r
                break
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        inv = CR_ONE / m[row][col]
        m[row] = [x * inv for x in m[row]]
        for r in range(nrow):
            if r != row and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[row])]
        rank += 1
        row += 1
        if row == nrow:
            break
    return rank


def beta_form(u: PointDistribution) -> BilinearForm:
    """Symmetric form beta(dx_i, dx_j) = Lambda_1(x_i x_j).

    Requires an oscillatory-shaped input: the nu^0 part is delta and the
    nu^1 part has derivative order at most 2.
    """
    space = u.space
    zero_key = (0, space.zero_exps())
    for (r, gamma), c in u.terms.items():
        if r == 0:
            if gamma != space.zero_exps() or c != CR_ONE:
                raise ValueError("nu^0 part must be exactly delta")
        if r == 1 and mtotal(gamma) > 2:
            raise ValueError("nu^1 part has derivative order above 2")
    if zero_key not in u.terms:
        raise ValueError("nu^0 part must be exactly delta")
    n = space.n_vars
    entries = []
    for i in range(n):
        row = []
        for j in range(n):
            gamma = [0] * n
            gamma[i] += 1
            gamma[j] += 1
            a = u.terms.get((1, tuple(gamma)), CR_ZERO)
            row.append(a * mfact(tuple(gamma)))
        entries.append(tuple(row))
    return BilinearForm(space, tuple(entries), matrix_rank(entries))
