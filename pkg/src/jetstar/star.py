"""Star products with separation of variables.

Two engines share one interface: a closed-form product for the flat
potential, and a general engine that reconstructs the product from a
classifying potential by solving for left operators order by order.

Orientation convention, used consistently everywhere: the first argument
is differentiated antiholomorphically and the second holomorphically, so
holomorphic jets absorb on the left (a * f = a f) and antiholomorphic
jets on the right (f * b = b f).

The general engine rests on one computation.  Write the left operator of
f as L_f = sum_r nu^r sum_{|alpha| <= r} c_{alpha,r} d_z^alpha.  Requiring
L_f to commute with every right generator  dPhi/dzb^l + d_zb^l  gives,
per nu-order r and multi-index beta,

    d c_{beta,r} / dzb^l
        = sum_{alpha > beta} binom(alpha,beta)
          sum_s c_{alpha,r-s} d_z^{alpha-beta} (Phi^(s)_{,lbar}),

where Phi^(s) is the nu^s part of the potential.  The s = -1 terms with
|alpha - beta| = 1 contain the next-order unknowns against the metric
g_{k lbar}; everything else is determined earlier when the table is
filled stratum by stratum in d = r - |alpha| and, inside a stratum, by
increasing |beta|.  Uniqueness makes repeated determinations of the same
coefficient a consistency check, and the engine asserts them.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .kernel import (
    ANTI,
    CRat,
    CR_I,
    CR_ZERO,
    HOLO,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    coord_jets,
    invert_jet_matrix,
    jet_deriv,
    jet_deriv_multi,
    madd,
    mbinom,
    mfact,
    msub,
    mtotal,
    multi_indices_total,
)
from .diffop import DiffOperator, is_natural, matrix_rank, op_apply


class PotentialJet:
    """A classifying potential as a truncated jet, with cached metric data.

    The nu^-1 part must have no constant and no linear term (always
    reachable by a gauge shift) and its mixed second derivatives must
    form a matrix invertible at the base point.

    ``tail_degree`` is the coordinate degree of the first omitted term of
    the stored expansion, or None when the potential is exact.  Results
    computed from a truncated potential are only certified while the
    dropped tail cannot reach them; see ``certified_nu_top``.
    """

    __slots__ = ("space", "trunc", "body", "tail_degree", "name", "metric", "solver")

    def __init__(self, body: Jet, tail_degree=None, name: str = ""):
        space, trunc = body.space, body.trunc
        if space.copies != 1:
            raise ValueError("a potential lives on a single-copy space")
        levels = body.nu_levels()
        if levels and levels[0] < -1:
            raise ValueError("potential has nu-degree below -1")
        lead = body.nu_part(-1)
        for (_, exps) in lead.terms:
            if sum(exps) < 2:
                raise ValueError(
                    "nu^-1 part must have no constant or linear term; regauge first"
                )
        m = space.cdim
        metric = []
        for k in range(m):
            row = []
            for l in range(m):
                g = jet_deriv(jet_deriv(lead, space.index(0, HOLO, k)), space.index(0, ANTI, l))
                row.append(g)
            metric.append(row)
        # rows indexed by the generator direction l, columns by the unknown k
        system = [[metric[k][l] for k in range(m)] for l in range(m)]
        try:
            solver = invert_jet_matrix(system)
        except ValueError as e:
            raise ValueError(f"degenerate potential metric: {e}") from None
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "trunc", trunc)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "tail_degree", tail_degree)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "solver", solver)

    def __setattr__(self, name, value):
        raise AttributeError("PotentialJet is immutable")

    @property
    def m(self) -> int:
        return self.space.cdim

    def filtration_floor(self):
        """Least possible filtration degree of any dropped potential term."""
        if self.tail_degree is None:
            return None
        return self.tail_degree - 2

    def certified_nu_top(self, deg: int = 0) -> int:
        """Top nu-order of a degree-``deg`` result untouched by the tail.

        A dropped term has filtration at least tail_degree - 2 and every
        later operation preserves nonnegative filtration, so a result
        term at nu^k and coordinate degree deg is clean while
        2k + deg < tail_degree - 2.
        """
        floor = self.filtration_floor()
        if floor is None:
            return self.trunc.nu_max
        first_bad = max(-((deg - floor) // 2), 0)  # ceil((floor - deg)/2)
        return min(self.trunc.nu_max, first_bad - 1)

    def retruncate(self, trunc: TruncationSpec) -> "PotentialJet":
        if trunc.deg_max < self.trunc.deg_max:
            raise ValueError("cannot narrow the degree window of a potential")
        return PotentialJet(self.body.retruncate(trunc), self.tail_degree, self.name)


# -- built-in potential library


def _radius_jet(space, trunc) -> Jet:
    xs = coord_jets(space, trunc)
    m = space.cdim
    s = Jet.zero(space, trunc)
    for k in range(m):
        s = s + xs[space.index(0, HOLO, k)] * xs[space.index(0, ANTI, k)]
    return s


def potential_flat(m: int, trunc: TruncationSpec) -> PotentialJet:
    space = VarSpace(1, m)
    body = _radius_jet(space, trunc).shift_nu(-1)
    return PotentialJet(body, None, "flat")


def _log_series_potential(m, trunc, sign: int, name: str) -> PotentialJet:
    # sign +1 gives -log(1 - s), sign -1 gives log(1 + s)
    space = VarSpace(1, m)
    s = _radius_jet(space, trunc)
    acc = Jet.zero(space, trunc)
    power = Jet.const(space, trunc, 1)
    n = 0
    while True:
        n += 1
        if 2 * n > trunc.deg_max:
            break
        power = power * s
        acc = acc + power * CRat(Fraction(sign ** (n + 1), n))
    return PotentialJet(acc.shift_nu(-1), 2 * n, name)


def potential_hyperbolic(m: int, trunc: TruncationSpec) -> PotentialJet:
    return _log_series_potential(m, trunc, 1, "hyperbolic")


def potential_fubini_study(m: int, trunc: TruncationSpec) -> PotentialJet:
    return _log_series_potential(m, trunc, -1, "fubini-study")


POTENTIALS = {
    "flat": potential_flat,
    "hyperbolic": potential_hyperbolic,
    "fubini-study": potential_fubini_study,
}


def perturb_potential(pot: PotentialJet) -> PotentialJet:
    """Deliberately wrong variant for negative controls: adds nu * s."""
    body = pot.body + _radius_jet(pot.space, pot.trunc).shift_nu(1)
    return PotentialJet(body, pot.tail_degree, pot.name + "+perturbed")


def potential_to_records(pot: PotentialJet) -> dict:
    terms = []
    for (nu, exps), c in pot.body.items_sorted():
        terms.append({"nu": nu, "exps": list(exps), "re": str(c.re), "im": str(c.im)})
    rec = {"m": pot.m, "deg_max": pot.trunc.deg_max, "terms": terms}
    if pot.tail_degree is not None:
        rec["tail_degree"] = pot.tail_degree
    if pot.name:
        rec["name"] = pot.name
    return rec


def potential_from_records(rec: dict, trunc: TruncationSpec) -> PotentialJet:
    m = int(rec["m"])
    space = VarSpace(1, m)
    if trunc.deg_max > int(rec["deg_max"]):
        raise ValueError("potential file declares a narrower degree window")
    terms = {}
    for t in rec["terms"]:
        exps = tuple(int(e) for e in t["exps"])
        if len(exps) != space.n_vars:
            raise ValueError("exponent tuple length does not match 2m")
        c = CRat(Fraction(t["re"]), Fraction(t.get("im", "0")))
        key = (int(t["nu"]), exps)
        terms[key] = terms.get(key, CR_ZERO) + c
    body = Jet(space, trunc, terms)
    tail = rec.get("tail_degree")
    return PotentialJet(body, None if tail is None else int(tail), rec.get("name", "file"))


def load_potential(path, trunc: TruncationSpec) -> PotentialJet:
    with open(path) as fh:
        return potential_from_records(json.load(fh), trunc)


def save_potential(path, pot: PotentialJet) -> None:
    with open(path, "w") as fh:
        json.dump(potential_to_records(pot), fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- the flat closed form


def antiwick_star(f: Jet, g: Jet) -> Jet:
    """Flat-model product: sum_kappa nu^|kappa|/kappa! dzb^kappa f dz^kappa g."""
    if f.space != g.space:
        raise ValueError("jets live on different variable spaces")
    space = f.space
    if space.copies != 1:
        raise ValueError("star products act on single-copy jets")
    out = f * g
    m = space.cdim
    bound = min(f.max_coord_degree(), g.max_coord_degree())
    for total in range(1, bound + 1):
        for kappa in multi_indices_total(m, total):
            gamma_f = [0] * space.n_vars
            gamma_g = [0] * space.n_vars
            for k in range(m):
                gamma_f[space.index(0, ANTI, k)] = kappa[k]
                gamma_g[space.index(0, HOLO, k)] = kappa[k]
            df = jet_deriv_multi(f, tuple(gamma_f))
            if df.is_zero:
                continue
            dg = jet_deriv_multi(g, tuple(gamma_g))
            if dg.is_zero:
                continue
            piece = (df * dg).shift_nu(total) * CRat(Fraction(1, mfact(kappa)))
            out = out + piece
    return out


# -- the general engine


def left_operator(f: Jet, pot: PotentialJet) -> DiffOperator:
    """The operator of left multiplication by f for the product of pot."""
    trunc = pot.trunc
    levels = f.nu_levels()
    base = min(levels, default=0)
    if base < 0:
        wide = TruncationSpec(trunc.nu_min, trunc.nu_max - base, trunc.deg_max)
        lifted = left_operator(f.retruncate(wide).shift_nu(-base), pot.retruncate(wide))
        return DiffOperator(
            pot.space, trunc, {(r + base, g): c.retruncate(trunc) for (r, g), c in lifted.terms.items()}
        )

    space = pot.space
    m = space.cdim
    max_r = trunc.nu_max
    zero = Jet.zero(space, trunc)

    # nu^s parts of the potential and the derivative cache
    # d_z^mu (Phi^(s)_{,lbar}), keyed (s, l, mu)
    phi_parts = {s: pot.body.nu_part(s) for s in pot.body.nu_levels()}
    dcache: dict = {}

    def phi_deriv(s, l, mu):
        key = (s, l, mu)
        got = dcache.get(key)
        if got is None:
            gamma = [0] * space.n_vars
            for k in range(m):
                gamma[space.index(0, HOLO, k)] = mu[k]
            gamma[space.index(0, ANTI, l)] += 1
            got = jet_deriv_multi(phi_parts[s], tuple(gamma))
            dcache[key] = got
        return got

    # coefficient table: (alpha over the m holomorphic axes, r) -> Jet
    coeffs: dict = {}
    for r in range(0, max_r + 1):
        part = f.nu_part(r)
        if not part.is_zero:
            coeffs[((0,) * m, r)] = part

    for d in range(0, max_r):
        for lev in range(0, max_r - d):
            r = d + lev
            for beta in multi_indices_total(m, lev):
                c_beta = coeffs.get((beta, r), zero)
                # right-hand sides per generator direction
                rhs = []
                for l in range(m):
                    k_l = jet_deriv(c_beta, space.index(0, ANTI, l))
                    for (alpha, rho), c_al in coeffs.items():
                        mu = msub(alpha, beta)
                        if mu is None or mtotal(mu) == 0:
                            continue
                        s = r - rho
                        if s == -1 and mtotal(mu) == 1:
                            continue  # unknowns of this solve
                        if s not in phi_parts:
                            continue
                        dphi = phi_deriv(s, l, mu)
                        if dphi.is_zero:
                            continue
                        k_l = k_l - c_al * dphi * mbinom(alpha, beta)
                    rhs.append(k_l)
                for k in range(m):
                    v = zero
                    for l in range(m):
                        if not rhs[l].is_zero:
                            v = v + pot.solver[k][l] * rhs[l]
                    child = madd(beta, tuple(1 if i == k else 0 for i in range(m)))
                    value = v * CRat(Fraction(1, beta[k] + 1))
                    prev = coeffs.get((child, r + 1))
                    if prev is None:
                        if not value.is_zero:
                            coeffs[(child, r + 1)] = value
                    elif prev != value:
                        raise ValueError(
                            f"inconsistent left-operator solve at alpha={child}, r={r + 1}"
                        )

    terms = {}
    for (alpha, r), c in coeffs.items():
        gamma = [0] * space.n_vars
        for k in range(m):
            gamma[space.index(0, HOLO, k)] = alpha[k]
        key = (r, tuple(gamma))
        terms[key] = c if key not in terms else terms[key] + c
    op = DiffOperator(space, trunc, terms)
    ok, witness = is_natural(op)
    if not ok:
        raise AssertionError(f"left operator lost naturality at {witness}")
    return op


class StarEngine:
    """One product at one truncation, with a left-operator memo.

    ``flip`` swaps the roles of the two arguments; it exists as a
    deliberate mutation for negative-control tests and is not part of
    normal operation.
    """

    def __init__(self, potential: PotentialJet, trunc=None, flip: bool = False):
        if trunc is None:
            trunc = potential.trunc
        elif trunc != potential.trunc:
            potential = potential.retruncate(trunc)
        self.potential = potential
        self.trunc = trunc
        self.space = potential.space
        self.flip = flip
        self._memo: dict = {}
        # scratch cache for layered constructions (pure-cache contract)
        self.memo: dict = {}

    @staticmethod
    def flat(m: int, trunc: TruncationSpec, flip: bool = False) -> "FlatStarEngine":
        return FlatStarEngine(m, trunc, flip)

    @property
    def m(self) -> int:
        return self.space.cdim

    def certified_nu_top(self, deg: int = 0) -> int:
        return self.potential.certified_nu_top(deg)

    def widened(self, nu_top: int) -> "StarEngine":
        if nu_top <= self.trunc.nu_max:
            return self
        wide = TruncationSpec(self.trunc.nu_min, nu_top, self.trunc.deg_max)
        return StarEngine(self.potential.retruncate(wide), flip=self.flip)

    def left(self, f: Jet) -> DiffOperator:
        key = f._hash_key()
        got = self._memo.get(key)
        if got is None:
            got = left_operator(f.retruncate(self.trunc), self.potential)
            self._memo[key] = got
        return got

    def star(self, f: Jet, g: Jet) -> Jet:
        if self.flip:
            f, g = g, f
        return op_apply(self.left(f), g.retruncate(self.trunc))


class FlatStarEngine:
    """Closed-form engine for the flat potential."""

    def __init__(self, m: int, trunc: TruncationSpec, flip: bool = False):
        self.potential = potential_flat(m, trunc)
        self.trunc = trunc
        self.space = self.potential.space
        self.flip = flip
        self.memo: dict = {}

    @property
    def m(self) -> int:
        return self.space.cdim

    def certified_nu_top(self, deg: int = 0) -> int:
        return self.trunc.nu_max

    def widened(self, nu_top: int) -> "FlatStarEngine":
        if nu_top <= self.trunc.nu_max:
            return self
        wide = TruncationSpec(self.trunc.nu_min, nu_top, self.trunc.deg_max)
        return FlatStarEngine(self.m, wide, self.flip)

    def star(self, f: Jet, g: Jet) -> Jet:
        if self.flip:
            f, g = g, f
        return antiwick_star(f.retruncate(self.trunc), g.retruncate(self.trunc))


def reframed(engine, trunc: TruncationSpec):
    """The same product over another nu window, cached on the engine."""
    if trunc == engine.trunc:
        return engine
    cache = engine.memo.setdefault("reframed", {})
    got = cache.get(trunc)
    if got is None:
        if isinstance(engine, FlatStarEngine):
            got = FlatStarEngine(engine.m, trunc, engine.flip)
        else:
            got = StarEngine(engine.potential.retruncate(trunc), flip=engine.flip)
        cache[trunc] = got
    return got


def star_general(f: Jet, g: Jet, pot: PotentialJet) -> Jet:
    return op_apply(left_operator(f, pot), g.retruncate(pot.trunc))


def check_associativity(f: Jet, g: Jet, h: Jet, engine) -> NuSeries:
    """Mass of (f*g)*h - f*(g*h) per nu-order; exactly zero iff the jet is."""
    left = engine.star(engine.star(f, g), h)
    right = engine.star(f, engine.star(g, h))
    resid = left - right
    out = {}
    for (nu, _exps), c in resid.terms.items():
        out[nu] = out.get(nu, CR_ZERO) + CRat(c.abs2())
    return NuSeries(out, engine.trunc.nu_min, engine.trunc.nu_max)


def c1_tensor(engine):
    """First-order coefficients K[i][j] = nu^1 part of x_i * x_j, with rank.

    The rank is that of the matrix of values at the base point.
    """
    space, trunc = engine.space, engine.trunc
    xs = coord_jets(space, trunc)
    n = space.n_vars
    k_mat = []
    for i in range(n):
        row = []
        for j in range(n):
            row.append(engine.star(xs[i], xs[j]).nu_part(1))
        k_mat.append(row)
    zero_e = space.zero_exps()
    const = [[k_mat[i][j].coeff(0, zero_e) for j in range(n)] for i in range(n)]
    return k_mat, matrix_rank(const)


def poisson_residual(engine, k_mat):
    """(K - K^T) O - i, where O is the matrix of the leading two-form.

    The leading form is i g_{k lbar} dz^k dzb^l, so O has the metric in
    the holomorphic-antiholomorphic block and its negative transpose in
    the other.  A correct product makes the residual vanish within the
    certified window.
    """
    space, trunc = engine.space, engine.trunc
    m = engine.m
    n = space.n_vars
    g = engine.potential.metric
    zero = Jet.zero(space, trunc)
    omega = [[zero for _ in range(n)] for _ in range(n)]
    for k in range(m):
        for l in range(m):
            i_h, i_a = space.index(0, HOLO, k), space.index(0, ANTI, l)
            omega[i_h][i_a] = g[k][l] * CR_I
            omega[i_a][i_h] = g[k][l] * (-CR_I)
    resid = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = zero
            for t in range(n):
                acc = acc + (k_mat[i][t] - k_mat[t][i]) * omega[t][j]
            if i == j:
                acc = acc - Jet.const(space, trunc, CR_I)
            row.append(acc)
        resid.append(row)
    return resid
