"""Two-point jet algebra and the transported product on point distributions.

A BiJet is a jet on a doubled variable space: slot 1 carries (z, zb),
slot 2 carries (w, wb).  On factorizable monomials (g1 (x) h1) the algebra
product is

    (g1 (x) h1) * (g2 (x) h2)  =  (h1 star g2)(0) . (g1 (x) h2),

its trace is tr(f (x) g) = (g star f)(0), and the functional

    lambda(f (x) g) : h  |->  (g star h star f)(0)

sends the algebra onto point distributions.  The holomorphic sector G
(series in nu, z, wb alone) maps bijectively onto natural distributions;
transporting the product through that restriction yields the bullet
product whose trace is evaluation at 1.  Everything extends linearly
from monomials; slot-2 exponents are read on the single-copy space when
they meet the star engine.
"""

from itertools import product as iproduct
from math import factorial

from .diffop import PointDistribution, matrix_rank
from .kernel import (
    ANTI,
    CRat,
    HOLO,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    jet_substitute,
    mtotal,
    multi_indices,
    multi_indices_total,
    mfact,
)
from .star import FlatStarEngine, reframed


def pair_space(m: int) -> VarSpace:
    return VarSpace(2, m)


def embed_slot(f: Jet, slot: int, space2: VarSpace) -> Jet:
    """Copy a single-slot jet into the given slot of a doubled space."""
    src = f.space
    if src.copies != 1 or src.cdim != space2.cdim or space2.copies != 2:
        raise ValueError("embedding expects single-copy input and a doubled target")
    plan = {i: space2.index(slot, src.kind_of(i), src.axis_of(i))
            for i in range(src.n_vars)}
    return jet_substitute(f, space2, plan)


def tensor(f: Jet, g: Jet) -> Jet:
    """f (x) g with f in slot 1 and g in slot 2."""
    space2 = pair_space(f.space.cdim)
    return embed_slot(f, 0, space2) * embed_slot(g, 1, space2)


def slot_parts(space2: VarSpace, exps):
    """Split doubled-space exponents into two single-copy tuples."""
    n1 = 2 * space2.cdim
    return tuple(exps[:n1]), tuple(exps[n1:])


def gamma_map(f: Jet) -> Jet:
    """Almost analytic extension: relabel slot-1 zb to slot-2 wb."""
    src = f.space
    if src.copies != 1:
        raise ValueError("expected a single-copy jet")
    space2 = pair_space(src.cdim)
    plan = {}
    for i in range(src.n_vars):
        kind = src.kind_of(i)
        plan[i] = space2.index(1 if kind == ANTI else 0, kind, src.axis_of(i))
    return jet_substitute(f, space2, plan)


def g_project(F: Jet) -> Jet:
    """Projection onto G along the ideal: freeze slot-1 zb and slot-2 w."""
    space2 = F.space
    plan = {}
    for i in range(space2.n_vars):
        copy, kind = space2.copy_of(i), space2.kind_of(i)
        if (copy, kind) in ((0, ANTI), (1, HOLO)):
            plan[i] = None
        else:
            plan[i] = i
    return jet_substitute(F, space2, plan)


def h_part(F: Jet) -> Jet:
    return F - g_project(F)


def _mono_jet(engine, exps) -> Jet:
    return Jet.monomial(engine.space, engine.trunc, 0, exps)


def _depth_engine(engine, depth: int):
    """Engine with the scalar ceiling lifted to at least depth.

    Negative nu weights shift scalar rows down into the window, so star
    evaluations must stay exact above nu_max; the high-water mark keeps
    the lifted engines few so their operator caches get reused.
    """
    trunc = engine.trunc
    if depth <= trunc.nu_max:
        return engine
    hw = max(engine.memo.get("scalar_depth", trunc.nu_max), depth)
    engine.memo["scalar_depth"] = hw
    return reframed(engine, TruncationSpec(trunc.nu_min, hw, trunc.deg_max))


def _mono_star0(engine, left_exps, right_exps, depth=None) -> NuSeries:
    """(x^left star x^right)(0), exact at nu-orders <= depth, memoized."""
    if depth is None:
        depth = engine.trunc.nu_max
    key = ("star0", left_exps, right_exps)
    got = engine.memo.get(key)
    if got is None or (got.nu_max is not None and got.nu_max < depth):
        eng = _depth_engine(engine, depth)
        got = eng.star(_mono_jet(eng, left_exps),
                       _mono_jet(eng, right_exps)).eval0()
        engine.memo[key] = got
    return got


def c_mul(F: Jet, G: Jet, engine) -> Jet:
    """Algebra product on the doubled space, extended bilinearly."""
    space2 = F.space
    if G.space != space2:
        raise ValueError("operands live on different spaces")
    acc = {}
    zero1 = (0,) * (2 * space2.cdim)
    for (nu1, e1), c1 in F.terms.items():
        g1, h1 = slot_parts(space2, e1)
        for (nu2, e2), c2 in G.terms.items():
            g2, h2 = slot_parts(space2, e2)
            scalar = _mono_star0(engine, h1, g2, F.trunc.nu_max - nu1 - nu2)
            if scalar.is_zero:
                continue
            c = c1 * c2
            out_exps = g1 + h2
            for r, s in scalar.terms.items():
                key = (nu1 + nu2 + r, out_exps)
                acc[key] = acc.get(key, CRat()) + c * s
    return Jet(space2, F.trunc, acc)


def c_trace(F: Jet, engine) -> NuSeries:
    """Trace on the doubled algebra: tr(f (x) g) = (g star f)(0)."""
    out = NuSeries({}, nu_max=F.trunc.nu_max)
    for (nu, e), c in F.terms.items():
        f1, g1 = slot_parts(F.space, e)
        scalar = _mono_star0(engine, g1, f1, F.trunc.nu_max - nu)
        out = out + NuSeries({nu: c}, nu_min=min(0, nu)) * scalar
    return out


def _lambda_column_flat(engine, f_exps, g_exps, depth) -> PointDistribution:
    """Closed-form column for the flat product, exact at every depth.

    Nonzero only for a holomorphic slot-0 factor against an
    anti-holomorphic slot-1 factor; the rows follow per-axis towers.
    """
    space = engine.space
    trunc = engine.trunc
    window = TruncationSpec(trunc.nu_min, max(depth, trunc.nu_max), trunc.deg_max)
    if engine.flip:
        f_exps, g_exps = g_exps, f_exps
    m = space.cdim
    hol = [space.index(0, HOLO, j) for j in range(m)]
    ant = [space.index(0, ANTI, j) for j in range(m)]
    if any(f_exps[i] for i in ant) or any(g_exps[i] for i in hol):
        return PointDistribution(space, window, {})
    fa = [f_exps[i] for i in hol]
    gb = [g_exps[i] for i in ant]
    terms = {}
    for kappa in iproduct(*(range(a + 1) for a in fa)):
        if any(fa[j] - kappa[j] > gb[j] for j in range(m)):
            continue
        r = sum(gb) + sum(kappa)
        if r > window.nu_max:
            continue
        gamma = [0] * space.n_vars
        deg = 0
        for j in range(m):
            gamma[hol[j]] = gb[j] - fa[j] + kappa[j]
            gamma[ant[j]] = kappa[j]
            deg += gb[j] - fa[j] + 2 * kappa[j]
        if deg > window.deg_max:
            continue
        num = 1
        for j in range(m):
            num *= (
                factorial(fa[j])
                * factorial(gb[j])
                // (
                    factorial(kappa[j])
                    * factorial(fa[j] - kappa[j])
                    * factorial(gb[j] - fa[j] + kappa[j])
                )
            )
        terms[(r, tuple(gamma))] = CRat(num)
    return PointDistribution(space, window, terms)


def _lambda_column(engine, g_exps, h_exps, depth=None) -> PointDistribution:
    """lambda on the monomial pair x^g (x) x^h, as a distribution.

    Rows are exact up to depth: rows above nu_max matter once a negative
    nu weight shifts them back into the window.
    """
    if depth is None:
        depth = engine.trunc.nu_max
    key = ("lamcol", g_exps, h_exps)
    got = engine.memo.get(key)
    if got is not None and got.trunc.nu_max >= depth:
        return got
    if isinstance(engine, FlatStarEngine):
        got = _lambda_column_flat(engine, g_exps, h_exps, depth)
        engine.memo[key] = got
        return got
    eng = _depth_engine(engine, depth)
    space, trunc = eng.space, eng.trunc
    f_jet = _mono_jet(eng, g_exps)
    g_jet = _mono_jet(eng, h_exps)
    terms = {}
    for mu in multi_indices(space.n_vars, trunc.deg_max):
        inner = eng.star(_mono_jet(eng, mu), f_jet)
        val = eng.star(g_jet, inner).eval0()
        if val.is_zero:
            continue
        inv = CRat(1) / CRat(mfact(mu))
        for r, c in val.terms.items():
            terms[(r, mu)] = c * inv
    got = PointDistribution(space, trunc, terms)
    engine.memo[key] = got
    return got


def lambda_of(F: Jet, engine) -> PointDistribution:
    """The functional h |-> sum (g star h star f)(0) over monomials of F."""
    space, trunc = engine.space, engine.trunc
    acc = {}
    for (nu, e), c in F.terms.items():
        g1, h1 = slot_parts(F.space, e)
        col = _lambda_column(engine, g1, h1, trunc.nu_max - nu)
        for (r, mu), v in col.terms.items():
            key = (r + nu, mu)
            acc[key] = acc.get(key, CRat()) + v * c
    return PointDistribution(space, trunc, acc)


def _g_basis_stage(engine, grade: int):
    """G-monomials nu^n z^alpha wb^delta of filtration 2n+|alpha|+|delta|."""
    trunc = engine.trunc
    m = engine.m
    out = []
    for d in range(0, trunc.deg_max + 1):
        n2 = grade - d
        if n2 % 2:
            continue
        n = n2 // 2
        if not (trunc.nu_min <= n <= trunc.nu_max):
            continue
        for alpha in multi_indices(m, d):
            for delta in multi_indices_total(m, d - mtotal(alpha)):
                out.append((n, alpha, delta))
    return out


def _dist_keys_stage(engine, grade: int):
    """Distribution keys (r, mu) with 2r - |mu| = grade, inside the window."""
    trunc = engine.trunc
    space = engine.space
    out = []
    for d in range(0, trunc.deg_max + 1):
        r2 = grade + d
        if r2 % 2:
            continue
        r = r2 // 2
        if not (trunc.nu_min <= r <= trunc.nu_max):
            continue
        for mu in multi_indices_total(space.n_vars, d):
            out.append((r, mu))
    return out


def _g_monomial(engine, n, alpha, delta, c=1) -> Jet:
    space2 = pair_space(engine.m)
    exps = [0] * space2.n_vars
    for a, e in enumerate(alpha):
        exps[space2.index(0, HOLO, a)] = e
    for a, e in enumerate(delta):
        exps[space2.index(1, ANTI, a)] = e
    return Jet.monomial(space2, engine.trunc, n, tuple(exps), c)


def _solve_exact(rows, rhs):
    """Gaussian solve over exact complex rationals.

    rows: list of row vectors; rhs: list of values.  Returns (solution,
    unique); the solution is None when the system is inconsistent, and
    unique is False when a free column remains.
    """
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    mat = [list(r) + [v] for r, v in zip(rows, rhs)]
    piv_cols = []
    rank = 0
    for col in range(ncols):
        piv = None
        for i in range(rank, nrows):
            if mat[i][col]:
                piv = i
                break
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        inv = CRat(1) / mat[rank][col]
        mat[rank] = [x * inv for x in mat[rank]]
        for i in range(nrows):
            if i != rank and mat[i][col]:
                f = mat[i][col]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[rank])]
        piv_cols.append(col)
        rank += 1
    for i in range(rank, nrows):
        if mat[i][ncols]:
            return None, False
    sol = [CRat()] * ncols
    for i, col in enumerate(piv_cols):
        sol[col] = mat[i][ncols]
    return sol, rank == ncols


def lambda_g_inverse(u: PointDistribution, engine) -> Jet:
    """The unique G-sector preimage of u under lambda.

    Solves stage by stage along the filtration 2n + |alpha| + |delta|;
    each stage is a finite exact linear system whose entries come from
    the cached lambda columns.  A stage with no consistent solution
    raises, reporting the filtration level.  A stage whose visible
    columns leave a free direction also raises: two basis elements the
    window cannot tell apart would make every later product untrustworthy.
    """
    trunc = engine.trunc
    residual = u
    total = Jet.zero(pair_space(engine.m), trunc)
    lo = 2 * trunc.nu_min - trunc.deg_max
    hi = 2 * trunc.nu_max
    for grade in range(lo, hi + 1):
        keys = _dist_keys_stage(engine, grade)
        if not keys:
            continue
        rhs = [residual.terms.get(k, CRat()) for k in keys]
        if not any(rhs):
            continue
        basis = []
        cols = []
        for (n, alpha, delta) in _g_basis_stage(engine, grade):
            col_dist = _lambda_column(
                engine,
                _g_exps_single(engine, alpha, HOLO),
                _g_exps_single(engine, delta, ANTI),
                trunc.nu_max - n,
            )
            col = [col_dist.terms.get((r - n, mu), CRat()) for (r, mu) in keys]
            if not any(col):
                # every image term of nu^n z^a (x) wb^d sits at nu-order
                # n + max(|a|,|d|) or higher, and so does anything it can
                # feed into a later product or trace; once that floor
                # clears nu_max the element is harmless and unknowable
                if n + max(mtotal(alpha), mtotal(delta)) > trunc.nu_max:
                    continue
                raise ValueError(
                    f"preimage underdetermined at filtration level {grade}; "
                    "widen the nu window"
                )
            basis.append((n, alpha, delta))
            cols.append(col)
        rows = [[cols[j][i] for j in range(len(basis))] for i in range(len(keys))]
        sol, unique = _solve_exact(rows, rhs)
        if sol is None:
            raise ValueError(
                f"no holomorphic-sector preimage at filtration level {grade}"
            )
        if not unique:
            raise ValueError(
                f"preimage underdetermined at filtration level {grade}; "
                "widen the nu window"
            )
        stage = Jet.zero(total.space, trunc)
        for x, (n, alpha, delta) in zip(sol, basis):
            if x:
                stage = stage + _g_monomial(engine, n, alpha, delta, x)
        if stage.is_zero:
            continue
        total = total + stage
        residual = residual - lambda_of(stage, engine)
    if residual.terms:
        level = min(2 * r - mtotal(mu) for (r, mu) in residual.terms)
        raise ValueError(
            f"no holomorphic-sector preimage at filtration level {level}"
        )
    return total


def _g_exps_single(engine, axis_exps, kind):
    exps = [0] * engine.space.n_vars
    for a, e in enumerate(axis_exps):
        exps[engine.space.index(0, kind, a)] = e
    return tuple(exps)


def bullet(u1: PointDistribution, u2: PointDistribution, engine) -> PointDistribution:
    """Product on distributions transported through the G-sector."""
    g1 = lambda_g_inverse(u1, engine)
    g2 = lambda_g_inverse(u2, engine)
    return lambda_of(c_mul(g1, g2, engine), engine)


def n_trace(u: PointDistribution) -> NuSeries:
    """Evaluation at the constant jet 1."""
    terms = {}
    for (r, mu), c in u.terms.items():
        if not any(mu):
            terms[r] = c
    return NuSeries(terms, nu_min=min([0] + list(terms)), nu_max=u.trunc.nu_max)


def lambda_rank_report(engine, deg_bound: int):
    """Column independence of lambda on the nu-free G basis.

    For each filtration grade, the grade slice of the lambda columns must
    have full column rank; returns (ok, per-grade list of (cols, rank)).
    """
    m = engine.m
    basis = []
    for d in range(deg_bound + 1):
        for alpha in multi_indices(m, d):
            rest = d - mtotal(alpha)
            for delta in multi_indices(m, rest):
                if mtotal(alpha) + mtotal(delta) == d:
                    basis.append((alpha, delta))
    by_grade = {}
    for (alpha, delta) in basis:
        by_grade.setdefault(mtotal(alpha) + mtotal(delta), []).append((alpha, delta))
    report = []
    ok = True
    for grade in sorted(by_grade):
        group = by_grade[grade]
        keys = _dist_keys_stage(engine, grade)
        rows = []
        for (r, mu) in keys:
            row = []
            for (alpha, delta) in group:
                col = _lambda_column(
                    engine,
                    _g_exps_single(engine, alpha, HOLO),
                    _g_exps_single(engine, delta, ANTI),
                )
                row.append(col.terms.get((r, mu), CRat()))
            rows.append(row)
        rank = matrix_rank(rows)
        report.append((grade, len(group), rank))
        if rank < len(group):
            ok = False
    return ok, report
