"""Named verification suites with deterministic JSON reports.

Every check draws its cases from an explicitly seeded generator and
emits one record; the runner times the records, sorts them by name,
and renders a report whose bytes depend only on the configuration.
Mutations deliberately break one structural choice each, so a clean
suite run doubles as a sensitivity test harness.
"""

import json
import random
import time
from dataclasses import dataclass, replace

from .berezin import (
    berezin_inverse,
    berezin_map,
    berezin_operator,
    conjugation_check,
    wick_star,
)
from .calabi import (
    annihilator_residual,
    calabi_g,
    chain_trace,
    copy_space,
    critical_check,
    factorizable_trace,
    main_theorem_residual,
)
from .diffop import PointDistribution, is_oscillatory, tensor_dist
from .distalg import (
    c_mul,
    c_trace,
    g_project,
    gamma_map,
    h_part,
    lambda_of,
    lambda_rank_report,
    n_trace,
    pair_space,
    tensor,
)
from .kernel import (
    ANTI,
    HOLO,
    CRat,
    Jet,
    NuSeries,
    TruncationSpec,
    VarSpace,
    mfact,
    multi_indices,
)
from .oscact import (
    FieldJet,
    PhaseJet,
    act_exp,
    foi_residual,
    gaussian_foi,
    pairing_gram,
    transpose_field,
)
from .star import (
    POTENTIALS,
    FlatStarEngine,
    StarEngine,
    antiwick_star,
    check_associativity,
    load_potential,
    perturb_potential,
    potential_flat,
    potential_hyperbolic,
)

SCHEMA_VERSION = 1

MUTATIONS = ("flip-orientation", "perturb-potential", "perturb-calabi")

SUITE_NAMES = (
    "main-theorem",
    "curved",
    "annihilator",
    "star-oracle",
    "associativity",
    "berezin",
    "dist-algebra",
    "lemmas",
    "oscillatory",
    "foi",
    "structural",
)


@dataclass(frozen=True)
class RunConfig:
    potential: str = "flat"
    m: int = 1
    l: int = 2
    nu_max: int = 4
    deg_max: int = 8
    seed: int = 0
    mutate: str | None = None
    timings: bool = False

    def trunc(self, nu_max=None, deg_max=None) -> TruncationSpec:
        top = self.nu_max if nu_max is None else nu_max
        deg = self.deg_max if deg_max is None else deg_max
        return TruncationSpec(-top, top, deg)

    def validate(self):
        if self.m < 1 or self.l < 1:
            raise ValueError("m and l must be positive")
        if self.nu_max < 1 or self.deg_max < 1:
            raise ValueError("nu_max and deg_max must be positive")
        if self.mutate is not None and self.mutate not in MUTATIONS:
            raise ValueError(
                "unknown mutation %r; choose one of %s"
                % (self.mutate, ", ".join(MUTATIONS))
            )


# -- engines, cached so operator memos survive across checks

_ENGINES: dict = {}


def build_engine(cfg: RunConfig, m=None, nu_max=None, deg_max=None, potential=None):
    """Engine for the configured potential with the mutations applied."""
    m = cfg.m if m is None else m
    name = cfg.potential if potential is None else potential
    trunc = cfg.trunc(nu_max, deg_max)
    flip = cfg.mutate == "flip-orientation"
    perturbed = cfg.mutate == "perturb-potential"
    key = (name, flip, perturbed, m, trunc)
    eng = _ENGINES.get(key)
    if eng is not None:
        return eng
    if name == "flat" and not perturbed:
        eng = FlatStarEngine(m, trunc, flip=flip)
    else:
        if name in POTENTIALS:
            pot = POTENTIALS[name](m, trunc)
        else:
            pot = load_potential(name, trunc)
        if perturbed:
            pot = perturb_potential(pot)
        eng = StarEngine(pot, flip=flip)
    _ENGINES[key] = eng
    return eng


def _general_flat_engine(cfg: RunConfig, m: int, trunc: TruncationSpec):
    """Flat potential run through the generic solver, not the closed form."""
    flip = cfg.mutate == "flip-orientation"
    perturbed = cfg.mutate == "perturb-potential"
    key = ("flat-general", flip, perturbed, m, trunc)
    eng = _ENGINES.get(key)
    if eng is None:
        pot = potential_flat(m, trunc)
        if perturbed:
            pot = perturb_potential(pot)
        eng = StarEngine(pot, flip=flip)
        _ENGINES[key] = eng
    return eng


def _pot_label(cfg: RunConfig) -> str:
    return cfg.potential if cfg.potential in POTENTIALS else "file"


def _cert(engine) -> int:
    return engine.certified_nu_top()


def _calabi_shift(cfg: RunConfig, m: int, l: int, trunc: TruncationSpec):
    """Cross-coupling phase defect used by the perturb-calabi mutation."""
    if cfg.mutate != "perturb-calabi":
        return None
    sp = copy_space(m, l)
    exps = [0] * sp.n_vars
    exps[sp.index(0, HOLO, 0)] += 1
    exps[sp.index(l - 1, ANTI, 0)] += 1
    return PhaseJet(Jet.monomial(sp, trunc, -1, tuple(exps), 1))


# -- record assembly


def _rec(trunc: TruncationSpec, certified: int, residual, ok) -> dict:
    return {
        "nu_min": trunc.nu_min,
        "nu_max": trunc.nu_max,
        "deg_max": trunc.deg_max,
        "certified_nu": certified,
        "residual": residual if isinstance(residual, str) else str(residual),
        "ok": bool(ok),
    }


class _Worst:
    """Keeps the first failing witness across a batch of cases."""

    def __init__(self):
        self.ok = True
        self.residual = "0"

    def take(self, ok, residual="mismatch"):
        if self.ok and not ok:
            self.ok = False
            self.residual = str(residual) or "mismatch"


@dataclass(frozen=True)
class CheckEntry:
    suites: tuple
    anchor: str
    fn: object


REGISTRY: list = []


def _register(suites, anchor):
    def deco(fn):
        REGISTRY.append(CheckEntry(tuple(suites), anchor, fn))
        return fn

    return deco


# -- random material


def _monomial(rng, space, trunc, max_deg=2) -> Jet:
    exps = [0] * space.n_vars
    for _ in range(rng.randint(0, max_deg)):
        exps[rng.randrange(space.n_vars)] += 1
    coeff = rng.choice((-3, -2, -1, 1, 2, 3))
    return Jet.monomial(space, trunc, 0, tuple(exps), coeff)


def _mono_kind(rng, space, trunc, kind, max_deg=2) -> Jet:
    exps = [0] * space.n_vars
    for _ in range(rng.randint(0, max_deg)):
        exps[space.index(0, kind, rng.randrange(space.cdim))] += 1
    coeff = rng.choice((-3, -2, -1, 1, 2, 3))
    return Jet.monomial(space, trunc, 0, tuple(exps), coeff)


def _factor_tuple(rng, engine, l, max_deg=2):
    """A chain of rank-one holomorphic (x) anti-holomorphic tensors."""
    pairs = [
        (
            _mono_kind(rng, engine.space, engine.trunc, HOLO, max_deg),
            _mono_kind(rng, engine.space, engine.trunc, ANTI, max_deg),
        )
        for _ in range(l)
    ]
    us = [lambda_of(tensor(f, g), engine) for f, g in pairs]
    return pairs, us


def _random_bijet(rng, space2, trunc) -> Jet:
    terms = {}
    for _ in range(rng.randint(2, 4)):
        exps = [0] * space2.n_vars
        for _ in range(rng.randint(0, 3)):
            exps[rng.randrange(space2.n_vars)] += 1
        terms[(rng.randint(0, 1), tuple(exps))] = CRat(
            rng.randint(-2, 2), rng.randint(-1, 1)
        )
    return Jet(space2, trunc, terms)


def _random_g_element(rng, space2, trunc) -> Jet:
    terms = {}
    for _ in range(rng.randint(1, 3)):
        exps = [0] * space2.n_vars
        exps[space2.index(0, HOLO, 0)] = rng.randint(0, 2)
        exps[space2.index(1, ANTI, 0)] = rng.randint(0, 2)
        terms[(rng.randint(0, 1), tuple(exps))] = CRat(rng.randint(-2, 2))
    return Jet(space2, trunc, terms)


def _random_natural_dist(rng, space, trunc) -> PointDistribution:
    terms = {}
    for _ in range(rng.randint(1, 4)):
        r = rng.randint(0, 2)
        gamma = [0] * space.n_vars
        for _ in range(rng.randint(0, r)):
            gamma[rng.randrange(space.n_vars)] += 1
        terms[(r, tuple(gamma))] = CRat(rng.randint(-2, 2), rng.randint(-1, 1))
    u = PointDistribution(space, trunc, terms)
    return u if not u.is_zero else PointDistribution.delta(space, trunc)


def _random_phase(rng, space, trunc) -> PhaseJet:
    terms = {}
    for _ in range(rng.randint(1, 4)):
        s = rng.randint(-1, 1)
        exps = [0] * space.n_vars
        for _ in range(rng.randint(2 if s < 0 else 1, 3)):
            exps[rng.randrange(space.n_vars)] += 1
        terms[(s, tuple(exps))] = CRat(rng.randint(-2, 2), rng.randint(-1, 1))
    return PhaseJet(Jet(space, trunc, terms))


def _gauge_shift(rng, space, trunc) -> Jet:
    """A pluriharmonic perturbation a(z) + conj-side b(zb)."""
    shift = Jet(space, trunc, {})
    for kind in (HOLO, ANTI):
        for _ in range(2):
            nu = rng.choice((-1, 0, 1))
            deg = rng.randint(2 if nu < 0 else 1, 3)
            exps = [0] * space.n_vars
            exps[space.index(0, kind, rng.randrange(space.cdim))] = deg
            shift = shift + Jet.monomial(
                space, trunc, nu, tuple(exps), rng.randint(-3, 3)
            )
    return shift


_MAIN_CELLS = (
    ((1, 1), 4),
    ((1, 2), 5),
    ((1, 3), 4),
    ((2, 1), 4),
    ((2, 2), 4),
    ((2, 3), 4),
)


def _cell_rng(cfg: RunConfig, tag: int, m: int, l: int) -> random.Random:
    return random.Random(cfg.seed * 1009 + tag * 101 + m * 10 + l)


# -- the checks


@_register(("main-theorem",), "T:main")
def _chk_main(cfg: RunConfig):
    label = _pot_label(cfg)
    if cfg.l >= 2:
        eng = build_engine(cfg, m=1)
        sp, tr = eng.space, eng.trunc
        z = Jet.monomial(sp, tr, 0, (1, 0), 1)
        zb = Jet.monomial(sp, tr, 0, (0, 1), 1)
        u = lambda_of(tensor(z, zb), eng)
        shift = _calabi_shift(cfg, 1, 2, tr)
        res = main_theorem_residual([u, u], eng, shift)
        chain = chain_trace([u, u], eng)
        ok = res.is_zero
        if label == "flat" and chain != NuSeries.nu(2, nu_max=tr.nu_max):
            ok = False
        rec = _rec(tr, _cert(eng), res, ok)
        rec["value"] = str(chain)
        yield "main-golden-pair", rec
    for (m, l), count in _MAIN_CELLS:
        if m > cfg.m or l > cfg.l:
            continue
        eng = build_engine(cfg, m=m)
        rng = _cell_rng(cfg, 1, m, l)
        shift = _calabi_shift(cfg, m, l, eng.trunc)
        worst = _Worst()
        cert = _cert(eng)
        for _ in range(count):
            pairs, us = _factor_tuple(rng, eng, l)
            res = main_theorem_residual(us, eng, shift)
            worst.take(res.is_zero, res)
            direct = factorizable_trace(pairs, eng)
            chain = chain_trace(us, eng)
            worst.take(
                chain.truncate(cert) == direct.truncate(cert),
                chain - direct,
            )
        yield f"main-{label}-m{m}-l{l}", _rec(eng.trunc, cert, worst.residual, worst.ok)


@_register(("curved",), "T:main")
def _chk_curved(cfg: RunConfig):
    name = cfg.potential if cfg.potential != "flat" else "hyperbolic"
    eng = build_engine(cfg, m=1, nu_max=min(cfg.nu_max, 3), potential=name)
    shift = _calabi_shift(cfg, 1, 2, eng.trunc)
    worst = _Worst()
    sp, tr = eng.space, eng.trunc
    z = Jet.monomial(sp, tr, 0, (1, 0), 1)
    zb = Jet.monomial(sp, tr, 0, (0, 1), 1)
    u = lambda_of(tensor(z, zb), eng)
    res0 = main_theorem_residual([u, u], eng, shift)
    worst.take(res0.is_zero, res0)
    rng = _cell_rng(cfg, 2, 1, 2)
    for _ in range(2):
        _pairs, us = _factor_tuple(rng, eng, 2, max_deg=1)
        res = main_theorem_residual(us, eng, shift)
        worst.take(res.is_zero, res)
    yield "main-curved-l2", _rec(tr, _cert(eng), worst.residual, worst.ok)


@_register(("annihilator",), "E:annih")
def _chk_annihilator(cfg: RunConfig):
    label = _pot_label(cfg)
    for (m, l), count in _MAIN_CELLS:
        if m > cfg.m or l > cfg.l:
            continue
        eng = build_engine(cfg, m=m)
        rng = _cell_rng(cfg, 1, m, l)
        shift = _calabi_shift(cfg, m, l, eng.trunc)
        worst = _Worst()
        for _ in range(count):
            _pairs, us = _factor_tuple(rng, eng, l)
            for copy in range(l):
                for axis in range(m):
                    for kind in (HOLO, ANTI):
                        res = annihilator_residual(
                            us, eng, copy, axis, kind, shift
                        )
                        worst.take(res.is_zero, res)
        yield f"annih-{label}-m{m}-l{l}", _rec(
            eng.trunc, _cert(eng), worst.residual, worst.ok
        )


@_register(("star-oracle",), "D:orient")
def _chk_star_golden(cfg: RunConfig):
    eng = build_engine(cfg, m=1, nu_max=max(cfg.nu_max, 2), potential="flat")
    sp, tr = eng.space, eng.trunc
    z = Jet.monomial(sp, tr, 0, (1, 0), 1)
    zb = Jet.monomial(sp, tr, 0, (0, 1), 1)
    worst = _Worst()
    got = eng.star(zb, z)
    want = z * zb + Jet.nu(sp, tr)
    worst.take(got == want, got - want)
    got2 = eng.star(zb * zb, z * z)
    want2 = (
        z * z * zb * zb
        + (z * zb).shift_nu(1) * CRat(4)
        + Jet.nu(sp, tr, 2) * CRat(2)
    )
    worst.take(got2 == want2, got2 - want2)
    yield "star-golden", _rec(tr, _cert(eng), worst.residual, worst.ok)


@_register(("star-oracle",), "E:antiwick")
def _chk_star_oracle(cfg: RunConfig):
    trunc = cfg.trunc(nu_max=min(cfg.nu_max, 4))
    eng = _general_flat_engine(cfg, 1, trunc)
    worst = _Worst()
    count = 0
    for a in multi_indices(2, 4):
        fa = Jet.monomial(eng.space, trunc, 0, a, 1)
        for b in multi_indices(2, 4):
            fb = Jet.monomial(eng.space, trunc, 0, b, 1)
            got = eng.star(fa, fb)
            want = antiwick_star(fa, fb)
            worst.take(got == want, got - want)
            count += 1
    rec = _rec(trunc, _cert(eng), worst.residual, worst.ok)
    rec["cases"] = count
    yield "star-oracle", rec


@_register(("associativity",), "T:assoc")
def _chk_assoc(cfg: RunConfig):
    flat = build_engine(cfg, m=1, potential="flat")
    rng = _cell_rng(cfg, 3, 1, 1)
    for name, eng in (
        ("assoc-flat", flat),
        (
            "assoc-curved",
            build_engine(
                cfg,
                m=1,
                nu_max=min(cfg.nu_max, 3),
                potential=cfg.potential if cfg.potential != "flat" else "hyperbolic",
            ),
        ),
    ):
        worst = _Worst()
        cert = _cert(eng)
        for _ in range(10):
            f = _poly(rng, eng.space, eng.trunc)
            g = _poly(rng, eng.space, eng.trunc)
            h = _poly(rng, eng.space, eng.trunc)
            res = check_associativity(f, g, h, eng).truncate(cert)
            worst.take(res.is_zero, res)
        yield name, _rec(eng.trunc, cert, worst.residual, worst.ok)


def _poly(rng, space, trunc) -> Jet:
    f = Jet(space, trunc, {})
    for _ in range(rng.randint(1, 3)):
        f = f + _monomial(rng, space, trunc)
    return f


@_register(("berezin",), "E:berezin")
def _chk_berezin_golden(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp, tr = eng.space, eng.trunc
    zzb = Jet.monomial(sp, tr, 0, (1, 1), 1)
    got = berezin_map(eng).apply(zzb)
    want = zzb + Jet.nu(sp, tr)
    yield "berezin-golden", _rec(tr, _cert(eng), got - want, got == want)


@_register(("berezin",), "E:iaib")
def _chk_berezin_iaib(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp, tr = eng.space, eng.trunc
    a = Jet.monomial(sp, tr, 0, (2, 0), 1) + Jet.monomial(sp, tr, 0, (1, 0), -2)
    b = Jet.monomial(sp, tr, 0, (0, 1), 3) + Jet.monomial(sp, tr, 0, (0, 2), 1)
    left, right = conjugation_check(a, b, eng)
    worst = _Worst()
    for mu in multi_indices(2, 3):
        lv = left.image(mu)
        rv = right.image(mu)
        worst.take(lv.is_zero, lv)
        worst.take(rv.is_zero, rv)
    yield "berezin-iaib", _rec(tr, _cert(eng), worst.residual, worst.ok)


@_register(("berezin",), "L:bosc")
def _chk_berezin_oscillatory(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    report = is_oscillatory(berezin_operator(eng))
    residual = "0" if report.ok else (report.reason or "not oscillatory")
    yield "berezin-oscillatory", _rec(eng.trunc, _cert(eng), residual, report.ok)


@_register(("berezin",), "T:bhom")
def _chk_berezin_homomorphism(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    bmap = berezin_map(eng)
    binv = berezin_inverse(eng)
    rng = _cell_rng(cfg, 4, 1, 1)
    worst = _Worst()
    for _ in range(20):
        f = _poly(rng, eng.space, eng.trunc)
        g = _poly(rng, eng.space, eng.trunc)
        w = wick_star(f, g, eng)
        lhs = bmap.apply(w)
        rhs = eng.star(bmap.apply(f), bmap.apply(g))
        worst.take(lhs == rhs, lhs - rhs)
        worst.take(binv.apply(bmap.apply(f)) == f, "inverse defect")
    yield "berezin-homomorphism", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("berezin",), "E:wick")
def _chk_wick_oracle(cfg: RunConfig):
    # conjugating by the transform lands on the anti-normal composition,
    # which is the opposite-order product with the formal parameter negated
    eng = build_engine(cfg, m=1, potential="flat")
    rng = _cell_rng(cfg, 5, 1, 1)
    worst = _Worst()
    for _ in range(20):
        f = _poly(rng, eng.space, eng.trunc)
        g = _poly(rng, eng.space, eng.trunc)
        got = wick_star(f, g, eng)
        want = _nu_negate(antiwick_star(g, f))
        worst.take(got == want, got - want)
    yield "wick-oracle", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


def _nu_negate(f: Jet) -> Jet:
    terms = {
        (n, e): (c if n % 2 == 0 else -c) for (n, e), c in f.items_sorted()
    }
    return Jet(f.space, f.trunc, terms)


@_register(("dist-algebra",), "L:hideal")
def _chk_dist_ideal(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp2 = pair_space(1)
    rng = _cell_rng(cfg, 6, 1, 1)
    worst = _Worst()
    for _ in range(30):
        F = _random_bijet(rng, sp2, eng.trunc)
        H = h_part(F)
        G = _random_g_element(rng, sp2, eng.trunc)
        left = g_project(c_mul(G, H, eng))
        right = g_project(c_mul(H, G, eng))
        worst.take(left.is_zero, left)
        worst.take(right.is_zero, right)
        worst.take(lambda_of(H, eng).is_zero, "kernel defect")
    yield "dist-ideal", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("dist-algebra",), "L:gclos")
def _chk_g_closure(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp2 = pair_space(1)
    rng = _cell_rng(cfg, 7, 1, 1)
    worst = _Worst()
    for _ in range(10):
        F = _random_g_element(rng, sp2, eng.trunc)
        G = _random_g_element(rng, sp2, eng.trunc)
        prod = c_mul(F, G, eng)
        worst.take(prod == g_project(prod), h_part(prod))
    yield "dist-g-closure", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("dist-algebra",), "L:ctrace")
def _chk_trace_symmetry(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp2 = pair_space(1)
    rng = _cell_rng(cfg, 8, 1, 1)
    worst = _Worst()
    for _ in range(10):
        F = _random_bijet(rng, sp2, eng.trunc)
        G = _random_bijet(rng, sp2, eng.trunc)
        lhs = c_trace(c_mul(F, G, eng), eng)
        rhs = c_trace(c_mul(G, F, eng), eng)
        worst.take(lhs == rhs, lhs - rhs)
    yield "dist-trace-symmetry", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("dist-algebra", "lemmas"), "L:lsurj")
def _chk_lambda_rank(cfg: RunConfig):
    flat = build_engine(
        cfg, m=1, nu_max=min(cfg.nu_max, 3), potential="flat"
    )
    worst = _Worst()
    ok1, table1 = lambda_rank_report(flat, 3)
    worst.take(ok1, f"flat rank table {table1}")
    curved = build_engine(
        cfg,
        m=1,
        nu_max=min(cfg.nu_max, 3),
        potential=cfg.potential if cfg.potential != "flat" else "hyperbolic",
    )
    ok2, table2 = lambda_rank_report(curved, 2)
    worst.take(ok2, f"curved rank table {table2}")
    yield "lambda-rank", _rec(flat.trunc, _cert(flat), worst.residual, worst.ok)


@_register(("dist-algebra", "lemmas"), "L:lgamma")
def _chk_lambda_gamma(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    bmap = berezin_map(eng)
    binv = berezin_inverse(eng)
    rng = _cell_rng(cfg, 9, 1, 1)
    worst = _Worst()
    for _ in range(10):
        terms = {}
        for _ in range(rng.randint(1, 3)):
            e = (rng.randint(0, 2), rng.randint(0, 2))
            terms[(0, e)] = CRat(rng.randint(-2, 2))
        g = Jet(eng.space, eng.trunc, terms)
        lhs = lambda_of(gamma_map(g), eng)
        expect = {}
        for mu in multi_indices(2, eng.trunc.deg_max):
            val = bmap.apply(g * binv.image(mu)).eval0()
            if val.is_zero:
                continue
            inv = CRat(1) / CRat(mfact(mu))
            for r, c in val.terms.items():
                expect[(r, mu)] = c * inv
        want = PointDistribution(eng.space, eng.trunc, expect)
        worst.take(lhs == want, "column mismatch")
    yield "lambda-gamma", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("dist-algebra", "lemmas"), "L:isomalg")
def _chk_isomalg(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp2 = pair_space(1)
    rng = _cell_rng(cfg, 10, 1, 1)
    worst = _Worst()
    for _ in range(10):
        F = _random_bijet(rng, sp2, eng.trunc)
        lhs = n_trace(lambda_of(F, eng))
        rhs = c_trace(F, eng)
        worst.take(lhs == rhs, lhs - rhs)
    yield "isomalg", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


@_register(("oscillatory", "lemmas"), "L:compe")
def _chk_compose_exp(cfg: RunConfig):
    sp = VarSpace(1, 1)
    tr = cfg.trunc()
    rng = _cell_rng(cfg, 11, 1, 1)
    worst = _Worst()
    for _ in range(20):
        u = _random_natural_dist(rng, sp, tr)
        phi = _random_phase(rng, sp, tr)
        psi = _random_phase(rng, sp, tr)
        lhs = act_exp(act_exp(u, phi), psi)
        rhs = act_exp(u, phi + psi)
        worst.take(lhs == rhs, "composition defect")
    yield "compose-exp", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("oscillatory",), "L:repind")
def _chk_rep_independence(cfg: RunConfig):
    from .diffop import DiffOperator, dist_of_operator, dist_to_operator, op_compose
    from .kernel import exp_nu_nonneg
    from .oscact import conjugate_by_exp

    sp = VarSpace(1, 1)
    tr = cfg.trunc()
    z = Jet.monomial(sp, tr, 0, (1, 0), 1)
    zb2 = Jet.monomial(sp, tr, 0, (0, 2), 1)
    one = Jet.const(sp, tr, 1)
    rng = _cell_rng(cfg, 12, 1, 1)
    worst = _Worst()
    for _ in range(20):
        u = _random_natural_dist(rng, sp, tr)
        phi = _random_phase(rng, sp, tr)
        a = DiffOperator(sp, tr, {(1, (1, 0)): one + zb2})
        b = DiffOperator(sp, tr, {(2, (0, 1)): z - one * CRat(2)})
        spoiled = (
            dist_to_operator(u)
            + op_compose(DiffOperator.mult(z), a)
            + op_compose(DiffOperator.mult(zb2), b)
        )
        worst.take(dist_of_operator(spoiled) == u, "representative defect")
        factor = exp_nu_nonneg(phi.body.eval0())
        via = dist_of_operator(conjugate_by_exp(spoiled, phi)).scale_series(factor)
        worst.take(via == act_exp(u, phi), "conjugation defect")
    yield "rep-independence", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("oscillatory", "lemmas"), "L:vt")
def _chk_transpose_vanishing(cfg: RunConfig):
    sp = VarSpace(1, 1)
    tr = cfg.trunc()
    one = Jet.const(sp, tr, 1)
    z = Jet.monomial(sp, tr, 0, (1, 0), 1)
    zb2 = Jet.monomial(sp, tr, 0, (0, 2), 1)
    fields = (
        FieldJet.coordinate(sp, tr, 0),
        FieldJet.coordinate(sp, tr, 1),
        FieldJet(sp, tr, {0: z, 1: zb2}),
    )
    rng = _cell_rng(cfg, 13, 1, 1)
    worst = _Worst()
    for i in range(20):
        u = _random_natural_dist(rng, sp, tr)
        phi = _random_phase(rng, sp, tr)
        w = transpose_field(u, fields[i % len(fields)], phi)
        res = act_exp(w, phi).apply(one)
        worst.take(res.is_zero, res)
    yield "transpose-vanishing", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("foi",), "E:foi")
def _chk_foi_gaussian(cfg: RunConfig):
    tr = cfg.trunc()
    lam, phi, rho = gaussian_foi(1, tr)
    sp = lam.space
    z = Jet.monomial(sp, tr, 0, (1, 0), 1)
    fields = (
        FieldJet.coordinate(sp, tr, 0),
        FieldJet.coordinate(sp, tr, 1),
        FieldJet(sp, tr, {0: z}),
    )
    worst = _Worst()
    for v in fields:
        for e in multi_indices(2, 4):
            f = Jet.monomial(sp, tr, 0, e, 1)
            res = foi_residual(lam, phi, rho, v, f)
            worst.take(res.is_zero, res)
    yield "foi-gaussian", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("foi",), "L:pairing")
def _chk_gram(cfg: RunConfig):
    tr = cfg.trunc()
    lam, _phi, _rho = gaussian_foi(1, tr)
    worst = _Worst()
    report = pairing_gram(lam, 2)
    worst.take(
        report.verdict == "nondegenerate", f"gaussian verdict {report.verdict}"
    )
    bare = pairing_gram(PointDistribution.delta(VarSpace(1, 1), tr), 1)
    worst.take(bare.verdict == "degenerate", f"bare verdict {bare.verdict}")
    yield "gram-verdicts", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("structural",), "L:diagp")
def _chk_critical(cfg: RunConfig):
    tr = cfg.trunc(nu_max=min(cfg.nu_max, 3))
    worst = _Worst()
    for name in sorted(POTENTIALS):
        pot = POTENTIALS[name](1, tr)
        for l in range(1, min(cfg.l, 4) + 1):
            report = critical_check(pot, l)
            worst.take(report.ok, f"{name} l={l}: {report.witnesses}")
    yield "critical-points", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("structural",), "L:gauge")
def _chk_gauge(cfg: RunConfig):
    from .star import PotentialJet

    tr = cfg.trunc(nu_max=min(cfg.nu_max, 3))
    rng = _cell_rng(cfg, 14, 1, 1)
    worst = _Worst()
    pots = (potential_flat(1, tr), potential_hyperbolic(1, tr))
    for _ in range(10):
        pot = pots[rng.randrange(len(pots))]
        shift = _gauge_shift(rng, pot.space, tr)
        shifted = PotentialJet(pot.body + shift, pot.tail_degree, pot.name)
        for l in (2, 3):
            same = calabi_g(shifted, l).body == calabi_g(pot, l).body
            worst.take(same, f"{pot.name} l={l} drifts under gauge shift")
    yield "gauge-invariance", _rec(tr, tr.nu_max, worst.residual, worst.ok)


@_register(("structural",), "L:filtered")
def _chk_filtered(cfg: RunConfig):
    eng = build_engine(cfg, m=1, potential="flat")
    sp2 = pair_space(1)
    rng = _cell_rng(cfg, 15, 1, 1)
    worst = _Worst()
    for _ in range(50):
        F = _random_g_element(rng, sp2, eng.trunc)
        G = _random_g_element(rng, sp2, eng.trunc)
        prod = c_mul(F, G, eng)
        if F.is_zero or G.is_zero or prod.is_zero:
            continue
        bound = _g_filt(F) + _g_filt(G)
        got = _g_filt(prod)
        worst.take(got <= bound, f"filtration {got} above bound {bound}")
    yield "filtered-product", _rec(eng.trunc, _cert(eng), worst.residual, worst.ok)


def _g_filt(F: Jet) -> int:
    return max(2 * nu + sum(exps) for (nu, exps), _c in F.items_sorted())


# -- the runner


def run_suites(cfg: RunConfig, suites=("all",)):
    """Execute the selected suites; returns (report dict, exit code)."""
    cfg.validate()
    selected = set(suites)
    if "all" in selected:
        selected = set(SUITE_NAMES)
    unknown = selected - set(SUITE_NAMES)
    if unknown:
        raise ValueError(
            "unknown suite %s; choose from %s"
            % (", ".join(sorted(unknown)), ", ".join(SUITE_NAMES))
        )
    records = []
    for entry in REGISTRY:
        if not selected.intersection(entry.suites):
            continue
        gen = entry.fn(cfg)
        while True:
            t0 = time.perf_counter()
            try:
                name, rec = next(gen)
            except StopIteration:
                break
            except Exception as exc:
                rec = {
                    "nu_min": -cfg.nu_max,
                    "nu_max": cfg.nu_max,
                    "deg_max": cfg.deg_max,
                    "certified_nu": None,
                    "residual": f"error: {exc}",
                    "ok": False,
                }
                name = f"{entry.anchor.lower().replace(':', '-')}-error"
                rec.update(
                    name=name,
                    anchor=entry.anchor,
                    runtime=round(time.perf_counter() - t0, 6),
                )
                records.append(rec)
                break
            rec.update(
                name=name,
                anchor=entry.anchor,
                runtime=round(time.perf_counter() - t0, 6),
            )
            records.append(rec)
    records.sort(key=lambda r: r["name"])
    if not cfg.timings:
        for rec in records:
            del rec["runtime"]
    passed = sum(1 for r in records if r["ok"])
    report = {
        "schema": SCHEMA_VERSION,
        "config": {
            "potential": cfg.potential,
            "m": cfg.m,
            "l": cfg.l,
            "nu_max": cfg.nu_max,
            "deg_max": cfg.deg_max,
            "seed": cfg.seed,
            "mutate": cfg.mutate or "",
            "suites": sorted(selected),
        },
        "checks": records,
        "passed": passed,
        "failed": len(records) - passed,
    }
    return report, (0 if report["failed"] == 0 else 1)


def render_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


def clear_engine_cache():
    """Drop memoized engines; mutated and clean runs must not share them."""
    _ENGINES.clear()
