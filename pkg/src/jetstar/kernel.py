"""Exact truncated jet calculus over Gaussian rationals.

Values are formal Laurent series in a deformation parameter ``nu`` whose
coefficients are polynomial jets at the origin of C^m (or of an l-fold
product of copies of C^m).  Coefficients are exact complex rationals, so
every identity checked downstream is a statement about integers, never
about floating point.

Truncation contract: a :class:`TruncationSpec` fixes a nu-exponent window
``[nu_min, nu_max]`` and a total coordinate degree cap ``deg_max``.  Every
operation re-truncates its result to the ambient spec, so values never
carry stale out-of-window terms.

The standard filtration assigns degree 1 to each coordinate and degree 2
to nu.  ``filtration_degree`` computes it; the filtered-ring inequality
for products is a property test target, not an assumption baked in here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
import math
import re as _re


# ---------------------------------------------------------------------------
# scalars


class CRat:
    """A Gaussian rational, an exact element of Q(i).

    Immutable.  Arithmetic never leaves Q(i), division by zero raises.
    """

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", re if isinstance(re, Fraction) else Fraction(re))
        object.__setattr__(self, "im", im if isinstance(im, Fraction) else Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("CRat is immutable")

    def __add__(self, other):
        other = _crat(other)
        return CRat(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return CRat(-self.re, -self.im)

    def __sub__(self, other):
        other = _crat(other)
        return CRat(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return _crat(other) - self

    def __mul__(self, other):
        other = _crat(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        return CRat(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _crat(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        n = c * c + d * d
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(i)")
        return CRat((a * c + b * d) / n, (b * c - a * d) / n)

    def __rtruediv__(self, other):
        return _crat(other) / self

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, CRat):
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conjugate(self):
        return CRat(self.re, -self.im)

    def abs2(self):
        """|c|^2 as an exact nonnegative Fraction."""
        return self.re * self.re + self.im * self.im

    def __repr__(self):
        return f"CRat({self.re!r}, {self.im!r})"

    def __str__(self):
        return render_crat(self)


def _crat(x) -> CRat:
    if isinstance(x, CRat):
        return x
    if isinstance(x, (int, Fraction)):
        return CRat(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to CRat")


CR_ZERO = CRat(0)
CR_ONE = CRat(1)
CR_I = CRat(0, 1)


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def render_crat(c: CRat) -> str:
    """Canonical text for a scalar, `p/q` or `(p/q+r/s*i)`."""
    if c.im == 0:
        return _frac_str(c.re)
    sign = "-" if c.im < 0 else "+"
    return f"({_frac_str(c.re)}{sign}{_frac_str(abs(c.im))}*i)"


# ---------------------------------------------------------------------------
# nu-Laurent scalars


class NuSeries:
    """Truncated Laurent series in nu with CRat coefficients.

    ``nu_max`` is the certified top: stored coefficients at orders <= nu_max
    are exact, orders above are unknown and never stored.  ``nu_max`` may be
    None, meaning the series is exact at every order (a finite object whose
    high orders are genuinely zero).  Nothing is ever unknown below: the
    lowest stored exponent is the true valuation.
    """

    __slots__ = ("terms", "nu_min", "nu_max")

    def __init__(self, terms=None, nu_min=0, nu_max=None):
        clean = {}
        if terms:
            for k, c in terms.items():
                c = _crat(c)
                if c and (nu_max is None or k <= nu_max):
                    clean[k] = c
        object.__setattr__(self, "terms", clean)
        lo = min(clean) if clean else nu_min
        object.__setattr__(self, "nu_min", min(nu_min, lo))
        object.__setattr__(self, "nu_max", nu_max)

    def __setattr__(self, name, value):
        raise AttributeError("NuSeries is immutable")

    @staticmethod
    def const(c, nu_max=None) -> "NuSeries":
        return NuSeries({0: _crat(c)}, nu_max=nu_max)

    @staticmethod
    def nu(k=1, c=1, nu_max=None) -> "NuSeries":
        return NuSeries({k: _crat(c)}, nu_min=min(0, k), nu_max=nu_max)

    def coeff(self, k: int) -> CRat:
        return self.terms.get(k, CR_ZERO)

    def valuation(self):
        """Lowest nonzero order, or None for the zero series."""
        return min(self.terms) if self.terms else None

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def _cap(self, other) -> "NuSeries | None":
        a, b = self.nu_max, other.nu_max
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def __add__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = NuSeries.const(other)
        cap = self._cap(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, CR_ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return NuSeries(out, min(self.nu_min, other.nu_min), cap)

    __radd__ = __add__

    def __neg__(self):
        return NuSeries({k: -c for k, c in self.terms.items()}, self.nu_min, self.nu_max)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = NuSeries.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            c = _crat(other)
            if not c:
                return NuSeries({}, self.nu_min, None)
            return NuSeries({k: v * c for k, v in self.terms.items()}, self.nu_min, self.nu_max)
        if self.is_zero or other.is_zero:
            return NuSeries({}, min(self.nu_min, other.nu_min), None)
        va, vb = min(self.terms), min(other.terms)
        cap = None
        if self.nu_max is not None:
            cap = self.nu_max + vb
        if other.nu_max is not None:
            c2 = other.nu_max + va
            cap = c2 if cap is None else min(cap, c2)
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = k1 + k2
                if cap is not None and k > cap:
                    continue
                s = out.get(k, CR_ZERO) + c1 * c2
                if s:
                    out[k] = s
                else:
                    out.pop(k, None)
        return NuSeries(out, min(self.nu_min, other.nu_min), cap)

    __rmul__ = __mul__

    def shift(self, k: int) -> "NuSeries":
        return NuSeries(
            {j + k: c for j, c in self.terms.items()},
            self.nu_min + k,
            None if self.nu_max is None else self.nu_max + k,
        )

    def truncate(self, nu_max) -> "NuSeries":
        cap = nu_max if self.nu_max is None else min(self.nu_max, nu_max)
        return NuSeries(self.terms, self.nu_min, cap)

    def inverse(self) -> "NuSeries":
        """Laurent inversion, requires a nonzero lowest coefficient."""
        if self.is_zero:
            raise ZeroDivisionError("cannot invert the zero series")
        v = min(self.terms)
        lead = self.terms[v]
        # self = lead*nu^v * (1 + t) with val(t) >= 1
        t_terms = {k - v: c / lead for k, c in self.terms.items() if k != v}
        cap = None if self.nu_max is None else self.nu_max - v
        t = NuSeries(t_terms, 0, cap)
        acc = NuSeries.const(1, nu_max=cap)
        power = NuSeries.const(1, nu_max=cap)
        bound = (cap if cap is not None else 0) + 1
        for _ in range(max(bound, 1)):
            power = power * t * (-1)
            if power.is_zero:
                break
            acc = acc + power
        inv_cap = None if cap is None else cap - v
        return NuSeries({k - v: c / lead for k, c in acc.terms.items()}, min(0, -v), inv_cap)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            return self * (CR_ONE / _crat(other))
        return self * other.inverse()

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = NuSeries.const(other)
        if not isinstance(other, NuSeries):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items(), key=lambda kv: kv[0])))

    def items_sorted(self):
        return sorted(self.terms.items())

    def __repr__(self):
        return f"NuSeries({self.terms!r}, nu_max={self.nu_max!r})"

    def __str__(self):
        if self.is_zero:
            return "0"
        parts = []
        for k, c in self.items_sorted():
            if k == 0:
                parts.append(render_crat(c))
            else:
                head = "" if c == CR_ONE else render_crat(c) + "*"
                parts.append(f"{head}nu" + (f"^{k}" if k != 1 else ""))
        return " + ".join(parts)


def exp_nu_nonneg(a: NuSeries) -> NuSeries:
    """Formal exponential of a series with positive valuation.

    The constant term must vanish, otherwise the result would leave Q(i).
    Negative valuation is rejected outright.
    """
    v = a.valuation()
    if v is None:
        return NuSeries.const(1, nu_max=a.nu_max)
    if v < 0:
        raise ValueError(f"exp of a series with negative valuation nu^{v}")
    if v == 0:
        raise ValueError("exp needs a vanishing constant term for an exact result")
    cap = a.nu_max
    if cap is None:
        raise ValueError("exp of an uncapped series does not terminate")
    acc = NuSeries.const(1, nu_max=cap)
    power = NuSeries.const(1, nu_max=cap)
    k = 0
    limit = cap if cap is not None else 0
    while True:
        k += 1
        power = power * a * Fraction(1, k)
        if power.is_zero or (cap is not None and k > limit):
            break
        acc = acc + power
    return acc


# ---------------------------------------------------------------------------
# variable spaces and truncation


HOLO = 0
ANTI = 1


@dataclass(frozen=True)
class VarSpace:
    """Coordinates of an l-fold product of copies of C^m.

    Variables are ordered by (copy, kind, axis) with holomorphic before
    antiholomorphic, so indices 0..cdim-1 are z's of copy 0, the next cdim
    are zb's of copy 0, and so on.
    """

    copies: int
    cdim: int

    def __post_init__(self):
        if self.copies < 1 or self.cdim < 1:
            raise ValueError("VarSpace needs copies >= 1 and cdim >= 1")

    @property
    def n_vars(self) -> int:
        return 2 * self.copies * self.cdim

    def index(self, copy: int, kind: int, axis: int) -> int:
        if not (0 <= copy < self.copies and kind in (HOLO, ANTI) and 0 <= axis < self.cdim):
            raise IndexError("variable out of range")
        return copy * 2 * self.cdim + kind * self.cdim + axis

    def copy_of(self, i: int) -> int:
        return i // (2 * self.cdim)

    def kind_of(self, i: int) -> int:
        return (i % (2 * self.cdim)) // self.cdim

    def axis_of(self, i: int) -> int:
        return i % self.cdim

    def name(self, i: int) -> str:
        base = ("z" if self.kind_of(i) == HOLO else "zb") + str(self.axis_of(i) + 1)
        if self.copies > 1:
            base += f"_c{self.copy_of(i) + 1}"
        return base

    def names(self):
        return [self.name(i) for i in range(self.n_vars)]

    def holo_indices(self, copy: int = 0):
        return [self.index(copy, HOLO, a) for a in range(self.cdim)]

    def anti_indices(self, copy: int = 0):
        return [self.index(copy, ANTI, a) for a in range(self.cdim)]

    def zero_exps(self):
        return (0,) * self.n_vars


@dataclass(frozen=True)
class TruncationSpec:
    nu_min: int
    nu_max: int
    deg_max: int

    def __post_init__(self):
        if self.nu_min > self.nu_max:
            raise ValueError("nu_min must not exceed nu_max")
        if self.deg_max < 0:
            raise ValueError("deg_max must be nonnegative")

    def contains(self, nu: int, deg: int) -> bool:
        return self.nu_min <= nu <= self.nu_max and deg <= self.deg_max

    def widened(self, nu_min=None, nu_max=None, deg_max=None) -> "TruncationSpec":
        return TruncationSpec(
            self.nu_min if nu_min is None else min(self.nu_min, nu_min),
            self.nu_max if nu_max is None else max(self.nu_max, nu_max),
            self.deg_max if deg_max is None else max(self.deg_max, deg_max),
        )


# ---------------------------------------------------------------------------
# multi-index helpers shared by jets and operators


def madd(a, b):
    return tuple(x + y for x, y in zip(a, b))

def msub(a, b):
    """Componentwise difference, None when any entry would go negative."""
    out = []
    for x, y in zip(a, b):
        d = x - y
        if d < 0:
            return None
        out.append(d)
    return tuple(out)

def mtotal(a) -> int:
    return sum(a)

def mfact(a) -> int:
    out = 1
    for x in a:
        out *= math.factorial(x)
    return out

def mbinom(a, b) -> int:
    out = 1
    for x, y in zip(a, b):
        out *= math.comb(x, y)
    return out

def multi_indices_total(n: int, total: int):
    """Exponent tuples of length n with the given total, lexicographic."""
    if n == 0:
        if total == 0:
            yield ()
        return
    for head in range(total, -1, -1):
        for rest in multi_indices_total(n - 1, total - head):
            yield (head,) + rest


def multi_indices(n: int, max_total: int):
    """Exponent tuples of length n with total <= max_total, by total then lex."""
    for t in range(max_total + 1):
        yield from multi_indices_total(n, t)


def msubindices(gamma):
    """All multi-indices 0 <= delta <= gamma, in lexicographic order."""
    if not gamma:
        yield ()
        return
    head = gamma[0]
    for rest in msubindices(gamma[1:]):
        for k in range(head + 1):
            yield (k,) + rest


# ---------------------------------------------------------------------------
# jets


class Jet:
    """A truncated nu-Laurent series of polynomial jets at the origin.

    ``terms`` maps ``(nu_exponent, exps)`` to a CRat, where ``exps`` is the
    tuple of coordinate exponents in the space's variable order.  The
    constructor drops zeros and anything outside the truncation window, so
    a Jet is always in canonical form.

    Example:

        >>> sp = VarSpace(1, 1)
        >>> tr = TruncationSpec(-2, 4, 6)
        >>> z, zb = coord_jets(sp, tr)
        >>> print(render_jet(z * zb + nu_jet(sp, tr)))
        nu + z1*zb1
    """

    __slots__ = ("space", "trunc", "terms", "_key")

    def __init__(self, space: VarSpace, trunc: TruncationSpec, terms=None, strict=False):
        clean = {}
        if terms:
            for (nu, exps), c in terms.items():
                c = _crat(c)
                if not c:
                    continue
                if not trunc.contains(nu, sum(exps)):
                    if strict:
                        raise ValueError(
                            f"term nu^{nu}*deg{sum(exps)} violates the truncation window"
                        )
                    continue
                clean[(nu, exps)] = c
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "trunc", trunc)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("Jet is immutable")

    # -- constructors

    @staticmethod
    def zero(space, trunc) -> "Jet":
        return Jet(space, trunc)

    @staticmethod
    def const(space, trunc, c) -> "Jet":
        return Jet(space, trunc, {(0, space.zero_exps()): _crat(c)})

    @staticmethod
    def var(space, trunc, i: int, power: int = 1) -> "Jet":
        exps = [0] * space.n_vars
        exps[i] = power
        return Jet(space, trunc, {(0, tuple(exps)): CR_ONE})

    @staticmethod
    def nu(space, trunc, k: int = 1, c=1) -> "Jet":
        return Jet(space, trunc, {(k, space.zero_exps()): _crat(c)})

    @staticmethod
    def monomial(space, trunc, nu: int, exps, c=1) -> "Jet":
        return Jet(space, trunc, {(nu, tuple(exps)): _crat(c)})

    # -- inspection

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, nu: int, exps) -> CRat:
        return self.terms.get((nu, tuple(exps)), CR_ZERO)

    def items_sorted(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0])

    def nu_levels(self):
        return sorted({nu for (nu, _) in self.terms})

    def nu_part(self, r: int) -> "Jet":
        """The coordinate jet multiplying nu^r, returned at nu-level 0."""
        out = {(0, e): c for (nu, e), c in self.terms.items() if nu == r}
        return Jet(self.space, self.trunc, out)

    def max_coord_degree(self) -> int:
        return max((sum(e) for (_, e) in self.terms), default=0)

    def eval0(self) -> NuSeries:
        """Value at the base point, exact up to the ambient nu window."""
        zero = self.space.zero_exps()
        out = {}
        for (nu, e), c in self.terms.items():
            if e == zero:
                out[nu] = c
        return NuSeries(out, self.trunc.nu_min, self.trunc.nu_max)

    # -- arithmetic

    def _binop_space(self, other):
        if self.space != other.space:
            raise ValueError("jets live on different variable spaces")
        return self.trunc if self.trunc == other.trunc else TruncationSpec(
            min(self.trunc.nu_min, other.trunc.nu_min),
            min(self.trunc.nu_max, other.trunc.nu_max),
            min(self.trunc.deg_max, other.trunc.deg_max),
        )

    def __add__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = Jet.const(self.space, self.trunc, other)
        trunc = self._binop_space(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, CR_ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return Jet(self.space, trunc, out)

    __radd__ = __add__

    def __neg__(self):
        out = {k: -c for k, c in self.terms.items()}
        return Jet(self.space, self.trunc, out)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = Jet.const(self.space, self.trunc, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            c = _crat(other)
            if not c:
                return Jet(self.space, self.trunc)
            return Jet(self.space, self.trunc, {k: v * c for k, v in self.terms.items()})
        if isinstance(other, NuSeries):
            return self.mul_series(other)
        trunc = self._binop_space(other)
        nu_lo, nu_hi, deg_hi = trunc.nu_min, trunc.nu_max, trunc.deg_max
        out = {}
        for (n1, e1), c1 in self.terms.items():
            for (n2, e2), c2 in other.terms.items():
                n = n1 + n2
                if n < nu_lo or n > nu_hi:
                    continue
                e = madd(e1, e2)
                if sum(e) > deg_hi:
                    continue
                key = (n, e)
                s = out.get(key, CR_ZERO) + c1 * c2
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return Jet(self.space, trunc, out)

    __rmul__ = __mul__

    def mul_series(self, s: NuSeries) -> "Jet":
        out = {}
        tr = self.trunc
        for (n1, e), c1 in self.terms.items():
            for n2, c2 in s.terms.items():
                n = n1 + n2
                if n < tr.nu_min or n > tr.nu_max:
                    continue
                key = (n, e)
                v = out.get(key, CR_ZERO) + c1 * c2
                if v:
                    out[key] = v
                else:
                    out.pop(key, None)
        return Jet(self.space, tr, out)

    def shift_nu(self, k: int) -> "Jet":
        return Jet(self.space, self.trunc, {(n + k, e): c for (n, e), c in self.terms.items()})

    def retruncate(self, trunc: TruncationSpec) -> "Jet":
        return Jet(self.space, trunc, self.terms)

    def with_space(self, space: VarSpace) -> "Jet":
        """Reinterpret on a space with the same variable count."""
        if space.n_vars != self.space.n_vars:
            raise ValueError("variable counts differ")
        return Jet(space, self.trunc, self.terms)

    # -- comparison

    def _hash_key(self):
        k = self._key
        if k is None:
            k = (self.space, tuple(self.items_sorted()))
            object.__setattr__(self, "_key", k)
        return k

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, CRat)):
            other = Jet.const(self.space, self.trunc, other)
        if not isinstance(other, Jet):
            return NotImplemented
        return self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash(self._hash_key())

    def __repr__(self):
        return f"Jet<{render_jet(self)}>"


def coord_jets(space: VarSpace, trunc: TruncationSpec):
    """All coordinate jets in variable order."""
    return [Jet.var(space, trunc, i) for i in range(space.n_vars)]


def nu_jet(space, trunc, k: int = 1) -> Jet:
    return Jet.nu(space, trunc, k)


# ---------------------------------------------------------------------------
# jet operations


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_deriv(a: Jet, var: int, times: int = 1) -> Jet:
    """Coordinate derivative d^times / d x_var^times, exact."""
    if times < 0:
        raise ValueError("negative derivative order")
    terms = a.terms
    for _ in range(times):
        out = {}
        for (nu, e), c in terms.items():
            p = e[var]
            if p == 0:
                continue
            e2 = e[:var] + (p - 1,) + e[var + 1 :]
            key = (nu, e2)
            s = out.get(key, CR_ZERO) + c * p
            if s:
                out[key] = s
        terms = out
    return Jet(a.space, a.trunc, terms)


def jet_deriv_multi(a: Jet, gamma) -> Jet:
    out = a
    for i, t in enumerate(gamma):
        if t:
            out = jet_deriv(out, i, t)
    return out


def jet_substitute(a: Jet, target_space: VarSpace, plan: dict, trunc=None, kind_check=False) -> Jet:
    """Relabel or freeze variables.

    ``plan`` maps source variable indices to target indices, or to None to
    freeze that variable to 0.  Unmapped source variables must not occur in
    the jet.  With ``kind_check`` two sources of different kinds may not
    collide on one target.
    """
    trunc = trunc or a.trunc
    if kind_check:
        seen = {}
        for src, dst in plan.items():
            if dst is None:
                continue
            k = a.space.kind_of(src)
            if dst in seen and seen[dst] != k:
                raise ValueError(
                    f"substitution collides kinds on target {target_space.name(dst)}"
                )
            seen[dst] = k
    out = {}
    nz = target_space.n_vars
    for (nu, e), c in a.terms.items():
        tgt = [0] * nz
        dead = False
        for i, p in enumerate(e):
            if p == 0:
                continue
            if i not in plan:
                raise ValueError(f"variable {a.space.name(i)} has no substitution target")
            dst = plan[i]
            if dst is None:
                dead = True
                break
            tgt[dst] += p
        if dead:
            continue
        key = (nu, tuple(tgt))
        s = out.get(key, CR_ZERO) + c
        if s:
            out[key] = s
        else:
            out.pop(key, None)
    return Jet(target_space, trunc, out)


def filtration_degree(a):
    """min over terms of coordinate degree + 2 * nu exponent; None if zero."""
    if isinstance(a, NuSeries):
        if a.is_zero:
            return None
        return min(2 * k for k in a.terms)
    if a.is_zero:
        return None
    return min(sum(e) + 2 * nu for (nu, e) in a.terms)


def jet_inverse(a: Jet) -> Jet:
    """Multiplicative inverse via a finite geometric series.

    Requires an invertible scalar part: the (nu^0, degree 0) coefficient
    must be the only filtration-0-or-lower content, everything else must
    have positive filtration so the series terminates inside the window.
    """
    inv = invert_jet_matrix([[a]])
    return inv[0][0]


def invert_jet_matrix(mat) -> list:
    """Exact inverse of a square jet matrix with invertible constant part.

    The constant matrix is inverted by Gauss-Jordan over Q(i); the rest is
    a finite Neumann series, which terminates because the remainder has
    strictly positive filtration degree inside a finite window.
    """
    n = len(mat)
    if n == 0 or any(len(row) != n for row in mat):
        raise ValueError("matrix must be square")
    space = mat[0][0].space
    trunc = mat[0][0].trunc
    zero_e = space.zero_exps()

    # constant part and its exact inverse
    aug = []
    for i in range(n):
        row = [mat[i][j].coeff(0, zero_e) for j in range(n)]
        row += [CR_ONE if i == j else CR_ZERO for j in range(n)]
        aug.append(row)
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col]:
                piv = r
                break
        if piv is None:
            raise ValueError("constant part of the jet matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = CR_ONE / aug[col][col]
        aug[col] = [x * inv_p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    m0inv = [[aug[i][n + j] for j in range(n)] for i in range(n)]

    const_jets = [[Jet.const(space, trunc, m0inv[i][j]) for j in range(n)] for i in range(n)]

    def matmul(A, B):
        return [
            [sum((A[i][k] * B[k][j] for k in range(n)), Jet.zero(space, trunc)) for j in range(n)]
            for i in range(n)
        ]

    # R = M0^-1 * (M - M0); filtration_degree(R) >= 1
    delta = [
        [mat[i][j] - Jet.const(space, trunc, mat[i][j].coeff(0, zero_e)) for j in range(n)]
        for i in range(n)
    ]
    R = matmul(const_jets, delta)
    for row in R:
        for x in row:
            fd = filtration_degree(x)
            if fd is not None and fd < 1:
                raise ValueError("matrix is not invertible within the window: "
                                 "nonconstant part has nonpositive filtration")

    acc = [[Jet.const(space, trunc, CR_ONE if i == j else CR_ZERO) for j in range(n)] for i in range(n)]
    power = acc
    bound = trunc.deg_max + 2 * (trunc.nu_max - min(trunc.nu_min, 0)) + 2
    for _ in range(bound):
        power = matmul(power, R)
        power = [[-x for x in row] for row in power]
        if all(x.is_zero for row in power for x in row):
            break
        acc = [[acc[i][j] + power[i][j] for j in range(n)] for i in range(n)]
    return matmul(acc, const_jets)


# ---------------------------------------------------------------------------
# text format

_TOKEN = _re.compile(r"\s*(\d+|[a-z][a-z0-9_]*|\^|\*|\+|\-|\(|\)|/)")


def render_jet(a: Jet) -> str:
    """Canonical literal, round-trips bit-exactly through parse_jet."""
    if a.is_zero:
        return "0"
    space = a.space
    parts = []
    first = True
    for (nu, exps), c in a.items_sorted():
        factors = []
        if nu:
            factors.append("nu" + (f"^{nu}" if nu != 1 else ""))
        for i, p in enumerate(exps):
            if p:
                factors.append(space.name(i) + (f"^{p}" if p != 1 else ""))
        neg = c.im == 0 and c.re < 0
        cc = -c if neg else c
        if not factors or cc != CR_ONE:
            factors.insert(0, render_crat(cc))
        body = "*".join(factors)
        if first:
            parts.append(("-" if neg else "") + body)
            first = False
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts)


class _Parser:
    def __init__(self, text, space, trunc, strict):
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip() == "":
                    break
                raise ValueError(f"bad character in jet literal at {text[pos:pos+8]!r}")
            self.toks.append(m.group(1))
            pos = m.end()
        self.i = 0
        self.space = space
        self.trunc = trunc
        self.strict = strict

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self):
        t = self.peek()
        self.i += 1
        return t

    def parse(self) -> Jet:
        out = self.sum()
        if self.peek() is not None:
            raise ValueError(f"trailing tokens in jet literal near {self.peek()!r}")
        return out

    def sum(self) -> Jet:
        sign = 1
        t = self.peek()
        if t in ("+", "-"):
            self.next()
            sign = -1 if t == "-" else 1
        acc = self.product() * sign
        while self.peek() in ("+", "-"):
            op = self.next()
            nxt = self.product()
            acc = acc - nxt if op == "-" else acc + nxt
        return acc

    def product(self) -> Jet:
        acc = self.atom()
        while True:
            t = self.peek()
            if t == "*":
                self.next()
                acc = acc * self.atom()
            elif t is not None and (t[0].isdigit() or t[0].isalpha() or t == "("):
                acc = acc * self.atom()
            else:
                return acc

    def _int(self) -> int:
        neg = False
        if self.peek() == "-":
            self.next()
            neg = True
        t = self.next()
        if t is None or not t.isdigit():
            raise ValueError("expected an integer in jet literal")
        return -int(t) if neg else int(t)

    def atom(self) -> Jet:
        t = self.peek()
        if t is None:
            raise ValueError("unexpected end of jet literal")
        if t == "(":
            self.next()
            inner = self.sum()
            if self.next() != ")":
                raise ValueError("unbalanced parenthesis in jet literal")
            return inner
        if t.isdigit():
            self.next()
            num = int(t)
            if self.peek() == "/":
                self.next()
                den = self._int()
                val = Fraction(num, den)
            else:
                val = Fraction(num)
            return Jet.const(self.space, self.trunc, val)
        self.next()
        if t == "i":
            return Jet.const(self.space, self.trunc, CR_I)
        power = 1
        if self.peek() == "^":
            self.next()
            power = self._int()
        if t == "nu":
            return Jet.nu(self.space, self.trunc, power)
        names = self.space.names()
        if t not in names:
            raise ValueError(f"unknown variable {t!r} for this space")
        idx = names.index(t)
        if power < 0:
            raise ValueError("coordinate variables cannot carry negative powers")
        return Jet.var(self.space, self.trunc, idx, power)


def parse_jet(text: str, space: VarSpace, trunc: TruncationSpec, strict: bool = True) -> Jet:
    """Parse the jet literal format.

    With ``strict`` a literal whose exact value has terms outside the
    truncation window is rejected instead of silently re-truncated.
    """
    wide = TruncationSpec(
        min(trunc.nu_min, -64), max(trunc.nu_max, 64), max(trunc.deg_max, 128)
    )
    got = _Parser(text, space, wide, strict).parse()
    if strict:
        for (nu, e), _ in got.terms.items():
            if not trunc.contains(nu, sum(e)):
                raise ValueError(
                    f"literal term nu^{nu} deg {sum(e)} is outside the truncation window"
                )
    return got.retruncate(trunc)
