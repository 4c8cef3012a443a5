"""Exact arithmetic foundation: polynomials and rational functions over a field.

Conventions used throughout:

* Rationals are ``fractions.Fraction`` (always reduced, denominator > 0).
* A polynomial is a dense ascending coefficient tuple; ``Poly((1, 0, 2))``
  is 1 + 2*x^2 and the zero polynomial is the empty tuple (degree -1).
  Coefficients may be Fractions or any field-like objects supporting
  +, -, *, /, == and truth testing (the tower layers reuse Poly with
  their own element type as coefficients).
* A rational function ``RatFunc`` keeps numerator and denominator coprime
  with a *monic* denominator, so equality is structural comparison.

The factorization helpers at the bottom split denominators into monic
"atoms".  Atoms are true irreducibles for everything built from linear
and quadratic factors (the only shapes the summation pipeline produces);
what cannot be split honestly is kept whole as a conservative atom rather
than guessed at.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

__all__ = [
    "Fraction",
    "Poly",
    "RatFunc",
    "ZeroDenominator",
    "ZeroPolynomial",
    "poly_gcd",
    "poly_lcm",
    "ratfunc_normalize",
    "nonneg_integer_roots",
    "rational_roots",
    "squarefree_decomposition",
    "factor_atoms",
    "partial_fraction_atoms",
    "shift_class",
    "equal_degree_shift",
    "nullspace",
]


class ZeroDenominator(ZeroDivisionError):
    """Denominator of a rational function is the zero polynomial."""


class ZeroPolynomial(ValueError):
    """An operation that needs a nonzero polynomial received zero."""


def _is_zero(c) -> bool:
    return not c


class Poly:
    """Dense univariate polynomial with field coefficients.

    >>> p = Poly((Fraction(1), Fraction(0), Fraction(2)))
    >>> p.degree
    2
    >>> p.eval_at(Fraction(3))
    Fraction(19, 1)
    >>> str(Poly.from_ints(-1, 0, 1))
    'x^2 - 1'
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        cs = list(coeffs)
        while cs and _is_zero(cs[-1]):
            cs.pop()
        self.coeffs = tuple(cs)

    @staticmethod
    def from_ints(*cs) -> "Poly":
        """Ascending integer coefficients as Fractions: from_ints(c0, c1, ...)."""
        return Poly(tuple(Fraction(c) for c in cs))

    @staticmethod
    def constant(c) -> "Poly":
        return Poly((c,))

    @staticmethod
    def x_power(k: int, one=Fraction(1)) -> "Poly":
        return Poly((one * 0,) * k + (one,))

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_one(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 1

    def lc(self):
        """Leading coefficient; raises on the zero polynomial."""
        if not self.coeffs:
            raise ZeroPolynomial("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def coeff(self, i: int):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else Fraction(0)

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(("Poly", self.coeffs))

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        cs = list(a)
        for i, c in enumerate(b):
            cs[i] = cs[i] + c
        return Poly(cs)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __neg__(self) -> "Poly":
        return Poly(tuple(-c for c in self.coeffs))

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.coeffs or not other.coeffs:
            return Poly(())
        out = [self.coeffs[0] * 0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if _is_zero(a):
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return Poly(out)

    def scale(self, c) -> "Poly":
        if _is_zero(c):
            return Poly(())
        return Poly(tuple(a * c for a in self.coeffs))

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative polynomial power")
        result = None
        base = self
        while True:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if not n:
                break
            base = base * base
        if result is None:
            return Poly((self.lc() / self.lc(),)) if self.coeffs else Poly.from_ints(1)
        return result

    def __divmod__(self, other: "Poly"):
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0:
            return Poly(()), self
        inv_lc = other.lc()
        quo = [None] * (dq + 1)
        for k in range(dq, -1, -1):
            c = rem[k + other.degree] / inv_lc
            quo[k] = c
            if not _is_zero(c):
                for i, oc in enumerate(other.coeffs):
                    rem[k + i] = rem[k + i] - c * oc
        zero = inv_lc * 0
        return Poly([zero if q is None else q for q in quo]), Poly(rem[: other.degree])

    def __floordiv__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Poly") -> "Poly":
        return divmod(self, other)[1]

    def exact_div(self, other: "Poly") -> "Poly":
        q, r = divmod(self, other)
        if not r.is_zero():
            raise ValueError("exact_div: division left a remainder")
        return q

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        lc = self.lc()
        if lc == 1:
            return self
        return Poly(tuple(c / lc for c in self.coeffs))

    def derivative(self) -> "Poly":
        return Poly(tuple(c * i for i, c in enumerate(self.coeffs) if i))

    # -- substitution ------------------------------------------------------

    def eval_at(self, v):
        """Horner evaluation; v may be any ring element compatible with
        the coefficients (a Fraction, a RatFunc, a tower element...)."""
        if not self.coeffs:
            return v * 0
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * v + c
        return acc

    def compose(self, inner: "Poly") -> "Poly":
        """self(inner(x)) by Horner."""
        acc = Poly(())
        for c in reversed(self.coeffs):
            acc = acc * inner + Poly((c,))
        return acc

    def shift(self, j) -> "Poly":
        """p(x + j) for a Fraction/integer j."""
        if not j or self.degree < 1:
            return self
        one = self.lc() / self.lc()
        return self.compose(Poly((one * j, one)))

    # -- printing ----------------------------------------------------------

    def to_str(self, var: str = "x") -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[i]
            if _is_zero(c):
                continue
            if i == 0:
                term = _coeff_str(c)
            else:
                xpow = var if i == 1 else f"{var}^{i}"
                if c == 1:
                    term = xpow
                elif c == -1:
                    term = "-" + xpow
                else:
                    term = f"{_coeff_str(c)}*{xpow}"
            if not parts:
                parts.append(term)
            elif term.startswith("-"):
                parts.append(" - " + term[1:])
            else:
                parts.append(" + " + term)
        return "".join(parts)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"Poly('{self.to_str()}')"


def _coeff_str(c) -> str:
    s = str(c)
    if "/" in s or " " in s:
        num, _, den = s.partition("/")
        if " " in num or "(" in s:
            return f"({s})"
        return s
    return s


def poly_gcd(p: Poly, q: Poly) -> Poly:
    """Monic greatest common divisor via Euclid; gcd(0, 0) = 0."""
    a, b = p, q
    while not b.is_zero():
        # keeping remainders monic tames coefficient growth over Q
        a, b = b, (a % b).monic()
    return a.monic()


def poly_lcm(p: Poly, q: Poly) -> Poly:
    if p.is_zero() or q.is_zero():
        return Poly(())
    g = poly_gcd(p, q)
    return (p * q).exact_div(g).monic()


class RatFunc:
    """Reduced rational function num/den with monic den.

    >>> f = RatFunc(Poly.from_ints(2, 2), Poly.from_ints(-2, 0, 2))
    >>> str(f)
    '1/(x - 1)'
    >>> f + RatFunc.from_const(Fraction(1))
    RatFunc('x/(x - 1)')
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly = None, _normalized: bool = False):
        if den is None:
            den = Poly((num.lc() / num.lc(),)) if num else Poly.from_ints(1)
        if _normalized:
            self.num, self.den = num, den
            return
        if den.is_zero():
            raise ZeroDenominator("rational function with zero denominator")
        if num.is_zero():
            self.num = Poly(())
            self.den = Poly((den.lc() / den.lc(),))
            return
        g = poly_gcd(num, den)
        if g.degree > 0:
            num = num.exact_div(g)
            den = den.exact_div(g)
        lc = den.lc()
        if lc != 1:
            num = Poly(tuple(c / lc for c in num.coeffs))
            den = den.monic()
        self.num, self.den = num, den

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_const(c) -> "RatFunc":
        return RatFunc(Poly((c,)) if c else Poly(()), Poly((Fraction(1),)), _normalized=True)

    @staticmethod
    def from_poly(p: Poly) -> "RatFunc":
        return RatFunc(p, Poly((Fraction(1),)), _normalized=True)

    X = None  # set after class definition

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_constant(self) -> bool:
        return self.num.degree <= 0 and self.den.is_one()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return self.num.coeff(0) if self.num else Fraction(0)

    def __bool__(self):
        return not self.num.is_zero()

    def __eq__(self, other):
        if isinstance(other, RatFunc):
            return self.num == other.num and self.den == other.den
        if isinstance(other, (int, Fraction)):
            return self == RatFunc.from_const(Fraction(other))
        return NotImplemented

    def __hash__(self):
        return hash(("RatFunc", self.num.coeffs, self.den.coeffs))

    # -- field operations --------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, RatFunc):
            return other
        if isinstance(other, (int, Fraction)):
            return RatFunc.from_const(Fraction(other))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RatFunc(self.num * o.den - o.num * self.den, self.den * o.den)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return RatFunc(-self.num, self.den, _normalized=True)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RatFunc(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o.is_zero():
            raise ZeroDivisionError("division by zero rational function")
        return RatFunc(self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def inverse(self) -> "RatFunc":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RatFunc(self.den, self.num)

    def __pow__(self, n: int) -> "RatFunc":
        if n < 0:
            return self.inverse() ** (-n)
        return RatFunc(self.num**n, self.den**n)

    # -- substitution & misc ----------------------------------------------

    def shift(self, j) -> "RatFunc":
        """f(x + j)."""
        if not j:
            return self
        return RatFunc(self.num.shift(j), self.den.shift(j))

    def eval_at(self, v: Fraction):
        """Exact value at v, or None if v is a pole."""
        d = self.den.eval_at(v)
        if d == 0:
            return None
        return self.num.eval_at(v) / d

    def poly_part(self) -> Poly:
        """Quotient of num by den (the polynomial component)."""
        return self.num // self.den

    def to_str(self, var: str = "x") -> str:
        num, den = self.num, self.den
        if den.is_one():
            return num.to_str(var)
        ns = num.to_str(var)
        ds = den.to_str(var)
        if sum(1 for c in num.coeffs if c) > 1:
            ns = f"({ns})"
        if den.degree > 0:
            ds = f"({ds})"
        return f"{ns}/{ds}"

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"RatFunc('{self.to_str()}')"


RatFunc.X = RatFunc.from_poly(Poly.from_ints(0, 1))


def ratfunc_normalize(num: Poly, den: Poly) -> RatFunc:
    """Coprime pair with monic denominator representing num/den."""
    if den.is_zero():
        raise ZeroDenominator("zero denominator")
    return RatFunc(num, den)


# ---------------------------------------------------------------------------
# Root finding and factorization over Q
# ---------------------------------------------------------------------------

_DIVISOR_LIMIT = 10**12
_TRIAL_LIMIT = 10**6


def _to_int_coeffs(p: Poly) -> list:
    """Scale a Fraction-coefficient poly to primitive integer coefficients."""
    den_lcm = 1
    for c in p.coeffs:
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    ints = [int(c * den_lcm) for c in p.coeffs]
    g = 0
    for c in ints:
        g = math.gcd(g, c)
    if g > 1:
        ints = [c // g for c in ints]
    return ints


def _divisors(n: int):
    """All positive divisors of n by trial division, or None if n is too
    hard to factor within the limits (callers must degrade gracefully)."""
    n = abs(n)
    if n == 0:
        return None
    if n > _DIVISOR_LIMIT:
        return None
    factors = {}
    m = n
    d = 2
    while d * d <= m and d <= _TRIAL_LIMIT:
        while m % d == 0:
            factors[d] = factors.get(d, 0) + 1
            m //= d
        d += 1 if d == 2 else 2
    if m > 1:
        if d * d <= m:
            # trial division hit the limit with m still composite-sized;
            # a wrong "prime" here would silently drop divisors
            return None
        factors[m] = factors.get(m, 0) + 1
    divs = [1]
    for prime, mult in factors.items():
        divs = [d * prime**k for d in divs for k in range(mult + 1)]
    return sorted(set(divs))


def nonneg_integer_roots(p: Poly) -> set:
    """Exactly the natural numbers n with p(n) = 0.

    >>> sorted(nonneg_integer_roots(Poly.from_ints(-3, 1)))
    [3]
    >>> nonneg_integer_roots(Poly.from_ints(1, 0, 1))
    set()
    """
    if p.is_zero():
        raise ZeroPolynomial("nonneg_integer_roots of the zero polynomial")
    if p.degree == 0:
        return set()
    ints = _to_int_coeffs(p)
    roots = set()
    low = 0
    while low < len(ints) and ints[low] == 0:
        low += 1
    if low:
        roots.add(0)
        ints = ints[low:]
    if len(ints) <= 1:
        return roots
    a0 = ints[0]
    divs = _divisors(a0)
    if divs is not None:
        candidates = divs
    else:
        # fall back to a direct scan under the Cauchy bound
        bound = 1 + max(abs(c) for c in ints[:-1]) // abs(ints[-1])
        if bound > _TRIAL_LIMIT:
            raise ArithmeticError("integer-root search out of range")
        candidates = range(1, bound + 1)
    for r in candidates:
        acc = 0
        for c in reversed(ints):
            acc = acc * r + c
        if acc == 0:
            roots.add(r)
    return roots


def rational_roots(p: Poly) -> list:
    """Rational roots with multiplicities, best effort (complete for the
    coefficient sizes this pipeline produces).  Returns [(root, mult), ...]
    sorted by root."""
    if p.is_zero():
        raise ZeroPolynomial("rational_roots of the zero polynomial")
    ints = _to_int_coeffs(p)
    found = {}
    low = 0
    while low < len(ints) and ints[low] == 0:
        low += 1
    if low:
        found[Fraction(0)] = low
        ints = ints[low:]
    if len(ints) > 1:
        nds = _divisors(ints[0])
        dds = _divisors(ints[-1])
        if nds is not None and dds is not None:
            cands = set()
            for a in nds:
                for b in dds:
                    cands.add(Fraction(a, b))
                    cands.add(Fraction(-a, b))
            work = Poly(tuple(Fraction(c) for c in ints))
            for r in sorted(cands):
                mult = 0
                while work.degree >= 1 and work.eval_at(r) == 0:
                    work = work.exact_div(Poly((-r, Fraction(1))))
                    mult += 1
                if mult:
                    found[r] = found.get(r, 0) + mult
    return sorted(found.items())


def squarefree_decomposition(p: Poly) -> list:
    """Yun's algorithm: [(monic squarefree factor, multiplicity), ...] with
    p = lc * prod(f^m); multiplicities strictly increasing."""
    if p.is_zero():
        raise ZeroPolynomial("squarefree decomposition of zero")
    p = p.monic()
    if p.degree < 1:
        return []
    d = p.derivative()
    a = poly_gcd(p, d)
    if a.degree == 0:
        return [(p, 1)]
    out = []
    b = p.exact_div(a)
    c = d.exact_div(a)
    i = 1
    while True:
        diff = c - b.derivative()
        if diff.is_zero():
            if b.degree > 0:
                out.append((b.monic(), i))
            break
        g = poly_gcd(b, diff)
        if g.degree > 0:
            out.append((g.monic(), i))
        b = b.exact_div(g)
        c = diff.exact_div(g)
        i += 1
        if b.degree == 0:
            break
    return out


_SHIFT_GCD_WINDOW = 36


def _split_quadratic(q: Poly):
    """Monic quadratic -> [two monic linear factors] if the discriminant is
    a rational square, else None."""
    b, c = q.coeff(1), q.coeff(0)
    disc = b * b - 4 * c
    if disc < 0:
        return None
    num, den = disc.numerator, disc.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return None
    s = Fraction(rn, rd)
    r1, r2 = (-b + s) / 2, (-b - s) / 2
    return [Poly((-r1, Fraction(1))), Poly((-r2, Fraction(1)))]


def _refine_by_shift_gcd(factors: list) -> list:
    """Split composite factors that share irreducible parts with an integer
    shift of themselves or of another factor (u(x)*u(x+j) style products,
    which plain root-finding cannot separate)."""
    work = list(factors)
    changed = True
    while changed:
        changed = False
        for a, b in itertools.product(list(work), repeat=2):
            if a.degree < 2 and b.degree < 2:
                continue
            if a not in work or b not in work:
                continue
            for j in range(0 if a is not b else 1, _SHIFT_GCD_WINDOW + 1):
                g = poly_gcd(a, b.shift(j))
                if 0 < g.degree < a.degree:
                    work.remove(a)
                    work.extend([g.monic(), a.exact_div(g).monic()])
                    changed = True
                    break
            if changed:
                break
    return work


def factor_atoms(p: Poly) -> list:
    """Factor a Fraction-coefficient polynomial into monic atoms.

    Returns [(atom, multiplicity), ...] in a deterministic order (degree,
    then coefficient tuple).  Linear and shift-related factors are always
    separated; anything irreducible-or-unbreakable stays whole.
    """
    if p.is_zero():
        raise ZeroPolynomial("factor_atoms of zero")
    atoms = {}
    for sf, mult in squarefree_decomposition(p):
        parts = []
        rest = sf
        for root, rmult in rational_roots(sf):
            lin = Poly((-root, Fraction(1)))
            for _ in range(rmult):
                rest = rest.exact_div(lin)
                parts.append(lin)
        work = [rest.monic()] if rest.degree > 0 else []
        split = []
        while work:
            f = work.pop()
            if f.degree == 2:
                halves = _split_quadratic(f)
                if halves:
                    split.extend(halves)
                    continue
            split.append(f)
        split = _refine_by_shift_gcd(split)
        parts.extend(split)
        for atom in parts:
            key = atom.coeffs
            atoms[key] = atoms.get(key, 0) + mult
    out = [(Poly(k), m) for k, m in atoms.items()]
    out.sort(key=lambda am: (am[0].degree, am[0].coeffs))
    return out


def partial_fraction_atoms(f: RatFunc) -> list:
    """Denominator atoms of f with multiplicities; [] for polynomials."""
    if f.den.is_one():
        return []
    return factor_atoms(f.den)


def shift_class(atom: Poly):
    """Canonical shift-class representative of a monic atom.

    Returns (rep, k) with atom(x) == rep(x + k); rep is the translate whose
    subleading coefficient lies in [0, degree).

    >>> rep, k = shift_class(Poly.from_ints(1, 1))   # x + 1
    >>> (str(rep), k)
    ('x', 1)
    >>> rep, k = shift_class(Poly((Fraction(-1, 2), Fraction(1))))  # x - 1/2
    >>> (str(rep), k)
    ('x + 1/2', -1)
    """
    d = atom.degree
    if d < 1:
        raise ZeroPolynomial("shift_class needs degree >= 1")
    s = atom.coeff(d - 1)
    j = -math.floor(s / d)
    return atom.shift(j), -j


def equal_degree_shift(p: Poly, q: Poly):
    """The unique integer j with q(x) == p(x + j), or None.

    Both must be monic of equal degree >= 1; the candidate falls out of the
    subleading coefficients, then is verified exactly.
    """
    d = p.degree
    if d != q.degree or d < 1:
        return None
    diff = q.coeff(d - 1) - p.coeff(d - 1)
    j = diff / d
    if j.denominator != 1:
        return None
    j = int(j)
    return j if p.shift(j) == q else None


# ---------------------------------------------------------------------------
# Exact linear algebra
# ---------------------------------------------------------------------------


def nullspace(rows: list, ncols: int) -> list:
    """Basis of the right nullspace of a matrix over a field.

    ``rows`` is a list of length-ncols lists of field elements (Fractions
    or anything with field arithmetic).  Basis vectors come back in the
    canonical reduced-echelon order, one per free column, so callers get a
    deterministic result.
    """
    mat = [list(r) for r in rows if any(not _is_zero(c) for c in r)]
    pivots = []
    r = 0
    for col in range(ncols):
        piv = None
        for i in range(r, len(mat)):
            if not _is_zero(mat[i][col]):
                piv = i
                break
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = mat[r][col]
        mat[r] = [c / inv for c in mat[r]]
        for i in range(len(mat)):
            if i != r and not _is_zero(mat[i][col]):
                factor = mat[i][col]
                mat[i] = [a - factor * b for a, b in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    pivot_set = set(pivots)
    free = [c for c in range(ncols) if c not in pivot_set]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for row_i, pc in enumerate(pivots):
            vec[pc] = -mat[row_i][fc]
        basis.append(vec)
    return basis
