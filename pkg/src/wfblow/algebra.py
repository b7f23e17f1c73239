"""Exact multivariate rational functions over named coordinates.

Coordinates are the integers ``0 .. MAX_COORD`` (written ``p0, p1, ...``);
single lowercase letters other than ``p`` are symbolic parameters such as the
vertex value ``c``.  Parameters are constants for the differential operators
but stay symbolic when residuals are certified.

Polynomial arithmetic is delegated to FLINT (``fmpq_mpoly``).  A rational
function keeps its denominator as a product of monic irreducible factors, so
sums only need the structural least common multiple of two factor lists and
cancellation is a sequence of exact divisions.  Zero certification is a test of
the numerator.
"""

from __future__ import annotations

import math
import re
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import flint
import numpy as np

MAX_COORD = 31
_PARAM_BASE = MAX_COORD + 1
_NAMES = tuple(f"p{i}" for i in range(_PARAM_BASE)) + tuple(
    chr(ord("a") + i) for i in range(26))
NVARS = len(_NAMES)
CTX = flint.fmpq_mpoly_ctx.get(_NAMES, "lex")
_GENS = CTX.gens()
_ONE = CTX.from_dict({(0,) * NVARS: 1})
_ZERO = CTX.from_dict({})

EPS_DEN = 1e-10

Poly = flint.fmpq_mpoly
Number = Union[int, flint.fmpq]


class AlgebraError(ValueError):
    """Raised for ill-formed algebraic operations (e.g. zero denominators)."""


class PoleError(ArithmeticError):
    """Raised when a rational function is evaluated too close to a pole."""

    def __init__(self, message, stratum=None):
        super().__init__(message)
        self.stratum = stratum


def var_slot(name) -> int:
    """Map a coordinate index, ``"p3"`` or a parameter letter to its variable slot."""
    if isinstance(name, str):
        if len(name) == 1 and name.isalpha() and name.islower() and name != "p":
            return _PARAM_BASE + ord(name) - ord("a")
        m = re.fullmatch(r"p(\d+)", name)
        if not m:
            raise AlgebraError(f"unknown variable name {name!r}")
        name = int(m.group(1))
    if not 0 <= name <= MAX_COORD:
        raise AlgebraError(f"coordinate index {name} outside 0..{MAX_COORD}")
    return int(name)


def slot_name(slot: int) -> str:
    return _NAMES[slot]


def is_coordinate(slot: int) -> bool:
    return slot < _PARAM_BASE


def to_fmpq(c) -> flint.fmpq:
    if isinstance(c, flint.fmpq):
        return c
    if isinstance(c, float):
        from fractions import Fraction
        fr = Fraction(c)
        return flint.fmpq(fr.numerator, fr.denominator)
    if hasattr(c, "numerator") and hasattr(c, "denominator"):
        return flint.fmpq(int(c.numerator), int(c.denominator))
    return flint.fmpq(int(c))


def _const_poly(c) -> Poly:
    c = to_fmpq(c)
    return _ONE * c if c else _ZERO


def _poly_vars(p: Poly) -> frozenset:
    if p.is_constant():
        return frozenset()
    degs = p.degrees()
    return frozenset(i for i, d in enumerate(degs) if d)


def _key(p: Poly) -> str:
    return str(p)


_FACTOR_CACHE: Dict[str, tuple] = {}


def _factor(p: Poly):
    """Return (scalar, {key: (factor, exponent)}) with monic irreducible factors."""
    if p.is_zero():
        raise AlgebraError("zero denominator")
    if p.is_constant():
        return p.leading_coefficient(), {}
    if len(p) == 1:
        (m,), (c,) = p.monoms(), p.coeffs()
        return c, {_NAMES[s]: (_GENS[s], e) for s, e in enumerate(m) if e}
    if p.total_degree() == 1:
        lc = p.leading_coefficient()
        f = p / lc if lc != 1 else p
        return lc, {_key(f): (f, 1)}
    key = _key(p)
    hit = _FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    if len(_FACTOR_CACHE) > 100000:
        _FACTOR_CACHE.clear()
    _FACTOR_CACHE[key] = out = _factor_uncached(p)
    return out


def _factor_uncached(p: Poly):
    c, facs = p.factor()
    out = {}
    for f, e in facs:
        lc = f.leading_coefficient()
        if lc != 1:
            f = f / lc
            c = c * lc ** e
        k = _key(f)
        if k in out:
            out[k] = (f, out[k][1] + e)
        else:
            out[k] = (f, e)
    return c, out


def _den_product(target: Mapping, have: Mapping) -> Poly:
    out = _ONE
    for k, (f, e) in target.items():
        m = e - (have[k][1] if k in have else 0)
        if m:
            out = out * f ** m
    return out


class _Compiled:
    """Float evaluation data for one polynomial."""

    __slots__ = ("slots", "exps", "coeffs", "exact", "const")

    def __init__(self, p: Poly):
        used = sorted(_poly_vars(p))
        self.slots = used
        monoms = p.monoms()
        self.exact = [(int(c.p), int(c.q)) for c in p.coeffs()]
        self.coeffs = np.array([float(c) for c in p.coeffs()], dtype=float)
        self.exps = np.array([[m[s] for s in used] for m in monoms], dtype=np.int64).reshape(len(monoms), len(used))
        self.const = None if used else (float(self.coeffs.sum()) if len(self.coeffs) else 0.0)

    def _coeffs(self, dtype):
        if np.dtype(dtype) == np.float64:
            return self.coeffs
        return [dtype(a) / dtype(b) for a, b in self.exact]

    def __call__(self, vals: Mapping[int, object], dtype=float):
        if self.const is not None:
            if dtype is float:
                return self.const
            return sum(self._coeffs(dtype), dtype(0))
        cols = [np.asarray(vals[s], dtype=dtype) for s in self.slots]
        shape = np.broadcast_shapes(*(c.shape for c in cols))
        total = np.zeros(shape, dtype=dtype)
        cache = {}
        for row, c in zip(self.exps, self._coeffs(dtype)):
            t = c
            for col, e in zip(cols, row):
                if e:
                    key = (id(col), e)
                    v = cache.get(key)
                    if v is None:
                        v = col if e == 1 else col ** e
                        cache[key] = v
                    t = t * v
            total = total + t
        return total if shape else (float(total) if dtype is float else total)


class RationalFunction:
    """``num / prod(factor ** e)`` with monic irreducible denominator factors."""

    __slots__ = ("num", "den", "_compiled")

    def __init__(self, num=None, den: Optional[Mapping] = None):
        if num is None:
            num = _ZERO
        elif not isinstance(num, Poly):
            num = _const_poly(num)
        self.num: Poly = num
        self.den: Dict[str, Tuple[Poly, int]] = dict(den) if den else {}
        self._compiled = None

    # -- constructors ----------------------------------------------------
    @classmethod
    def const(cls, c) -> "RationalFunction":
        return cls(_const_poly(c))

    @classmethod
    def var(cls, name) -> "RationalFunction":
        return cls(_GENS[var_slot(name)])

    @classmethod
    def from_quotient(cls, num: Poly, den: Poly) -> "RationalFunction":
        c, facs = _factor(den)
        return cls(num / c, facs)._cancel()

    # -- queries -----------------------------------------------------------
    @property
    def numerator(self) -> Poly:
        return self.num

    @property
    def denominator(self) -> Poly:
        return _den_product(self.den, {})

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return not self.den

    def is_constant(self) -> bool:
        return not self.den and self.num.is_constant()

    def constant_value(self) -> flint.fmpq:
        if not self.is_constant():
            raise AlgebraError(f"{self} is not constant")
        return self.num.leading_coefficient() if not self.num.is_zero() else flint.fmpq(0)

    def variables(self) -> frozenset:
        out = set(_poly_vars(self.num))
        for f, _ in self.den.values():
            out |= _poly_vars(f)
        return frozenset(out)

    def coordinates(self) -> frozenset:
        return frozenset(s for s in self.variables() if is_coordinate(s))

    def degree(self) -> int:
        return self.num.total_degree() if not self.num.is_zero() else 0

    # -- arithmetic ------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "RationalFunction":
        if isinstance(x, RationalFunction):
            return x
        if isinstance(x, Poly):
            return RationalFunction(x)
        return RationalFunction(_const_poly(x))

    def __add__(self, other):
        other = self._coerce(other)
        if other.num.is_zero():
            return self
        if self.num.is_zero():
            return other
        if self.den.keys() == other.den.keys() and all(
                self.den[k][1] == other.den[k][1] for k in self.den):
            return RationalFunction(self.num + other.num, self.den)
        lcm = dict(self.den)
        for k, (f, e) in other.den.items():
            if k not in lcm or lcm[k][1] < e:
                lcm[k] = (f, e)
        a = self.num * _den_product(lcm, self.den)
        b = other.num * _den_product(lcm, other.den)
        return RationalFunction(a + b, lcm)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if self.num.is_zero() or other.num.is_zero():
            return RationalFunction()
        den = dict(self.den)
        for k, (f, e) in other.den.items():
            den[k] = (f, den[k][1] + e) if k in den else (f, e)
        return RationalFunction(self.num * other.num, den)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if self.num.is_zero():
            raise AlgebraError("inverse of the zero rational function")
        c, facs = _factor(self.num)
        num = _den_product(self.den, {}) / c
        return RationalFunction(num, facs)

    def __truediv__(self, other):
        other = self._coerce(other)
        return (self * other.inverse())._cancel()

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return RationalFunction.const(1)
        return RationalFunction(self.num ** k, {key: (f, e * k) for key, (f, e) in self.den.items()})

    def _cancel(self) -> "RationalFunction":
        if not self.den:
            return self
        if self.num.is_zero():
            return RationalFunction()
        num = self.num
        den = {}
        for k, (f, e) in self.den.items():
            while e:
                q, r = divmod(num, f)
                if not r.is_zero():
                    break
                num = q
                e -= 1
            if e:
                den[k] = (f, e)
        return RationalFunction(num, den)

    def simplify(self) -> "RationalFunction":
        return self._cancel()

    # -- calculus ----------------------------------------------------------
    def diff(self, name) -> "RationalFunction":
        slot = var_slot(name)
        dnum = self.num.derivative(slot) if slot in _poly_vars(self.num) else _ZERO
        dep = [(k, f, e) for k, (f, e) in self.den.items() if slot in _poly_vars(f)]
        if not dep:
            return RationalFunction(dnum, self.den)
        g = _ONE
        for _, f, _ in dep:
            g = g * f
        total = dnum * g
        for k, f, e in dep:
            rest = g / f
            total = total - self.num * f.derivative(slot) * rest * e
        den = dict(self.den)
        for k, f, e in dep:
            den[k] = (f, e + 1)
        return RationalFunction(total, den)

    # -- substitution ------------------------------------------------------
    def substitute(self, bindings: Mapping) -> "RationalFunction":
        """Simultaneous substitution of variables by rational functions."""
        b = {var_slot(k): self._coerce(v) for k, v in bindings.items()}
        used = self.variables()
        b = {s: v for s, v in b.items() if s in used}
        if not b:
            return self
        lcm: Dict[str, Tuple[Poly, int]] = {}
        for v in b.values():
            for k, (f, e) in v.den.items():
                if k not in lcm or lcm[k][1] < e:
                    lcm[k] = (f, e)
        Q = _den_product(lcm, {})
        images = list(_GENS)
        for s, v in b.items():
            images[s] = v.num * _den_product(lcm, v.den)
        num, deg_n = _compose_homogeneous(self.num, b.keys(), images, Q)
        out = RationalFunction(num, _power_den(lcm, deg_n))
        for k, (f, e) in self.den.items():
            if _poly_vars(f) & b.keys():
                fn, deg_f = _compose_homogeneous(f, b.keys(), images, Q)
                if fn.is_zero():
                    raise AlgebraError("substitution makes the denominator identically zero")
                # f(b) = fn / Q**deg_f, so 1/f(b)**e = Q**(deg_f e) / fn**e
                part = RationalFunction(Q ** (deg_f * e)) * RationalFunction(fn).inverse() ** e
                out = out * part
            else:
                out = out * RationalFunction(_ONE, {k: (f, e)})
        return out._cancel()

    # -- evaluation ------------------------------------------------------
    def _compile(self):
        if self._compiled is None:
            self._compiled = (_Compiled(self.num), [(_Compiled(f), e) for f, e in self.den.values()])
        return self._compiled

    def _slot_values(self, point: Mapping, params: Optional[Mapping]):
        vals = {var_slot(k): v for k, v in point.items()}
        if params:
            vals.update({var_slot(k): v for k, v in params.items()})
        missing = self.variables() - vals.keys()
        if missing:
            raise AlgebraError("no value for " + ", ".join(slot_name(s) for s in sorted(missing)))
        return vals

    def evaluate(self, point: Mapping, params: Optional[Mapping] = None, stratum=None) -> float:
        vals = self._slot_values(point, params)
        cn, cd = self._compile()
        d = 1.0
        for c, e in cd:
            d *= c(vals) ** e
        if abs(d) < EPS_DEN:
            raise PoleError(f"denominator {d!r} below {EPS_DEN} at {dict(point)}", stratum)
        return cn(vals) / d

    def evaluate_array(self, point: Mapping, params: Optional[Mapping] = None, dtype=float):
        """Vectorised evaluation; returns ``(values, pole_mask)``.

        Values at poles are NaN.  ``dtype=np.longdouble`` evaluates in extended
        precision.
        """
        vals = self._slot_values(point, params)
        arrays = [np.asarray(v, dtype=dtype) for v in point.values()]
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        cn, cd = self._compile()
        d = np.ones(shape, dtype=dtype)
        for c, e in cd:
            d = d * np.asarray(c(vals, dtype), dtype=dtype) ** e
        poles = np.abs(d) < EPS_DEN
        n = np.broadcast_to(np.asarray(cn(vals, dtype), dtype=dtype), shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(poles, np.nan, n / np.where(poles, 1, d))
        return out, poles

    # -- comparison / text -------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (RationalFunction, Poly, int, flint.fmpq)):
            return (self - self._coerce(other)).is_zero()
        return NotImplemented

    __hash__ = None

    def __str__(self):
        return format_rational(self)

    def __repr__(self):
        return f"RationalFunction({self})"


def _power_den(lcm: Mapping, k: int) -> Dict[str, Tuple[Poly, int]]:
    return {key: (f, e * k) for key, (f, e) in lcm.items()} if k else {}


def _compose_homogeneous(p: Poly, bound, images, Q: Poly) -> Tuple[Poly, int]:
    """``p(B / Q) * Q**D`` as a polynomial together with ``D``.

    ``images`` holds the numerators ``B`` at bound slots and the generators
    elsewhere; ``D`` is the degree of ``p`` in the bound variables.
    """
    if Q.is_one():
        return p.compose(*images), 0
    bound = sorted(bound)
    groups: Dict[int, Dict[tuple, flint.fmpq]] = {}
    for m, c in zip(p.monoms(), p.coeffs()):
        deg = sum(m[s] for s in bound)
        groups.setdefault(deg, {})[m] = c
    D = max(groups)
    total = _ZERO
    for deg, terms in groups.items():
        part = CTX.from_dict(terms).compose(*images)
        if deg < D:
            part = part * Q ** (D - deg)
        total = total + part
    return total, D


def is_identically_zero(f) -> bool:
    """Exact zero test: true iff the numerator reduces to the zero polynomial."""
    if isinstance(f, RationalFunction):
        return f.num.is_zero()
    if isinstance(f, Poly):
        return f.is_zero()
    return f == 0


def differentiate(f, index) -> RationalFunction:
    return RationalFunction._coerce(f).diff(index)


def substitute(f, bindings: Mapping) -> RationalFunction:
    return RationalFunction._coerce(f).substitute(bindings)


def evaluate(f, point: Mapping, params: Optional[Mapping] = None) -> float:
    return RationalFunction._coerce(f).evaluate(point, params)


def var(i) -> RationalFunction:
    return RationalFunction.var(i)


def const(c) -> RationalFunction:
    return RationalFunction.const(c)


# --------------------------------------------------------------------------
# text form

def _print_key(m):
    return -sum(m), [(s, -e) for s, e in enumerate(m) if e]


def _fmt_monomial(m) -> str:
    parts = []
    for s, e in enumerate(m):
        if e:
            parts.append(_NAMES[s] if e == 1 else f"{_NAMES[s]}^{e}")
    return "*".join(parts)


def format_polynomial(p: Poly) -> str:
    if p.is_zero():
        return "0"
    items = sorted(zip(p.monoms(), p.coeffs()), key=lambda mc: _print_key(mc[0]))
    out = []
    for idx, (m, c) in enumerate(items):
        mono = _fmt_monomial(m)
        neg = c < 0
        a = -c if (neg and idx) else c
        if a.q == 1:
            if mono and a == 1:
                coeff = ""
            elif mono and a == -1:
                coeff = "-"
            else:
                coeff = str(a.p)
        else:
            coeff = f"({a.p}/{a.q})"
        if mono:
            body = coeff + mono if coeff in ("", "-") else f"{coeff}*{mono}"
        else:
            body = coeff
        out.append(((" - " if neg else " + ") + body) if idx else body)
    return "".join(out)


def format_rational(f: RationalFunction) -> str:
    if not f.den:
        return format_polynomial(f.num)
    parts = []
    for k in sorted(f.den, key=lambda k: (len(k), k)):
        g, e = f.den[k]
        s = format_polynomial(g)
        if len(g) > 1:
            s = f"({s})"
        parts.append(s if e == 1 else f"{s}^{e}")
    den = "*".join(parts)
    num = format_polynomial(f.num)
    if len(f.num) > 1 or num.startswith("-"):
        num = f"({num})"
    if len(parts) > 1:
        den = f"({den})"
    return f"{num}/{den}"


_TOKEN = re.compile(r"\s*(?:(\d+)|(p\d+)|([a-z])|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            break
        pos = m.end()
        num, coord, param, op = m.groups()
        if num is not None:
            tokens.append(("num", int(num)))
        elif coord is not None:
            tokens.append(("var", coord))
        elif param is not None:
            tokens.append(("var", param))
        elif op is not None:
            if op not in "+-*/^()":
                raise AlgebraError(f"unexpected character {op!r} in {text!r}")
            tokens.append(("op", op))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, op=None):
        tok = self.peek()
        if tok == (None, None):
            raise AlgebraError(f"unexpected end of {self.text!r}")
        if op is not None and tok != ("op", op):
            raise AlgebraError(f"expected {op!r} in {self.text!r}")
        self.i += 1
        return tok

    def expr(self):
        val = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            _, op = self.take()
            rhs = self.term()
            val = val + rhs if op == "+" else val - rhs
        return val

    def term(self):
        val = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            _, op = self.take()
            rhs = self.unary()
            val = val * rhs if op == "*" else val / rhs
        return val

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return -self.unary()
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            neg = False
            if (kind, val) == ("op", "-"):
                neg = True
                kind, val = self.take()
            if kind != "num":
                raise AlgebraError(f"integer exponent expected in {self.text!r}")
            base = base ** (-val if neg else val)
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return RationalFunction.const(val)
        if kind == "var":
            return RationalFunction.var(val)
        if (kind, val) == ("op", "("):
            v = self.expr()
            self.take(")")
            return v
        raise AlgebraError(f"unexpected token {val!r} in {self.text!r}")


def parse(text: str) -> RationalFunction:
    """Parse the textual form, e.g. ``"(-1/2)*p1^2*p2 + p3"`` or ``"p1/(p1+p2)"``."""
    p = _Parser(text)
    if not p.toks:
        raise AlgebraError("empty expression")
    val = p.expr()
    if p.i != len(p.toks):
        raise AlgebraError(f"trailing input in {text!r}")
    return val


# --------------------------------------------------------------------------

class StratifiedFunction:
    """Rational pieces indexed by strata, with a separable factor ``exp(lam * t)``.

    Strata listed in ``closed`` carry a piece that extends continuously to the
    closure of the cell; evaluation falls back to them on boundary points that
    no open piece claims.
    """

    def __init__(self, pieces: Mapping, time_factor: Number = 0, closed: Iterable = ()):
        self.pieces = dict(pieces)
        self.time_factor = to_fmpq(time_factor)
        self.closed = frozenset(closed)

    def __getitem__(self, stratum):
        return self.pieces[stratum]

    def __contains__(self, stratum):
        return stratum in self.pieces

    def strata(self):
        return sorted(self.pieces, key=lambda s: (len(s.free), str(s)))

    def locate(self, point):
        for s in self.strata():
            if s.contains(point):
                return s
        for s in self.strata():
            if s in self.closed and s.closure_contains(point):
                return s
        return None

    def evaluate(self, point, t: float = 0.0, params: Optional[Mapping] = None) -> float:
        s = self.locate(point)
        if s is None:
            raise PoleError(f"no piece covers {tuple(point)}")
        vals = {i + 1: float(v) for i, v in enumerate(point)}
        vals[0] = 1.0 - sum(float(v) for v in point)
        try:
            v = self.pieces[s].evaluate(vals, params)
        except PoleError as e:
            raise PoleError(str(e), s) from None
        return v * math.exp(float(self.time_factor) * t) if t else v

    def to_json(self) -> dict:
        return {
            "time_factor": str(self.time_factor),
            "pieces": [
                {"stratum": s.to_json(), "expr": str(self.pieces[s]), "closed": s in self.closed}
                for s in self.strata()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping, n: int) -> "StratifiedFunction":
        from .geometry import Stratum
        pieces, closed = {}, []
        for item in data["pieces"]:
            s = Stratum.from_json(item["stratum"], n)
            pieces[s] = parse(item["expr"])
            if item.get("closed"):
                closed.append(s)
        tf = data.get("time_factor", "0")
        num, _, den = str(tf).partition("/")
        return cls(pieces, flint.fmpq(int(num), int(den or 1)), closed)
