"""Wright-Fisher backward operators applied exactly to rational functions.

Three families are supported:

* ``simplex-L``: ``L* = 1/2 sum_{i,j} p^i (delta_ij - p^j) d_i d_j`` on a face
  ``Delta^(J)`` written in the chart that eliminates the derived coordinate,
* ``symmetric-Lambda``: the same expression summed over ``x^0, ..., x^n``,
* ``transformed-L``: the operator after the iterated blow-up along a path,
  a simplex block on ``I_{k+1}`` plus the diagonal cube terms
  ``p~^{i_j} (1 - p~^{i_j}) / prod_{l=k+1}^{j-1} p~^{i_l}``.

Coefficients are stored bare; the factor 1/2 is applied in :func:`apply_operator`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .algebra import RationalFunction, const, var
from .geometry import (
    CUBE_FACE, PRODUCT, SIMPLEX_FACE, GeometryError, OrderedPath, Stratum,
    cube_face, simplex_face,
)

SIMPLEX_L = "simplex-L"
SYMMETRIC = "symmetric-Lambda"
TRANSFORMED = "transformed-L"

_HALF = const(1) / 2


class OperatorError(GeometryError):
    pass


def chart_bindings(stratum: Stratum) -> Dict[int, RationalFunction]:
    """Bindings that restrict a function of ``p^0..p^n`` to the chart of ``stratum``.

    Fixed coordinates receive their values, ``p^0`` is expressed through the
    simplex constraint (or set to 0 if it is not a vertex) and, when 0 is not a
    vertex of the simplex factor, the smallest vertex becomes the derived one.
    """
    out: Dict[int, RationalFunction] = {i: const(v) for i, v in stratum.fixed}
    J = stratum.simplex
    if J:
        d = stratum.derived
        rest = const(1)
        for i in J:
            if i != d:
                rest = rest - var(i)
        if d == 0:
            out[0] = rest
        else:
            out[0] = const(0)
            out[d] = rest
    return out


def to_chart(f: RationalFunction, stratum: Stratum) -> RationalFunction:
    return f.substitute(chart_bindings(stratum))


def full_simplex(n: int) -> Stratum:
    return simplex_face(n, range(n + 1))


def transformed_domain(path: OrderedPath) -> Stratum:
    """Open domain of the transformed operator.

    For base dimension 0 the simplex factor ``Delta_1^({0, i_1})`` is the cube
    axis ``i_1``, so the domain is the open unit cube.
    """
    from .geometry import product_domain
    if path.k == 0:
        return cube_face(path.n, range(1, path.n + 1), {})
    return product_domain(path)


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    n: int
    stratum: Stratum
    path: Optional[OrderedPath] = None
    flips: Tuple[bool, ...] = ()

    def __post_init__(self):
        if self.kind not in (SIMPLEX_L, SYMMETRIC, TRANSFORMED):
            raise OperatorError(f"unknown operator kind {self.kind!r}")
        if self.kind == TRANSFORMED:
            if self.path is None:
                raise OperatorError("the transformed operator needs a path")
            if self.path.n - self.path.k < 1:
                raise OperatorError("path too short for a transformed operator")
            if not self.path.blowup_ok():
                raise OperatorError("index 0 may only lead the path of a blow-up chain")
            steps = max(self.path.n - self.path.k - 1, 0)
            flips = tuple(bool(f) for f in self.flips) or (False,) * steps
            if len(flips) != steps:
                raise OperatorError(f"expected {steps} orientation flags, got {len(flips)}")
            object.__setattr__(self, "flips", flips)
            if self.stratum.boxtimes:
                raise OperatorError("the transformed operator is undefined on additional faces")

    # -- coefficient tables ----------------------------------------------------
    @cached_property
    def terms(self) -> Dict[Tuple[int, int], RationalFunction]:
        """Bare coefficients ``a^{ij}`` over the free chart coordinates (symmetric)."""
        if self.kind == SYMMETRIC:
            idx = list(range(self.n + 1))
            out = {}
            for i in idx:
                for j in idx:
                    out[(i, j)] = var(i) * ((1 if i == j else 0) - var(j))
            return out
        if self.kind == SIMPLEX_L:
            return _simplex_block(self.stratum.simplex_free)
        return self._transformed_terms()

    @property
    def variables(self) -> Tuple[int, ...]:
        if self.kind == SYMMETRIC:
            return tuple(range(self.n + 1))
        return tuple(sorted({i for i, _ in self.terms}))

    @cached_property
    def surviving(self) -> Tuple[int, ...]:
        """Free coordinates whose second derivative appears in the operator."""
        return tuple(sorted({i for i, j in self.terms if i == j}))

    def coefficient(self, i: int, j: int) -> RationalFunction:
        free = self.variables if self.kind == SYMMETRIC else self.stratum.free
        if i not in free or j not in free:
            raise OperatorError(f"({i},{j}) is not a pair of free coordinates of {self.stratum.label()}")
        return self.terms.get((i, j), const(0))

    def denominator_factor(self, c: int) -> RationalFunction:
        """``p~^c`` or, for a flipped blow-up coordinate, ``1 - p~^c``."""
        return (1 - var(c)) if c in self.flipped_axes else var(c)

    @cached_property
    def flipped_axes(self) -> frozenset:
        if self.kind != TRANSFORMED:
            return frozenset()
        p = self.path
        return frozenset(p.i(p.n - m + 1) for m, f in enumerate(self.flips, start=1) if f)

    @cached_property
    def maxind(self) -> Optional[int]:
        """Path position of the last vanishing coordinate that precedes a free cube axis."""
        if self.kind != TRANSFORMED:
            return None
        return _transformed_layout(self)[0]

    def _transformed_terms(self) -> Dict[Tuple[int, int], RationalFunction]:
        p, st = self.path, self.stratum
        k, n = p.k, p.n
        maxind, block_free = _transformed_layout(self)
        bind = chart_bindings(st)
        out: Dict[Tuple[int, int], RationalFunction] = {}
        if maxind is None:
            out.update(_simplex_block(block_free, bind))
        start = k + 2 if maxind is None else maxind + 1
        lo = k + 1 if maxind is None else maxind + 1
        for j in range(start, n + 1):
            c = p.i(j)
            if c not in st.cube:
                continue
            coeff = var(c) * (1 - var(c))
            den = const(1)
            for l in range(lo, j):
                den = den * self.denominator_factor(p.i(l))
            coeff = (coeff / den).substitute(bind)
            out[(c, c)] = coeff
        return out

    def describe(self) -> str:
        parts = []
        for (i, j), a in sorted(self.terms.items()):
            if i > j:
                continue
            w = "1/2" if i == j else "1"
            op = f"d{i}^2" if i == j else f"d{i}d{j}"
            parts.append(f"{w}*({a})*{op}")
        return " + ".join(parts) if parts else "0"


def _simplex_block(free: Sequence[int], bind: Optional[Mapping] = None):
    out = {}
    for i in free:
        for j in free:
            a = var(i) * ((1 if i == j else 0) - var(j))
            out[(i, j)] = a.substitute(bind) if bind else a
    return out


def _transformed_layout(spec: OperatorSpec):
    """Return ``(maxind, free simplex-block coordinates)`` for a transformed spec."""
    p, st = spec.path, spec.stratum
    k, n = p.k, p.n
    fixed = st.fixed_map
    flipped = spec.flipped_axes

    def vanishes(pos: int) -> bool:
        c = p.i(pos)
        if pos == k + 1 and k > 0:
            return c not in st.simplex
        if c in fixed:
            return fixed[c] == (1 if c in flipped else 0)
        return False

    if k == 0:
        block_free = (p.i(1),) if p.i(1) in st.cube else ()
    else:
        block_free = st.simplex_free
    cube_free = [pos for pos in range(k + 2, n + 1) if p.i(pos) in st.cube]
    maxind = None
    for pos in range(k + 1, n + 1):
        if vanishes(pos) and any(q > pos for q in cube_free):
            maxind = pos
    return maxind, block_free


# --------------------------------------------------------------------------

# specs are immutable, so cached instances keep their coefficient tables

@lru_cache(maxsize=4096)
def _spec(kind, n, stratum, path=None, flips=()):
    return OperatorSpec(kind, n, stratum, path, flips)


def simplex_operator(n: int, stratum: Optional[Stratum] = None) -> OperatorSpec:
    return _spec(SIMPLEX_L, n, stratum or full_simplex(n))


def symmetric_operator(n: int) -> OperatorSpec:
    return _spec(SYMMETRIC, n, full_simplex(n))


def transformed_operator(path: OrderedPath, flips: Sequence[bool] = (),
                         stratum: Optional[Stratum] = None) -> OperatorSpec:
    return _spec(TRANSFORMED, path.n, stratum or transformed_domain(path), path,
                 tuple(bool(f) for f in flips))


def coefficient(spec: OperatorSpec, i: int, j: int) -> RationalFunction:
    return spec.coefficient(i, j)


def apply_operator(spec: OperatorSpec, f: RationalFunction) -> RationalFunction:
    """``1/2 sum a^{ij} d_i d_j f`` with ``f`` first restricted to the chart of the stratum.

    Only second-order terms are ever formed.
    """
    if spec.kind == SYMMETRIC:
        g = f
    elif spec.kind == TRANSFORMED:
        g = to_chart(f, spec.stratum)
    else:
        g = to_chart(f, spec.stratum)
    terms = spec.terms
    idx = sorted({i for i, _ in terms})
    gvars = g.variables()
    first = {i: g.diff(i) for i in idx if i in gvars}
    total = RationalFunction()
    for a, i in enumerate(idx):
        if i not in first:
            continue
        gi = first[i]
        for j in idx[a:]:
            if (i, j) not in terms or j not in gvars:
                continue
            gij = gi.diff(j)
            if gij.is_zero():
                continue
            w = terms[(i, j)] if i == j else terms[(i, j)] * 2
            total = total + w * gij
    return (total * _HALF).simplify()


def restrict_operator(spec: OperatorSpec, face: Stratum) -> OperatorSpec:
    """The operator acting on a boundary cell of the closure of ``spec.stratum``.

    On simplex faces this is ``L*`` of the sub-simplex.  For the transformed
    family, multiplying through by the coordinates that vanish on the face and
    letting them tend to zero leaves exactly the cube terms of the free axes past
    the last vanishing coordinate that still has a free axis after it; their
    denominators keep only the free coordinates strictly in between.  Axes fixed
    at the non-vanishing end lose their own summand.
    """
    if not in_closure(spec.stratum, face):
        raise OperatorError(f"{face.label()} is not in the closure of {spec.stratum.label()}")
    return _spec(spec.kind, spec.n, face, spec.path, spec.flips)


def in_closure(big: Stratum, small: Stratum) -> bool:
    """True if the open cell ``small`` lies in the closure of the open cell ``big``."""
    if big.n != small.n or small.boxtimes:
        return False
    if not set(small.simplex) <= set(big.simplex):
        return False
    sf = small.fixed_map
    if any(sf.get(i) != v for i, v in big.fixed):
        return False
    if any(i not in small.cube and i not in sf for i in big.cube):
        return False
    return set(small.cube) <= set(big.cube)
