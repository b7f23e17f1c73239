"""Blow-up charts, iterated chains and the transformed solutions.

A chart ``(sigma, rho)`` replaces ``(p^sigma, p^rho)`` by

    p~^sigma = p^sigma + p^rho,    p~^rho = p^rho / (p^sigma + p^rho)

and leaves every other coordinate alone.  A flipped chart uses
``p^sigma / (p^sigma + p^rho)`` for the second component instead.  Charts and
their inverses are exact substitution maps; the transformed coordinates reuse
the slots of the coordinates they replace.

Along a path ``(i_k, ..., i_n)`` step ``m`` of the chain uses
``sigma_m = i_{n-m}`` and ``rho_m = i_{n-m+1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import RationalFunction, StratifiedFunction, const, var
from .extension import ExtensionResult
from .geometry import (
    CUBE_FACE, EPS_GEOM, PRODUCT, SIMPLEX_FACE, GeometryError, OrderedPath, Stratum,
    cube_face, simplex_face,
)
from .operators import (
    OperatorSpec, apply_operator, chart_bindings, full_simplex, simplex_operator,
    to_chart, transformed_domain, transformed_operator,
)

Bindings = Dict[int, RationalFunction]


class BlowupError(GeometryError):
    pass


class NoSmoothImage(BlowupError):
    """The face meets the blown-up locus, where the chart is not a diffeomorphism."""


def _compose(outer: Bindings, inner: Bindings) -> Bindings:
    """``outer`` after ``inner``: every image of ``outer`` rewritten through ``inner``."""
    out = dict(inner)
    for i, f in outer.items():
        out[i] = f.substitute(inner)
    return out


@dataclass(frozen=True)
class BlowupChart:
    sigma: int
    rho: int
    flipped: bool = False

    def __post_init__(self):
        if self.sigma == self.rho:
            raise BlowupError("sigma and rho must differ")
        if self.sigma == 0 or self.rho == 0:
            raise BlowupError("index 0 cannot take part in a blow-up")

    @cached_property
    def forward(self) -> Bindings:
        s, r = var(self.sigma), var(self.rho)
        tot = s + r
        return {self.sigma: tot, self.rho: (s if self.flipped else r) / tot}

    @cached_property
    def inverse(self) -> Bindings:
        s, r = var(self.sigma), var(self.rho)
        keep, give = (r, 1 - r) if self.flipped else (1 - r, r)
        return {self.sigma: s * keep, self.rho: s * give}

    @property
    def rho_at_zero(self) -> int:
        """Value of ``p~^rho`` on ``{p^rho = 0}``."""
        return 1 if self.flipped else 0

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma, "rho": self.rho, "flipped": self.flipped,
            "forward": {str(i): str(f) for i, f in sorted(self.forward.items())},
            "inverse": {str(i): str(f) for i, f in sorted(self.inverse.items())},
        }


def make_chart(sigma: int, rho: int, flipped: bool = False) -> BlowupChart:
    return BlowupChart(int(sigma), int(rho), bool(flipped))


@dataclass(frozen=True)
class BlowupChain:
    path: OrderedPath
    flips: Tuple[bool, ...] = ()

    def __post_init__(self):
        p = self.path
        if p.n - p.k < 2:
            raise BlowupError(f"path {p} of base dimension {p.k} needs no blow-up")
        if not p.blowup_ok():
            raise BlowupError("index 0 may only lead a blow-up path")
        steps = p.n - p.k - 1
        flips = tuple(bool(f) for f in self.flips) or (False,) * steps
        if len(flips) != steps:
            raise BlowupError(f"expected {steps} orientation flags, got {len(flips)}")
        object.__setattr__(self, "flips", flips)

    @property
    def n(self) -> int:
        return self.path.n

    @property
    def k(self) -> int:
        return self.path.k

    @cached_property
    def steps(self) -> Tuple[BlowupChart, ...]:
        p, n = self.path, self.path.n
        return tuple(make_chart(p.i(n - m), p.i(n - m + 1), f)
                     for m, f in enumerate(self.flips, start=1))

    @cached_property
    def forward(self) -> Bindings:
        """``p~`` as functions of ``p`` (only moved coordinates are listed)."""
        out: Bindings = {}
        for st in self.steps:
            out = _compose(st.forward, out) if out else dict(st.forward)
        return out

    @cached_property
    def inverse(self) -> Bindings:
        """``p`` as functions of ``p~``."""
        out: Bindings = {}
        for st in self.steps:
            if not out:
                out = dict(st.inverse)
                continue
            new = {i: f.substitute(st.inverse) for i, f in out.items()}
            for i, f in st.inverse.items():
                new.setdefault(i, f)
            out = new
        return out

    @cached_property
    def flipped_axes(self) -> frozenset:
        return frozenset(st.rho for st in self.steps if st.flipped)

    def closed_forms(self) -> Tuple[Bindings, Bindings]:
        """Product formulas for the composite maps, built without composition.

        With ``S_j = p^{i_j} + ... + p^{i_n}``: ``p~^{i_{k+1}} = S_{k+1}`` and
        ``p~^{i_j} = S_j / S_{j-1}``; inversely
        ``p^{i_j} = p~^{i_{k+1}} ... p~^{i_j} (1 - p~^{i_{j+1}})``.  Flipped axes
        use the complementary fraction.
        """
        p, k, n = self.path, self.k, self.n
        S = {}
        acc = const(0)
        for j in range(n, k, -1):
            acc = acc + var(p.i(j))
            S[j] = acc
        flipped = self.flipped_axes

        def t(j):
            c = p.i(j)
            return (1 - var(c)) if c in flipped else var(c)

        fwd = {p.i(k + 1): S[k + 1]}
        for j in range(k + 2, n + 1):
            frac = S[j] / S[j - 1]
            fwd[p.i(j)] = (1 - frac) if p.i(j) in flipped else frac
        inv = {}
        prod = var(p.i(k + 1))
        for j in range(k + 1, n + 1):
            if j > k + 1:
                prod = prod * t(j)
            inv[p.i(j)] = prod * (1 - t(j + 1)) if j < n else prod
        return fwd, inv

    def to_json(self) -> dict:
        return {
            "path": list(self.path.indices), "n": self.n, "flips": list(self.flips),
            "steps": [st.to_json() for st in self.steps],
            "forward": {str(i): str(f) for i, f in sorted(self.forward.items())},
            "inverse": {str(i): str(f) for i, f in sorted(self.inverse.items())},
        }


def make_chain(path: OrderedPath, n: Optional[int] = None,
               flips: Sequence[bool] = ()) -> BlowupChain:
    if n is not None and n != path.n:
        raise BlowupError("path dimension mismatch")
    return BlowupChain(path, tuple(flips))


def flip_flags(path: OrderedPath, steps: Sequence[int]) -> Tuple[bool, ...]:
    """Orientation flags with the listed (1-based) steps flipped."""
    m = path.n - path.k - 1
    bad = [s for s in steps if not 1 <= s <= m]
    if bad:
        raise BlowupError(f"flip step {bad[0]} outside 1..{m}")
    return tuple(i + 1 in set(steps) for i in range(m))


# -- exact certificates ------------------------------------------------------

def roundtrip_defects(chain) -> Dict[str, Dict[int, RationalFunction]]:
    """``inverse(forward(p)) - p`` and ``forward(inverse(q)) - q`` per coordinate."""
    fwd, inv = chain.forward, chain.inverse
    a = {i: (inv[i].substitute(fwd) - var(i)).simplify() for i in inv}
    b = {i: (fwd[i].substitute(inv) - var(i)).simplify() for i in fwd}
    return {"inverse_after_forward": a, "forward_after_inverse": b}


def closed_form_defects(chain: BlowupChain) -> Dict[str, Dict[int, RationalFunction]]:
    fwd, inv = chain.closed_forms()
    return {
        "forward": {i: (chain.forward[i] - f).simplify() for i, f in fwd.items()},
        "inverse": {i: (chain.inverse[i] - f).simplify() for i, f in inv.items()},
    }


def _full_chart(f: RationalFunction, n: int) -> RationalFunction:
    return to_chart(f, full_simplex(n))


def pullback_defect(chain: BlowupChain, f: RationalFunction) -> RationalFunction:
    """``(L* f) o Phi^{-1} - L~*(f o Phi^{-1})``; identically zero when the chain is right."""
    n = chain.n
    f = _full_chart(f, n)
    lhs = apply_operator(simplex_operator(n), f).substitute(chain.inverse)
    rhs = apply_operator(transform_operator(chain), f.substitute(chain.inverse))
    return (lhs - rhs).simplify()


def derived_coefficients(chain: BlowupChain) -> Tuple[Dict[Tuple[int, int], RationalFunction],
                                                      Dict[int, RationalFunction]]:
    """Coefficients of ``L*`` in the blown-up coordinates via the chain rule.

    Returns ``(second, first)`` with ``second[r, s] = sum a^{ij} d_i F^r d_j F^s``
    and ``first[r] = L* F^r``, both rewritten in ``p~``.  Here ``F`` is the
    composite forward map extended by the identity.
    """
    n = chain.n
    L = simplex_operator(n)
    terms = L.terms
    coords = list(range(1, n + 1))
    F = {r: chain.forward.get(r, var(r)) for r in coords}
    grads = {r: {i: F[r].diff(i) for i in coords} for r in coords}
    second = {}
    for r, s in itertools.combinations_with_replacement(coords, 2):
        tot = RationalFunction()
        for i in coords:
            gi = grads[r][i]
            if gi.is_zero():
                continue
            for j in coords:
                gj = grads[s][j]
                if not gj.is_zero():
                    tot = tot + terms[(i, j)] * gi * gj
        tot = tot.substitute(chain.inverse).simplify()
        if not tot.is_zero():
            second[(r, s)] = second[(s, r)] = tot
    first = {r: apply_operator(L, F[r]).substitute(chain.inverse).simplify() for r in coords}
    return second, first


def coefficient_defects(chain: BlowupChain) -> Dict[str, object]:
    """Compare the chain-rule coefficients with the closed-form transformed table."""
    second, first = derived_coefficients(chain)
    spec = transform_operator(chain)
    bind = chart_bindings(spec.stratum)
    table = spec.terms
    keys = set(second) | set(table)
    bad = []
    for key in sorted(keys):
        a = second.get(key, const(0)).substitute(bind)
        b = table.get(key, const(0))
        if not (a - b).is_zero():
            bad.append(key)
    return {"second_order": bad, "first_order": [r for r, f in first.items() if not f.is_zero()]}


# -- operator and solutions -----------------------------------------------------

def transform_operator(chain: BlowupChain, n: Optional[int] = None) -> OperatorSpec:
    if n is not None and n != chain.n:
        raise BlowupError("dimension mismatch")
    return transformed_operator(chain.path, chain.flips)


def image_stratum(chain: BlowupChain, d: int) -> Stratum:
    """Image of the path stratum ``Delta_d^(I_d)`` under the full chain."""
    return map_face(chain, simplex_face(chain.n, chain.path.index_set(d)), convention=True)


def _tail_values(chain: BlowupChain, d: int) -> Bindings:
    """Values of ``p~^{i_j}``, ``j > d``, on the image of ``Delta_d^(I_d)``."""
    path = chain.path
    flipped = chain.flipped_axes
    return {path.i(j): const(1 if path.i(j) in flipped else 0) for j in range(d + 1, chain.n + 1)}


def pushforward_piece(chain: BlowupChain, piece: RationalFunction, d: int) -> RationalFunction:
    """``piece`` on ``Delta_d^(I_d)`` written in the blown-up coordinates."""
    path, n = chain.path, chain.n
    f = to_chart(piece, simplex_face(n, path.index_set(d)))
    tail = _tail_values(chain, d)
    inv = {i: g.substitute(tail) for i, g in chain.inverse.items()}
    return f.substitute(inv).simplify()


def _flip_map(chain: BlowupChain) -> Bindings:
    return {c: 1 - var(c) for c in chain.flipped_axes}


def transform_solution(ext: ExtensionResult, chain: BlowupChain) -> StratifiedFunction:
    """Closed-form transformed pieces ``u_{k+1}(p~) prod_{j=k+2}^d (1 - p~^{i_j})``.

    For base dimension 0 this is a single piece ``c prod (1 - p~^{i_j})`` valid on
    the whole closed cube.
    """
    path = chain.path
    if ext.path != path:
        raise BlowupError(f"extension path {ext.path} differs from chain path {path}")
    k, n = path.k, path.n
    flip = _flip_map(chain)

    def oriented(f):
        return f.substitute(flip).simplify() if flip else f

    if k == 0:
        c = ext.piece(0)
        out = c
        for j in range(1, n + 1):
            out = out * (1 - var(path.i(j)))
        dom = transformed_domain(path)
        return StratifiedFunction({dom: oriented(out.simplify())}, ext.time_factor, closed=[dom])
    first = to_chart(ext.piece(k + 1), simplex_face(n, path.index_set(k + 1)))
    pieces = {image_stratum(chain, k): to_chart(ext.piece(k), simplex_face(n, path.index_set(k)))}
    acc = first
    for d in range(k + 1, n + 1):
        if d > k + 1:
            acc = acc * (1 - var(path.i(d)))
        pieces[image_stratum(chain, d)] = oriented(acc.simplify())
    return StratifiedFunction(pieces, ext.time_factor)


def pushforward_defects(ext: ExtensionResult, chain: BlowupChain,
                        transformed: Optional[StratifiedFunction] = None) -> Dict[int, RationalFunction]:
    """Per stratum ``Delta_d`` (d > k): closed form minus pushforward, restricted to the image."""
    path, k, n = chain.path, chain.k, chain.n
    tr = transformed or transform_solution(ext, chain)
    out = {}
    for d in range(k + 1, n + 1):
        img = image_stratum(chain, d)
        closed = tr[img] if img in tr else tr[transformed_domain(path)]
        bind = _tail_values(chain, d)
        bind.update(chart_bindings(img))
        out[d] = (closed.substitute(bind) - pushforward_piece(chain, ext.piece(d), d)).simplify()
    return out


# -- face dictionary -------------------------------------------------------------

@dataclass
class _Cell:
    simplex: set
    cube: set
    fixed: Dict[int, int]


def _step_forward(cell: _Cell, st: BlowupChart, convention: bool) -> None:
    s, r = st.sigma, st.rho
    J = cell.simplex
    z = st.rho_at_zero
    if s in J and r not in J:
        cell.fixed[r] = z
    elif s not in J and r in J:
        J.discard(r)
        J.add(s)
        cell.fixed[r] = 1 - z
    elif s in J and r in J:
        J.discard(r)
        cell.cube.add(r)
    elif convention:
        cell.fixed[r] = z
    else:
        raise NoSmoothImage(f"the face meets the blown-up locus p{s} + p{r} = 0")


def _step_inverse(cell: _Cell, st: BlowupChart, convention: bool) -> None:
    s, r = st.sigma, st.rho
    J = cell.simplex
    z = st.rho_at_zero
    if s not in J:
        if convention and cell.fixed.get(r) == z:
            del cell.fixed[r]
            return
        raise NoSmoothImage(f"the cell lies on the additional face p~{s} = 0")
    if r in cell.cube:
        cell.cube.discard(r)
        J.add(r)
    elif cell.fixed.get(r) == z:
        del cell.fixed[r]
    else:
        del cell.fixed[r]
        J.discard(s)
        J.add(r)


def _steps_of(obj) -> Tuple[Tuple[BlowupChart, ...], Optional[int]]:
    """Charts and, for chains with base dimension 0, the axis ``i_1``."""
    if isinstance(obj, BlowupChart):
        return (obj,), None
    return obj.steps, (obj.path.i(1) if obj.k == 0 else None)


def _as_stratum(cell: _Cell, n: int, ambient: set, axis: Optional[int]) -> Stratum:
    fixed = dict(cell.fixed)
    J = set(cell.simplex)
    cube = set(cell.cube)
    if axis is not None:
        if J == {0, axis}:
            cube.add(axis)
        elif J == {0}:
            fixed[axis] = 0
        elif J == {axis}:
            fixed[axis] = 1
        else:
            raise BlowupError("unexpected simplex factor for base dimension 0")
        return cube_face(n, cube, fixed)
    for i in ambient:
        if i != 0 and i not in J:
            fixed[i] = 0
    return Stratum(PRODUCT, n, simplex=tuple(J), cube=tuple(cube), fixed=tuple(fixed.items()))


def map_face(obj, face: Stratum, convention: bool = False) -> Stratum:
    """Image of a simplex face under a chart or a chain.

    Faces that meet the blown-up locus raise :class:`NoSmoothImage` unless
    ``convention`` is set, in which case the boundary value ``p~^rho = 0`` of a
    degenerate step is used.
    """
    if face.kind != SIMPLEX_FACE:
        raise BlowupError("map_face expects a simplex face")
    steps, axis = _steps_of(obj)
    n = face.n
    cell = _Cell(set(face.simplex), set(), {})
    ambient = set(range(n + 1))
    for st in steps:
        _step_forward(cell, st, convention)
        ambient.discard(st.rho)
    return _as_stratum(cell, n, ambient, axis)


def map_face_inverse(obj, cell_stratum: Stratum, convention: bool = False) -> Stratum:
    """Preimage simplex face of a cell of the blown-up domain."""
    steps, axis = _steps_of(obj)
    n = cell_stratum.n
    if cell_stratum.boxtimes:
        raise NoSmoothImage("additional faces have no preimage")
    fixed = dict(cell_stratum.fixed)
    cube = set(cell_stratum.cube)
    J = set(cell_stratum.simplex)
    ambient = set(range(n + 1)) - {st.rho for st in steps}
    if axis is not None:
        if axis in cube:
            cube.discard(axis)
            J = {0, axis}
        elif fixed.get(axis) == 0:
            del fixed[axis]
            J = {0}
        elif fixed.get(axis) == 1:
            del fixed[axis]
            J = {axis}
        else:
            raise BlowupError(f"axis {axis} has no value")
    for i in list(fixed):
        if i in ambient:
            if fixed[i] != 0:
                raise BlowupError(f"simplex coordinate {i} fixed at 1")
            del fixed[i]
    cell = _Cell(J, cube, fixed)
    for st in reversed(steps):
        _step_inverse(cell, st, convention)
    if cell.cube or cell.fixed:
        raise BlowupError("cell does not belong to the blown-up domain")
    return simplex_face(n, cell.simplex)


# -- numerics ---------------------------------------------------------------------

def _points(x, n: int) -> np.ndarray:
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.shape[-1] != n:
        raise BlowupError(f"points need {n} coordinates")
    return a


def forward_points(obj, x, n: int, eps: float = EPS_GEOM) -> np.ndarray:
    """Apply a chart or chain to rows of ``(p^1, ..., p^n)``."""
    steps, _ = _steps_of(obj)
    a = _points(x, n).copy()
    for st in steps:
        s, r = a[:, st.sigma - 1], a[:, st.rho - 1]
        tot = s + r
        if np.any(tot <= eps):
            raise NoSmoothImage(f"point on the blown-up locus p{st.sigma} + p{st.rho} = 0")
        num = s if st.flipped else r
        a[:, st.rho - 1] = num / tot
        a[:, st.sigma - 1] = tot
    return a


def inverse_points(obj, x, n: int) -> np.ndarray:
    steps, _ = _steps_of(obj)
    a = _points(x, n).copy()
    for st in reversed(steps):
        s, r = a[:, st.sigma - 1].copy(), a[:, st.rho - 1].copy()
        give = (1 - r) if st.flipped else r
        a[:, st.rho - 1] = s * give
        a[:, st.sigma - 1] = s * (1 - give)
    return a
