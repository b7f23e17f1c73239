"""Pathwise extension of a base solution from a face Delta_k up to Delta_n.

Along a path ``(i_k, ..., i_n)`` the piece on ``Delta_d^(I_d)`` is

    u(pi(p)) * prod_{j=k}^{d-1} p^{i_j} / (p^{i_j} + ... + p^{i_d})

where ``pi`` collects the mass of ``i_k, ..., i_d`` on ``i_k``.  Pieces are kept
in the ambient coordinates ``p^0..p^n`` (with ``p^0`` as a symbol); operators
restrict them to the chart of each face.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import PoleError, RationalFunction, StratifiedFunction, const, parse, to_fmpq, var
from .geometry import GeometryError, OrderedPath, Stratum, simplex_face
from .operators import apply_operator, simplex_operator, to_chart

EPS_BND = 1e-7
OFFSETS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)

DEFAULT_PARAMS = {"a": 0.3, "b": 0.7, "c": 1.0}


class ExtensionError(GeometryError):
    pass


def residual(piece: RationalFunction, face: Stratum, lam) -> RationalFunction:
    """``L* piece + lam * piece`` on the chart of ``face``."""
    spec = simplex_operator(face.n, face)
    out = apply_operator(spec, piece)
    if lam:
        out = out + to_chart(piece, face) * to_fmpq(lam)
    return out.simplify()


@dataclass(frozen=True)
class BaseSolution:
    stratum: Stratum
    piece: RationalFunction
    time_factor: object = 0
    check: bool = True

    def __post_init__(self):
        object.__setattr__(self, "time_factor", to_fmpq(self.time_factor))
        if self.stratum.simplex_dim == 0:
            if self.piece.coordinates():
                raise ExtensionError("a base solution on a vertex must be constant")
        elif self.check and not residual(self.piece, self.stratum, self.time_factor).is_zero():
            raise ExtensionError(f"{self.piece} does not solve the equation on {self.stratum.label()}")


def vanishes_on_boundary(base: BaseSolution) -> bool:
    """True when the base piece is zero on every facet of its face.

    Only such bases extend to candidates that vanish on the remaining facets.
    """
    J = base.stratum.simplex
    if len(J) < 2:
        return True
    for m in J:
        facet = simplex_face(base.stratum.n, [i for i in J if i != m])
        if not to_chart(base.piece.substitute({m: const(0)}), facet).is_zero():
            return False
    return True


@dataclass(frozen=True)
class ExtensionResult:
    path: OrderedPath
    pieces: StratifiedFunction

    def piece(self, d: int) -> RationalFunction:
        return self.pieces[simplex_face(self.path.n, self.path.index_set(d))]

    @property
    def time_factor(self):
        return self.pieces.time_factor


# -- catalog ---------------------------------------------------------------

def vertex_constant(path: OrderedPath, symbol: str = "c") -> BaseSolution:
    if path.k != 0:
        raise ExtensionError("a vertex constant needs a path of base dimension 0")
    return BaseSolution(simplex_face(path.n, path.index_set(0)), var(symbol))


def affine_base(path: OrderedPath, index: Optional[int] = None) -> BaseSolution:
    """Stationary ``a + b p^x`` on ``Delta_k^(I_k)`` (``x`` defaults to ``i_k``)."""
    x = path.i(path.k) if index is None else index
    face = simplex_face(path.n, path.index_set(path.k))
    if x not in face.simplex:
        raise ExtensionError(f"p{x} is not a coordinate of {face.label()}")
    return BaseSolution(face, var("a") + var("b") * var(x))


def eigen_base(path: OrderedPath, i: int, j: int) -> BaseSolution:
    """``p^i p^j`` on ``Delta_k^(I_k)``; it satisfies ``L* u = -u``."""
    face = simplex_face(path.n, path.index_set(path.k))
    if i == j or i not in face.simplex or j not in face.simplex:
        raise ExtensionError(f"need two distinct vertices of {face.label()}")
    return BaseSolution(face, var(i) * var(j), 1)


def catalog(path: OrderedPath) -> List[Tuple[str, BaseSolution]]:
    """Closed-form base solutions attached to the base face of ``path``."""
    if path.k == 0:
        return [("vertex", vertex_constant(path))]
    out = []
    if path.k == 1:
        out.append(("affine", affine_base(path)))
    J = path.index_set(path.k)
    for i, j in itertools.combinations(J, 2):
        out.append((f"eigen{i}{j}", eigen_base(path, i, j)))
    return out


# -- construction ------------------------------------------------------------

def project_pi(path: OrderedPath, d: int) -> Dict[int, RationalFunction]:
    k = path.k
    if not k <= d <= path.n:
        raise ExtensionError(f"d={d} outside {k}..{path.n}")
    if d == k:
        return {}
    total = const(0)
    for l in range(k, d + 1):
        total = total + var(path.i(l))
    out = {path.i(k): total}
    for l in range(k + 1, d + 1):
        out[path.i(l)] = const(0)
    return out


def _weight(path: OrderedPath, d: int) -> RationalFunction:
    k = path.k
    out = const(1)
    full = set(path.index_set(d))
    for j in range(k, d):
        idx = [path.i(l) for l in range(j, d + 1)]
        num = var(path.i(j))
        if j == k and set(idx) == full:
            out = out * num
            continue
        den = const(0)
        for i in idx:
            den = den + var(i)
        out = out * (num / den)
    return out


def extend_along_path(base: BaseSolution, path: OrderedPath) -> ExtensionResult:
    n = path.n
    if base.stratum != simplex_face(n, path.index_set(path.k)):
        raise ExtensionError("the base solution does not live on the base face of the path")
    pieces = {base.stratum: base.piece}
    for d in range(path.k + 1, n + 1):
        u = base.piece.substitute(project_pi(path, d))
        pieces[simplex_face(n, path.index_set(d))] = (u * _weight(path, d)).simplify()
    return ExtensionResult(path, StratifiedFunction(pieces, base.time_factor))


def extend_final_condition(f_base: RationalFunction, path: OrderedPath) -> StratifiedFunction:
    base = BaseSolution(simplex_face(path.n, path.index_set(path.k)), f_base, 0, check=False)
    return extend_along_path(base, path).pieces


def superpose(items: Iterable[Tuple[BaseSolution, OrderedPath]]) -> StratifiedFunction:
    """Sum of several path extensions; pieces on a shared stratum are added.

    All items must share the same time factor.
    """
    pieces: Dict[Stratum, RationalFunction] = {}
    lam = None
    for base, path in items:
        ext = extend_along_path(base, path)
        if lam is None:
            lam = ext.time_factor
        elif lam != ext.time_factor:
            raise ExtensionError("superposition needs a common time factor")
        for s, f in ext.pieces.pieces.items():
            pieces[s] = (pieces[s] + f).simplify() if s in pieces else f
    return StratifiedFunction(pieces, lam or 0)


# -- constraint checks -------------------------------------------------------

@dataclass
class ConstraintReport:
    entries: List[dict] = field(default_factory=list)

    def add(self, **kw):
        self.entries.append(kw)

    @property
    def ok(self) -> bool:
        return all(e["status"] == "pass" for e in self.entries if e["check"] != "incompatibility")

    def failures(self) -> List[dict]:
        return [e for e in self.entries if e["status"] == "fail"]

    def incompatibilities(self) -> List[str]:
        return sorted({e["facet"] for e in self.entries
                       if e["check"] == "incompatibility" and e["status"] == "flagged"})


def _values(point_full: np.ndarray) -> Dict[int, float]:
    """``point_full`` holds barycentric coordinates ``p^0..p^n``."""
    return {i: float(v) for i, v in enumerate(point_full)}


def radial_limit(f: RationalFunction, q: np.ndarray, target: np.ndarray,
                 params: Mapping, offsets: Sequence[float] = OFFSETS) -> Tuple[float, float]:
    """Limit of ``f`` at ``q`` along the segment towards ``target`` (barycentric).

    Returns the extrapolated limit and the spread between the last two
    extrapolants, a consistency measure.
    """
    vals = []
    for h in offsets:
        x = (1 - h) * q + h * target
        vals.append(f.evaluate(_values(x), params))
    # two-point extrapolation for a function smooth in h, ratio 10
    ext = [(10 * vals[i + 1] - vals[i]) / 9 for i in range(len(vals) - 1)]
    return ext[-1], abs(ext[-1] - ext[-2])


def _random_bary(rng: np.random.Generator, n: int, support: Sequence[int]) -> np.ndarray:
    w = rng.dirichlet(np.ones(len(support)))
    x = np.zeros(n + 1)
    for i, v in zip(support, w):
        x[i] = v
    return x


def check_extension_constraints(candidate: StratifiedFunction, path: OrderedPath,
                                samples: int = 8, seed: int = 0,
                                params: Optional[Mapping] = None,
                                tol: float = EPS_BND) -> ConstraintReport:
    params = dict(DEFAULT_PARAMS if params is None else params)
    rng = np.random.default_rng(seed)
    n, k = path.n, path.k
    rep = ConstraintReport()
    lam = candidate.time_factor
    for d in range(k, n + 1):
        Id = path.index_set(d)
        face = simplex_face(n, Id)
        piece = candidate[face]
        if d > k:
            r = residual(piece, face, lam)
            rep.add(d=d, check="residual", facet=face.label(),
                    status="pass" if r.is_zero() else "fail", metric=0.0 if r.is_zero() else 1.0)
        if d == k:
            continue
        prev = candidate[simplex_face(n, path.index_set(d - 1))]
        for m in Id:
            support = [i for i in Id if i != m]
            target = np.zeros(n + 1)
            target[m] = 1.0
            worst = 0.0
            for _ in range(samples):
                q = _random_bary(rng, n, support)
                lim, _ = radial_limit(piece, q, target, params)
                want = prev.evaluate(_values(q), params) if m == path.i(d) else 0.0
                worst = max(worst, abs(lim - want))
            rep.add(d=d, check="boundary", facet=simplex_face(n, support).label(),
                    status="pass" if worst <= tol else "fail", metric=worst)
        for j in range(k, d - 1):
            Ij = path.index_set(j)
            worst = 0.0
            for _ in range(samples):
                q = _random_bary(rng, n, Ij)
                lims = []
                for l in range(j + 1, d + 1):
                    # lean towards p^{i_l} but stay inside the open face
                    t = np.zeros(n + 1)
                    t[list(Id)] = 0.5 / len(Id)
                    t[path.i(l)] += 0.5
                    lims.append(radial_limit(piece, q, t, params, OFFSETS[:3])[0])
                worst = max(worst, max(lims) - min(lims))
            rep.add(d=d, check="incompatibility", facet=simplex_face(n, Ij).label(),
                    status="flagged" if worst > tol else "compatible", metric=worst)
    return rep
