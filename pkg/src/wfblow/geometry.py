"""Strata of the simplex, the cube and the mixed simplex-times-cube products.

Points are plain sequences ``(p^1, ..., p^n)``; on the simplex side ``p^0`` is
always derived as ``1 - sum(p)``.  A :class:`Stratum` is an open cell described
by

* ``simplex``: vertex set ``J`` of an open simplex factor ``Delta^(J)``, i.e.
  the indices whose barycentric coordinate is positive (may contain 0),
* ``cube``: free cube axes, each ranging over the open interval (0, 1),
* ``fixed``: coordinates pinned to 0 or 1,
* ``boxtimes``: cube axes that range over [0, 1] but may not all vanish.

Every index ``1..n`` lives in exactly one of: the non-derived part of the
simplex factor, ``cube``, ``fixed`` or ``boxtimes``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

EPS_GEOM = 1e-12

SIMPLEX_FACE = "simplex-face"
CUBE_FACE = "cube-face"
PRODUCT = "product"
ADDITIONAL_FACE = "additional-face"
KINDS = (SIMPLEX_FACE, CUBE_FACE, PRODUCT, ADDITIONAL_FACE)


class GeometryError(ValueError):
    pass


class ClassificationError(GeometryError):
    pass


@dataclass(frozen=True, order=True)
class IndexSet:
    members: Tuple[int, ...]
    primed: bool = False

    def __post_init__(self):
        m = tuple(sorted(self.members))
        if len(set(m)) != len(m):
            raise GeometryError(f"repeated index in {self.members}")
        if any(i < 0 for i in m):
            raise GeometryError(f"negative index in {self.members}")
        if self.primed and 0 in m:
            raise GeometryError("a primed index set cannot contain 0")
        object.__setattr__(self, "members", m)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return i in self.members


@dataclass(frozen=True)
class OrderedPath:
    """Ordered indices ``(i_k, ..., i_n)`` of an extension path with base dimension k."""

    indices: Tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(set(idx)) != len(idx):
            raise GeometryError(f"path {idx} repeats an index")
        if any(not 0 <= i <= self.n for i in idx):
            raise GeometryError(f"path {idx} leaves 0..{self.n}")
        if not 1 <= len(idx) <= self.n + 1:
            raise GeometryError(f"path {idx} has invalid length for n={self.n}")
        if self.k == 0 and idx[0] != 0:
            raise GeometryError("a path with base dimension 0 must start at index 0")

    @classmethod
    def parse(cls, text: str, n: Optional[int] = None) -> "OrderedPath":
        idx = tuple(int(t) for t in text.replace(" ", "").split(",") if t != "")
        if not idx:
            raise GeometryError("empty path")
        if n is None:
            n = len(idx) - 1
        return cls(idx, n)

    @property
    def k(self) -> int:
        return self.n + 1 - len(self.indices)

    @property
    def base_dim(self) -> int:
        return self.k

    def i(self, j: int) -> int:
        """The path index ``i_j`` for ``k <= j <= n``."""
        if not self.k <= j <= self.n:
            raise GeometryError(f"i_{j} undefined for base dimension {self.k}")
        return self.indices[j - self.k]

    def index_set(self, d: int) -> Tuple[int, ...]:
        """``I_d = {0..n} minus {i_{d+1}, ..., i_n}``."""
        if not self.k <= d <= self.n:
            raise GeometryError(f"I_{d} undefined for base dimension {self.k}")
        drop = set(self.indices[d + 1 - self.k:])
        return tuple(i for i in range(self.n + 1) if i not in drop)

    def blowup_ok(self) -> bool:
        return 0 not in self.indices[1:]

    def __str__(self):
        return ",".join(map(str, self.indices))


def all_paths(n: int, k: Optional[int] = None) -> List[OrderedPath]:
    """Every ordered path in dimension n (optionally of fixed base dimension)."""
    out = []
    ks = range(n + 1) if k is None else [k]
    for kk in ks:
        for perm in itertools.permutations(range(n + 1), n - kk + 1):
            if kk == 0 and perm[0] != 0:
                continue
            out.append(OrderedPath(perm, n))
    return out


def derived_index(J: Iterable[int]) -> Optional[int]:
    """Coordinate eliminated through the simplex constraint on ``Delta^(J)``."""
    J = tuple(sorted(J))
    if not J:
        return None
    return 0 if J[0] == 0 else J[0]


@dataclass(frozen=True)
class Stratum:
    kind: str
    n: int
    simplex: Tuple[int, ...] = ()
    cube: Tuple[int, ...] = ()
    fixed: Tuple[Tuple[int, int], ...] = ()
    boxtimes: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeometryError(f"unknown stratum kind {self.kind!r}")
        simplex = tuple(sorted(set(self.simplex)))
        cube = tuple(sorted(set(self.cube)))
        box = tuple(sorted(set(self.boxtimes)))
        fixed = tuple(sorted((int(i), int(v)) for i, v in dict(self.fixed).items()))
        object.__setattr__(self, "simplex", simplex)
        object.__setattr__(self, "cube", cube)
        object.__setattr__(self, "boxtimes", box)
        object.__setattr__(self, "fixed", fixed)
        fixed_idx = {i for i, _ in fixed}
        if any(v not in (0, 1) for _, v in fixed):
            raise GeometryError("fixed values must be 0 or 1")
        groups = [set(self.simplex_free), set(cube), fixed_idx, set(box)]
        seen = set()
        for g in groups:
            if g & seen:
                raise GeometryError(f"overlapping coordinate roles in {self}")
            seen |= g
        if 0 in seen:
            raise GeometryError("index 0 is never a stored coordinate")
        if self.kind == ADDITIONAL_FACE and not box:
            raise GeometryError("an additional face needs a boxtimes block")

    # -- derived views -----------------------------------------------------
    @property
    def derived(self) -> Optional[int]:
        return derived_index(self.simplex)

    @property
    def simplex_free(self) -> Tuple[int, ...]:
        d = self.derived
        return tuple(i for i in self.simplex if i != d)

    @property
    def free(self) -> Tuple[int, ...]:
        """Independent chart coordinates of the open cell."""
        return tuple(sorted(self.simplex_free + self.cube))

    @property
    def fixed_map(self) -> Dict[int, int]:
        return dict(self.fixed)

    @property
    def dim(self) -> int:
        return len(self.free)

    @property
    def simplex_dim(self) -> int:
        return len(self.simplex) - 1 if self.simplex else 0

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "free": list(self.free),
            "fixed": {str(i): v for i, v in self.fixed},
            "boxtimes": list(self.boxtimes),
            "simplex": list(self.simplex),
            "cube": list(self.cube),
        }

    @classmethod
    def from_json(cls, data: Mapping, n: int) -> "Stratum":
        return cls(
            kind=data["kind"], n=n,
            simplex=tuple(data.get("simplex", ())),
            cube=tuple(data.get("cube", ())),
            fixed=tuple((int(k), int(v)) for k, v in data.get("fixed", {}).items()),
            boxtimes=tuple(data.get("boxtimes", ())),
        )

    def label(self) -> str:
        parts = []
        if self.simplex:
            parts.append("D" + str(len(self.simplex) - 1) + "{" + ",".join(map(str, self.simplex)) + "}")
        if self.cube:
            parts.append("C{" + ",".join(map(str, self.cube)) + "}")
        cube_fixed = [(i, v) for i, v in self.fixed]
        if cube_fixed:
            parts.append(",".join(f"p{i}={v}" for i, v in cube_fixed))
        if self.boxtimes:
            parts.append("X{" + ",".join(map(str, self.boxtimes)) + "}")
        return " x ".join(parts) if parts else "pt"

    def __str__(self):
        return json.dumps(self.to_json(), sort_keys=True)

    # -- membership ----------------------------------------------------------
    def contains(self, point: Sequence[float], eps: float = EPS_GEOM) -> bool:
        """Open-cell membership with boundary snapping."""
        x = _coords(point, self.n)
        for i, v in self.fixed:
            if abs(x[i] - v) > eps:
                return False
        for i in self.cube:
            if not eps < x[i] < 1 - eps:
                return False
        if self.boxtimes:
            vals = [x[i] for i in self.boxtimes]
            if any(v < -eps or v > 1 + eps for v in vals) or max(vals) <= eps:
                return False
        if self.simplex:
            p0 = 1.0 - sum(x[i] for i in self.simplex if i != 0)
            for i in self.simplex:
                v = p0 if i == 0 else x[i]
                if v <= eps:
                    return False
            if 0 not in self.simplex and abs(p0) > eps:
                return False
        return True

    def closure_contains(self, point: Sequence[float], eps: float = EPS_GEOM) -> bool:
        x = _coords(point, self.n)
        for i, v in self.fixed:
            if abs(x[i] - v) > eps:
                return False
        for i in self.cube + self.boxtimes:
            if not -eps <= x[i] <= 1 + eps:
                return False
        if self.boxtimes and max(x[i] for i in self.boxtimes) <= eps:
            return False
        if self.simplex:
            p0 = 1.0 - sum(x[i] for i in self.simplex if i != 0)
            if any((p0 if i == 0 else x[i]) < -eps for i in self.simplex):
                return False
            if 0 not in self.simplex and abs(p0) > eps:
                return False
        return True


def _coords(point: Sequence[float], n: int) -> List[float]:
    """1-based coordinate list with the derived p^0 in slot 0."""
    pt = [float(v) for v in point]
    if len(pt) != n:
        raise GeometryError(f"point has {len(pt)} coordinates, expected {n}")
    return [1.0 - sum(pt)] + pt


def simplex_face(n: int, J: Iterable[int]) -> Stratum:
    J = tuple(sorted(set(J)))
    if not J:
        raise GeometryError("a simplex face needs at least one vertex")
    if any(not 0 <= i <= n for i in J):
        raise GeometryError(f"vertex set {J} outside 0..{n}")
    fixed = tuple((i, 0) for i in range(1, n + 1) if i not in J)
    return Stratum(SIMPLEX_FACE, n, simplex=J, fixed=fixed)


def cube_face(n: int, free: Iterable[int], fixed: Mapping[int, int]) -> Stratum:
    free = tuple(sorted(free))
    if set(free) | set(fixed) != set(range(1, n + 1)) or set(free) & set(fixed):
        raise GeometryError("cube face must assign every axis 1..n exactly once")
    return Stratum(CUBE_FACE, n, cube=free, fixed=tuple(fixed.items()))


def enumerate_faces(n: int, k: int, domain_kind: str) -> List[Stratum]:
    """All open k-dimensional faces of the closed simplex or cube, canonical order."""
    if not 0 <= k <= n:
        raise GeometryError(f"face dimension {k} outside 0..{n}")
    out = []
    if domain_kind == "simplex":
        for J in itertools.combinations(range(n + 1), k + 1):
            out.append(simplex_face(n, J))
    elif domain_kind == "cube":
        for free in itertools.combinations(range(1, n + 1), k):
            rest = [i for i in range(1, n + 1) if i not in free]
            for vals in itertools.product((0, 1), repeat=len(rest)):
                out.append(cube_face(n, free, dict(zip(rest, vals))))
    else:
        raise GeometryError(f"unknown domain kind {domain_kind!r}")
    return out


def classify_point(point: Sequence[float], n: int, domain_kind: str,
                   eps: float = EPS_GEOM) -> Stratum:
    """The unique open stratum of the closed simplex or cube containing ``point``."""
    x = _coords(point, n)
    if not all(np.isfinite(x)):
        raise ClassificationError("non-finite coordinate")
    if domain_kind == "simplex":
        if any(v < -eps for v in x):
            raise ClassificationError(f"point {tuple(point)} lies outside the simplex")
        return simplex_face(n, [i for i in range(n + 1) if x[i] > eps])
    if domain_kind == "cube":
        free, fixed = [], {}
        for i in range(1, n + 1):
            v = x[i]
            if v < -eps or v > 1 + eps:
                raise ClassificationError(f"point {tuple(point)} lies outside the cube")
            if v <= eps:
                fixed[i] = 0
            elif v >= 1 - eps:
                fixed[i] = 1
            else:
                free.append(i)
        return cube_face(n, free, fixed)
    raise GeometryError(f"unknown domain kind {domain_kind!r}")


def classify_product(point: Sequence[float], n: int, ambient: Iterable[int],
                     cube_axes: Iterable[int], eps: float = EPS_GEOM) -> Stratum:
    """Classify a point of ``closed Delta^(ambient) x closed cube``.

    Points on the excluded blow-up locus are still classified; callers decide
    whether the cell belongs to the image.
    """
    x = _coords(point, n)
    ambient = tuple(sorted(ambient))
    cube_axes = tuple(sorted(cube_axes))
    p0 = 1.0 - sum(x[i] for i in ambient if i != 0)
    simp = []
    for i in ambient:
        v = p0 if i == 0 else x[i]
        if v < -eps:
            raise ClassificationError(f"point {tuple(point)} leaves the simplex factor")
        if v > eps:
            simp.append(i)
    fixed = {i: 0 for i in ambient if i != 0 and i not in simp}
    free = []
    for i in cube_axes:
        v = x[i]
        if v < -eps or v > 1 + eps:
            raise ClassificationError(f"point {tuple(point)} leaves the cube factor")
        if v <= eps:
            fixed[i] = 0
        elif v >= 1 - eps:
            fixed[i] = 1
        else:
            free.append(i)
    for i in range(1, n + 1):
        if i not in ambient and i not in cube_axes and abs(x[i]) > eps:
            raise ClassificationError(f"coordinate {i} should vanish")
        if i not in ambient and i not in cube_axes:
            fixed[i] = 0
    kind = PRODUCT if simp and free else (CUBE_FACE if not simp else PRODUCT)
    return Stratum(kind, n, simplex=tuple(simp), cube=tuple(free), fixed=tuple(fixed.items()))


def product_domain(path: OrderedPath) -> Stratum:
    """Open ``Delta_{k+1}^(I_{k+1}) x cube`` produced by the full chain for ``path``."""
    k, n = path.k, path.n
    J = path.index_set(k + 1)
    axes = tuple(path.i(j) for j in range(k + 2, n + 1))
    fixed = tuple((i, 0) for i in range(1, n + 1) if i not in J and i not in axes)
    return Stratum(PRODUCT, n, simplex=J, cube=axes, fixed=fixed)


def additional_faces(path: OrderedPath, n: Optional[int] = None) -> List[Stratum]:
    """The faces N_{k+1}, ..., N_{n-1} in the disjoint formulation.

    For base dimension 0 the simplex factor ``Delta_1^({0, i_1})`` is written as
    the cube axis ``i_1``.
    """
    n = path.n if n is None else n
    if n != path.n:
        raise GeometryError("path dimension mismatch")
    k = path.k
    if n - k < 2:
        return []
    ax = [path.i(j) for j in range(k + 1, n + 1)]
    out = []
    for j in range(k + 1, n):
        box = tuple(path.i(l) for l in range(j + 1, n + 1))
        pre = tuple(path.i(l) for l in range(k + 2, j))
        fixed = {path.i(j): 0}
        if k == 0:
            cube = tuple(path.i(l) for l in range(1, j))
            out.append(Stratum(ADDITIONAL_FACE, n, cube=cube, fixed=tuple(fixed.items()),
                               boxtimes=box))
            continue
        if j == k + 1:
            J = path.index_set(k)
        else:
            J = path.index_set(k + 1)
        for i in range(1, n + 1):
            if i not in J and i not in ax:
                fixed[i] = 0
        out.append(Stratum(ADDITIONAL_FACE, n, simplex=J, cube=pre,
                           fixed=tuple(fixed.items()), boxtimes=box))
    return out


def in_closed_additional_face(point: Sequence[float], path: OrderedPath,
                              eps: float = EPS_GEOM) -> bool:
    """Membership in the union of the closed faces N_j (the excluded set)."""
    x = _coords(point, path.n)
    k, n = path.k, path.n
    for j in range(k + 1, n):
        if abs(x[path.i(j)]) <= eps and any(x[path.i(l)] > eps for l in range(j + 1, n + 1)):
            return True
    return False


def grid_points_simplex(n: int, J: Sequence[int], N: int) -> np.ndarray:
    """Interior nodes (multiples of 1/N) of the open face ``Delta^(J)`` as an (m, n) array."""
    d = derived_index(J)
    free = [i for i in sorted(J) if i != d]
    if not free:
        return np.zeros((0, n))
    pts = []
    for combo in itertools.product(range(1, N), repeat=len(free)):
        if sum(combo) < N:
            pts.append(combo)
    arr = np.zeros((len(pts), n))
    if not pts:
        return arr
    vals = np.array(pts, dtype=float) / N
    for col, i in enumerate(free):
        arr[:, i - 1] = vals[:, col]
    if d != 0:
        arr[:, d - 1] = 1.0 - vals.sum(axis=1)
    return arr
