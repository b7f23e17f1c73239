"""Numerical checks: finite-difference residual oracle, face-by-face restriction
checks and the hierarchical Dirichlet solver on the cube.

The finite-difference oracle never differentiates symbolically.  It evaluates
the function on centred stencils in extended precision; the stencil width at a
node shrinks with the distance to the boundary of the cell (pieces of extended
solutions are steep near lower strata) and one Richardson step removes the
leading truncation term.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import RationalFunction, StratifiedFunction, const, to_fmpq, var
from .blowup import make_chain, forward_points, transform_solution
from .extension import DEFAULT_PARAMS, extend_along_path, radial_limit, vertex_constant
from .geometry import (
    CUBE_FACE, GeometryError, OrderedPath, Stratum, cube_face, enumerate_faces, simplex_face,
)
from .operators import (
    SIMPLEX_L, TRANSFORMED, OperatorSpec, apply_operator, in_closure, restrict_operator,
    to_chart, transformed_domain, transformed_operator,
)

LD = np.longdouble
TOL_FD = 1e-8
TOL_FACE = 1e-9
TOL_SOLVE = 1e-11
DIRECT_LIMIT = 20000
BRUTE_OFFSETS = (1e-3, 1e-4, 1e-5, 1e-6)
# stencil width at most (distance to the cell boundary) / WIDTH_RATIO
WIDTH_RATIO = 64
RICHARDSON_LEVELS = 2


class HarnessError(RuntimeError):
    pass


class DirichletSetupError(HarnessError):
    pass


class SolverError(HarnessError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


# -- grids -------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of spacing ``1/N`` on an open cell.

    ``max_nodes`` caps the number of interior nodes visited by the residual
    oracle; larger node sets are subsampled with ``seed``.
    """

    stratum: Stratum
    N: int
    max_nodes: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.N < 4:
            raise GeometryError("grids need N >= 4")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.stratum.free

    def node_count(self) -> int:
        s = len(self.stratum.simplex_free)
        c = len(self.stratum.cube)
        return math.comb(self.N - 1, s) * (self.N - 1) ** c

    def nodes(self) -> np.ndarray:
        """Interior nodes as rows of ``(p^1, ..., p^n)``."""
        st, N = self.stratum, self.N
        sfree = list(st.simplex_free)
        cube = list(st.cube)
        total = self.node_count()
        if self.max_nodes is None or total <= self.max_nodes:
            simp = np.array(list(itertools.combinations(range(1, N), len(sfree))), dtype=np.int64)
            simp = simp.reshape(len(simp), len(sfree))
            simp = np.diff(np.concatenate([np.zeros((len(simp), 1), np.int64), simp], axis=1), axis=1)
            cub = np.array(list(itertools.product(range(1, N), repeat=len(cube))), dtype=np.int64)
            cub = cub.reshape(len(cub), len(cube))
            ia = np.repeat(np.arange(len(simp)), len(cub))
            ib = np.tile(np.arange(len(cub)), len(simp))
            simp, cub = simp[ia], cub[ib]
        else:
            rng = np.random.default_rng(self.seed)
            m = self.max_nodes
            cuts = np.sort(np.argsort(rng.random((m, N - 1)), axis=1)[:, :len(sfree)] + 1, axis=1)
            simp = np.diff(np.concatenate([np.zeros((m, 1), np.int64), cuts], axis=1), axis=1)
            cub = rng.integers(1, N, size=(m, len(cube)))
        out = np.zeros((len(simp), st.n))
        for i, v in st.fixed:
            out[:, i - 1] = v
        for col, i in enumerate(sfree):
            out[:, i - 1] = simp[:, col] / N
        for col, i in enumerate(cube):
            out[:, i - 1] = cub[:, col] / N
        d = st.derived
        if d not in (None, 0):
            out[:, d - 1] = 1.0 - out[:, [i - 1 for i in sfree]].sum(axis=1) if sfree else 1.0
        return out


def _boundary_distance(st: Stratum, x: np.ndarray) -> np.ndarray:
    """Distance (in the max norm of chart coordinates) to the boundary of the cell."""
    parts = [np.full(len(x), np.inf)]
    if st.simplex_free:
        sf = [i - 1 for i in st.simplex_free]
        parts.append(x[:, sf].min(axis=1))
        parts.append((1.0 - x[:, sf].sum(axis=1)) / 2)
    if st.cube:
        c = x[:, [i - 1 for i in st.cube]]
        parts.append(np.minimum(c, 1 - c).min(axis=1))
    return np.min(np.vstack(parts), axis=0)


# -- residual oracle --------------------------------------------------------------

@dataclass
class FDResult:
    max_residual: float
    nodes: int
    skipped: int
    rows: List[Tuple] = field(default_factory=list)

    def csv(self, names: Sequence[str]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(names) + ["residual"])
        for r in self.rows:
            w.writerow([repr(float(v)) for v in r])
        return buf.getvalue()


def piece_for(u, stratum: Stratum) -> RationalFunction:
    """The piece of ``u`` that governs the open cell ``stratum``."""
    if isinstance(u, RationalFunction):
        return u
    if stratum in u:
        return u[stratum]
    for s in u.strata():
        if s in u.closed and in_closure(s, stratum):
            return u[s]
    raise HarnessError(f"no piece of the function covers {stratum.label()}")


def _eval(f: RationalFunction, x: np.ndarray, free: Sequence[int], params) -> np.ndarray:
    point = {i: x[:, i - 1] for i in free}
    vals, _ = f.evaluate_array(point, params, dtype=LD)
    return np.asarray(vals, dtype=LD)


def _apply_fd(f, terms, free, x, deltas, params):
    """``1/2 sum a^{ij} D_ij f`` with centred differences, one result per width.

    ``deltas`` is a list of per-node width arrays; all stencils are evaluated in
    a single batch.
    """
    m = len(x)
    diag = [i for i in free if (i, i) in terms]
    off = [(i, j) for i, j in itertools.combinations(free, 2) if (i, j) in terms]
    shifts = []
    for i in diag:
        shifts += [((i, 1),), ((i, -1),)]
    for i, j in off:
        shifts += [((i, a), (j, b)) for a in (1, -1) for b in (1, -1)]
    L = len(deltas)
    big = np.repeat(x[None, :, :], 1 + L * len(shifts), axis=0).astype(LD)
    for lev, delta in enumerate(deltas):
        for s, sh in enumerate(shifts):
            for i, sgn in sh:
                big[1 + lev * len(shifts) + s, :, i - 1] += sgn * delta
    vals = _eval(f, big.reshape(-1, x.shape[1]), free, params).reshape(len(big), m)
    c = vals[0]
    outs = []
    for lev, delta in enumerate(deltas):
        at = {sh: vals[1 + lev * len(shifts) + s] for s, sh in enumerate(shifts)}
        d2 = delta * delta
        out = np.zeros(m, dtype=LD)
        for i in diag:
            out += 0.5 * terms[(i, i)] * (at[((i, 1),)] - 2 * c + at[((i, -1),)]) / d2
        for i, j in off:
            mixed = (at[((i, 1), (j, 1))] - at[((i, 1), (j, -1))]
                     - at[((i, -1), (j, 1))] + at[((i, -1), (j, -1))]) / (4 * d2)
            out += terms[(i, j)] * mixed
        outs.append(out)
    return outs, c


def _richardson(levels):
    """Eliminate the ``delta^2``, ``delta^4``, ... terms of successive halvings."""
    cur = list(levels)
    k = 1
    while len(cur) > 1:
        w = 4 ** k
        cur = [(w * b - a) / (w - 1) for a, b in zip(cur, cur[1:])]
        k += 1
    return cur[0]


def fd_residual(u, spec: OperatorSpec, grid: GridSpec, params: Optional[Mapping] = None,
                keep_rows: bool = False, chunk: int = 4096) -> FDResult:
    """Max over interior nodes of ``|1/2 sum a^{ij} D_ij u + lam u|``.

    Nodes where the function or a coefficient hits a pole are skipped and counted.
    """
    if spec.kind not in (SIMPLEX_L, TRANSFORMED):
        raise HarnessError(f"no finite-difference oracle for {spec.kind}")
    st = spec.stratum
    if grid.stratum != st:
        raise HarnessError("grid and operator live on different cells")
    params = dict(DEFAULT_PARAMS if params is None else params)
    lam = float(u.time_factor) if isinstance(u, StratifiedFunction) else 0.0
    f = to_chart(piece_for(u, st), st)
    free = list(st.free)
    x_all = grid.nodes()
    worst, skipped, rows = 0.0, 0, []
    terms_raw = spec.terms
    for lo in range(0, len(x_all), chunk):
        x = x_all[lo:lo + chunk]
        terms = {key: _eval(a, x, free, params) for key, a in terms_raw.items()}
        rho = _boundary_distance(st, x).astype(LD)
        delta = np.minimum(LD(grid.h), rho / WIDTH_RATIO)
        levels, c = _apply_fd(f, terms, free, x,
                              [delta / 2 ** lev for lev in range(RICHARDSON_LEVELS + 1)], params)
        res = _richardson(levels) + lam * c
        res = np.abs(res.astype(float))
        bad = ~np.isfinite(res)
        for a in terms.values():
            bad |= ~np.isfinite(np.asarray(a, dtype=float))
        skipped += int(bad.sum())
        ok = ~bad
        if ok.any():
            worst = max(worst, float(res[ok].max()))
        if keep_rows:
            for xi, r, b in zip(x, res, bad):
                if not b:
                    rows.append(tuple(xi[i - 1] for i in free) + (r,))
    return FDResult(worst, len(x_all) - skipped, skipped, rows)


# -- restriction checks -------------------------------------------------------------

@dataclass
class StemEntry:
    face: str
    dim: int
    maxind: Optional[int]
    surviving: Tuple[int, ...]
    residual: float
    status: str


def check_stem_lemma(u, path: OrderedPath, n: Optional[int] = None, N: int = 16,
                     tol: float = TOL_FACE, flips: Sequence[bool] = (),
                     params: Optional[Mapping] = None) -> List[StemEntry]:
    """Residual of the restricted transformed operator on every face of dimension 1..n-1."""
    n = path.n if n is None else n
    full = transformed_operator(path, flips)
    out = []
    for d in range(1, n):
        for face in enumerate_faces(n, d, "cube"):
            spec = restrict_operator(full, face)
            if spec.terms:
                r = fd_residual(u, spec, GridSpec(face, N), params).max_residual
            else:
                r = 0.0
            out.append(StemEntry(face.label(), d, spec.maxind, spec.surviving, r,
                                 "pass" if r <= tol else "fail"))
    return out


def brute_force_restriction(path: OrderedPath, face: Stratum, flips: Sequence[bool] = (),
                            samples: int = 3, seed: int = 0,
                            offsets: Sequence[float] = BRUTE_OFFSETS) -> Dict[str, object]:
    """Restricted diagonal coefficients found by approaching ``face`` numerically.

    The full transformed coefficients are evaluated at points whose fixed
    coordinates sit at distance ``h`` from their face values.  After dividing
    by the largest coefficient (multiplying the equation by the vanishing
    factors) the terms that stay of order one as ``h -> 0`` survive; their
    mutual ratios are compared with the rule-based restriction.
    """
    full = transformed_operator(path, flips)
    restricted = restrict_operator(full, face)
    free = list(face.cube)
    rng = np.random.default_rng(seed)
    survivors = set()
    ratio_err = 0.0
    decay = 0.0
    for _ in range(samples):
        q = rng.uniform(0.2, 0.8, size=len(free))
        norm_by_h = []
        for h in offsets:
            x = np.zeros((1, path.n))
            for i, v in face.fixed:
                x[0, i - 1] = h if v == 0 else 1 - h
            for col, i in enumerate(free):
                x[0, i - 1] = q[col]
            # exact evaluation: the coefficients reach 1/h^(n-1), far past the pole guard
            pt = {j: const(to_fmpq(x[0, j - 1])) for j in range(1, path.n + 1)}
            a = np.array([float(full.terms[(i, i)].substitute(pt).constant_value()) for i in free])
            norm_by_h.append(np.abs(a) / np.abs(a).max())
        last = norm_by_h[-1]
        found = {i for i, v in zip(free, last) if v > 1e-3}
        survivors |= found
        gone = [col for col, i in enumerate(free) if i not in found]
        if gone:
            decay = max(decay, float(last[gone].max()))
        rule = restricted.surviving
        if set(rule) == found and rule:
            pt = {i: np.array([q[col]]) for col, i in enumerate(free)}
            want = np.array([float(restricted.terms[(i, i)].evaluate_array(pt)[0][0]) for i in rule])
            got = np.array([last[free.index(i)] for i in rule])
            ratio_err = max(ratio_err, float(np.max(np.abs(got / got.max() - want / want.max()))))
    return {
        "face": face.label(),
        "brute": tuple(sorted(survivors)),
        "rule": restricted.surviving,
        "maxind": restricted.maxind,
        "ratio_error": ratio_err,
        "decay": decay,
        "match": tuple(sorted(survivors)) == restricted.surviving,
    }


# -- hierarchical Dirichlet solve ----------------------------------------------------

@dataclass
class DirichletProblem:
    """Stationary transformed equation on the unit cube.

    ``vertex_data`` maps 0/1 tuples (axes 1..n) to values.  ``boundary_data``
    optionally prescribes whole closed faces by exact functions; the remaining
    faces are solved level by level.  ``forcing`` is a right-hand side for the
    interior equation.
    """

    operator: OperatorSpec
    vertex_data: Mapping[Tuple[int, ...], float] = field(default_factory=dict)
    boundary_data: Mapping[Stratum, RationalFunction] = field(default_factory=dict)
    forcing: Optional[RationalFunction] = None

    @property
    def n(self) -> int:
        return self.operator.n


def origin_vertex_data(n: int, c: float) -> Dict[Tuple[int, ...], float]:
    return {v: (c if not any(v) else 0.0) for v in itertools.product((0, 1), repeat=n)}


def _cube_axes(n: int, N: int):
    return np.linspace(0.0, 1.0, N + 1)


def _face_index(face: Stratum, N: int):
    """Index arrays (into the full grid) of the closed face's nodes and the interior mask."""
    n = face.n
    ranges = []
    for i in range(1, n + 1):
        fm = face.fixed_map
        if i in fm:
            ranges.append(np.array([fm[i] * N]))
        else:
            ranges.append(np.arange(N + 1))
    return ranges


def _set_prescribed(U, known, problem: DirichletProblem, N: int):
    n = problem.n
    g = _cube_axes(n, N)
    for face, f in problem.boundary_data.items():
        if face.kind != CUBE_FACE:
            raise DirichletSetupError("boundary data must live on cube faces")
        ranges = _face_index(face, N)
        idx = np.meshgrid(*ranges, indexing="ij")
        pts = {i: g[idx[i - 1]].ravel() for i in range(1, n + 1)}
        vals, _ = f.evaluate_array(pts, DEFAULT_PARAMS)
        vals = np.broadcast_to(np.asarray(vals, float), idx[0].ravel().shape)
        flat = np.ravel_multi_index([a.ravel() for a in idx], U.shape)
        prev = known.ravel()[flat]
        clash = prev & (np.abs(U.ravel()[flat] - vals) > 1e-12)
        if clash.any():
            raise DirichletSetupError(f"boundary data disagree on shared nodes of {face.label()}")
        U.ravel()[flat] = vals
        known.ravel()[flat] = True


def _solve_face(U, known, spec: OperatorSpec, face: Stratum, N: int, forcing):
    """Fill the interior nodes of ``face`` by solving the restricted equation."""
    n = face.n
    free = list(face.cube)
    d = len(free)
    h = 1.0 / N
    m = (N - 1) ** d
    fm = face.fixed_map
    inner = np.arange(1, N)
    sub = np.meshgrid(*([inner] * d), indexing="ij")
    coords = {}
    full_idx = []
    for i in range(1, n + 1):
        if i in fm:
            full_idx.append(np.full(m, fm[i] * N))
        else:
            col = free.index(i)
            full_idx.append(sub[col].ravel())
            coords[i] = sub[col].ravel() * h
    lin = np.arange(m).reshape((N - 1,) * d) if d else np.zeros(())
    flat = np.ravel_multi_index(full_idx, U.shape)
    rows, cols, data = [], [], []
    rhs = np.zeros(m)
    diag = np.zeros(m)
    # Each surviving coefficient is x_c (1 - x_c) over factors of other axes, so
    # dividing the row by prod_c x_c (1 - x_c) leaves axis weights that are
    # constant along their own axis: the scaled matrix is symmetric.
    scale = np.ones(m)
    for c in spec.surviving:
        xc = coords[c]
        scale *= xc * (1 - xc)
    for c in spec.surviving:
        a, poles = spec.terms[(c, c)].evaluate_array(coords, DEFAULT_PARAMS)
        a = np.broadcast_to(np.asarray(a, float), (m,))
        if np.any(poles) or np.any(a <= 0):
            raise SolverError(f"coefficient of axis {c} degenerates inside {face.label()}")
        w = 0.5 * a / (h * h) / scale
        diag += 2 * w
        col = free.index(c)
        for step in (1, -1):
            nb = [ix.copy() for ix in full_idx]
            nb[c - 1] = nb[c - 1] + step
            nbflat = np.ravel_multi_index(nb, U.shape)
            pos = sub[col].ravel() + step
            interior = (pos >= 1) & (pos <= N - 1)
            shift = [s.ravel().copy() for s in sub]
            shift[col] = pos
            if interior.any():
                nbl = np.ravel_multi_index([s[interior] - 1 for s in shift], (N - 1,) * d)
                rows.append(np.arange(m)[interior])
                cols.append(nbl)
                data.append(-w[interior])
            bnd = ~interior
            if bnd.any():
                if not known.ravel()[nbflat[bnd]].all():
                    raise DirichletSetupError(f"missing trace next to {face.label()}")
                rhs[bnd] += w[bnd] * U.ravel()[nbflat[bnd]]
    if forcing is not None:
        fv, _ = forcing.evaluate_array(coords, DEFAULT_PARAMS)
        rhs -= np.broadcast_to(np.asarray(fv, float), (m,)) / scale
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    data.append(diag)
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(m, m))
    x = _linear_solve(A, rhs)
    U.ravel()[flat] = x
    known.ravel()[flat] = True


def _linear_solve(A, b):
    """Solve the symmetric positive definite face system to ``TOL_SOLVE``.

    Small systems use a sparse LU factorization; large ones conjugate
    gradients preconditioned by smoothed-aggregation multigrid, set up under a
    fixed RNG state so repeated runs agree bit for bit.
    """
    if len(b) == 0:
        return b
    A = A.tocsr()
    scale = max(1.0, float(np.abs(b).max()))
    if A.shape[0] <= DIRECT_LIMIT:
        x = spla.spsolve(A.tocsc(), b)
    else:
        import pyamg
        # the setup estimates spectral radii from the global legacy RNG
        saved = np.random.get_state()
        np.random.seed(0)
        try:
            ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
            x = ml.solve(b, tol=1e-14, accel="cg", maxiter=500)
        finally:
            np.random.set_state(saved)
    res = float(np.abs(A @ x - b).max()) / scale
    if not np.isfinite(res) or res > TOL_SOLVE:
        raise SolverError(f"linear solve reached relative residual {res:.3e}", res)
    return x


def solve_dirichlet_cube(problem: DirichletProblem, N: int) -> np.ndarray:
    """Grid function on ``(N+1)^n`` nodes solving the hierarchy vertices -> faces -> interior."""
    n = problem.n
    spec = problem.operator
    if spec.kind != TRANSFORMED or spec.path.k != 0:
        raise DirichletSetupError("the cube problem needs the transformed operator of a base-0 path")
    U = np.zeros((N + 1,) * n)
    known = np.zeros(U.shape, dtype=bool)
    _set_prescribed(U, known, problem, N)
    for v in itertools.product((0, 1), repeat=n):
        idx = tuple(N * t for t in v)
        if v in problem.vertex_data:
            val = float(problem.vertex_data[v])
            if known[idx] and abs(U[idx] - val) > 1e-12:
                raise DirichletSetupError(f"vertex {v} disagrees with boundary data")
            U[idx] = val
            known[idx] = True
        elif not known[idx]:
            raise DirichletSetupError(f"no value for vertex {v}")
    full = transformed_operator(spec.path, spec.flips)
    for d in range(1, n + 1):
        for face in enumerate_faces(n, d, "cube"):
            ranges = _face_index(face, N)
            sel = np.ix_(*[r if len(r) == 1 else r[1:-1] for r in ranges])
            if known[sel].all():
                continue
            forcing = problem.forcing if d == n else None
            _solve_face(U, known, restrict_operator(full, face), face, N, forcing)
    return U


def grid_values(f: RationalFunction, n: int, N: int, params: Optional[Mapping] = None) -> np.ndarray:
    g = _cube_axes(n, N)
    mesh = np.meshgrid(*([g] * n), indexing="ij")
    vals, _ = f.evaluate_array({i: mesh[i - 1] for i in range(1, n + 1)},
                               DEFAULT_PARAMS if params is None else params)
    return np.broadcast_to(np.asarray(vals, float), mesh[0].shape)


def default_path(n: int) -> OrderedPath:
    return OrderedPath(tuple(range(n + 1)), n)


# -- experiments -----------------------------------------------------------------------

def convergence_order(Ns: Sequence[int], devs: Sequence[float]) -> float:
    """Least-squares slope of ``-log(dev)`` against ``log(N)``."""
    x = np.log(np.asarray(Ns, float))
    y = np.log(np.maximum(np.asarray(devs, float), 1e-300))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def closed_form_solution(path: OrderedPath, c) -> RationalFunction:
    out = c if isinstance(c, RationalFunction) else const(c)
    for j in range(1, path.n + 1):
        out = out * (1 - var(path.i(j)))
    return out


def uniqueness_experiment(base_value: float, path: OrderedPath, n: Optional[int] = None,
                          grids: Sequence[int] = (16, 32, 64)) -> Dict[str, object]:
    """Solve from the vertex data of the transformed extension and compare with it."""
    n = path.n if n is None else n
    if path.k != 0:
        raise HarnessError("the uniqueness experiment uses a base-0 path")
    spec = transformed_operator(path)
    if n >= 2:
        ext = extend_along_path(vertex_constant(path), path)
        tr = transform_solution(ext, make_chain(path))
        exact = piece_for(tr, transformed_domain(path)).substitute({"c": const(base_value)})
    else:
        exact = closed_form_solution(path, base_value)
    data = origin_vertex_data(n, base_value)
    devs = []
    for N in grids:
        U = solve_dirichlet_cube(DirichletProblem(spec, data), N)
        devs.append(float(np.abs(U - grid_values(exact, n, N)).max()))
    order = convergence_order(grids, devs) if len(grids) > 1 else float("nan")
    return {"n": n, "path": str(path), "grids": list(grids), "max_dev": devs, "order": order}


def maximum_principle_check(n: int, N: int = 16, trials: int = 20, seed: int = 0,
                            path: Optional[OrderedPath] = None) -> Dict[str, object]:
    path = path or default_path(n)
    spec = transformed_operator(path)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        vals = rng.uniform(-1, 1, size=2 ** n)
        data = dict(zip(itertools.product((0, 1), repeat=n), vals))
        U = solve_dirichlet_cube(DirichletProblem(spec, data), N)
        over = max(U.max() - vals.max(), vals.min() - U.min(), 0.0)
        worst = max(worst, float(over))
    return {"n": n, "N": N, "trials": trials, "max_violation": worst}


def manufactured_solution(n: int = 2) -> RationalFunction:
    """Smooth, not multilinear; its fourth derivatives along later axes carry the
    vanishing factor of the coefficient denominators."""
    u = const(1) / (2 + var(1))
    for j in range(2, n + 1):
        u = u + var(j - 1) / (1 + var(j))
    return u.simplify()


def manufactured_convergence(n: int = 2, grids: Sequence[int] = (16, 32, 64)) -> Dict[str, object]:
    path = default_path(n)
    spec = transformed_operator(path)
    u = manufactured_solution(n)
    f = apply_operator(spec, u)
    bnd = {}
    for d in range(0, n):
        for face in enumerate_faces(n, d, "cube"):
            bnd[face] = u
    devs = []
    for N in grids:
        prob = DirichletProblem(spec, {}, bnd, f)
        U = solve_dirichlet_cube(prob, N)
        devs.append(float(np.abs(U - grid_values(u, n, N)).max()))
    return {"n": n, "grids": list(grids), "max_dev": devs, "order": convergence_order(grids, devs)}


def incompatibility_data(c: float = 1.0, directions=((1, 0), (0, 1), (1, 1)),
                         radii=(1e-1, 1e-2, 1e-3, 1e-4)) -> Dict[str, object]:
    """Radial limits of the n=2 extension into the origin vertex and the
    transformed solution at the matching cube points."""
    path = default_path(2)
    ext = extend_along_path(vertex_constant(path), path)
    chain = make_chain(path)
    tr = transform_solution(ext, chain)
    piece = ext.piece(2)
    closed = piece_for(tr, transformed_domain(path))
    params = {"c": c}
    rows, limits = [], []
    vertex = np.array([1.0, 0.0, 0.0])
    for a in directions:
        a = np.asarray(a, float)
        target = np.concatenate([[0.0], a / a.sum()])
        lim, _ = radial_limit(piece, vertex, target, params)
        q = np.array([[0.0, a[1] / a.sum()]])
        u_t = float(closed.evaluate({1: q[0, 0], 2: q[0, 1]}, params))
        limits.append({"direction": tuple(a), "limit": lim, "transformed": u_t, "cube_point": tuple(q[0])})
        for r in radii:
            p = r * a / a.sum()
            v = piece.evaluate({0: 1 - p.sum(), 1: p[0], 2: p[1]}, params)
            pt = forward_points(chain, p, 2)[0]
            vt = closed.evaluate({1: pt[0], 2: pt[1]}, params)
            rows.append((a[0], a[1], r, v, pt[0], pt[1], vt))
    return {"limits": limits, "rows": rows}


def continuity_check(f: RationalFunction, n: int, M: int = 64, params: Optional[Mapping] = None):
    """Largest jump between axis-adjacent samples versus ``2 * Lipschitz * spacing``."""
    params = DEFAULT_PARAMS if params is None else params
    U = grid_values(f, n, M, params)
    lip = 0.0
    for i in range(1, n + 1):
        lip = max(lip, float(np.abs(grid_values(f.diff(i), n, M, params)).max()))
    jump = 0.0
    for ax in range(n):
        jump = max(jump, float(np.abs(np.diff(U, axis=ax)).max()))
    return {"M": M, "max_jump": jump, "bound": 2 * lip / M, "lipschitz": lip}
