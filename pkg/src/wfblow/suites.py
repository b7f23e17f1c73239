"""Verification suites behind ``wfblow verify``.

Every check yields a case ``{name, status, metric, tol}``.  Exact certificates
report the number of non-zero defects with tolerance 0; numeric checks report
a maximum error.  Cases whose name ends in ``-order`` are lower bounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .algebra import RationalFunction, const, var
from .blowup import (
    BlowupChain, NoSmoothImage, closed_form_defects, coefficient_defects, forward_points,
    inverse_points, make_chain, map_face, map_face_inverse, pullback_defect,
    pushforward_defects, roundtrip_defects, transform_solution,
)
from .extension import (
    catalog, check_extension_constraints, extend_along_path, radial_limit, residual,
    vanishes_on_boundary, vertex_constant,
)
from .geometry import OrderedPath, Stratum, enumerate_faces, simplex_face
from .harness import (
    GridSpec, TOL_FACE, TOL_FD, brute_force_restriction, check_stem_lemma,
    closed_form_solution, continuity_check, fd_residual, manufactured_convergence,
    maximum_principle_check, piece_for, uniqueness_experiment,
)
from .operators import (
    apply_operator, full_simplex, simplex_operator, symmetric_operator, to_chart,
    transformed_domain,
)

SUITES = ("blowup", "operator", "extension", "transform", "stem", "faces", "uniqueness")


@dataclass
class Report:
    suite: str
    tol_overrides: Mapping[str, float] = field(default_factory=dict)
    cases: List[dict] = field(default_factory=list)

    def add(self, name: str, metric: float, tol: float, lower_bound: bool = False):
        tol = float(self.tol_overrides.get(name, tol))
        metric = float(metric)
        ok = metric >= tol if lower_bound else metric <= tol
        self.cases.append({"name": name, "status": "pass" if ok else "fail",
                           "metric": metric, "tol": tol})

    def skip(self, name: str, tol: float = 0.0):
        self.cases.append({"name": name, "status": "skip", "metric": 0.0,
                           "tol": float(self.tol_overrides.get(name, tol))})

    @property
    def ok(self) -> bool:
        return all(c["status"] != "fail" for c in self.cases)

    def to_json(self) -> dict:
        return {"suite": self.suite, "cases": sorted(self.cases, key=lambda c: c["name"])}


def _nonzero(items) -> int:
    return sum(1 for f in items if not f.is_zero())


def monomials(coords: Sequence[int], max_degree: int) -> List[RationalFunction]:
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(coords, deg):
            m = const(1)
            for i in combo:
                m = m * var(i)
            out.append(m)
    return out


def random_interior(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the open simplex as rows ``(p^1, ..., p^n)``."""
    return rng.dirichlet(np.ones(n + 1), size=count)[:, 1:]


# -- individual checks ------------------------------------------------------------

def blowup_checks(rep: Report, path: OrderedPath, rng, points: int = 10000):
    if path.n - path.k < 2:
        rep.skip("blowup-roundtrip-exact")
        return
    chain = make_chain(path)
    rd = roundtrip_defects(chain)
    rep.add("blowup-roundtrip-exact", sum(_nonzero(d.values()) for d in rd.values()), 0)
    cd = closed_form_defects(chain)
    rep.add("blowup-closed-forms", sum(_nonzero(d.values()) for d in cd.values()), 0)
    x = random_interior(path.n, points, rng)
    back = inverse_points(chain, forward_points(chain, x, path.n), path.n)
    rep.add("blowup-roundtrip-numeric", float(np.abs(back - x).max()), 1e-12)
    bad = 0
    base = chain.inverse
    for m in range(1, len(chain.steps) + 1):
        flips = tuple(i + 1 == m for i in range(len(chain.steps)))
        fl = make_chain(path, flips=flips)
        rho = fl.steps[m - 1].rho
        swap = {rho: 1 - var(rho)}
        bad += _nonzero((fl.inverse[i] - base[i].substitute(swap)) for i in base)
        bad += _nonzero(d for dd in roundtrip_defects(fl).values() for d in dd.values())
    rep.add("blowup-flip-covariance", bad, 0)


def operator_checks(rep: Report, path: OrderedPath, max_degree: int = 3):
    n = path.n
    coords = list(range(1, n + 1))
    mons = monomials(coords, max_degree)
    sym = symmetric_operator(n)
    L = simplex_operator(n)
    # any representation F = f + g (x^0 + ... + x^n - 1) of f must give the same image
    bad = 0
    tie = {0: 1 - sum((var(i) for i in coords), const(0))}
    constraint = sum((var(i) for i in range(n + 1)), const(-1))
    for f in mons:
        want = apply_operator(L, f)
        for g in (const(0), var(0) * f, var(0) * var(n)):
            lam = apply_operator(sym, f + g * constraint).substitute(tie)
            bad += not (lam - want).is_zero()
    rep.add("operator-symmetric-form", bad, 0)
    bad = 0
    for i, j in itertools.combinations(coords, 2):
        bad += not (apply_operator(L, var(i) * var(j)) + var(i) * var(j)).is_zero()
    rep.add("operator-eigen-identity", bad, 0)
    if n - path.k < 2:
        rep.skip("operator-pullback")
        rep.skip("operator-chain-rule-coefficients")
        return
    chain = make_chain(path)
    rep.add("operator-pullback", sum(1 for f in mons if not pullback_defect(chain, f).is_zero()), 0)
    cd = coefficient_defects(chain)
    rep.add("operator-chain-rule-coefficients", len(cd["second_order"]) + len(cd["first_order"]), 0)


def extension_checks(rep: Report, path: OrderedPath, seed: int, N: int = 32,
                     max_nodes: Optional[int] = 64):
    n = path.n
    exact_bad, fd_worst, bnd_bad = 0, 0.0, 0
    for name, base in catalog(path):
        ext = extend_along_path(base, path)
        for d in range(path.k + 1, n + 1):
            face = simplex_face(n, path.index_set(d))
            exact_bad += not residual(ext.piece(d), face, base.time_factor).is_zero()
            r = fd_residual(ext.pieces, simplex_operator(n, face), GridSpec(face, N, max_nodes, seed))
            fd_worst = max(fd_worst, r.max_residual)
        if vanishes_on_boundary(base) and \
                not check_extension_constraints(ext.pieces, path, samples=4, seed=seed).ok:
            bnd_bad += 1
    rep.add("extension-residual-exact", exact_bad, 0)
    rep.add("extension-residual-fd", fd_worst, TOL_FD)
    rep.add("extension-constraints", bnd_bad, 0)
    ext = extend_along_path(catalog(path)[0][1], path)
    bad = 0
    for d in range(path.k + 1, n + 1):
        lower = ext.piece(d).substitute({path.i(d): const(0)})
        prev = ext.piece(d - 1)
        face = simplex_face(n, path.index_set(d - 1))
        bad += not (to_chart(lower, face) - to_chart(prev, face)).is_zero()
    rep.add("extension-restriction", bad, 0)
    if path.k == 0 and n >= 2:
        rep.add("extension-directional-limits", directional_limit_error(path, seed), 1e-8)


def directional_limit_error(path: OrderedPath, seed: int, c: float = 1.0, count: int = 6) -> float:
    """Radial limits of the top piece into the base vertex against the product law."""
    rng = np.random.default_rng(seed)
    n = path.n
    ext = extend_along_path(vertex_constant(path), path)
    piece = ext.piece(n)
    near = np.full((2, n), 1e-3)
    near[0, 0] = near[1, n - 1] = 1.0
    dirs = list(near) + [np.ones(n)] + list(rng.uniform(0.1, 1, size=(count, n)))
    worst = 0.0
    for a in dirs:
        want = c
        for j in range(1, n):
            want *= a[j - 1] / a[j - 1:].sum()
        target = np.zeros(n + 1)
        for j in range(1, n + 1):
            target[path.i(j)] = a[j - 1] / a.sum()
        q = np.zeros(n + 1)
        q[path.i(0)] = 1.0
        lim, _ = radial_limit(piece, q, target, {"c": c}, (1e-1, 1e-2, 1e-3))
        worst = max(worst, abs(lim - want))
    return worst


def transform_checks(rep: Report, path: OrderedPath, seed: int):
    n = path.n
    if n - path.k < 2:
        rep.skip("transform-pushforward")
        return
    chain = make_chain(path)
    bad = 0
    for name, base in catalog(path):
        ext = extend_along_path(base, path)
        bad += _nonzero(pushforward_defects(ext, chain).values())
    rep.add("transform-pushforward", bad, 0)
    if path.k != 0:
        return
    ext = extend_along_path(vertex_constant(path), path)
    tr = transform_solution(ext, chain)
    closed = piece_for(tr, transformed_domain(path))
    rep.add("transform-closed-form", int(not (closed - closed_form_solution(path, var("c"))).is_zero()), 0)
    rng = np.random.default_rng(seed)
    x = random_interior(n, 200, rng)
    qt = forward_points(chain, x, n)
    worst = 0.0
    for p, q in zip(x, qt):
        u = ext.piece(n).evaluate({0: 1 - p.sum(), **{i + 1: v for i, v in enumerate(p)}}, {"c": 1.0})
        v = closed.evaluate({i + 1: w for i, w in enumerate(q)}, {"c": 1.0})
        worst = max(worst, abs(u - v))
    rep.add("transform-spot-check", worst, 1e-12)
    vanish = 0
    for j in range(1, n + 1):
        vanish += not closed.substitute({path.i(j): const(1)}).is_zero()
    rep.add("transform-vanishing-faces", vanish, 0)
    cont = continuity_check(closed.substitute({"c": const(1)}), n, M=32 if n > 2 else 64)
    rep.add("transform-continuity", cont["max_jump"] - cont["bound"], 0)


def stem_checks(rep: Report, path: OrderedPath, N: int = 16):
    if path.k != 0 or path.n < 2:
        rep.skip("stem-face-residuals")
        return
    u = closed_form_solution(path, var("c"))
    ent = check_stem_lemma(u, path, N=N)
    rep.add("stem-face-residuals", max((e.residual for e in ent), default=0.0), TOL_FACE)
    mism, ratio = 0, 0.0
    for d in range(1, path.n):
        for face in enumerate_faces(path.n, d, "cube"):
            r = brute_force_restriction(path, face)
            mism += not r["match"]
            ratio = max(ratio, r["ratio_error"])
    rep.add("stem-brute-force-survivors", mism, 0)
    rep.add("stem-brute-force-ratios", ratio, 1e-4)


def face_checks(rep: Report, path: OrderedPath, rng, samples: int = 200):
    n = path.n
    if n - path.k < 2:
        rep.skip("faces-roundtrip")
        return
    chain = make_chain(path)
    bad = 0
    for d in range(n + 1):
        for face in enumerate_faces(n, d, "simplex"):
            try:
                img = map_face(chain, face)
            except NoSmoothImage:
                continue
            bad += map_face_inverse(chain, img) != face
    rep.add("faces-roundtrip", bad, 0)
    if path.k != 0:
        return
    worst = 0.0
    for j in range(1, n + 1):
        q = rng.uniform(0, 1, size=(samples, n))
        q[:, path.i(j) - 1] = 1.0
        p = inverse_points(chain, q, n)
        prev = 1 - p.sum(axis=1) if j == 1 else p[:, path.i(j - 1) - 1]
        worst = max(worst, float(np.abs(prev).max()))
    rep.add("faces-unit-face-preimage", worst, 1e-12)


def uniqueness_checks(rep: Report, path: OrderedPath, seed: int, grids: Sequence[int] = (16, 32)):
    n = path.n
    if path.k != 0 or n > 3:
        rep.skip("uniqueness-max-dev", 1e-8)
        return
    res = uniqueness_experiment(1.0, path, grids=grids)
    rep.add("uniqueness-max-dev", max(res["max_dev"]), 1e-8)
    mp = maximum_principle_check(n, N=8 if n == 3 else 16, trials=20, seed=seed, path=path)
    rep.add("uniqueness-maximum-principle", mp["max_violation"], 1e-12)
    mc = manufactured_convergence(2)
    rep.add("uniqueness-manufactured-order", mc["order"], 1.8, lower_bound=True)


def run_suite(name: str, path: OrderedPath, seed: int = 0,
              tol_overrides: Optional[Mapping[str, float]] = None,
              grids: Sequence[int] = (16, 32)) -> Report:
    names = SUITES if name == "all" else (name,)
    unknown = [s for s in names if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite {unknown[0]!r}")
    rep = Report(name, dict(tol_overrides or {}))
    rng = np.random.default_rng(seed)
    for s in names:
        if s == "blowup":
            blowup_checks(rep, path, rng)
        elif s == "operator":
            operator_checks(rep, path)
        elif s == "extension":
            extension_checks(rep, path, seed)
        elif s == "transform":
            transform_checks(rep, path, seed)
        elif s == "stem":
            stem_checks(rep, path)
        elif s == "faces":
            face_checks(rep, path, rng)
        elif s == "uniqueness":
            uniqueness_checks(rep, path, seed, grids)
    return rep
