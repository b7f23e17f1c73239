"""The nine acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import itertools
import subprocess
import sys

import numpy as np
import pytest

from wfblow.algebra import var
from wfblow.blowup import (
    NoSmoothImage, closed_form_defects, coefficient_defects, forward_points, inverse_points,
    make_chain, map_face, map_face_inverse, pullback_defect, pushforward_defects,
    roundtrip_defects, transform_solution,
)
from wfblow.extension import catalog, extend_along_path, residual, vertex_constant
from wfblow.geometry import OrderedPath, all_paths, enumerate_faces, simplex_face
from wfblow.harness import (
    GridSpec, brute_force_restriction, check_stem_lemma, closed_form_solution, continuity_check,
    fd_residual, incompatibility_data, manufactured_convergence, maximum_principle_check,
    piece_for, uniqueness_experiment,
)
from wfblow.operators import simplex_operator, transformed_domain, transformed_operator
from wfblow.suites import monomials

SEED = 20240611
FD_SAMPLE_N5 = 600


def blowup_paths(n):
    return [p for p in all_paths(n) if p.blowup_ok() and p.n - p.k >= 2]


def base0_paths(n):
    return all_paths(n, 0)


def zero_table(table):
    return sum(1 for part in table.values() for d in part.values() if not d.is_zero())


def test_1_blowup_roundtrip(criterion):
    rng = np.random.default_rng(SEED)
    nonzero, worst = 0, 0.0
    for n in range(2, 7):
        chain = make_chain(OrderedPath(tuple(range(n + 1)), n))
        nonzero += zero_table(roundtrip_defects(chain)) + zero_table(closed_form_defects(chain))
        x = rng.dirichlet(np.ones(n + 1), size=10_000)[:, 1:]
        back = inverse_points(chain, forward_points(chain, x, n), n)
        worst = max(worst, float(np.abs(back - x).max()))
    ok = nonzero == 0 and worst <= 1e-12
    criterion(1, ok, f"exact defects={nonzero}, max numeric roundtrip={worst:.2e} (tol 1e-12)")
    assert ok


def test_2_operator_transformation(criterion):
    bad, first, checked = 0, 0, 0
    for n in range(2, 5):
        mons = monomials(range(1, n + 1), 3)
        for path in blowup_paths(n):
            chain = make_chain(path)
            for f in mons:
                bad += not pullback_defect(chain, f).is_zero()
                checked += 1
            cd = coefficient_defects(chain)
            bad += len(cd["second_order"])
            first += len(cd["first_order"])
    ok = bad == 0 and first == 0
    criterion(2, ok, f"{checked} pullbacks, nonzero={bad}, surviving first-order terms={first}")
    assert ok


def _distinct_pieces(n):
    seen = {}
    for path in all_paths(n):
        if path.k == n:
            continue
        for name, base in catalog(path):
            ext = extend_along_path(base, path)
            for d in range(path.k + 1, n + 1):
                face = simplex_face(n, path.index_set(d))
                key = (face.label(), str(ext.piece(d)), str(base.time_factor))
                seen.setdefault(key, (face, ext.piece(d), base.time_factor, ext.pieces))
    return seen


def test_3_extension_residual(criterion):
    rng = np.random.default_rng(SEED)
    exact_bad, fd_worst, total, fd_count = 0, 0.0, 0, 0
    for n in range(1, 6):
        pieces = _distinct_pieces(n)
        keys = sorted(pieces)
        total += len(keys)
        for key in keys:
            face, piece, lam, _ = pieces[key]
            exact_bad += not residual(piece, face, lam).is_zero()
        if n == 5:
            keys = [keys[i] for i in sorted(rng.choice(len(keys), FD_SAMPLE_N5, replace=False))]
        for key in keys:
            face, _, _, ext = pieces[key]
            r = fd_residual(ext, simplex_operator(n, face), GridSpec(face, 32, max_nodes=48, seed=SEED))
            fd_worst = max(fd_worst, r.max_residual)
            fd_count += 1
    ok = exact_bad == 0 and fd_worst <= 1e-8
    criterion(3, ok, f"{total} distinct pieces, exact nonzero={exact_bad}; "
                     f"FD on {fd_count} pieces max={fd_worst:.2e} (tol 1e-8)")
    assert ok


def test_4_transformed_solution(criterion):
    bad = 0
    for n in range(2, 5):
        for path in blowup_paths(n):
            chain = make_chain(path)
            for name, base in catalog(path):
                bad += sum(not d.is_zero() for d in pushforward_defects(extend_along_path(base, path), chain).values())
    closed_bad = 0
    for n in range(2, 5):
        for path in base0_paths(n):
            ext = extend_along_path(vertex_constant(path), path)
            u = piece_for(transform_solution(ext, make_chain(path)), transformed_domain(path))
            closed_bad += not (u - closed_form_solution(path, var("c"))).is_zero()
    path = OrderedPath.parse("0,1,2", 2)
    ext = extend_along_path(vertex_constant(path), path)
    u = piece_for(transform_solution(ext, make_chain(path)), transformed_domain(path))
    c = 1.7
    spot = abs(u.evaluate({1: 0.5, 2: 0.6}, {"c": c}) - ext.piece(2).evaluate({0: 0.5, 1: 0.2, 2: 0.3}, {"c": c}))
    spot = max(spot, abs(u.evaluate({1: 0.5, 2: 0.6}, {"c": c}) - 0.2 * c))
    ok = bad == 0 and closed_bad == 0 and spot <= 1e-12
    criterion(4, ok, f"pushforward nonzero={bad}, closed-form nonzero={closed_bad}, spot error={spot:.1e}")
    assert ok


def test_5_incompatibility_and_continuity(criterion):
    res = incompatibility_data(1.0)
    want = [1.0, 0.0, 0.5]
    lim_err = max(abs(r["limit"] - w) for r, w in zip(res["limits"], want))
    jumps = []
    for n, M in ((2, 128), (3, 32)):
        cc = continuity_check(closed_form_solution(OrderedPath(tuple(range(n + 1)), n), 1), n, M=M)
        jumps.append(cc["max_jump"] <= cc["bound"])
    ok = lim_err <= 1e-8 and all(jumps)
    criterion(5, ok, f"directional limit error={lim_err:.1e} (tol 1e-8), continuity bounds met={all(jumps)}")
    assert ok


def test_6_stem_lemma(criterion):
    worst, faces, mism, ratio = 0.0, 0, 0, 0.0
    for n in range(2, 5):
        for path in base0_paths(n):
            ent = check_stem_lemma(closed_form_solution(path, var("c")), path, N=16)
            worst = max([worst] + [e.residual for e in ent])
            faces += len(ent)
            for d in range(1, n):
                for face in enumerate_faces(n, d, "cube"):
                    r = brute_force_restriction(path, face, seed=SEED)
                    mism += not r["match"]
                    ratio = max(ratio, r["ratio_error"])
    ok = worst <= 1e-9 and mism == 0
    criterion(6, ok, f"{faces} faces, max residual={worst:.1e} (tol 1e-9), "
                     f"rule mismatches={mism}, max limit-ratio error={ratio:.1e}")
    assert ok


def test_7_uniqueness(criterion):
    devs = []
    for n in (2, 3):
        res = uniqueness_experiment(1.0, OrderedPath(tuple(range(n + 1)), n), grids=(16, 32, 64))
        devs.extend(res["max_dev"])
    viol = max(maximum_principle_check(n, N=16, trials=20, seed=SEED)["max_violation"] for n in (2, 3))
    order = manufactured_convergence(2, grids=(16, 32, 64))["order"]
    ok = max(devs) <= 1e-8 and viol <= 1e-12 and order >= 1.8
    criterion(7, ok, f"max deviation={max(devs):.1e} (tol 1e-8), max-principle violation={viol:.1e}, "
                     f"manufactured order={order:.3f} (>= 1.8)")
    assert ok


def test_8_face_dictionary(criterion):
    rng = np.random.default_rng(SEED)
    bad, mapped = 0, 0
    for n in range(2, 5):
        for path in blowup_paths(n):
            chain = make_chain(path)
            for d in range(n + 1):
                for face in enumerate_faces(n, d, "simplex"):
                    try:
                        img = map_face(chain, face)
                    except NoSmoothImage:
                        continue
                    mapped += 1
                    bad += map_face_inverse(chain, img) != face
    worst = 0.0
    for n in range(2, 5):
        for path in base0_paths(n):
            chain = make_chain(path)
            for j in range(1, n + 1):
                q = rng.uniform(0, 1, size=(500, n))
                q[:, path.i(j) - 1] = 1.0
                x = inverse_points(chain, q, n)
                prev = 1 - x.sum(axis=1) if j == 1 else x[:, path.i(j - 1) - 1]
                worst = max(worst, float(np.abs(prev).max()))
    ok = bad == 0 and worst <= 1e-12
    criterion(8, ok, f"{mapped} faces mapped, roundtrip failures={bad}, "
                     f"unit-face preimage max={worst:.1e} (tol 1e-12)")
    assert ok


def test_9_determinism(criterion, tmp_path):
    outputs = []
    for name in ("a.json", "b.json"):
        target = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "wfblow.cli", "verify", "all", "--n", "3",
                               "--path", "0,1,2,3", "--seed", "7", "--out", str(target)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append(target.read_bytes())
    ok = outputs[0] == outputs[1]
    criterion(9, ok, f"two verify-all runs byte-identical={ok} ({len(outputs[0])} bytes)")
    assert ok
