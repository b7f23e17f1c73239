import itertools

import numpy as np
import pytest

from wfblow.algebra import const, var
from wfblow.blowup import (
    BlowupError, NoSmoothImage, closed_form_defects, coefficient_defects, forward_points,
    image_stratum, inverse_points, make_chain, make_chart, map_face, map_face_inverse,
    pullback_defect, pushforward_defects, roundtrip_defects, transform_operator,
    transform_solution,
)
from wfblow.extension import catalog, extend_along_path, vertex_constant
from wfblow.geometry import OrderedPath, all_paths, cube_face, enumerate_faces, simplex_face
from wfblow.harness import piece_for
from wfblow.operators import transformed_domain, transformed_operator

p = var
c = var("c")


def blowup_paths(n):
    return [q for q in all_paths(n) if q.blowup_ok() and q.n - q.k >= 2]


def test_chart_evaluation():
    ch = make_chart(1, 2)
    assert forward_points(ch, [[0.2, 0.3]], 2)[0] == pytest.approx([0.5, 0.6], abs=1e-15)
    assert inverse_points(ch, [[0.5, 0.6]], 2)[0] == pytest.approx([0.2, 0.3], abs=1e-15)
    fl = make_chart(1, 2, flipped=True)
    assert forward_points(fl, [[0.2, 0.3]], 2)[0][1] == pytest.approx(0.4, abs=1e-15)


def test_chart_errors():
    with pytest.raises(BlowupError):
        make_chart(1, 1)
    with pytest.raises(BlowupError):
        make_chart(0, 1)
    with pytest.raises(BlowupError):
        make_chain(OrderedPath.parse("0,1", 1))
    with pytest.raises(NoSmoothImage):
        forward_points(make_chart(1, 2), [[0.0, 0.0]], 2)


def test_chain_formulas():
    ch = make_chain(OrderedPath.parse("0,1,2", 2))
    assert ch.forward[1] == p(1) + p(2)
    assert ch.forward[2] == p(2) / (p(1) + p(2))
    ch3 = make_chain(OrderedPath.parse("0,1,2,3", 3))
    assert ch3.forward[3] == p(3) / (p(2) + p(3))
    assert ch3.inverse[2] == p(1) * p(2) * (1 - p(3))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_exact_certificates_on_all_paths(n):
    for path in blowup_paths(n):
        ch = make_chain(path)
        for table in (roundtrip_defects(ch), closed_form_defects(ch)):
            assert all(d.is_zero() for part in table.values() for d in part.values()), str(path)
        cd = coefficient_defects(ch)
        assert not cd["second_order"] and not cd["first_order"], str(path)


def test_flip_covariance():
    path = OrderedPath.parse("0,1,2,3", 3)
    base = make_chain(path)
    for flips in itertools.product((False, True), repeat=2):
        fl = make_chain(path, flips=flips)
        swap = {fl.steps[m].rho: 1 - p(fl.steps[m].rho) for m in range(2) if flips[m]}
        for i in base.inverse:
            assert fl.inverse[i] == base.inverse[i].substitute(swap)
        assert all(d.is_zero() for part in roundtrip_defects(fl).values() for d in part.values())


@pytest.mark.parametrize("path", ["0,1,2", "0,2,1,3", "1,2,3", "0,1,2,3,4"])
def test_pullback_of_monomials(path):
    path = OrderedPath.parse(path, 3 if path == "1,2,3" else None)
    ch = make_chain(path)
    coords = range(1, path.n + 1)
    for deg in range(4):
        for combo in itertools.combinations_with_replacement(coords, deg):
            f = const(1)
            for i in combo:
                f = f * p(i)
            assert pullback_defect(ch, f).is_zero()


def test_transform_operator_matches_factory():
    path = OrderedPath.parse("0,1,2,3", 3)
    assert transform_operator(make_chain(path)) == transformed_operator(path)


def test_numeric_roundtrip():
    rng = np.random.default_rng(1)
    for n in range(2, 7):
        ch = make_chain(OrderedPath(tuple(range(n + 1)), n))
        x = rng.dirichlet(np.ones(n + 1), size=2000)[:, 1:]
        back = inverse_points(ch, forward_points(ch, x, n), n)
        assert np.abs(back - x).max() <= 1e-12


def test_face_dictionary_examples():
    ch = make_chart(1, 2)
    assert map_face(ch, simplex_face(2, [0, 1])).label() == "D1{0,1} x p2=0"
    assert map_face(ch, simplex_face(2, [0, 2])).label() == "D1{0,1} x p2=1"
    with pytest.raises(NoSmoothImage):
        map_face(ch, simplex_face(2, [0]))
    chain = make_chain(OrderedPath.parse("0,1,2,3", 3))
    # the interior of {p2~ = 1} comes from the face where p^1 vanishes
    src = map_face_inverse(chain, cube_face(3, [1, 3], {2: 1}))
    assert src == simplex_face(3, [0, 2, 3])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_face_roundtrip(n):
    for path in blowup_paths(n):
        ch = make_chain(path)
        for d in range(n + 1):
            for face in enumerate_faces(n, d, "simplex"):
                try:
                    img = map_face(ch, face)
                except NoSmoothImage:
                    continue
                assert map_face_inverse(ch, img) == face


def test_unit_faces_come_from_vanishing_predecessor():
    rng = np.random.default_rng(2)
    path = OrderedPath.parse("0,2,1,3", 3)
    ch = make_chain(path)
    for j in range(1, 4):
        q = rng.uniform(0, 1, size=(100, 3))
        q[:, path.i(j) - 1] = 1.0
        x = inverse_points(ch, q, 3)
        prev = 1 - x.sum(axis=1) if j == 1 else x[:, path.i(j - 1) - 1]
        assert np.abs(prev).max() <= 1e-12


def test_transformed_solution_closed_form():
    path = OrderedPath.parse("0,1,2", 2)
    ext = extend_along_path(vertex_constant(path), path)
    tr = transform_solution(ext, make_chain(path))
    u = piece_for(tr, transformed_domain(path))
    assert u == c * (1 - p(1)) * (1 - p(2))
    assert u.evaluate({1: 0.5, 2: 0.6}, {"c": 1.0}) == pytest.approx(0.2, abs=1e-12)
    assert ext.piece(2).evaluate({0: 0.5, 1: 0.2, 2: 0.3}, {"c": 1.0}) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3])
def test_pushforward_coherence(n):
    for path in blowup_paths(n):
        for flips in itertools.product((False, True), repeat=n - path.k - 1):
            ch = make_chain(path, flips=flips)
            for name, base in catalog(path):
                defects = pushforward_defects(extend_along_path(base, path), ch)
                assert all(d.is_zero() for d in defects.values()), (str(path), flips, name)


def test_image_strata_of_the_path():
    ch = make_chain(OrderedPath.parse("0,1,2,3", 3))
    for d in range(4):
        want = cube_face(3, range(1, d + 1), {i: 0 for i in range(d + 1, 4)})
        assert image_stratum(ch, d) == want
    assert map_face(ch, simplex_face(3, [0, 2, 3])) == cube_face(3, [1, 3], {2: 1})
