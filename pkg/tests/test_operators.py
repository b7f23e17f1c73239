import itertools

import pytest

from wfblow.algebra import const, var
from wfblow.geometry import GeometryError, OrderedPath, cube_face, enumerate_faces, simplex_face
from wfblow.harness import brute_force_restriction
from wfblow.operators import (
    OperatorError, apply_operator, coefficient, restrict_operator, simplex_operator,
    symmetric_operator, to_chart, transformed_operator,
)

p = var
P012 = OrderedPath.parse("0,1,2", 2)
P0123 = OrderedPath.parse("0,1,2,3", 3)


def test_simplex_coefficients():
    L = simplex_operator(2)
    assert coefficient(L, 1, 2) == -p(1) * p(2)
    assert coefficient(L, 1, 1) == p(1) * (1 - p(1))
    with pytest.raises(OperatorError):
        coefficient(L, 0, 1)


def test_transformed_coefficients():
    T = transformed_operator(P012)
    assert coefficient(T, 1, 1) == p(1) * (1 - p(1))
    assert coefficient(T, 2, 2) == p(2) * (1 - p(2)) / p(1)
    assert coefficient(T, 1, 2).is_zero()
    T3 = transformed_operator(P0123)
    assert coefficient(T3, 3, 3) == p(3) * (1 - p(3)) / (p(1) * p(2))


def test_transformed_with_simplex_block():
    T = transformed_operator(OrderedPath.parse("1,2,3", 3))
    # simplex block on {0,1,2} in the chart of p1, p2 plus one cube axis
    assert coefficient(T, 1, 2) == -p(1) * p(2)
    assert coefficient(T, 3, 3) == p(3) * (1 - p(3)) / p(2)


def test_apply_examples():
    L = simplex_operator(2)
    assert apply_operator(L, p(1)).is_zero()
    assert apply_operator(L, p(1) * p(2)) == -p(1) * p(2)
    assert apply_operator(transformed_operator(P012), (1 - p(1)) * (1 - p(2))).is_zero()


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eigenfunctions(n):
    L = simplex_operator(n)
    for i, j in itertools.combinations(range(1, n + 1), 2):
        assert apply_operator(L, p(i) * p(j)) == -p(i) * p(j)


@pytest.mark.parametrize("n", [2, 3])
def test_symmetric_form_agrees_on_the_simplex(n):
    coords = range(1, n + 1)
    tie = {0: 1 - sum((p(i) for i in coords), const(0))}
    constraint = sum((p(i) for i in range(n + 1)), const(-1))
    f = p(1) ** 2 * p(n) + p(1)
    want = apply_operator(simplex_operator(n), f)
    for g in (const(0), p(0), p(0) * p(1) * p(n)):
        got = apply_operator(symmetric_operator(n), f + g * constraint).substitute(tie)
        assert (got - want).is_zero()


def test_simplex_restriction_to_edge():
    face = simplex_face(2, [0, 1])
    R = restrict_operator(simplex_operator(2), face)
    assert R.surviving == (1,)
    assert coefficient(R, 1, 1) == p(1) * (1 - p(1))


def test_restriction_not_in_closure():
    R = restrict_operator(simplex_operator(3), simplex_face(3, [0, 1]))
    with pytest.raises(GeometryError):
        restrict_operator(R, simplex_face(3, [2, 3]))


def test_chart_uses_derived_index():
    face = simplex_face(3, [1, 3])
    f = to_chart(p(1) + p(3) + p(2), face)
    assert f == const(1)


def test_transformed_restriction_unit_face():
    R = restrict_operator(transformed_operator(P012), cube_face(2, [1], {2: 1}))
    assert set(R.terms) == {(1, 1)}
    assert coefficient(R, 1, 1) == p(1) * (1 - p(1))


def test_transformed_restriction_zero_face_n2():
    # on {p1 = 0} the p2 term survives with its denominator removed
    R = restrict_operator(transformed_operator(P012), cube_face(2, [2], {1: 0}))
    assert coefficient(R, 2, 2) == p(2) * (1 - p(2))


def test_transformed_restriction_n3():
    R = restrict_operator(transformed_operator(P0123), cube_face(3, [1, 3], {2: 0}))
    assert set(R.terms) == {(3, 3)}
    assert coefficient(R, 3, 3) == p(3) * (1 - p(3))


@pytest.mark.parametrize("path", ["0,1,2", "0,1,2,3", "0,2,1,3", "0,3,1,2"])
def test_restriction_rule_matches_limits(path):
    path = OrderedPath.parse(path)
    for d in range(1, path.n):
        for face in enumerate_faces(path.n, d, "cube"):
            r = brute_force_restriction(path, face, samples=2)
            assert r["match"], (face.label(), r)
            assert r["ratio_error"] < 1e-4


def test_flipped_restriction_matches_limits():
    path = P0123
    for flips in itertools.product((False, True), repeat=2):
        for face in enumerate_faces(3, 1, "cube"):
            assert brute_force_restriction(path, face, flips, samples=2)["match"]
