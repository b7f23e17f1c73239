import itertools
from math import comb

import numpy as np
import pytest

from wfblow.geometry import (
    ClassificationError, GeometryError, OrderedPath, additional_faces, all_paths, classify_point,
    cube_face, derived_index, enumerate_faces, in_closed_additional_face, product_domain,
    simplex_face,
)


def labels(faces):
    return sorted(f.label() for f in faces)


def test_triangle_edges():
    assert labels(enumerate_faces(2, 1, "simplex")) == labels(
        [simplex_face(2, [0, 1]), simplex_face(2, [0, 2]), simplex_face(2, [1, 2])])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_face_counts(n):
    for k in range(n + 1):
        assert len(enumerate_faces(n, k, "simplex")) == comb(n + 1, k + 1)
        # brute force over fixed-coordinate patterns
        patterns = sum(1 for fixed in itertools.product((None, 0, 1), repeat=n)
                       if sum(v is None for v in fixed) == k)
        assert len(enumerate_faces(n, k, "cube")) == patterns == comb(n, k) * 2 ** (n - k)


def test_face_enumeration_errors():
    with pytest.raises(GeometryError):
        enumerate_faces(2, 3, "simplex")
    with pytest.raises(GeometryError):
        enumerate_faces(2, -1, "cube")


def test_classification():
    assert classify_point((0.2, 0.3), 2, "simplex") == simplex_face(2, [0, 1, 2])
    assert classify_point((0.0, 0.3), 2, "simplex") == simplex_face(2, [0, 2])
    assert classify_point((1.0, 0.0, 0.5), 3, "cube") == cube_face(3, [3], {1: 1, 2: 0})
    with pytest.raises(ClassificationError):
        classify_point((0.7, 0.7), 2, "simplex")
    with pytest.raises(ClassificationError):
        classify_point((1.2, 0.5), 2, "cube")


def test_classification_partitions_random_points():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = rng.dirichlet(np.ones(4))[1:]
        x[rng.random(3) < 0.3] = 0.0
        s = classify_point(x, 3, "simplex")
        assert s.contains(x)
        for other in enumerate_faces(3, s.simplex_dim, "simplex"):
            if other != s:
                assert not other.contains(x)


def test_stratum_json_roundtrip():
    for f in enumerate_faces(3, 1, "cube") + enumerate_faces(3, 2, "simplex"):
        assert type(f).from_json(f.to_json(), 3) == f


def test_derived_index():
    assert derived_index([0, 1, 2]) == 0
    assert derived_index([1, 3]) == 1
    assert derived_index([2]) == 2


def test_paths():
    p = OrderedPath.parse("0,1,2,3", 3)
    assert p.k == 0 and p.index_set(1) == (0, 1) and p.i(3) == 3
    q = OrderedPath.parse("1,2,3", 3)
    assert q.k == 1 and q.index_set(1) == (0, 1)
    with pytest.raises(GeometryError):
        OrderedPath.parse("0,1,1", 2)
    with pytest.raises(GeometryError):
        OrderedPath.parse("", 2)
    # base-0 paths start at the vertex p^0 = 1
    assert [str(q) for q in all_paths(2, 0)] == ["0,1,2", "0,2,1"]
    assert len(all_paths(3, 1)) == 4 * 3 * 2


def test_additional_faces():
    assert labels(additional_faces(OrderedPath.parse("0,1,2", 2))) == ["p1=0 x X{2}"]
    faces = additional_faces(OrderedPath.parse("0,1,2,3", 3))
    assert labels(faces) == ["C{1} x p2=0 x X{3}", "p1=0 x X{2,3}"]
    assert additional_faces(OrderedPath.parse("0,1", 1)) == []


def test_additional_face_membership():
    path = OrderedPath.parse("0,1,2", 2)
    assert in_closed_additional_face((0.0, 0.4), path)
    assert not in_closed_additional_face((0.3, 0.4), path)
    dom = product_domain(path)
    assert dom.n == 2
