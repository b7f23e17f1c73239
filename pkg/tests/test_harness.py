import numpy as np
import pytest

from wfblow.algebra import StratifiedFunction, const, var
from wfblow.geometry import OrderedPath, cube_face, simplex_face
from wfblow.harness import (
    DirichletProblem, DirichletSetupError, GridSpec, check_stem_lemma, closed_form_solution,
    continuity_check, convergence_order, fd_residual, grid_values, incompatibility_data,
    manufactured_convergence, maximum_principle_check, origin_vertex_data, solve_dirichlet_cube,
    uniqueness_experiment,
)
from wfblow.operators import (
    restrict_operator, simplex_operator, transformed_domain, transformed_operator,
)

p = var
P012 = OrderedPath.parse("0,1,2", 2)
P0123 = OrderedPath.parse("0,1,2,3", 3)


def test_grid_sampling_is_seeded():
    face = simplex_face(3, [0, 1, 2, 3])
    a = GridSpec(face, 32, max_nodes=50, seed=4).nodes()
    b = GridSpec(face, 32, max_nodes=50, seed=4).nodes()
    assert np.array_equal(a, b) and len(a) == 50
    assert np.all(a.sum(axis=1) < 1) and np.all(a > 0)


def test_fd_residual_on_eigen_solution():
    face = simplex_face(2, [0, 1, 2])
    u = StratifiedFunction({face: p(1) * p(2)}, 1)
    assert fd_residual(u, simplex_operator(2), GridSpec(face, 32)).max_residual <= 1e-9


def test_fd_residual_on_transformed_solution():
    dom = transformed_domain(P012)
    u = (1 - p(1)) * (1 - p(2))
    assert fd_residual(u, transformed_operator(P012), GridSpec(dom, 32)).max_residual <= 1e-9


def test_fd_residual_control():
    dom = transformed_domain(P012)
    r = fd_residual(p(1) ** 2, transformed_operator(P012), GridSpec(dom, 32))
    assert r.max_residual == pytest.approx(0.25, abs=0.01)


def test_fd_residual_rows_csv():
    dom = transformed_domain(P012)
    r = fd_residual(p(1) ** 2, transformed_operator(P012), GridSpec(dom, 4), keep_rows=True)
    text = r.csv(["p1", "p2"])
    assert text.splitlines()[0] == "p1,p2,residual"
    assert len(text.splitlines()) == 1 + r.nodes


def test_fd_rational_solution_and_control():
    face = simplex_face(2, [0, 1, 2])
    # p1 / (p1 + p2) is harmonic for the simplex operator, p1^2 is not
    assert fd_residual(p(1) / (p(1) + p(2)), simplex_operator(2), GridSpec(face, 16)).max_residual <= 1e-9
    assert fd_residual(p(1) ** 2, simplex_operator(2), GridSpec(face, 16)).max_residual > 0.1


@pytest.mark.parametrize("path", [P012, P0123, OrderedPath.parse("0,2,1,3")])
def test_stem_lemma(path):
    u = closed_form_solution(path, var("c"))
    entries = check_stem_lemma(u, path, N=12)
    assert entries and max(e.residual for e in entries) <= 1e-9


def test_stem_control_on_unit_face():
    R = restrict_operator(transformed_operator(P012), cube_face(2, [2], {1: 1}))
    r = fd_residual(p(2) ** 2, R, GridSpec(R.stratum, 16))
    assert R.terms and r.max_residual > 1e-3


def test_dirichlet_bilinear():
    U = solve_dirichlet_cube(DirichletProblem(transformed_operator(P012), origin_vertex_data(2, 1.0)), 64)
    exact = grid_values(closed_form_solution(P012, 1), 2, 64)
    assert np.abs(U - exact).max() <= 1e-8
    # the edge p2 = 0 carries the 1D linear interpolant
    assert np.abs(U[:, 0] - (1 - np.linspace(0, 1, 65))).max() <= 1e-12


def test_dirichlet_zero_data():
    U = solve_dirichlet_cube(DirichletProblem(transformed_operator(P012), origin_vertex_data(2, 0.0)), 16)
    assert np.abs(U).max() == 0


def test_dirichlet_perturbed_data():
    U = solve_dirichlet_cube(DirichletProblem(transformed_operator(P012), origin_vertex_data(2, 1.1)), 16)
    exact = grid_values(closed_form_solution(P012, 1), 2, 16)
    assert np.abs(U - exact).max() == pytest.approx(0.1, abs=1e-10)


def test_dirichlet_inconsistent_data():
    dom_edge = cube_face(2, [1], {2: 0})
    prob = DirichletProblem(transformed_operator(P012), {(0, 0): 1.0}, {dom_edge: const(5)})
    with pytest.raises(DirichletSetupError):
        solve_dirichlet_cube(prob, 8)


def test_dirichlet_needs_transformed_operator():
    with pytest.raises(DirichletSetupError):
        solve_dirichlet_cube(DirichletProblem(simplex_operator(2), {}), 8)


def test_uniqueness_n3_small():
    res = uniqueness_experiment(1.0, P0123, grids=(8, 16))
    assert max(res["max_dev"]) <= 1e-8


def test_maximum_principle():
    res = maximum_principle_check(2, N=16, trials=10, seed=3)
    assert res["max_violation"] <= 1e-12


def test_manufactured_order():
    res = manufactured_convergence(2, grids=(16, 32))
    assert res["order"] >= 1.8


def test_convergence_order_fit():
    assert convergence_order([16, 32, 64], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0)


def test_incompatibility_limits():
    res = incompatibility_data(1.0)
    assert [r["limit"] for r in res["limits"]] == pytest.approx([1.0, 0.0, 0.5], abs=1e-8)
    assert [r["transformed"] for r in res["limits"]] == pytest.approx([1.0, 0.0, 0.5], abs=1e-12)


def test_continuity_of_transformed_solution():
    res = continuity_check(closed_form_solution(P012, 1), 2, M=64)
    assert res["max_jump"] <= res["bound"]
