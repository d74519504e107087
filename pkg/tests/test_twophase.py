import numpy as np
import pytest

from vortexpatch import oracles
from vortexpatch.contour2d import Contour
from vortexpatch.twophase import (
    CompatibilityError,
    MeshingError,
    PeriodicBox,
    PositivityError,
    TwoPhaseProblem,
    error_norms,
    measure_interface_jump,
    mesh_from_contour,
    solve_stream_2d,
    solve_velocity_2d,
    solve_weak,
)
from vortexpatch.twophase import fem
from vortexpatch.twophase.io import write_mesh, write_solution
from vortexpatch.twophase.study import convergence_study, fit_rates

CIRCLE = Contour.circle(1.0, N=8)


@pytest.fixture(scope="module")
def disk_mesh():
    return mesh_from_contour(CIRCLE, 0.2)


def _linear(x):
    return 1.0 + 2.0 * x[..., 0] - 3.0 * x[..., 1]


def test_mesh_quality_and_fitting(disk_mesh):
    m = disk_mesh
    assert m.min_angle() >= 20.0
    on = m.vertices[m.interface_nodes]
    np.testing.assert_allclose(on, CIRCLE(m.interface_theta), atol=1e-14)
    assert set(np.unique(m.tags)) == {-1, 1}
    # an inscribed polygon with chords of length h loses about pi h^2 / 6
    assert abs(m.phase_area(1) - np.pi) <= 0.6 * m.h**2


def test_mesh_rejects_coarse_size():
    with pytest.raises(MeshingError):
        mesh_from_contour(CIRCLE, 2.0)


def test_periodic_mesh_pairs_boundary_nodes():
    m = mesh_from_contour(CIRCLE, 0.3, PeriodicBox(2.5))
    assert m.is_periodic
    slaves = np.flatnonzero(m.periodic_master != np.arange(len(m.vertices)))
    assert slaves.size > 0
    d = m.vertices[slaves] - m.vertices[m.periodic_master[slaves]]
    # each slave sits one period away from its master along x, y or both
    np.testing.assert_allclose(np.abs(d) % 5.0, 0.0, atol=1e-12)


@pytest.mark.parametrize("degree", [1, 2])
def test_linear_patch_test(disk_mesh, degree):
    sol = solve_weak(TwoPhaseProblem(dirichlet=_linear), disk_mesh, degree)
    np.testing.assert_allclose(sol.values[:, 0], _linear(sol.space.dof_coords), atol=1e-7)


def test_stiffness_is_symmetric_with_zero_row_sums(disk_mesh):
    space = fem.FESpace(disk_mesh, 1)
    geom = space.geometry()
    K = fem.assemble_stiffness(space, fem.coefficient_at(space, geom, None, None), geom)
    assert abs(K - K.T).max() < 1e-12
    np.testing.assert_allclose(K @ np.ones(space.ndof), 0.0, atol=1e-12)


def test_negative_coefficient_is_rejected(disk_mesh):
    neg = lambda x: -np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2))  # noqa: E731
    with pytest.raises(PositivityError):
        solve_weak(TwoPhaseProblem(a_plus=neg), disk_mesh)


def test_incompatible_periodic_load():
    m = mesh_from_contour(CIRCLE, 0.3, PeriodicBox(2.5))
    with pytest.raises(CompatibilityError):
        solve_weak(TwoPhaseProblem(f_plus=1.0), m)


def test_rankine_stream_error(disk_mesh):
    sol = solve_stream_2d(CIRCLE, disk_mesh)
    err = error_norms(sol, (oracles.rankine_stream, oracles.rankine_stream))
    assert err["nodal_l2"] < 0.06
    drop = sol.evaluate(np.zeros((1, 2)))[0, 0] - oracles.rankine_stream(np.array([1.0, 0.0]))
    assert drop == pytest.approx(-0.25, abs=0.02)


def test_velocity_value_is_continuous(disk_mesh):
    sol = solve_velocity_2d(CIRCLE, disk_mesh)
    jump = measure_interface_jump(sol, "value")
    assert np.abs(jump.values).max() <= 1e-12
    tang = measure_interface_jump(sol, "normal-derivative")
    mean = np.sum(tang.tangential() * tang.lengths) / tang.lengths.sum()
    assert mean == pytest.approx(-1.0, abs=0.1)


def test_fit_rates_recovers_power_law():
    h = [0.4, 0.2, 0.1]
    rates = fit_rates(h, {"e": [3 * x**2 for x in h]})
    assert rates["e"] == pytest.approx(2.0, abs=1e-12)


def test_convergence_study_needs_three_sizes():
    with pytest.raises(ValueError):
        convergence_study(lambda h: {"e": h}, [0.2, 0.1])


def test_io_writes_headers(disk_mesh, tmp_path):
    paths = write_mesh(disk_mesh, tmp_path)
    assert all(p.exists() for p in paths.values())
    sol = solve_stream_2d(CIRCLE, disk_mesh)
    p = write_solution(sol, tmp_path / "psi.csv")
    assert p.read_text().splitlines()[0].startswith("x,y")
