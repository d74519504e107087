import numpy as np
import pytest

import vortexpatch.lagrangian3d as L
from vortexpatch.lagrangian3d import PeriodicField3D, PeriodicGrid


@pytest.fixture(scope="module")
def grid16():
    return PeriodicGrid(16)


def _smooth_displacement(grid, eps=0.05):
    x1, x2, x3 = grid.coords
    return eps * np.stack([np.sin(x2), np.sin(x3) * np.cos(x1), np.cos(x1 + x2)])


# -- grid ---------------------------------------------------------------------


def test_spectral_derivative_is_exact(grid16):
    x1, x2, _ = grid16.coords
    f = np.sin(3 * x1) * np.cos(2 * x2)
    np.testing.assert_allclose(grid16.deriv(f, 0), 3 * np.cos(3 * x1) * np.cos(2 * x2), atol=1e-12)
    np.testing.assert_allclose(grid16.deriv(f, 1), -2 * np.sin(3 * x1) * np.sin(2 * x2), atol=1e-12)


def test_nyquist_mode_is_annihilated(grid16):
    idx = np.arange(16)
    f = np.broadcast_to(((-1.0) ** idx)[:, None, None], grid16.n).copy()
    np.testing.assert_allclose(grid16.deriv(f, 0), 0.0, atol=1e-12)


def test_fd4_converges_at_fourth_order():
    errs = []
    for n in (16, 32):
        g = PeriodicGrid(n, method="fd4")
        x1 = g.coords[0]
        errs.append(np.abs(g.deriv(np.sin(x1), 0) - np.cos(x1)).max())
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.1)


def test_curl_of_gradient_and_div_of_curl_vanish(grid16):
    x1, x2, x3 = grid16.coords
    phi = np.sin(x1) * np.cos(2 * x2) + np.sin(x3)
    grad_phi = np.stack([grid16.deriv(phi, r) for r in range(3)])
    np.testing.assert_allclose(grid16.curl(grad_phi), 0.0, atol=1e-12)
    F = _smooth_displacement(grid16, 1.0)
    np.testing.assert_allclose(grid16.div(grid16.curl(F)), 0.0, atol=1e-12)


def test_field_shape_is_validated(grid16):
    PeriodicField3D(grid16, np.zeros((3, 16, 16, 16)))
    with pytest.raises(ValueError):
        PeriodicField3D(grid16, np.zeros((2, 16, 16, 16)))


# -- flow map and Jacobians ----------------------------------------------------


def test_flow_map_is_exact_for_linear_velocity():
    t = L.time_grid(1.0, 4)
    v = np.broadcast_to(t[:, None, None], (5, 3, 4)).copy()
    xi = L.flow_map(v, t)
    np.testing.assert_array_equal(xi[0], 0.0)
    np.testing.assert_allclose(xi[-1], 0.5, atol=1e-15)


def test_flow_map_is_second_order_in_time():
    errs = []
    for M in (8, 16):
        t = L.time_grid(1.0, M)
        v = np.cos(t)[:, None, None] * np.ones((1, 3, 1))
        errs.append(abs(L.flow_map(v, t)[-1, 0, 0] - np.sin(1.0)))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def test_jacobian_pack_against_dense_inverse():
    rng = np.random.default_rng(3)
    G = np.eye(3)[:, :, None] + 0.15 * rng.standard_normal((3, 3, 20))
    G[:, :, 0] = np.diag([2.0, 1.0, 1.0])
    pack = L.jacobian_pack_from_gradient(G)
    for k in range(20):
        Gk = G[:, :, k]
        Ak = np.linalg.inv(Gk)
        J = np.linalg.det(Gk)
        np.testing.assert_allclose(pack.A[:, :, k], Ak, atol=1e-12)
        assert pack.J[k] == pytest.approx(J, rel=1e-12)
        np.testing.assert_allclose(pack.Acal[:, :, k], J * Ak @ Ak.T, atol=1e-12)
    np.testing.assert_allclose(pack.Acal[:, :, 0], np.diag([0.5, 2.0, 2.0]), atol=1e-15)


def test_orientation_reversal_raises():
    G = np.broadcast_to(np.diag([-1.0, 1.0, 1.0])[:, :, None, None, None], (3, 3, 2, 2, 2)).copy()
    with pytest.raises(L.JacobianError):
        L.jacobian_pack_from_gradient(G)


def test_identity_flow_map(grid16):
    pack = L.jacobian_pack(np.zeros((3,) + grid16.n), grid16)
    np.testing.assert_array_equal(pack.J, 1.0)
    assert pack.displacement_norm() == 0.0
    assert pack.min_eigenvalue()[0] == pytest.approx(1.0)


def test_inverse_gradient_identity(grid16):
    pack = L.jacobian_pack(_smooth_displacement(grid16, 0.2), grid16)
    prod = np.einsum("ri...,is...->rs...", pack.A, pack.grad_eta)
    assert np.abs(prod - np.eye(3)[:, :, None, None, None]).max() < 1e-12


# -- curl_eta and the transported vorticity -----------------------------------


def test_curl_eta_reduces_to_curl(grid16):
    x1 = grid16.coords[0]
    F = np.stack([np.zeros_like(x1), np.sin(x1), np.zeros_like(x1)])
    A = np.broadcast_to(np.eye(3)[:, :, None, None, None], (3, 3) + grid16.n)
    np.testing.assert_allclose(L.curl_eta(F, A, grid16), grid16.curl(F), atol=1e-13)


def test_curl_eta_of_pulled_back_gradient_vanishes():
    g = PeriodicGrid(32)
    xi = _smooth_displacement(g, 0.1)
    y1, y2, y3 = g.coords + xi
    # F = (grad phi) o eta for phi = sin y1 cos y2 + sin y3
    F = np.stack([np.cos(y1) * np.cos(y2), -np.sin(y1) * np.sin(y2), np.cos(y3)])
    pack = L.jacobian_pack(xi, g)
    assert np.abs(L.curl_eta(F, pack.A, g)).max() < 1e-9


def test_transported_vorticity(grid16):
    d = L.ring_patch(grid16)
    identity = np.broadcast_to(np.eye(3)[:, :, None, None, None], (3, 3) + grid16.n)
    np.testing.assert_array_equal(L.transported_vorticity(identity, d.omega0), d.omega0)
    pack = L.jacobian_pack(_smooth_displacement(grid16), grid16)
    C = L.transported_vorticity(pack.grad_eta, d.omega0)
    assert np.all(C[:, ~d.support] == 0.0)


# -- variational solve --------------------------------------------------------


def test_variational_solve_recovers_shear(grid16):
    x1 = grid16.coords[0]
    z = np.zeros_like(x1)
    C = np.stack([z, z, np.cos(x1)])
    pack = L.jacobian_pack(np.zeros((3,) + grid16.n), grid16)
    v, rep = L.variational_solve(C, pack, grid16)
    np.testing.assert_allclose(v, np.stack([z, np.sin(x1), z]), atol=1e-12)
    assert rep.iterations <= 2


def test_variational_solve_zero_data(grid16):
    pack = L.jacobian_pack(_smooth_displacement(grid16), grid16)
    v, _ = L.variational_solve(np.zeros((3,) + grid16.n), pack, grid16)
    np.testing.assert_array_equal(v, 0.0)


def test_variational_solution_has_zero_mean(grid16):
    d = L.ring_patch(grid16)
    pack = L.jacobian_pack(_smooth_displacement(grid16, 0.05), grid16)
    C = L.transported_vorticity(pack.grad_eta, d.omega0)
    v, _ = L.variational_solve(C, pack, grid16, tol=1e-11)
    assert L.zero_mean_defect(v, grid16) <= 1e-12
    rhs = L.variational_rhs(C, pack, grid16)
    assert np.isfinite(rhs).all()


def test_coercivity_failure_names_the_node(grid16):
    pack = L.jacobian_pack(np.zeros((3,) + grid16.n), grid16)
    Acal = pack.Acal.copy()
    # an indefinite slab makes CG break down; one node is the worst
    Acal[:, :, :6] = -np.eye(3)[:, :, None, None, None]
    Acal[:, :, 2, 3, 4] = -2.0 * np.eye(3)
    bad = L.JacobianPack(pack.grad_eta, pack.A, pack.J, Acal)
    C = L.ring_patch(grid16).omega0
    with pytest.raises(L.CoercivityError) as info:
        L.variational_solve(C, bad, grid16)
    assert info.value.node == (2, 3, 4)
    assert info.value.eigenvalue == pytest.approx(-2.0)


def test_support_violation_is_rejected(grid16):
    d = L.ring_patch(grid16)
    pack = L.jacobian_pack(np.zeros((3,) + grid16.n), grid16)
    with pytest.raises(ValueError):
        L.variational_solve(np.ones((3,) + grid16.n), pack, grid16, support=d.support)


# -- Picard iteration ---------------------------------------------------------


def test_zero_data_converges_in_one_iteration(grid16):
    d = L.zero_data(grid16)
    st = L.picard_solve(d.u0, d.omega0, grid16, 0.5, 4)
    assert st.converged and st.iterations == 1
    np.testing.assert_array_equal(st.v, 0.0)


@pytest.fixture(scope="module")
def ring_state(grid16):
    d = L.ring_patch(grid16)
    return d, L.picard_solve(d.u0, d.omega0, grid16, 0.5, 4, support=d.support)


def test_ring_contracts_monotonically(ring_state):
    _, st = ring_state
    assert st.converged
    assert all(b < a for a, b in zip(st.differences, st.differences[1:]))
    assert max(st.factors[1:]) <= 0.5


def test_fixed_point_is_stable(grid16, ring_state):
    d, st = ring_state
    vbar, _ = L.picard_step(st.v, st.times, d.omega0, grid16, 1e-11, d.support)
    assert L.sup_l2(vbar - st.v, grid16) <= 1e-6


def test_guard_fires_for_long_horizons(grid16):
    d = L.ring_patch(grid16)
    with pytest.raises(L.GuardError) as info:
        L.picard_solve(d.u0, d.omega0, grid16, 2.0, 4, support=d.support)
    assert info.value.displacement > L.DISPLACEMENT_BOUND


def test_euler_diagnostics(ring_state):
    d, st = ring_state
    diag = L.euler_diagnostics(st, d.surface.vertices, d.surface.normals)
    assert set(L.EULER_DIAGNOSTIC_NAMES) <= set(diag.names())
    t, jd = diag.series("jacobian_defect")
    assert t.size == st.M + 1
    assert jd[0] == 0.0
    assert diag.series("mean_transported_vorticity")[1].max() < 1e-12


# -- data and I/O -------------------------------------------------------------


@pytest.mark.parametrize("name", ["ring", "ball"])
def test_preset_data_is_admissible(grid16, name):
    d = L.preset(name, grid16)
    assert d.divergence() < 1e-10
    assert np.abs(d.mean_velocity()).max() < 1e-12
    assert np.abs(d.mean_vorticity()).max() < 1e-12
    assert d.tangency() < 0.1
    assert np.all(d.omega0[:, ~d.support] == 0.0)


def test_ring_rejects_overlapping_band(grid16):
    with pytest.raises(ValueError):
        L.ring_patch(grid16, major=0.6, minor=0.5)


def test_smooth_step_limits():
    s = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    np.testing.assert_array_equal(L.smooth_step(s), [1.0, 1.0, 0.5, 0.0, 0.0])
    assert np.all(np.diff(L.smooth_step(np.linspace(-1, 1, 101))) <= 0)


def test_snapshot_round_trip(grid16, tmp_path):
    d = L.ring_patch(grid16)
    f = PeriodicField3D(grid16, d.u0, "u0")
    L.save_field(f, tmp_path / "u0.vpf")
    back = L.load_field(tmp_path / "u0.vpf")
    np.testing.assert_array_equal(back.values, f.values)
    assert back.name == "u0" and back.grid.n == grid16.n


def test_corrupt_snapshot_is_rejected(tmp_path):
    p = tmp_path / "bad.vpf"
    p.write_bytes(b"NOPE\n{}\n")
    with pytest.raises(ValueError):
        L.load_field(p)
