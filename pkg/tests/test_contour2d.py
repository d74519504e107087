import numpy as np
import pytest

from vortexpatch import contour2d as c2
from vortexpatch.contour2d import Contour, PatchVorticity
from vortexpatch.diagnostics import DiagnosticSeries
from vortexpatch.oracles import kirchhoff_rate, rankine_velocity

VORT = PatchVorticity()


def test_circle_samples_are_exact():
    z = Contour.circle(2.0, center=(1.0, -1.0))
    pts, _ = c2.sample(z, 8)
    theta = c2.theta_grid(8)
    expected = np.stack([1.0 + 2.0 * np.cos(theta), -1.0 + 2.0 * np.sin(theta)], axis=1)
    np.testing.assert_allclose(pts, expected, atol=1e-15)


def test_non_conjugate_coefficients_rejected():
    coeffs = Contour.circle(1.0, N=4).coeffs.copy()
    coeffs[0, coeffs.shape[1] // 2 + 1] += 0.1j
    with pytest.raises(ValueError):
        Contour(coeffs)


def test_from_samples_round_trip():
    z = Contour.perturbed_circle({3: 0.1, 5: 0.05}, N=16)
    pts, _ = c2.sample(z, 64)
    back = Contour.from_samples(pts, N=16)
    np.testing.assert_allclose(back.coeffs, z.coeffs, atol=1e-14)


def test_areas_match_closed_forms():
    assert c2.area(Contour.circle(1.5)) == pytest.approx(np.pi * 2.25, rel=1e-14)
    assert c2.area(Contour.ellipse(1.0, 0.5, angle=0.7)) == pytest.approx(np.pi * 0.5, rel=1e-14)
    # clockwise traversal carries a negative signed area
    assert c2.area(Contour.circle(1.0).reversed()) == pytest.approx(-np.pi, rel=1e-14)


def test_chord_arc_of_circle():
    # inf over d of 2 sin(d/2) / d on (0, pi] is attained at d = pi
    assert c2.chord_arc(Contour.circle(1.0, N=16)) == pytest.approx(2.0 / np.pi, rel=1e-12)


def test_figure_eight_is_self_intersecting():
    z = Contour.from_function(lambda t: np.stack([np.sin(t), np.sin(2 * t)], axis=-1), N=8)
    rep = c2.chord_arc_report(z)
    assert rep.self_intersecting
    assert rep.value == 0.0


def test_sobolev_norm_of_unit_circle():
    # 2 pi * sum_n (1 + n^2)^s |z_n|^2 with the two modes n = +-1 of each component
    assert c2.sobolev_norm(Contour.circle(1.0, N=8), 1.0) == pytest.approx(2 * np.sqrt(np.pi), rel=1e-14)
    assert c2.sobolev_norm(Contour.circle(1.0, N=8), 0.0) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-14)


def test_orientation_is_normalised():
    z = Contour.circle(1.0, N=8).reversed()
    assert not z.is_counterclockwise()
    assert z.oriented().is_counterclockwise()


def test_winding_number():
    z = Contour.ellipse(1.0, 0.5, N=8)
    w = c2.winding_number(z, [[0.0, 0.0], [0.9, 0.0], [1.1, 0.0], [0.0, 0.6]])
    np.testing.assert_array_equal(np.round(w), [1, 1, 0, 0])


def test_hausdorff_distance_of_translated_circle():
    a = Contour.circle(1.0, N=16)
    b = a.translated((0.3, 0.0))
    assert c2.hausdorff_distance(a, b) == pytest.approx(0.3, abs=1e-10)
    assert c2.hausdorff_distance(a, a.shifted_parameter(0.4)) < 1e-12


@pytest.mark.parametrize("pt", [[0.0, 0.0], [0.5, 0.2], [-0.3, 0.6], [2.0, 0.0], [1.0, 1.5], [0.999, 0.0]])
def test_rankine_velocity_matches_oracle(pt):
    u = c2.patch_velocity(Contour.circle(1.0, N=32), VORT, np.array([pt]))
    np.testing.assert_allclose(u[0], rankine_velocity(np.array(pt)), atol=1e-10)


def test_ellipse_interior_velocity_is_linear():
    # inside a uniform elliptical patch u = (-a y, b x) / (a + b) in body axes
    a, b, ang = 1.0, 0.6, 0.3
    z = Contour.ellipse(a, b, angle=ang, N=32)
    R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    pts = np.array([[0.2, 0.1], [-0.4, 0.3], [0.0, -0.5]])
    body = pts @ R
    ub = np.stack([-a * body[:, 1], b * body[:, 0]], axis=1) / (a + b)
    np.testing.assert_allclose(c2.patch_velocity(z, VORT, pts), ub @ R.T, atol=1e-10)


def test_ellipse_velocity_against_area_quadrature():
    # frozen from the area-quadrature oracle with a = 1, b = 0.6, angle = 0.3
    pts = np.array([[0.2, 0.1], [1.5, -0.4], [0.0, 0.9]])
    frozen = np.array([
        [-0.04620063335149514, 0.07230857870982016],
        [0.06322304573277253, 0.1875267138411758],
        [-0.2886392017202662, -0.021616953678717705],
    ])
    z = Contour.ellipse(1.0, 0.6, angle=0.3, N=64)
    np.testing.assert_allclose(c2.patch_velocity(z, VORT, pts), frozen, atol=1e-9)


def test_velocity_gradient_inside_rankine():
    g = c2.velocity_gradient(Contour.circle(1.0, N=16), VORT, np.array([[0.3, -0.2]]))
    np.testing.assert_allclose(g[0], [[0.0, -0.5], [0.5, 0.0]], atol=1e-10)


def test_background_vorticity_adds_solid_rotation():
    vort = PatchVorticity(omega_plus=2.0, omega_minus=0.5)
    u = c2.patch_velocity(Contour.circle(1.0, N=16), vort, np.array([[2.0, 0.0]]))
    expected = 1.5 * rankine_velocity(np.array([2.0, 0.0])) + 0.5 * 0.5 * np.array([0.0, 2.0])
    np.testing.assert_allclose(u[0], expected, atol=1e-10)


def test_step_rejects_cfl_violation():
    z = Contour.circle(1.0, N=16)
    with pytest.raises(c2.CFLError):
        c2.step(z, VORT, 10.0)


def test_step_rejects_chord_arc_collapse():
    z = Contour.circle(1.0, N=16)
    with pytest.raises(c2.StepRejected) as info:
        c2.step(z, VORT, 0.01, min_chord_arc=0.9)
    assert info.value.chord_arc == pytest.approx(2 / np.pi, rel=1e-6)


def test_rankine_is_stationary():
    z = Contour.circle(1.0, N=16)
    res = c2.evolve(z, VORT, 0.05, 0.5)
    assert c2.hausdorff_distance(z, res.contour) < 1e-10
    # RK4 damps a pure rotation by (lambda dt)^6 / 144 per step
    assert abs(c2.area(res.contour) - np.pi) < 1e-9


def test_short_kirchhoff_rotation():
    z = Contour.ellipse(1.0, 0.5, N=32)
    res = c2.evolve(z, VORT, 0.05, 1.0)
    rate = c2.orientation_angle(res.contour) / 1.0
    assert rate == pytest.approx(kirchhoff_rate(1.0, 0.5), rel=1e-6)
    assert c2.ellipse_deformation(res.contour) < 1e-12


def test_deformation_detects_non_elliptic_shape():
    assert c2.ellipse_deformation(Contour.ellipse(1.0, 0.5, angle=0.4, N=16)) < 1e-25
    assert c2.ellipse_deformation(Contour.perturbed_circle({3: 0.05}, N=16)) > 1e-3


def test_monitor_reports_three_summands():
    res = c2.evolve(Contour.circle(1.0, N=16), VORT, 0.1, 0.3, monitor_every=1)
    assert isinstance(res.diagnostics, DiagnosticSeries)
    assert set(c2.F_MONITOR_NAMES) <= set(res.diagnostics.names())
    t, v = res.diagnostics.series("velocity_gradient_sup")
    np.testing.assert_allclose(v, 0.5, atol=1e-8)
    np.testing.assert_allclose(res.diagnostics.series("inverse_chord_arc")[1], np.pi / 2, rtol=1e-8)


def test_checkpoint_round_trip(tmp_path):
    z = Contour.perturbed_circle({3: 0.1}, N=16).with_time(0.25)
    c2.save_checkpoint(z, tmp_path / "z.json")
    back = c2.load_checkpoint(tmp_path / "z.json")
    np.testing.assert_array_equal(back.coeffs, z.coeffs)
    assert back.time == 0.25
