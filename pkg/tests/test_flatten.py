import numpy as np
import pytest

from vortexpatch import flatten as fl
from vortexpatch.contour2d import Contour

THETA = np.linspace(0.0, 2 * np.pi, 100, endpoint=False)


def test_circle_extends_to_identity():
    zmap = fl.solve_disk_extension(Contour.circle(1.0, N=8))
    r = np.array([0.0, 0.3, 0.7, 1.0])
    t = np.array([0.0, 0.1, 2.0, 4.0])
    np.testing.assert_allclose(fl.evaluate(zmap, r, t), np.stack([r * np.cos(t), r * np.sin(t)], -1), atol=1e-15)


def test_identity_map_norms():
    # |Z|^2 integrates to pi/2 on the unit disk and |grad Z|^2 = 2
    zmap = fl.solve_disk_extension(Contour.circle(1.0, N=8))
    assert fl.disk_sobolev_norm(zmap, 0) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-14)
    assert fl.disk_sobolev_norm(zmap, 1) == pytest.approx(np.sqrt(np.pi / 2 + 2 * np.pi), rel=1e-14)
    assert fl.disk_sobolev_norm(zmap, 2, seminorm=True) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("amps", [{3: 0.1, 5: 0.05}, {2: 0.2}, {7: 0.02, 4: 0.03}])
def test_disk_map_matches_boundary_data(amps):
    z = Contour.perturbed_circle(amps, N=32)
    zmap = fl.solve_disk_extension(z)
    np.testing.assert_allclose(fl.evaluate(zmap, np.ones_like(THETA), THETA), z(THETA), atol=1e-13)
    assert np.abs(fl.boundary_jacobian_defect(z, THETA)).max() <= 1e-8


def test_disk_map_is_biharmonic():
    z = Contour.perturbed_circle({3: 0.1, 5: 0.05}, N=16)
    for p in fl.solve_disk_extension(z).polynomial():
        lap2 = p.d_w().d_wbar().d_w().d_wbar()
        w = np.array([0.1 + 0.2j, -0.5j, 0.3])
        np.testing.assert_allclose(lap2(w), 0.0, atol=1e-12)


def test_annulus_map_boundary_values():
    z = Contour.perturbed_circle({3: 0.1}, N=16)
    zmap = fl.solve_annulus_extension(z)
    R = zmap.R
    assert zmap.r_range == (1.0, R)
    np.testing.assert_allclose(fl.evaluate(zmap, np.ones_like(THETA), THETA), z(THETA), atol=1e-12)
    outer = fl.evaluate(zmap, np.full_like(THETA, R), THETA)
    np.testing.assert_allclose(outer, R * np.stack([np.cos(THETA), np.sin(THETA)], -1), atol=1e-12)


def test_annulus_radius_errors():
    z = Contour.circle(1.0, N=8)
    with pytest.raises(ValueError):
        fl.solve_annulus_extension(z, R=0.9)
    with pytest.raises(fl.ConditioningError):
        fl.solve_annulus_extension(z, R=1 + 1e-9)


def test_perturbed_map_is_injective_inside():
    z = Contour.perturbed_circle({3: 0.1, 5: 0.05}, N=32)
    zmap = fl.solve_disk_extension(z)
    margin, eps = fl.injectivity_margin(zmap, z)
    assert margin > 0 and eps > 0
    assert fl.maps_inside(zmap, z, 0.01)


def test_gain_ratio_family_is_bounded():
    contours, eps = fl.roughening_family(3, members=10, N=128)
    rows = fl.sobolev_gain_ratio(contours, 3)
    ratios = np.array([r.map_norm / r.contour_norm for r in rows])
    assert len(rows) == 10
    assert ratios.max() / ratios.min() <= 10.0


def test_map_round_trip(tmp_path):
    zmap = fl.solve_annulus_extension(Contour.perturbed_circle({3: 0.1}, N=16))
    fl.save_map(zmap, tmp_path / "m.json")
    back = fl.load_map(tmp_path / "m.json")
    assert back.side == zmap.side and back.R == zmap.R
    np.testing.assert_array_equal(back.radial, zmap.radial)
