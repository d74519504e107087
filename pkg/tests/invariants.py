"""Module invariants as plain checks, shared by the property tests and the
acceptance battery.  Each check takes a seed (or explicit data) and raises
``AssertionError`` on violation."""

from __future__ import annotations

import json
import tempfile
from functools import lru_cache
from pathlib import Path

import numpy as np

import vortexpatch.lagrangian3d as L
from vortexpatch import contour2d as c2
from vortexpatch import flatten as fl
from vortexpatch.diagnostics import DiagnosticSeries
from vortexpatch.harness.report import RunReport, emit_series
from vortexpatch.harness.scenario import parse_scenario

ZERO_MEAN_TOL = 1e-12
COERCIVITY_FLOOR = 0.25

_SCEN = parse_scenario('[scenario]\nname = "battery"\ntarget = "simulate2d"\n')


@lru_cache(maxsize=None)
def grid(n: int = 8) -> L.PeriodicGrid:
    return L.PeriodicGrid(n)


@lru_cache(maxsize=None)
def ring(n: int = 8) -> L.PatchData3D:
    # the default band of 3 h is too wide for the ring at n = 8
    return L.ring_patch(grid(n), band=0.6)


def random_contour(seed: int, N: int = 6, amplitude: float = 0.1) -> c2.Contour:
    """Star-shaped band-limited contour around the unit circle."""
    rng = np.random.default_rng(seed)
    k = np.arange(2, N + 1)
    amps = amplitude * rng.uniform(-1, 1, k.size) / k
    phases = rng.uniform(0, 2 * np.pi, k.size)
    return c2.Contour.perturbed_circle(dict(zip(k.tolist(), amps)), N=4 * N,
                                       phases=dict(zip(k.tolist(), phases)))


def random_displacement(seed: int, g: L.PeriodicGrid, eps: float) -> np.ndarray:
    """Smooth periodic displacement built from a few low Fourier modes."""
    rng = np.random.default_rng(seed)
    x = g.coords
    xi = np.zeros((3,) + g.n)
    for _ in range(3):
        k = rng.integers(-2, 3, 3)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.standard_normal(3)
        xi += amp[:, None, None, None] * np.sin(np.tensordot(k, x, axes=1) + phase)
    scale = np.abs(g.grad(xi)).max()
    return xi if scale == 0 else eps * xi / scale


# -- contour2d -----------------------------------------------------------------


def check_realness(seed: int) -> None:
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 9))
    raw = rng.standard_normal((2, 2 * N + 1)) + 1j * rng.standard_normal((2, 2 * N + 1))
    z = c2.Contour(0.5 * (raw + np.conj(raw[:, ::-1])))
    assert np.all(z.coeffs == np.conj(z.coeffs[:, ::-1]))
    theta = rng.uniform(0, 2 * np.pi, 7)
    direct = np.einsum("cn,tn->tc", z.coeffs, np.exp(1j * np.outer(theta, z.modes)))
    assert np.abs(direct.imag).max() <= 1e-12 * max(1.0, np.abs(direct).max())
    np.testing.assert_allclose(z(theta), direct.real, atol=1e-12)


def check_rigid_motion_symmetry(seed: int) -> None:
    rng = np.random.default_rng(seed)
    z = random_contour(seed)
    ang = float(rng.uniform(0, 2 * np.pi))
    shift = rng.uniform(-1, 1, 2)
    R = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    moved = z.rotated(ang).translated(shift)
    assert abs(c2.area(moved) - c2.area(z)) <= 1e-12
    assert abs(c2.chord_arc(moved) - c2.chord_arc(z)) <= 1e-10
    assert abs(c2.sobolev_norm(z.rotated(ang), 2.5) - c2.sobolev_norm(z, 2.5)) <= 1e-10
    assert abs(c2.sobolev_norm(z.shifted_parameter(ang), 2.5) - c2.sobolev_norm(z, 2.5)) <= 1e-10
    x = rng.uniform(-1.5, 1.5, (4, 2))
    vort = c2.PatchVorticity()
    u = c2.patch_velocity(z, vort, x)
    u_moved = c2.patch_velocity(moved, vort, x @ R.T + shift)
    np.testing.assert_allclose(u_moved, u @ R.T, atol=1e-9)


def check_boundary_jacobian(seed: int) -> None:
    theta = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    assert np.abs(fl.boundary_jacobian_defect(random_contour(seed), theta)).max() <= 1e-8


# -- lagrangian3d --------------------------------------------------------------


def check_theta_zero_mean(seed: int, eps: float = 0.3) -> None:
    g = grid()
    d = ring()
    pack = L.jacobian_pack(random_displacement(seed, g, eps), g)
    C = L.transported_vorticity(pack.grad_eta, d.omega0)
    v, _ = L.variational_solve(C, pack, g, support=d.support)
    scale = max(1.0, float(np.abs(v).max()))
    assert L.zero_mean_defect(v, g) <= ZERO_MEAN_TOL * scale


def check_support_confinement(seed: int, eps: float = 0.3) -> None:
    g = grid()
    d = ring()
    pack = L.jacobian_pack(random_displacement(seed, g, eps), g)
    C = L.transported_vorticity(pack.grad_eta, d.omega0)
    assert np.all(C[:, ~d.support] == 0.0)


def check_coercivity_bound(G: np.ndarray) -> None:
    """``||G - I||_2 <= 1/4`` forces ``lambda_min(J A A^T) >= 1/4``."""
    pack = L.jacobian_pack_from_gradient(G)
    assert pack.displacement_norm() <= 0.25 + 1e-12
    lam, _ = pack.min_eigenvalue()
    assert lam >= COERCIVITY_FLOOR


def check_guard(seed: int) -> None:
    """Every iterate the guard admits satisfies both bounds."""
    g = grid()
    d = ring()
    rng = np.random.default_rng(seed)
    T = float(rng.uniform(0.1, 3.0))
    try:
        st = L.picard_solve(d.u0, d.omega0, g, T, 4, tol=1e-6, support=d.support)
    except L.GuardError as exc:
        assert exc.displacement > L.DISPLACEMENT_BOUND or exc.min_eigenvalue < L.COERCIVITY_FLOOR
        return
    except L.PicardError:
        return
    for pack in st.packs:
        assert pack.displacement_norm() <= L.DISPLACEMENT_BOUND
        assert pack.min_eigenvalue()[0] >= L.COERCIVITY_FLOOR


def check_acal_spd(seed: int) -> None:
    rng = np.random.default_rng(seed)
    G = np.eye(3)[:, :, None] + 0.3 * rng.standard_normal((3, 3, 16))
    G = G[:, :, np.linalg.det(np.moveaxis(G, 2, 0)) > 0]
    if G.shape[2] == 0:
        return
    pack = L.jacobian_pack_from_gradient(G)
    Am = np.moveaxis(pack.Acal, 2, 0)
    assert np.abs(Am - np.swapaxes(Am, 1, 2)).max() <= 1e-12
    assert np.linalg.eigvalsh(Am).min() > 0


# -- harness -------------------------------------------------------------------


def random_series(seed: int) -> DiagnosticSeries:
    rng = np.random.default_rng(seed)
    d = DiagnosticSeries()
    t = np.cumsum(rng.uniform(0, 1, int(rng.integers(0, 6))))
    for ti in t:
        for name in ("alpha", "beta"):
            d.add(float(ti), name, float(rng.standard_normal() * 10.0 ** rng.integers(-20, 20)))
    return d


def check_byte_determinism(seed: int) -> None:
    rep = RunReport(_SCEN, "0" * 16, {}, [], {"g": random_series(seed), "h": random_series(seed + 1)})
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        emit_series(rep, a)
        emit_series(rep, b)
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()
        manifest = json.loads((a / "manifest.json").read_text())
        assert len(manifest["series"]) == len(rep.series["g"].names()) + len(rep.series["h"].names())


BATTERY = {
    "realness": check_realness,
    "rigid_motion_symmetry": check_rigid_motion_symmetry,
    "boundary_jacobian": check_boundary_jacobian,
    "theta_zero_mean": check_theta_zero_mean,
    "support_confinement": check_support_confinement,
    "guard": check_guard,
    "acal_spd": check_acal_spd,
    "byte_determinism": check_byte_determinism,
}
