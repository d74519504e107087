"""Interface-fitted triangular meshes around a spectral contour.

Interface vertices sit exactly on ``z(theta)`` at (approximately)
equal arclength.  One layer of vertices on each side completes
near-equilateral triangles on every interface edge, which makes those edges
Delaunay.  The rest of the domain is filled by a force-balance smoother
(Persson-Strang style) with a size field that grows linearly away from the
patch, then triangulated with ``scipy.spatial.Delaunay``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from ..contour2d import Contour, chord_arc, sample

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
MIN_ANGLE_DEG = 20.0


class MeshingError(ValueError):
    """The contour cannot be meshed at the requested size."""


@dataclass(frozen=True)
class OuterBall:
    """Truncated plane: disk of ``radius`` about the origin (default ``8 max|z|``)."""

    radius: float | None = None
    graded: bool = True


@dataclass(frozen=True)
class PeriodicBox:
    """Periodic square ``[-L, L)^2``."""

    half_length: float


@dataclass
class InterfaceMesh:
    """Triangulation whose edges include a polygonal copy of the contour.

    Attributes
    ----------
    tags
        ``+1`` for triangles in the patch, ``-1`` outside.
    interface_nodes
        Vertex indices along the contour, counterclockwise.
    interface_theta
        Contour parameter of each interface vertex.
    interface_edges
        ``(k, k+1)`` vertex pairs, counterclockwise.
    edge_normals
        Outward unit normal of the exact contour at each edge's mid-parameter.
    periodic_master
        Representative vertex for each vertex (identity unless periodic).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray
    interface_nodes: np.ndarray
    interface_theta: np.ndarray
    contour: Contour
    outer: OuterBall | PeriodicBox
    h: float
    boundary_nodes: np.ndarray
    periodic_master: np.ndarray
    interface_edges: np.ndarray = field(init=False)
    edge_theta: np.ndarray = field(init=False)
    edge_normals: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        nodes = self.interface_nodes
        self.interface_edges = np.column_stack([nodes, np.roll(nodes, -1)])
        th0 = self.interface_theta
        th1 = np.roll(th0, -1)
        th1 = np.where(th1 < th0, th1 + TWO_PI, th1)
        self.edge_theta = np.column_stack([th0, th1])
        mid = 0.5 * (th0 + th1)
        tan = self.contour(mid, 1)
        tan /= np.linalg.norm(tan, axis=1, keepdims=True)
        self.edge_normals = np.column_stack([tan[:, 1], -tan[:, 0]])

    @property
    def is_periodic(self) -> bool:
        return isinstance(self.outer, PeriodicBox)

    @property
    def outer_radius(self) -> float | None:
        return self.outer.radius if isinstance(self.outer, OuterBall) else None

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def phase_area(self, phase: int) -> float:
        return float(self.triangle_areas()[self.tags == phase].sum())

    def min_angle(self) -> float:
        """Smallest interior angle in degrees."""
        return float(np.degrees(_angles(self.vertices, self.triangles).min()))

    def edge_lengths(self) -> np.ndarray:
        e = self.interface_edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)


def _angles(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    a, b, c = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
    out = []
    for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
        d1, d2 = v - u, w - u
        cosang = np.sum(d1 * d2, axis=1) / (np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1))
        out.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return np.column_stack(out)


# ---------------------------------------------------------------------------
# contour geometry
# ---------------------------------------------------------------------------


def feature_size(contour: Contour) -> float:
    """Smallest of the minimum radius of curvature and the narrowest neck."""
    m = max(16 * contour.N, 512)
    th = TWO_PI * np.arange(m) / m
    d1, d2 = contour(th, 1), contour(th, 2)
    speed = np.linalg.norm(d1, axis=1)
    kappa = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3
    rho = 1.0 / max(float(kappa.max()), 1e-300)
    pts = contour(th)
    s = np.concatenate([[0.0], np.cumsum(speed[:-1])]) * TWO_PI / m
    perimeter = float(speed.sum() * TWO_PI / m)
    ds = np.abs(s[:, None] - s[None, :])
    ds = np.minimum(ds, perimeter - ds)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    far = ds >= np.pi * rho
    neck = float(dist[far].min()) if far.any() else math.inf
    return min(rho, neck)


def _arclength_thetas(contour: Contour, h: float) -> np.ndarray:
    m = max(64 * contour.N, 4096)
    th = TWO_PI * np.arange(m + 1) / m
    speed = np.linalg.norm(contour(th, 1), axis=1)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]))]) * TWO_PI / m
    n = max(12, int(math.ceil(s[-1] / h)))
    target = s[-1] * np.arange(n) / n
    return np.interp(target, s, th)


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule, chunked over points."""
    inside = np.zeros(len(pts), dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for start in range(0, len(pts), 4096):
        px = pts[start : start + 4096, 0:1]
        py = pts[start : start + 4096, 1:2]
        cond = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside[start : start + 4096] = np.sum(cond & (px < xint), axis=1) % 2 == 1
    return inside


def _segment_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    b = np.roll(poly, -1, axis=0)
    out = np.full(len(pts), np.inf)
    for start in range(0, len(pts), 2048):
        p = pts[start : start + 2048, None, :]
        ab = b - a
        t = np.clip(np.sum((p - a) * ab, axis=2) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        proj = a + t[..., None] * ab
        out[start : start + 2048] = np.linalg.norm(p - proj, axis=2).min(axis=1)
    return out


# ---------------------------------------------------------------------------
# mesh generation
# ---------------------------------------------------------------------------


def _hex_lattice(lo: np.ndarray, hi: np.ndarray, h: float) -> np.ndarray:
    dy = h * math.sqrt(3) / 2
    ys = np.arange(lo[1], hi[1] + dy, dy)
    xs = np.arange(lo[0], hi[0] + h, h)
    X, Y = np.meshgrid(xs, ys)
    X[1::2] += 0.5 * h
    return np.column_stack([X.ravel(), Y.ravel()])


def _unique_bars(tri: np.ndarray) -> np.ndarray:
    bars = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    bars.sort(axis=1)
    return np.unique(bars, axis=0)


def _smooth(
    p: np.ndarray,
    n_fixed: int,
    sdist,
    project,
    hfun,
    h0: float,
    max_iter: int,
) -> np.ndarray:
    """Force-balance relaxation of the free points ``p[n_fixed:]``."""
    fscale, deltat, ttol, dptol = 1.2, 0.2, 0.1, 2e-3
    pold = np.full_like(p, np.inf)
    bars = None
    for _ in range(max_iter):
        hl = hfun(p)
        if np.max(np.linalg.norm(p - pold, axis=1) / hl) > ttol:
            pold = p.copy()
            tri = Delaunay(p).simplices
            cen = p[tri].mean(axis=1)
            tri = tri[sdist(cen) < -1e-3 * h0]
            bars = _unique_bars(tri)
        vec = p[bars[:, 0]] - p[bars[:, 1]]
        L = np.linalg.norm(vec, axis=1)
        hb = hfun(0.5 * (p[bars[:, 0]] + p[bars[:, 1]]))
        L0 = hb * fscale * math.sqrt(np.sum(L**2) / np.sum(hb**2))
        F = np.maximum(L0 - L, 0.0)
        fvec = (F / L)[:, None] * vec
        ftot = np.zeros_like(p)
        np.add.at(ftot, bars[:, 0], fvec)
        np.add.at(ftot, bars[:, 1], -fvec)
        ftot[:n_fixed] = 0.0
        p = p + deltat * ftot
        p[n_fixed:] = project(p[n_fixed:])
        move = deltat * np.linalg.norm(ftot[n_fixed:], axis=1) / hl[n_fixed:]
        if move.size == 0 or move.max() < dptol:
            break
    return p


def mesh_from_contour(
    contour: Contour,
    h: float,
    outer: OuterBall | PeriodicBox | None = None,
    *,
    max_iter: int = 300,
    seed: int = 0,
) -> InterfaceMesh:
    """Fitted conforming mesh with interface vertices on the contour.

    Raises
    ------
    MeshingError
        If ``h`` exceeds half the contour's feature size, if the contour is
        close to self-intersecting, or if quality checks fail.
    """
    c = contour.oriented()
    outer = outer or OuterBall()
    key = (c.coeffs.tobytes(), c.coeffs.shape, float(h), outer, max_iter, seed)
    mesh = _CACHE.get(key)
    if mesh is None:
        mesh = _build_mesh(c, float(h), outer, max_iter, seed)
        if len(_CACHE) >= 32:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = mesh
    return mesh


_CACHE: dict[tuple, InterfaceMesh] = {}


def _build_mesh(
    c: Contour, h: float, outer: OuterBall | PeriodicBox, max_iter: int, seed: int
) -> InterfaceMesh:
    if not h > 0:
        raise MeshingError("mesh size must be positive")
    ca = chord_arc(c)
    if ca < 1e-3:
        raise MeshingError(f"contour is nearly self-intersecting (chord-arc {ca:.3e})")
    fs = feature_size(c)
    if h > 0.5 * fs:
        raise MeshingError(
            f"h={h} exceeds half the feature size {fs:.4g} (chord-arc {ca:.4g})"
        )

    theta = _arclength_thetas(c, h)
    zi = c(theta)
    zn = np.roll(zi, -1, axis=0)
    mid = 0.5 * (zi + zn)
    edge = zn - zi
    length = np.linalg.norm(edge, axis=1)
    nu = np.column_stack([edge[:, 1], -edge[:, 0]]) / length[:, None]
    offset = (math.sqrt(3) / 2 * length)[:, None] * nu
    layer_in, layer_out = mid - offset, mid + offset
    layers = np.concatenate([layer_in, layer_out])
    gap = _segment_distance(layers, zi)
    side_ok = np.concatenate(
        [_points_in_polygon(layer_in, zi), ~_points_in_polygon(layer_out, zi)]
    )
    if gap.min() < 0.6 * math.sqrt(3) / 2 * length.min() or not side_ok.all():
        raise MeshingError(
            f"interface layer overlaps the contour at h={h} (chord-arc {ca:.4g})"
        )

    center = np.zeros(2)
    r_in = float(np.linalg.norm(zi, axis=1).max())
    if isinstance(outer, OuterBall):
        R = outer.radius if outer.radius is not None else 8.0 * r_in
        if R <= r_in + 3 * h:
            raise MeshingError(f"outer radius {R} too close to the contour (max|z| = {r_in:.4g})")
        graded = outer.graded
        r_grade = 1.2 * r_in + 2 * h

        def hfun(x: np.ndarray) -> np.ndarray:
            if not graded:
                return np.full(len(x), h)
            return h * np.maximum(1.0, np.linalg.norm(x - center, axis=1) / r_grade)

        hR = float(hfun(np.array([[R, 0.0]]))[0])
        nb = max(16, int(math.ceil(TWO_PI * R / hR)))
        phi = TWO_PI * np.arange(nb) / nb
        boundary = R * np.column_stack([np.cos(phi), np.sin(phi)])
        r_poly = R * math.cos(math.pi / nb)

        def sdist(x: np.ndarray) -> np.ndarray:
            return np.linalg.norm(x, axis=1) - r_poly

        def project(x: np.ndarray) -> np.ndarray:
            r = np.linalg.norm(x, axis=1, keepdims=True)
            return np.where(r > r_poly, x * (r_poly / np.maximum(r, 1e-300)), x)

        outer = OuterBall(R, graded)
        lo, hi = np.array([-R, -R]), np.array([R, R])
    else:
        L = float(outer.half_length)
        if r_in > L - 3 * h:
            raise MeshingError(f"contour does not fit inside the periodic box of half-length {L}")
        ns = max(4, int(math.ceil(2 * L / h)))
        s = -L + 2 * L * np.arange(ns) / ns
        boundary = np.concatenate(
            [
                np.column_stack([s, np.full(ns, -L)]),
                np.column_stack([np.full(ns, L), s]),
                np.column_stack([-s, np.full(ns, L)]),
                np.column_stack([np.full(ns, -L), -s]),
            ]
        )
        hb = 2 * L / ns
        inset = 1e-9 * L

        def hfun(x: np.ndarray) -> np.ndarray:
            return np.full(len(x), min(h, hb))

        def sdist(x: np.ndarray) -> np.ndarray:
            return np.max(np.abs(x), axis=1) - (L - inset)

        def project(x: np.ndarray) -> np.ndarray:
            return np.clip(x, -(L - inset), L - inset)

        lo, hi = np.array([-L, -L]), np.array([L, L])

    fixed = np.concatenate([zi, layers, boundary])
    rng = np.random.default_rng(seed)
    cand = _hex_lattice(lo, hi, h)
    cand = cand[sdist(cand) < -0.3 * hfun(cand)]
    keep = rng.random(len(cand)) < (h / hfun(cand)) ** 2
    cand = cand[keep]
    tree = cKDTree(fixed)
    dist, _ = tree.query(cand)
    cand = cand[dist > 0.8 * hfun(cand)]
    # keep free points out of the band between the two layers
    band = _segment_distance(cand, zi)
    cand = cand[band > 1.2 * math.sqrt(3) / 2 * length.max()]

    p = np.concatenate([fixed, cand])
    p = _smooth(p, len(fixed), sdist, project, hfun, h, max_iter)

    tri = Delaunay(p).simplices
    cen = p[tri].mean(axis=1)
    tri = tri[sdist(cen) < 0]
    # counterclockwise orientation
    e1, e2 = p[tri[:, 1]] - p[tri[:, 0]], p[tri[:, 2]] - p[tri[:, 0]]
    flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=int)
    remap[used] = np.arange(len(used))
    p, tri = p[used], remap[tri]
    n_if = len(zi)
    if_nodes = remap[np.arange(n_if)]
    if np.any(if_nodes < 0):
        raise MeshingError(f"interface vertex dropped from the triangulation (chord-arc {ca:.4g})")
    bnodes = remap[np.arange(len(fixed) - len(boundary), len(fixed))]

    bars = {tuple(b) for b in _unique_bars(tri)}
    for a, b in zip(if_nodes, np.roll(if_nodes, -1)):
        if (min(a, b), max(a, b)) not in bars:
            raise MeshingError(f"interface edge missing from the triangulation (chord-arc {ca:.4g})")

    tags = np.where(_points_in_polygon(p[tri].mean(axis=1), zi), 1, -1).astype(np.int8)

    master = np.arange(len(p))
    if isinstance(outer, PeriodicBox):
        master = _periodic_master(p, bnodes, outer.half_length)

    mesh = InterfaceMesh(
        vertices=p,
        triangles=tri,
        tags=tags,
        interface_nodes=if_nodes,
        interface_theta=theta,
        contour=c,
        outer=outer,
        h=h,
        boundary_nodes=bnodes,
        periodic_master=master,
    )
    ang = mesh.min_angle()
    if ang < MIN_ANGLE_DEG:
        raise MeshingError(f"minimum angle {ang:.2f} deg below {MIN_ANGLE_DEG} deg")
    log.info("mesh: %d vertices, %d triangles, min angle %.1f deg", len(p), len(tri), ang)
    return mesh


def _periodic_master(p: np.ndarray, bnodes: np.ndarray, L: float) -> np.ndarray:
    master = np.arange(len(p))
    tol = 1e-9 * L
    bp = p[bnodes]
    tree = cKDTree(bp)
    for k, x in zip(bnodes, bp):
        y = x.copy()
        if abs(x[0] - L) < tol:
            y[0] = -L
        if abs(x[1] - L) < tol:
            y[1] = -L
        if np.any(y != x):
            d, j = tree.query(y)
            if d > tol:
                raise MeshingError("periodic boundary vertices do not match")
            master[k] = bnodes[j]
    # chase chains (corner -> edge -> corner)
    for _ in range(2):
        master = master[master]
    return master
