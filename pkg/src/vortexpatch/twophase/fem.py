"""Lagrange finite elements on an interface-fitted mesh.

P1 and isoparametric P2 are supported.  For P2 the midpoint of every
interface edge is moved onto the contour (at the mid-parameter), so elements
touching the interface are curved and the discrete interface is a
piecewise-quadratic interpolant of ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .mesh import InterfaceMesh

LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def line_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on ``[0, 1]``; exact to degree ``2n - 1``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the reference triangle ``{xi, eta >= 0, xi + eta <= 1}``.

    Uses ``(xi, eta) = (u, v (1 - u))`` with ``n`` Gauss points per
    direction; exact to degree ``2n - 2``.  Weights sum to ``1/2``.
    """
    s, w = line_rule(n)
    u, v = np.meshgrid(s, s, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([u.ravel(), (v * (1 - u)).ravel()])
    wts = (wu * wv * (1 - u)).ravel()
    return pts, wts


# ---------------------------------------------------------------------------
# shape functions
# ---------------------------------------------------------------------------


def shape_functions(degree: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values ``(nq, nloc)`` and reference gradients ``(nq, nloc, 2)``."""
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1 - xi - eta, xi, eta
    d0, d1, d2 = np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])
    nq = len(pts)
    if degree == 1:
        N = np.column_stack([l0, l1, l2])
        dN = np.broadcast_to(np.stack([d0, d1, d2]), (nq, 3, 2)).copy()
        return N, dN
    if degree != 2:
        raise ValueError("degree must be 1 or 2")
    lam = (l0, l1, l2)
    dl = (d0, d1, d2)
    N = np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0]
    )
    dN = np.zeros((nq, 6, 2))
    for i in range(3):
        dN[:, i] = (4 * lam[i] - 1)[:, None] * dl[i]
    for k, (i, j) in enumerate(LOCAL_EDGES):
        dN[:, 3 + k] = 4 * (lam[j][:, None] * dl[i] + lam[i][:, None] * dl[j])
    return N, dN


def edge_shape_functions(degree: int, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1-D trace basis on an edge: endpoints first, then the midpoint for P2."""
    if degree == 1:
        return np.column_stack([1 - s, s]), np.column_stack([-np.ones_like(s), np.ones_like(s)])
    N = np.column_stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)])
    dN = np.column_stack([4 * s - 3, 4 * s - 1, 4 - 8 * s])
    return N, dN


# ---------------------------------------------------------------------------
# function space
# ---------------------------------------------------------------------------


@dataclass
class Geometry:
    """Per-element, per-quadrature-point mapping data."""

    x: np.ndarray  # (nt, nq, 2)
    det: np.ndarray  # (nt, nq)
    grad: np.ndarray  # (nt, nq, nloc, 2) physical shape gradients
    N: np.ndarray  # (nq, nloc)
    weights: np.ndarray  # (nq,)

    @property
    def dx(self) -> np.ndarray:
        """Quadrature weights times |det J|, shape ``(nt, nq)``."""
        return self.weights[None, :] * np.abs(self.det)


@dataclass
class FESpace:
    mesh: InterfaceMesh
    degree: int = 1
    element_dofs: np.ndarray = field(init=False)
    dof_coords: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)
    master: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        m = self.mesh
        tri = m.triangles
        nv = len(m.vertices)
        loc = np.concatenate([tri[:, list(e)] for e in LOCAL_EDGES])
        loc.sort(axis=1)
        edges, inverse = np.unique(loc, axis=0, return_inverse=True)
        inverse = inverse.reshape(3, -1).T
        self.edges = edges
        self._tri_edges = inverse
        if self.degree == 1:
            self.element_dofs = tri.copy()
            self.dof_coords = m.vertices.copy()
            self.master = m.periodic_master.copy()
            return
        self.element_dofs = np.concatenate([tri, nv + inverse], axis=1)
        mids = 0.5 * (m.vertices[edges[:, 0]] + m.vertices[edges[:, 1]])
        ie = self.interface_edge_ids
        mids[ie] = m.contour(m.edge_theta.mean(axis=1))
        self.dof_coords = np.concatenate([m.vertices, mids])
        master = np.concatenate([m.periodic_master, nv + np.arange(len(edges))])
        if m.is_periodic:
            key = {tuple(e): k for k, e in enumerate(edges)}
            vm = m.periodic_master
            for k, (a, b) in enumerate(edges):
                ma, mb = sorted((vm[a], vm[b]))
                if (ma, mb) != (a, b):
                    j = key.get((ma, mb))
                    if j is not None:
                        master[nv + k] = nv + j
        self.master = master

    # -- topology -----------------------------------------------------------
    @property
    def ndof(self) -> int:
        return len(self.dof_coords)

    @cached_property
    def interface_edge_ids(self) -> np.ndarray:
        """Index into ``edges`` of each interface edge, in contour order."""
        key = {tuple(e): k for k, e in enumerate(self.edges)}
        ids = [key[tuple(sorted(e))] for e in self.mesh.interface_edges]
        return np.asarray(ids, dtype=int)

    @cached_property
    def interface_edge_dofs(self) -> np.ndarray:
        """``(ne, 2 | 3)`` dofs on each interface edge, oriented along the contour."""
        e = self.mesh.interface_edges
        if self.degree == 1:
            return e.copy()
        return np.column_stack([e, len(self.mesh.vertices) + self.interface_edge_ids])

    @cached_property
    def interface_edge_elements(self) -> np.ndarray:
        """``(ne, 2)`` triangle indices: plus side, minus side."""
        owners: dict[int, list[int]] = {}
        for t, row in enumerate(self._tri_edges):
            for e in row:
                owners.setdefault(int(e), []).append(t)
        out = np.zeros((len(self.interface_edge_ids), 2), dtype=int)
        tags = self.mesh.tags
        for k, e in enumerate(self.interface_edge_ids):
            ts = owners[int(e)]
            plus = [t for t in ts if tags[t] > 0]
            minus = [t for t in ts if tags[t] < 0]
            if len(plus) != 1 or len(minus) != 1:
                raise ValueError("interface edge does not separate the two phases")
            out[k] = plus[0], minus[0]
        return out

    @cached_property
    def boundary_dofs(self) -> np.ndarray:
        """Dofs on the outer circle (empty for periodic meshes)."""
        m = self.mesh
        if m.is_periodic:
            return np.zeros(0, dtype=int)
        counts = np.bincount(self._tri_edges.ravel(), minlength=len(self.edges))
        hull = np.flatnonzero(counts == 1)
        verts = np.unique(self.edges[hull])
        if self.degree == 1:
            return verts
        return np.concatenate([verts, len(m.vertices) + hull])

    @cached_property
    def dof_phase(self) -> np.ndarray:
        """``+1`` if the dof touches a plus element (interface dofs count as plus)."""
        phase = -np.ones(self.ndof, dtype=np.int8)
        plus = self.element_dofs[self.mesh.tags > 0].ravel()
        phase[plus] = 1
        return phase

    @cached_property
    def phase_dofs(self) -> dict[int, np.ndarray]:
        out = {}
        for ph in (1, -1):
            out[ph] = np.unique(self.element_dofs[self.mesh.tags == ph].ravel())
        return out

    # -- geometry -------------------------------------------------------------
    def geometry(self, n: int | None = None, elements: np.ndarray | None = None) -> Geometry:
        n = n or (3 if self.degree == 1 else 4)
        pts, w = triangle_rule(n)
        N, dN = shape_functions(self.degree, pts)
        dofs = self.element_dofs if elements is None else self.element_dofs[elements]
        X = self.dof_coords[dofs]  # (nt, nloc, 2)
        x = np.einsum("qa,tai->tqi", N, X)
        J = np.einsum("tai,qak->tqik", X, dN)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1] / det
        inv[..., 1, 1] = J[..., 0, 0] / det
        inv[..., 0, 1] = -J[..., 0, 1] / det
        inv[..., 1, 0] = -J[..., 1, 0] / det
        grad = np.einsum("qak,tqki->tqai", dN, inv)
        return Geometry(x, det, grad, N, w)

    def reference_coords(self, t: np.ndarray, x: np.ndarray, iters: int = 8) -> np.ndarray:
        """Invert the element map for points ``x`` in elements ``t`` (Newton for curved P2)."""
        X = self.dof_coords[self.element_dofs[t]]
        v0, v1, v2 = X[:, 0], X[:, 1], X[:, 2]
        A = np.stack([v1 - v0, v2 - v0], axis=-1)
        xi = np.linalg.solve(A, (x - v0)[..., None])[..., 0]
        if self.degree == 1:
            return xi
        for _ in range(iters):
            N, dN = _shape_at(self.degree, xi)
            xx = np.einsum("pa,pai->pi", N, X)
            J = np.einsum("pai,pak->pik", X, dN)
            xi = xi - np.linalg.solve(J, (xx - x)[..., None])[..., 0]
        return xi

    @cached_property
    def _locator(self) -> tuple[cKDTree, int]:
        cen = self.mesh.vertices[self.mesh.triangles].mean(axis=1)
        return cKDTree(cen), min(12, len(cen))

    def locate(self, x: np.ndarray, phase: int | None = None) -> np.ndarray:
        """Element containing each point (optionally restricted to one phase)."""
        x = np.atleast_2d(x)
        tree, k = self._locator
        _, cand = tree.query(x, k=k)
        tri = self.mesh.triangles
        P = self.mesh.vertices
        out = -np.ones(len(x), dtype=int)
        for i in range(len(x)):
            best, best_val = -1, -np.inf
            for t in cand[i]:
                if phase is not None and self.mesh.tags[t] != phase:
                    continue
                v0, v1, v2 = P[tri[t]]
                A = np.column_stack([v1 - v0, v2 - v0])
                l1, l2 = np.linalg.solve(A, x[i] - v0)
                score = min(1 - l1 - l2, l1, l2)
                if score > best_val:
                    best, best_val = t, score
            if best < 0 or best_val < -1e-6:
                # fall back to a brute-force search
                sel = np.arange(len(tri)) if phase is None else np.flatnonzero(self.mesh.tags == phase)
                v0, v1, v2 = P[tri[sel, 0]], P[tri[sel, 1]], P[tri[sel, 2]]
                A = np.stack([v1 - v0, v2 - v0], axis=-1)
                lam = np.linalg.solve(A, (x[i] - v0)[..., None])[..., 0]
                score = np.minimum(np.minimum(1 - lam.sum(axis=1), lam[:, 0]), lam[:, 1])
                j = int(np.argmax(score))
                best, best_val = sel[j], score[j]
            if best_val < -1e-6 and phase is None:
                raise ValueError(f"point {x[i]} lies outside the mesh")
            out[i] = best
        return out


def _shape_at(degree: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return shape_functions(degree, np.atleast_2d(xi))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _eval_field(fn, x: np.ndarray, ncomp: int) -> np.ndarray:
    """Evaluate a callable or constant on ``x`` with shape ``(..., 2)`` -> ``(..., ncomp)``."""
    if fn is None:
        return np.zeros(x.shape[:-1] + (ncomp,))
    if callable(fn):
        val = np.asarray(fn(x), dtype=float)
    else:
        val = np.broadcast_to(np.asarray(fn, dtype=float), x.shape[:-1] + ((ncomp,) if ncomp > 1 else ()))
    if ncomp == 1 and val.shape == x.shape[:-1]:
        val = val[..., None]
    return np.broadcast_to(val, x.shape[:-1] + (ncomp,))


def coefficient_at(space: FESpace, geom: Geometry, a_plus, a_minus) -> np.ndarray:
    """``(nt, nq, 2, 2)`` coefficient matrices, per phase."""
    nt, nq = geom.det.shape
    out = np.broadcast_to(np.eye(2), (nt, nq, 2, 2)).copy()
    tags = space.mesh.tags
    for ph, fn in ((1, a_plus), (-1, a_minus)):
        if fn is None:
            continue
        sel = tags == ph
        if sel.any():
            out[sel] = np.asarray(fn(geom.x[sel]), dtype=float)
    return out


def assemble_stiffness(space: FESpace, coeff: np.ndarray, geom: Geometry) -> sp.csr_matrix:
    ke = np.einsum("tq,tqaj,tqjk,tqbk->tab", geom.dx, geom.grad, coeff, geom.grad)
    dofs = space.master[space.element_dofs]
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.ndof
    return sp.csr_matrix((ke.ravel(), (rows, cols)), shape=(n, n))


def assemble_mass(space: FESpace, geom: Geometry) -> sp.csr_matrix:
    me = np.einsum("tq,qa,qb->tab", geom.dx, geom.N, geom.N)
    dofs = space.master[space.element_dofs]
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    n = space.ndof
    return sp.csr_matrix((me.ravel(), (rows, cols)), shape=(n, n))


def assemble_load(space: FESpace, geom: Geometry, f_plus, f_minus, ncomp: int) -> np.ndarray:
    fq = np.zeros(geom.det.shape + (ncomp,))
    tags = space.mesh.tags
    for ph, fn in ((1, f_plus), (-1, f_minus)):
        sel = tags == ph
        if sel.any():
            fq[sel] = _eval_field(fn, geom.x[sel], ncomp)
    be = np.einsum("tq,qa,tqc->tac", geom.dx, geom.N, fq)
    out = np.zeros((space.ndof, ncomp))
    np.add.at(out, space.master[space.element_dofs], be)
    return out


def assemble_flux_load(space: FESpace, geom: Geometry, F_plus, F_minus, ncomp: int) -> np.ndarray:
    """``int F . grad phi dx`` with ``F(x)`` of shape ``(..., ncomp, 2)``."""
    Fq = np.zeros(geom.det.shape + (ncomp, 2))
    tags = space.mesh.tags
    for ph, fn in ((1, F_plus), (-1, F_minus)):
        sel = tags == ph
        if fn is not None and sel.any():
            val = np.asarray(fn(geom.x[sel]), dtype=float)
            Fq[sel] = val.reshape(val.shape[:2] + (ncomp, 2))
    be = np.einsum("tq,tqai,tqci->tac", geom.dx, geom.grad, Fq)
    out = np.zeros((space.ndof, ncomp))
    np.add.at(out, space.master[space.element_dofs], be)
    return out


def interface_quadrature(space: FESpace, n: int = 3):
    """Points, parameters, weights (``dS`` included) and trace basis on interface edges.

    Returns ``x (ne, nq, 2)``, ``theta (ne, nq)``, ``w (ne, nq)``,
    ``N (nq, nloc_edge)``.
    """
    s, ws = line_rule(n)
    N, dN = edge_shape_functions(space.degree, s)
    X = space.dof_coords[space.interface_edge_dofs]  # (ne, nloc, 2)
    x = np.einsum("qa,eai->eqi", N, X)
    dx = np.einsum("qa,eai->eqi", dN, X)
    w = ws[None, :] * np.linalg.norm(dx, axis=2)
    th = space.mesh.edge_theta
    theta = th[:, :1] + s[None, :] * (th[:, 1:] - th[:, :1])
    return x, theta, w, N


def assemble_interface(space: FESpace, g, ncomp: int, n: int = 3) -> np.ndarray:
    """``int_Gamma g phi dS`` with ``g(x, theta)``."""
    out = np.zeros((space.ndof, ncomp))
    if g is None:
        return out
    x, theta, w, N = interface_quadrature(space, n)
    gv = np.asarray(g(x, theta), dtype=float)
    if ncomp == 1 and gv.shape == theta.shape:
        gv = gv[..., None]
    be = np.einsum("eq,qa,eqc->eac", w, N, gv)
    np.add.at(out, space.master[space.interface_edge_dofs], be)
    return out
