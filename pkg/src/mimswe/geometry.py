"""Equiangular gnomonic cubed-sphere mesh and element geometry.

Each of the six cube faces carries equiangular coordinates
(alpha, beta) in [-pi/4, pi/4]^2; a face point is the normalized vector
center + tan(alpha)*a_axis + tan(beta)*b_axis.  Faces are oriented so that
(a_axis, b_axis, center) is right-handed, which keeps det(J) > 0 on every
element of every face.

The 2x2 Jacobian at a point maps reference displacements to physical
zonal/meridional displacements (the zonal row carries the cos(lat) metric
factor), with the earth radius folded in:

    J = r_e * [[cos(lat) dlon/dxi, cos(lat) dlon/deta],
               [        dlat/dxi,          dlat/deta]]

All derivatives are closed-form through the chart tangent vectors; nothing
is finite-differenced.  At the two pole points (quadrature nodes for even
N_e on the polar faces) the zonal/meridional frame is taken in its
atan2(0,0) = 0 limit, against which J stays finite with det(J) > 0.

Global DOF numbering stitches faces geometrically: pointwise scalars (W)
dedup on node position, fluxes (U) dedup on segment midpoints with a
relative orientation sign from the two elements' transverse tangent
directions, and cell integrals (Q) stay element-private.
"""

from dataclasses import dataclass

import numpy as np

from .spaces import LocalSpaces, _u_index_x, _u_index_y

EARTH_RADIUS = 6.37122e6  # m
OMEGA = 7.292e-5  # s^-1
GRAVITY = 9.80616  # m s^-2

_X, _Y, _Z = np.eye(3)
# Per face: (a_axis, b_axis, center); equatorial faces at lon 0, 90, 180,
# 270 degrees, then north, then south.
_FACE_FRAMES = np.array(
    [
        (_Y, _Z, _X),
        (-_X, _Z, _Y),
        (-_Y, _Z, -_X),
        (_X, _Z, -_Y),
        (_Y, -_X, _Z),
        (_Y, _X, -_Z),
    ]
)


class GeometryError(RuntimeError):
    """Raised for degenerate mappings or failed mesh stitching."""


def _face_chart(face, alpha, beta):
    """Unit-sphere positions and tangents of one face chart.

    Args:
        face: face index 0..5.
        alpha, beta: equiangular coordinates (broadcastable arrays).

    Returns:
        (pos, t_alpha, t_beta): arrays shaped (..., 3); tangents are the
        derivatives of the unit position with respect to alpha and beta.
    """
    a_ax, b_ax, c_ax = _FACE_FRAMES[face]
    X = np.tan(alpha)
    Y = np.tan(beta)
    v = c_ax + X[..., None] * a_ax + Y[..., None] * b_ax
    n = np.sqrt(1.0 + X * X + Y * Y)
    pos = v / n[..., None]
    dXda = 1.0 + X * X
    dYdb = 1.0 + Y * Y
    t_alpha = dXda[..., None] * (a_ax / n[..., None] - (X / (n * n * n))[..., None] * v)
    t_beta = dYdb[..., None] * (b_ax / n[..., None] - (Y / (n * n * n))[..., None] * v)
    return pos, t_alpha, t_beta


def _lonlat(pos):
    lon = np.arctan2(pos[..., 1], pos[..., 0])
    lat = np.arcsin(np.clip(pos[..., 2], -1.0, 1.0))
    return lon, lat


def _zonal_meridional_frame(pos):
    lon, lat = _lonlat(pos)
    e_lon = np.stack([-np.sin(lon), np.cos(lon), np.zeros_like(lon)], axis=-1)
    e_lat = np.stack(
        [-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon), np.cos(lat)], axis=-1
    )
    return lon, lat, e_lon, e_lat


def _jacobian(face, alpha, beta, dalpha_dxi, dbeta_deta, r_e):
    """Physical 2x2 Jacobian (zonal, meridional rows) at chart points."""
    pos, t_a, t_b = _face_chart(face, alpha, beta)
    lon, lat, e_lon, e_lat = _zonal_meridional_frame(pos)
    J = np.empty(alpha.shape + (2, 2))
    J[..., 0, 0] = np.sum(e_lon * t_a, axis=-1) * dalpha_dxi
    J[..., 0, 1] = np.sum(e_lon * t_b, axis=-1) * dbeta_deta
    J[..., 1, 0] = np.sum(e_lat * t_a, axis=-1) * dalpha_dxi
    J[..., 1, 1] = np.sum(e_lat * t_b, axis=-1) * dbeta_deta
    J *= r_e
    return pos, lon, lat, J


@dataclass(frozen=True)
class ElementGeom:
    """Per-quadrature-point geometry of one element."""

    J: np.ndarray  # (nq, 2, 2)
    det: np.ndarray  # (nq,)
    P: np.ndarray  # (nq, 2, 2), J / det
    G: np.ndarray  # (nq, 2, 2), J^T J / det
    lon: np.ndarray
    lat: np.ndarray


class CubedSphereMesh:
    """Topology, geometry, and global DOF maps for 6 * N_e^2 elements.

    Attributes:
        n_e, p, r_e: resolution parameters.
        spaces: shared LocalSpaces(p).
        n_elem, n_W, n_U, n_Q: global counts.
        map_w: (n_elem, d_W) global W index per local DOF.
        map_u, sign_u: (n_elem, d_U) global U index and orientation sign.
        mult_u: (n_U,) number of elements referencing each U DOF (1 or 2).
        owner_u_elem, owner_u_loc: one owning (element, local DOF) pair per
            global U DOF; the owner's orientation is the canonical one.
        J, detJ, P, G: (n_elem, nq, ...) geometry at quadrature points.
        lon, lat: (n_elem, nq) coordinates of the quadrature/W points.
        corners_lonlat: (n_elem, 4, 2) element corner coordinates.
    """

    def __init__(self, n_e, p, r_e=EARTH_RADIUS):
        if n_e < 1:
            raise ValueError(f"n_e must be >= 1, got {n_e}")
        self.n_e = n_e
        self.p = p
        self.r_e = r_e
        self.spaces = LocalSpaces(p)
        self.n_elem = 6 * n_e * n_e

        # Face-level 1D coordinate lines, so that elements sharing a line
        # read bit-identical values (the stitching below hashes on them).
        breaks = np.linspace(-np.pi / 4.0, np.pi / 4.0, n_e + 1)
        gll = self.spaces.basis.rule.nodes
        coords = np.empty(n_e * p + 1)
        for e in range(n_e):
            lo, hi = breaks[e], breaks[e + 1]
            vals = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gll
            coords[e * p : (e + 1) * p + 1] = vals
        self._coords1d = coords
        self._breaks = breaks

        self.face = np.empty(self.n_elem, dtype=np.int32)
        self.exy = np.empty((self.n_elem, 2), dtype=np.int32)
        eid = 0
        for f in range(6):
            for ey in range(n_e):
                for ex in range(n_e):
                    self.face[eid] = f
                    self.exy[eid] = (ex, ey)
                    eid += 1

        self._build_geometry()
        self._number_dofs()
        self._validate_topology()

    # ------------------------------------------------------------------
    # geometry
    # ------------------------------------------------------------------

    def _element_lines(self, e):
        ex, ey = self.exy[e]
        p = self.p
        return (
            self._coords1d[ex * p : (ex + 1) * p + 1],
            self._coords1d[ey * p : (ey + 1) * p + 1],
        )

    def _element_widths(self, e):
        ex, ey = self.exy[e]
        da = self._breaks[ex + 1] - self._breaks[ex]
        db = self._breaks[ey + 1] - self._breaks[ey]
        return da, db

    def chart(self, e, xi, eta):
        """Analytic chart of element e at reference points (xi, eta).

        Returns (lon, lat, J, det) arrays over the given points.
        """
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        ex, ey = self.exy[e]
        a0, a1 = self._breaks[ex], self._breaks[ex + 1]
        b0, b1 = self._breaks[ey], self._breaks[ey + 1]
        alpha = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * xi
        beta = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * eta
        _, lon, lat, J = _jacobian(
            self.face[e], alpha, beta, 0.5 * (a1 - a0), 0.5 * (b1 - b0), self.r_e
        )
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        return lon, lat, J, det

    def _build_geometry(self):
        sp = self.spaces
        nq = sp.quad_x.size
        self.J = np.empty((self.n_elem, nq, 2, 2))
        self.lon = np.empty((self.n_elem, nq))
        self.lat = np.empty((self.n_elem, nq))
        for e in range(self.n_elem):
            lon, lat, J, _ = self.chart(e, sp.quad_x, sp.quad_y)
            self.J[e] = J
            self.lon[e] = lon
            self.lat[e] = lat
        self.detJ = self.J[..., 0, 0] * self.J[..., 1, 1] - self.J[..., 0, 1] * self.J[..., 1, 0]
        if np.any(self.detJ <= 0.0):
            raise GeometryError("Jacobian determinant not positive everywhere")
        if np.any(np.cos(self.lat) < 0.0):
            raise GeometryError("quadrature point beyond a pole")
        self.P = self.J / self.detJ[..., None, None]
        self.G = np.einsum("eqki,eqkj->eqij", self.J, self.J) / self.detJ[..., None, None]
        corners = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
        self.corners_lonlat = np.empty((self.n_elem, 4, 2))
        for e in range(self.n_elem):
            lon, lat, _, _ = self.chart(e, corners[:, 0], corners[:, 1])
            self.corners_lonlat[e, :, 0] = lon
            self.corners_lonlat[e, :, 1] = lat

    # ------------------------------------------------------------------
    # global numbering
    # ------------------------------------------------------------------

    def _face_positions(self, f, alphas, betas):
        pos, _, _ = _face_chart(f, alphas, betas)
        return pos

    def _number_dofs(self):
        sp = self.spaces
        p = self.p

        # W: dedup on node position.
        self.map_w = np.empty((self.n_elem, sp.d_W), dtype=np.int64)
        w_ids = {}
        w_mult = []
        for e in range(self.n_elem):
            al, bl = self._element_lines(e)
            # W ordering is x-major: k = i*(p+1) + j.
            A = np.repeat(al, p + 1)
            B = np.tile(bl, p + 1)
            pos = self._face_positions(self.face[e], A, B)
            rounded = np.round(pos, 9)
            for k in range(sp.d_W):
                kk = (rounded[k, 0], rounded[k, 1], rounded[k, 2])
                gid = w_ids.get(kk)
                if gid is None:
                    gid = len(w_ids)
                    w_ids[kk] = gid
                    w_mult.append(0)
                w_mult[gid] += 1
                self.map_w[e, k] = gid
        self.n_W = len(w_ids)
        self.mult_w = np.array(w_mult, dtype=np.int64)

        # U: dedup on segment midpoint; sign from transverse tangents.
        segs_idx = self._u_segment_indices()
        comp_arr = np.array([s[0] for s in segs_idx])
        i_arr = np.array([s[1] for s in segs_idx])
        j_arr = np.array([s[2] for s in segs_idx])
        is_x = comp_arr == 0
        self.map_u = np.empty((self.n_elem, sp.d_U), dtype=np.int64)
        self.sign_u = np.empty((self.n_elem, sp.d_U), dtype=np.int8)
        u_ids = {}
        u_dir = []
        u_mult = []
        owner = []
        for e in range(self.n_elem):
            al, bl = self._element_lines(e)
            # Midpoints in face coordinates; the unused where-branch may
            # index al[-1]/bl[-1], which is harmless.
            a = np.where(is_x, al[i_arr], 0.5 * (al[i_arr - 1] + al[i_arr]))
            b = np.where(is_x, 0.5 * (bl[j_arr - 1] + bl[j_arr]), bl[j_arr])
            pos, t_a, t_b = _face_chart(self.face[e], a, b)
            direction = np.where(is_x[:, None], t_a, t_b)
            direction = direction / np.linalg.norm(direction, axis=1, keepdims=True)
            rounded = np.round(pos, 9)
            for k in range(sp.d_U):
                kk = (rounded[k, 0], rounded[k, 1], rounded[k, 2])
                gid = u_ids.get(kk)
                if gid is None:
                    gid = len(u_ids)
                    u_ids[kk] = gid
                    u_dir.append(direction[k])
                    u_mult.append(0)
                    owner.append((e, k))
                    sign = 1
                else:
                    dot = float(np.dot(direction[k], u_dir[gid]))
                    if abs(dot) < 0.2:
                        raise GeometryError("ambiguous edge orientation while stitching")
                    sign = 1 if dot > 0 else -1
                u_mult[gid] += 1
                self.map_u[e, k] = gid
                self.sign_u[e, k] = sign
        self.n_U = len(u_ids)
        self.mult_u = np.array(u_mult, dtype=np.int64)
        self.owner_u_elem = np.array([o[0] for o in owner], dtype=np.int64)
        self.owner_u_loc = np.array([o[1] for o in owner], dtype=np.int64)

        # Q: element-private.
        self.n_Q = self.n_elem * sp.d_Q
        self.map_q = np.arange(self.n_Q, dtype=np.int64).reshape(self.n_elem, sp.d_Q)

    def _u_segment_indices(self):
        """(component, i, j) node-index description of each local U DOF."""
        segs = [None] * self.spaces.d_U
        p = self.p
        for i in range(p + 1):
            for j in range(1, p + 1):
                segs[_u_index_x(p, i, j)] = (0, i, j)
        for i in range(1, p + 1):
            for j in range(p + 1):
                segs[_u_index_y(p, i, j)] = (1, i, j)
        return segs

    def _validate_topology(self):
        n, p = self.n_e, self.p
        fine = n * p
        if self.n_W != 6 * fine * fine + 2:
            raise GeometryError(f"W stitching failed: {self.n_W} nodes")
        if self.n_U != 12 * fine * fine:
            raise GeometryError(f"U stitching failed: {self.n_U} edges")
        # Euler characteristic of the refined sphere grid.
        if self.n_W - self.n_U + self.n_Q != 2:
            raise GeometryError("Euler check failed")
        if not set(np.unique(self.mult_u)).issubset({1, 2}):
            raise GeometryError("a U DOF is claimed by more than two elements")
        if np.count_nonzero(self.mult_w == 3) != 8:
            raise GeometryError("cube corner nodes not found exactly 8 times")

    # ------------------------------------------------------------------
    # accessors
    # ------------------------------------------------------------------

    def element_geometry(self, e):
        """Geometry bundle of element e at the quadrature points."""
        return ElementGeom(
            J=self.J[e],
            det=self.detJ[e],
            P=self.P[e],
            G=self.G[e],
            lon=self.lon[e],
            lat=self.lat[e],
        )

    def average_equatorial_spacing(self):
        """Average great-circle distance between adjacent nodes along the
        equator: one quarter turn per face over N_e*p intervals."""
        return np.pi * self.r_e / (2.0 * self.n_e * self.p)

    def total_area(self):
        return float(np.sum(self.detJ * self.spaces.quad_w))


def build_mesh(n_e, p, r_e=EARTH_RADIUS):
    """Build the cubed-sphere mesh: 6 faces of N_e x N_e degree-p elements."""
    return CubedSphereMesh(n_e, p, r_e)


def piola_to_sphere(J, det, v_local):
    """Map reference vector components to physical (zonal, meridional).

    Args:
        J: (..., 2, 2) Jacobians; det: (...,) determinants.
        v_local: (..., 2) reference components.

    Returns:
        (..., 2) physical components, (1/det) J v_local.
    """
    return np.einsum("...ij,...j->...i", J, v_local) / det[..., None]


def sphere_to_piola(J, det, v_sphere):
    """Inverse of piola_to_sphere: physical components to reference."""
    Jinv = np.empty_like(J)
    Jinv[..., 0, 0] = J[..., 1, 1]
    Jinv[..., 0, 1] = -J[..., 0, 1]
    Jinv[..., 1, 0] = -J[..., 1, 0]
    Jinv[..., 1, 1] = J[..., 0, 0]
    return np.einsum("...ij,...j->...i", Jinv, v_sphere)


def scalar_to_sphere(geom, values, space):
    """Physical point values of a scalar given its chart-side values.

    Pointwise scalars (W) transform identically; densities (Q) divide by
    the Jacobian determinant.
    """
    if space == "W":
        return values
    if space == "Q":
        return values / geom.det
    raise ValueError(f"unknown scalar space {space!r}")


def mesh_dump(mesh, path):
    """Write element corner lon/lat (degrees) and DOF counts to a text file."""
    with open(path, "w") as fh:
        fh.write(f"elements {mesh.n_elem}\n")
        fh.write(f"n_W {mesh.n_W}\nn_U {mesh.n_U}\nn_Q {mesh.n_Q}\n")
        fh.write("elem corner lon_deg lat_deg\n")
        for e in range(mesh.n_elem):
            for c in range(4):
                lon, lat = np.degrees(mesh.corners_lonlat[e, c])
                fh.write(f"{e} {c} {lon:.12f} {lat:.12f}\n")
