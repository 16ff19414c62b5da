"""Cubed-sphere mesh tests.

The sphere surface area and finite-difference Jacobian checks are
independent oracles; the stitching tests verify the global numbering, the
orientation signs, and the element-boundary flux cancellation exactly.
"""

import functools

import numpy as np
import pytest

from mimswe.geometry import (
    EARTH_RADIUS,
    CubedSphereMesh,
    build_mesh,
    mesh_dump,
    piola_to_sphere,
    scalar_to_sphere,
    sphere_to_piola,
)


@functools.lru_cache(maxsize=None)
def mesh(n_e, p):
    return build_mesh(n_e, p)


def lonlat_to_xyz(lon, lat):
    return np.stack(
        [np.cos(lon) * np.cos(lat), np.sin(lon) * np.cos(lat), np.sin(lat)], axis=-1
    )


# ----------------------------------------------------------------------
# counts and topology
# ----------------------------------------------------------------------


@pytest.mark.parametrize("n_e,p", [(1, 1), (1, 3), (2, 2), (2, 3), (3, 3), (4, 2)])
def test_global_dof_counts(n_e, p):
    m = mesh(n_e, p)
    fine = n_e * p
    assert m.n_elem == 6 * n_e * n_e
    assert m.n_W == 6 * fine * fine + 2
    assert m.n_U == 12 * fine * fine
    assert m.n_Q == 6 * fine * fine
    assert m.n_W - m.n_U + m.n_Q == 2


def test_u_multiplicities():
    m = mesh(3, 3)
    # 12 N_e^2 element interfaces, p shared flux DOFs each.
    assert np.count_nonzero(m.mult_u == 2) == 12 * 3 * 3 * 3
    assert set(np.unique(m.mult_u)) == {1, 2}


def test_invalid_resolution():
    with pytest.raises(ValueError):
        build_mesh(0, 3)


# ----------------------------------------------------------------------
# metric terms
# ----------------------------------------------------------------------


def test_surface_area_converges():
    exact = 4.0 * np.pi * EARTH_RADIUS**2
    errs = [abs(mesh(n, 3).total_area() - exact) / exact for n in (2, 4, 8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_det_positive_and_G_spd():
    m = mesh(2, 3)
    assert np.all(m.detJ > 0.0)
    sym = np.abs(m.G - np.swapaxes(m.G, -1, -2)).max()
    assert sym < 1e-9 * EARTH_RADIUS
    tr = m.G[..., 0, 0] + m.G[..., 1, 1]
    det = m.G[..., 0, 0] * m.G[..., 1, 1] - m.G[..., 0, 1] * m.G[..., 1, 0]
    assert np.all(tr > 0.0) and np.all(det > 0.0)


def test_face_center_jacobian_is_diagonal():
    m = mesh(1, 2)
    # p = 2 puts a quadrature point at the reference center of each face.
    center = 1 * (2 + 1) + 1
    scale = EARTH_RADIUS * np.pi / 4.0
    for e in range(6):
        J = m.J[e, center]
        assert abs(J[0, 0] - scale) < 1e-9 * EARTH_RADIUS
        assert abs(J[1, 1] - scale) < 1e-9 * EARTH_RADIUS
        assert abs(J[0, 1]) < 1e-9 * EARTH_RADIUS
        assert abs(J[1, 0]) < 1e-9 * EARTH_RADIUS


def test_jacobian_matches_finite_differences():
    m = mesh(2, 3)
    rng = np.random.default_rng(7)
    h = 1e-6
    for e in [0, 7, 13, 20]:
        xi, eta = rng.uniform(-0.9, 0.9, size=2)
        lon, lat, J, _ = m.chart(e, np.array([xi]), np.array([eta]))
        frame_lon = np.array([-np.sin(lon[0]), np.cos(lon[0]), 0.0])
        frame_lat = np.array(
            [
                -np.sin(lat[0]) * np.cos(lon[0]),
                -np.sin(lat[0]) * np.sin(lon[0]),
                np.cos(lat[0]),
            ]
        )
        for col, (dx, de) in enumerate([(h, 0.0), (0.0, h)]):
            lp, bp, _, _ = m.chart(e, np.array([xi + dx]), np.array([eta + de]))
            lm, bm, _, _ = m.chart(e, np.array([xi - dx]), np.array([eta - de]))
            dpos = (
                (lonlat_to_xyz(lp[0], bp[0]) - lonlat_to_xyz(lm[0], bm[0]))
                * EARTH_RADIUS
                / (2.0 * h)
            )
            assert abs(J[0, 0, col] - frame_lon @ dpos) < 0.05
            assert abs(J[0, 1, col] - frame_lat @ dpos) < 0.05


def test_det_equals_cross_product_area():
    # det(J) must equal the (scaled) area spanned by the chart tangents.
    m = mesh(2, 3)
    rng = np.random.default_rng(3)
    xi = rng.uniform(-1.0, 1.0, 40)
    eta = rng.uniform(-1.0, 1.0, 40)
    for e in [0, 5, 11, 17, 23]:
        lon, lat, J, det = m.chart(e, xi, eta)
        cols = J.reshape(-1, 2, 2)
        cross = cols[:, 0, 0] * cols[:, 1, 1] - cols[:, 0, 1] * cols[:, 1, 0]
        assert np.allclose(det, cross, rtol=1e-14)
        # Independent area element: |t_xi x t_eta| via the 3D embedding.
        pos = lonlat_to_xyz(lon, lat)
        h = 1e-6
        lp, bp, _, _ = m.chart(e, xi + h, eta)
        lm, bm, _, _ = m.chart(e, xi - h, eta)
        t1 = (lonlat_to_xyz(lp, bp) - lonlat_to_xyz(lm, bm)) / (2 * h)
        lp, bp, _, _ = m.chart(e, xi, eta + h)
        lm, bm, _, _ = m.chart(e, xi, eta - h)
        t2 = (lonlat_to_xyz(lp, bp) - lonlat_to_xyz(lm, bm)) / (2 * h)
        area3d = np.einsum("ni,ni->n", np.cross(t1, t2), pos) * EARTH_RADIUS**2
        assert np.allclose(det, area3d, rtol=1e-4)


def test_pole_points_are_regular():
    # Even N_e puts quadrature nodes exactly on both poles.
    m = mesh(2, 3)
    at_pole = np.abs(np.abs(m.lat) - np.pi / 2.0) < 1e-12
    assert np.count_nonzero(at_pole) > 0
    assert np.all(m.detJ[at_pole] > 0.0)
    assert np.all(np.isfinite(m.J))


# ----------------------------------------------------------------------
# stitching
# ----------------------------------------------------------------------


@pytest.mark.parametrize("n_e,p", [(2, 3), (3, 2)])
def test_shared_flux_rows_agree_exactly(n_e, p):
    # Both elements adjacent to a shared segment must produce the same
    # global strong-rotation value, bitwise, after the orientation sign.
    m = mesh(n_e, p)
    rng = np.random.default_rng(11)
    psi = rng.standard_normal(m.n_W)
    glob = np.full(m.n_U, np.nan)
    for e in range(m.n_elem):
        loc = m.spaces.E10.astype(float) @ psi[m.map_w[e]]
        vals = m.sign_u[e] * loc
        for k in range(m.spaces.d_U):
            g = m.map_u[e, k]
            if np.isnan(glob[g]):
                glob[g] = vals[k]
            else:
                assert glob[g] == vals[k]
    assert not np.any(np.isnan(glob))


@pytest.mark.parametrize("n_e,p", [(2, 3), (3, 3)])
def test_global_divergence_telescopes(n_e, p):
    # Summing E21 u over every element cancels all interior fluxes.
    m = mesh(n_e, p)
    rng = np.random.default_rng(5)
    u = rng.standard_normal(m.n_U)
    total = 0.0
    for e in range(m.n_elem):
        loc = m.sign_u[e] * u[m.map_u[e]]
        total += float(np.sum(m.spaces.E21 @ loc))
    assert abs(total) < 1e-13 * np.linalg.norm(u)


def test_owner_arrays_consistent():
    m = mesh(2, 2)
    for g in range(m.n_U):
        e, k = m.owner_u_elem[g], m.owner_u_loc[g]
        assert m.map_u[e, k] == g
        assert m.sign_u[e, k] == 1


# ----------------------------------------------------------------------
# flux DOFs against a 3D line-integral oracle
# ----------------------------------------------------------------------


def test_flux_dof_matches_embedded_line_integral():
    from mimswe.basis import gauss_rule

    m = mesh(2, 3)
    e = 1  # face 0, off-center element
    gx, gw = gauss_rule(20)

    def velocity(lon, lat):
        u = np.cos(lat) + 0.3 * np.sin(lon) * np.sin(lat) ** 2
        v = 0.5 * np.cos(lon) * np.cos(lat) ** 2
        return u, v

    nodes = m.spaces.basis.rule.nodes
    for i in [0, 2]:
        for j in [1, 3]:
            lo, hi = nodes[j - 1], nodes[j]
            eta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
            xi = np.full_like(eta, nodes[i])
            lon, lat, J, det = m.chart(e, xi, eta)
            u, v = velocity(lon, lat)
            # Reference-side flux density: adjugate row applied to velocity.
            ref = J[:, 1, 1] * u - J[:, 0, 1] * v
            dof_pullback = 0.5 * (hi - lo) * np.sum(gw * ref)
            # Embedded-side: integral of velocity dotted with the scaled
            # in-surface normal of the segment.
            pos = lonlat_to_xyz(lon, lat)
            h = 1e-7
            lp, bp, _, _ = m.chart(e, xi, eta + h)
            lm, bm, _, _ = m.chart(e, xi, eta - h)
            T = (lonlat_to_xyz(lp, bp) - lonlat_to_xyz(lm, bm)) * EARTH_RADIUS / (2 * h)
            frame_lon = np.stack([-np.sin(lon), np.cos(lon), np.zeros_like(lon)], -1)
            frame_lat = np.stack(
                [-np.sin(lat) * np.cos(lon), -np.sin(lat) * np.sin(lon), np.cos(lat)], -1
            )
            vel3 = u[:, None] * frame_lon + v[:, None] * frame_lat
            normal = np.cross(T, pos)
            dof_embedded = 0.5 * (hi - lo) * np.sum(gw * np.einsum("ni,ni->n", vel3, normal))
            assert abs(dof_pullback - dof_embedded) < 1e-6 * abs(dof_pullback)


# ----------------------------------------------------------------------
# transforms and utilities
# ----------------------------------------------------------------------


def test_piola_roundtrip():
    m = mesh(2, 3)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(m.J.shape[:2] + (2,))
    w = piola_to_sphere(m.J, m.detJ, v)
    back = sphere_to_piola(m.J, m.detJ, w)
    assert np.allclose(back, v, rtol=1e-12, atol=1e-12)


def test_scalar_to_sphere():
    m = mesh(1, 2)
    g = m.element_geometry(0)
    vals = np.linspace(1.0, 2.0, g.det.size)
    assert np.array_equal(scalar_to_sphere(g, vals, "W"), vals)
    assert np.allclose(scalar_to_sphere(g, vals, "Q"), vals / g.det)
    with pytest.raises(ValueError):
        scalar_to_sphere(g, vals, "V")


def test_average_equatorial_spacing():
    m = mesh(8, 3)
    expect = np.pi * EARTH_RADIUS / (2 * 8 * 3)
    assert abs(m.average_equatorial_spacing() - expect) < 1e-9
    # Explicit check: equatorial nodes of face 0 sit at lon = alpha.
    coords = m._coords1d
    gaps = np.diff(coords) * EARTH_RADIUS
    assert abs(np.mean(gaps) - expect) < 1e-6


def test_mesh_dump(tmp_path):
    m = mesh(1, 1)
    path = tmp_path / "mesh.txt"
    mesh_dump(m, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"elements {m.n_elem}"
    assert lines[1] == f"n_W {m.n_W}"
    assert len(lines) == 5 + 4 * m.n_elem
