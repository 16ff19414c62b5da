"""Global operators: mass matrices, incidence maps, and SPD solves.

Degrees of freedom carry physical units throughout: pointwise scalars (W)
in the unknown's own units, fluxes (U) in m^2 s^-1, and cell integrals (Q)
in the scalar's units times m^2 (volumes in m^3 for fluid depth).

The two incidence operators are assembled once as global integer sparse
matrices.  Rows of the strong rotation (n_U x n_W) come from each flux
DOF's owning element, whose orientation is canonical; rows of the strong
divergence (n_Q x n_U) fold in the per-element orientation signs.  Their
product vanishes in exact integer arithmetic, which is what makes the
discrete mass budget close to rounding error.

Mass matrices: the pointwise space collocates with the quadrature, so its
mass matrix is diagonal.  The flux and cell mass matrices couple DOFs
through the metric terms G = J^T J / det(J) and 1/det(J); the flux matrix
is the only one needing an iterative solve and gets a preconditioned CG
with overlapping element-block (additive Schwarz) preconditioning.
"""

import numpy as np
import scipy.sparse as sps

from .basis import gauss_rule

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach tolerance."""


def solve_spd(matvec, b, x0=None, tol=1e-12, maxiter=1000, precond=None):
    """Preconditioned conjugate gradients for an SPD operator.

    Args:
        matvec: callable returning A @ x.
        b: right-hand side.
        x0: warm-start iterate (optional).
        tol: relative residual target, ||b - A x|| <= tol * ||b||.
        maxiter: iteration cap; exceeding it raises SolverError.
        precond: callable approximating A^-1 (optional).

    Returns:
        (x, iterations)
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else x0.astype(float).copy()
    r = b - matvec(x)
    if np.linalg.norm(r) <= tol * bnorm:
        return x, 0
    z = precond(r) if precond is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        Ap = matvec(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x, it
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG stalled at {maxiter} iterations")


class GlobalOperators:
    """Assembled operators of one mesh.

    Attributes:
        mesh: the CubedSphereMesh.
        m_w_diag: (n_W,) diagonal of the pointwise mass matrix.
        M_u, M_q: global sparse mass matrices (CSR).
        E10, E21: global integer incidence matrices (CSR).
        wdet: (n_elem, nq) quadrature weights times det(J).
    """

    def __init__(self, mesh):
        self.mesh = mesh
        sp = mesh.spaces
        self.sp = sp
        nq = sp.quad_w.size
        self.wdet = sp.quad_w[None, :] * mesh.detJ

        # Pointwise mass: quadrature collocates with the nodes.
        self.m_w_diag = np.zeros(mesh.n_W)
        np.add.at(self.m_w_diag, mesh.map_w, self.wdet)

        # Flux mass blocks: B^T (w G) B with per-point 2x2 metric blocks.
        Br = sp.B.reshape(nq, 2, sp.d_U)
        Gw = mesh.G * sp.quad_w[None, :, None, None]
        blocks_u = np.einsum("qca,eqcd,qdb->eab", Br, Gw, Br, optimize=True)
        ss = mesh.sign_u[:, :, None] * mesh.sign_u[:, None, :]
        self.M_u = self._assemble_csr(blocks_u * ss, mesh.map_u, mesh.n_U)

        # Cell mass blocks: C^T diag(w / det J) C.
        wq_over_det = sp.quad_w[None, :] / mesh.detJ
        blocks_q = np.einsum("qa,eq,qb->eab", sp.C, wq_over_det, sp.C, optimize=True)
        self.M_q = self._assemble_csr(blocks_q, mesh.map_q, mesh.n_Q)

        self.E10 = self._global_e10()
        self.E21 = self._global_e21()

        # Overlapping element blocks of the global flux mass matrix.
        inv = np.empty((mesh.n_elem, sp.d_U, sp.d_U))
        for e in range(mesh.n_elem):
            rows = mesh.map_u[e]
            inv[e] = self.M_u[np.ix_(rows, rows)].toarray()
        self._precond_blocks = np.linalg.inv(inv)

    @staticmethod
    def _assemble_csr(blocks, dofmap, n):
        n_elem, d = dofmap.shape
        rows = np.repeat(dofmap, d, axis=1).ravel()
        cols = np.tile(dofmap, (1, d)).ravel()
        mat = sps.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))
        return mat.tocsr()

    def _global_e10(self):
        m, sp = self.mesh, self.sp
        plus = np.array([np.argmax(sp.E10[k] > 0) for k in range(sp.d_U)])
        minus = np.array([np.argmax(sp.E10[k] < 0) for k in range(sp.d_U)])
        g = np.arange(m.n_U)
        e, k = m.owner_u_elem, m.owner_u_loc
        rows = np.concatenate([g, g])
        cols = np.concatenate([m.map_w[e, plus[k]], m.map_w[e, minus[k]]])
        data = np.concatenate([np.ones(m.n_U), -np.ones(m.n_U)]).astype(np.int64)
        return sps.coo_matrix((data, (rows, cols)), shape=(m.n_U, m.n_W)).tocsr()

    def _global_e21(self):
        m, sp = self.mesh, self.sp
        kq, ku = np.nonzero(sp.E21)
        vals = sp.E21[kq, ku]
        rows = m.map_q[:, kq].ravel()
        cols = m.map_u[:, ku].ravel()
        data = (vals[None, :] * m.sign_u[:, ku]).astype(np.int64).ravel()
        return sps.coo_matrix((data, (rows, cols)), shape=(m.n_Q, m.n_U)).tocsr()

    # ------------------------------------------------------------------
    # mass actions and solves
    # ------------------------------------------------------------------

    def mass_w(self, psi):
        return self.m_w_diag * psi

    def mass_u(self, u):
        return self.M_u @ u

    def mass_q(self, h):
        return self.M_q @ h

    def _apply_precond(self, r):
        m = self.mesh
        z = np.zeros_like(r)
        local = np.einsum("eab,eb->ea", self._precond_blocks, r[m.map_u])
        np.add.at(z, m.map_u, local)
        return z

    def solve_u(self, rhs, x0=None, tol=1e-12, maxiter=1000):
        """Solve M_u x = rhs by preconditioned CG; returns (x, iterations)."""
        return solve_spd(
            lambda v: self.M_u @ v,
            rhs,
            x0=x0,
            tol=tol,
            maxiter=maxiter,
            precond=self._apply_precond,
        )

    # ------------------------------------------------------------------
    # point evaluations
    # ------------------------------------------------------------------

    def gather_u(self, u):
        """Local oriented flux coefficients, (n_elem, d_U)."""
        m = self.mesh
        return m.sign_u * u[m.map_u]

    def u_at_quad(self, u):
        """Physical (zonal, meridional) velocity at quadrature points."""
        m, sp = self.mesh, self.sp
        nq = sp.quad_w.size
        Br = sp.B.reshape(nq, 2, sp.d_U)
        ref = np.einsum("qcd,ed->eqc", Br, self.gather_u(u))
        return np.einsum("eqij,eqj->eqi", m.P, ref)

    def h_at_quad(self, h):
        """Physical cell-scalar values at quadrature points."""
        m, sp = self.mesh, self.sp
        vals = np.einsum("qa,ea->eq", sp.C, h[m.map_q])
        return vals / m.detJ

    def w_at_quad(self, psi):
        """Pointwise-scalar values at quadrature points (collocated)."""
        return psi[self.mesh.map_w]

    # ------------------------------------------------------------------
    # weak and nonlinear operators
    # ------------------------------------------------------------------

    def scatter_u_covector(self, local):
        m = self.mesh
        out = np.zeros(m.n_U)
        np.add.at(out, m.map_u, m.sign_u * local)
        return out

    def _pullback_covector(self, phys):
        """U covector from physical-space integrand samples (n_elem,nq,2)."""
        m, sp = self.mesh, self.sp
        nq = sp.quad_w.size
        Br = sp.B.reshape(nq, 2, sp.d_U)
        ref = np.einsum("eqij,eqi->eqj", m.P, phys)
        local = np.einsum("qcd,eqc->ed", Br, ref)
        return self.scatter_u_covector(local)

    def rotational_op(self, zeta_q, u, u_phys=None):
        """Covector of the rotational term: v -> integral of
        zeta * v . (z-hat x u) over the sphere.

        Args:
            zeta_q: absolute-vorticity-like samples at quadrature points.
            u: global flux coefficients.
            u_phys: optional precomputed u_at_quad(u).
        """
        if u_phys is None:
            u_phys = self.u_at_quad(u)
        rot = np.einsum("ij,eqj->eqi", _ROT90, u_phys)
        weight = self.wdet * zeta_q
        return self._pullback_covector(weight[..., None] * rot)

    def flux_rhs(self, h_q, u, u_phys=None):
        """Covector of the depth-weighted velocity, v -> integral h v . u."""
        if u_phys is None:
            u_phys = self.u_at_quad(u)
        weight = self.wdet * h_q
        return self._pullback_covector(weight[..., None] * u_phys)

    def flux_op(self, h_q, u, x0=None, tol=1e-12, maxiter=1000, u_phys=None):
        """Project the mass flux h u onto the flux space.

        Returns (F, iterations) with M_u F equal to the depth-weighted
        velocity covector.
        """
        rhs = self.flux_rhs(h_q, u, u_phys=u_phys)
        return self.solve_u(rhs, x0=x0, tol=tol, maxiter=maxiter)

    def weak_grad(self, phi_q):
        """Covector of the weak gradient: v -> -integral of grad(phi) . v,
        realized through the divergence as +integral of phi div(v).

        Args:
            phi_q: physical scalar samples at quadrature points.
        """
        sp = self.sp
        q_cov = np.einsum("qa,eq->ea", sp.C, sp.quad_w[None, :] * phi_q)
        return self.E21.T @ q_cov.ravel()

    def weak_curl(self, u):
        """Pointwise vorticity: M_w omega = -(E10^T M_u u)."""
        rhs = -(self.E10.T @ (self.M_u @ u))
        return rhs / self.m_w_diag

    def strong_rot(self, psi):
        """Flux coefficients of the rotated gradient of a streamfunction."""
        return self.E10 @ psi

    def strong_div(self, u):
        """Cell coefficients of the divergence of a flux field."""
        return self.E21 @ u


def build_operators(mesh):
    return GlobalOperators(mesh)


# ----------------------------------------------------------------------
# projections of smooth fields onto the discrete spaces
# ----------------------------------------------------------------------


def velocity_dofs(mesh, velocity, n_gauss=None):
    """Flux DOFs of a smooth velocity field.

    Each DOF is the physical flux (m^2 s^-1) across its curved segment,
    computed with a dense Gauss rule from the chart adjugate.

    Args:
        mesh: CubedSphereMesh.
        velocity: callable (lon, lat) -> (u_zonal, u_merid) in m/s.
        n_gauss: quadrature points per segment (default 4p + 2).

    Returns:
        (n_U,) global flux coefficients.
    """
    sp = mesh.spaces
    p = mesh.p
    if n_gauss is None:
        n_gauss = 4 * p + 2
    gx, gw = gauss_rule(n_gauss)
    nodes = sp.basis.rule.nodes
    out = np.zeros(mesh.n_U)
    segs = mesh._u_segment_indices()
    for g in range(mesh.n_U):
        e, k = mesh.owner_u_elem[g], mesh.owner_u_loc[g]
        comp, i, j = segs[k]
        if comp == 0:
            lo, hi = nodes[j - 1], nodes[j]
            eta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
            xi = np.full_like(eta, nodes[i])
        else:
            lo, hi = nodes[i - 1], nodes[i]
            xi = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
            eta = np.full_like(xi, nodes[j])
        lon, lat, J, _ = mesh.chart(e, xi, eta)
        uz, um = velocity(lon, lat)
        if comp == 0:
            dens = J[:, 1, 1] * uz - J[:, 0, 1] * um
        else:
            dens = -J[:, 1, 0] * uz + J[:, 0, 0] * um
        out[g] = 0.5 * (hi - lo) * float(gw @ dens)
    return out


def scalar_dofs(mesh, scalar, n_gauss=None):
    """Cell-integral DOFs of a smooth scalar (units of scalar times m^2).

    Args:
        mesh: CubedSphereMesh.
        scalar: callable (lon, lat) -> values.
        n_gauss: quadrature points per direction (default 4p + 2).

    Returns:
        (n_Q,) global cell coefficients.
    """
    sp = mesh.spaces
    p = mesh.p
    if n_gauss is None:
        n_gauss = 4 * p + 2
    gx, gw = gauss_rule(n_gauss)
    nodes = sp.basis.rule.nodes
    out = np.empty(mesh.n_Q)
    X, Y = np.meshgrid(gx, gx, indexing="ij")
    WW = np.outer(gw, gw)
    for e in range(mesh.n_elem):
        for i in range(1, p + 1):
            for j in range(1, p + 1):
                x0, x1 = nodes[i - 1], nodes[i]
                y0, y1 = nodes[j - 1], nodes[j]
                xi = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * X
                eta = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * Y
                lon, lat, _, det = mesh.chart(e, xi.ravel(), eta.ravel())
                vals = scalar(lon, lat) * det
                cell = 0.25 * (x1 - x0) * (y1 - y0) * float(WW.ravel() @ vals)
                out[mesh.map_q[e, (i - 1) * p + (j - 1)]] = cell
    return out


def pointwise_dofs(mesh, scalar):
    """Pointwise-scalar DOFs: samples at the global nodes."""
    out = np.empty(mesh.n_W)
    out[mesh.map_w.ravel()] = scalar(mesh.lon.ravel(), mesh.lat.ravel())
    return out
