"""Tensor-product function spaces on the reference square [-1,1]^2.

Three discrete spaces are built from the 1D nodal polynomials l_i and edge
polynomials e_i of degree p:

    W:  pointwise scalars,        span{ l_i(x) l_j(y) },        (p+1)^2 DOFs
    U:  fluxes (normal-integral), span{ l_i(x) e_j(y) x-hat,
                                        e_i(x) l_j(y) y-hat },  2p(p+1) DOFs
    Q:  cell integrals,           span{ e_i(x) e_j(y) },        p^2 DOFs

together with the integer incidence matrices E10 (rot: W -> U) and E21
(div: U -> Q) and the evaluation matrices A, B, C of all basis functions at
the (p+1)^2 collocated GLL quadrature points.

DOF orderings (0-based here; the construction enumerates the same tensor
index pairs as the 1-based formulas they derive from):

    W:  k = i*(p+1) + j           for l_i(x) l_j(y),  i,j = 0..p
    U:  x-normal (i, j), i = 0..p, j = 1..p  ->  k = 2*(i*p + j) - 2
        y-normal (i, j), i = 1..p, j = 0..p  ->  k = 2*((i-1)*(p+1) + j) + 1
        (components alternate: even k are x-normal, odd k are y-normal)
    Q:  k = (i-1)*p + (j-1)       for e_i(x) e_j(y),  i,j = 1..p

Quadrature points share the W ordering (x index major), which is what makes
A the identity with collocated GLL quadrature.
"""

import numpy as np

from .basis import Basis1D, incidence_1d


def _w_index(p, i, j):
    return i * (p + 1) + j


def _u_index_x(p, i, j):
    # x-normal DOF on the line x = node_i, spanning [node_{j-1}, node_j] in y.
    return 2 * (i * p + j) - 2


def _u_index_y(p, i, j):
    # y-normal DOF on the line y = node_j, spanning [node_{i-1}, node_i] in x.
    return 2 * ((i - 1) * (p + 1) + j) + 1


def _q_index(p, i, j):
    return (i - 1) * p + (j - 1)


def incidence_e10(p):
    """Incidence matrix of the rot operator, shape 2p(p+1) x (p+1)^2.

    Row patterns read off the rot expansion of a nodal scalar: an x-normal
    DOF (i, j) picks up psi(i, j-1) - psi(i, j); a y-normal DOF (i, j) picks
    up psi(i, j) - psi(i-1, j).
    """
    d_u = 2 * p * (p + 1)
    d_w = (p + 1) ** 2
    E = np.zeros((d_u, d_w), dtype=np.int64)
    for i in range(p + 1):
        for j in range(1, p + 1):
            k = _u_index_x(p, i, j)
            E[k, _w_index(p, i, j - 1)] += 1
            E[k, _w_index(p, i, j)] -= 1
    for i in range(1, p + 1):
        for j in range(p + 1):
            k = _u_index_y(p, i, j)
            E[k, _w_index(p, i, j)] += 1
            E[k, _w_index(p, i - 1, j)] -= 1
    return E


def incidence_e21(p):
    """Incidence matrix of the div operator, shape p^2 x 2p(p+1).

    Each cell row sums its four bounding fluxes: +right -left +top -bottom.
    """
    d_u = 2 * p * (p + 1)
    E = np.zeros((p * p, d_u), dtype=np.int64)
    for i in range(1, p + 1):
        for j in range(1, p + 1):
            k = _q_index(p, i, j)
            E[k, _u_index_x(p, i, j)] += 1
            E[k, _u_index_x(p, i - 1, j)] -= 1
            E[k, _u_index_y(p, i, j)] += 1
            E[k, _u_index_y(p, i, j - 1)] -= 1
    return E


class LocalSpaces:
    """Reference-square spaces of degree p with incidence and eval matrices.

    Attributes:
        p, d_W, d_U, d_Q: degree and space dimensions.
        E10, E21: integer incidence matrices (rot and div).
        A: (p+1)^2 x d_W basis values at the GLL quadrature points (identity).
        B: 2(p+1)^2 x d_U vector basis values, two rows per point (x then y).
        C: (p+1)^2 x d_Q cell-basis values at the quadrature points.
        quad_x, quad_y, quad_w: flattened tensor GLL points and weights.
    """

    def __init__(self, p):
        self.p = p
        self.basis = Basis1D(p)
        self.d_W = (p + 1) ** 2
        self.d_U = 2 * p * (p + 1)
        self.d_Q = p * p
        self.E10 = incidence_e10(p)
        self.E21 = incidence_e21(p)

        nodes = self.basis.rule.nodes
        w1 = self.basis.rule.weights
        # Quadrature ordering matches the W DOF ordering (x major).
        self.quad_x = np.repeat(nodes, p + 1)
        self.quad_y = np.tile(nodes, p + 1)
        self.quad_w = np.repeat(w1, p + 1) * np.tile(w1, p + 1)
        self.A = self.eval_w(self.quad_x, self.quad_y)
        self.B = self.eval_u(self.quad_x, self.quad_y)
        self.C = self.eval_q(self.quad_x, self.quad_y)

    def eval_w(self, x, y):
        """Values of all W basis functions at points (x, y): n_pts x d_W."""
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        lx = self.basis.nodal_matrix(x)  # (p+1, n)
        ly = self.basis.nodal_matrix(y)
        out = np.zeros((x.size, self.d_W))
        for i in range(self.p + 1):
            for j in range(self.p + 1):
                out[:, _w_index(self.p, i, j)] = lx[i] * ly[j]
        return out

    def eval_w_grad(self, x, y):
        """Gradients (d/dx, d/dy) of all W basis functions: n_pts x d_W x 2."""
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        lx, ly = self.basis.nodal_matrix(x), self.basis.nodal_matrix(y)
        dlx, dly = self.basis.nodal_deriv_matrix(x), self.basis.nodal_deriv_matrix(y)
        out = np.zeros((x.size, self.d_W, 2))
        for i in range(self.p + 1):
            for j in range(self.p + 1):
                k = _w_index(self.p, i, j)
                out[:, k, 0] = dlx[i] * ly[j]
                out[:, k, 1] = lx[i] * dly[j]
        return out

    def eval_u(self, x, y):
        """Vector values of all U basis functions, stacked 2 rows per point.

        Returns a 2*n_pts x d_U matrix; row 2q is the x component at point
        q, row 2q+1 the y component.
        """
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        lx, ly = self.basis.nodal_matrix(x), self.basis.nodal_matrix(y)
        ex, ey = self.basis.edge_matrix(x), self.basis.edge_matrix(y)
        out = np.zeros((2 * x.size, self.d_U))
        for i in range(self.p + 1):
            for j in range(1, self.p + 1):
                out[0::2, _u_index_x(self.p, i, j)] = lx[i] * ey[j - 1]
        for i in range(1, self.p + 1):
            for j in range(self.p + 1):
                out[1::2, _u_index_y(self.p, i, j)] = ex[i - 1] * ly[j]
        return out

    def eval_q(self, x, y):
        """Values of all Q basis functions at points (x, y): n_pts x d_Q."""
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        ex, ey = self.basis.edge_matrix(x), self.basis.edge_matrix(y)
        out = np.zeros((x.size, self.d_Q))
        for i in range(1, self.p + 1):
            for j in range(1, self.p + 1):
                out[:, _q_index(self.p, i, j)] = ex[i - 1] * ey[j - 1]
        return out

    def u_dof_segments(self):
        """Geometry of each U DOF: (component, line coordinate, span).

        Returns a list of tuples (comp, a, b, c) where comp 0 means an
        x-normal DOF on the line x = a spanning y in [b, c], and comp 1 a
        y-normal DOF on the line y = a spanning x in [b, c].  Index order
        matches the U DOF ordering.
        """
        nodes = self.basis.rule.nodes
        segs = [None] * self.d_U
        for i in range(self.p + 1):
            for j in range(1, self.p + 1):
                segs[_u_index_x(self.p, i, j)] = (0, nodes[i], nodes[j - 1], nodes[j])
        for i in range(1, self.p + 1):
            for j in range(self.p + 1):
                segs[_u_index_y(self.p, i, j)] = (1, nodes[j], nodes[i - 1], nodes[i])
        return segs

    def q_dof_cells(self):
        """Reference cell bounds per Q DOF: list of (x0, x1, y0, y1)."""
        nodes = self.basis.rule.nodes
        cells = [None] * self.d_Q
        for i in range(1, self.p + 1):
            for j in range(1, self.p + 1):
                cells[_q_index(self.p, i, j)] = (nodes[i - 1], nodes[i], nodes[j - 1], nodes[j])
        return cells

    def w_dof_points(self):
        """Reference coordinates per W DOF: arrays (x, y) of length d_W."""
        nodes = self.basis.rule.nodes
        x = np.empty(self.d_W)
        y = np.empty(self.d_W)
        for i in range(self.p + 1):
            for j in range(self.p + 1):
                k = _w_index(self.p, i, j)
                x[k], y[k] = nodes[i], nodes[j]
        return x, y
