"""One-dimensional building blocks on [-1, 1].

Key Functions:
    gll_rule(p): Gauss-Lobatto-Legendre nodes and weights for degree p.
    Basis1D: nodal (Lagrange) and edge (histopolant) polynomial evaluators.
    incidence_1d(p): the p x (p+1) signed difference matrix linking the two.

The nodal polynomials l_i interpolate point values at the GLL nodes.  The
edge polynomials e_i (degree p-1) carry interval integrals: the integral of
e_i over [node_{j-1}, node_j] is the Kronecker delta.  Differentiating a
nodal expansion and re-expanding in the edge basis is exactly the incidence
matrix, which is what makes the discrete complex downstream topological.
"""

from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 16


def _legendre(p, x):
    """Legendre polynomial L_p and its first derivative at x.

    Three-term recurrence for the values; the derivative follows from the
    standard relation (1-x^2) L_p' = p (L_{p-1} - x L_p) away from the
    endpoints, with the closed-form endpoint limit substituted afterwards
    by the caller when needed.

    Args:
        p: polynomial degree (int >= 0).
        x: scalar or ndarray of evaluation points.

    Returns:
        (L, dL): values and derivatives of L_p at x.
    """
    x = np.asarray(x, dtype=float)
    L_prev = np.ones_like(x)
    if p == 0:
        return L_prev, np.zeros_like(x)
    L = x.copy()
    for k in range(2, p + 1):
        L_prev, L = L, ((2 * k - 1) * x * L - (k - 1) * L_prev) / k
    # (1 - x^2) dL = p * (L_{p-1} - x L_p); guard the endpoint singularity.
    denom = 1.0 - x * x
    safe = np.abs(denom) > 1e-14
    dL = np.zeros_like(x)
    dL[safe] = p * (L_prev[safe] - x[safe] * L[safe]) / denom[safe]
    # At x = +/-1: dL_p = p(p+1)/2 * (+/-1)^{p+1}
    edge = ~safe
    dL[edge] = np.sign(x[edge]) ** (p + 1) * p * (p + 1) / 2.0
    return L, dL


@dataclass(frozen=True)
class GllRule:
    """GLL quadrature rule: degree p, p+1 nodes in [-1,1], weights."""

    p: int
    nodes: np.ndarray
    weights: np.ndarray


def gll_rule(p):
    """Gauss-Lobatto-Legendre rule of degree p.

    Nodes are the roots of (1-x^2) L_p'(x), found by Newton iteration from
    Chebyshev-like initial guesses cos(pi*i/p); weights are
    2 / (p (p+1) L_p(x_i)^2).  Exact for polynomials of degree <= 2p-1.

    Args:
        p: degree, 1 <= p <= 16.

    Returns:
        GllRule with nodes sorted ascending.

    Raises:
        ValueError: p outside [1, 16].
    """
    if not (1 <= p <= MAX_DEGREE):
        raise ValueError(f"degree p must be in [1, {MAX_DEGREE}], got {p}")
    if p == 1:
        nodes = np.array([-1.0, 1.0])
    else:
        # Interior nodes are roots of L_p'; iterate on that function.
        x = np.cos(np.pi * np.arange(1, p) / p)
        for _ in range(100):
            L, dL = _legendre(p, x)
            # d/dx [ (1-x^2) L_p' ] = -p(p+1) L_p, so Newton on L_p' uses
            # the recurrence-free second-derivative identity:
            # (1-x^2) L_p'' = 2 x L_p' - p(p+1) L_p
            d2L = (2.0 * x * dL - p * (p + 1) * L) / (1.0 - x * x)
            dx = dL / d2L
            x = x - dx
            if np.max(np.abs(dx)) < 1e-15:
                break
        nodes = np.concatenate(([-1.0], np.sort(x), [1.0]))
        # Symmetrize to make x_i = -x_{p-i} hold exactly.
        nodes = 0.5 * (nodes - nodes[::-1])
    L, _ = _legendre(p, nodes)
    weights = 2.0 / (p * (p + 1) * L * L)
    return GllRule(p=p, nodes=nodes, weights=weights)


def gauss_rule(n):
    """Auxiliary dense Gauss-Legendre rule with n points (exact to 2n-1).

    Used for DOF initialization integrals and for test-suite verification;
    the production quadrature stays the collocated GLL rule.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


class Basis1D:
    """Nodal and edge polynomial evaluators for one GLL rule.

    Evaluation uses the Lagrange product formula directly; degrees are
    small (<= 16) so no barycentric machinery is needed.  Points that
    coincide with a node short-circuit to the Kronecker value to avoid
    0/0 in the product.
    """

    def __init__(self, p):
        self.rule = gll_rule(p)
        self.p = p

    def eval_nodal(self, i, x):
        """Value of the Lagrange polynomial l_i at points x.

        Args:
            i: node index, 0 <= i <= p.
            x: scalar or ndarray in [-1, 1].

        Returns:
            l_i(x) with the same shape as x.
        """
        nodes = self.rule.nodes
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.ones_like(x)
        for k in range(self.p + 1):
            if k == i:
                continue
            out *= (x - nodes[k]) / (nodes[i] - nodes[k])
        # Snap exact node hits to the Kronecker value.
        hit = np.isclose(x[:, None], nodes[None, :], rtol=0.0, atol=1e-14)
        on_node = hit.any(axis=1)
        if np.any(on_node):
            which = hit.argmax(axis=1)
            out[on_node] = (which[on_node] == i).astype(float)
        return out if out.size > 1 else out[0]

    def eval_nodal_deriv(self, i, x):
        """Derivative dl_i/dx at points x (product-rule expansion)."""
        nodes = self.rule.nodes
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for m in range(self.p + 1):
            if m == i:
                continue
            term = np.ones_like(x) / (nodes[i] - nodes[m])
            for k in range(self.p + 1):
                if k == i or k == m:
                    continue
                term *= (x - nodes[k]) / (nodes[i] - nodes[k])
            out += term
        return out if out.size > 1 else out[0]

    def eval_edge(self, i, x):
        """Value of the edge (histopolant) polynomial e_i at points x.

        e_i(x) = -sum_{k<i} dl_k/dx(x), for 1 <= i <= p; degree p-1, and
        its integral over [node_{j-1}, node_j] is delta_ij.
        """
        if not (1 <= i <= self.p):
            raise ValueError(f"edge index must be in [1, {self.p}], got {i}")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for k in range(i):
            out -= self.eval_nodal_deriv(k, x)
        return out if out.size > 1 else out[0]

    def nodal_matrix(self, x):
        """(p+1) x len(x) matrix of l_i(x_q) values."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([np.atleast_1d(self.eval_nodal(i, x)) for i in range(self.p + 1)])

    def nodal_deriv_matrix(self, x):
        """(p+1) x len(x) matrix of dl_i/dx(x_q) values."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([np.atleast_1d(self.eval_nodal_deriv(i, x)) for i in range(self.p + 1)])

    def edge_matrix(self, x):
        """p x len(x) matrix of e_i(x_q) values, rows i = 1..p."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.stack([np.atleast_1d(self.eval_edge(i, x)) for i in range(1, self.p + 1)])


def incidence_1d(p):
    """1D incidence matrix, shape p x (p+1), rows (q_i - q_{i-1}).

    Row i has -1 in column i-1 and +1 in column i: differentiating a nodal
    expansion with coefficients q gives an edge expansion with coefficients
    incidence_1d(p) @ q.
    """
    E = np.zeros((p, p + 1), dtype=np.int64)
    for i in range(p):
        E[i, i] = -1
        E[i, i + 1] = 1
    return E
