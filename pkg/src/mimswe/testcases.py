"""Benchmark initial conditions, analytic references, and error norms.

Implements the standard spherical shallow water benchmarks:

tc2 (Williamson et al. 1992, test 2): steady solid-body rotation with
flow angle alpha.  With u0 the speed of one revolution in 12 days,

    u =  u0 (cos(lat) cos(a) + cos(lon) sin(lat) sin(a))
    v = -u0 sin(lon) sin(a)
    g h = g h0 - (r Omega u0 + u0^2/2) mu^2,   g h0 = 2.94e4 m^2/s^2

where mu = sin(lat) cos(a) - cos(lon) cos(lat) sin(a) is the sine of
latitude in the tilted frame.  The Coriolis parameter must be tilted by
the same angle for the state to be steady.

tc6 (Williamson et al. 1992, test 6): Rossby-Haurwitz wave of zonal
wavenumber R = 4 with K = omega' = 7.848e-6 1/s and background depth
8000 m.  The pattern drifts in longitude at the angular rate

    nu = (R (3 + R) omega' - 2 Omega) / ((1 + R) (2 + R))

which the analytic reference applies as a shift lon -> lon - nu t.

galewsky (Galewsky et al. 2004): barotropically unstable mid-latitude
jet u(lat) = umax/en * exp(1/((lat - lat0)(lat - lat1))) inside the band
(lat0, lat1) = (pi/7, pi/2 - pi/7), in gradient-wind balance with the
depth field

    g h(lat) = g h_base - int_{-pi/2}^{lat} u (r f + u tan(lat')) dlat'

with h_base fixed so the global mean depth is 10000 m, plus a Gaussian
hill perturbation 120 cos(lat) exp(-(lon/(1/3))^2 - ((pi/4-lat)/(1/15))^2).
The balance integral is evaluated with a cached composite Gauss rule.

rest: zero velocity over a uniform 10000 m depth.

Degrees of freedom are initialized by integrating the analytic fields
(edge fluxes, cell volumes), never by pointwise sampling, so the
discrete initial data inherits the exactness of the geometric degrees
of freedom.  Error norms follow the usual normalization: L1, L2 with
metric-weighted dense quadrature, Linf pointwise, each divided by the
same norm of the reference unless the reference vanishes.
"""

import functools
from dataclasses import dataclass

import numpy as np

from .assembly import scalar_dofs, velocity_dofs
from .basis import gauss_rule
from .geometry import EARTH_RADIUS, GRAVITY, OMEGA
from .swe import State, coriolis_field, coriolis_parameter

TC2_GH0 = 2.94e4
TC6_K = 7.848e-6
TC6_R = 4
TC6_DEPTH = 8000.0
JET_UMAX = 80.0
JET_LAT0 = np.pi / 7.0
JET_LAT1 = np.pi / 2.0 - np.pi / 7.0
JET_MEAN_DEPTH = 10000.0
HILL_AMPLITUDE = 120.0
HILL_LAT = np.pi / 4.0
HILL_LON_WIDTH = 1.0 / 3.0
HILL_LAT_WIDTH = 1.0 / 15.0
REST_DEPTH = 10000.0

_CASE_IDS = ("tc2", "tc6", "galewsky", "rest")


class TestCaseError(ValueError):
    """Unknown benchmark id or unsupported operation for a benchmark."""


@dataclass(frozen=True)
class TestCaseSpec:
    """A benchmark id plus its free parameters.

    viscous records whether the case is conventionally run with the
    biharmonic term on; drivers use it to resolve a default dissipation
    coefficient.
    """

    id: str
    alpha: float = 0.0
    hill_amplitude: float = HILL_AMPLITUDE
    viscous: bool = False


def testcase(case_id, alpha=0.0, hill_amplitude=HILL_AMPLITUDE):
    """Validate parameters and build a TestCaseSpec."""
    if case_id not in _CASE_IDS:
        raise TestCaseError("unknown test case id: %r" % (case_id,))
    if alpha != 0.0 and case_id != "tc2":
        raise TestCaseError("flow angle alpha only applies to tc2")
    return TestCaseSpec(
        id=case_id,
        alpha=float(alpha),
        hill_amplitude=float(hill_amplitude),
        viscous=case_id in ("tc6", "galewsky"),
    )


def tc2_speed(r_e=EARTH_RADIUS):
    """Advective speed of the solid-body case: one revolution in 12 days."""
    return 2.0 * np.pi * r_e / (12.0 * 86400.0)


def tc6_drift_rate(omega=OMEGA):
    """Angular drift rate of the wavenumber-R pattern in rad/s."""
    r = TC6_R
    return (r * (3 + r) * TC6_K - 2.0 * omega) / ((1 + r) * (2 + r))


def jet_zonal_wind(lat):
    """Zonal wind profile of the unstable jet; zero outside the band."""
    lat = np.asarray(lat, dtype=float)
    inside = (lat > JET_LAT0) & (lat < JET_LAT1)
    # safe denominator outside the band; those lanes are discarded
    den = np.where(inside, (lat - JET_LAT0) * (lat - JET_LAT1), -1.0)
    en = np.exp(-4.0 / (JET_LAT1 - JET_LAT0) ** 2)
    return np.where(inside, JET_UMAX / en * np.exp(1.0 / den), 0.0)


class _CumulativeIntegral:
    """Cumulative integral of a smooth function on [a, b].

    Precomputes panel integrals on a fine composite Gauss grid; calls
    evaluate the partial panel with the same rule, so values are smooth
    in the evaluation point and accurate to rounding for resolved
    integrands.
    """

    def __init__(self, fn, a, b, n_panels=2048, n_gauss=6):
        self.fn = fn
        self.gx, self.gw = gauss_rule(n_gauss)
        self.edges = np.linspace(a, b, n_panels + 1)
        mid = 0.5 * (self.edges[:-1] + self.edges[1:])
        half = 0.5 * np.diff(self.edges)
        pts = mid[:, None] + half[:, None] * self.gx[None, :]
        panel = half * (fn(pts) @ self.gw)
        self.cum = np.concatenate([[0.0], np.cumsum(panel)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        j = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, self.edges.size - 2)
        half = 0.5 * (flat - self.edges[j])
        pts = (self.edges[j] + half)[:, None] + half[:, None] * self.gx[None, :]
        out = self.cum[j] + half * (self.fn(pts) @ self.gw)
        return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])


def _jet_balance_integrand(lat):
    u = jet_zonal_wind(lat)
    return u * (EARTH_RADIUS * coriolis_parameter(0.0, lat) + u * np.tan(lat))


@functools.lru_cache(maxsize=1)
def _jet_balance():
    """Cumulative balance integral and the mean-adjusted base depth."""
    integral = _CumulativeIntegral(_jet_balance_integrand, -np.pi / 2, np.pi / 2)
    mean = _CumulativeIntegral(
        lambda lat: 0.5 * np.cos(lat) * integral(lat), -np.pi / 2, np.pi / 2, n_panels=1024
    ).cum[-1]
    return integral, JET_MEAN_DEPTH + mean / GRAVITY


def _galewsky_depth(hill_amplitude):
    integral, h_base = _jet_balance()

    def depth(lon, lat):
        lat = np.asarray(lat, dtype=float)
        h = h_base - integral(lat) / GRAVITY
        if hill_amplitude != 0.0:
            lam = np.arctan2(np.sin(lon), np.cos(lon))
            h = h + hill_amplitude * np.cos(lat) * np.exp(
                -((lam / HILL_LON_WIDTH) ** 2) - (((HILL_LAT - lat) / HILL_LAT_WIDTH) ** 2)
            )
        return h

    return depth


def _tc6_coeffs(lat):
    c = np.cos(lat)
    r, k = TC6_R, TC6_K
    a = 0.5 * k * (2.0 * OMEGA + k) * c * c + 0.25 * k * k * (
        (r + 1) * c ** (2 * r + 2)
        + (2 * r * r - r - 2) * c ** (2 * r)
        - 2 * r * r * c ** (2 * r - 2)
    )
    b = (2.0 * (OMEGA + k) * k) / ((r + 1) * (r + 2)) * c ** r * (
        (r * r + 2 * r + 2) - (r + 1) ** 2 * c * c
    )
    cc = 0.25 * k * k * c ** (2 * r) * ((r + 1) * c * c - (r + 2))
    return a, b, cc


def _check_time(spec, t):
    if spec.id == "galewsky" and t != 0.0:
        raise TestCaseError("galewsky has no analytic solution at t > 0")


def velocity_field(spec, t=0.0):
    """Analytic velocity (u_zonal, u_merid) as a function of (lon, lat)."""
    _check_time(spec, t)
    if spec.id == "tc2":
        u0, a = tc2_speed(), spec.alpha

        def velocity(lon, lat):
            uz = u0 * (np.cos(lat) * np.cos(a) + np.cos(lon) * np.sin(lat) * np.sin(a))
            um = -u0 * np.sin(lon) * np.sin(a)
            return uz, um

    elif spec.id == "tc6":
        shift = tc6_drift_rate() * t
        r, k = TC6_R, TC6_K

        def velocity(lon, lat):
            lam = np.asarray(lon, dtype=float) - shift
            c, s = np.cos(lat), np.sin(lat)
            uz = EARTH_RADIUS * k * c + EARTH_RADIUS * k * c ** (r - 1) * (
                r * s * s - c * c
            ) * np.cos(r * lam)
            um = -EARTH_RADIUS * k * r * c ** (r - 1) * s * np.sin(r * lam)
            return uz, um

    elif spec.id == "galewsky":

        def velocity(lon, lat):
            return jet_zonal_wind(lat), np.zeros(np.broadcast(lon, lat).shape)

    else:

        def velocity(lon, lat):
            shape = np.broadcast(lon, lat).shape
            return np.zeros(shape), np.zeros(shape)

    return velocity


def depth_field(spec, t=0.0):
    """Analytic depth as a function of (lon, lat)."""
    _check_time(spec, t)
    if spec.id == "tc2":
        u0, a = tc2_speed(), spec.alpha
        c = EARTH_RADIUS * OMEGA * u0 + 0.5 * u0 * u0

        def depth(lon, lat):
            mu = np.sin(lat) * np.cos(a) - np.cos(lon) * np.cos(lat) * np.sin(a)
            return (TC2_GH0 - c * mu * mu) / GRAVITY

    elif spec.id == "tc6":
        shift = tc6_drift_rate() * t
        r = TC6_R

        def depth(lon, lat):
            lam = np.asarray(lon, dtype=float) - shift
            a, b, cc = _tc6_coeffs(lat)
            gh = GRAVITY * TC6_DEPTH + EARTH_RADIUS ** 2 * (
                a + b * np.cos(r * lam) + cc * np.cos(2 * r * lam)
            )
            return gh / GRAVITY

    elif spec.id == "galewsky":
        depth = _galewsky_depth(spec.hill_amplitude)

    else:

        def depth(lon, lat):
            return REST_DEPTH + np.zeros(np.broadcast(lon, lat).shape)

    return depth


def vorticity_field(spec, t=0.0):
    """Analytic relative vorticity as a function of (lon, lat)."""
    _check_time(spec, t)
    if spec.id == "tc2":
        u0, a = tc2_speed(), spec.alpha

        def vorticity(lon, lat):
            mu = np.sin(lat) * np.cos(a) - np.cos(lon) * np.cos(lat) * np.sin(a)
            return 2.0 * u0 / EARTH_RADIUS * mu

    elif spec.id == "tc6":
        shift = tc6_drift_rate() * t
        r, k = TC6_R, TC6_K

        def vorticity(lon, lat):
            lam = np.asarray(lon, dtype=float) - shift
            s = np.sin(lat)
            return 2.0 * k * s - k * (r + 1) * (r + 2) * s * np.cos(lat) ** r * np.cos(r * lam)

    elif spec.id == "galewsky":
        raise TestCaseError("galewsky vorticity has no closed form here")

    else:

        def vorticity(lon, lat):
            return np.zeros(np.broadcast(lon, lat).shape)

    return vorticity


def has_reference(spec):
    """Whether the benchmark has an analytic solution at all times."""
    return spec.id in ("tc2", "tc6", "rest")


def analytic_reference(spec, t):
    """(velocity, depth, vorticity) callables for the solution at time t."""
    if not has_reference(spec):
        raise TestCaseError("%s has no analytic reference" % spec.id)
    return velocity_field(spec, t), depth_field(spec, t), vorticity_field(spec, t)


def init_state(spec, mesh, n_gauss=None):
    """Project the analytic initial fields onto the degrees of freedom."""
    u = velocity_dofs(mesh, velocity_field(spec), n_gauss)
    h = scalar_dofs(mesh, depth_field(spec), n_gauss)
    return State(u=u, h=h, t=0.0)


def field_error_norms(ops, dofs, reference, space, n_gauss=None):
    """Normalized L1/L2/Linf norms of (discrete field - reference).

    space selects the interpretation of dofs: "h" cell volumes against a
    scalar reference, "u" global fluxes against a (u_zonal, u_merid)
    reference, "w" point values against a scalar reference.  Norms are
    divided by the reference norm unless the reference is identically
    zero, in which case the absolute norms are returned.
    """
    mesh = ops.mesh
    sp = mesh.spaces
    n = int(n_gauss) if n_gauss else 4 * sp.p
    x, w1 = gauss_rule(n)
    X, Y = np.repeat(x, n), np.tile(x, n)
    wq = np.repeat(w1, n) * np.tile(w1, n)

    if space == "h":
        E = sp.eval_q(X, Y)
    elif space == "u":
        E = sp.eval_u(X, Y)
        local = ops.gather_u(dofs)
    elif space == "w":
        E = sp.eval_w(X, Y)
    else:
        raise ValueError("space must be one of h, u, w")

    num1 = den1 = num2 = den2 = 0.0
    numi = deni = 0.0
    for e in range(mesh.n_elem):
        lon, lat, J, det = mesh.chart(e, X, Y)
        wgt = wq * det
        if space == "h":
            field = (E @ dofs[mesh.map_q[e]]) / det
            diff = field - reference(lon, lat)
            ref = reference(lon, lat)
        elif space == "u":
            v_ref = (E @ local[e]).reshape(-1, 2)
            phys = np.einsum("qij,qj->qi", J, v_ref) / det[:, None]
            rz, rm = reference(lon, lat)
            diff = np.hypot(phys[:, 0] - rz, phys[:, 1] - rm)
            ref = np.hypot(rz, rm)
        else:
            field = E @ dofs[mesh.map_w[e]]
            diff = field - reference(lon, lat)
            ref = reference(lon, lat)
        adiff, aref = np.abs(diff), np.abs(ref)
        num1 += wgt @ adiff
        den1 += wgt @ aref
        num2 += wgt @ (adiff * adiff)
        den2 += wgt @ (aref * aref)
        numi = max(numi, adiff.max())
        deni = max(deni, aref.max())

    l1 = num1 / den1 if den1 > 0.0 else num1
    l2 = np.sqrt(num2) / np.sqrt(den2) if den2 > 0.0 else np.sqrt(num2)
    linf = numi / deni if deni > 0.0 else numi
    return float(l1), float(l2), float(linf)


def solution_errors(ops, state, spec, n_gauss=None):
    """L1/L2/Linf errors of depth, velocity, and absolute vorticity.

    The absolute vorticity compares the diagnosed weak curl plus the
    Coriolis parameter against the analytic value, as is conventional
    for these benchmarks.
    """
    vel, dep, vor = analytic_reference(spec, state.t)
    absvort = ops.weak_curl(state.u) + coriolis_field(ops.mesh, spec.alpha)

    def absvort_ref(lon, lat):
        return vor(lon, lat) + coriolis_parameter(lon, lat, spec.alpha)

    out = {}
    for prefix, norms in (
        ("h", field_error_norms(ops, state.h, dep, "h", n_gauss)),
        ("u", field_error_norms(ops, state.u, vel, "u", n_gauss)),
        ("absvort", field_error_norms(ops, absvort, absvort_ref, "w", n_gauss)),
    ):
        for tag, val in zip(("L1", "L2", "Linf"), norms):
            out["%s_%s" % (prefix, tag)] = val
    return out
