"""Mixed mimetic spectral elements for the rotating shallow water equations
on the cubed sphere.

The package is organized bottom-up:

    basis      1D GLL rules, nodal and edge polynomials, 1D incidence matrix
    spaces     2D tensor-product spaces on the reference square, E10/E21, A/B/C
    geometry   cubed-sphere mesh, analytic Jacobians, Piola maps, global DOF maps
    assembly   metric mass matrices, weak/strong operators, preconditioned CG
    swe        shallow water tendencies, RK2 stepping, conservation monitors
    testcases  initial conditions, analytic references, error norms
    cli        batch driver writing CSV series and run summaries
    report     matplotlib rendering of finished run directories
"""

from .assembly import GlobalOperators, SolverError, build_operators, scalar_dofs, velocity_dofs
from .basis import Basis1D, GllRule, gll_rule, incidence_1d
from .geometry import (
    EARTH_RADIUS,
    GRAVITY,
    OMEGA,
    CubedSphereMesh,
    GeometryError,
    build_mesh,
    piola_to_sphere,
    sphere_to_piola,
)
from .spaces import LocalSpaces
from .swe import Model, State, coriolis_field, coriolis_parameter, default_viscosity
from .testcases import (
    TestCaseError,
    TestCaseSpec,
    analytic_reference,
    field_error_norms,
    init_state,
    solution_errors,
    testcase,
)

__all__ = [
    "Basis1D",
    "GllRule",
    "gll_rule",
    "incidence_1d",
    "LocalSpaces",
    "EARTH_RADIUS",
    "GRAVITY",
    "OMEGA",
    "CubedSphereMesh",
    "GeometryError",
    "build_mesh",
    "piola_to_sphere",
    "sphere_to_piola",
    "GlobalOperators",
    "SolverError",
    "build_operators",
    "scalar_dofs",
    "velocity_dofs",
    "Model",
    "State",
    "coriolis_field",
    "coriolis_parameter",
    "default_viscosity",
    "TestCaseError",
    "TestCaseSpec",
    "analytic_reference",
    "field_error_norms",
    "init_state",
    "solution_errors",
    "testcase",
]
