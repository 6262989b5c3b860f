"""Continuum routing toolkit for dense directional-antenna networks.

Solvers for flow assignment on a rectangular staggered grid where traffic
moves only west-to-east and north-to-south: a globally optimal assignment
and its user-equilibrium counterpart (Frank-Wolfe over exact DAG shortest
paths), a direct elliptic solve for affine costs, closed-form optimal path
geometry from the curl-gap sign structure, a separable analytic reference
solution, and a microscopic lattice simulator demonstrating route
convergence to the continuum limit.
"""

from .backend import active_backend, set_backend
from .costs import (Affine, CongestionIndependent, CostModel, Monomial,
                    cost_from_capacity_scaling)
from .dafermos import (Mode, SeparableSolution, equalized_cost_residual,
                       fit_stream_modes, flows_from_stream, reference_solutions,
                       stream_from_flows, stream_function)
from .errors import (DenserouteError, DomainError, FieldParseError,
                     NumericalError, PreconditionError,
                     UnsupportedGeometryError, ValidationError)
from .geometry import (BoundaryCosts, CurlGapField, GeometryCase, curl_gap,
                       point_to_boundary_path, point_to_point_path,
                       repeller_same_region_path)
from .grid import (FlowField, Grid, ScalarField, divergence, read_field,
                   read_flow, read_scalar, write_field, write_flow)
from .hjb import ValueField, all_or_nothing, extract_path, solve_value
from .netsim import NodeNetwork, RouteComparison, build_network, convergence_study, route
from .paths import (StaircasePath, green_check, hausdorff_distance,
                    line_integral, polyline_cost)
from .assignment import (AssignmentResult, ResidualReport, conservation_error,
                         kkt_residual, solve_affine_direct, solve_global,
                         solve_wardrop, wardrop_residual)
from .scenario import (ClassDemand, Scenario, SolverOptions, check_balance,
                       load_scenario, scenario_from_dict)

__version__ = "0.1.0"
