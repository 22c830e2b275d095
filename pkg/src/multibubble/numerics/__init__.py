from .report import CheckReport
from .quadrature import (RadialGrid, RadialFunction, gauss_grid, graded_grid,
                         quad_radial, fit_tail_exponent, SPHERE_AREA_S4)
from .ode import integrate_ode, Trajectory, IntegrationDivergence
from .eigen import smallest_eigenpairs, ConditioningError
from .sphere import minimize_on_sphere_sector, SectorMinimum, BoundaryMinimizerError
from .roots import bisect_predicate, Bracket

__all__ = ["CheckReport", "RadialGrid", "RadialFunction", "gauss_grid", "graded_grid",
           "quad_radial", "fit_tail_exponent", "SPHERE_AREA_S4", "integrate_ode",
           "Trajectory", "IntegrationDivergence", "smallest_eigenpairs", "ConditioningError",
           "minimize_on_sphere_sector", "SectorMinimum", "BoundaryMinimizerError",
           "bisect_predicate", "Bracket"]
