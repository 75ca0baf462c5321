"""Classical solvers that produce ground-truth optimal controls."""

from .brachistochrone import (CycloidSolution, brachistochrone_analytic,
                              brachistochrone_time, cycloid_heights, solve_curve,
                              solve_curve_batch, travel_time)
from .direct import (DirectSolverConfig, Solution, adjoint_gradient,
                     finite_diff_objective_grad, solve_direct, solve_direct_batch)
from .zermelo import (ZermeloConfig, ZermeloSolution, best_time_score,
                      heading_rate_residual, navigation_rate, penalty_objective_grad,
                      solve_zermelo, solve_zermelo_batch, zermelo_formula_residual,
                      zermelo_rollout, zermelo_solve)

__all__ = [
    "CycloidSolution", "brachistochrone_analytic", "brachistochrone_time",
    "cycloid_heights", "solve_curve", "solve_curve_batch", "travel_time",
    "DirectSolverConfig", "Solution", "adjoint_gradient",
    "finite_diff_objective_grad", "solve_direct", "solve_direct_batch",
    "ZermeloConfig", "ZermeloSolution", "best_time_score", "heading_rate_residual",
    "navigation_rate", "penalty_objective_grad", "solve_zermelo",
    "solve_zermelo_batch", "zermelo_formula_residual", "zermelo_rollout",
    "zermelo_solve",
]
