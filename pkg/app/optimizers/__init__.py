from .weights import Weights, WeightBounds, SolverSettings
from .projection import project_to_feasible
from .classical_optimizer import (
    global_min_variance,
    max_return_portfolio,
    solve_mvp,
    solve_mvp_batch,
    solve_mrp,
    solve_msrp,
    solve_mop,
    frontier_weights,
)
from .qubo_annealer import (
    QuboModel,
    BinarySelection,
    AnnealSchedule,
    build_bmop,
    energy,
    anneal,
    exhaustive_min,
    selection_to_weights,
)

__all__ = [
    'Weights', 'WeightBounds', 'SolverSettings', 'project_to_feasible',
    'global_min_variance', 'max_return_portfolio', 'solve_mvp', 'solve_mvp_batch', 'solve_mrp',
    'solve_msrp', 'solve_mop', 'frontier_weights',
    'QuboModel', 'BinarySelection', 'AnnealSchedule', 'build_bmop', 'energy', 'anneal',
    'exhaustive_min', 'selection_to_weights',
]
