from .g_objective import DiscreteInstance, g_min_closed_form, g_objective
from .path_search import brute_force_optimal_return
from .propositions import (
    brute_force_g_min,
    expectation_over_tuples,
    lemma_a4_descent,
    lemma_a4_loss,
    muzero_surrogate_expectation,
    prop21_witness,
    prop23_grid_oracle,
    prop23_value_bias,
)
from .simplex_grid import SimplexGrid
from .suite import CheckResult, run_verification_suite
