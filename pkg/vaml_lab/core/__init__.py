from .mdp import (
    ControlMdp,
    FiniteMdp,
    Trajectory,
    ValueTable,
    bellman_operator,
    exact_value,
    induce_policy_kernel,
    sample_trajectory,
)
