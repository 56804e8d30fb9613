"""System data model: machines, staged reduced network, scenarios."""
from .machine import (
    ALGEBRAIC_NAMES,
    OMEGA_S_60HZ,
    STATE_NAMES,
    AlgebraicState,
    MachineArrays,
    MachineParams,
    MachineState,
    SystemModel,
    algebraic_arrays,
    algebraic_eval,
    array_to_states,
    init_steady_state,
    state_derivative,
    states_to_array,
)
from .network import (
    STAGES,
    Branch,
    SingularNetworkError,
    StagedNetwork,
    augment_with_machines,
    build_ybus,
    kron_reduce,
    load_shunts,
    staged_matrices,
)
from .scenario import Scenario, ScenarioError, bundled_path, load_scenario, reduced_document, save_document

__all__ = [
    "ALGEBRAIC_NAMES", "OMEGA_S_60HZ", "STATE_NAMES", "STAGES",
    "AlgebraicState", "Branch", "MachineArrays", "MachineParams", "MachineState",
    "Scenario", "ScenarioError", "SingularNetworkError", "StagedNetwork", "SystemModel",
    "algebraic_arrays", "algebraic_eval", "array_to_states", "augment_with_machines",
    "build_ybus", "bundled_path", "init_steady_state", "kron_reduce", "load_scenario",
    "load_shunts", "reduced_document", "save_document", "staged_matrices",
    "state_derivative", "states_to_array",
]
