"""Collective iterative learning control on lifted plants."""
from .collective import (
    CilcHistory, Collective, CollectiveReport, TrialStep, certify_collective, collective_update,
    contraction_locus, gamma_bar, kappa_bar, run_cilc, select_best_performer,
)
from .consensus import Topology, build_topology, diameter, elect_best_performer, run_distributed_cilc
from .errors import (
    BadPoleSet, CilcError, ConfigError, DimensionMismatch, EmptyCollective, IllPosed,
    NotStronglyConnected, NumericalBlowup, SequenceTooShort, SingularPlant, Uncontrollable,
    UnsupportedDimension,
)
from .lifted import (
    AgentLaw, ConvergenceReport, LiftedPlant, TrialRecord, analyze_agent, contraction_matrix,
    deadbeat_law, filter_matrix, ilc_update, make_lifted_plant, run_isolated_ilc, simulate_trial,
)
from .noilc import NoilcWeights, design_noilc, next_trial_cost
