"""Stochastic-approximation variational imaginary-time evolution toolkit."""

from .backend import (
    NoiseModel,
    Rng,
    ShotResult,
    expectation_exact,
    expectation_sampled,
    fidelity_compute_uncompute,
    fidelity_exact,
    fubini_study_distance,
    simulate,
)
from .circuits import Circuit, Gate, bind, build_hea, build_qaoa, fold_cx, inverse, twirl_cx
from .evolve import (
    EvolutionConfig,
    EvolutionResult,
    ResourceModel,
    count_measurements,
    integrated_infidelity,
    reference_taylor,
    saqite,
    subsample_states,
    varqite,
)
from .gradients import (
    EstimatorState,
    SamplerConfig,
    average_batch,
    evolution_gradient_exact,
    qgt_exact,
    sample_evolution_gradient,
    sample_qgt,
    sampling_error,
    update_global_average,
    update_momentum,
)
from .linsolve import eigh_symmetric, solve_diag_shift, solve_stable_subspace
from .mitigate import (
    CalibrationSet,
    MitigationReport,
    QuasiDistribution,
    ZneConfig,
    m3_mitigate,
    mitigated_energy,
    zne_extrapolate,
)
from .optimize import (
    IterateLog,
    OptimizerConfig,
    p_optimal,
    qnspsa_minimize,
    saqite_minimize,
    spsa_minimize,
)
from .pauli import (
    MeasurementBasis,
    PauliString,
    PauliSum,
    brute_force_minimum,
    build_ising_chain,
    build_ising_graph,
    build_maxcut_circle,
    group_commuting_bases,
)

__version__ = "0.1.0"
