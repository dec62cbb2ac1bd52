"""Grand-canonical Lindblad dynamics over particle-number sectors.

Core modules:

- ``operators``: dense complex operator algebra and serialization
- ``gibbs``: canonical / grand-canonical states and chemical potential
- ``lindblad``: generators, propagation, steady states, equilibrium checks
- ``hierarchy``: sector windows and Metropolis sampling over particle number
- ``config`` / ``scenarios`` / ``service`` / ``cli``: config schema, scenario
  runners, the HTTP service, and the command-line client
"""

from .version import __version__

from .errors import (
    DimensionError,
    EigendecompositionError,
    GclindError,
    InvalidDensityError,
    NullSpaceError,
    NumericalFailure,
    PropagationError,
    ValidationFailure,
)
from .operators import (
    bracket,
    commutator,
    anticommutator,
    direct_sum,
    dump_operator,
    hermitian_function,
    interaction_picture,
    load_operator,
    partial_trace_b,
    tensor_product,
    trace_distance,
    validate_density,
)
from .gibbs import (
    GrandCanonicalSpec,
    ReservoirEnergyModel,
    TruncationWarning,
    bose_occupation,
    canonical_state,
    chemical_potential,
    full_gc_state,
    gc_statistics,
    sector_state,
    sector_weight,
)
from .lindblad import (
    InteractionSpec,
    JumpChannel,
    LindbladModel,
    TwoLevelBathParams,
    build_total_hamiltonian,
    check_equilibrium_condition,
    dissipator,
    effective_hamiltonian,
    lindblad_rhs,
    liouvillian_matrix,
    modified_rhs,
    propagate,
    stationarity_residual,
    steady_states,
    two_level_hamiltonian,
    two_level_thermal_channels,
)
from .hierarchy import (
    Chain,
    HierarchyConfig,
    Observable,
    SectorState,
    estimate_observable,
    evolve_window,
    fock_number_operator,
    init_hierarchy,
    metropolis_step,
    run_protocol,
    second_quantized_hamiltonian,
)

__all__ = [name for name in dir() if not name.startswith("_")]
