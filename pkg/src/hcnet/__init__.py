"""Heat conduction networks: uniqueness, support and regularity of invariant measures.

Networks of oscillators with convex pinning and interaction, friction on a
damped set and heat baths on a boundary set. Harmonic networks are decided
with linear algebra (:mod:`hcnet.harmonic`); general ones are probed by
deterministic flows, SDE simulation (:mod:`hcnet.dynamics`) and Lie brackets
(:mod:`hcnet.lie`).
"""
from .errors import (
    HCNError,
    NumericalError,
    PreconditionError,
    SpecError,
    SpecSyntaxError,
    UnstableSystemError,
    ValidationError,
)
from .network import (
    HARMONIC,
    NetworkSpec,
    Polynomial,
    builtin_names,
    chain,
    dumps_network,
    graph_matrices,
    harmonic_corpus,
    load_builtin,
    load_network,
    parse_network,
    random_network,
)
from .matkernel import (
    krylov_span,
    lyapunov_rank,
    matrix_exp,
    numerical_rank,
    propagate_covariance,
    solve_lyapunov,
    spectrum,
)
from .harmonic import (
    InvariantQuadratic,
    analyze,
    contraction_rate,
    invariant_quadratics,
    linear_system,
    stationary_covariance,
    tilted_covariance,
)
from .dynamics import (
    PhaseState,
    SimConfig,
    energy_balance,
    find_equilibrium,
    flow_damped,
    grad_hamiltonian,
    hamiltonian,
    lasalle_check,
    limit_system,
    rigidity_check,
    simulate,
    simulate_ensemble,
)
from .lie import Poly, PolyVectorField, generator_fields, hormander_rank, lie_basis, lie_bracket

__version__ = "0.1.0"
