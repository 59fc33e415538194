"""Boundary representations, C*-envelopes and isomorphism of finite-dimensional operator systems."""

__version__ = "0.1.0"

from .algebra import BlockDecomposition, StarAlgebra, algebra_of, apply_irrep, block_decompose, center, commutant, generate_algebra
from .choquet import (
    analyze_boundary,
    c_star_envelope,
    find_peaking,
    is_boundary,
    is_reduced,
    ucp_extension_set,
    verify_peaking,
)
from .classify import (
    EquivalenceWitness,
    Fingerprint,
    decide_isomorphism,
    equivalence_residual,
    fingerprint,
    solve_theta,
    verify_equivalence,
)
from .errors import (
    DegenerateSpectrum,
    Infeasible,
    InternalConsistencyError,
    InvalidInput,
    NcbError,
    PreconditionError,
    SolverError,
    StarViolation,
    StructureViolation,
    UnitViolation,
)
from .feastool import Spectrahedron, feasibility_margin, find_point, maximize_linear, singleton_test, spectrahedron
from .generate import random_nonreduced, random_reduced
from .matlin import MatrixSubspace, frame_spectrum, orthonormalize_span
from .nonreduced import NonreducedSpec, build_and_verify, check_separations, check_subordination
from .opsys import (
    OperatorSystem,
    ParamMap,
    ParamSequence,
    build_opsys,
    extract_params,
    invariants,
    level_norm,
    operator_system,
    param_sequence,
    paulsen_device,
    self_adjoint_unit_basis,
    validate_param_map,
)
