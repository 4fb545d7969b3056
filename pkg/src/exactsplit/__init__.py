"""Exact splitting methods for semigroups of quadratic differential operators.

Closed-form and fixed-point factorizations of e^{-t p^w} into
elementary pseudo-spectral steps, phase-space (matrix-level)
verification of their exactness, and an FFT-count-aware executor for
periodic grids.
"""

from .catalog import (
    SingularParameterError,
    affine_linear_split,
    dilatation,
    fokker_planck,
    fokker_planck_det,
    fokker_planck_matrix,
    harmonic_oscillator,
    kfp_det,
    kfp_matrix,
    kramers_fokker_planck,
    reflection1d,
    rotation2d,
    rotation_nd,
    shear_factorize,
    translate_conjugate_split,
)
from .engine import (
    AliasingError,
    ExecutionStats,
    Grid,
    StateField,
    apply_step,
    execute,
    gaussian,
    l2_error,
    l2_norm,
    load_field,
    save_field,
)
from .oracles import (
    DenseOperator,
    analytic_references,
    dense_semigroup,
    discretize_weyl,
    strang_harmonic,
)
from .program import SplitStep, SplittingProgram, step_symbol
from .solver import (
    DivergenceError,
    SchrodingerCoefficients,
    SplitReport,
    SubspaceDecomposition,
    generic_fixed_point,
    schrodinger_coefficients,
    schrodinger_program,
    verify_program,
)
from .symplectic import (
    AffineFlow,
    FlowMatrix,
    QuadraticSymbol,
    affine_flow,
    compose_affine,
    hamiltonian_flow,
    homogenize,
    is_nonneg_symplectic,
    lower_bound_decompose,
    poisson_bracket,
)

__version__ = "0.1.0"
