"""barronpde: frequency-domain elliptic PDE solver with norm certificates.

Functions are represented as finite Fourier-atom sums on a scaled integer
lattice; a contraction / Neumann-series scheme solves
-div(A grad u) + b.grad u + c u = f with explicit constants, and two-layer
cosine networks are extracted from solutions with dimension-free width
bounds.
"""

__version__ = "0.1.0"

from .atoms import (
    DEFAULT_ATOM_CAP,
    AtomMap,
    Lattice,
    RealAtomList,
    get_atom_cap,
    multiply,
    set_atom_cap,
)
from .errors import (
    A3ViolationError,
    AtomBudgetError,
    BarronPDEError,
    ConjugateSymmetryError,
    ConstructionError,
    DivergenceError,
    LatticeMismatchError,
    SchemaError,
    SolverError,
)
from .netx import Box, CosineNetwork, extract, fit_rate_slope, hk_error_box, hk_error_mc, rate_sweep
from .oracle import (
    ResidualStats,
    fd_partial_check,
    pointwise_product_check,
    residual_pointwise,
)
from .problem import (
    Constants,
    EllipticProblem,
    ValidationReport,
    counterexample_eta,
    discretize_gaussian,
    gaussian_tail_mass,
    neuron_bound,
    problem_from_json_obj,
    problem_to_json_obj,
    validate,
)
from .solver import (
    SolveOptions,
    SolveReport,
    apply_L,
    apply_T,
    div_E_grad,
    inner_solve,
    l0_apply,
    l0_inv,
    solve,
    symbol_factor,
)

__all__ = [
    "__version__",
    "A3ViolationError",
    "AtomBudgetError",
    "AtomMap",
    "BarronPDEError",
    "Box",
    "ConjugateSymmetryError",
    "ConstructionError",
    "Constants",
    "CosineNetwork",
    "DEFAULT_ATOM_CAP",
    "DivergenceError",
    "EllipticProblem",
    "Lattice",
    "LatticeMismatchError",
    "RealAtomList",
    "ResidualStats",
    "SchemaError",
    "SolveOptions",
    "SolveReport",
    "SolverError",
    "ValidationReport",
    "apply_L",
    "apply_T",
    "counterexample_eta",
    "discretize_gaussian",
    "div_E_grad",
    "extract",
    "fd_partial_check",
    "fit_rate_slope",
    "gaussian_tail_mass",
    "get_atom_cap",
    "hk_error_box",
    "hk_error_mc",
    "inner_solve",
    "l0_apply",
    "l0_inv",
    "multiply",
    "neuron_bound",
    "pointwise_product_check",
    "problem_from_json_obj",
    "problem_to_json_obj",
    "rate_sweep",
    "residual_pointwise",
    "set_atom_cap",
    "solve",
    "symbol_factor",
    "validate",
]
