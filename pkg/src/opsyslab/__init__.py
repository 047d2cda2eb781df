"""Desk-scale numerics for finite-dimensional operator systems.

Matrix calculus, operator-system spans with certified distances, real-valued
sentences evaluated by nested seeded optimization, structure-detection
defects paired with exact oracles, and u.c.p. maps through Choi matrices.
"""

from .matrices import (
    DEFAULT_TOL,
    NotPsdError,
    Tolerance,
    adjoint,
    amplify,
    as_matrix,
    block,
    dist_to_psd,
    exp_i_hermitian,
    haar_unitary,
    hermitian_part,
    is_hermitian,
    lambda_min,
    load_matrix,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    psd_sqrt,
    random_contraction,
    random_hermitian,
    save_matrix,
    unitary_log,
)
from .systems import (
    BallSpec,
    OperatorSystem,
    canonicalize,
    diagonal_algebra,
    dist_to_system,
    full_matrix_algebra,
    is_product_closed,
    load_system,
    sample_ball,
    save_system,
    system_from_json,
    system_to_json,
    unitary_defect,
)
from .logic import (
    AbsDiff,
    Adj,
    Amp,
    Ball,
    Block,
    Const,
    DotMinus,
    EvalConfig,
    EvalResult,
    Inf,
    Lit,
    Max,
    Min,
    NestingDepthError,
    Norm,
    NormSq,
    Plus,
    Pred,
    PredicateRegistry,
    Prod,
    PsdDist,
    Scale,
    SpanDist,
    Sum,
    Sup,
    Times,
    Unit,
    UnitaryBall,
    Var,
    evaluate,
    free_variables,
    register_predicate,
    sentence_from_json,
    sentence_to_json,
    substitute,
)
from .defects import (
    ClosureReport,
    closure_gap,
    closure_sentence,
    completion_witness,
    four_unitary_sentence,
    product_certificate_sentence,
    product_closure_defect,
    product_distance,
    unitarity_score,
    unitarity_score_formula,
    unitary_average_decompose,
    unitary_detect,
    unitary_plateau_constant,
    unitary_product_gap,
    unitary_span_defect,
    walter_matrix,
)
from .ucp import (
    IsometryReport,
    PisierReport,
    UcpMap,
    apply_map,
    clock_shift_unitaries,
    cs_inequality_residual,
    isometry_check,
    kadison_schwarz_defect,
    load_ucp,
    mult_domain_defect,
    pisier_check,
    random_ucp,
    save_ucp,
    ucp_from_json,
    ucp_to_json,
)

__version__ = "0.1.0"
